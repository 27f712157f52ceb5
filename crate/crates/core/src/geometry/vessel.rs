use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Lower boundary `x1 = g(x2, ..., xd)` of a graph domain.
pub type BoundaryFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Number of lower-hemisphere directions probed by the graph-domain
/// containment test, in addition to the lowest point.
pub const DEFAULT_HEMISPHERE_SAMPLES: usize = 64;

/// The region `{x : x1 > g(x2, ..., xd)}`.
///
/// `g` is only ever evaluated pointwise. The lateral box is the declared
/// evaluation window used by quadrature and path planning; containment
/// queries outside it still call `g`.
#[derive(Clone)]
pub struct GraphDomain {
    g: BoundaryFn,
    dim: usize,
    lateral_lo: Vec<f64>,
    lateral_hi: Vec<f64>,
    // Unit vectors with non-positive first component, row-major `[m][dim]`.
    // The first row is always -e1.
    probes: Vec<f64>,
    label: String,
}

impl GraphDomain {
    pub fn new(
        dim: usize,
        g: BoundaryFn,
        lateral_lo: Vec<f64>,
        lateral_hi: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        Self::with_samples(dim, g, lateral_lo, lateral_hi, label, DEFAULT_HEMISPHERE_SAMPLES)
    }

    pub fn with_samples(
        dim: usize,
        g: BoundaryFn,
        lateral_lo: Vec<f64>,
        lateral_hi: Vec<f64>,
        label: impl Into<String>,
        samples: usize,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::param("dim", "must be at least 2"));
        }
        if lateral_lo.len() != dim - 1 || lateral_hi.len() != dim - 1 {
            return Err(Error::DimensionMismatch {
                expected: dim - 1,
                got: lateral_lo.len().min(lateral_hi.len()),
            });
        }
        if lateral_lo
            .iter()
            .zip(&lateral_hi)
            .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
        {
            return Err(Error::param("lateral box", "need finite lo < hi per coordinate"));
        }
        if samples == 0 {
            return Err(Error::param("samples", "must be positive"));
        }
        Ok(GraphDomain {
            g,
            dim,
            lateral_lo,
            lateral_hi,
            probes: hemisphere_probes(dim, samples),
            label: label.into(),
        })
    }

    pub fn eval(&self, lateral: &[f64]) -> f64 {
        (self.g)(lateral)
    }

    pub fn lateral_lo(&self) -> &[f64] {
        &self.lateral_lo
    }

    pub fn lateral_hi(&self) -> &[f64] {
        &self.lateral_hi
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Smallest centre height at which a ball of radius `r` over `lateral`
    /// clears the boundary at every probe point.
    fn floor_height(&self, lateral: &[f64], r: f64) -> f64 {
        let d = self.dim;
        let mut buf = vec![0.0; d - 1];
        let mut best = f64::NEG_INFINITY;
        for u in self.probes.chunks_exact(d) {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = lateral[i] + r * u[i + 1];
            }
            best = best.max(self.eval(&buf) - r * u[0]);
        }
        best
    }
}

impl fmt::Debug for GraphDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphDomain")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("lateral_lo", &self.lateral_lo)
            .field("lateral_hi", &self.lateral_hi)
            .field("probes", &(self.probes.len() / self.dim))
            .finish()
    }
}

fn hemisphere_probes(dim: usize, samples: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity((samples + 1) * dim);
    out.push(-1.0);
    out.extend(std::iter::repeat_n(0.0, dim - 1));
    match dim {
        2 => {
            // Angles strictly inside the lower half circle, both ends included.
            for i in 0..samples {
                let t = if samples == 1 {
                    0.5
                } else {
                    i as f64 / (samples - 1) as f64
                };
                let theta = std::f64::consts::PI * (0.5 + t);
                out.push(theta.cos());
                out.push(theta.sin());
            }
        }
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for i in 0..samples {
                let u1 = -((i as f64 + 0.5) / samples as f64);
                let rad = (1.0 - u1 * u1).max(0.0).sqrt();
                let phi = golden * i as f64;
                out.push(u1);
                out.push(rad * phi.cos());
                out.push(rad * phi.sin());
            }
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_9a7e);
            for _ in 0..samples {
                let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= n);
                v[0] = -v[0].abs();
                out.extend(v);
            }
        }
    }
    out
}

/// Container domain for the hard-core objects.
#[derive(Clone, Debug)]
pub enum Vessel {
    /// `{x : x1 > 0, |(x2, ..., xd)| < half_width}`: a cylinder closed at the
    /// bottom and open at the top. In two dimensions this is the strip
    /// `|x2| < half_width` above the floor `x1 = 0`.
    HalfCylinder { half_width: f64 },
    Graph(GraphDomain),
}

impl Vessel {
    pub fn half_cylinder(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::param("half_width", format!("must be > 0, got {half_width}")));
        }
        Ok(Vessel::HalfCylinder { half_width })
    }

    pub fn graph(
        dim: usize,
        g: BoundaryFn,
        lateral_lo: Vec<f64>,
        lateral_hi: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        GraphDomain::new(dim, g, lateral_lo, lateral_hi, label).map(Vessel::Graph)
    }

    pub fn half_width(&self) -> Option<f64> {
        match self {
            Vessel::HalfCylinder { half_width } => Some(*half_width),
            Vessel::Graph(_) => None,
        }
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        match self {
            Vessel::HalfCylinder { half_width } => format!("half_cylinder(half_width={half_width})"),
            Vessel::Graph(gd) => format!(
                "graph({}, lateral box {:?}..{:?})",
                gd.label(),
                gd.lateral_lo(),
                gd.lateral_hi()
            ),
        }
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        match self {
            Vessel::HalfCylinder { half_width } => {
                x[0] > 0.0 && lateral_norm(x) < *half_width
            }
            Vessel::Graph(gd) => x[0] > gd.eval(&x[1..]),
        }
    }

    /// Whether the closed ball of radius `radius - tol` about `center` lies in
    /// the closure of the vessel. Tangency with the wall counts as inside.
    #[inline]
    pub fn contains_ball(&self, center: &[f64], radius: f64, tol: f64) -> bool {
        match self {
            Vessel::HalfCylinder { half_width } => {
                center[0] >= radius - tol && lateral_norm(center) <= half_width - radius + tol
            }
            Vessel::Graph(gd) => {
                let r = (radius - tol).max(0.0);
                center[0] >= gd.floor_height(&center[1..], r)
            }
        }
    }

    /// Lowest admissible centre height for a ball of radius `radius` with the
    /// given lateral coordinates, ignoring side walls.
    pub fn floor_height(&self, lateral: &[f64], radius: f64) -> f64 {
        match self {
            Vessel::HalfCylinder { .. } => radius,
            Vessel::Graph(gd) => gd.floor_height(lateral, radius),
        }
    }

    /// Moves `center` the least amount needed to put the ball inside the
    /// vessel. Returns the length of the displacement.
    ///
    /// Exact for the half cylinder. For graph domains the ball is lifted
    /// straight up, which is minimal only when the boundary is flat.
    pub fn push_inside(&self, center: &mut [f64], radius: f64) -> f64 {
        match self {
            Vessel::HalfCylinder { half_width } => {
                let mut moved = 0.0;
                if center[0] < radius {
                    moved += (radius - center[0]).powi(2);
                    center[0] = radius;
                }
                let limit = (half_width - radius).max(0.0);
                let norm = lateral_norm(center);
                if norm > limit {
                    let scale = if norm > 0.0 { limit / norm } else { 0.0 };
                    for x in center[1..].iter_mut() {
                        let nx = *x * scale;
                        moved += (*x - nx).powi(2);
                        *x = nx;
                    }
                }
                moved.sqrt()
            }
            Vessel::Graph(gd) => {
                let floor = gd.floor_height(&center[1..], radius);
                if center[0] < floor {
                    let dz = floor - center[0];
                    center[0] = floor;
                    dz
                } else {
                    0.0
                }
            }
        }
    }

    /// How far the ball pokes out of the vessel (0 when inside).
    pub fn wall_violation(&self, center: &[f64], radius: f64) -> f64 {
        match self {
            Vessel::HalfCylinder { half_width } => {
                let below = radius - center[0];
                let side = lateral_norm(center) + radius - half_width;
                below.max(side).max(0.0)
            }
            Vessel::Graph(gd) => (gd.floor_height(&center[1..], radius) - center[0]).max(0.0),
        }
    }
}

#[inline]
pub(crate) fn lateral_norm(x: &[f64]) -> f64 {
    if x.len() == 2 {
        x[1].abs()
    } else {
        x[1..].iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl() -> Vessel {
        // x1 > x2^2
        Vessel::graph(2, Arc::new(|y: &[f64]| y[0] * y[0]), vec![-5.0], vec![5.0], "bowl").unwrap()
    }

    #[test]
    fn half_cylinder_rejects_nonpositive_width() {
        assert!(Vessel::half_cylinder(0.0).is_err());
        assert!(Vessel::half_cylinder(-1.0).is_err());
        assert!(Vessel::half_cylinder(f64::NAN).is_err());
    }

    #[test]
    fn resting_ball_is_inside() {
        let v = Vessel::half_cylinder(1.0).unwrap();
        assert!(v.contains_ball(&[0.1, 0.0], 0.1, 0.0));
        assert!(v.contains_ball(&[0.5, 0.9], 0.1, 0.0));
        assert!(!v.contains_ball(&[0.5, 0.91], 0.1, 0.0));
    }

    #[test]
    fn round_cross_section_in_three_dimensions() {
        let v = Vessel::half_cylinder(1.0).unwrap();
        // |(0.6, 0.6)| = 0.8485; plus 0.1 fits, plus 0.2 does not.
        assert!(v.contains_ball(&[1.0, 0.6, 0.6], 0.1, 0.0));
        assert!(!v.contains_ball(&[1.0, 0.6, 0.6], 0.2, 0.0));
    }

    #[test]
    fn bowl_containment_and_floor() {
        let v = bowl();
        assert!(v.contains_ball(&[1.0, 0.0], 0.1, 0.0));
        assert!(!v.contains_ball(&[0.05, 0.0], 0.1, 0.0));
        // Off-centre, the lower-left flank of the ball hits the parabola first.
        let floor = v.floor_height(&[0.5], 0.1);
        assert!(floor > 0.25 + 0.1 * 0.5);
        let mut c = [0.0, 0.5];
        v.push_inside(&mut c, 0.1);
        assert!(v.contains_ball(&c, 0.1, 0.0));
        assert!((c[0] - floor).abs() < 1e-15);
    }

    #[test]
    fn push_inside_half_cylinder_is_minimal() {
        let v = Vessel::half_cylinder(1.0).unwrap();
        let mut c = [-0.2, 1.5];
        let moved = v.push_inside(&mut c, 0.1);
        assert_eq!(c[0], 0.1);
        assert!((c[1] - 0.9).abs() < 1e-15);
        assert!((moved - (0.09f64 + 0.36).sqrt()).abs() < 1e-12);
        assert_eq!(v.wall_violation(&c, 0.1), 0.0);
    }
}

//! Planar free-placement search: can object `k` be put somewhere at least
//! `delta` lower than it is now?
//!
//! The admissible centres for object `k` (others held fixed) form the eroded
//! vessel minus the discs of radius `r_k + r_j` about every other centre. The
//! lowest point of any compact piece of that set is a vertex of the
//! arrangement: a corner of the eroded vessel, a wall/circle crossing or a
//! circle/circle crossing. Enumerating those vertices decides the question
//! exactly.

use crate::configuration::{Configuration, ModelSpec};
use crate::error::{Error, Result};
use crate::geometry::{dist_sq, NeighborGrid, Vessel};

/// Circles and walls are inflated by this much, so a reported placement has a
/// strictly positive clearance and survives the exact validity check.
const INFLATE: f64 = 1e-9;

/// Reusable search state for one configuration.
pub struct HoleFinder<'a> {
    spec: &'a ModelSpec,
    cfg: &'a Configuration,
    grid: NeighborGrid,
    half_width: f64,
}

impl<'a> HoleFinder<'a> {
    pub fn new(spec: &'a ModelSpec, cfg: &'a Configuration) -> Result<Self> {
        cfg.check_shape(spec)?;
        if spec.dim() != 2 {
            return Err(Error::PlanarOnly {
                op: "hole search",
                dim: spec.dim(),
            });
        }
        let half_width = match spec.vessel() {
            Vessel::HalfCylinder { half_width } => *half_width,
            Vessel::Graph(_) => {
                return Err(Error::UnsupportedVessel {
                    op: "hole search",
                    reason: "exact vertex enumeration needs straight walls".into(),
                })
            }
        };
        let grid = NeighborGrid::build(2, cfg.as_flat(), spec.radii())?;
        Ok(HoleFinder {
            spec,
            cfg,
            grid,
            half_width,
        })
    }

    fn admissible(&self, k: usize, p: [f64; 2], r: f64) -> bool {
        let slack = 0.5 * INFLATE;
        if p[0] < r - slack || p[1].abs() > self.half_width - r + slack {
            return false;
        }
        let mut ok = true;
        self.grid.for_each_candidate(&p, r + INFLATE, |j| {
            if ok && j != k {
                let need = r + self.spec.radius(j) - slack;
                if dist_sq(&p, self.cfg.center(j)) < need * need {
                    ok = false;
                }
            }
        });
        ok
    }

    /// Displacement `z` with `z1 < -delta` that moves object `k` to a free
    /// spot, choosing the shortest one; `None` when no such spot exists.
    pub fn find(&self, k: usize, delta: f64) -> Result<Option<[f64; 2]>> {
        self.spec.check_index(k)?;
        if !(delta > 0.0) {
            return Err(Error::param("delta", format!("must be > 0, got {delta}")));
        }
        let xk = self.cfg.center(k);
        let threshold = xk[0] - delta;
        let r = self.spec.radius(k) + INFLATE;
        let wall = self.half_width - r;
        if wall < 0.0 || r >= threshold {
            return Ok(None);
        }

        let mut best: Option<([f64; 2], f64)> = None;
        let mut consider = |p: [f64; 2]| {
            if !(p[0] < threshold) || !p[0].is_finite() || !p[1].is_finite() {
                return;
            }
            if !self.admissible(k, p, r - INFLATE) {
                return;
            }
            let z = [p[0] - xk[0], p[1] - xk[1]];
            let len = z[0] * z[0] + z[1] * z[1];
            if best.is_none_or(|(_, l)| len < l) {
                best = Some((z, len));
            }
        };

        consider([r, wall]);
        consider([r, -wall]);

        let n = self.cfg.len();
        let circle_radius = |j: usize| r + self.spec.radius(j);

        // Straight drop to the first contact below.
        let mut rest = r;
        for j in 0..n {
            let cj = self.cfg.center(j);
            let dx = cj[1] - xk[1];
            let rj = circle_radius(j);
            if j != k && cj[0] < xk[0] && dx.abs() < rj {
                rest = rest.max(cj[0] + (rj * rj - dx * dx).sqrt());
            }
        }
        consider([rest, xk[1]]);
        for i in 0..n {
            if i == k {
                continue;
            }
            let ci = self.cfg.center(i);
            let ri = circle_radius(i);
            if ci[0] - ri >= threshold {
                continue;
            }
            // Floor.
            let dy = r - ci[0];
            if dy.abs() <= ri {
                let h = (ri * ri - dy * dy).sqrt();
                consider([r, ci[1] + h]);
                consider([r, ci[1] - h]);
            }
            // Side walls.
            for side in [wall, -wall] {
                let dx = side - ci[1];
                if dx.abs() <= ri {
                    let h = (ri * ri - dx * dx).sqrt();
                    consider([ci[0] + h, side]);
                    consider([ci[0] - h, side]);
                }
            }
            // Other circles.
            let reach = ri + r;
            let mut partners = Vec::new();
            self.grid.for_each_candidate(ci, reach, |j| {
                if j > i && j != k {
                    partners.push(j);
                }
            });
            for j in partners {
                let cj = self.cfg.center(j);
                let rj = circle_radius(j);
                if cj[0] - rj >= threshold {
                    continue;
                }
                for p in circle_intersections(ci, ri, cj, rj) {
                    consider(p);
                }
            }
        }
        Ok(best.map(|(z, _)| z))
    }

    /// Whether no object can drop by more than `delta`, plus the per-object
    /// answers.
    pub fn no_room(&self, delta: f64) -> Result<(bool, Vec<bool>)> {
        let per: Vec<bool> = (0..self.cfg.len())
            .map(|k| self.find(k, delta).map(|z| z.is_none()))
            .collect::<Result<_>>()?;
        Ok((per.iter().all(|b| *b), per))
    }
}

fn circle_intersections(a: &[f64], ra: f64, b: &[f64], rb: f64) -> Vec<[f64; 2]> {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let d2 = dx * dx + dy * dy;
    let d = d2.sqrt();
    if d == 0.0 || d > ra + rb || d < (ra - rb).abs() {
        return Vec::new();
    }
    let along = (d2 + ra * ra - rb * rb) / (2.0 * d);
    let h = (ra * ra - along * along).max(0.0).sqrt();
    let mx = a[0] + along * dx / d;
    let my = a[1] + along * dy / d;
    vec![
        [mx - h * dy / d, my + h * dx / d],
        [mx + h * dy / d, my - h * dx / d],
    ]
}

/// Exact planar test for a hole at least `delta` below object `k`.
pub fn can_translate_down(
    spec: &ModelSpec,
    cfg: &Configuration,
    k: usize,
    delta: f64,
) -> Result<Option<Vec<f64>>> {
    spec.check_index(k)?;
    HoleFinder::new(spec, cfg)?
        .find(k, delta)
        .map(|z| z.map(|z| z.to_vec()))
}

//! Explicit motion plans between two valid configurations, each checked by
//! sampling validity along every segment.
//!
//! Half cylinder: the balls are parked one at a time, highest first, in a
//! column at `x2 = +w/2` above everything, travelling through a lane at
//! `x2 = -w/2`. The column is then reordered and the parking plan of the
//! target is run backwards.
//!
//! Graph domain: all balls are lifted together, spread by a dilation about
//! ball 0 until every gap exceeds the largest diameter, then stacked at
//! distinct heights and carried across through a far lateral lane.

use serde::Serialize;

use crate::configuration::{require_valid, validity_violation, Configuration, ModelSpec};
use crate::error::{Error, Result};
use crate::geometry::Vessel;
use crate::io::CsvTable;

/// Outcome of checking a piecewise-linear path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub valid: bool,
    pub segments: usize,
    pub samples_per_segment: usize,
    /// First failing segment and the fraction along it.
    pub failure: Option<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct ConnectivityPath {
    pub plan: &'static str,
    /// Consecutive waypoints are joined by straight segments traversed at
    /// equal speed by every object.
    pub waypoints: Vec<Configuration>,
    pub certificate: Certificate,
    pub notes: Vec<String>,
}

impl ConnectivityPath {
    /// One row per object and waypoint.
    pub fn polylines_csv(&self) -> CsvTable {
        let dim = self.waypoints.first().map_or(0, |c| c.dim());
        let mut header = vec!["object".to_string(), "vertex".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        let mut table = CsvTable::new(header);
        let n = self.waypoints.first().map_or(0, |c| c.len());
        for k in 0..n {
            for (v, cfg) in self.waypoints.iter().enumerate() {
                let mut row = vec![k.to_string(), v.to_string()];
                row.extend(cfg.center(k).iter().map(|x| x.to_string()));
                table.push(row);
            }
        }
        table
    }
}

// Coordinate-wise interpolation that keeps fixed coordinates bit-exact and
// hits both endpoints exactly.
fn interpolate(a: &Configuration, b: &Configuration, t: f64) -> Configuration {
    let mut out = a.clone();
    for (o, (&x, &y)) in out.as_flat_mut().iter_mut().zip(a.as_flat().iter().zip(b.as_flat())) {
        if x != y {
            *o = (1.0 - t) * x + t * y;
        }
    }
    out
}

/// Checks validity at `samples_per_segment` evenly spaced points of every
/// segment, endpoints included.
pub fn certify(spec: &ModelSpec, waypoints: &[Configuration], samples_per_segment: usize) -> Result<Certificate> {
    if samples_per_segment < 2 {
        return Err(Error::param("samples_per_segment", "need at least 2"));
    }
    let Some(first) = waypoints.first() else {
        return Err(Error::param("waypoints", "empty path"));
    };
    let segments = waypoints.len() - 1;
    let mut failure = None;
    if validity_violation(spec, first)?.is_some() {
        failure = Some((0, 0.0));
    }
    'outer: for (s, w) in waypoints.windows(2).enumerate() {
        if failure.is_some() {
            break;
        }
        for i in 1..samples_per_segment {
            let t = i as f64 / (samples_per_segment - 1) as f64;
            if validity_violation(spec, &interpolate(&w[0], &w[1], t))?.is_some() {
                failure = Some((s, t));
                break 'outer;
            }
        }
    }
    Ok(Certificate {
        valid: failure.is_none(),
        segments,
        samples_per_segment,
        failure,
    })
}

struct Builder {
    current: Configuration,
    waypoints: Vec<Configuration>,
}

impl Builder {
    fn new(start: Configuration) -> Self {
        Builder {
            waypoints: vec![start.clone()],
            current: start,
        }
    }

    fn move_ball(&mut self, k: usize, to: &[f64]) {
        if self.current.center(k) != to {
            self.current.center_mut(k).copy_from_slice(to);
            self.waypoints.push(self.current.clone());
        }
    }

    fn set(&mut self, cfg: Configuration) {
        if cfg != self.current {
            self.current = cfg.clone();
            self.waypoints.push(cfg);
        }
    }

    /// Appends the waypoints of `other` backwards; `other` must end where
    /// this builder currently is.
    fn extend_reversed(&mut self, other: Vec<Configuration>) {
        for cfg in other.into_iter().rev() {
            self.set(cfg);
        }
    }
}

/// Indices sorted by decreasing height, ties by index.
fn top_first(cfg: &Configuration) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cfg.len()).collect();
    order.sort_by(|&a, &b| cfg.height(b).total_cmp(&cfg.height(a)).then(a.cmp(&b)));
    order
}

fn with_height(c: &[f64], h: f64) -> Vec<f64> {
    let mut v = c.to_vec();
    v[0] = h;
    v
}

fn with_lateral(c: &[f64], lateral: &[f64]) -> Vec<f64> {
    let mut v = c.to_vec();
    v[1..].copy_from_slice(lateral);
    v
}

// Half cylinder ------------------------------------------------------------

struct Cylinder {
    lane: Vec<f64>,
    column: Vec<f64>,
    low: f64,
    spacing: f64,
}

impl Cylinder {
    /// Moves every ball of `cfg`, highest first, into slot `j` of the column
    /// at height `base + j * spacing` (`j = 1..=n`). Returns the waypoints
    /// and the ball in each slot.
    fn park(&self, cfg: &Configuration, base: f64) -> (Vec<Configuration>, Vec<usize>) {
        let mut b = Builder::new(cfg.clone());
        let order = top_first(cfg);
        for (j, &k) in order.iter().enumerate() {
            let slot = base + (j + 1) as f64 * self.spacing;
            let c = b.current.center(k).to_vec();
            let up = with_height(&c, self.low);
            b.move_ball(k, &up);
            let lane = with_lateral(&up, &self.lane);
            b.move_ball(k, &lane);
            let risen = with_height(&lane, slot);
            b.move_ball(k, &risen);
            b.move_ball(k, &with_lateral(&risen, &self.column));
        }
        (b.waypoints, order)
    }
}

fn cylinder_plan(
    spec: &ModelSpec,
    from: &Configuration,
    to: &Configuration,
    half_width: f64,
    notes: &mut Vec<String>,
) -> Result<Vec<Configuration>> {
    let w = half_width;
    let dmax = spec.max_diameter();
    if dmax > w {
        return Err(Error::param(
            "radii",
            format!("parking needs every diameter <= half_width ({dmax} > {w})"),
        ));
    }
    if dmax == w {
        notes.push("largest diameter equals half_width: lane and column are tangent".into());
    }
    let n = spec.n();
    let spacing = 1.25 * w;
    let top = (0..n)
        .map(|k| from.height(k).max(to.height(k)))
        .fold(f64::NEG_INFINITY, f64::max);
    let low = top + spacing;
    let lateral = spec.dim() - 1;
    let mut lane = vec![0.0; lateral];
    let mut column = vec![0.0; lateral];
    lane[0] = -0.5 * w;
    column[0] = 0.5 * w;
    let cyl = Cylinder {
        lane,
        column,
        low,
        spacing,
    };
    let (forward, slots_a) = cyl.park(from, low);
    let base_b = low + n as f64 * spacing;
    let (backward, slots_b) = cyl.park(to, base_b);

    let mut b = Builder::new(from.clone());
    for cfg in forward.into_iter().skip(1) {
        b.set(cfg);
    }
    // Column A slot j holds slots_a[j]; ball slots_b[i] goes to B slot i.
    let mut slot_of = vec![0; n];
    for (i, &k) in slots_b.iter().enumerate() {
        slot_of[k] = i;
    }
    for &k in slots_a.iter().rev() {
        let c = b.current.center(k).to_vec();
        let lane = with_lateral(&c, &cyl.lane);
        b.move_ball(k, &lane);
        let h = base_b + (slot_of[k] + 1) as f64 * spacing;
        let moved = with_height(&lane, h);
        b.move_ball(k, &moved);
        b.move_ball(k, &with_lateral(&moved, &cyl.column));
    }
    debug_assert_eq!(Some(&b.current), backward.last());
    b.extend_reversed(backward);
    notes.push(format!(
        "parking column at x2 = {}, lane at x2 = {}, slots every {spacing} from {low}",
        0.5 * w,
        -0.5 * w
    ));
    Ok(b.waypoints)
}

// Graph domain -------------------------------------------------------------

const RAY_SAMPLES: usize = 64;

fn max_floor_along(vessel: &Vessel, a: &[f64], b: &[f64], r: f64) -> f64 {
    let mut y = a.to_vec();
    let mut best = f64::NEG_INFINITY;
    for i in 0..=RAY_SAMPLES {
        let t = i as f64 / RAY_SAMPLES as f64;
        for (k, v) in y.iter_mut().enumerate() {
            *v = if a[k] == b[k] { a[k] } else { (1.0 - t) * a[k] + t * b[k] };
        }
        best = best.max(vessel.floor_height(&y, r));
    }
    best
}

/// Lift by `c1`, then dilate about ball 0 by `c2`. Returns the two
/// waypoints after `cfg`.
fn lift_and_dilate(spec: &ModelSpec, cfg: &Configuration, margin: f64) -> (Configuration, Configuration, f64, f64) {
    let n = cfg.len();
    let dmax = spec.max_diameter();
    let mut c2: f64 = 0.0;
    for j in 0..n {
        for k in j + 1..n {
            let d = crate::geometry::dist_sq(cfg.center(j), cfg.center(k)).sqrt();
            c2 = c2.max((dmax + spec.radius(j) + spec.radius(k)) / d - 1.0);
        }
    }
    c2 += 0.1;
    let z0 = cfg.center(0).to_vec();
    let dilated_center = |k: usize, t: f64| -> Vec<f64> {
        cfg.center(k)
            .iter()
            .zip(&z0)
            .map(|(z, o)| z + t * c2 * (z - o))
            .collect()
    };
    // Lowest lift keeping every sampled point of every ray above its floor.
    let mut c1: f64 = 0.0;
    for k in 0..n {
        for i in 0..=RAY_SAMPLES {
            let p = dilated_center(k, i as f64 / RAY_SAMPLES as f64);
            let floor = spec.vessel().floor_height(&p[1..], spec.radius(k));
            c1 = c1.max(floor - p[0]);
        }
    }
    c1 += margin;
    let mut lifted = cfg.clone();
    for k in 0..n {
        lifted.center_mut(k)[0] += c1;
    }
    let mut dilated = lifted.clone();
    for k in 0..n {
        let mut p = dilated_center(k, 1.0);
        p[0] += c1;
        dilated.center_mut(k).copy_from_slice(&p);
    }
    (lifted, dilated, c1, c2)
}

fn stack_up(cfg: &Configuration, base: f64, spacing: f64) -> (Vec<Configuration>, Vec<f64>) {
    let n = cfg.len();
    let mut b = Builder::new(cfg.clone());
    let mut level = vec![0.0; n];
    for (i, &k) in top_first(cfg).iter().enumerate() {
        level[k] = base + (n - i) as f64 * spacing;
        let c = b.current.center(k).to_vec();
        b.move_ball(k, &with_height(&c, level[k]));
    }
    (b.waypoints, level)
}

fn graph_plan(
    spec: &ModelSpec,
    from: &Configuration,
    to: &Configuration,
    notes: &mut Vec<String>,
) -> Result<Vec<Configuration>> {
    let n = spec.n();
    let dmax = spec.max_diameter();
    let (lift_x, dil_x, c1x, c2x) = lift_and_dilate(spec, from, dmax);
    let (lift_y, dil_y, c1y, c2y) = lift_and_dilate(spec, to, dmax);
    notes.push(format!("from: c1 = {c1x}, c2 = {c2x}; to: c1 = {c1y}, c2 = {c2y}"));

    let mut lane = vec![0.0; spec.dim() - 1];
    lane[0] = (0..n)
        .map(|k| dil_x.center(k)[1].max(dil_y.center(k)[1]))
        .fold(f64::NEG_INFINITY, f64::max)
        + 3.0 * dmax;

    // Every horizontal move happens at a stack level; all levels sit above
    // the highest sampled floor under those moves.
    let spacing = 2.0 * dmax;
    let mut floor = f64::NEG_INFINITY;
    for k in 0..n {
        let r = spec.radius(k);
        floor = floor.max(max_floor_along(spec.vessel(), &dil_x.center(k)[1..], &lane, r));
        floor = floor.max(max_floor_along(spec.vessel(), &lane, &dil_y.center(k)[1..], r));
        floor = floor.max(dil_x.height(k)).max(dil_y.height(k));
    }
    let base_a = floor + spacing;
    let base_b = base_a + n as f64 * spacing;
    let (stack_x, _) = stack_up(&dil_x, base_a, spacing);
    let (stack_y, level_y) = stack_up(&dil_y, base_b, spacing);

    let mut b = Builder::new(from.clone());
    b.set(lift_x);
    b.set(dil_x);
    for cfg in stack_x.into_iter().skip(1) {
        b.set(cfg);
    }
    let target = stack_y.last().expect("non-empty").clone();
    for k in 0..n {
        let c = b.current.center(k).to_vec();
        let in_lane = with_lateral(&c, &lane);
        b.move_ball(k, &in_lane);
        let moved = with_height(&in_lane, level_y[k]);
        b.move_ball(k, &moved);
        b.move_ball(k, target.center(k));
    }
    let mut back = vec![to.clone(), lift_y, dil_y];
    back.extend(stack_y.into_iter().skip(1));
    b.extend_reversed(back);
    notes.push(format!("stack levels from {base_a} every {spacing}, lane at {:?}", lane));
    Ok(b.waypoints)
}

/// Builds and certifies a motion plan from `from` to `to`.
pub fn connectivity_path(
    spec: &ModelSpec,
    from: &Configuration,
    to: &Configuration,
    samples_per_segment: usize,
) -> Result<ConnectivityPath> {
    require_valid(spec, from)?;
    require_valid(spec, to)?;
    let mut notes = Vec::new();
    let (plan, waypoints) = if from == to {
        ("trivial", vec![from.clone()])
    } else {
        match spec.vessel() {
            Vessel::HalfCylinder { half_width } => (
                "cylinder parking",
                cylinder_plan(spec, from, to, *half_width, &mut notes)?,
            ),
            Vessel::Graph(_) => ("graph lift, dilate and stack", graph_plan(spec, from, to, &mut notes)?),
        }
    };
    let certificate = certify(spec, &waypoints, samples_per_segment.max(2))?;
    if let Some((segment, fraction)) = certificate.failure {
        return Err(Error::CertificateFailed { segment, fraction });
    }
    Ok(ConnectivityPath {
        plan,
        waypoints,
        certificate,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::initial_configuration;
    use std::sync::Arc;

    #[test]
    fn identical_endpoints_give_a_point() {
        let spec = ModelSpec::uniform(2, Vessel::half_cylinder(1.0).unwrap(), 3, 0.2, 1.0).unwrap();
        let x = initial_configuration(&spec, 1).unwrap();
        let p = connectivity_path(&spec, &x, &x, 10).unwrap();
        assert_eq!(p.waypoints.len(), 1);
        assert!(p.certificate.valid && p.certificate.segments == 0);
    }

    #[test]
    fn swapped_pair_in_cylinder() {
        let spec = ModelSpec::uniform(2, Vessel::half_cylinder(0.5).unwrap(), 2, 0.2, 1.0).unwrap();
        let x = Configuration::new(2, vec![0.2, -0.25, 0.2, 0.25]).unwrap();
        let y = Configuration::new(2, vec![0.2, 0.25, 0.2, -0.25]).unwrap();
        let p = connectivity_path(&spec, &x, &y, 1000).unwrap();
        assert!(p.certificate.valid);
        assert_eq!(p.waypoints.first(), Some(&x));
        assert_eq!(p.waypoints.last(), Some(&y));
        // Each waypoint moves a single ball.
        for w in p.waypoints.windows(2) {
            let moved = (0..2).filter(|&k| w[0].center(k) != w[1].center(k)).count();
            assert_eq!(moved, 1);
        }
    }

    #[test]
    fn tangent_lane_is_flagged() {
        let spec = ModelSpec::uniform(2, Vessel::half_cylinder(0.4).unwrap(), 2, 0.2, 1.0).unwrap();
        let x = Configuration::new(2, vec![0.2, -0.2, 0.2, 0.2]).unwrap();
        let y = Configuration::new(2, vec![0.2, 0.2, 0.2, -0.2]).unwrap();
        let p = connectivity_path(&spec, &x, &y, 200).unwrap();
        assert!(p.notes.iter().any(|n| n.contains("tangent")));
        let wide = ModelSpec::uniform(2, Vessel::half_cylinder(0.3).unwrap(), 1, 0.2, 1.0).unwrap();
        let a = Configuration::new(2, vec![0.5, 0.0]).unwrap();
        let b = Configuration::new(2, vec![0.9, 0.0]).unwrap();
        assert!(connectivity_path(&wide, &a, &b, 10).is_err());
    }

    #[test]
    fn three_dimensional_cylinder() {
        let spec = ModelSpec::uniform(3, Vessel::half_cylinder(1.0).unwrap(), 5, 0.3, 1.0).unwrap();
        let x = initial_configuration(&spec, 2).unwrap();
        let y = initial_configuration(&spec, 3).unwrap();
        let p = connectivity_path(&spec, &x, &y, 100).unwrap();
        assert!(p.certificate.valid);
    }

    #[test]
    fn graph_domain_plan() {
        let bowl = Vessel::graph(2, Arc::new(|y: &[f64]| 0.5 * y[0] * y[0]), vec![-3.0], vec![3.0], "bowl").unwrap();
        let spec = ModelSpec::uniform(2, bowl, 5, 0.2, 1.0).unwrap();
        let x = initial_configuration(&spec, 4).unwrap();
        let y = initial_configuration(&spec, 5).unwrap();
        let p = connectivity_path(&spec, &x, &y, 200).unwrap();
        assert!(p.certificate.valid);
        assert_eq!(p.waypoints.last(), Some(&y));
        let csv = p.polylines_csv();
        assert_eq!(csv.len(), 5 * p.waypoints.len());
    }

    #[test]
    fn certify_catches_a_collision() {
        let spec = ModelSpec::uniform(2, Vessel::half_cylinder(1.0).unwrap(), 2, 0.2, 1.0).unwrap();
        let x = Configuration::new(2, vec![0.2, -0.5, 0.2, 0.5]).unwrap();
        let y = Configuration::new(2, vec![0.2, 0.5, 0.2, -0.5]).unwrap();
        let c = certify(&spec, &[x, y], 11).unwrap();
        assert!(!c.valid);
        assert_eq!(c.failure.unwrap().0, 0);
    }
}

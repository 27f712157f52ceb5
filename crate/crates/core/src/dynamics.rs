//! Time-stepped reflected dynamics: an Euler–Maruyama step followed by
//! iterative projection back onto the configuration space.
//!
//! In inertia mode every object `k` carries a mass `m_k`. The process is
//! defined through `w_k = m_k x_k`, which is reflected Brownian motion with
//! normal reflection and drift `-a_k m_k e1`. The engine works in the original
//! coordinates but applies exactly the pushes that normal reflection in `w`
//! induces: a pair pushed apart by `t` along `w` moves `x_j` by `t / m_j^2` and
//! `x_k` by `t / m_k^2`, and a single object's noise has variance
//! `dt / m_k^2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::configuration::{Configuration, ModelSpec};
use crate::error::{Error, Result};
use crate::geometry::{dist_sq, NeighborGrid};
use crate::io::Snapshot;

/// Above this many objects the pair scan uses a neighbour grid.
const BRUTE_FORCE_PAIRS: usize = 32;
const MAX_HALVINGS: u32 = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsParams {
    pub dt: f64,
    pub projection_tol: f64,
    pub max_projection_iters: usize,
    pub inertia_mode: bool,
}

impl DynamicsParams {
    /// `dt = 1e-4 * r_min^2`, tolerance `1e-10`, 200 projection passes.
    pub fn for_spec(spec: &ModelSpec) -> Self {
        let r_min = spec.radii().iter().copied().fold(f64::INFINITY, f64::min);
        DynamicsParams {
            dt: 1e-4 * r_min * r_min,
            projection_tol: 1e-10,
            max_projection_iters: 200,
            inertia_mode: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.projection_tol >= 0.0) {
            return Err(Error::param("projection_tol", "must be >= 0"));
        }
        if self.max_projection_iters == 0 {
            return Err(Error::param("max_projection_iters", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// `x^k -> m_k x^k` (forward) or `x^k -> x^k / m_k` (inverse).
pub fn inertia_transform(spec: &ModelSpec, cfg: &Configuration, direction: Direction) -> Result<Configuration> {
    cfg.check_shape(spec)?;
    let mut out = cfg.clone();
    for (k, &m) in spec.masses().iter().enumerate() {
        let f = match direction {
            Direction::Forward => m,
            Direction::Inverse => 1.0 / m,
        };
        for x in out.center_mut(k) {
            *x *= f;
        }
    }
    Ok(out)
}

/// Largest constraint violation: overlap depth of any pair or distance of
/// any object outside the vessel. Zero for a valid configuration.
pub fn max_violation(spec: &ModelSpec, cfg: &Configuration) -> Result<f64> {
    cfg.check_shape(spec)?;
    let mut worst: f64 = 0.0;
    for k in 0..cfg.len() {
        worst = worst.max(spec.vessel().wall_violation(cfg.center(k), spec.radius(k)));
    }
    for (_, _, depth) in overlapping_pairs(spec, cfg.as_flat(), cfg.dim())? {
        worst = worst.max(depth);
    }
    Ok(worst)
}

fn overlapping_pairs(spec: &ModelSpec, x: &[f64], dim: usize) -> Result<Vec<(usize, usize, f64)>> {
    let n = spec.n();
    let mut out = Vec::new();
    let mut check = |j: usize, k: usize| {
        let s = spec.radius(j) + spec.radius(k);
        let d2 = dist_sq(&x[j * dim..(j + 1) * dim], &x[k * dim..(k + 1) * dim]);
        if d2 < s * s {
            out.push((j, k, s - d2.sqrt()));
        }
    };
    if n <= BRUTE_FORCE_PAIRS {
        for j in 0..n {
            for k in j + 1..n {
                check(j, k);
            }
        }
    } else {
        let grid = NeighborGrid::build(dim, x, spec.radii())?;
        for j in 0..n {
            grid.for_each_candidate(&x[j * dim..(j + 1) * dim], spec.radius(j), |k| {
                if k > j {
                    check(j, k);
                }
            });
        }
    }
    Ok(out)
}

/// Displacements applied by one pair resolution, in original coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PairPush {
    pub moved_j: Vec<f64>,
    pub moved_k: Vec<f64>,
}

/// Pushes objects `j` and `k` apart along their centre line until they just
/// touch. With `inertial` the shares follow the masses as described in the
/// module docs; otherwise the split is symmetric. Returns `None` when the
/// pair does not overlap.
pub fn resolve_pair(
    spec: &ModelSpec,
    cfg: &mut Configuration,
    j: usize,
    k: usize,
    inertial: bool,
) -> Result<Option<PairPush>> {
    spec.check_index(j)?;
    spec.check_index(k)?;
    cfg.check_shape(spec)?;
    let (wj, wk) = if inertial {
        let m = spec.masses();
        (1.0 / (m[j] * m[j]), 1.0 / (m[k] * m[k]))
    } else {
        (1.0, 1.0)
    };
    let dim = cfg.dim();
    let sum = spec.radius(j) + spec.radius(k);
    Ok(push_pair(cfg.as_flat_mut(), dim, j, k, sum, wj, wk))
}

fn push_pair(x: &mut [f64], dim: usize, j: usize, k: usize, sum: f64, wj: f64, wk: f64) -> Option<PairPush> {
    let mut u = vec![0.0; dim];
    let mut d2 = 0.0;
    for i in 0..dim {
        u[i] = x[j * dim + i] - x[k * dim + i];
        d2 += u[i] * u[i];
    }
    if d2 >= sum * sum {
        return None;
    }
    let d = d2.sqrt();
    if d > 0.0 {
        for v in u.iter_mut() {
            *v /= d;
        }
    } else {
        // Coincident centres: separate along the lateral axis.
        u.iter_mut().for_each(|v| *v = 0.0);
        u[1] = 1.0;
    }
    let t = (sum - d) / (wj + wk);
    let moved_j: Vec<f64> = u.iter().map(|v| t * wj * v).collect();
    let moved_k: Vec<f64> = u.iter().map(|v| -t * wk * v).collect();
    for i in 0..dim {
        x[j * dim + i] += moved_j[i];
        x[k * dim + i] += moved_k[i];
    }
    Some(PairPush { moved_j, moved_k })
}

/// In-place stepping state shared by [`em_step`] and [`simulate`].
struct Stepper<'a> {
    spec: &'a ModelSpec,
    params: &'a DynamicsParams,
    /// `1 / m_k` in inertia mode, else 1.
    inv_m: Vec<f64>,
    /// Pair push weights `1 / m_k^2`.
    push_w: Vec<f64>,
    trial: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(spec: &'a ModelSpec, params: &'a DynamicsParams) -> Result<Self> {
        params.validate()?;
        let inv_m: Vec<f64> = if params.inertia_mode {
            spec.masses().iter().map(|m| 1.0 / m).collect()
        } else {
            vec![1.0; spec.n()]
        };
        let push_w = inv_m.iter().map(|v| v * v).collect();
        Ok(Stepper {
            spec,
            params,
            inv_m,
            push_w,
            trial: Vec::new(),
        })
    }

    /// One step of length `dt` from `x` into `self.trial`.
    fn try_step<R: Rng>(&mut self, x: &[f64], dim: usize, dt: f64, rng: &mut R) -> Result<()> {
        self.trial.clear();
        self.trial.extend_from_slice(x);
        let sq = dt.sqrt();
        for k in 0..self.spec.n() {
            let s = sq * self.inv_m[k];
            for i in 0..dim {
                let z: f64 = StandardNormal.sample(rng);
                self.trial[k * dim + i] += s * z;
            }
            // d(m x) = -a m dt, so dx = -a dt whatever the mass.
            self.trial[k * dim] -= self.spec.drift(k) * dt;
        }
        self.project(dim)
    }

    fn project(&mut self, dim: usize) -> Result<()> {
        let spec = self.spec;
        let tol = self.params.projection_tol;
        let mut passes = 0;
        loop {
            let mut pairs = overlapping_pairs(spec, &self.trial, dim)?;
            let mut worst = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
            for k in 0..spec.n() {
                worst = worst.max(spec.vessel().wall_violation(&self.trial[k * dim..(k + 1) * dim], spec.radius(k)));
            }
            if worst <= tol {
                return Ok(());
            }
            if passes == self.params.max_projection_iters {
                return Err(Error::ProjectionFailed {
                    iterations: passes,
                    max_violation: worst,
                    config: Box::new(Configuration::new(dim, self.trial.clone())?),
                });
            }
            passes += 1;
            pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
            for (j, k, _) in pairs {
                let sum = spec.radius(j) + spec.radius(k);
                push_pair(&mut self.trial, dim, j, k, sum, self.push_w[j], self.push_w[k]);
            }
            for k in 0..spec.n() {
                spec.vessel().push_inside(&mut self.trial[k * dim..(k + 1) * dim], spec.radius(k));
            }
        }
    }

    /// Advances `x` by `dt`, halving the step up to four times when the
    /// projection does not converge.
    fn advance<R: Rng>(&mut self, x: &mut [f64], dim: usize, dt: f64, rng: &mut R) -> Result<()> {
        self.advance_level(x, dim, dt, rng, 0)
    }

    fn advance_level<R: Rng>(&mut self, x: &mut [f64], dim: usize, dt: f64, rng: &mut R, level: u32) -> Result<()> {
        match self.try_step(x, dim, dt, rng) {
            Ok(()) => {
                x.copy_from_slice(&self.trial);
                Ok(())
            }
            Err(e) if level >= MAX_HALVINGS => Err(e),
            Err(_) => {
                self.advance_level(x, dim, 0.5 * dt, rng, level + 1)?;
                self.advance_level(x, dim, 0.5 * dt, rng, level + 1)
            }
        }
    }
}

/// One Euler–Maruyama step followed by projection. Does not retry; a
/// projection failure is returned to the caller.
pub fn em_step<R: Rng>(spec: &ModelSpec, cfg: &Configuration, params: &DynamicsParams, rng: &mut R) -> Result<Configuration> {
    cfg.check_shape(spec)?;
    let mut st = Stepper::new(spec, params)?;
    st.try_step(cfg.as_flat(), cfg.dim(), params.dt, rng)?;
    Configuration::new(cfg.dim(), st.trial)
}

fn check_start(spec: &ModelSpec, init: &Configuration, params: &DynamicsParams) -> Result<()> {
    params.validate()?;
    let v = max_violation(spec, init)?;
    if v > params.projection_tol {
        return Err(Error::InvalidConfiguration(format!(
            "initial configuration violates the constraints by {v}"
        )));
    }
    Ok(())
}

/// Runs the dynamics for time `t_end`, calling `observe(t, cfg)` at `t = 0`
/// and then every `observe_every` time units (rounded to whole steps).
pub fn simulate_with(
    spec: &ModelSpec,
    init: &Configuration,
    params: &DynamicsParams,
    t_end: f64,
    observe_every: f64,
    seed: u64,
    mut observe: impl FnMut(f64, &Configuration),
) -> Result<()> {
    check_start(spec, init, params)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::param("T", format!("must be >= 0, got {t_end}")));
    }
    if !(observe_every > 0.0) {
        return Err(Error::param("observe_every", "must be > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = Stepper::new(spec, params)?;
    let dim = init.dim();
    let mut cfg = init.clone();
    let steps = (t_end / params.dt).round() as u64;
    let every = ((observe_every / params.dt).round() as u64).max(1);
    observe(0.0, &cfg);
    for i in 1..=steps {
        st.advance(cfg.as_flat_mut(), dim, params.dt, &mut rng)?;
        if i % every == 0 {
            observe(i as f64 * params.dt, &cfg);
        }
    }
    Ok(())
}

/// [`simulate_with`], collecting snapshots tagged with the engine and `dt`.
pub fn simulate(
    spec: &ModelSpec,
    init: &Configuration,
    params: &DynamicsParams,
    t_end: f64,
    observe_every: f64,
    seed: u64,
) -> Result<Vec<Snapshot>> {
    let mut out = Vec::new();
    simulate_with(spec, init, params, t_end, observe_every, seed, |t, c| {
        out.push(Snapshot::from_time(spec, c, t, params.dt));
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::is_valid;
    use crate::geometry::Vessel;
    use crate::sampler::initial_configuration;
    use proptest::prelude::*;

    fn cyl() -> Vessel {
        Vessel::half_cylinder(1.0).unwrap()
    }

    #[test]
    fn symmetric_split() {
        let spec = ModelSpec::uniform(2, cyl(), 2, 0.1, 1.0).unwrap();
        let mut cfg = Configuration::new(2, vec![0.5, -0.09, 0.5, 0.09]).unwrap();
        let push = resolve_pair(&spec, &mut cfg, 0, 1, false).unwrap().unwrap();
        assert!((push.moved_j[1] + 0.01).abs() < 1e-15);
        assert!((push.moved_k[1] - 0.01).abs() < 1e-15);
        assert!((cfg.center(1)[1] - cfg.center(0)[1] - 0.2).abs() < 1e-15);
        assert!(resolve_pair(&spec, &mut cfg, 0, 1, false).unwrap().is_none());
    }

    #[test]
    fn zero_noise_zero_drift_is_identity() {
        let spec = ModelSpec::uniform(2, cyl(), 3, 0.1, 1.0).unwrap();
        let cfg = initial_configuration(&spec, 2).unwrap();
        // A vanishing time step leaves every centre unchanged.
        let params = DynamicsParams {
            dt: 1e-300,
            ..DynamicsParams::for_spec(&spec)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let next = em_step(&spec, &cfg, &params, &mut rng).unwrap();
        for (a, b) in next.as_flat().iter().zip(cfg.as_flat()) {
            assert!((a - b).abs() < 1e-140);
        }
    }

    #[test]
    fn floor_disc_stays_above_floor() {
        let spec = ModelSpec::uniform(2, cyl(), 1, 0.1, 5.0).unwrap();
        let params = DynamicsParams {
            dt: 1e-3,
            ..DynamicsParams::for_spec(&spec)
        };
        let mut cfg = Configuration::new(2, vec![0.1, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            cfg = em_step(&spec, &cfg, &params, &mut rng).unwrap();
            assert!(cfg.height(0) >= 0.1);
        }
    }

    #[test]
    fn transform_examples() {
        let spec = ModelSpec::uniform(2, cyl(), 2, 0.1, 1.0)
            .unwrap()
            .with_masses(vec![2.0, 1.0])
            .unwrap();
        let cfg = Configuration::new(2, vec![1.0, 0.5, 3.0, -0.25]).unwrap();
        let t = inertia_transform(&spec, &cfg, Direction::Forward).unwrap();
        assert_eq!(t.center(0), &[2.0, 1.0]);
        assert_eq!(t.center(1), &[3.0, -0.25]);
        let unit = ModelSpec::uniform(2, cyl(), 2, 0.1, 1.0).unwrap();
        assert_eq!(inertia_transform(&unit, &cfg, Direction::Forward).unwrap(), cfg);
    }

    #[test]
    fn zero_duration_gives_initial_snapshot() {
        let spec = ModelSpec::uniform(2, cyl(), 2, 0.1, 1.0).unwrap();
        let cfg = Configuration::new(2, vec![0.5, 0.0, 1.0, 0.0]).unwrap();
        let s = simulate(&spec, &cfg, &DynamicsParams::for_spec(&spec), 0.0, 1.0, 1).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].t, Some(0.0));
        assert_eq!(s[0].engine.as_deref(), Some("dynamics"));
    }

    #[test]
    fn dense_run_stays_within_tolerance() {
        let spec = ModelSpec::uniform(2, cyl(), 40, 0.1, 3.0).unwrap();
        let cfg = initial_configuration(&spec, 1).unwrap();
        let params = DynamicsParams {
            dt: 1e-4,
            ..DynamicsParams::for_spec(&spec)
        };
        let mut worst: f64 = 0.0;
        simulate_with(&spec, &cfg, &params, 0.5, 0.01, 3, |_, c| {
            worst = worst.max(max_violation(&spec, c).unwrap());
        })
        .unwrap();
        assert!(worst <= params.projection_tol);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = ModelSpec::uniform(2, cyl(), 5, 0.1, 1.0).unwrap();
        let cfg = initial_configuration(&spec, 3).unwrap();
        let p = DynamicsParams {
            dt: 1e-4,
            ..DynamicsParams::for_spec(&spec)
        };
        let a = simulate(&spec, &cfg, &p, 0.1, 0.01, 9).unwrap();
        let b = simulate(&spec, &cfg, &p, 0.1, 0.01, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 11);
        assert!(is_valid(&spec, &cfg).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn transform_round_trip(seed in 0u64..10_000) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let masses: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..5.0)).collect();
            let spec = ModelSpec::uniform(3, cyl(), 4, 0.1, 1.0).unwrap().with_masses(masses).unwrap();
            let cfg = Configuration::new(3, (0..12).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
            let there = inertia_transform(&spec, &cfg, Direction::Forward).unwrap();
            let back = inertia_transform(&spec, &there, Direction::Inverse).unwrap();
            for (a, b) in back.as_flat().iter().zip(cfg.as_flat()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn equal_mass_push_keeps_pair_centre(
            a in prop::array::uniform2(-0.2f64..0.2),
            b in prop::array::uniform2(-0.2f64..0.2),
        ) {
            let spec = ModelSpec::uniform(2, cyl(), 2, 0.15, 1.0).unwrap();
            let mut cfg = Configuration::new(2, vec![1.0 + a[0], a[1], 1.0 + b[0], b[1]]).unwrap();
            let before: Vec<f64> = (0..2).map(|i| cfg.center(0)[i] + cfg.center(1)[i]).collect();
            resolve_pair(&spec, &mut cfg, 0, 1, false).unwrap();
            for i in 0..2 {
                prop_assert!((cfg.center(0)[i] + cfg.center(1)[i] - before[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn heavy_object_takes_one_over_m_of_the_transformed_push(
            m1 in 1.0f64..8.0,
            a in prop::array::uniform2(-0.1f64..0.1),
        ) {
            let spec = ModelSpec::uniform(2, cyl(), 2, 0.15, 1.0).unwrap()
                .with_masses(vec![m1, 1.0]).unwrap();
            let mut cfg = Configuration::new(2, vec![1.0, 0.0, 1.0 + a[0], 0.05 + a[1]]).unwrap();
            let push = resolve_pair(&spec, &mut cfg, 0, 1, true).unwrap().unwrap();
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            // Transformed displacements are m_k times the original ones.
            let w1 = m1 * norm(&push.moved_j);
            let wk = norm(&push.moved_k);
            prop_assert!((w1 / wk - 1.0 / m1).abs() < 1e-9);
        }
    }
}

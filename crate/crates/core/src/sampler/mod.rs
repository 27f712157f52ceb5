//! Metropolis sampler for the stationary law of the reflected system.
//!
//! The target on the configuration space is `pi(dx) ∝ exp(2 x . v) dx` with
//! `v = ((-a_1, 0, ..), .., (-a_N, 0, ..))`. A move of one object changes only
//! its own factor, so the acceptance ratio is `exp(-2 a_k (new_1 - old_1))`
//! and the hard-core indicator rejects any overlapping or escaping proposal.
//! Proposals are symmetric Gaussians, so detailed balance holds exactly once
//! step sizes stop adapting.

mod diagnostics;
mod init;

pub use diagnostics::{diagnostics, ChainDiagnostics, MIN_SAMPLES};
pub use init::initial_configuration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::configuration::{require_valid, weighted_cm, Configuration, ModelSpec};
use crate::error::{Error, Result};
use crate::geometry::{overlapping, NeighborGrid};
use crate::io::Snapshot;

/// Steps between full recomputations of the cached weighted centre of mass.
const WCM_REFRESH: u64 = 10_000;

pub const DEFAULT_TARGET_ACCEPTANCE: f64 = 0.3;

/// `-2 a (new_1 - old_1)`: log of the target density ratio for moving one
/// object with drift magnitude `a`.
#[inline]
pub fn log_ratio_for_drift(drift: f64, old_height: f64, new_height: f64) -> f64 {
    -2.0 * drift * (new_height - old_height)
}

/// Log target ratio for moving object `k` from `old` to `new`.
pub fn log_target_ratio(spec: &ModelSpec, k: usize, old: &[f64], new: &[f64]) -> Result<f64> {
    spec.check_index(k)?;
    Ok(log_ratio_for_drift(spec.drift(k), old[0], new[0]))
}

#[derive(Clone, Debug)]
pub struct SamplerOptions {
    pub target_acceptance: f64,
    /// Sample the stationary law of the inertial system: the mass-scaled
    /// process `m_k x^k` reflects normally with drift `a_k m_k`, which in the
    /// original coordinates weights object `k` by `a_k m_k^2`.
    pub inertial: bool,
    /// Ignore the drift entirely (uniform law on the configuration space).
    pub zero_drift: bool,
    /// Initial proposal scale per object; defaults to the radii.
    pub step_scale: Option<Vec<f64>>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            target_acceptance: DEFAULT_TARGET_ACCEPTANCE,
            inertial: false,
            zero_drift: false,
            step_scale: None,
        }
    }
}

/// Position, generator and bookkeeping of one Markov chain.
#[derive(Clone, Debug)]
pub struct ChainState {
    cfg: Configuration,
    grid: NeighborGrid,
    rng: ChaCha8Rng,
    seed: u64,
    stream: u64,
    step_scale: Vec<f64>,
    drifts: Vec<f64>,
    options: SamplerOptions,
    accepted: u64,
    rejected: u64,
    rejected_invalid: u64,
    sweeps: u64,
    wcm: f64,
    since_refresh: u64,
    adapting: bool,
    adapt_counts: Vec<u64>,
    proposal: Vec<f64>,
}

impl ChainState {
    pub fn new(spec: &ModelSpec, cfg: Configuration, seed: u64) -> Result<Self> {
        Self::with_options(spec, cfg, seed, 0, SamplerOptions::default())
    }

    /// `stream` selects an independent generator stream for the same seed,
    /// one per replica.
    pub fn with_options(
        spec: &ModelSpec,
        cfg: Configuration,
        seed: u64,
        stream: u64,
        options: SamplerOptions,
    ) -> Result<Self> {
        require_valid(spec, &cfg)?;
        let step_scale = match &options.step_scale {
            Some(s) if s.len() != spec.n() => {
                return Err(Error::DimensionMismatch {
                    expected: spec.n(),
                    got: s.len(),
                })
            }
            Some(s) if s.iter().any(|x| !(*x > 0.0)) => {
                return Err(Error::param("step_scale", "must be positive"))
            }
            Some(s) => s.clone(),
            None => spec.radii().to_vec(),
        };
        if !(options.target_acceptance > 0.0 && options.target_acceptance < 1.0) {
            return Err(Error::param("target_acceptance", "must lie in (0, 1)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let grid = NeighborGrid::build(cfg.dim(), cfg.as_flat(), spec.radii())?;
        let n = spec.n();
        let dim = cfg.dim();
        let mut state = ChainState {
            wcm: weighted_cm(spec, &cfg),
            cfg,
            grid,
            rng,
            seed,
            stream,
            step_scale,
            drifts: Vec::new(),
            options,
            accepted: 0,
            rejected: 0,
            rejected_invalid: 0,
            sweeps: 0,
            since_refresh: 0,
            adapting: false,
            adapt_counts: vec![0; n],
            proposal: vec![0.0; dim],
        };
        state.drifts = state.effective_drifts(spec);
        Ok(state)
    }

    fn effective_drifts(&self, spec: &ModelSpec) -> Vec<f64> {
        (0..spec.n())
            .map(|k| {
                if self.options.zero_drift {
                    0.0
                } else if self.options.inertial {
                    let m = spec.masses()[k];
                    spec.drift(k) * m * m
                } else {
                    spec.drift(k)
                }
            })
            .collect()
    }

    /// Switches to another model with the same objects and vessel (for
    /// example a new drift scale), keeping position and generator.
    pub fn retarget(&mut self, spec: &ModelSpec) -> Result<()> {
        self.cfg.check_shape(spec)?;
        self.drifts = self.effective_drifts(spec);
        self.wcm = weighted_cm(spec, &self.cfg);
        Ok(())
    }

    pub fn configuration(&self) -> &Configuration {
        &self.cfg
    }

    pub fn into_configuration(self) -> Configuration {
        self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn step_scale(&self) -> &[f64] {
        &self.step_scale
    }

    /// Drift magnitudes actually used in the acceptance ratio.
    pub fn drifts(&self) -> &[f64] {
        &self.drifts
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    /// Rejections caused by leaving the configuration space.
    pub fn rejected_invalid(&self) -> u64 {
        self.rejected_invalid
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn acceptance_rate(&self) -> f64 {
        let total = self.accepted + self.rejected;
        if total == 0 {
            0.0
        } else {
            self.accepted as f64 / total as f64
        }
    }

    pub fn reset_counters(&mut self) {
        self.accepted = 0;
        self.rejected = 0;
        self.rejected_invalid = 0;
    }

    /// Cached weighted centre of mass.
    pub fn wcm(&self) -> f64 {
        self.wcm
    }

    pub fn set_adapting(&mut self, on: bool) {
        self.adapting = on;
    }

    pub fn is_adapting(&self) -> bool {
        self.adapting
    }

    fn adapt(&mut self, k: usize, accepted: bool, radius: f64) {
        self.adapt_counts[k] += 1;
        let gain = (self.adapt_counts[k] as f64).powf(-0.6);
        let hit = if accepted { 1.0 } else { 0.0 };
        let s = self.step_scale[k] * (gain * (hit - self.options.target_acceptance)).exp();
        self.step_scale[k] = s.clamp(1e-7 * radius, 1e3 * radius);
    }

    /// One Metropolis update of a uniformly chosen object. Returns whether
    /// the proposal was accepted.
    #[inline]
    pub fn step(&mut self, spec: &ModelSpec) -> bool {
        let n = spec.n();
        let k = self.rng.random_range(0..n);
        let s = self.step_scale[k];
        let old = self.cfg.center(k);
        for (p, o) in self.proposal.iter_mut().zip(old) {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *p = o + s * z;
        }
        let u: f64 = self.rng.random();
        let log_r = log_ratio_for_drift(self.drifts[k], old[0], self.proposal[0]);
        let radius = spec.radius(k);

        let mut ok = log_r >= 0.0 || u < log_r.exp();
        let mut invalid = false;
        if ok && !spec.vessel().contains_ball(&self.proposal, radius, 0.0) {
            ok = false;
            invalid = true;
        }
        if ok {
            let cfg = &self.cfg;
            let prop = &self.proposal;
            let mut clear = true;
            self.grid.for_each_candidate(prop, radius, |j| {
                if clear && j != k && overlapping(prop, cfg.center(j), radius + spec.radius(j)) {
                    clear = false;
                }
            });
            if !clear {
                ok = false;
                invalid = true;
            }
        }

        if ok {
            let dh = self.proposal[0] - self.cfg.height(k);
            self.wcm += spec.weights()[k] * dh;
            self.cfg.center_mut(k).copy_from_slice(&self.proposal);
            self.grid.move_unchecked(k, &self.proposal);
            self.accepted += 1;
        } else {
            self.rejected += 1;
            if invalid {
                self.rejected_invalid += 1;
            }
        }
        if self.adapting {
            self.adapt(k, ok, radius);
        }
        self.since_refresh += 1;
        if self.since_refresh >= WCM_REFRESH {
            self.wcm = weighted_cm(spec, &self.cfg);
            self.since_refresh = 0;
        }
        ok
    }

    /// `N` single-object updates.
    pub fn sweep(&mut self, spec: &ModelSpec) {
        for _ in 0..spec.n() {
            self.step(spec);
        }
        self.sweeps += 1;
    }
}

/// One Metropolis update; see [`ChainState::step`].
pub fn mh_step(spec: &ModelSpec, state: &mut ChainState) -> bool {
    state.step(spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Total sweeps, burn-in included.
    pub sweeps: u64,
    pub thin: u64,
    /// Sweeps with step-size adaptation; nothing is emitted during them.
    pub burn_in: u64,
}

impl RunOptions {
    fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::param("thin", "must be >= 1"));
        }
        if self.sweeps < self.burn_in {
            return Err(Error::param("sweeps", "must be >= burn_in"));
        }
        Ok(())
    }
}

/// Runs the chain, calling `observe(sweep, state)` after every `thin`-th
/// post-burn-in sweep. Adaptation is on during burn-in and frozen after.
pub fn run_chain_with(
    spec: &ModelSpec,
    state: &mut ChainState,
    opts: RunOptions,
    mut observe: impl FnMut(u64, &ChainState),
) -> Result<()> {
    opts.validate()?;
    state.cfg.check_shape(spec)?;
    state.set_adapting(true);
    for _ in 0..opts.burn_in {
        state.sweep(spec);
    }
    state.set_adapting(false);
    for i in 1..=(opts.sweeps - opts.burn_in) {
        state.sweep(spec);
        if i % opts.thin == 0 {
            observe(opts.burn_in + i, state);
        }
    }
    Ok(())
}

/// Runs the chain and collects snapshots.
pub fn run_chain(spec: &ModelSpec, state: &mut ChainState, opts: RunOptions) -> Result<Vec<Snapshot>> {
    let mut out = Vec::new();
    run_chain_with(spec, state, opts, |sweep, st| {
        out.push(Snapshot::from_sweep(spec, st.configuration(), sweep));
    })?;
    Ok(out)
}

/// Burn-in length from a pilot run on a copy of the chain: twenty
/// autocorrelation times of the weighted centre of mass, at least `1000`
/// sweeps.
pub fn auto_burn_in(spec: &ModelSpec, state: &ChainState, pilot_sweeps: u64) -> Result<u64> {
    let mut pilot = state.clone();
    let mut series = Vec::with_capacity(pilot_sweeps as usize);
    pilot.set_adapting(true);
    for _ in 0..pilot_sweeps / 2 {
        pilot.sweep(spec);
    }
    pilot.set_adapting(false);
    for _ in 0..pilot_sweeps - pilot_sweeps / 2 {
        pilot.sweep(spec);
        series.push(pilot.wcm());
    }
    let d = diagnostics(&series, None)?;
    let tau = if d.converged { d.tau.max(0.0) } else { series.len() as f64 };
    Ok(((20.0 * tau).ceil() as u64).max(1000))
}

/// Result of an annealing run.
#[derive(Clone, Debug)]
pub struct AnnealOutcome {
    pub state: ChainState,
    pub best: Configuration,
    pub best_wcm: f64,
}

/// Runs the chain through an increasing drift-scale schedule, carrying the
/// configuration forward, and keeps the lowest weighted centre of mass seen
/// at the end of any sweep.
pub fn anneal(
    spec: &ModelSpec,
    init: Configuration,
    schedule: &[f64],
    sweeps_per_stage: u64,
    seed: u64,
) -> Result<AnnealOutcome> {
    if schedule.is_empty() {
        return Err(Error::param("schedule", "empty drift-scale schedule"));
    }
    if schedule.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::param("schedule", "drift scales must be non-decreasing"));
    }
    let first = spec.with_drift_scale(schedule[0])?;
    let state = ChainState::new(&first, init, seed)?;
    anneal_state(spec, state, schedule, sweeps_per_stage)
}

/// [`anneal`] starting from an existing chain.
pub fn anneal_state(
    spec: &ModelSpec,
    mut state: ChainState,
    schedule: &[f64],
    sweeps_per_stage: u64,
) -> Result<AnnealOutcome> {
    if schedule.is_empty() {
        return Err(Error::param("schedule", "empty drift-scale schedule"));
    }
    let mut best = state.configuration().clone();
    let mut best_wcm = weighted_cm(spec, &best);
    for &lambda in schedule {
        let staged = spec.with_drift_scale(lambda)?;
        state.retarget(&staged)?;
        state.set_adapting(true);
        for _ in 0..sweeps_per_stage {
            state.sweep(&staged);
            if state.wcm() < best_wcm {
                best_wcm = state.wcm();
                best = state.configuration().clone();
            }
        }
    }
    state.set_adapting(false);
    // The cache may carry a little rounding; report the exact value.
    best_wcm = weighted_cm(spec, &best);
    Ok(AnnealOutcome {
        state,
        best,
        best_wcm,
    })
}

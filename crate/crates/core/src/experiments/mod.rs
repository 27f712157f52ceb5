//! Desk-scale drivers for the macroscopic predictions: each runs the sampler
//! at declared parameters and seed and reports empirical event frequencies
//! with confidence intervals.
//!
//! The underlying statements are asymptotic in the drift scale, so every
//! threshold a report checks against is a declared, artifact-chosen number.

mod connectivity;
mod theorems;
mod vessel_check;

pub use connectivity::{certify, connectivity_path, Certificate, ConnectivityPath};
pub use theorems::{
    archimedes_experiment, centrifuge_experiment, concentration_experiment, surface_experiment,
    ArchimedesMode, ArchimedesParams, ArchimedesStart, CentrifugeParams, ConcentrationParams, SurfaceParams,
    ARCHIMEDES_CRITICAL, ARCHIMEDES_PRECONDITION,
};
pub use vessel_check::{check_vessel, VesselCheck, VesselCheckOptions, VesselCheckRow};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::configuration::{Configuration, ModelSpec};
use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::sampler::{diagnostics, ChainState, SamplerOptions};

/// Parameters echoed into every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpecEcho {
    pub dim: usize,
    pub n: usize,
    pub vessel: String,
    pub radii: Vec<f64>,
    pub weights: Vec<f64>,
    pub drift_scale: f64,
    pub masses: Vec<f64>,
}

impl SpecEcho {
    pub fn new(spec: &ModelSpec) -> Self {
        SpecEcho {
            dim: spec.dim(),
            n: spec.n(),
            vessel: spec.vessel().describe(),
            radii: spec.radii().to_vec(),
            weights: spec.weights().to_vec(),
            drift_scale: spec.drift_scale(),
            masses: spec.masses().to_vec(),
        }
    }
}

/// Empirical frequency of a binary event.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventEstimate {
    pub event: String,
    pub lambda: f64,
    pub successes: usize,
    pub samples: usize,
    /// Effective sample size of the chain the event was read from.
    pub ess: f64,
    pub probability: f64,
    /// 95% Wilson interval computed with `min(ess, samples)` trials.
    pub interval: [f64; 2],
    pub low_ess: bool,
}

/// ESS below which an estimate is flagged.
pub const MIN_ESS: f64 = 100.0;

/// 95% Wilson score interval for `successes` out of `samples`, with the
/// trial count replaced by `ess` when that is smaller.
pub fn wilson_interval(successes: usize, samples: usize, ess: f64) -> [f64; 2] {
    if samples == 0 {
        return [0.0, 1.0];
    }
    let p = successes as f64 / samples as f64;
    let n = ess.min(samples as f64);
    if !(n > 0.0) {
        return [0.0, 1.0];
    }
    let z = 1.959963984540054;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == samples { 1.0 } else { (centre + half).min(1.0) };
    [lo, hi]
}

impl EventEstimate {
    /// `series` is a continuous statistic tracked alongside the event; its
    /// autocorrelation sets the effective sample size.
    pub fn from_samples(event: &str, lambda: f64, hits: &[bool], series: &[f64]) -> Result<Self> {
        let samples = hits.len();
        let successes = hits.iter().filter(|h| **h).count();
        let ess = effective_size(series)?;
        Ok(EventEstimate {
            event: event.to_string(),
            lambda,
            successes,
            samples,
            ess,
            probability: successes as f64 / samples.max(1) as f64,
            interval: wilson_interval(successes, samples, ess),
            low_ess: ess < MIN_ESS,
        })
    }
}

/// Effective sample size of a statistic; a frozen series has none.
pub fn effective_size(series: &[f64]) -> Result<f64> {
    let d = diagnostics(series, None)?;
    Ok(if d.converged { d.ess.min(series.len() as f64) } else { 0.0 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub spec: SpecEcho,
    pub parameters: serde_json::Value,
    pub estimates: Vec<EventEstimate>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub notes: Vec<String>,
    /// Per-sample observables; written next to the JSON as CSV.
    #[serde(skip)]
    pub observables: CsvTable,
}

impl ExperimentReport {
    pub(crate) fn new(name: &str, seed: u64, spec: &ModelSpec, parameters: serde_json::Value) -> Self {
        ExperimentReport {
            name: name.to_string(),
            seed,
            spec: SpecEcho::new(spec),
            parameters,
            estimates: Vec::new(),
            checks: Vec::new(),
            passed: false,
            notes: Vec::new(),
            observables: CsvTable::default(),
        }
    }

    pub(crate) fn finish(mut self) -> Self {
        self.passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
        self
    }

    pub fn estimate(&self, event: &str, lambda: f64) -> Option<&EventEstimate> {
        self.estimates.iter().find(|e| e.event == event && e.lambda == lambda)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<stem>.json` and `<stem>.observables.v1.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()? + "\n")?;
        self.observables.write(&dir.join(format!("{stem}.observables.v1.csv")))?;
        Ok(())
    }
}

/// Whether `p` rises along the list, allowing at most one decrease and
/// only one whose 95% intervals overlap.
pub fn monotone_with_one_overlap(estimates: &[&EventEstimate]) -> (bool, String) {
    let mut drops = 0;
    for w in estimates.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.probability < a.probability {
            let overlap = b.interval[1] >= a.interval[0];
            if !overlap {
                return (
                    false,
                    format!("drop at lambda {} -> {} without interval overlap", a.lambda, b.lambda),
                );
            }
            drops += 1;
        }
    }
    (drops <= 1, format!("{drops} overlapping drop(s)"))
}

/// How a chain gets from its start to the target law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingPlan {
    /// First drift scale of a geometric ramp up to the target; no ramp when
    /// the target is at or below it.
    pub ramp_from: f64,
    pub ramp_stages: usize,
    pub ramp_sweeps: u64,
    /// Adaptive sweeps at the target before sampling.
    pub burn_in: u64,
    pub samples: usize,
    pub thin: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            ramp_from: 1.0,
            ramp_stages: 8,
            ramp_sweeps: 500,
            burn_in: 2000,
            samples: 1000,
            thin: 10,
        }
    }
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        if self.samples < crate::sampler::MIN_SAMPLES {
            return Err(Error::param(
                "samples",
                format!("need at least {} for diagnostics", crate::sampler::MIN_SAMPLES),
            ));
        }
        if self.thin == 0 {
            return Err(Error::param("thin", "must be >= 1"));
        }
        if !(self.ramp_from > 0.0) {
            return Err(Error::param("ramp_from", "must be > 0"));
        }
        Ok(())
    }

    /// Drift scales visited before the target.
    pub fn ramp_to(&self, target: f64) -> Vec<f64> {
        if target <= self.ramp_from || self.ramp_stages == 0 {
            return Vec::new();
        }
        let ratio = (target / self.ramp_from).ln();
        (0..self.ramp_stages)
            .map(|i| self.ramp_from * (ratio * i as f64 / self.ramp_stages as f64).exp())
            .collect()
    }
}

/// Ramps the drift scale up to the target, burns in with step adaptation,
/// freezes the proposal and calls `observe` on every `thin`-th sweep.
pub(crate) fn sample_at(
    spec: &ModelSpec,
    init: Configuration,
    plan: &SamplingPlan,
    seed: u64,
    stream: u64,
    options: SamplerOptions,
    mut observe: impl FnMut(&ChainState) -> Result<()>,
) -> Result<ChainState> {
    plan.validate()?;
    let ramp = plan.ramp_to(spec.drift_scale());
    let first = match ramp.first() {
        Some(&l) => spec.with_drift_scale(l)?,
        None => spec.clone(),
    };
    let mut state = ChainState::with_options(&first, init, seed, stream, options)?;
    state.set_adapting(true);
    for &lambda in &ramp {
        let staged = spec.with_drift_scale(lambda)?;
        state.retarget(&staged)?;
        for _ in 0..plan.ramp_sweeps {
            state.sweep(&staged);
        }
    }
    state.retarget(spec)?;
    for _ in 0..plan.burn_in {
        state.sweep(spec);
    }
    state.set_adapting(false);
    state.reset_counters();
    for _ in 0..plan.samples {
        for _ in 0..plan.thin {
            state.sweep(spec);
        }
        observe(&state)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // 8 of 10: centre 0.7167, half-width 0.2266.
        let [lo, hi] = wilson_interval(8, 10, 10.0);
        assert!((lo - 0.4902).abs() < 1e-3 && (hi - 0.9433).abs() < 1e-3, "{lo} {hi}");
        let [lo, hi] = wilson_interval(0, 50, 50.0);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.0714).abs() < 1e-3);
        // Fewer effective samples widen the interval.
        let narrow = wilson_interval(80, 100, 100.0);
        let wide = wilson_interval(80, 100, 25.0);
        assert!(wide[1] - wide[0] > narrow[1] - narrow[0]);
    }

    #[test]
    fn ramp_is_geometric_and_below_target() {
        let plan = SamplingPlan {
            ramp_from: 1.0,
            ramp_stages: 2,
            ..Default::default()
        };
        let r = plan.ramp_to(100.0);
        assert_eq!(r.len(), 2);
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 10.0).abs() < 1e-9);
        assert!(plan.ramp_to(0.5).is_empty());
    }

    #[test]
    fn monotone_rule() {
        let e = |lambda: f64, p: f64, lo: f64, hi: f64| EventEstimate {
            event: "e".into(),
            lambda,
            successes: 0,
            samples: 1,
            ess: 1.0,
            probability: p,
            interval: [lo, hi],
            low_ess: false,
        };
        let a = [e(1.0, 0.1, 0.0, 0.2), e(2.0, 0.5, 0.4, 0.6), e(3.0, 0.45, 0.35, 0.55)];
        assert!(monotone_with_one_overlap(&a.iter().collect::<Vec<_>>()).0);
        let b = [e(1.0, 0.9, 0.85, 0.95), e(2.0, 0.5, 0.4, 0.6)];
        assert!(!monotone_with_one_overlap(&b.iter().collect::<Vec<_>>()).0);
    }
}

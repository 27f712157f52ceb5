use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{monotone_with_one_overlap, sample_at, Check, EventEstimate, ExperimentReport, SamplingPlan};
use crate::configuration::{ordering_violations, weighted_cm, Configuration, HoleFinder, ModelSpec};
use crate::error::{Error, Result};
use crate::geometry::Vessel;
use crate::io::CsvTable;
use crate::packing::{c1_estimate, honeycomb_in_region, C1Options, HoneycombSpec, Region};
use crate::sampler::{initial_configuration, SamplerOptions};

/// `pi / (4 sqrt 12)`: critical drift ratio of the large disc times `rho^2`.
pub const ARCHIMEDES_CRITICAL: f64 = 0.226_724_920_529_277_3;
/// `2 - pi / 4`: lower bound for `rho^2 N sqrt 12`.
pub const ARCHIMEDES_PRECONDITION: f64 = 1.214_601_836_602_551_7;

fn c1_for(spec: &ModelSpec, given: Option<f64>, restarts: usize, seed: u64, notes: &mut Vec<String>) -> Result<f64> {
    match given {
        Some(v) => {
            notes.push(format!("c1 = {v} supplied by the caller"));
            Ok(v)
        }
        None => {
            let est = c1_estimate(spec, &C1Options::for_spec(spec, restarts, seed))?;
            notes.push(format!(
                "c1 = {} from {restarts} annealing restarts (upper bound, seed {})",
                est.value, est.seed
            ));
            Ok(est.value)
        }
    }
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::param("lambdas", "need at least one drift scale"));
    }
    if lambdas.iter().any(|l| !(*l > 0.0)) || lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("lambdas", "must be positive and increasing"));
    }
    Ok(())
}

const PER_OBJECT: &str = "no_room_object_";

fn low_ess_check(report: &mut ExperimentReport) {
    let flagged = report.estimates.iter().filter(|e| e.low_ess);
    let (per_object, named): (Vec<_>, Vec<_>) = flagged.partition(|e| e.event.starts_with(PER_OBJECT));
    let mut low: Vec<String> = named.iter().map(|e| format!("{}@{}", e.event, e.lambda)).collect();
    if !per_object.is_empty() {
        low.push(format!("{} per-object estimates", per_object.len()));
    }
    if !low.is_empty() {
        report.notes.push(format!("low ESS (< {}): {}", super::MIN_ESS, low.join(", ")));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationParams {
    pub lambdas: Vec<f64>,
    pub epsilon: f64,
    /// Required probability at the largest drift scale.
    pub threshold: f64,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default = "default_restarts")]
    pub c1_restarts: usize,
    #[serde(default)]
    pub plan: SamplingPlan,
}

fn default_restarts() -> usize {
    4
}

/// Frequency of `2 x . v_1 > c0 - eps` with `v_1` the unit-scale drift, i.e.
/// `wcm < c1 + eps / 2`, along increasing drift scales.
pub fn concentration_experiment(spec: &ModelSpec, params: &ConcentrationParams, seed: u64) -> Result<ExperimentReport> {
    check_lambdas(&params.lambdas)?;
    if !(params.epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be > 0"));
    }
    let mut report = ExperimentReport::new("concentration", seed, spec, serde_json::to_value(params)?);
    let c1 = c1_for(spec, params.c1, params.c1_restarts, seed, &mut report.notes)?;
    let cut = c1 + 0.5 * params.epsilon;
    let mut table = CsvTable::new(["lambda", "sample", "wcm", "event"]);
    for (i, &lambda) in params.lambdas.iter().enumerate() {
        let s = spec.with_drift_scale(lambda)?;
        let init = initial_configuration(&s, seed)?;
        let mut hits = Vec::new();
        let mut series = Vec::new();
        sample_at(&s, init, &params.plan, seed, i as u64, SamplerOptions::default(), |st| {
            let w = weighted_cm(&s, st.configuration());
            hits.push(w < cut);
            series.push(w);
            table.push([lambda.to_string(), series.len().to_string(), w.to_string(), (w < cut).to_string()]);
            Ok(())
        })?;
        report.estimates.push(EventEstimate::from_samples("concentrated", lambda, &hits, &series)?);
    }
    let ests: Vec<&EventEstimate> = report.estimates.iter().collect();
    let (mono, detail) = monotone_with_one_overlap(&ests);
    report.checks.push(Check::new("monotone in lambda", mono, detail));
    let last = ests.last().expect("non-empty");
    report.checks.push(Check::new(
        "final probability",
        last.probability >= params.threshold,
        format!("{} >= {}", last.probability, params.threshold),
    ));
    low_ess_check(&mut report);
    report.observables = table;
    Ok(report.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceParams {
    pub lambdas: Vec<f64>,
    pub delta: f64,
    pub threshold: f64,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default = "default_restarts")]
    pub c1_restarts: usize,
    #[serde(default)]
    pub plan: SamplingPlan,
}

/// Frequencies of `wcm < c1 + delta` and of "no object can drop by more
/// than `delta`" (planar half cylinder only) along increasing drift scales.
/// The hole event is reported for all objects jointly and per object.
pub fn surface_experiment(spec: &ModelSpec, params: &SurfaceParams, seed: u64) -> Result<ExperimentReport> {
    check_lambdas(&params.lambdas)?;
    if !(params.delta > 0.0) {
        return Err(Error::param("delta", "must be > 0"));
    }
    let holes = spec.dim() == 2 && matches!(spec.vessel(), Vessel::HalfCylinder { .. });
    let mut report = ExperimentReport::new("surface", seed, spec, serde_json::to_value(params)?);
    if !holes {
        report
            .notes
            .push("hole event skipped: it needs a planar half cylinder".to_string());
    }
    let c1 = c1_for(spec, params.c1, params.c1_restarts, seed, &mut report.notes)?;
    let mut table = CsvTable::new(["lambda", "sample", "wcm", "surface", "wcm_event", "no_room"]);
    let n = spec.n();
    for (i, &lambda) in params.lambdas.iter().enumerate() {
        let s = spec.with_drift_scale(lambda)?;
        let init = initial_configuration(&s, seed)?;
        let mut wcm_hits = Vec::new();
        let mut room_hits = Vec::new();
        let mut per_k = vec![Vec::new(); n];
        let mut series = Vec::new();
        sample_at(&s, init, &params.plan, seed, i as u64, SamplerOptions::default(), |st| {
            let cfg = st.configuration();
            let w = weighted_cm(&s, cfg);
            let ok = w < c1 + params.delta;
            let mut room = true;
            if holes {
                let (all, each) = HoleFinder::new(&s, cfg)?.no_room(params.delta)?;
                room = all;
                for (k, v) in each.into_iter().enumerate() {
                    per_k[k].push(v);
                }
            }
            wcm_hits.push(ok);
            room_hits.push(room);
            series.push(w);
            table.push([
                lambda.to_string(),
                series.len().to_string(),
                w.to_string(),
                crate::configuration::surface_height(&s, cfg, None).to_string(),
                ok.to_string(),
                room.to_string(),
            ]);
            Ok(())
        })?;
        report.estimates.push(EventEstimate::from_samples("wcm_below_c1_plus_delta", lambda, &wcm_hits, &series)?);
        if holes {
            report.estimates.push(EventEstimate::from_samples("no_room_all", lambda, &room_hits, &series)?);
            for (k, hits) in per_k.iter().enumerate() {
                report
                    .estimates
                    .push(EventEstimate::from_samples(&format!("{PER_OBJECT}{k}"), lambda, hits, &series)?);
            }
        }
    }
    let mut events = vec!["wcm_below_c1_plus_delta"];
    if holes {
        events.push("no_room_all");
    }
    for ev in events {
        let ests: Vec<&EventEstimate> = report.estimates.iter().filter(|e| e.event == ev).collect();
        let (mono, detail) = monotone_with_one_overlap(&ests);
        report.checks.push(Check::new(&format!("{ev}: monotone in lambda"), mono, detail));
        let last = ests.last().expect("non-empty");
        report.checks.push(Check::new(
            &format!("{ev}: final probability"),
            last.probability > params.threshold,
            format!("{} > {}", last.probability, params.threshold),
        ));
    }
    low_ess_check(&mut report);
    report.observables = table;
    Ok(report.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentrifugeParams {
    pub lambdas: Vec<f64>,
    pub delta: f64,
    /// Largest allowed frequency of a violating pair at the last scale.
    pub max_violation_frequency: f64,
    #[serde(default)]
    pub plan: SamplingPlan,
}

/// Frequency of configurations with no heavier object sitting `delta` or
/// more above a lighter one. Objects must share one radius.
pub fn centrifuge_experiment(spec: &ModelSpec, params: &CentrifugeParams, seed: u64) -> Result<ExperimentReport> {
    check_lambdas(&params.lambdas)?;
    if !spec.identical_radii() {
        return Err(Error::param("radii", "the sorting experiment needs identical radii"));
    }
    if !(params.delta > 0.0) {
        return Err(Error::param("delta", "must be > 0"));
    }
    let mut report = ExperimentReport::new("centrifuge", seed, spec, serde_json::to_value(params)?);
    let mut table = CsvTable::new(["lambda", "sample", "wcm", "violating_pairs"]);
    for (i, &lambda) in params.lambdas.iter().enumerate() {
        let s = spec.with_drift_scale(lambda)?;
        let init = initial_configuration(&s, seed)?;
        let mut hits = Vec::new();
        let mut series = Vec::new();
        sample_at(&s, init, &params.plan, seed, i as u64, SamplerOptions::default(), |st| {
            let cfg = st.configuration();
            let v = ordering_violations(&s, cfg, params.delta)?.len();
            let w = weighted_cm(&s, cfg);
            hits.push(v == 0);
            series.push(w);
            table.push([lambda.to_string(), series.len().to_string(), w.to_string(), v.to_string()]);
            Ok(())
        })?;
        report.estimates.push(EventEstimate::from_samples("sorted", lambda, &hits, &series)?);
    }
    let ests: Vec<&EventEstimate> = report.estimates.iter().collect();
    let (mono, detail) = monotone_with_one_overlap(&ests);
    report.checks.push(Check::new("monotone in lambda", mono, detail));
    let last = ests.last().expect("non-empty");
    let freq = 1.0 - last.probability;
    report.checks.push(Check::new(
        "violation frequency",
        freq < params.max_violation_frequency,
        format!("{freq} < {}", params.max_violation_frequency),
    ));
    low_ess_check(&mut report);
    report.observables = table;
    Ok(report.finish())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchimedesMode {
    Float,
    Sink,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchimedesStart {
    /// Small discs on the lowest honeycomb sites, large disc resting on top.
    Bed,
    /// Random sequential insertion.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchimedesParams {
    /// Radius of the small discs; the large disc has radius 1/2.
    pub rho: f64,
    /// Total number of discs, the large one included.
    pub n: usize,
    /// `a1 / a2` in units of the critical ratio `ARCHIMEDES_CRITICAL / rho^2`.
    pub gamma_ratio: f64,
    /// Drift of the small discs.
    pub lambda: f64,
    pub delta: f64,
    pub mode: ArchimedesMode,
    #[serde(default = "one")]
    pub m1: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_start")]
    pub start: ArchimedesStart,
    #[serde(default)]
    pub plan: SamplingPlan,
}

fn one() -> f64 {
    1.0
}

fn default_threshold() -> f64 {
    0.9
}

fn default_start() -> ArchimedesStart {
    ArchimedesStart::Bed
}

impl ArchimedesParams {
    /// `rho^2 N sqrt 12`.
    pub fn precondition_value(&self) -> f64 {
        self.rho * self.rho * self.n as f64 * 12f64.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 0.5) {
            return Err(Error::param("rho", format!("need 0 < rho < 1/2, got {}", self.rho)));
        }
        if self.n < 2 {
            return Err(Error::param("n", "need the large disc and at least one small disc"));
        }
        let value = self.precondition_value();
        if !(value > ARCHIMEDES_PRECONDITION) {
            return Err(Error::ArchimedesPrecondition {
                rho: self.rho,
                n: self.n,
                value,
            });
        }
        if !(self.gamma_ratio > 0.0 && self.lambda > 0.0 && self.delta > 0.0 && self.m1 >= 1.0) {
            return Err(Error::param(
                "archimedes",
                "gamma_ratio, lambda and delta must be > 0 and m1 >= 1",
            ));
        }
        Ok(())
    }

    /// `a1 / a2`.
    pub fn drift_ratio(&self) -> f64 {
        self.gamma_ratio * ARCHIMEDES_CRITICAL / (self.rho * self.rho)
    }

    pub fn model(&self) -> Result<ModelSpec> {
        self.validate()?;
        let mut radii = vec![self.rho; self.n];
        radii[0] = 0.5;
        let mut weights = vec![1.0; self.n];
        weights[0] = self.drift_ratio();
        let mut masses = vec![1.0; self.n];
        masses[0] = self.m1;
        ModelSpec::new(2, Vessel::half_cylinder(1.0)?, radii, weights, self.lambda)?.with_masses(masses)
    }
}

fn archimedes_bed(spec: &ModelSpec, rho: f64) -> Result<Configuration> {
    let n = spec.n();
    let region = Region::Vessel {
        vessel: spec.vessel().clone(),
        max_height: 2.0 * rho * n as f64 + 2.0,
    };
    // A slightly inflated lattice keeps rounding from creating overlaps.
    let sites = honeycomb_in_region(&HoneycombSpec::new(rho * (1.0 + 1e-9))?, &region, Some(n - 1))?;
    if sites.len() < n - 1 {
        return Err(Error::PlacementFailed {
            index: sites.len() + 1,
            attempts: 1,
        });
    }
    let top = sites.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max);
    let mut centers = vec![top + rho + 0.5 + 1e-9, 0.0];
    for c in &sites {
        centers.extend_from_slice(c);
    }
    Configuration::new(2, centers)
}

/// Floating and sinking of a large disc among many small ones.
///
/// Float event: `X^1_1 >= sup_{k>=2} X^k_1 - 1/2 - delta`. Sink event:
/// `X^1_1 <= 1/2 + delta`. With `m1 > 1` the chain targets the stationary law
/// of the inertial system, which weights the large disc's height by
/// `a1 m1^2`. The float estimate takes its ESS from `X^1_1 - sup_k X^k_1`,
/// the sink estimate from `X^1_1`.
pub fn archimedes_experiment(params: &ArchimedesParams, seed: u64) -> Result<ExperimentReport> {
    let spec = params.model()?;
    let mut report = ExperimentReport::new("archimedes", seed, &spec, serde_json::to_value(params)?);
    let ratio = params.drift_ratio();
    let rho2 = params.rho * params.rho;
    report.notes.push(format!(
        "precondition rho^2 N sqrt(12) = {:.4} > {:.4}",
        params.precondition_value(),
        ARCHIMEDES_PRECONDITION
    ));
    report.notes.push(format!(
        "a1/a2 = {ratio:.4}; critical ratio / (rho^2 m1) = {:.4}; exact-law weight ratio a1 m1^2 / a2 = {:.4} vs critical / rho^2 = {:.4}",
        ARCHIMEDES_CRITICAL / (rho2 * params.m1),
        ratio * params.m1 * params.m1,
        ARCHIMEDES_CRITICAL / rho2
    ));
    report.notes.push("large disc diameter equals the cylinder half-width (tangency allowed)".into());

    let init = match params.start {
        ArchimedesStart::Bed => archimedes_bed(&spec, params.rho)?,
        ArchimedesStart::Random => initial_configuration(&spec, seed)?,
    };
    let options = SamplerOptions {
        inertial: params.m1 != 1.0,
        ..Default::default()
    };
    let mut floats = Vec::new();
    let mut sinks = Vec::new();
    let mut heights = Vec::new();
    let mut margins = Vec::new();
    let mut exclusive = true;
    let mut table = CsvTable::new(["sample", "x1_large", "sup_small", "float", "sink"]);
    let delta = params.delta;
    let final_state = sample_at(&spec, init, &params.plan, seed, 0, options, |st| {
        let cfg = st.configuration();
        let h = cfg.height(0);
        let sup = (1..cfg.len()).map(|k| cfg.height(k)).fold(f64::NEG_INFINITY, f64::max);
        let f = h >= sup - 0.5 - delta;
        let s = h <= 0.5 + delta;
        if sup > 1.0 + 2.0 * delta && f && s {
            exclusive = false;
        }
        floats.push(f);
        sinks.push(s);
        heights.push(h);
        margins.push(h - sup);
        table.push([
            heights.len().to_string(),
            h.to_string(),
            sup.to_string(),
            f.to_string(),
            s.to_string(),
        ]);
        Ok(())
    })?;
    report.notes.push(format!("acceptance rate {:.4}", final_state.acceptance_rate()));
    let lambda = params.lambda;
    // Each event takes its ESS from the statistic that defines it.
    report.estimates.push(EventEstimate::from_samples("float", lambda, &floats, &margins)?);
    report.estimates.push(EventEstimate::from_samples("sink", lambda, &sinks, &heights)?);
    let (name, est) = match params.mode {
        ArchimedesMode::Float => ("float", &report.estimates[0]),
        ArchimedesMode::Sink => ("sink", &report.estimates[1]),
    };
    let freq = est.probability;
    let ess = est.ess;
    report.checks.push(Check::new(
        &format!("{name} frequency"),
        freq >= params.threshold,
        format!("{freq} >= {}", params.threshold),
    ));
    report.checks.push(Check::new(
        "effective sample size",
        ess >= super::MIN_ESS,
        format!("{ess:.1} >= {}", super::MIN_ESS),
    ));
    report.checks.push(Check::new(
        "float and sink exclusive",
        exclusive,
        "never both when sup_small > 1 + 2 delta",
    ));
    report.parameters["drift_ratio"] = json!(ratio);
    report.observables = table;
    Ok(report.finish())
}

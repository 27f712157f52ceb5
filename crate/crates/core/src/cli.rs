//! Command-line front end.
//!
//! A run is described by a TOML file whose every field has a default; flags
//! given on the command line override the file. The fully resolved config is
//! written as `config.resolved.toml` into the output directory, which is
//! `--out-dir` or `run-<unix time>-seed<seed>` in the working directory.
//!
//! Exit codes: 0 on success or a passing experiment, 1 when an experiment
//! (or path certificate, or vessel check) fails, 2 on configuration errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::configuration::{weighted_cm, Configuration, ConfigurationRecord, ModelSpec};
use crate::dynamics::{simulate, DynamicsParams};
use crate::error::{Error, Result};
use crate::experiments::{
    archimedes_experiment, centrifuge_experiment, check_vessel, concentration_experiment, connectivity_path,
    surface_experiment, ArchimedesMode, ArchimedesParams, ArchimedesStart, CentrifugeParams, ConcentrationParams,
    ExperimentReport, SamplingPlan, SurfaceParams, VesselCheckOptions,
};
use crate::geometry::Vessel;
use crate::io::{snapshots_csv, write_jsonl, CsvTable};
use crate::packing::{c1_estimate, compact, contained_fraction, covered_fraction, honeycomb_in_region, C1Options, HoneycombSpec, Region};
use crate::sampler::{anneal, diagnostics, initial_configuration, run_chain, ChainState, RunOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VesselConfig {
    HalfCylinder {
        #[serde(default = "one")]
        half_width: f64,
    },
    /// `x1 > curvature * |y|^2`.
    Paraboloid {
        curvature: f64,
        #[serde(default = "ten")]
        box_half_width: f64,
    },
    /// `x1 > slope * |y|`.
    Vee {
        slope: f64,
        #[serde(default = "ten")]
        box_half_width: f64,
    },
    /// `x1 > max(0, ln(2|y|) / rate)`: sections grow like `exp(rate * b)`.
    Flare {
        rate: f64,
        #[serde(default = "big_box")]
        box_half_width: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn ten() -> f64 {
    10.0
}

fn big_box() -> f64 {
    1e9
}

impl Default for VesselConfig {
    fn default() -> Self {
        VesselConfig::HalfCylinder { half_width: 1.0 }
    }
}

fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl VesselConfig {
    pub fn build(&self, dim: usize) -> Result<Vessel> {
        let graph = |g: crate::geometry::BoundaryFn, half: f64, label: String| {
            if !(half > 0.0) {
                return Err(Error::param("box_half_width", "must be > 0"));
            }
            Vessel::graph(dim, g, vec![-half; dim - 1], vec![half; dim - 1], label)
        };
        match *self {
            VesselConfig::HalfCylinder { half_width } => Vessel::half_cylinder(half_width),
            VesselConfig::Paraboloid { curvature, box_half_width } => graph(
                Arc::new(move |y: &[f64]| curvature * norm(y).powi(2)),
                box_half_width,
                format!("paraboloid({curvature})"),
            ),
            VesselConfig::Vee { slope, box_half_width } => graph(
                Arc::new(move |y: &[f64]| slope * norm(y)),
                box_half_width,
                format!("vee({slope})"),
            ),
            VesselConfig::Flare { rate, box_half_width } => {
                if !(rate > 0.0) {
                    return Err(Error::param("rate", "must be > 0"));
                }
                graph(
                    Arc::new(move |y: &[f64]| ((2.0 * norm(y)).ln() / rate).max(0.0)),
                    box_half_width,
                    format!("flare({rate})"),
                )
            }
        }
    }
}

/// Objects may be given as `radii = [...]` or as `n` copies of `radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub dim: usize,
    pub vessel: VesselConfig,
    pub n: Option<usize>,
    pub radius: Option<f64>,
    pub radii: Option<Vec<f64>>,
    /// Drift weights; all ones when absent.
    pub weights: Option<Vec<f64>>,
    pub drift_scale: f64,
    pub masses: Option<Vec<f64>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 2,
            vessel: VesselConfig::default(),
            n: None,
            radius: None,
            radii: None,
            weights: None,
            drift_scale: 1.0,
            masses: None,
        }
    }
}

impl ModelConfig {
    /// Same model with `radii`, `weights` and `masses` spelled out.
    pub fn resolved(&self) -> Result<ModelConfig> {
        let radii = match (&self.radii, self.n, self.radius) {
            (Some(r), None, None) => r.clone(),
            (Some(r), Some(n), None) if n == r.len() => r.clone(),
            (Some(_), _, _) => {
                return Err(Error::Config(
                    "model: give either `radii` or `n` and `radius`, not both".into(),
                ))
            }
            (None, n, r) => vec![r.unwrap_or(0.1); n.unwrap_or(1)],
        };
        let n = radii.len();
        let weights = self.weights.clone().unwrap_or_else(|| vec![1.0; n]);
        let masses = self.masses.clone().unwrap_or_else(|| vec![1.0; n]);
        Ok(ModelConfig {
            dim: self.dim,
            vessel: self.vessel.clone(),
            n: None,
            radius: None,
            radii: Some(radii),
            weights: Some(weights),
            drift_scale: self.drift_scale,
            masses: Some(masses),
        })
    }

    pub fn build(&self) -> Result<ModelSpec> {
        let r = self.resolved()?;
        let vessel = r.vessel.build(r.dim)?;
        ModelSpec::new(
            r.dim,
            vessel,
            r.radii.expect("resolved"),
            r.weights.expect("resolved"),
            r.drift_scale,
        )?
        .with_masses(r.masses.expect("resolved"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    /// Sweeps after burn-in.
    pub sweeps: u64,
    pub thin: u64,
    pub burn_in: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            sweeps: 10_000,
            thin: 10,
            burn_in: 1_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub t_end: f64,
    /// Defaults to `1e-4 * r_min^2`.
    pub dt: Option<f64>,
    pub observe_every: f64,
    pub inertia_mode: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            t_end: 1.0,
            dt: None,
            observe_every: 0.01,
            inertia_mode: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealConfig {
    /// Increasing drift scales; a geometric ramp over four decades when empty.
    pub schedule: Vec<f64>,
    pub sweeps_per_stage: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            schedule: Vec::new(),
            sweeps_per_stage: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PackConfig {
    pub radius: f64,
    pub width: f64,
    pub height: f64,
    /// Annealing restarts for a `c1` estimate of the model; 0 skips it.
    pub c1_restarts: usize,
}

impl Default for PackConfig {
    fn default() -> Self {
        PackConfig {
            radius: 0.25,
            width: 50.0,
            height: 50.0,
            c1_restarts: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig {
    /// Configuration records (JSON); random starts when absent.
    pub from: Option<PathBuf>,
    pub to: Option<PathBuf>,
    pub samples_per_segment: usize,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            from: None,
            to: None,
            samples_per_segment: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VesselCheckConfig {
    /// Defaults to the smallest drift of the model.
    pub a: Option<f64>,
    /// Defaults to `20 / a`.
    pub b_max: Option<f64>,
    pub b_steps: usize,
    pub lateral_cells: usize,
    pub tolerance: f64,
}

impl Default for VesselCheckConfig {
    fn default() -> Self {
        let o = VesselCheckOptions::new(1.0);
        VesselCheckConfig {
            a: None,
            b_max: None,
            b_steps: o.b_steps,
            lateral_cells: o.lateral_cells,
            tolerance: o.tolerance,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub concentration: Option<ConcentrationParams>,
    pub surface: Option<SurfaceParams>,
    pub centrifuge: Option<CentrifugeParams>,
    pub archimedes: Option<ArchimedesParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Independent repetitions with seeds `seed, seed + 1, ...`.
    pub replicas: usize,
    /// Worker threads for replicas.
    pub jobs: usize,
    /// Never echoed, so reruns elsewhere produce identical files.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    pub model: ModelConfig,
    pub sample: SampleConfig,
    pub simulate: SimulateConfig,
    pub anneal: AnnealConfig,
    pub pack: PackConfig,
    pub path: PathConfig,
    pub vessel_check: VesselCheckConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            replicas: 1,
            jobs: 1,
            out_dir: None,
            model: ModelConfig::default(),
            sample: SampleConfig::default(),
            simulate: SimulateConfig::default(),
            anneal: AnnealConfig::default(),
            pack: PackConfig::default(),
            path: PathConfig::default(),
            vessel_check: VesselCheckConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn default_concentration() -> ConcentrationParams {
    ConcentrationParams {
        lambdas: vec![1.0, 10.0, 50.0],
        epsilon: 0.5,
        threshold: 0.9,
        c1: None,
        c1_restarts: 2,
        plan: SamplingPlan::default(),
    }
}

pub fn default_surface() -> SurfaceParams {
    SurfaceParams {
        lambdas: vec![1.0, 10.0, 50.0, 200.0],
        delta: 0.3,
        threshold: 0.9,
        c1: None,
        c1_restarts: 2,
        plan: SamplingPlan::default(),
    }
}

pub fn default_centrifuge() -> CentrifugeParams {
    CentrifugeParams {
        lambdas: vec![1.0, 10.0, 50.0, 200.0],
        delta: 0.2,
        max_violation_frequency: 0.05,
        plan: SamplingPlan::default(),
    }
}

pub fn default_archimedes() -> ArchimedesParams {
    ArchimedesParams {
        rho: 0.06,
        n: 200,
        gamma_ratio: 0.5,
        lambda: 6.0,
        delta: 0.3,
        mode: ArchimedesMode::Float,
        m1: 1.0,
        threshold: 0.9,
        start: ArchimedesStart::Random,
        plan: SamplingPlan {
            ramp_from: 0.5,
            ramp_stages: 20,
            ramp_sweeps: 2_000,
            burn_in: 20_000,
            samples: 4_000,
            thin: 1_000,
        },
    }
}

#[derive(Debug, Parser)]
#[command(name = "brownian-liquid", version, about = "Hard-core discs as reflected Brownian motions with drift")]
pub struct Cli {
    /// TOML run file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: run-<unix time>-seed<seed>).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    Concentration,
    Surface,
    Centrifuge,
    Archimedes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Float,
    Sink,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Metropolis chain and write snapshots.
    Sample {
        #[arg(long)]
        sweeps: Option<u64>,
        #[arg(long)]
        thin: Option<u64>,
        #[arg(long)]
        burn_in: Option<u64>,
    },
    /// Integrate the projected Euler dynamics.
    Simulate {
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        observe_every: Option<f64>,
        /// Use the model masses.
        #[arg(long)]
        inertia: bool,
    },
    /// Anneal towards the lowest weighted centre of mass.
    Anneal {
        #[arg(long)]
        sweeps_per_stage: Option<u64>,
    },
    /// Run one of the macroscopic experiments.
    Experiment {
        name: ExperimentName,
        /// Archimedes: expected outcome.
        #[arg(long)]
        mode: Option<ModeArg>,
        /// Archimedes: mass of the large disc.
        #[arg(long)]
        m1: Option<f64>,
        /// Archimedes: drift ratio in units of the critical ratio.
        #[arg(long)]
        gamma_ratio: Option<f64>,
        /// Archimedes: drift of the small discs.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Honeycomb packing of a box, and optionally a `c1` estimate.
    Pack {
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        width: Option<f64>,
        #[arg(long)]
        height: Option<f64>,
        #[arg(long)]
        c1_restarts: Option<usize>,
    },
    /// Build and certify a motion plan between two configurations.
    Path {
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        to: Option<PathBuf>,
        #[arg(long)]
        samples_per_segment: Option<usize>,
    },
    /// Tabulate the cross-section growth condition of the vessel.
    CheckVessel {
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b_max: Option<f64>,
    },
}

/// Loads the file (if any) and applies flag overrides.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = Some(d.clone());
    }
    if let Some(r) = cli.replicas {
        cfg.replicas = r;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if cfg.replicas == 0 || cfg.jobs == 0 {
        return Err(Error::Config("replicas and jobs must be >= 1".into()));
    }
    match &cli.command {
        Command::Sample { sweeps, thin, burn_in } => {
            set(&mut cfg.sample.sweeps, *sweeps);
            set(&mut cfg.sample.thin, *thin);
            set(&mut cfg.sample.burn_in, *burn_in);
        }
        Command::Simulate {
            t_end,
            dt,
            observe_every,
            inertia,
        } => {
            set(&mut cfg.simulate.t_end, *t_end);
            if dt.is_some() {
                cfg.simulate.dt = *dt;
            }
            set(&mut cfg.simulate.observe_every, *observe_every);
            cfg.simulate.inertia_mode |= *inertia;
        }
        Command::Anneal { sweeps_per_stage } => set(&mut cfg.anneal.sweeps_per_stage, *sweeps_per_stage),
        Command::Experiment {
            name,
            mode,
            m1,
            gamma_ratio,
            lambda,
        } => {
            let e = &mut cfg.experiment;
            match name {
                ExperimentName::Concentration => {
                    e.concentration.get_or_insert_with(default_concentration);
                }
                ExperimentName::Surface => {
                    e.surface.get_or_insert_with(default_surface);
                }
                ExperimentName::Centrifuge => {
                    e.centrifuge.get_or_insert_with(default_centrifuge);
                }
                ExperimentName::Archimedes => {
                    let a = e.archimedes.get_or_insert_with(default_archimedes);
                    if let Some(m) = mode {
                        a.mode = match m {
                            ModeArg::Float => ArchimedesMode::Float,
                            ModeArg::Sink => ArchimedesMode::Sink,
                        };
                    }
                    set(&mut a.m1, *m1);
                    set(&mut a.gamma_ratio, *gamma_ratio);
                    set(&mut a.lambda, *lambda);
                    a.validate()?;
                }
            }
        }
        Command::Pack {
            radius,
            width,
            height,
            c1_restarts,
        } => {
            set(&mut cfg.pack.radius, *radius);
            set(&mut cfg.pack.width, *width);
            set(&mut cfg.pack.height, *height);
            set(&mut cfg.pack.c1_restarts, *c1_restarts);
        }
        Command::Path {
            from,
            to,
            samples_per_segment,
        } => {
            if from.is_some() {
                cfg.path.from = from.clone();
            }
            if to.is_some() {
                cfg.path.to = to.clone();
            }
            set(&mut cfg.path.samples_per_segment, *samples_per_segment);
        }
        Command::CheckVessel { a, b_max } => {
            if a.is_some() {
                cfg.vessel_check.a = *a;
            }
            if b_max.is_some() {
                cfg.vessel_check.b_max = *b_max;
            }
        }
    }
    cfg.model = cfg.model.resolved()?;
    Ok(cfg)
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::InvalidParameter { .. }
            | Error::DimensionMismatch { .. }
            | Error::PlanarOnly { .. }
            | Error::UnsupportedVessel { .. }
            | Error::ArchimedesPrecondition { .. }
            | Error::InvalidConfiguration(_)
            | Error::TooFewSamples { .. }
            | Error::DecayNotObserved { .. }
    )
}

/// Runs `f(i)` for `i < count` on up to `jobs` threads; results in index order.
fn fan_out<T: Send>(count: usize, jobs: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let per = count.div_ceil(jobs.clamp(1, count.max(1))).max(1);
    let mut slots: Vec<Option<Result<T>>> = (0..count).map(|_| None).collect();
    std::thread::scope(|s| {
        for (w, chunk) in slots.chunks_mut(per).enumerate() {
            let f = &f;
            s.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(w * per + i));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot is filled")).collect()
}

fn stem(base: &str, replicas: usize, i: usize) -> String {
    if replicas == 1 {
        base.to_string()
    } else {
        format!("{base}.r{i}")
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_record(path: &Path) -> Result<Configuration> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ConfigurationRecord::from_json(&text)?.to_configuration()
}

/// Whether the run counts as a pass.
pub fn execute(cfg: &RunConfig, command: &Command, dir: &Path) -> Result<bool> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.resolved.toml"), cfg.to_toml()?)?;
    let seed_of = |i: usize| cfg.seed.wrapping_add(i as u64);
    match command {
        Command::Sample { .. } => {
            let spec = cfg.model.build()?;
            let s = &cfg.sample;
            fan_out(cfg.replicas, cfg.jobs, |i| {
                let seed = seed_of(i);
                let init = initial_configuration(&spec, seed)?;
                let mut state = ChainState::new(&spec, init, seed)?;
                let opts = RunOptions {
                    sweeps: s.burn_in + s.sweeps,
                    thin: s.thin,
                    burn_in: s.burn_in,
                };
                let snaps = run_chain(&spec, &mut state, opts)?;
                let name = stem("snapshots", cfg.replicas, i);
                write_jsonl(&dir.join(format!("{name}.jsonl")), &snaps)?;
                snapshots_csv(&snaps).write(&dir.join(format!("{name}.v1.csv")))?;
                let series: Vec<f64> = snaps.iter().map(|x| x.wcm).collect();
                let diag = if series.len() >= crate::sampler::MIN_SAMPLES {
                    serde_json::to_value(diagnostics(&series, Some(state.acceptance_rate()))?)?
                } else {
                    json!(null)
                };
                write_json(
                    &dir.join(format!("{}.json", stem("diagnostics", cfg.replicas, i))),
                    &json!({ "seed": seed, "snapshots": snaps.len(), "wcm": diag }),
                )
            })?;
            Ok(true)
        }
        Command::Simulate { .. } => {
            let spec = cfg.model.build()?;
            let mut params = DynamicsParams::for_spec(&spec);
            if let Some(dt) = cfg.simulate.dt {
                params.dt = dt;
            }
            params.inertia_mode = cfg.simulate.inertia_mode;
            fan_out(cfg.replicas, cfg.jobs, |i| {
                let seed = seed_of(i);
                let init = initial_configuration(&spec, seed)?;
                let snaps = simulate(&spec, &init, &params, cfg.simulate.t_end, cfg.simulate.observe_every, seed)?;
                let name = stem("snapshots", cfg.replicas, i);
                write_jsonl(&dir.join(format!("{name}.jsonl")), &snaps)?;
                snapshots_csv(&snaps).write(&dir.join(format!("{name}.v1.csv")))
            })?;
            Ok(true)
        }
        Command::Anneal { .. } => {
            let spec = cfg.model.build()?;
            let schedule = if cfg.anneal.schedule.is_empty() {
                C1Options::for_spec(&spec, 1, cfg.seed).schedule
            } else {
                cfg.anneal.schedule.clone()
            };
            fan_out(cfg.replicas, cfg.jobs, |i| {
                let seed = seed_of(i);
                let init = initial_configuration(&spec, seed)?;
                let out = anneal(&spec, init, &schedule, cfg.anneal.sweeps_per_stage, seed)?;
                let (packed, passes) = compact(&spec, &out.best)?;
                write_json(
                    &dir.join(format!("{}.json", stem("anneal", cfg.replicas, i))),
                    &json!({
                        "seed": seed,
                        "best_wcm": out.best_wcm,
                        "compacted_wcm": weighted_cm(&spec, &packed),
                        "compaction_passes": passes,
                        "configuration": ConfigurationRecord::new(spec.radii(), &packed),
                    }),
                )
            })?;
            Ok(true)
        }
        Command::Experiment { name, .. } => {
            let e = &cfg.experiment;
            let reports: Vec<ExperimentReport> = fan_out(cfg.replicas, cfg.jobs, |i| {
                let seed = seed_of(i);
                let spec = || cfg.model.build();
                let report = match name {
                    ExperimentName::Concentration => {
                        concentration_experiment(&spec()?, e.concentration.as_ref().expect("resolved"), seed)?
                    }
                    ExperimentName::Surface => surface_experiment(&spec()?, e.surface.as_ref().expect("resolved"), seed)?,
                    ExperimentName::Centrifuge => {
                        centrifuge_experiment(&spec()?, e.centrifuge.as_ref().expect("resolved"), seed)?
                    }
                    ExperimentName::Archimedes => archimedes_experiment(e.archimedes.as_ref().expect("resolved"), seed)?,
                };
                report.write(dir, &stem(&report.name, cfg.replicas, i))?;
                Ok(report)
            })?;
            for r in &reports {
                for c in &r.checks {
                    eprintln!("{} seed {}: {} {} ({})", r.name, r.seed, if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
            }
            Ok(reports.iter().all(|r| r.passed))
        }
        Command::Pack { .. } => {
            let p = &cfg.pack;
            let hs = HoneycombSpec::new(p.radius)?;
            let (lo, hi) = ([0.0, 0.0], [p.height, p.width]);
            let sites = honeycomb_in_region(&hs, &Region::Rect { lo, hi }, None)?;
            let mut table = CsvTable::new(["x1", "x2"]);
            for c in &sites {
                table.push([c[0], c[1]]);
            }
            table.write(&dir.join("honeycomb.v1.csv"))?;
            let mut out = json!({
                "radius": p.radius,
                "box": [lo, hi],
                "count": sites.len(),
                "covered_fraction": covered_fraction(&hs, lo, hi)?,
                "contained_fraction": contained_fraction(&hs, lo, hi)?,
                "honeycomb_density": std::f64::consts::PI / 12f64.sqrt(),
            });
            if p.c1_restarts > 0 {
                let spec = cfg.model.build()?;
                let est = c1_estimate(&spec, &C1Options::for_spec(&spec, p.c1_restarts, cfg.seed))?;
                out["c1"] = json!({
                    "value": est.value,
                    "seed": est.seed,
                    "per_restart": est.per_restart,
                    "configuration": ConfigurationRecord::new(spec.radii(), &est.argmin),
                });
            }
            write_json(&dir.join("pack.json"), &out)?;
            Ok(true)
        }
        Command::Path { .. } => {
            let spec = cfg.model.build()?;
            let from = match &cfg.path.from {
                Some(p) => read_record(p)?,
                None => initial_configuration(&spec, cfg.seed)?,
            };
            let to = match &cfg.path.to {
                Some(p) => read_record(p)?,
                None => initial_configuration(&spec, cfg.seed.wrapping_add(1))?,
            };
            match connectivity_path(&spec, &from, &to, cfg.path.samples_per_segment) {
                Ok(path) => {
                    path.polylines_csv().write(&dir.join("path.polylines.v1.csv"))?;
                    write_json(
                        &dir.join("path.json"),
                        &json!({
                            "plan": path.plan,
                            "waypoints": path.waypoints.len(),
                            "certificate": path.certificate,
                            "notes": path.notes,
                        }),
                    )?;
                    Ok(path.certificate.valid)
                }
                Err(Error::CertificateFailed { segment, fraction }) => {
                    write_json(
                        &dir.join("path.json"),
                        &json!({ "certificate": { "valid": false, "failure": [segment, fraction] } }),
                    )?;
                    Ok(false)
                }
                Err(e) => Err(e),
            }
        }
        Command::CheckVessel { .. } => {
            let spec = cfg.model.build()?;
            let v = &cfg.vessel_check;
            let a = v.a.unwrap_or_else(|| spec.min_drift());
            let opts = VesselCheckOptions {
                b_max: v.b_max.unwrap_or(20.0 / a),
                b_steps: v.b_steps,
                lateral_cells: v.lateral_cells,
                tolerance: v.tolerance,
                dim: spec.dim(),
            };
            let check = check_vessel(spec.vessel(), a, &opts)?;
            let mut table = CsvTable::new(["b", "measure", "product"]);
            for row in &check.table {
                table.push([row.b, row.measure, row.product]);
            }
            table.write(&dir.join("vessel_check.v1.csv"))?;
            write_json(
                &dir.join("vessel_check.json"),
                &json!({
                    "a": a,
                    "options": opts,
                    "b0_found": check.b0_found,
                    "b0": check.b0,
                    "condition_holds": check.condition_holds,
                }),
            )?;
            println!("condition_holds = {}", check.condition_holds);
            Ok(check.condition_holds)
        }
    }
}

fn default_dir(seed: u64) -> PathBuf {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    PathBuf::from(format!("run-{secs}-seed{seed}"))
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let dir = cfg.out_dir.clone().unwrap_or_else(|| default_dir(cfg.seed));
    match execute(&cfg, &cli.command, &dir) {
        Ok(true) => {
            eprintln!("outputs in {}", dir.display());
            0
        }
        Ok(false) => {
            eprintln!("FAILED; outputs in {}", dir.display());
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            if is_config_error(&e) {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_a_single_disc() {
        let cfg = RunConfig::from_toml("").unwrap();
        let m = cfg.model.resolved().unwrap();
        assert_eq!(m.radii, Some(vec![0.1]));
        assert_eq!(m.weights, Some(vec![1.0]));
        let spec = m.build().unwrap();
        assert_eq!(spec.n(), 1);
        let echo = RunConfig { model: m, ..cfg }.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&echo).unwrap().model.radii, Some(vec![0.1]));
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::from_toml("[model]\nraddi = [0.1]\n").unwrap_err();
        assert!(e.to_string().contains("raddi"), "{e}");
        let e = RunConfig::from_toml("sed = 3\n").unwrap_err();
        assert!(e.to_string().contains("sed"));
    }

    #[test]
    fn vessel_kinds_parse() {
        let cfg = RunConfig::from_toml("[model]\ndim = 2\nn = 3\nradius = 0.2\n[model.vessel]\nkind = \"vee\"\nslope = 1.5\n").unwrap();
        let spec = cfg.model.build().unwrap();
        assert!(spec.vessel().describe().contains("vee"));
        assert_eq!(spec.radii(), &[0.2, 0.2, 0.2]);
        assert!(RunConfig::from_toml("[model.vessel]\nkind = \"cone\"\n").is_err());
    }

    #[test]
    fn conflicting_radii() {
        let cfg = RunConfig::from_toml("[model]\nn = 2\nradii = [0.1, 0.1, 0.1]\n").unwrap();
        assert!(cfg.model.build().is_err());
    }

    #[test]
    fn archimedes_precondition_message() {
        // rho^2 N sqrt 12 = 1 with N = 100.
        let rho = (1.0 / (100.0 * 12f64.sqrt())).sqrt();
        let text = format!(
            "[experiment.archimedes]\nrho = {rho}\nn = 100\ngamma_ratio = 0.5\nlambda = 10.0\ndelta = 0.1\nmode = \"float\"\n"
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.toml");
        std::fs::write(&path, text).unwrap();
        let cli = Cli::try_parse_from(["bl", "--config", path.to_str().unwrap(), "experiment", "archimedes"]).unwrap();
        let e = resolve(&cli).unwrap_err();
        assert!(e.to_string().contains("1.2146"), "{e}");
        assert!(is_config_error(&e));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 5\n[sample]\nsweeps = 7\n").unwrap();
        let cli = Cli::try_parse_from(["bl", "--config", path.to_str().unwrap(), "--seed", "9", "sample", "--thin", "3"]).unwrap();
        let cfg = resolve(&cli).unwrap();
        assert_eq!((cfg.seed, cfg.sample.sweeps, cfg.sample.thin), (9, 7, 3));
    }

    #[test]
    fn fan_out_keeps_order() {
        let v = fan_out(7, 3, |i| Ok(i * i)).unwrap();
        assert_eq!(v, vec![0, 1, 4, 9, 16, 25, 36]);
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.toml");
        std::fs::write(&bad, "[model]\nraddi = [0.1]\n").unwrap();
        assert_eq!(main_with_args(["bl", "--config", bad.to_str().unwrap(), "sample"]), 2);
        let out = dir.path().join("out");
        let code = main_with_args(["bl", "--out-dir", out.to_str().unwrap(), "check-vessel"]);
        assert_eq!(code, 0);
        assert!(out.join("config.resolved.toml").exists());
        assert!(out.join("vessel_check.v1.csv").exists());
    }
}

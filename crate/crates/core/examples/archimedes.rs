//! A large disc in a bed of small ones: floats when its weight is well below
//! the critical ratio and sinks well above it. Short plan; expect a few
//! minutes in release mode.

use brownian_liquid::experiments::{
    archimedes_experiment, ArchimedesMode, ArchimedesParams, ArchimedesStart, SamplingPlan,
};

fn main() -> brownian_liquid::Result<()> {
    for (gamma_ratio, mode) in [(0.5, ArchimedesMode::Float), (2.0, ArchimedesMode::Sink)] {
        let params = ArchimedesParams {
            rho: 0.06,
            n: 200,
            gamma_ratio,
            lambda: 6.0,
            delta: 0.3,
            mode,
            m1: 1.0,
            threshold: 0.9,
            start: ArchimedesStart::Random,
            plan: SamplingPlan { ramp_from: 0.5, ramp_stages: 20, ramp_sweeps: 2_000, burn_in: 20_000, samples: 800, thin: 1_000 },
        };
        println!("precondition {:.3}, drift ratio {:.2}", params.precondition_value(), params.drift_ratio());
        let report = archimedes_experiment(&params, 9)?;
        for c in &report.checks {
            println!("  {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    Ok(())
}

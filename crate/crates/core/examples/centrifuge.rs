//! Sorting by weight: discs with drift weights 1 and 2 end up heavy below
//! light as the drift scale grows.

use brownian_liquid::experiments::{centrifuge_experiment, CentrifugeParams, SamplingPlan};
use brownian_liquid::{ModelSpec, Vessel};

fn main() -> brownian_liquid::Result<()> {
    let n = 10;
    let weights: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { 2.0 }).collect();
    let spec = ModelSpec::new(2, Vessel::half_cylinder(0.5)?, vec![0.1; n], weights, 1.0)?;
    let params = CentrifugeParams {
        lambdas: vec![1.0, 10.0, 50.0, 200.0],
        delta: 0.2,
        max_violation_frequency: 0.05,
        plan: SamplingPlan { ramp_sweeps: 2_000, burn_in: 20_000, samples: 500, thin: 100, ..Default::default() },
    };
    let report = centrifuge_experiment(&spec, &params, 8)?;
    for e in &report.estimates {
        println!("lambda {:6.1}: sorted {:.3} (ESS {:.0})", e.lambda, e.probability, e.ess);
    }
    println!("passed: {}", report.passed);
    Ok(())
}

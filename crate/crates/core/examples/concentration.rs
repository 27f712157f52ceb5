//! Probability that the weighted centre of mass sits within `eps / 2` of its
//! minimum, for increasing drift scales.

use brownian_liquid::experiments::{concentration_experiment, ConcentrationParams, SamplingPlan};
use brownian_liquid::{ModelSpec, Vessel};

fn main() -> brownian_liquid::Result<()> {
    let spec = ModelSpec::uniform(2, Vessel::half_cylinder(0.5)?, 5, 0.2, 1.0)?;
    let params = ConcentrationParams {
        lambdas: vec![1.0, 5.0, 20.0, 100.0],
        epsilon: 0.2,
        threshold: 0.9,
        c1: None,
        c1_restarts: 4,
        plan: SamplingPlan::default(),
    };
    let report = concentration_experiment(&spec, &params, 5)?;
    for e in &report.estimates {
        println!("lambda {:6.1}: P = {:.3} [{:.3}, {:.3}]", e.lambda, e.probability, e.interval[0], e.interval[1]);
    }
    println!("passed: {}", report.passed);
    Ok(())
}

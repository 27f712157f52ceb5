//! Liquid surface formation: fifty small discs in a half cylinder settle to
//! within `delta` of the densest arrangement and leave no hole below the
//! surface.

use brownian_liquid::experiments::{surface_experiment, SamplingPlan, SurfaceParams};
use brownian_liquid::{ModelSpec, Vessel};

fn main() -> brownian_liquid::Result<()> {
    let spec = ModelSpec::uniform(2, Vessel::half_cylinder(1.0)?, 50, 0.08, 1.0)?;
    let params = SurfaceParams {
        lambdas: vec![1.0, 10.0, 50.0, 200.0],
        delta: 0.3,
        threshold: 0.9,
        c1: None,
        c1_restarts: 4,
        plan: SamplingPlan { ramp_sweeps: 5_000, burn_in: 5_000, samples: 500, thin: 20, ..Default::default() },
    };
    let report = surface_experiment(&spec, &params, 1)?;
    for e in report.estimates.iter().filter(|e| !e.event.starts_with("no_room_object_")) {
        println!("{:<26} lambda {:6.1}: {:.3}", e.event, e.lambda, e.probability);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    println!("passed: {}", report.passed);
    Ok(())
}

//! Connects two random valid configurations by a piecewise linear path of
//! valid configurations and certifies it by dense sampling.

use brownian_liquid::experiments::connectivity_path;
use brownian_liquid::sampler::{initial_configuration, ChainState};
use brownian_liquid::{Configuration, ModelSpec, Vessel};

fn draw(spec: &ModelSpec, seed: u64) -> brownian_liquid::Result<Configuration> {
    let mut st = ChainState::new(spec, initial_configuration(spec, seed)?, seed)?;
    for _ in 0..500 {
        st.sweep(spec);
    }
    Ok(st.into_configuration())
}

fn main() -> brownian_liquid::Result<()> {
    let spec = ModelSpec::uniform(2, Vessel::half_cylinder(1.0)?, 8, 0.2, 3.0)?;
    let (from, to) = (draw(&spec, 1)?, draw(&spec, 2)?);
    let path = connectivity_path(&spec, &from, &to, 1000)?;
    println!(
        "plan {}: {} waypoints, {} segments certified at {} samples each: {}",
        path.plan,
        path.waypoints.len(),
        path.certificate.segments,
        path.certificate.samples_per_segment,
        path.certificate.valid
    );
    Ok(())
}

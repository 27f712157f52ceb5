//! Integrates the reflected dynamics for ten discs dropped into a half
//! cylinder and prints the liquid surface as it settles.

use brownian_liquid::configuration::{is_valid, surface_height};
use brownian_liquid::dynamics::{simulate_with, DynamicsParams};
use brownian_liquid::sampler::initial_configuration;
use brownian_liquid::{ModelSpec, Vessel};

fn main() -> brownian_liquid::Result<()> {
    let spec = ModelSpec::uniform(2, Vessel::half_cylinder(1.0)?, 10, 0.15, 1.0)?;
    let params = DynamicsParams::for_spec(&spec);
    let init = initial_configuration(&spec, 3)?;
    let mut last = init.clone();
    simulate_with(&spec, &init, &params, 5.0, 0.5, 3, |t, c| {
        println!("t = {t:4.1}  surface {:.3}", surface_height(&spec, c, None));
        last = c.clone();
    })?;
    println!("dt {:.1e}, final configuration valid: {}", params.dt, is_valid(&spec, &last)?);
    Ok(())
}

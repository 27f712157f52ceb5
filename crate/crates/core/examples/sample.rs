//! Samples the stationary law of a single disc and compares the mean height
//! above the floor with the exponential law of rate `2a`.

use brownian_liquid::sampler::{diagnostics, initial_configuration, run_chain_with, ChainState, RunOptions};
use brownian_liquid::{ModelSpec, Vessel};

fn main() -> brownian_liquid::Result<()> {
    let (r, a) = (0.1, 2.0);
    let spec = ModelSpec::uniform(2, Vessel::half_cylinder(1.0)?, 1, r, a)?;
    let init = initial_configuration(&spec, 7)?;
    let mut state = ChainState::new(&spec, init, 7)?;
    let mut heights = Vec::new();
    let opts = RunOptions { sweeps: 210_000, thin: 2, burn_in: 10_000 };
    run_chain_with(&spec, &mut state, opts, |_, st| heights.push(st.configuration().height(0) - r))?;

    let mean = heights.iter().sum::<f64>() / heights.len() as f64;
    let d = diagnostics(&heights, Some(state.acceptance_rate()))?;
    println!("mean height above floor {mean:.4} (exact {:.4})", 1.0 / (2.0 * a));
    println!("samples {} tau {:.2} ESS {:.0} acceptance {:.2}", d.samples, d.tau, d.ess, state.acceptance_rate());
    Ok(())
}

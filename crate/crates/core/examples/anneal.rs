//! Estimates the lowest weighted centre of mass `c1` for seven discs by
//! annealing with restarts, then compacting.

use brownian_liquid::packing::{c1_estimate, C1Options};
use brownian_liquid::{ModelSpec, Vessel};

fn main() -> brownian_liquid::Result<()> {
    let spec = ModelSpec::uniform(2, Vessel::half_cylinder(0.5)?, 7, 0.2, 1.0)?;
    let est = c1_estimate(&spec, &C1Options::for_spec(&spec, 4, 11))?;
    println!("c1 ~ {:.5} (best of {:?})", est.value, est.per_restart);
    for k in 0..spec.n() {
        let c = est.argmin.center(k);
        println!("  disc {k}: height {:.4}, lateral {:+.4}", c[0], c[1]);
    }
    Ok(())
}

//! Builds the honeycomb packing of a box and of a cylinder cut off at a
//! given height, and reports the covered fraction.

use std::f64::consts::PI;

use brownian_liquid::packing::{covered_fraction, honeycomb_in_region, HoneycombSpec, Region};
use brownian_liquid::Vessel;

fn main() -> brownian_liquid::Result<()> {
    let hs = HoneycombSpec::new(0.25)?;
    let frac = covered_fraction(&hs, [0.0, 0.0], [50.0, 50.0])?;
    println!("50x50 box: covered fraction {frac:.5}, hexagonal density {:.5}", PI / 12f64.sqrt());

    let region = Region::Vessel { vessel: Vessel::half_cylinder(2.0)?, max_height: 3.0 };
    let sites = honeycomb_in_region(&hs, &region, Some(20))?;
    println!("lowest {} discs in a half cylinder of half width 2:", sites.len());
    for s in &sites {
        println!("  {:.4} {:+.4}", s[0], s[1]);
    }
    Ok(())
}

//! Checks the growth condition on vessel sections for a half cylinder and
//! for a vessel whose sections grow like `e^{4ab}`.

use std::sync::Arc;

use brownian_liquid::experiments::{check_vessel, VesselCheckOptions};
use brownian_liquid::Vessel;

fn main() -> brownian_liquid::Result<()> {
    let cyl = Vessel::half_cylinder(1.0)?;
    for a in [0.01, 1.0, 100.0] {
        let r = check_vessel(&cyl, a, &VesselCheckOptions::new(20.0 / a))?;
        println!("half cylinder, a = {a}: holds {} (b0 {:?})", r.condition_holds, r.b0);
    }
    let a = 1.0;
    let flare = Vessel::graph(
        2,
        Arc::new(move |y: &[f64]| ((2.0 * y[0].abs()).ln() / (4.0 * a)).max(0.0)),
        vec![-1e9],
        vec![1e9],
        "flare",
    )?;
    let r = check_vessel(&flare, a, &VesselCheckOptions::new(5.0))?;
    println!("flare, a = {a}: holds {}", r.condition_holds);
    Ok(())
}

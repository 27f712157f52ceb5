use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::configuration::{Configuration, ModelSpec};
use crate::error::Result;
use crate::geometry::{ball_volume, overlapping, NeighborGrid, Vessel};

const ATTEMPTS_PER_OBJECT: usize = 100_000;

/// Stream reserved for initialization so it never collides with chain
/// streams of the same seed.
const INIT_STREAM: u64 = u64::MAX;

/// Random lateral position for a ball of radius `r`.
fn random_lateral(vessel: &Vessel, dim: usize, r: f64, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    match vessel {
        Vessel::HalfCylinder { half_width } => {
            let lim = (half_width - r).max(0.0);
            loop {
                for x in out[1..].iter_mut() {
                    *x = if lim > 0.0 { rng.random_range(-lim..=lim) } else { 0.0 };
                }
                if dim == 2 || out[1..].iter().map(|x| x * x).sum::<f64>() <= lim * lim {
                    break;
                }
            }
        }
        Vessel::Graph(gd) => {
            for (i, x) in out[1..].iter_mut().enumerate() {
                *x = rng.random_range(gd.lateral_lo()[i]..gd.lateral_hi()[i]);
            }
        }
    }
}

fn cross_section(vessel: &Vessel, dim: usize) -> f64 {
    match vessel {
        Vessel::HalfCylinder { half_width } => ball_volume(dim - 1, *half_width),
        Vessel::Graph(gd) => gd
            .lateral_lo()
            .iter()
            .zip(gd.lateral_hi())
            .map(|(lo, hi)| hi - lo)
            .product(),
    }
}

/// A valid starting configuration, built by random sequential insertion
/// (largest objects first) into a slab a few times taller than the packed
/// volume needs. An object that finds no room within the attempt budget is
/// stacked on top of everything placed so far, which always succeeds.
pub fn initial_configuration(spec: &ModelSpec, seed: u64) -> Result<Configuration> {
    let dim = spec.dim();
    let n = spec.n();
    let vessel = spec.vessel();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);

    let volume: f64 = spec.radii().iter().map(|&r| ball_volume(dim, r)).sum();
    let slab = 4.0 * volume / cross_section(vessel, dim) + 2.0 * spec.max_diameter();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| spec.radius(b).total_cmp(&spec.radius(a)).then(a.cmp(&b)));

    let mut centers = vec![0.0; n * dim];
    // Objects not yet placed sit far away so the grid can index everything.
    let parking = 1e6;
    for k in 0..n {
        centers[k * dim] = parking + 10.0 * k as f64 * spec.max_diameter();
    }
    let mut grid = NeighborGrid::build(dim, &centers, spec.radii())?;
    let mut top = f64::NEG_INFINITY;
    let mut trial = vec![0.0; dim];

    for &k in &order {
        let r = spec.radius(k);
        let mut placed = false;
        for _ in 0..ATTEMPTS_PER_OBJECT {
            random_lateral(vessel, dim, r, &mut rng, &mut trial);
            let floor = vessel.floor_height(&trial[1..], r);
            trial[0] = floor + rng.random_range(0.0..slab);
            if fits(spec, &grid, &centers, k, &trial) {
                placed = true;
                break;
            }
        }
        if !placed {
            random_lateral(vessel, dim, r, &mut rng, &mut trial);
            let floor = vessel.floor_height(&trial[1..], r);
            trial[0] = floor.max(top + r);
        }
        centers[k * dim..(k + 1) * dim].copy_from_slice(&trial);
        grid.move_unchecked(k, &trial);
        top = top.max(trial[0] + r);
    }
    Configuration::new(dim, centers)
}

fn fits(spec: &ModelSpec, grid: &NeighborGrid, centers: &[f64], k: usize, c: &[f64]) -> bool {
    let r = spec.radius(k);
    if !spec.vessel().contains_ball(c, r, 0.0) {
        return false;
    }
    let dim = spec.dim();
    let mut clear = true;
    grid.for_each_candidate(c, r, |j| {
        if clear && j != k && overlapping(c, &centers[j * dim..(j + 1) * dim], r + spec.radius(j)) {
            clear = false;
        }
    });
    clear
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::is_valid;
    use std::sync::Arc;

    #[test]
    fn valid_in_every_vessel() {
        let cyl = Vessel::half_cylinder(1.0).unwrap();
        for (dim, n, r) in [(2, 1, 0.1), (2, 60, 0.1), (3, 40, 0.2), (2, 10, 0.5)] {
            let spec = ModelSpec::uniform(dim, cyl.clone(), n, r, 1.0).unwrap();
            let cfg = initial_configuration(&spec, 3).unwrap();
            assert!(is_valid(&spec, &cfg).unwrap(), "d={dim} n={n}");
        }
        let vee = Vessel::graph(2, Arc::new(|y: &[f64]| y[0].abs()), vec![-2.0], vec![2.0], "vee").unwrap();
        let spec = ModelSpec::uniform(2, vee, 25, 0.1, 1.0).unwrap();
        assert!(is_valid(&spec, &initial_configuration(&spec, 1).unwrap()).unwrap());
    }

    #[test]
    fn deterministic() {
        let spec = ModelSpec::uniform(2, Vessel::half_cylinder(1.0).unwrap(), 30, 0.1, 1.0).unwrap();
        assert_eq!(initial_configuration(&spec, 5).unwrap(), initial_configuration(&spec, 5).unwrap());
    }
}

//! Vessels, balls and the containment / overlap predicates that define the
//! configuration space.
//!
//! Touching is allowed: two balls overlap only when they interpenetrate, and a
//! ball resting on a wall is inside the vessel.

mod grid;
mod vessel;

pub use grid::NeighborGrid;
pub use vessel::{BoundaryFn, GraphDomain, Vessel, DEFAULT_HEMISPHERE_SAMPLES};


use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.len() < 2 {
            return Err(Error::param("center", "dimension must be at least 2"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("radius", format!("must be > 0, got {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// Whether the ball shrunk by `tol` lies inside the vessel.
pub fn ball_inside_vessel(vessel: &Vessel, ball: &Ball, tol: f64) -> Result<bool> {
    if !(tol >= 0.0) {
        return Err(Error::param("tol", format!("must be >= 0, got {tol}")));
    }
    if let Vessel::Graph(gd) = vessel {
        if gd.lateral_lo().len() + 1 != ball.dim() {
            return Err(Error::DimensionMismatch {
                expected: gd.lateral_lo().len() + 1,
                got: ball.dim(),
            });
        }
    }
    Ok(vessel.contains_ball(&ball.center, ball.radius, tol))
}

/// `|c1 - c2| < r1 + r2 - tol`.
pub fn balls_overlap(a: &Ball, b: &Ball, tol: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(dist_sq(&a.center, &b.center).sqrt() < a.radius + b.radius - tol)
}

/// Volume of the `dim`-dimensional ball of radius `r`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    // V_k = V_{k-2} * 2 pi / k with V_0 = 1, V_1 = 2.
    let mut k = dim % 2;
    let mut unit = if k == 0 { 1.0 } else { 2.0 };
    while k < dim {
        k += 2;
        unit *= 2.0 * std::f64::consts::PI / k as f64;
    }
    unit * r.powi(dim as i32)
}

#[inline]
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Overlap test without the square root; `sum_r` is `r1 + r2`.
#[inline]
pub(crate) fn overlapping(a: &[f64], b: &[f64], sum_r: f64) -> bool {
    dist_sq(a, b) < sum_r * sum_r
}

/// Builds a grid over a list of balls.
pub fn grid_build(balls: &[Ball]) -> Result<NeighborGrid> {
    let dim = balls.first().map(Ball::dim).ok_or_else(|| Error::param("balls", "empty list"))?;
    let mut centers = Vec::with_capacity(dim * balls.len());
    for b in balls {
        if b.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: b.dim(),
            });
        }
        centers.extend_from_slice(&b.center);
    }
    let radii: Vec<f64> = balls.iter().map(|b| b.radius).collect();
    NeighborGrid::build(dim, &centers, &radii)
}

pub fn grid_query(grid: &NeighborGrid, ball: &Ball) -> Vec<usize> {
    grid.query(&ball.center, ball.radius)
}

pub fn grid_move(grid: &mut NeighborGrid, index: usize, new_center: &[f64]) -> Result<()> {
    grid.move_to(index, new_center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_ball_volumes() {
        let pi = std::f64::consts::PI;
        assert!((ball_volume(1, 1.0) - 2.0).abs() < 1e-12);
        assert!((ball_volume(2, 1.0) - pi).abs() < 1e-12);
        assert!((ball_volume(3, 2.0) - 4.0 / 3.0 * pi * 8.0).abs() < 1e-12);
        assert!((ball_volume(4, 1.0) - pi * pi / 2.0).abs() < 1e-12);
    }

    fn ball(c: &[f64], r: f64) -> Ball {
        Ball::new(c.to_vec(), r).unwrap()
    }

    #[test]
    fn containment_examples() {
        let v = Vessel::half_cylinder(1.0).unwrap();
        assert!(ball_inside_vessel(&v, &ball(&[0.5, 0.0], 0.1), 0.0).unwrap());
        assert!(!ball_inside_vessel(&v, &ball(&[0.05, 0.0], 0.1), 0.0).unwrap());
        assert!(!ball_inside_vessel(&v, &ball(&[0.5, 0.95], 0.1), 0.0).unwrap());
        assert!(ball_inside_vessel(&v, &ball(&[0.5, 0.0], 0.1), -0.1).is_err());
    }

    #[test]
    fn overlap_examples() {
        let a = ball(&[0.0, 0.0], 0.1);
        assert!(!balls_overlap(&a, &ball(&[0.3, 0.0], 0.1), 0.0).unwrap());
        assert!(balls_overlap(&a, &ball(&[0.19, 0.0], 0.1), 0.0).unwrap());
        // Exact tangency is not an overlap.
        assert!(!balls_overlap(&a, &ball(&[0.2, 0.0], 0.1), 0.0).unwrap());
        assert!(balls_overlap(&a, &ball(&[0.0, 0.0, 0.0], 0.1), 0.0).is_err());
    }

    #[test]
    fn bad_balls_are_rejected() {
        assert!(Ball::new(vec![0.0], 0.1).is_err());
        assert!(Ball::new(vec![0.0, 0.0], 0.0).is_err());
    }

    fn random_balls(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Ball> {
        (0..n)
            .map(|_| {
                let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                ball(&c, rng.random_range(0.02..0.15))
            })
            .collect()
    }

    fn brute_overlaps(balls: &[Ball], q: &Ball) -> Vec<usize> {
        (0..balls.len())
            .filter(|&j| balls_overlap(&balls[j], q, 0.0).unwrap())
            .collect()
    }

    #[test]
    fn grid_query_covers_all_pairs_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let balls = random_balls(&mut rng, 100, 2);
        let g = grid_build(&balls).unwrap();
        for b in &balls {
            let q = grid_query(&g, b);
            for j in brute_overlaps(&balls, b) {
                assert!(q.contains(&j));
            }
        }
    }

    #[test]
    fn moved_grid_matches_rebuilt_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut balls = random_balls(&mut rng, 60, 2);
        let mut g = grid_build(&balls).unwrap();
        for _ in 0..2000 {
            let k = rng.random_range(0..balls.len());
            let step: Vec<f64> = (0..2).map(|_| rng.random_range(-0.3..0.3)).collect();
            let c: Vec<f64> = balls[k].center.iter().zip(&step).map(|(a, b)| a + b).collect();
            grid_move(&mut g, k, &c).unwrap();
            balls[k].center = c;
        }
        let fresh = grid_build(&balls).unwrap();
        assert_eq!(g.cell_size(), fresh.cell_size());
        assert_eq!(g.membership(), fresh.membership());
    }

    proptest! {
        #[test]
        fn grid_query_is_superset(seed in any::<u64>(), n in 1usize..80, dim in 2usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let balls = random_balls(&mut rng, n, dim);
            let g = grid_build(&balls).unwrap();
            let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.5..2.5)).collect();
            let q = ball(&c, rng.random_range(0.01..0.4));
            let cand = grid_query(&g, &q);
            for j in brute_overlaps(&balls, &q) {
                prop_assert!(cand.contains(&j));
            }
        }

        #[test]
        fn overlap_is_symmetric(a in prop::array::uniform2(-1.0f64..1.0), b in prop::array::uniform2(-1.0f64..1.0),
                                ra in 0.01f64..0.5, rb in 0.01f64..0.5, tol in 0.0f64..0.05) {
            let x = ball(&a, ra);
            let y = ball(&b, rb);
            prop_assert_eq!(balls_overlap(&x, &y, tol).unwrap(), balls_overlap(&y, &x, tol).unwrap());
        }

        #[test]
        fn containment_monotone_in_radius(c in prop::array::uniform2(-1.5f64..1.5), r in 0.01f64..0.8, shrink in 0.0f64..1.0,
                                          w in 0.3f64..2.0) {
            let v = Vessel::half_cylinder(w).unwrap();
            let small = r * shrink.max(1e-3);
            if ball_inside_vessel(&v, &ball(&c, r), 0.0).unwrap() {
                prop_assert!(ball_inside_vessel(&v, &ball(&c, small), 0.0).unwrap());
            }
        }
    }
}

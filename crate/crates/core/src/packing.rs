//! Honeycomb disc packings, downward compaction and upper bounds on
//! `c1 = inf_D sum_k alpha_k x^k_1`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::Serialize;

use crate::configuration::{is_valid, weighted_cm, Configuration, ModelSpec};
use crate::error::{Error, Result};
use crate::geometry::Vessel;
use crate::sampler::{anneal, initial_configuration};

/// The hexagonal lattice of discs of radius `radius`, generated by
/// `(2 rho, 0)` and `(rho, rho sqrt 3)` in `(x1, x2)`, with one disc centred
/// at `anchor`. Rows run parallel to the first axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HoneycombSpec {
    pub radius: f64,
    pub anchor: [f64; 2],
}

impl HoneycombSpec {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("radius", format!("must be > 0, got {radius}")));
        }
        Ok(HoneycombSpec {
            radius,
            anchor: [0.0, 0.0],
        })
    }

    pub fn with_anchor(mut self, anchor: [f64; 2]) -> Self {
        self.anchor = anchor;
        self
    }

    /// Centre of lattice site `(i, j)`.
    pub fn site(&self, i: i64, j: i64) -> [f64; 2] {
        let r = self.radius;
        [
            self.anchor[0] + 2.0 * r * i as f64 + r * j as f64,
            self.anchor[1] + r * 3f64.sqrt() * j as f64,
        ]
    }

    /// Every lattice site whose disc meets the box `[lo, hi]`, inflated by
    /// `margin`.
    fn sites_near(&self, lo: [f64; 2], hi: [f64; 2], margin: f64) -> Vec<[f64; 2]> {
        let r = self.radius;
        let row = r * 3f64.sqrt();
        let j_lo = ((lo[1] - margin - self.anchor[1]) / row).floor() as i64;
        let j_hi = ((hi[1] + margin - self.anchor[1]) / row).ceil() as i64;
        let mut out = Vec::new();
        for j in j_lo..=j_hi {
            let shift = self.anchor[0] + r * j as f64;
            let i_lo = ((lo[0] - margin - shift) / (2.0 * r)).floor() as i64;
            let i_hi = ((hi[0] + margin - shift) / (2.0 * r)).ceil() as i64;
            for i in i_lo..=i_hi {
                out.push(self.site(i, j));
            }
        }
        out
    }
}

/// Where lattice discs are collected.
#[derive(Clone, Debug)]
pub enum Region {
    /// Axis-aligned box `lo <= x <= hi`.
    Rect { lo: [f64; 2], hi: [f64; 2] },
    /// A planar vessel cut off at `max_height` (discs must lie below it).
    Vessel { vessel: Vessel, max_height: f64 },
}

impl Region {
    fn bounds(&self) -> Result<([f64; 2], [f64; 2])> {
        match self {
            Region::Rect { lo, hi } => Ok((*lo, *hi)),
            Region::Vessel { vessel, max_height } => match vessel {
                Vessel::HalfCylinder { half_width } => Ok(([0.0, -half_width], [*max_height, *half_width])),
                Vessel::Graph(gd) => {
                    if gd.lateral_lo().len() != 1 {
                        return Err(Error::PlanarOnly {
                            op: "honeycomb",
                            dim: gd.lateral_lo().len() + 1,
                        });
                    }
                    let (a, b) = (gd.lateral_lo()[0], gd.lateral_hi()[0]);
                    let low = (0..=1000)
                        .map(|i| gd.eval(&[a + (b - a) * i as f64 / 1000.0]))
                        .fold(f64::INFINITY, f64::min);
                    Ok(([low, a], [*max_height, b]))
                }
            },
        }
    }

    fn holds(&self, c: [f64; 2], r: f64) -> bool {
        const EPS: f64 = 1e-12;
        match self {
            Region::Rect { lo, hi } => (0..2).all(|i| c[i] - r >= lo[i] - EPS && c[i] + r <= hi[i] + EPS),
            Region::Vessel { vessel, max_height } => {
                c[0] + r <= max_height + EPS && vessel.contains_ball(&c, r, EPS)
            }
        }
    }
}

fn check_planar(region: &Region) -> Result<()> {
    region.bounds().map(|_| ())
}

/// All lattice discs fully inside `region`, in increasing `x1` then `x2`,
/// truncated to `count_limit`.
pub fn honeycomb_in_region(
    hspec: &HoneycombSpec,
    region: &Region,
    count_limit: Option<usize>,
) -> Result<Vec<[f64; 2]>> {
    let (lo, hi) = region.bounds()?;
    let r = hspec.radius;
    let mut out: Vec<[f64; 2]> = hspec
        .sites_near(lo, hi, 0.0)
        .into_iter()
        .filter(|c| region.holds(*c, r))
        .collect();
    out.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    if let Some(n) = count_limit {
        out.truncate(n);
    }
    Ok(out)
}

/// `int_x1^x2 sqrt(r^2 - x^2) dx` for `-r <= x1 <= x2 <= r`.
fn half_disc_integral(r: f64, x1: f64, x2: f64) -> f64 {
    let prim = |x: f64| {
        let x = x.clamp(-r, r);
        0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).asin())
    };
    prim(x2) - prim(x1)
}

/// Exact area of the disc of radius `r` at the origin intersected with the
/// box `[x_lo, x_hi] x [y_lo, y_hi]`.
pub fn disc_box_area(r: f64, x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> f64 {
    let a = x_lo.max(-r);
    let b = x_hi.min(r);
    if a >= b || y_lo >= y_hi {
        return 0.0;
    }
    // The vertical chord at x spans [max(y_lo, -s), min(y_hi, s)] with
    // s = sqrt(r^2 - x^2). Split where s crosses |y_lo| or |y_hi|; on each
    // piece the chord length is c_s * s(x) + c_0.
    let mut cuts = vec![a, b];
    for y in [y_lo, y_hi] {
        if y.abs() < r {
            let x = (r * r - y * y).sqrt();
            for c in [-x, x] {
                if c > a && c < b {
                    cuts.push(c);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        if q <= p {
            continue;
        }
        let m = 0.5 * (p + q);
        let s = (r * r - m * m).max(0.0).sqrt();
        let top_is_s = s < y_hi;
        let bot_is_s = -s > y_lo;
        let top = if top_is_s { s } else { y_hi };
        let bot = if bot_is_s { -s } else { y_lo };
        if top <= bot {
            continue;
        }
        let mut c_s = 0.0;
        let mut c_0 = 0.0;
        if top_is_s { c_s += 1.0 } else { c_0 += y_hi }
        if bot_is_s { c_s += 1.0 } else { c_0 -= y_lo }
        area += c_s * half_disc_integral(r, p, q) + c_0 * (q - p);
    }
    area
}

/// Fraction of the box `[lo, hi]` covered by the full lattice, with discs
/// crossing the boundary clipped to the box.
pub fn covered_fraction(hspec: &HoneycombSpec, lo: [f64; 2], hi: [f64; 2]) -> Result<f64> {
    if !(hi[0] > lo[0] && hi[1] > lo[1]) {
        return Err(Error::param("box", "need lo < hi in both coordinates"));
    }
    let r = hspec.radius;
    let covered: f64 = hspec
        .sites_near(lo, hi, r)
        .into_iter()
        .map(|c| disc_box_area(r, lo[0] - c[0], hi[0] - c[0], lo[1] - c[1], hi[1] - c[1]))
        .sum();
    Ok(covered / ((hi[0] - lo[0]) * (hi[1] - lo[1])))
}

/// Fraction of the box covered by the lattice discs lying entirely inside it.
pub fn contained_fraction(hspec: &HoneycombSpec, lo: [f64; 2], hi: [f64; 2]) -> Result<f64> {
    let region = Region::Rect { lo, hi };
    check_planar(&region)?;
    let n = honeycomb_in_region(hspec, &region, None)?.len();
    Ok(n as f64 * PI * hspec.radius * hspec.radius / ((hi[0] - lo[0]) * (hi[1] - lo[1])))
}

fn lowest_order(centers: &[Vec<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..centers.len()).collect();
    idx.sort_by(|&a, &b| {
        let (p, q) = (&centers[a], &centers[b]);
        p[0].total_cmp(&q[0])
            .then_with(|| match (p.get(1), q.get(1)) {
                (Some(x), Some(y)) => x.total_cmp(y),
                _ => Ordering::Equal,
            })
            .then(a.cmp(&b))
    });
    idx
}

/// The `n` centres with the lowest first coordinate; ties go to the smaller
/// second coordinate, then to the earlier index.
pub fn lowest_n(centers: &[Vec<f64>], n: usize) -> Result<Vec<Vec<f64>>> {
    if n > centers.len() {
        return Err(Error::param(
            "n",
            format!("asked for {n} centres out of {}", centers.len()),
        ));
    }
    Ok(lowest_order(centers)
        .into_iter()
        .take(n)
        .map(|i| centers[i].clone())
        .collect())
}

/// Height object `k` can drop to by moving straight down, with the others
/// fixed.
fn drop_height(spec: &ModelSpec, cfg: &Configuration, k: usize) -> f64 {
    let c = cfg.center(k);
    let r = spec.radius(k);
    let mut h = spec.vessel().floor_height(&c[1..], r);
    for j in 0..cfg.len() {
        if j == k {
            continue;
        }
        let o = cfg.center(j);
        if o[0] > c[0] {
            continue;
        }
        let lat2: f64 = c[1..].iter().zip(&o[1..]).map(|(a, b)| (a - b) * (a - b)).sum();
        let sum = r + spec.radius(j);
        if lat2 < sum * sum {
            h = h.max(o[0] + (sum * sum - lat2).sqrt());
        }
    }
    h
}

/// Pushes every object straight down until it touches the floor or another
/// object, lowest objects first, repeating passes until no object moves more
/// than `1e-9`. Returns the compacted configuration and the pass count.
pub fn compact(spec: &ModelSpec, cfg: &Configuration) -> Result<(Configuration, usize)> {
    crate::configuration::require_valid(spec, cfg)?;
    let mut cur = cfg.clone();
    let mut passes = 0;
    loop {
        passes += 1;
        let mut order: Vec<usize> = (0..cur.len()).collect();
        order.sort_by(|&a, &b| cur.height(a).total_cmp(&cur.height(b)).then(a.cmp(&b)));
        let mut biggest: f64 = 0.0;
        for k in order {
            let target = drop_height(spec, &cur, k);
            let old = cur.height(k);
            if target >= old {
                continue;
            }
            // Nudge the contact height up by a few ulps so rounding never
            // produces an overlap.
            let mut h = target;
            for _ in 0..4 {
                cur.center_mut(k)[0] = h;
                if contact_ok(spec, &cur, k) {
                    break;
                }
                h += 1e-12 * (1.0 + h.abs());
            }
            if !contact_ok(spec, &cur, k) {
                cur.center_mut(k)[0] = old;
                continue;
            }
            biggest = biggest.max(old - cur.height(k));
        }
        if biggest <= 1e-9 || passes >= 10_000 {
            break;
        }
    }
    Ok((cur, passes))
}

fn contact_ok(spec: &ModelSpec, cfg: &Configuration, k: usize) -> bool {
    let c = cfg.center(k);
    let r = spec.radius(k);
    if !spec.vessel().contains_ball(c, r, 0.0) {
        return false;
    }
    (0..cfg.len()).all(|j| {
        j == k || {
            let o = cfg.center(j);
            let sum = r + spec.radius(j);
            c.iter().zip(o).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= sum * sum
        }
    })
}

#[derive(Clone, Debug)]
pub struct C1Estimate {
    pub value: f64,
    pub argmin: Configuration,
    pub seed: u64,
    /// Compacted value reached by each restart, in seed order.
    pub per_restart: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct C1Options {
    pub restarts: usize,
    /// Increasing drift scales for the annealing ramp.
    pub schedule: Vec<f64>,
    pub sweeps_per_stage: u64,
    pub seed: u64,
}

impl C1Options {
    /// A ramp from `1` to `1e4` drift-scale units relative to `1 / min_drift`.
    pub fn for_spec(spec: &ModelSpec, restarts: usize, seed: u64) -> Self {
        let base = 1.0 / spec.min_drift().max(1e-300) * spec.drift_scale();
        let schedule = (0..=12).map(|i| base * 10f64.powf(i as f64 / 3.0)).collect();
        C1Options {
            restarts,
            schedule,
            sweeps_per_stage: 400,
            seed,
        }
    }
}

/// Best-of-restarts upper bound on `c1`: each restart anneals from its own
/// random start, and its best configuration is compacted downwards. The
/// winner is the smallest `(value, seed)`.
pub fn c1_estimate(spec: &ModelSpec, opts: &C1Options) -> Result<C1Estimate> {
    if opts.restarts == 0 {
        return Err(Error::param("restarts", "must be >= 1"));
    }
    let mut best: Option<C1Estimate> = None;
    let mut per_restart = Vec::with_capacity(opts.restarts);
    for i in 0..opts.restarts {
        let seed = opts.seed.wrapping_add(i as u64);
        let init = initial_configuration(spec, seed)?;
        let out = anneal(spec, init, &opts.schedule, opts.sweeps_per_stage, seed)?;
        let (packed, _) = compact(spec, &out.best)?;
        debug_assert!(is_valid(spec, &packed)?);
        let value = weighted_cm(spec, &packed);
        per_restart.push(value);
        let better = match &best {
            None => true,
            Some(b) => (value, seed) < (b.value, b.seed),
        };
        if better {
            best = Some(C1Estimate {
                value,
                argmin: packed,
                seed,
                per_restart: Vec::new(),
            });
        }
    }
    let mut best = best.expect("at least one restart");
    best.per_restart = per_restart;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn min_pair_distance(pts: &[[f64; 2]]) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                m = m.min(((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt());
            }
        }
        m
    }

    #[test]
    fn lattice_neighbours_touch() {
        let h = HoneycombSpec::new(0.25).unwrap();
        let o = h.site(0, 0);
        for (i, j) in [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)] {
            let p = h.site(i, j);
            let d = ((p[0] - o[0]).powi(2) + (p[1] - o[1]).powi(2)).sqrt();
            assert!((d - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn thin_region_is_empty() {
        let h = HoneycombSpec::new(0.25).unwrap();
        let r = Region::Rect { lo: [0.0, 0.0], hi: [10.0, 0.4] };
        assert!(honeycomb_in_region(&h, &r, None).unwrap().is_empty());
    }

    #[test]
    fn ordering_and_limit() {
        let h = HoneycombSpec::new(0.1).unwrap();
        let region = Region::Vessel {
            vessel: Vessel::half_cylinder(1.0).unwrap(),
            max_height: 1.0,
        };
        let all = honeycomb_in_region(&h, &region, None).unwrap();
        assert!(all.windows(2).all(|w| (w[0][0], w[0][1]) < (w[1][0], w[1][1])));
        let some = honeycomb_in_region(&h, &region, Some(7)).unwrap();
        assert_eq!(&all[..7], &some[..]);
        assert!(min_pair_distance(&all) >= 0.2 - 1e-12);
        for c in &all {
            assert!(c[0] >= 0.1 - 1e-12 && c[0] <= 0.9 + 1e-12 && c[1].abs() <= 0.9 + 1e-12);
        }
    }

    #[test]
    fn box_area_matches_grid_count() {
        let r = 0.7;
        let cases = [
            (-1.0, 1.0, -1.0, 1.0),
            (-0.3, 0.2, -1.0, 0.5),
            (0.1, 0.6, 0.2, 0.9),
            (-0.69, -0.5, -0.1, 0.1),
            (0.5, 2.0, -2.0, -0.3),
        ];
        for (a, b, c, d) in cases {
            let exact = disc_box_area(r, a, b, c, d);
            let m = 2000;
            let mut hits = 0usize;
            for i in 0..m {
                for j in 0..m {
                    let x = a + (b - a) * (i as f64 + 0.5) / m as f64;
                    let y = c + (d - c) * (j as f64 + 0.5) / m as f64;
                    if x * x + y * y < r * r {
                        hits += 1;
                    }
                }
            }
            let approx = hits as f64 / (m * m) as f64 * (b - a) * (d - c);
            assert!((exact - approx).abs() < 2e-3 * (b - a) * (d - c), "{exact} vs {approx}");
        }
        assert!((disc_box_area(1.0, -5.0, 5.0, -5.0, 5.0) - PI).abs() < 1e-12);
    }

    #[test]
    fn lowest_n_examples() {
        let c = vec![vec![0.5, 0.0], vec![0.1, 0.3], vec![0.1, -0.3], vec![0.2, 0.0]];
        assert_eq!(lowest_n(&c, 1).unwrap(), vec![vec![0.1, -0.3]]);
        let mut all = lowest_n(&c, 4).unwrap();
        all.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let mut want = c.clone();
        want.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        assert_eq!(all, want);
        assert!(lowest_n(&c, 5).is_err());
    }

    #[test]
    fn single_disc_c1_is_its_radius() {
        let spec = ModelSpec::uniform(2, Vessel::half_cylinder(1.0).unwrap(), 1, 0.3, 1.0).unwrap();
        let est = c1_estimate(&spec, &C1Options::for_spec(&spec, 1, 0)).unwrap();
        assert!((est.value - 0.3).abs() < 1e-9);
    }

    #[test]
    fn compaction_settles_a_column() {
        let spec = ModelSpec::uniform(2, Vessel::half_cylinder(1.0).unwrap(), 3, 0.1, 1.0).unwrap();
        let cfg = Configuration::new(2, vec![0.5, 0.0, 1.0, 0.05, 2.0, -0.05]).unwrap();
        let (c, _) = compact(&spec, &cfg).unwrap();
        assert!(is_valid(&spec, &c).unwrap());
        assert!((c.height(0) - 0.1).abs() < 1e-9);
        let h1 = 0.1 + (0.04f64 - 0.0025).sqrt();
        assert!((c.height(1) - h1).abs() < 1e-9);
        assert!((c.height(2) - (h1 + (0.04f64 - 0.01).sqrt())).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn lowest_n_matches_full_sort(seed in 0u64..1000, n in 1usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec<f64>> = (0..40)
                .map(|_| vec![(rng.random_range(0..8) as f64) * 0.25, rng.random_range(-1.0..1.0)])
                .collect();
            let got = lowest_n(&pts, n).unwrap();
            let mut sorted = pts.clone();
            sorted.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
            prop_assert_eq!(got, sorted[..n].to_vec());
        }

        #[test]
        fn strip_is_translation_invariant(shift in 0i64..5) {
            // An infinite strip along x1, windowed away from its ends.
            let h = HoneycombSpec::new(0.2).unwrap();
            let strip = Region::Rect { lo: [-100.0, -1.0], hi: [100.0, 1.0] };
            let pts = honeycomb_in_region(&h, &strip, None).unwrap();
            let window = |p: &[f64; 2]| p[0] > -10.0 && p[0] < 10.0;
            let t = 2.0 * 0.2 * shift as f64;
            let moved: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] + t, p[1]]).collect();
            for p in pts.iter().filter(|p| window(p)) {
                prop_assert!(moved.iter().any(|q| (q[0] - p[0]).abs() < 1e-9 && (q[1] - p[1]).abs() < 1e-9));
            }
        }

        #[test]
        fn compaction_is_valid_and_never_raises(seed in 0u64..500) {
            let spec = ModelSpec::uniform(2, Vessel::half_cylinder(1.0).unwrap(), 15, 0.1, 1.0).unwrap();
            let cfg = initial_configuration(&spec, seed).unwrap();
            let (c, _) = compact(&spec, &cfg).unwrap();
            prop_assert!(is_valid(&spec, &c).unwrap());
            for k in 0..15 {
                prop_assert!(c.height(k) <= cfg.height(k) + 1e-12);
            }
        }
    }
}

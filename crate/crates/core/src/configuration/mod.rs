//! Model parameters, configurations of centres, validity and the observables
//! the macroscopic statements are phrased in.

mod holes;

pub use holes::{can_translate_down, HoleFinder};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_sq, overlapping, NeighborGrid, Vessel};

/// Parameters of an `N`-object system.
///
/// Drifts point in `-e1` with magnitude `a_k = drift_scale * weight_k`.
/// Radii are radii, not diameters.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    dim: usize,
    vessel: Vessel,
    radii: Vec<f64>,
    weights: Vec<f64>,
    masses: Vec<f64>,
    drift_scale: f64,
    drifts: Vec<f64>,
}

fn all_positive(name: &'static str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
        Some(i) => Err(Error::param(name, format!("entry {i} is {} (must be > 0)", v[i]))),
        None => Ok(()),
    }
}

impl ModelSpec {
    /// Weighted form: `a_k = drift_scale * weights[k]`.
    pub fn new(
        dim: usize,
        vessel: Vessel,
        radii: Vec<f64>,
        weights: Vec<f64>,
        drift_scale: f64,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::param("dim", format!("must be >= 2, got {dim}")));
        }
        if radii.is_empty() {
            return Err(Error::param("radii", "need at least one object"));
        }
        if weights.len() != radii.len() {
            return Err(Error::DimensionMismatch {
                expected: radii.len(),
                got: weights.len(),
            });
        }
        if let Vessel::Graph(gd) = &vessel {
            if gd.lateral_lo().len() + 1 != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: gd.lateral_lo().len() + 1,
                });
            }
        }
        all_positive("radii", &radii)?;
        all_positive("weights", &weights)?;
        if !(drift_scale > 0.0 && drift_scale.is_finite()) {
            return Err(Error::param("drift_scale", format!("must be > 0, got {drift_scale}")));
        }
        let drifts = weights.iter().map(|w| w * drift_scale).collect();
        let n = radii.len();
        Ok(ModelSpec {
            dim,
            vessel,
            radii,
            weights,
            masses: vec![1.0; n],
            drift_scale,
            drifts,
        })
    }

    /// Direct form: drifts given, unit drift scale.
    pub fn with_drifts(dim: usize, vessel: Vessel, radii: Vec<f64>, drifts: Vec<f64>) -> Result<Self> {
        Self::new(dim, vessel, radii, drifts, 1.0)
    }

    /// `n` identical objects.
    pub fn uniform(dim: usize, vessel: Vessel, n: usize, radius: f64, drift: f64) -> Result<Self> {
        Self::with_drifts(dim, vessel, vec![radius; n], vec![drift; n])
    }

    pub fn with_masses(mut self, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != self.radii.len() {
            return Err(Error::DimensionMismatch {
                expected: self.radii.len(),
                got: masses.len(),
            });
        }
        all_positive("masses", &masses)?;
        self.masses = masses;
        Ok(self)
    }

    /// Same model with drifts rescaled to `lambda * weights`.
    pub fn with_drift_scale(&self, lambda: f64) -> Result<Self> {
        Self::new(
            self.dim,
            self.vessel.clone(),
            self.radii.clone(),
            self.weights.clone(),
            lambda,
        )?
        .with_masses(self.masses.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.radii.len()
    }

    pub fn vessel(&self) -> &Vessel {
        &self.vessel
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn radius(&self, k: usize) -> f64 {
        self.radii[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn drifts(&self) -> &[f64] {
        &self.drifts
    }

    pub fn drift(&self, k: usize) -> f64 {
        self.drifts[k]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn drift_scale(&self) -> f64 {
        self.drift_scale
    }

    /// `a_* = min_k a_k`.
    pub fn min_drift(&self) -> f64 {
        self.drifts.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest diameter.
    pub fn max_diameter(&self) -> f64 {
        2.0 * self.radii.iter().copied().fold(0.0, f64::max)
    }

    pub fn identical_radii(&self) -> bool {
        self.radii.iter().all(|r| *r == self.radii[0])
    }

    pub fn has_unit_masses(&self) -> bool {
        self.masses.iter().all(|m| *m == 1.0)
    }

    pub(crate) fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.n() {
            Err(Error::IndexOutOfRange {
                index: k,
                len: self.n(),
            })
        } else {
            Ok(())
        }
    }
}

/// Centres of all `N` objects, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    dim: usize,
    centers: Vec<f64>,
}

impl Configuration {
    pub fn new(dim: usize, centers: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::param("dim", format!("must be >= 2, got {dim}")));
        }
        if centers.is_empty() || centers.len() % dim != 0 {
            return Err(Error::param(
                "centers",
                format!("length {} is not a positive multiple of d = {dim}", centers.len()),
            ));
        }
        Ok(Configuration { dim, centers })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Self::new(dim, points.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    #[inline]
    pub fn center(&self, k: usize) -> &[f64] {
        &self.centers[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn center_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.centers[k * self.dim..(k + 1) * self.dim]
    }

    /// First coordinate of object `k`.
    #[inline]
    pub fn height(&self, k: usize) -> f64 {
        self.centers[k * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.centers
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.centers
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.centers.chunks_exact(self.dim).map(<[f64]>::to_vec).collect()
    }

    /// Linear interpolation `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &Configuration, t: f64) -> Configuration {
        let centers = self
            .centers
            .iter()
            .zip(&other.centers)
            .map(|(a, b)| a + t * (b - a))
            .collect();
        Configuration {
            dim: self.dim,
            centers,
        }
    }

    pub(crate) fn check_shape(&self, spec: &ModelSpec) -> Result<()> {
        if self.dim != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: self.dim,
            });
        }
        if self.len() != spec.n() {
            return Err(Error::param(
                "configuration",
                format!("has {} objects, model has {}", self.len(), spec.n()),
            ));
        }
        Ok(())
    }
}

/// JSON interchange form `{d, N, radii, centers}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigurationRecord {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub radii: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
}

impl ConfigurationRecord {
    pub fn new(radii: &[f64], cfg: &Configuration) -> Self {
        ConfigurationRecord {
            d: cfg.dim(),
            n: cfg.len(),
            radii: radii.to_vec(),
            centers: cfg.points(),
        }
    }

    pub fn to_configuration(&self) -> Result<Configuration> {
        if self.centers.len() != self.n || self.radii.len() != self.n {
            return Err(Error::param(
                "N",
                format!(
                    "N = {} but {} centers and {} radii",
                    self.n,
                    self.centers.len(),
                    self.radii.len()
                ),
            ));
        }
        let cfg = Configuration::from_points(&self.centers)?;
        if cfg.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: cfg.dim(),
            });
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Why a configuration is outside the configuration space, if it is.
pub fn validity_violation(spec: &ModelSpec, cfg: &Configuration) -> Result<Option<String>> {
    cfg.check_shape(spec)?;
    let vessel = spec.vessel();
    for k in 0..cfg.len() {
        if !vessel.contains_ball(cfg.center(k), spec.radius(k), 0.0) {
            return Ok(Some(format!("object {k} is not inside the vessel")));
        }
    }
    let n = cfg.len();
    if n <= 24 {
        for j in 0..n {
            for k in j + 1..n {
                if overlapping(cfg.center(j), cfg.center(k), spec.radius(j) + spec.radius(k)) {
                    return Ok(Some(format!("objects {j} and {k} overlap")));
                }
            }
        }
        return Ok(None);
    }
    let grid = NeighborGrid::build(cfg.dim(), cfg.as_flat(), spec.radii())?;
    for j in 0..n {
        let cj = cfg.center(j);
        let rj = spec.radius(j);
        let mut hit = None;
        grid.for_each_candidate(cj, rj, |k| {
            if k > j && hit.is_none() && overlapping(cj, cfg.center(k), rj + spec.radius(k)) {
                hit = Some(k);
            }
        });
        if let Some(k) = hit {
            return Ok(Some(format!("objects {j} and {k} overlap")));
        }
    }
    Ok(None)
}

/// Containment of every object and pairwise non-overlap.
pub fn is_valid(spec: &ModelSpec, cfg: &Configuration) -> Result<bool> {
    validity_violation(spec, cfg).map(|v| v.is_none())
}

pub(crate) fn require_valid(spec: &ModelSpec, cfg: &Configuration) -> Result<()> {
    match validity_violation(spec, cfg)? {
        None => Ok(()),
        Some(why) => Err(Error::InvalidConfiguration(why)),
    }
}

/// `sum_k weight_k * x^k_1`.
pub fn weighted_cm(spec: &ModelSpec, cfg: &Configuration) -> f64 {
    spec.weights()
        .iter()
        .enumerate()
        .map(|(k, w)| w * cfg.height(k))
        .sum()
}

/// Pairs `(j, k)` where the heavier object `j` (`weight_j > weight_k`) sits at
/// least `delta` above the lighter object `k`.
pub fn ordering_violations(
    spec: &ModelSpec,
    cfg: &Configuration,
    delta: f64,
) -> Result<Vec<(usize, usize)>> {
    if !(delta > 0.0) {
        return Err(Error::param("delta", format!("must be > 0, got {delta}")));
    }
    cfg.check_shape(spec)?;
    let w = spec.weights();
    let n = cfg.len();
    // Scan in height order so each heavy object only meets lighter objects
    // at least `delta` below it.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cfg.height(a).total_cmp(&cfg.height(b)).then(a.cmp(&b)));
    let mut out = Vec::new();
    let mut lower_end = 0;
    for (pos, &j) in order.iter().enumerate() {
        let hj = cfg.height(j);
        while lower_end < pos && cfg.height(order[lower_end]) <= hj - delta {
            lower_end += 1;
        }
        for &k in &order[..lower_end] {
            if w[j] > w[k] {
                out.push((j, k));
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// `max_k (x^k_1 + r_k)`, optionally over a subset of objects.
pub fn surface_height(spec: &ModelSpec, cfg: &Configuration, subset: Option<&[usize]>) -> f64 {
    let top = |k: usize| cfg.height(k) + spec.radius(k);
    match subset {
        Some(ids) => ids.iter().map(|&k| top(k)).fold(f64::NEG_INFINITY, f64::max),
        None => (0..cfg.len()).map(top).fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observables {
    pub wcm: f64,
    pub surface: f64,
    pub top_of_object: Vec<f64>,
    /// Object indices sorted by increasing height.
    pub depth_rank: Vec<usize>,
}

pub fn observables(spec: &ModelSpec, cfg: &Configuration) -> Observables {
    let top_of_object: Vec<f64> = (0..cfg.len()).map(|k| cfg.height(k) + spec.radius(k)).collect();
    let mut depth_rank: Vec<usize> = (0..cfg.len()).collect();
    depth_rank.sort_by(|&a, &b| cfg.height(a).total_cmp(&cfg.height(b)).then(a.cmp(&b)));
    Observables {
        wcm: weighted_cm(spec, cfg),
        surface: top_of_object.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        top_of_object,
        depth_rank,
    }
}

/// Euclidean distance between object centres.
pub fn center_distance(cfg: &Configuration, j: usize, k: usize) -> f64 {
    dist_sq(cfg.center(j), cfg.center(k)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cyl() -> Vessel {
        Vessel::half_cylinder(1.0).unwrap()
    }

    fn brute_valid(spec: &ModelSpec, cfg: &Configuration) -> bool {
        let n = cfg.len();
        (0..n).all(|k| spec.vessel().contains_ball(cfg.center(k), spec.radius(k), 0.0))
            && (0..n).all(|j| {
                (j + 1..n).all(|k| center_distance(cfg, j, k) >= spec.radius(j) + spec.radius(k))
            })
    }

    #[test]
    fn validity_examples() {
        let one = ModelSpec::uniform(2, cyl(), 1, 0.1, 1.0).unwrap();
        assert!(is_valid(&one, &Configuration::new(2, vec![0.5, 0.0]).unwrap()).unwrap());
        let two = ModelSpec::uniform(2, cyl(), 2, 0.1, 1.0).unwrap();
        let same = Configuration::new(2, vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        assert!(!is_valid(&two, &same).unwrap());
        let wrong_n = Configuration::new(2, vec![0.5, 0.0]).unwrap();
        assert!(is_valid(&two, &wrong_n).is_err());
    }

    #[test]
    fn grid_validity_matches_all_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(20..60);
            let r = rng.random_range(0.03..0.08);
            let spec = ModelSpec::uniform(2, cyl(), n, r, 1.0).unwrap();
            let centers: Vec<f64> = (0..n)
                .flat_map(|_| [rng.random_range(0.0..3.0), rng.random_range(-1.0..1.0)])
                .collect();
            let cfg = Configuration::new(2, centers).unwrap();
            assert_eq!(is_valid(&spec, &cfg).unwrap(), brute_valid(&spec, &cfg));
        }
    }

    #[test]
    fn wcm_examples() {
        let c = Configuration::new(2, vec![1.0, 0.0, 2.0, 0.0]).unwrap();
        let s = ModelSpec::new(2, cyl(), vec![0.1, 0.1], vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(weighted_cm(&s, &c), 3.0);
        let s = ModelSpec::new(2, cyl(), vec![0.1, 0.1], vec![2.0, 1.0], 1.0).unwrap();
        assert_eq!(weighted_cm(&s, &c), 4.0);
    }

    #[test]
    fn wcm_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 300;
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let s = ModelSpec::new(2, cyl(), vec![0.01; n], weights.clone(), 1.0).unwrap();
        let centers: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.0..5.0)).collect();
        let c = Configuration::new(2, centers.clone()).unwrap();
        let mut naive = 0.0;
        for k in 0..n {
            naive += weights[k] * centers[2 * k];
        }
        assert!((weighted_cm(&s, &c) - naive).abs() <= 1e-12 * naive.abs());
    }

    #[test]
    fn drift_is_scale_times_weight() {
        let s = ModelSpec::new(2, cyl(), vec![0.1, 0.1], vec![2.0, 0.5], 3.0).unwrap();
        assert_eq!(s.drifts(), &[6.0, 1.5]);
        assert_eq!(s.with_drift_scale(10.0).unwrap().drifts(), &[20.0, 5.0]);
        assert_eq!(s.min_drift(), 1.5);
        assert!((s.max_diameter() - 0.2).abs() < 1e-15);
        assert!(ModelSpec::new(2, cyl(), vec![0.1], vec![-1.0], 1.0).is_err());
        assert!(ModelSpec::new(2, cyl(), vec![0.1], vec![1.0], 0.0).is_err());
        assert!(s.clone().with_masses(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn ordering_examples() {
        let s = ModelSpec::new(2, cyl(), vec![0.1, 0.1], vec![1.0, 1.0], 1.0).unwrap();
        let c = Configuration::new(2, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(ordering_violations(&s, &c, 0.5).unwrap().is_empty());
        // Heavy object 0 above light object 1 by more than delta.
        let s = ModelSpec::new(2, cyl(), vec![0.1, 0.1], vec![2.0, 1.0], 1.0).unwrap();
        let c = Configuration::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(ordering_violations(&s, &c, 0.5).unwrap(), vec![(0, 1)]);
        // Heavy below light is the favoured arrangement.
        let c = Configuration::new(2, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(ordering_violations(&s, &c, 0.5).unwrap().is_empty());
        assert!(ordering_violations(&s, &c, 0.0).is_err());
    }

    #[test]
    fn ordering_matches_pair_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = 40;
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(1..4) as f64).collect();
            let s = ModelSpec::new(2, cyl(), vec![0.05; n], w.clone(), 1.0).unwrap();
            let c = Configuration::new(2, (0..2 * n).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap();
            let delta = rng.random_range(0.01..0.5);
            let mut scan = Vec::new();
            for j in 0..n {
                for k in 0..n {
                    if w[j] > w[k] && c.height(j) >= c.height(k) + delta {
                        scan.push((j, k));
                    }
                }
            }
            assert_eq!(ordering_violations(&s, &c, delta).unwrap(), scan);
        }
    }

    #[test]
    fn surface_examples() {
        let s = ModelSpec::new(2, cyl(), vec![0.5, 0.1, 0.1], vec![1.0; 3], 1.0).unwrap();
        let c = Configuration::new(2, vec![2.0, 0.0, 0.5, 0.5, 0.7, -0.5]).unwrap();
        assert!((surface_height(&s, &c, None) - 2.5).abs() < 1e-15);
        assert!((surface_height(&s, &c, Some(&[1, 2])) - 0.8).abs() < 1e-15);
        let obs = observables(&s, &c);
        assert_eq!(obs.depth_rank, vec![1, 2, 0]);
        assert_eq!(obs.surface, surface_height(&s, &c, None));
    }

    #[test]
    fn record_round_trip_and_validation() {
        let c = Configuration::new(2, vec![0.5, 0.0, 0.9, 0.2]).unwrap();
        let rec = ConfigurationRecord::new(&[0.1, 0.2], &c);
        let json = rec.to_json();
        assert_eq!(json, r#"{"d":2,"N":2,"radii":[0.1,0.2],"centers":[[0.5,0.0],[0.9,0.2]]}"#);
        let back = ConfigurationRecord::from_json(&json).unwrap();
        assert_eq!(back.to_configuration().unwrap(), c);
        assert!(ConfigurationRecord::from_json(r#"{"d":2,"N":1,"raddi":[0.1],"centers":[[0,0]]}"#).is_err());
    }

    proptest! {
        #[test]
        fn valid_under_relabelling_and_reflection(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 12;
            let spec = ModelSpec::uniform(2, cyl(), n, 0.12, 1.0).unwrap();
            let centers: Vec<f64> = (0..n)
                .flat_map(|_| [rng.random_range(0.0..1.5), rng.random_range(-1.0..1.0)])
                .collect();
            let cfg = Configuration::new(2, centers.clone()).unwrap();
            let base = is_valid(&spec, &cfg).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let permuted: Vec<f64> = perm.iter().flat_map(|&k| [centers[2 * k], centers[2 * k + 1]]).collect();
            prop_assert_eq!(is_valid(&spec, &Configuration::new(2, permuted).unwrap()).unwrap(), base);
            let mirrored: Vec<f64> = centers.chunks(2).flat_map(|c| [c[0], -c[1]]).collect();
            prop_assert_eq!(is_valid(&spec, &Configuration::new(2, mirrored).unwrap()).unwrap(), base);
        }
    }
}

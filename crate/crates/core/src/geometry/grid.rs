//! Uniform cell list over ball centres.
//!
//! Balls much larger than the typical radius are kept in a separate
//! "oversized" list that every query returns, so the cell size can follow the
//! small balls. For every indexed ball `cell_size >= 2 * radius`.

use crate::error::{Error, Result};

const NO_CELL: usize = usize::MAX;
const MAX_CELLS: usize = 1 << 22;
const MARGIN_CELLS: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct NeighborGrid {
    dim: usize,
    cell_size: f64,
    inv_cell: f64,
    origin_cells: Vec<i64>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    buckets: Vec<Vec<u32>>,
    cell_of: Vec<usize>,
    centers: Vec<f64>,
    radii: Vec<f64>,
    oversized: Vec<usize>,
    max_indexed_radius: f64,
}

impl NeighborGrid {
    /// Builds a grid from flat `centers` (row-major, `dim` per ball) and radii.
    pub fn build(dim: usize, centers: &[f64], radii: &[f64]) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::param("balls", "need at least one ball"));
        }
        if centers.len() != dim * radii.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * radii.len(),
                got: centers.len(),
            });
        }
        if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::param("radius", "all radii must be positive and finite"));
        }
        let mut sorted = radii.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let cutoff = 2.0 * median;
        let max_indexed_radius = radii
            .iter()
            .copied()
            .filter(|r| *r <= cutoff)
            .fold(0.0, f64::max);
        let oversized: Vec<usize> = (0..radii.len()).filter(|&i| radii[i] > cutoff).collect();

        let mut grid = NeighborGrid {
            dim,
            cell_size: 2.0 * max_indexed_radius,
            inv_cell: 0.0,
            origin_cells: vec![0; dim],
            shape: vec![1; dim],
            strides: vec![1; dim],
            buckets: Vec::new(),
            cell_of: vec![NO_CELL; radii.len()],
            centers: centers.to_vec(),
            radii: radii.to_vec(),
            oversized,
            max_indexed_radius,
        };
        grid.rebuild();
        Ok(grid)
    }

    fn rebuild(&mut self) {
        let d = self.dim;
        let n = self.radii.len();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for c in self.centers.chunks_exact(d) {
            for i in 0..d {
                lo[i] = lo[i].min(c[i]);
                hi[i] = hi[i].max(c[i]);
            }
        }
        let mut cell = 2.0 * self.max_indexed_radius;
        loop {
            let total: f64 = (0..d)
                .map(|i| ((hi[i] - lo[i]) / cell + 2.0 * MARGIN_CELLS + 2.0).ceil())
                .product();
            if total <= MAX_CELLS as f64 {
                break;
            }
            cell *= 2.0;
        }
        self.cell_size = cell;
        self.inv_cell = 1.0 / cell;
        let mut total = 1usize;
        for i in 0..d {
            self.origin_cells[i] = (lo[i] * self.inv_cell).floor() as i64 - MARGIN_CELLS as i64;
            let top = (hi[i] * self.inv_cell).floor() as i64 + MARGIN_CELLS as i64;
            self.shape[i] = (top - self.origin_cells[i] + 1) as usize;
            self.strides[i] = total;
            total *= self.shape[i];
        }
        self.buckets.clear();
        self.buckets.resize(total, Vec::new());
        for k in 0..n {
            self.cell_of[k] = NO_CELL;
        }
        let mut is_oversized = vec![false; n];
        for &k in &self.oversized {
            is_oversized[k] = true;
        }
        for k in 0..n {
            if is_oversized[k] {
                continue;
            }
            let cell = self.cell_index(&self.centers[k * d..(k + 1) * d]).expect("inside fresh bounds");
            self.buckets[cell].push(k as u32);
            self.cell_of[k] = cell;
        }
    }

    #[inline]
    fn cell_coord(&self, x: f64, axis: usize) -> isize {
        ((x * self.inv_cell).floor() as i64 - self.origin_cells[axis]) as isize
    }

    fn cell_index(&self, c: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for i in 0..self.dim {
            let q = self.cell_coord(c[i], i);
            if q < 0 || q as usize >= self.shape[i] {
                return None;
            }
            idx += q as usize * self.strides[i];
        }
        Some(idx)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn max_indexed_radius(&self) -> f64 {
        self.max_indexed_radius
    }

    pub fn center(&self, k: usize) -> &[f64] {
        &self.centers[k * self.dim..(k + 1) * self.dim]
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn oversized(&self) -> &[usize] {
        &self.oversized
    }

    /// Cell that currently holds ball `k`, or `None` for oversized balls.
    pub fn bucket_of(&self, k: usize) -> Option<usize> {
        self.cell_of.get(k).copied().filter(|c| *c != NO_CELL)
    }

    pub fn bucket(&self, cell: usize) -> &[u32] {
        &self.buckets[cell]
    }

    pub fn occupied_cells(&self) -> usize {
        self.buckets.iter().filter(|b| !b.is_empty()).count()
    }

    /// Calls `f` with every ball index that could intersect the ball of
    /// `radius` about `center`. May include false positives and the query
    /// ball itself.
    #[inline]
    pub fn for_each_candidate(&self, center: &[f64], radius: f64, mut f: impl FnMut(usize)) {
        let reach = radius + self.max_indexed_radius;
        if self.dim == 2 {
            let (x0, x1) = self.axis_range(center[0] - reach, center[0] + reach, 0);
            let (y0, y1) = self.axis_range(center[1] - reach, center[1] + reach, 1);
            for y in y0..y1 {
                let row = y * self.strides[1];
                for x in x0..x1 {
                    for &j in &self.buckets[row + x] {
                        f(j as usize);
                    }
                }
            }
        } else {
            let ranges: Vec<(usize, usize)> = (0..self.dim)
                .map(|i| self.axis_range(center[i] - reach, center[i] + reach, i))
                .collect();
            if ranges.iter().any(|(a, b)| a >= b) {
                for &j in &self.oversized {
                    f(j);
                }
                return;
            }
            let mut q: Vec<usize> = ranges.iter().map(|r| r.0).collect();
            'outer: loop {
                let idx: usize = q.iter().zip(&self.strides).map(|(a, s)| a * s).sum();
                for &j in &self.buckets[idx] {
                    f(j as usize);
                }
                for i in 0..self.dim {
                    q[i] += 1;
                    if q[i] < ranges[i].1 {
                        continue 'outer;
                    }
                    q[i] = ranges[i].0;
                }
                break;
            }
        }
        for &j in &self.oversized {
            f(j);
        }
    }

    #[inline]
    fn axis_range(&self, lo: f64, hi: f64, axis: usize) -> (usize, usize) {
        let a = self.cell_coord(lo, axis).max(0) as usize;
        let b = (self.cell_coord(hi, axis) + 1).max(0) as usize;
        (a.min(self.shape[axis]), b.min(self.shape[axis]))
    }

    /// Candidate indices for a query ball, sorted and deduplicated.
    pub fn query(&self, center: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_candidate(center, radius, |j| out.push(j));
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Moves ball `k` to `new_center`, re-bucketing it if it changed cells.
    pub fn move_to(&mut self, k: usize, new_center: &[f64]) -> Result<()> {
        if k >= self.radii.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.radii.len(),
            });
        }
        if new_center.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: new_center.len(),
            });
        }
        self.move_unchecked(k, new_center);
        Ok(())
    }

    #[inline]
    pub(crate) fn move_unchecked(&mut self, k: usize, new_center: &[f64]) {
        let d = self.dim;
        self.centers[k * d..(k + 1) * d].copy_from_slice(new_center);
        let old = self.cell_of[k];
        if old == NO_CELL {
            return; // oversized
        }
        match self.cell_index(new_center) {
            Some(cell) if cell == old => {}
            Some(cell) => {
                let bucket = &mut self.buckets[old];
                let pos = bucket.iter().position(|&j| j as usize == k).expect("member in its bucket");
                bucket.swap_remove(pos);
                self.buckets[cell].push(k as u32);
                self.cell_of[k] = cell;
            }
            None => self.rebuild(),
        }
    }

    /// Bucket contents keyed by absolute cell coordinates, for comparing grids.
    pub fn membership(&self) -> Vec<(Vec<i64>, Vec<usize>)> {
        let mut out: Vec<(Vec<i64>, Vec<usize>)> = Vec::new();
        for (idx, bucket) in self.buckets.iter().enumerate() {
            if bucket.is_empty() {
                continue;
            }
            let key: Vec<i64> = (0..self.dim)
                .map(|i| ((idx / self.strides[i]) % self.shape[i]) as i64 + self.origin_cells[i])
                .collect();
            let mut members: Vec<usize> = bucket.iter().map(|&j| j as usize).collect();
            members.sort_unstable();
            out.push((key, members));
        }
        out.sort();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_ball_occupies_one_cell() {
        let g = NeighborGrid::build(2, &[0.5, 0.0], &[0.1]).unwrap();
        assert_eq!(g.occupied_cells(), 1);
        assert_eq!(g.query(&[0.5, 0.0], 0.1), vec![0]);
    }

    #[test]
    fn far_balls_are_not_candidates() {
        let g = NeighborGrid::build(2, &[0.0, 0.0, 2.0, 0.0], &[0.1, 0.1]).unwrap();
        assert!(g.cell_size() >= 0.2);
        assert_eq!(g.query(&[0.0, 0.0], 0.1), vec![0]);
    }

    #[test]
    fn move_within_and_across_cells() {
        let mut g = NeighborGrid::build(2, &[0.05, 0.05, 1.0, 1.0], &[0.1, 0.1]).unwrap();
        let before = g.bucket_of(0).unwrap();
        g.move_to(0, &[0.06, 0.06]).unwrap();
        assert_eq!(g.bucket_of(0), Some(before));
        g.move_to(0, &[0.55, 0.05]).unwrap();
        let after = g.bucket_of(0).unwrap();
        assert_ne!(after, before);
        assert!(!g.bucket(before).contains(&0));
        assert!(g.bucket(after).contains(&0));
    }

    #[test]
    fn stale_index_is_an_error() {
        let mut g = NeighborGrid::build(2, &[0.0, 0.0], &[0.1]).unwrap();
        assert!(matches!(g.move_to(3, &[0.0, 0.0]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn moving_far_outside_triggers_regrow() {
        let mut g = NeighborGrid::build(2, &[0.0, 0.0, 0.3, 0.0], &[0.1, 0.1]).unwrap();
        g.move_to(1, &[100.0, 0.0]).unwrap();
        assert_eq!(g.query(&[100.0, 0.0], 0.1), vec![1]);
        assert_eq!(g.query(&[0.0, 0.0], 0.1), vec![0]);
    }

    #[test]
    fn big_ball_is_kept_out_of_the_cells() {
        let mut centers = vec![0.5, 0.0];
        let mut radii = vec![0.5];
        for i in 0..10 {
            centers.extend([1.2 + 0.12 * i as f64, 0.0]);
            radii.push(0.06);
        }
        let g = NeighborGrid::build(2, &centers, &radii).unwrap();
        assert_eq!(g.oversized(), &[0]);
        assert!((g.cell_size() - 0.12).abs() < 1e-12);
        assert!(g.query(&[5.0, 0.0], 0.06).contains(&0));
    }
}

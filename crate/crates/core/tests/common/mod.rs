//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

/// Two discs of radius `r` in a planar half cylinder of half-width `w`:
/// the lateral measure of admissible placements at heights `h1`, `h2`.
pub fn lateral_measure(r: f64, w: f64, h1: f64, h2: f64) -> f64 {
    let l = 2.0 * (w - r);
    let dh = h1 - h2;
    let s = (4.0 * r * r - dh * dh).max(0.0).sqrt();
    (l - s).max(0.0).powi(2)
}

/// Joint height density of two discs, unnormalised.
pub fn two_disc_density(r: f64, w: f64, a: [f64; 2], h1: f64, h2: f64) -> f64 {
    if h1 < r || h2 < r {
        return 0.0;
    }
    (-2.0 * (a[0] * h1 + a[1] * h2)).exp() * lateral_measure(r, w, h1, h2)
}

/// Midpoint rule over `[lo1, hi1] x [lo2, hi2]` with `m` cells per side.
pub fn integrate2(f: impl Fn(f64, f64) -> f64, lo1: f64, hi1: f64, lo2: f64, hi2: f64, m: usize) -> f64 {
    let (d1, d2) = ((hi1 - lo1) / m as f64, (hi2 - lo2) / m as f64);
    let mut s = 0.0;
    for i in 0..m {
        let x = lo1 + (i as f64 + 0.5) * d1;
        for j in 0..m {
            s += f(x, lo2 + (j as f64 + 0.5) * d2);
        }
    }
    s * d1 * d2
}

/// Normalising constant of [`two_disc_density`], integrated to `r + span`.
pub fn two_disc_mass(r: f64, w: f64, a: [f64; 2], span: f64, m: usize) -> f64 {
    integrate2(|x, y| two_disc_density(r, w, a, x, y), r, r + span, r, r + span, m)
}

/// Lowest sum of heights of `n` discs of radius `r` in a planar half
/// cylinder of half-width `w`, by greedy lowest placement that branches over
/// the `branch` lowest candidate positions at every step.
pub fn greedy_c1(n: usize, r: f64, w: f64, branch: usize) -> f64 {
    let mut best = f64::INFINITY;
    let mut placed = Vec::new();
    dfs(n, r, w, branch, &mut placed, 0.0, &mut best);
    best
}

fn admissible(p: [f64; 2], placed: &[[f64; 2]], r: f64, w: f64) -> bool {
    let tol = 1e-9;
    p[0] >= r - tol
        && p[1].abs() <= w - r + tol
        && placed
            .iter()
            .all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= 2.0 * r - tol)
}

fn candidates(placed: &[[f64; 2]], r: f64, w: f64) -> Vec<[f64; 2]> {
    let d = 2.0 * r;
    let edge = w - r;
    let mut out = vec![[r, -edge], [r, edge]];
    for q in placed {
        // On the floor beside q.
        let dh = r - q[0];
        if dh.abs() <= d {
            let s = (d * d - dh * dh).sqrt();
            out.push([r, q[1] - s]);
            out.push([r, q[1] + s]);
        }
        // Against a wall, above q.
        for y in [-edge, edge] {
            let dy = y - q[1];
            if dy.abs() <= d {
                out.push([q[0] + (d * d - dy * dy).sqrt(), y]);
            }
        }
    }
    // Resting on two discs.
    for (i, p) in placed.iter().enumerate() {
        for q in &placed[i + 1..] {
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            let l = dx.hypot(dy);
            if l == 0.0 || l > 2.0 * d {
                continue;
            }
            let h = (d * d - l * l / 4.0).max(0.0).sqrt();
            let (mx, my) = (p[0] + dx / 2.0, p[1] + dy / 2.0);
            out.push([mx + h * dy / l, my - h * dx / l]);
            out.push([mx - h * dy / l, my + h * dx / l]);
        }
    }
    out
}

fn dfs(n: usize, r: f64, w: f64, branch: usize, placed: &mut Vec<[f64; 2]>, sum: f64, best: &mut f64) {
    if placed.len() == n {
        *best = best.min(sum);
        return;
    }
    let mut c: Vec<[f64; 2]> = candidates(placed, r, w)
        .into_iter()
        .filter(|p| admissible(*p, placed, r, w))
        .collect();
    c.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    c.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
    for p in c.into_iter().take(branch) {
        placed.push(p);
        dfs(n, r, w, branch, placed, sum + p[0], best);
        placed.pop();
    }
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

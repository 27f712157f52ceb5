//! Integrability check for a vessel: the cross-section `D_b` at height `b`
//! must grow slower than `exp(2 a b)` for some `a` below the smallest drift.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ball_volume, GraphDomain, Vessel};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VesselCheckOptions {
    pub b_max: f64,
    /// Number of heights tabulated between the scan start and `b_max`.
    pub b_steps: usize,
    /// Lateral cells per axis used to measure graph-domain sections.
    pub lateral_cells: usize,
    /// The product must end below this at `b_max`.
    pub tolerance: f64,
    /// Dimension for the half cylinder (graph domains carry their own).
    pub dim: usize,
}

impl VesselCheckOptions {
    pub fn new(b_max: f64) -> Self {
        VesselCheckOptions {
            b_max,
            b_steps: 200,
            lateral_cells: 4096,
            tolerance: 1e-8,
            dim: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VesselCheckRow {
    pub b: f64,
    pub measure: f64,
    pub product: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VesselCheck {
    /// Some scanned height has an empty section below every non-empty one.
    pub b0_found: bool,
    pub b0: Option<f64>,
    pub condition_holds: bool,
    pub table: Vec<VesselCheckRow>,
}

/// `(d-1)`-measure of `{y in box : g(y) < b}`. In the plane the boundary of
/// every grid cell where the indicator flips is located by bisection.
fn graph_section(gd: &GraphDomain, b: f64, cells: usize) -> f64 {
    let lo = gd.lateral_lo();
    let hi = gd.lateral_hi();
    if lo.len() == 1 {
        let (a, c) = (lo[0], hi[0]);
        let h = (c - a) / cells as f64;
        let inside = |y: f64| gd.eval(&[y]) < b;
        let mut total = 0.0;
        let mut prev_y = a;
        let mut prev_in = inside(a);
        for i in 1..=cells {
            let y = a + h * i as f64;
            let now_in = inside(y);
            if now_in == prev_in {
                if now_in {
                    total += y - prev_y;
                }
            } else {
                let (mut l, mut r) = (prev_y, y);
                for _ in 0..60 {
                    let m = 0.5 * (l + r);
                    if inside(m) == prev_in {
                        l = m;
                    } else {
                        r = m;
                    }
                }
                total += if prev_in { l - prev_y } else { y - l };
            }
            prev_y = y;
            prev_in = now_in;
        }
        return total;
    }
    // Midpoint counting on a tensor grid.
    let dims = lo.len();
    let per = cells.max(1);
    let widths: Vec<f64> = (0..dims).map(|i| (hi[i] - lo[i]) / per as f64).collect();
    let cell_vol: f64 = widths.iter().product();
    let mut idx = vec![0usize; dims];
    let mut y = vec![0.0; dims];
    let mut count = 0usize;
    loop {
        for i in 0..dims {
            y[i] = lo[i] + (idx[i] as f64 + 0.5) * widths[i];
        }
        if gd.eval(&y) < b {
            count += 1;
        }
        let mut i = 0;
        loop {
            if i == dims {
                return count as f64 * cell_vol;
            }
            idx[i] += 1;
            if idx[i] < per {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

fn section(vessel: &Vessel, dim: usize, b: f64, cells: usize) -> f64 {
    match vessel {
        Vessel::HalfCylinder { half_width } => {
            if b > 0.0 {
                ball_volume(dim - 1, *half_width)
            } else {
                0.0
            }
        }
        Vessel::Graph(gd) => graph_section(gd, b, cells),
    }
}

/// Tabulates `|D_b|` and `|D_b| exp(-2 a b)` up to `b_max`.
///
/// The condition holds when the product is non-increasing over the last
/// quarter of the heights with a non-empty section and below `tolerance` at `b_max`. A product that is
/// decreasing but still above tolerance at `b_max` is reported as an error,
/// since the table cannot tell decay from growth there.
pub fn check_vessel(vessel: &Vessel, a: f64, opts: &VesselCheckOptions) -> Result<VesselCheck> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::param("a", format!("must be > 0, got {a}")));
    }
    if opts.b_steps < 8 || opts.lateral_cells == 0 {
        return Err(Error::param("grid", "need at least 8 heights and one lateral cell"));
    }
    let dim = match vessel {
        Vessel::HalfCylinder { .. } => opts.dim,
        Vessel::Graph(gd) => gd.dim(),
    };
    if dim < 2 {
        return Err(Error::param("dim", "must be >= 2"));
    }
    // Start the scan a little below the lowest boundary point we can see.
    let floor = match vessel {
        Vessel::HalfCylinder { .. } => 0.0,
        Vessel::Graph(gd) => {
            let lo = gd.lateral_lo();
            let hi = gd.lateral_hi();
            let mut m = f64::INFINITY;
            let mut y = lo.to_vec();
            for i in 0..=opts.lateral_cells {
                let t = i as f64 / opts.lateral_cells as f64;
                for (k, v) in y.iter_mut().enumerate() {
                    *v = lo[k] + t * (hi[k] - lo[k]);
                }
                m = m.min(gd.eval(&y));
            }
            m
        }
    };
    let b_start = floor - 1.0;
    if !(opts.b_max > b_start + 1.0) {
        return Err(Error::param("b_max", format!("must exceed {}", b_start + 1.0)));
    }
    let step = (opts.b_max - b_start) / opts.b_steps as f64;
    let table: Vec<VesselCheckRow> = (0..=opts.b_steps)
        .map(|i| {
            let b = b_start + step * i as f64;
            let measure = section(vessel, dim, b, opts.lateral_cells);
            VesselCheckRow {
                b,
                measure,
                product: measure * (-2.0 * a * b).exp(),
            }
        })
        .collect();

    let first_nonempty = table.iter().position(|r| r.measure > 0.0);
    let b0_found = matches!(first_nonempty, Some(i) if i > 0);
    let b0 = first_nonempty.filter(|&i| i > 0).map(|i| table[i - 1].b);

    // Judge decay on the last quarter of the non-empty part of the scan.
    let start = first_nonempty.unwrap_or(0);
    let tail = &table[start + (table.len() - start) * 3 / 4..];
    let decreasing = tail.windows(2).all(|w| w[1].product <= w[0].product);
    let last = table.last().expect("non-empty table").product;
    if decreasing && last >= opts.tolerance && last > 0.0 {
        return Err(Error::DecayNotObserved {
            b_max: opts.b_max,
            product: last,
            tolerance: opts.tolerance,
        });
    }
    Ok(VesselCheck {
        b0_found,
        b0,
        condition_holds: decreasing && last < opts.tolerance,
        table,
    })
}

use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 100;

/// Window constant of the automatic windowing rule: the sum stops at the
/// first lag `M` with `M >= WINDOW_C * (2 tau(M) + 1)`.
const WINDOW_C: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    pub samples: usize,
    /// `sum_{t >= 1} rho_t`, truncated at the automatic window. Zero for
    /// independent draws.
    pub tau: f64,
    /// `samples / (2 tau + 1)`.
    pub ess: f64,
    pub window: usize,
    pub converged: bool,
    pub acceptance_rate: Option<f64>,
}

/// Integrated autocorrelation time and effective sample size of a scalar
/// series.
///
/// A constant series has no defined autocorrelation; it is reported with
/// `tau = inf`, `ess = 0` and `converged = false`, as is any series whose
/// window would exceed a quarter of its length.
pub fn diagnostics(series: &[f64], acceptance_rate: Option<f64>) -> Result<ChainDiagnostics> {
    let n = series.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let scale = mean.abs().max(1.0);
    if !(c0 > (1e-14 * scale).powi(2)) {
        return Ok(ChainDiagnostics {
            samples: n,
            tau: f64::INFINITY,
            ess: 0.0,
            window: 0,
            converged: false,
            acceptance_rate,
        });
    }
    let max_lag = n / 4;
    let mut tau = 0.0;
    let mut window = max_lag;
    let mut converged = false;
    for lag in 1..=max_lag {
        let c: f64 = centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        tau += c / c0;
        if lag as f64 >= WINDOW_C * (2.0 * tau + 1.0) {
            window = lag;
            converged = true;
            break;
        }
    }
    let ess = if 2.0 * tau + 1.0 > 0.0 {
        n as f64 / (2.0 * tau + 1.0)
    } else {
        n as f64
    };
    Ok(ChainDiagnostics {
        samples: n,
        tau,
        ess,
        window,
        converged,
        acceptance_rate,
    })
}

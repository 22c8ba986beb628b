//! Power-law fits of relative-error curves: `delta_e = a * n^(-b)` via
//! linear least squares in log-log space.

use crate::{BenchError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    /// RMS residual of the log-space fit.
    pub residual: f64,
    pub points: usize,
    /// Points dropped for non-positive `n` or `delta_e`.
    pub rejected: usize,
}

/// Fit `(n, delta_e)` points. Non-positive values are rejected (with a
/// count in the result); fewer than 3 surviving points is an error. `b` is
/// positive for decaying data by the `a * n^(-b)` convention.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    let mut rejected = 0usize;
    for &(n, de) in points {
        if n > 0.0 && de > 0.0 && n.is_finite() && de.is_finite() {
            xs.push(n.ln());
            ys.push(de.ln());
        } else {
            rejected += 1;
        }
    }
    let m = xs.len();
    if m < 3 {
        return Err(BenchError::Fit(format!(
            "need at least 3 usable points, have {m} ({rejected} rejected)"
        )));
    }
    let mf = m as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let denom = mf * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(BenchError::Fit("degenerate abscissae".into()));
    }
    let slope = (mf * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / mf;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum::<f64>()
        / mf)
        .sqrt();
    Ok(FitResult {
        a: intercept.exp(),
        b: -slope,
        residual,
        points: m,
        rejected,
    })
}

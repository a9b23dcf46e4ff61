//! Small least-squares helpers shared by the diagnostics: linear fits,
//! log-linear (exponential) fits and log-log (power-law) fits.

use crate::error::{Error, Result};

/// Ordinary least squares y ≈ a·x + b. Returns (a, b).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::FitFailure(format!(
            "need ≥2 paired samples, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(Error::FitFailure("degenerate abscissae".into()));
    }
    let a = (n * sxy - sx * sy) / det;
    let b = (sy - a * sx) / n;
    Ok((a, b))
}

/// Fit y ≈ C·e^{−D·x} through log-linear least squares on positive samples.
/// Returns (C, D).
pub fn exponential_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let mut fx = Vec::with_capacity(xs.len());
    let mut fy = Vec::with_capacity(ys.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if y > 0.0 && y.is_finite() {
            fx.push(x);
            fy.push(y.ln());
        }
    }
    let (a, b) = linear_fit(&fx, &fy)?;
    Ok((b.exp(), -a))
}

/// Fit y ≈ C·x^α through log-log least squares. Returns (C, α).
pub fn powerlaw_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let mut fx = Vec::with_capacity(xs.len());
    let mut fy = Vec::with_capacity(ys.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
            fx.push(x.ln());
            fy.push(y.ln());
        }
    }
    let (a, b) = linear_fit(&fx, &fy)?;
    Ok((b.exp(), a))
}

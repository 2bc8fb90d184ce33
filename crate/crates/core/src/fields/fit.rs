use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Smallest and largest abscissa that entered the fit.
    pub window: (f64, f64),
    pub npoints: usize,
    /// Standard error of the slope.
    pub stderr: f64,
}

impl ScalingFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.exponent * x.ln()).exp()
    }
}

/// Fits `y ≈ A x^α` over the points whose abscissa lies in `window`
/// (inclusive, all points when `None`).
pub fn fit_power_law(x: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<ScalingFit> {
    if x.len() != y.len() {
        return Err(Error::param(format!("{} abscissae but {} ordinates", x.len(), y.len())));
    }
    let mut pts = Vec::with_capacity(x.len());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&xi, &yi) in x.iter().zip(y) {
        if let Some((wlo, whi)) = window {
            if xi < wlo * (1.0 - 1e-12) || xi > whi * (1.0 + 1e-12) {
                continue;
            }
        }
        if !(xi > 0.0) || !(yi > 0.0) || !xi.is_finite() || !yi.is_finite() {
            return Err(Error::Degenerate(format!("nonpositive or non-finite point ({xi}, {yi})")));
        }
        lo = lo.min(xi);
        hi = hi.max(xi);
        pts.push((xi.ln(), yi.ln()));
    }
    if pts.len() < 3 {
        return Err(Error::Degenerate(format!("{} points in window, at least 3 required", pts.len())));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let stderr = if pts.len() > 2 { (sse / (m - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(ScalingFit { exponent: slope, intercept, r2, window: (lo, hi), npoints: pts.len(), stderr })
}

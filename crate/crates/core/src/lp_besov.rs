//! Discrete Littlewood–Paley decomposition and `B^α_{p,∞}` norms.
//!
//! With `S` the quintic smoothstep and `χ(r) = 1 − S(log₂ r)` (so `χ = 1` on
//! `r ≤ 1` and `χ = 0` on `r ≥ 2`), the low-pass multiplier is `ψ̂ = χ` and
//! band `k` is `φ̂_k(ξ) = χ(2^{−k}ξ) − χ(2^{−k+1}ξ)`. The top band `K` takes
//! the remainder `1 − χ(2^{−K+1}ξ)`, so the family telescopes to an exact
//! partition of unity on the whole frequency lattice. Frequencies are
//! measured in lattice units, so a mode `cos(2^j x)` lies entirely in band
//! `j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{fit_power_law, lp_norm, PeriodicGrid, ScalingFit, SpaceTimeField, Spectral, C64};

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (s * (6.0 * s - 15.0) + 10.0)
}

/// Radial cutoff, `1` on `[0, 1]` and `0` on `[2, ∞)`.
pub fn chi(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        1.0 - smoothstep(r.log2())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicFamily {
    pub d: usize,
    pub n: usize,
    pub bands: usize,
}

impl DyadicFamily {
    /// Band `0` is the low-pass `ψ̂`, bands `1..=K` the annuli.
    pub fn multiplier(&self, k: usize, r: f64) -> f64 {
        let kk = self.bands;
        match k {
            0 => chi(r),
            k if k < kk => chi(r / 2f64.powi(k as i32)) - chi(r / 2f64.powi(k as i32 - 1)),
            k if k == kk => 1.0 - chi(r / 2f64.powi(k as i32 - 1)),
            _ => 0.0,
        }
    }

    fn check_band(&self, k: usize) -> Result<()> {
        if k > self.bands {
            return Err(Error::OutOfRange(format!("band {k} outside 0..={}", self.bands)));
        }
        Ok(())
    }

    fn check_grid(&self, g: &PeriodicGrid) -> Result<()> {
        if g.d != self.d || g.n != self.n {
            return Err(Error::GridMismatch(format!(
                "family built for d = {}, n = {}; field has d = {}, n = {}",
                self.d, self.n, g.d, g.n
            )));
        }
        Ok(())
    }
}

/// `K = log₂(n/2) − 1` bands on the spatial lattice of `grid`.
pub fn build_dyadic_family(grid: &PeriodicGrid) -> Result<DyadicFamily> {
    if grid.n < 16 {
        return Err(Error::InvalidGrid(format!("n = {} too small for two dyadic bands", grid.n)));
    }
    let bands = (grid.n / 2).trailing_zeros() as usize - 1;
    Ok(DyadicFamily { d: grid.d, n: grid.n, bands })
}

fn filter_slice(sp: &Spectral, fam: &DyadicFamily, s: &[C64], k: usize) -> Vec<f64> {
    let mut out = s.to_vec();
    for (idx, v) in out.iter_mut().enumerate() {
        *v *= fam.multiplier(k, sp.kmag_lattice(idx));
    }
    sp.inverse(out)
}

/// Spatial band projection `f ∗ φ_k` (`f ∗ ψ` for `k = 0`), frame by frame.
pub fn band_project(f: &SpaceTimeField, fam: &DyadicFamily, k: usize) -> Result<SpaceTimeField> {
    fam.check_band(k)?;
    fam.check_grid(f.grid())?;
    let sp = Spectral::for_grid(f.grid());
    let mut data = Vec::with_capacity(f.data().len());
    for it in 0..f.nt() {
        for c in 0..f.components() {
            data.extend(filter_slice(&sp, fam, &sp.forward(f.component(it, c)), k));
        }
    }
    SpaceTimeField::new(*f.grid(), f.components(), data, f.meta.clone())
}

/// How band norms are aggregated over a movie.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BesovMode {
    /// `L^p` in time of the per-frame spatial band norms.
    PerSlice,
    /// Bands on the joint space-time lattice; needs `nt = n` and `d ≤ 2`.
    SpaceTime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovEstimate {
    pub p: f64,
    pub alpha: f64,
    pub lowpass: f64,
    pub bands: Vec<f64>,
    pub norm: f64,
    pub sigma_fit: Option<ScalingFit>,
}

impl BesovEstimate {
    /// Band index attaining `max_k 2^{kα}‖f∗φ_k‖_p`.
    pub fn argmax_band(&self) -> Option<usize> {
        self.bands
            .iter()
            .enumerate()
            .map(|(i, b)| (i + 1, 2f64.powf((i + 1) as f64 * self.alpha) * b))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "p": json_p(self.p),
            "alpha": self.alpha,
            "lowpass": self.lowpass,
            "bands": self.bands,
            "norm": self.norm,
            "sigma_fit": self.sigma_fit.map(|f| serde_json::json!({
                "slope": f.exponent,
                "r2": f.r2,
                "window": [f.window.0, f.window.1],
            })),
        })
    }
}

pub(crate) fn json_p(p: f64) -> serde_json::Value {
    if p.is_infinite() {
        serde_json::Value::String("inf".into())
    } else {
        serde_json::json!(p)
    }
}

/// Pointwise Euclidean magnitude over components.
fn magnitude(comps: &[Vec<f64>]) -> Vec<f64> {
    (0..comps[0].len())
        .map(|i| comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
        .collect()
}

/// `‖f ∗ φ_k‖_p` for `k = 0..=K` (index 0 is the low-pass term).
pub fn band_norms(f: &SpaceTimeField, p: f64, fam: &DyadicFamily, mode: BesovMode) -> Result<Vec<f64>> {
    if !(p >= 1.0) {
        return Err(Error::param(format!("p = {p} must be at least 1")));
    }
    fam.check_grid(f.grid())?;
    if f.data().is_empty() {
        return Err(Error::InvalidField("empty field".into()));
    }
    match mode {
        BesovMode::PerSlice => {
            let sp = Spectral::for_grid(f.grid());
            let mut per_band: Vec<Vec<f64>> = vec![Vec::with_capacity(f.nt()); fam.bands + 1];
            for it in 0..f.nt() {
                let specs: Vec<Vec<C64>> = (0..f.components()).map(|c| sp.forward(f.component(it, c))).collect();
                for (k, acc) in per_band.iter_mut().enumerate() {
                    let comps: Vec<Vec<f64>> = specs.iter().map(|s| filter_slice(&sp, fam, s, k)).collect();
                    acc.push(lp_norm(&magnitude(&comps), p));
                }
            }
            Ok(per_band.iter().map(|v| lp_norm(v, p)).collect())
        }
        BesovMode::SpaceTime => space_time_band_norms(f, p, fam),
    }
}

fn space_time_band_norms(f: &SpaceTimeField, p: f64, fam: &DyadicFamily) -> Result<Vec<f64>> {
    let g = f.grid();
    if g.nt != g.n || g.d > 2 {
        return Err(Error::param("space-time bands need nt = n and d ≤ 2"));
    }
    let sp = Spectral::for_shape(g.d + 1, g.n, g.length);
    // Time frequencies `2πk/(nt·dt)` expressed in spatial lattice units.
    let tscale = g.length / (g.nt as f64 * g.dt);
    let radius: Vec<f64> = (0..sp.len())
        .map(|idx| {
            let k = sp.k(idx);
            let kt = k[0] as f64 * tscale;
            let ks: f64 = (1..=g.d).map(|a| (k[a] as f64).powi(2)).sum();
            (kt * kt + ks).sqrt()
        })
        .collect();
    let specs: Vec<Vec<C64>> = (0..f.components())
        .map(|c| {
            let stacked: Vec<f64> = (0..g.nt).flat_map(|it| f.component(it, c).iter().copied()).collect();
            sp.forward(&stacked)
        })
        .collect();
    let mut out = Vec::with_capacity(fam.bands + 1);
    for k in 0..=fam.bands {
        let comps: Vec<Vec<f64>> = specs
            .iter()
            .map(|s| {
                let filtered: Vec<C64> = s.iter().zip(&radius).map(|(v, &r)| v * fam.multiplier(k, r)).collect();
                sp.inverse(filtered)
            })
            .collect();
        out.push(lp_norm(&magnitude(&comps), p));
    }
    Ok(out)
}

/// `‖f‖_{B^α_{p,∞}} = ‖f∗ψ‖_p + max_k 2^{kα}‖f∗φ_k‖_p` with unit-measure norms.
pub fn besov_norm(f: &SpaceTimeField, alpha: f64, p: f64, fam: &DyadicFamily, mode: BesovMode) -> Result<BesovEstimate> {
    let norms = band_norms(f, p, fam, mode)?;
    let lowpass = norms[0];
    let bands = norms[1..].to_vec();
    let top = bands
        .iter()
        .enumerate()
        .map(|(i, b)| 2f64.powf((i + 1) as f64 * alpha) * b)
        .fold(0.0, f64::max);
    let sigma_fit = fit_bands(&bands, default_window(fam)).ok();
    Ok(BesovEstimate { p, alpha, lowpass, bands, norm: lowpass + top, sigma_fit })
}

/// Band window `[2, K−1]`, away from the low-pass and the remainder band.
pub fn default_window(fam: &DyadicFamily) -> (usize, usize) {
    (2.min(fam.bands), fam.bands.saturating_sub(1).max(2))
}

fn fit_bands(bands: &[f64], window: (usize, usize)) -> Result<ScalingFit> {
    let (lo, hi) = window;
    let ks: Vec<usize> = (lo..=hi).filter(|&k| k >= 1 && k <= bands.len()).collect();
    let x: Vec<f64> = ks.iter().map(|&k| 2f64.powi(-(k as i32))).collect();
    let y: Vec<f64> = ks.iter().map(|&k| bands[k - 1]).collect();
    fit_power_law(&x, &y, None)
}

/// Measured decay exponent, or a lower bound when the bands reach the
/// round-off floor inside the window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BesovExponent {
    Measured { sigma: f64 },
    Saturated { lower_bound: f64 },
}

impl BesovExponent {
    /// Measured value, or the lower bound for saturated estimates.
    pub fn value(&self) -> f64 {
        match *self {
            BesovExponent::Measured { sigma } => sigma,
            BesovExponent::Saturated { lower_bound } => lower_bound,
        }
    }

    pub fn is_saturated(&self) -> bool {
        matches!(self, BesovExponent::Saturated { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovFit {
    pub exponent: BesovExponent,
    /// Regression over the bands above the floor; `None` when fewer than
    /// three remain.
    pub fit: Option<ScalingFit>,
    pub window: (usize, usize),
    pub bands: Vec<f64>,
}

/// Relative level below which a band is treated as numerically empty.
pub const BAND_FLOOR: f64 = 1e-11;

/// `σ = −slope` of `log₂‖f∗φ_k‖_p` against `k` over bands `window`.
pub fn fit_besov_exponent(
    f: &SpaceTimeField,
    p: f64,
    fam: &DyadicFamily,
    window: Option<(usize, usize)>,
) -> Result<BesovFit> {
    fit_besov_exponent_mode(f, p, fam, window, BesovMode::PerSlice)
}

pub fn fit_besov_exponent_mode(
    f: &SpaceTimeField,
    p: f64,
    fam: &DyadicFamily,
    window: Option<(usize, usize)>,
    mode: BesovMode,
) -> Result<BesovFit> {
    let window = window.unwrap_or_else(|| default_window(fam));
    let (lo, hi) = window;
    if lo < 1 || hi > fam.bands || hi < lo + 2 {
        return Err(Error::param(format!("band window {window:?} must hold ≥ 3 of 1..={}", fam.bands)));
    }
    let norms = band_norms(f, p, fam, mode)?;
    let bands = norms[1..].to_vec();
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let floor = BAND_FLOOR * scale;
    let inside: Vec<usize> = (lo..=hi).filter(|&k| bands[k - 1] > floor).collect();
    if inside.is_empty() {
        return Err(Error::Degenerate("all bands in the window vanish".into()));
    }
    let saturated = inside.len() < hi - lo + 1;
    let fit = if inside.len() >= 3 {
        let x: Vec<f64> = inside.iter().map(|&k| 2f64.powi(-(k as i32))).collect();
        let y: Vec<f64> = inside.iter().map(|&k| bands[k - 1]).collect();
        Some(fit_power_law(&x, &y, None)?)
    } else {
        None
    };
    let exponent = if saturated {
        // Steepest decay the window can certify: from the first live band
        // down to the floor at the end of the window.
        let k0 = inside[0];
        let span = (hi - k0).max(1) as f64;
        let certified = (bands[k0 - 1] / floor.max(f64::MIN_POSITIVE)).log2() / span;
        BesovExponent::Saturated { lower_bound: certified.max(fit.map(|f| f.exponent).unwrap_or(0.0)) }
    } else {
        BesovExponent::Measured { sigma: fit.expect("full window has ≥ 3 bands").exponent }
    };
    Ok(BesovFit { exponent, fit, window, bands })
}

//! Structure functions `S_p(ℓ) = ⟨|u(x + ℓz) − u(x)|^p⟩` and the signed
//! longitudinal moment `S_∥(ℓ) = d(d+2)/12 ⨏ (z·δ_{ℓz}u)³`.
//!
//! Averages run over every grid point, every frame (uniform weights) and a
//! set of unit directions: `±1` in 1D, equi-angular in 2D with bilinear
//! interpolation for off-grid shifts, and the coordinate axes in 3D.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{fit_power_law, PeriodicGrid, ScalingFit, SpaceTimeField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SfKind {
    Absolute,
    Longitudinal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SFCurve {
    pub p: f64,
    pub kind: SfKind,
    pub separations: Vec<f64>,
    pub values: Vec<f64>,
    /// Frames averaged over, `[start, end)`.
    pub frames: (usize, usize),
    pub ndirections: usize,
    /// Averaging used: always space, time and directions.
    pub averaging: String,
}

impl SFCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("ell,value\n");
        for (l, v) in self.separations.iter().zip(&self.values) {
            s.push_str(&format!("{l:.12e},{v:.12e}\n"));
        }
        s
    }
}

/// Unit directions used for a `d`-dimensional average.
pub fn directions(d: usize, ndirections: usize) -> Result<Vec<[f64; 3]>> {
    match d {
        1 => match ndirections {
            1 => Ok(vec![[1.0, 0.0, 0.0]]),
            2 => Ok(vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
            _ => Err(Error::param("1D averages use one or two directions")),
        },
        2 => {
            if ndirections < 8 {
                return Err(Error::param("2D averages need at least 8 directions"));
            }
            Ok((0..ndirections)
                .map(|k| {
                    let th = std::f64::consts::TAU * k as f64 / ndirections as f64;
                    let (s, c) = th.sin_cos();
                    // Snap exact zeros so axis shifts stay on the grid.
                    let snap = |x: f64| if x.abs() < 1e-14 { 0.0 } else { x };
                    [snap(c), snap(s), 0.0]
                })
                .collect())
        }
        3 => Ok((0..6)
            .map(|k| {
                let mut z = [0.0; 3];
                z[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                z
            })
            .collect()),
        _ => Err(Error::InvalidGrid(format!("unsupported dimension {d}"))),
    }
}

/// `u(x + s·Δx) − u(x)` with `s` in grid units, multilinear between nodes.
fn increment(g: &PeriodicGrid, x: &[f64], s: [f64; 3]) -> Vec<f64> {
    let n = g.n as i64;
    // Per-axis integer offset and fractional weight.
    let mut base = [0i64; 3];
    let mut frac = [0.0; 3];
    for a in 0..g.d {
        let f = s[a].floor();
        base[a] = f as i64;
        frac[a] = s[a] - f;
        if frac[a] < 1e-12 {
            frac[a] = 0.0;
        } else if frac[a] > 1.0 - 1e-12 {
            frac[a] = 0.0;
            base[a] += 1;
        }
    }
    let corners: Vec<([i64; 3], f64)> = (0..1usize << g.d)
        .filter_map(|mask| {
            let mut off = base;
            let mut w = 1.0;
            for a in 0..g.d {
                if mask >> a & 1 == 1 {
                    off[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            (w != 0.0).then_some((off, w))
        })
        .collect();
    (0..g.points())
        .map(|p| {
            let ix = g.unravel(p);
            corners
                .iter()
                .map(|(off, w)| {
                    let mut j = [0usize; 3];
                    for a in 0..g.d {
                        j[a] = (ix[a] as i64 + off[a]).rem_euclid(n) as usize;
                    }
                    w * (x[g.ravel(j)] - x[p])
                })
                .sum::<f64>()
        })
        .collect()
}

fn check_separations(g: &PeriodicGrid, ells: &[f64]) -> Result<Vec<f64>> {
    if ells.is_empty() {
        return Err(Error::param("no separations given"));
    }
    let h = g.spacing();
    let mut out = Vec::with_capacity(ells.len());
    for (i, &l) in ells.iter().enumerate() {
        let m = l / h;
        if !(m > 0.0) || (m - m.round()).abs() > 1e-6 * m.max(1.0) {
            return Err(Error::param(format!("separation {l} is not a positive multiple of the grid spacing")));
        }
        if m.round() as usize > g.n / 4 {
            return Err(Error::OutOfRange(format!("separation {l} exceeds n/4 grid points")));
        }
        if i > 0 && l <= ells[i - 1] {
            return Err(Error::param("separations must be strictly increasing"));
        }
        out.push(m.round());
    }
    Ok(out)
}

/// Per-point increments `u(x + ℓz) − u(x)` of every component of frame `it`.
fn increments(u: &SpaceTimeField, it: usize, s: [f64; 3]) -> Vec<Vec<f64>> {
    let g = u.grid();
    (0..u.components())
        .map(|c| increment(g, u.component(it, c), s))
        .collect()
}

pub fn absolute_sf(u: &SpaceTimeField, ps: &[f64], ells: &[f64], ndirections: usize) -> Result<Vec<SFCurve>> {
    let g = *u.grid();
    if ps.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::param("moment orders must be positive"));
    }
    let steps = check_separations(&g, ells)?;
    let dirs = directions(g.d, ndirections)?;
    let np = g.points();
    let jobs: Vec<(usize, usize)> = (0..steps.len()).flat_map(|l| (0..dirs.len()).map(move |k| (l, k))).collect();
    let sums: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(l, k)| {
            let s = [steps[l] * dirs[k][0], steps[l] * dirs[k][1], steps[l] * dirs[k][2]];
            let mut acc = vec![0.0; ps.len()];
            for it in 0..g.nt {
                let inc = increments(u, it, s);
                for p in 0..np {
                    let m = inc.iter().map(|c| c[p] * c[p]).sum::<f64>().sqrt();
                    for (a, q) in acc.iter_mut().zip(ps) {
                        *a += m.powf(*q);
                    }
                }
            }
            acc
        })
        .collect();
    let norm = (g.nt * np * dirs.len()) as f64;
    Ok(ps
        .iter()
        .enumerate()
        .map(|(pi, &p)| {
            let values = (0..steps.len())
                .map(|l| (0..dirs.len()).map(|k| sums[l * dirs.len() + k][pi]).sum::<f64>() / norm)
                .collect();
            SFCurve {
                p,
                kind: SfKind::Absolute,
                separations: ells.to_vec(),
                values,
                frames: (0, g.nt),
                ndirections: dirs.len(),
                averaging: "space+time+directions".into(),
            }
        })
        .collect())
}

/// `d(d+2)/12`
pub fn longitudinal_prefactor(d: usize) -> f64 {
    (d * (d + 2)) as f64 / 12.0
}

pub fn longitudinal_sf(u: &SpaceTimeField, ells: &[f64], ndirections: usize) -> Result<SFCurve> {
    let g = *u.grid();
    if g.d < 2 || u.components() != g.d {
        return Err(Error::InvalidField("longitudinal structure function needs a d ≥ 2 velocity".into()));
    }
    let steps = check_separations(&g, ells)?;
    let dirs = directions(g.d, ndirections)?;
    let np = g.points();
    let jobs: Vec<(usize, usize)> = (0..steps.len()).flat_map(|l| (0..dirs.len()).map(move |k| (l, k))).collect();
    let sums: Vec<f64> = jobs
        .par_iter()
        .map(|&(l, k)| {
            let z = dirs[k];
            let s = [steps[l] * z[0], steps[l] * z[1], steps[l] * z[2]];
            let mut acc = 0.0;
            for it in 0..g.nt {
                let inc = increments(u, it, s);
                for p in 0..np {
                    let v: f64 = (0..g.d).map(|a| z[a] * inc[a][p]).sum();
                    acc += v * v * v;
                }
            }
            acc
        })
        .collect();
    let norm = (g.nt * np * dirs.len()) as f64;
    let pre = longitudinal_prefactor(g.d);
    let values = (0..steps.len())
        .map(|l| pre * sums[l * dirs.len()..(l + 1) * dirs.len()].iter().sum::<f64>() / norm)
        .collect();
    Ok(SFCurve {
        p: 3.0,
        kind: SfKind::Longitudinal,
        separations: ells.to_vec(),
        values,
        frames: (0, g.nt),
        ndirections: dirs.len(),
        averaging: "space+time+directions".into(),
    })
}

/// Spatial mean of the local longitudinal moment `S_∥(x, t; ℓ)` at frame `it`.
pub fn longitudinal_frame_mean(u: &SpaceTimeField, it: usize, ell: f64, ndirections: usize) -> Result<f64> {
    let g = *u.grid();
    if g.d < 2 || u.components() != g.d {
        return Err(Error::InvalidField("longitudinal structure function needs a d ≥ 2 velocity".into()));
    }
    let step = check_separations(&g, &[ell])?[0];
    let dirs = directions(g.d, ndirections)?;
    let sum: f64 = dirs
        .par_iter()
        .map(|z| {
            let inc = increments(u, it, [step * z[0], step * z[1], step * z[2]]);
            (0..g.points())
                .map(|p| {
                    let v: f64 = (0..g.d).map(|a| z[a] * inc[a][p]).sum();
                    v * v * v
                })
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(longitudinal_prefactor(g.d) * sum / (g.points() * dirs.len()) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaFit {
    pub p: f64,
    pub fit: ScalingFit,
    /// `ζ_p / p`
    pub sigma_p: f64,
}

pub fn fit_zeta(curve: &SFCurve, window: Option<(f64, f64)>) -> Result<ZetaFit> {
    let inside = curve
        .separations
        .iter()
        .filter(|l| window.map_or(true, |(a, b)| **l >= a * (1.0 - 1e-12) && **l <= b * (1.0 + 1e-12)))
        .count();
    if inside < 4 {
        return Err(Error::Degenerate(format!("{inside} separations in the fit window, need 4")));
    }
    let fit = fit_power_law(&curve.separations, &curve.values, window)?;
    Ok(ZetaFit { p: curve.p, sigma_p: fit.exponent / curve.p, fit })
}

/// Exponent table as JSON rows `{p, zeta, sigma, r2}`.
pub fn exponent_table_json(fits: &[ZetaFit]) -> serde_json::Value {
    serde_json::Value::Array(
        fits.iter()
            .map(|f| serde_json::json!({ "p": f.p, "zeta": f.fit.exponent, "sigma": f.sigma_p, "r2": f.fit.r2 }))
            .collect(),
    )
}

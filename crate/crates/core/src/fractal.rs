//! Box-counting, covering and local-density estimators for the set where a
//! (mollified) dissipation density concentrates.
//!
//! Samples live on a rectangular lattice with axis 0 outermost. For movies
//! axis 0 is time (not periodic) and the remaining axes are periodic space.
//! All dimensions reported here are box-counting proxies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{fit_power_law, ScalingFit, SpaceTimeField};

/// Non-negative density on a lattice with physical spacings.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub periodic: Vec<bool>,
    pub values: Vec<f64>,
    /// Fraction of `Σ|v|` carried by positive samples.
    pub positive_fraction: f64,
    /// Whether the source had negative samples (then `values = |source|`).
    pub signed: bool,
}

impl Density {
    pub fn new(shape: Vec<usize>, spacing: Vec<f64>, periodic: Vec<bool>, source: &[f64]) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 || shape.len() != spacing.len() || shape.len() != periodic.len() {
            return Err(Error::param("density needs matching shape, spacing and periodicity of rank 1..=4"));
        }
        if shape.iter().product::<usize>() != source.len() || source.is_empty() {
            return Err(Error::InvalidField("density samples do not match the shape".into()));
        }
        if spacing.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::param("spacings must be positive"));
        }
        let total: f64 = source.iter().map(|v| v.abs()).sum();
        let pos: f64 = source.iter().filter(|v| **v > 0.0).sum();
        Ok(Self {
            shape,
            spacing,
            periodic,
            values: source.iter().map(|v| v.abs()).collect(),
            positive_fraction: if total > 0.0 { pos / total } else { 1.0 },
            signed: source.iter().any(|v| *v < 0.0),
        })
    }

    /// Space-time density of a scalar movie: axis 0 is time.
    pub fn from_movie(f: &SpaceTimeField) -> Result<Self> {
        if f.components() != 1 {
            return Err(Error::InvalidField("density needs a scalar movie".into()));
        }
        let g = f.grid();
        let mut shape = vec![g.nt];
        let mut spacing = vec![g.dt];
        let mut periodic = vec![false];
        for _ in 0..g.d {
            shape.push(g.n);
            spacing.push(g.spacing());
            periodic.push(true);
        }
        Self::new(shape, spacing, periodic, f.data())
    }

    pub fn cell_measure(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_measure()
    }

    fn unravel(&self, mut i: usize) -> [usize; 4] {
        let mut ix = [0; 4];
        for a in (0..self.shape.len()).rev() {
            ix[a] = i % self.shape[a];
            i /= self.shape[a];
        }
        ix
    }

    fn ravel(&self, ix: &[usize]) -> usize {
        ix.iter().zip(&self.shape).fold(0, |acc, (i, n)| acc * n + i)
    }
}

/// Boolean lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub shape: Vec<usize>,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(shape: Vec<usize>, data: Vec<bool>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 || shape.iter().product::<usize>() != data.len() {
            return Err(Error::param("mask data does not match its shape"));
        }
        Ok(Self { shape, data })
    }

    pub fn full(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![true; n] }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    /// Cartesian product, `self` on the outer axes.
    pub fn product(&self, other: &Mask) -> Result<Mask> {
        let mut shape = self.shape.clone();
        shape.extend_from_slice(&other.shape);
        let data = self.data.iter().flat_map(|a| other.data.iter().map(move |b| *a && *b)).collect();
        Mask::new(shape, data)
    }
}

/// Middle-thirds Cantor set on `3^levels` cells.
pub fn cantor_mask(levels: u32) -> Mask {
    let n = 3usize.pow(levels);
    let data = (0..n)
        .map(|mut i| {
            for _ in 0..levels {
                if i % 3 == 1 {
                    return false;
                }
                i /= 3;
            }
            true
        })
        .collect();
    Mask { shape: vec![n], data }
}

/// `ln 2 / ln 3`
pub fn cantor_dimension() -> f64 {
    2f64.ln() / 3f64.ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSet {
    pub threshold: f64,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub mask: Vec<bool>,
    /// Retained mass over total mass.
    pub retained: f64,
    pub cells: usize,
    pub positive_fraction: f64,
}

impl ConcentrationSet {
    pub fn mask(&self) -> Mask {
        Mask { shape: self.shape.clone(), data: self.mask.clone() }
    }
}

/// Default mass fraction defining the concentration set.
pub const DEFAULT_THRESHOLD: f64 = 0.99;

/// Smallest set of cells carrying `threshold` of the mass, heaviest first.
pub fn concentration_set(rho: &Density, threshold: f64) -> Result<ConcentrationSet> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::param("threshold must lie in (0, 1]"));
    }
    let order = mass_order(rho);
    let total: f64 = rho.values.iter().sum();
    let mut mask = vec![false; rho.values.len()];
    let mut acc = 0.0;
    let mut cells = 0;
    if total > 0.0 {
        for &i in &order {
            if acc >= threshold * total {
                break;
            }
            mask[i] = true;
            acc += rho.values[i];
            cells += 1;
        }
    }
    Ok(ConcentrationSet {
        threshold,
        shape: rho.shape.clone(),
        mask,
        retained: if total > 0.0 { acc / total } else { 0.0 },
        cells,
        positive_fraction: rho.positive_fraction,
    })
}

/// Indices sorted by decreasing mass, ties by index.
fn mass_order(rho: &Density) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rho.values.len()).filter(|&i| rho.values[i] > 0.0).collect();
    order.sort_by(|&a, &b| rho.values[b].total_cmp(&rho.values[a]).then(a.cmp(&b)));
    order
}

/// Number of boxes of `size` cells per side meeting the mask.
pub fn occupied_boxes(mask: &Mask, size: usize) -> usize {
    let nb: Vec<usize> = mask.shape.iter().map(|n| n.div_ceil(size)).collect();
    let mut hit = vec![false; nb.iter().product()];
    let rank = mask.shape.len();
    for (i, _) in mask.data.iter().enumerate().filter(|(_, b)| **b) {
        let mut rem = i;
        let mut bix = [0usize; 4];
        for a in (0..rank).rev() {
            bix[a] = (rem % mask.shape[a]) / size;
            rem /= mask.shape[a];
        }
        let k = (0..rank).fold(0, |acc, a| acc * nb[a] + bix[a]);
        hit[k] = true;
    }
    hit.iter().filter(|b| **b).count()
}

/// Slope of `log N(s)` against `log(1/s)` over box sizes `s` in cells.
pub fn box_count_dimension(mask: &Mask, sizes: &[usize]) -> Result<ScalingFit> {
    if sizes.len() < 4 {
        return Err(Error::param("box counting needs at least four box sizes"));
    }
    if mask.count() == 0 {
        return Err(Error::Degenerate("empty mask".into()));
    }
    if sizes.iter().any(|s| *s == 0) {
        return Err(Error::param("box sizes must be positive"));
    }
    let x: Vec<f64> = sizes.iter().map(|s| 1.0 / *s as f64).collect();
    let y: Vec<f64> = sizes.iter().map(|s| occupied_boxes(mask, *s) as f64).collect();
    fit_power_law(&x, &y, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringPoint {
    pub r: f64,
    pub boxes: usize,
    /// `Σ r_i^γ`
    pub sum: f64,
    pub retained: f64,
}

/// Covers the concentration set with lattice-aligned cubes of side `r` (in
/// physical units on every axis) and reports `N(r) r^γ` per radius.
pub fn covering_mass_estimate(rho: &Density, gamma: f64, radii: &[f64], threshold: f64) -> Result<Vec<CoveringPoint>> {
    if !(gamma >= 0.0) {
        return Err(Error::param("γ must be non-negative"));
    }
    let set = concentration_set(rho, threshold)?;
    if set.cells == 0 {
        return Err(Error::Degenerate("density vanishes".into()));
    }
    let rank = rho.shape.len();
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(Error::param("radii must be positive"));
            }
            let side: Vec<usize> = (0..rank).map(|a| ((r / rho.spacing[a]).round() as usize).max(1)).collect();
            let nb: Vec<usize> = (0..rank).map(|a| rho.shape[a].div_ceil(side[a])).collect();
            let mut hit = vec![false; nb.iter().product()];
            for (i, _) in set.mask.iter().enumerate().filter(|(_, b)| **b) {
                let ix = rho.unravel(i);
                let k = (0..rank).fold(0, |acc, a| acc * nb[a] + ix[a] / side[a]);
                hit[k] = true;
            }
            let boxes = hit.iter().filter(|b| **b).count();
            Ok(CoveringPoint { r, boxes, sum: boxes as f64 * r.powf(gamma), retained: set.retained })
        })
        .collect()
}

/// Mass of `|ρ|` in the Euclidean ball of radius `r` about cell `centre`;
/// non-periodic axes are truncated.
pub fn ball_mass(rho: &Density, centre: usize, r: f64) -> f64 {
    let rank = rho.shape.len();
    let c = rho.unravel(centre);
    let reach: Vec<i64> = (0..rank).map(|a| (r / rho.spacing[a]).floor() as i64).collect();
    let mut total = 0.0;
    let mut off = [0i64; 4];
    for a in 0..rank {
        off[a] = -reach[a];
    }
    loop {
        let d2: f64 = (0..rank).map(|a| (off[a] as f64 * rho.spacing[a]).powi(2)).sum();
        if d2 <= r * r * (1.0 + 1e-12) {
            let mut ix = [0usize; 4];
            let mut inside = true;
            for a in 0..rank {
                let n = rho.shape[a] as i64;
                let j = c[a] as i64 + off[a];
                if rho.periodic[a] {
                    ix[a] = j.rem_euclid(n) as usize;
                } else if j < 0 || j >= n {
                    inside = false;
                    break;
                } else {
                    ix[a] = j as usize;
                }
            }
            if inside {
                total += rho.values[rho.ravel(&ix[..rank])];
            }
        }
        // Odometer over the offset box.
        let mut a = rank;
        loop {
            if a == 0 {
                return total * rho.cell_measure();
            }
            a -= 1;
            off[a] += 1;
            if off[a] <= reach[a] {
                break;
            }
            off[a] = -reach[a];
        }
    }
}

/// Upper-density exponent `2σ/(1−σ) − 1 + (p−3)(d+1)/p`.
pub fn predicted_density_exponent(sigma: f64, p: f64, d: usize) -> f64 {
    (3.0 * sigma - 1.0) / (1.0 - sigma) + (1.0 - 3.0 / p) * (d as f64 + 1.0)
}

/// Slack of the one-sided density comparison.
pub const DENSITY_SLACK: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityFit {
    pub radii: Vec<f64>,
    pub points: Vec<usize>,
    pub exponents: Vec<f64>,
    pub min_exponent: f64,
    pub median_exponent: f64,
    pub predicted: f64,
    pub pass: bool,
    /// Input had negative samples and `|ρ|` was used.
    pub signed: bool,
}

/// Fits `mass(B_r) ∼ r^a` at `npoints` cells spread over the mass ranking
/// of the concentration set, using radii `r ≥ 4δ`.
pub fn density_exponent_fit(
    rho: &Density,
    npoints: usize,
    radii: &[f64],
    delta: f64,
    sigma: f64,
    p: f64,
    d: usize,
) -> Result<DensityFit> {
    let radii: Vec<f64> = radii.iter().copied().filter(|r| *r >= 4.0 * delta * (1.0 - 1e-12)).collect();
    if radii.len() < 3 {
        return Err(Error::Degenerate("fewer than three radii above 4δ".into()));
    }
    if npoints == 0 {
        return Err(Error::param("need at least one evaluation point"));
    }
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let set = concentration_set(rho, DEFAULT_THRESHOLD)?;
    // Keep centres whose largest ball stays clear of non-periodic ends.
    let clear = |i: usize| {
        let ix = rho.unravel(i);
        (0..rho.shape.len()).all(|a| {
            rho.periodic[a] || {
                let t = ix[a] as f64 * rho.spacing[a];
                t >= rmax && (rho.shape[a] - 1 - ix[a]) as f64 * rho.spacing[a] >= rmax
            }
        })
    };
    let candidates: Vec<usize> = mass_order(rho).into_iter().filter(|&i| set.mask[i] && clear(i)).collect();
    if candidates.is_empty() {
        return Err(Error::Degenerate("no evaluation points clear of the boundary".into()));
    }
    let k = npoints.min(candidates.len());
    let points: Vec<usize> = (0..k).map(|j| candidates[j * candidates.len() / k]).collect();
    let exponents: Vec<f64> = points
        .par_iter()
        .map(|&c| {
            let m: Vec<f64> = radii.iter().map(|&r| ball_mass(rho, c, r)).collect();
            fit_power_law(&radii, &m, None).map(|f| f.exponent)
        })
        .collect::<Result<_>>()?;
    let min_exponent = exponents.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut sorted = exponents.clone();
    sorted.sort_by(f64::total_cmp);
    let median_exponent = sorted[sorted.len() / 2];
    let predicted = predicted_density_exponent(sigma, p, d);
    Ok(DensityFit {
        radii,
        points,
        pass: min_exponent >= predicted - DENSITY_SLACK,
        exponents,
        min_exponent,
        median_exponent,
        predicted,
        signed: rho.signed,
    })
}

/// Dimension report as JSON.
pub fn dimension_json(method: &str, fit: &ScalingFit, threshold: f64, delta: f64) -> serde_json::Value {
    serde_json::json!({
        "method": method,
        "estimate": fit.exponent,
        "window": [fit.window.0, fit.window.1],
        "r2": fit.r2,
        "threshold": threshold,
        "delta": delta,
        "label": "box-counting proxy",
    })
}

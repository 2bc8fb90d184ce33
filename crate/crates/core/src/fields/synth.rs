//! Deterministic synthetic fields used as analysis inputs and test oracles.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::field::{FieldMeta, SpaceTimeField};
use super::grid::PeriodicGrid;
use super::spectral::{Spectral, C64};
use crate::error::{Error, Result};

/// Field recipes. Time-independent recipes are repeated over every frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthKind {
    /// `amplitude · cos(j·x)` for the integer wavevector `j`.
    FourierMode { j: [i32; 3], amplitude: f64 },
    /// `u = (sin x cos y, −cos x sin y)`, d = 2.
    TaylorGreen,
    /// Taylor–Green plus a random solenoidal field supported on `|k| ≤ kmax`
    /// with `amplitude` times the Taylor–Green rms, d = 2.
    PerturbedTaylorGreen { amplitude: f64, kmax: f64 },
    /// Piecewise-linear ramps separated by `nshocks` descending jumps.
    Sawtooth { nshocks: usize, jump: f64 },
    /// Scalar with `|f̂(ξ)| ∝ |ξ|^{−(σ + d/2)}` and uniform random phases.
    RandomPhaseBesov { sigma: f64, p_target: f64 },
    /// Lacunary series `Σ_j 2^{−σj} cos(2^j x_0)`.
    Weierstrass { sigma: f64 },
    Constant { c: f64, components: usize },
    /// Divergence-free d = 2 velocity whose components have the
    /// random-phase spectrum of regularity `σ`.
    RandomSolenoidal { sigma: f64 },
    /// Weierstrass profile `W(y)` as the first velocity component, d = 2.
    WeierstrassShear { sigma: f64 },
    /// Steady viscous shock `−tanh(x/2ν)` centred in the domain, closed
    /// periodically by a smooth antishock of width `width`, d = 1.
    TanhShock { nu: f64, width: f64 },
}

impl SynthKind {
    fn name(&self) -> &'static str {
        match self {
            SynthKind::FourierMode { .. } => "fourier_mode",
            SynthKind::TaylorGreen => "taylor_green",
            SynthKind::PerturbedTaylorGreen { .. } => "perturbed_taylor_green",
            SynthKind::Sawtooth { .. } => "sawtooth",
            SynthKind::RandomPhaseBesov { .. } => "random_phase_besov",
            SynthKind::Weierstrass { .. } => "weierstrass",
            SynthKind::Constant { .. } => "constant",
            SynthKind::RandomSolenoidal { .. } => "random_solenoidal",
            SynthKind::WeierstrassShear { .. } => "weierstrass_shear",
            SynthKind::TanhShock { .. } => "tanh_shock",
        }
    }

    fn is_random(&self) -> bool {
        matches!(
            self,
            SynthKind::RandomPhaseBesov { .. } | SynthKind::RandomSolenoidal { .. } | SynthKind::PerturbedTaylorGreen { .. }
        )
    }
}

/// Builds the field `kind` on `grid`; `seed` drives the `ChaCha8` generator of
/// the random recipes and is ignored by the others.
pub fn synth_field(grid: &PeriodicGrid, kind: &SynthKind, seed: u64) -> Result<SpaceTimeField> {
    let snapshot = snapshot(grid, kind, seed)?;
    let mut meta = FieldMeta::named(kind.name());
    meta.provenance = format!("synth:{}", serde_json::to_string(kind).unwrap_or_default());
    meta.seed = kind.is_random().then_some(seed);
    SpaceTimeField::static_movie(*grid, snapshot, meta)
}

fn need_dim(grid: &PeriodicGrid, d: usize, what: &str) -> Result<()> {
    if grid.d != d {
        return Err(Error::GridMismatch(format!("{what} requires d = {d}, grid has d = {}", grid.d)));
    }
    Ok(())
}

fn scaled_coords(grid: &PeriodicGrid, idx: usize) -> [f64; 3] {
    let mut x = grid.coords(idx);
    let s = grid.wavenumber_unit();
    for v in &mut x {
        *v *= s;
    }
    x
}

fn snapshot(grid: &PeriodicGrid, kind: &SynthKind, seed: u64) -> Result<Vec<Vec<f64>>> {
    let np = grid.points();
    match *kind {
        SynthKind::FourierMode { j, amplitude } => {
            let f = (0..np)
                .map(|i| {
                    let x = scaled_coords(grid, i);
                    let phase: f64 = (0..grid.d).map(|a| j[a] as f64 * x[a]).sum();
                    amplitude * phase.cos()
                })
                .collect();
            Ok(vec![f])
        }
        SynthKind::TaylorGreen => {
            need_dim(grid, 2, "taylor_green")?;
            Ok(taylor_green(grid))
        }
        SynthKind::PerturbedTaylorGreen { amplitude, kmax } => {
            need_dim(grid, 2, "perturbed_taylor_green")?;
            if !(kmax >= 1.0) || !amplitude.is_finite() {
                return Err(Error::param("perturbed_taylor_green needs kmax ≥ 1 and a finite amplitude"));
            }
            let sp = Spectral::for_grid(grid);
            let psi = sp.filter(&random_scalar(grid, 3.0, seed), |k| {
                if ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt() <= kmax { 1.0 } else { 0.0 }
            });
            // Taylor–Green has mean |u|² = 1/2.
            let scale = amplitude * 0.5f64.sqrt();
            let pert = solenoidal(grid, &psi);
            Ok(taylor_green(grid)
                .into_iter()
                .zip(pert)
                .map(|(a, b)| a.iter().zip(&b).map(|(x, y)| x + scale * y).collect())
                .collect())
        }
        SynthKind::Sawtooth { nshocks, jump } => {
            need_dim(grid, 1, "sawtooth")?;
            if nshocks == 0 || grid.n % nshocks != 0 || grid.n / nshocks < 2 {
                return Err(Error::param(format!("nshocks = {nshocks} must divide n into ramps of ≥ 2 points")));
            }
            let m = grid.n / nshocks;
            let f = (0..grid.n)
                .map(|i| jump * ((i % m) as f64 / (m - 1) as f64 - 0.5))
                .collect();
            Ok(vec![f])
        }
        SynthKind::RandomPhaseBesov { sigma, p_target } => {
            if !(p_target >= 1.0) {
                return Err(Error::param("p_target must be at least 1"));
            }
            let f = random_scalar(grid, sigma + grid.d as f64 / 2.0, seed);
            Ok(vec![normalize_rms(f)])
        }
        SynthKind::Weierstrass { sigma } => {
            let f = (0..np).map(|i| weierstrass(grid.n, sigma, scaled_coords(grid, i)[0])).collect();
            Ok(vec![f])
        }
        SynthKind::Constant { c, components } => {
            if components == 0 {
                return Err(Error::param("constant field needs at least one component"));
            }
            Ok(vec![vec![c; np]; components])
        }
        SynthKind::RandomSolenoidal { sigma } => {
            need_dim(grid, 2, "random_solenoidal")?;
            let psi = random_scalar(grid, sigma + 1.0 + grid.d as f64 / 2.0, seed);
            Ok(solenoidal(grid, &psi))
        }
        SynthKind::WeierstrassShear { sigma } => {
            need_dim(grid, 2, "weierstrass_shear")?;
            let u = (0..np).map(|i| weierstrass(grid.n, sigma, scaled_coords(grid, i)[1])).collect();
            Ok(vec![u, vec![0.0; np]])
        }
        SynthKind::TanhShock { nu, width } => {
            need_dim(grid, 1, "tanh_shock")?;
            if !(nu > 0.0) || !(width > 0.0) {
                return Err(Error::param("tanh_shock needs positive nu and width"));
            }
            let half = grid.length / 2.0;
            let f = (0..grid.n)
                .map(|i| {
                    let x = i as f64 * grid.spacing() - half;
                    -(x / (2.0 * nu)).tanh() + ((x - half) / width).tanh() + ((x + half) / width).tanh()
                })
                .collect();
            Ok(vec![f])
        }
    }
}

fn taylor_green(grid: &PeriodicGrid) -> Vec<Vec<f64>> {
    let np = grid.points();
    let mut u = vec![0.0; np];
    let mut v = vec![0.0; np];
    for i in 0..np {
        let x = scaled_coords(grid, i);
        u[i] = x[0].sin() * x[1].cos();
        v[i] = -x[0].cos() * x[1].sin();
    }
    vec![u, v]
}

/// `(∂_y ψ, −∂_x ψ)` normalized to unit rms speed.
fn solenoidal(grid: &PeriodicGrid, psi: &[f64]) -> Vec<Vec<f64>> {
    let np = grid.points();
    let sp = Spectral::for_grid(grid);
    let s = sp.forward(psi);
    let u = sp.inverse(sp.derivative(&s, 1));
    let v: Vec<f64> = sp.inverse(sp.derivative(&s, 0)).into_iter().map(|x| -x).collect();
    let rms = (u.iter().chain(&v).map(|x| x * x).sum::<f64>() / np as f64).sqrt();
    let scale = if rms > 0.0 { 1.0 / rms } else { 1.0 };
    vec![u.into_iter().map(|x| x * scale).collect(), v.into_iter().map(|x| x * scale).collect()]
}

/// Number of Weierstrass octaves resolved on an `n`-point grid.
pub fn weierstrass_octaves(n: usize) -> u32 {
    n.trailing_zeros().saturating_sub(2)
}

fn weierstrass(n: usize, sigma: f64, x: f64) -> f64 {
    (1..=weierstrass_octaves(n))
        .map(|j| 2f64.powf(-sigma * j as f64) * (2f64.powi(j as i32) * x).cos())
        .sum()
}

fn normalize_rms(f: Vec<f64>) -> Vec<f64> {
    let rms = (f.iter().map(|x| x * x).sum::<f64>() / f.len() as f64).sqrt();
    if rms > 0.0 {
        f.into_iter().map(|x| x / rms).collect()
    } else {
        f
    }
}

/// Random-phase scalar with `|f̂(ξ)| = |ξ|^{−decay}` below the Nyquist planes.
fn random_scalar(grid: &PeriodicGrid, decay: f64, seed: u64) -> Vec<f64> {
    let sp = Spectral::for_grid(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = (grid.n / 2) as i32;
    let mut s = vec![C64::new(0.0, 0.0); sp.len()];
    for (idx, v) in s.iter_mut().enumerate() {
        let phase = rng.gen_range(0.0..2.0 * PI);
        let k = sp.k(idx);
        if (0..grid.d).any(|a| k[a].abs() == half) {
            continue;
        }
        let mag = sp.kmag_lattice(idx);
        if mag == 0.0 {
            continue;
        }
        *v = C64::from_polar(mag.powf(-decay), phase);
    }
    hermitize(&sp, &mut s);
    sp.inverse(s)
}

/// Enforces conjugate symmetry on the planes where the last index is 0.
fn hermitize(sp: &Spectral, s: &mut [C64]) {
    let n = sp.n() as i32;
    let d = sp.d();
    let nh = sp.n() / 2 + 1;
    for idx in 0..s.len() {
        let k = sp.k(idx);
        if k[d - 1] != 0 {
            continue;
        }
        let mut mirror = 0usize;
        for a in 0..d - 1 {
            mirror = mirror * sp.n() + (-k[a]).rem_euclid(n) as usize;
        }
        mirror *= nh;
        if mirror < idx {
            s[idx] = s[mirror].conj();
        } else if mirror == idx {
            s[idx].im = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_everywhere() {
        let g = PeriodicGrid::new(2, 16, 2.0 * PI, 3, 0.1).unwrap();
        let f = synth_field(&g, &SynthKind::Constant { c: 2.0, components: 1 }, 0).unwrap();
        assert!(f.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn sawtooth_range() {
        let g = PeriodicGrid::snapshot(1, 64).unwrap();
        let f = synth_field(&g, &SynthKind::Sawtooth { nshocks: 1, jump: 2.0 }, 0).unwrap();
        let d = f.data();
        let max = d.iter().cloned().fold(f64::MIN, f64::max);
        let min = d.iter().cloned().fold(f64::MAX, f64::min);
        assert!((max - min - 2.0).abs() < 1e-14);
        let drops = (0..64).filter(|&i| d[(i + 1) % 64] < d[i]).count();
        assert_eq!(drops, 1);
    }

    #[test]
    fn taylor_green_needs_2d() {
        let g = PeriodicGrid::snapshot(1, 16).unwrap();
        assert!(synth_field(&g, &SynthKind::TaylorGreen, 0).is_err());
    }

    #[test]
    fn random_fields_reproducible() {
        let g = PeriodicGrid::snapshot(2, 32).unwrap();
        let k = SynthKind::RandomPhaseBesov { sigma: 0.3, p_target: 2.0 };
        let a = synth_field(&g, &k, 9).unwrap();
        let b = synth_field(&g, &k, 9).unwrap();
        let c = synth_field(&g, &k, 10).unwrap();
        assert_eq!(a.data(), b.data());
        assert_ne!(a.data(), c.data());
        assert_eq!(a.meta.seed, Some(9));
    }

    #[test]
    fn hermitian_spectrum_is_preserved() {
        let g = PeriodicGrid::snapshot(2, 32).unwrap();
        let f = random_scalar(&g, 1.5, 4);
        let sp = Spectral::for_grid(&g);
        let s = sp.forward(&f);
        for (idx, v) in s.iter().enumerate() {
            let k = sp.k(idx);
            if k[0].abs() == 16 || k[1] == 16 || (k[0] == 0 && k[1] == 0) {
                continue;
            }
            let want = sp.kmag_lattice(idx).powf(-1.5);
            assert!((v.norm() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn solenoidal_is_divergence_free() {
        let g = PeriodicGrid::snapshot(2, 32).unwrap();
        let f = synth_field(&g, &SynthKind::RandomSolenoidal { sigma: 1.0 / 3.0 }, 1).unwrap();
        let sp = Spectral::for_grid(&g);
        let div = sp.divergence(&f.frame_components(0));
        assert!(div.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn perturbed_taylor_green_is_solenoidal_and_band_limited() {
        let g = PeriodicGrid::snapshot(2, 32).unwrap();
        let kind = SynthKind::PerturbedTaylorGreen { amplitude: 0.1, kmax: 4.0 };
        let f = synth_field(&g, &kind, 3).unwrap();
        let tg = synth_field(&g, &SynthKind::TaylorGreen, 0).unwrap();
        let sp = Spectral::for_grid(&g);
        assert!(sp.divergence(&f.frame_components(0)).iter().all(|v| v.abs() < 1e-10));
        let diff: Vec<f64> = f.data().iter().zip(tg.data()).map(|(a, b)| a - b).collect();
        let ms = diff.iter().map(|x| x * x).sum::<f64>() / g.points() as f64;
        assert!((ms.sqrt() - 0.1 * 0.5f64.sqrt()).abs() < 1e-12);
        let s = sp.forward(&diff[..g.points()]);
        for (idx, v) in s.iter().enumerate() {
            if sp.kmag_lattice(idx) > 4.0 {
                assert!(v.norm() < 1e-10);
            }
        }
        let same = SynthKind::PerturbedTaylorGreen { amplitude: 0.0, kmax: 4.0 };
        assert_eq!(synth_field(&g, &same, 3).unwrap().data(), tg.data());
    }
}

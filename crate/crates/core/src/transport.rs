//! Scalar and Burgers analogues of the coarse-grained energy balance.
//!
//! For `∂_t θ + v·∇θ = κΔθ` with `w = θ − θ_ℓ` and `V = v − v_ℓ`:
//!
//! ```text
//! Ẽ = w²/2,  Q̃ = Ẽ V,  R̃ = θ_ℓ v_ℓ − (θv)_ℓ,  C̃ = w (V·∇θ_ℓ + div R̃),
//! −D̃ = (∂_t + v_ℓ·∇ − κΔ)Ẽ + div Q̃ + C̃ + κ|∇w|².
//! ```
//!
//! For viscous Burgers `∂_t u + ∂_x(u²/2) = ν∂_xx u`:
//!
//! ```text
//! E = w²/2,  Q = w³/3,  R = u_ℓ² − (u²)_ℓ,  C = w ∂_x R / 2 + w² ∂_x u_ℓ,
//! −D = (∂_t + u_ℓ∂_x − ν∂_xx)E + ∂_x Q + C + ν(∂_x w)².
//! ```

use crate::duchon_robert::{dot, ordered_sum, residual_rows, time_weights, Balance, EnergyFrame, FrameTerms, IdentityRow};
use crate::error::{Error, Result};
use crate::fields::{PeriodicGrid, SpaceTimeField, Spectral};
use crate::mollify::{mollify_array, Mollifier};
use crate::solvers::Velocity;
use crate::testfn::{check_support, TestFunctional};

fn check_scalar(theta: &SpaceTimeField, vel: Velocity<'_>) -> Result<PeriodicGrid> {
    let g = *theta.grid();
    if theta.components() != 1 {
        return Err(Error::InvalidField("scalar movie must have one component".into()));
    }
    let v = vel.field();
    if !v.grid().same_space(&g) || v.components() != g.d {
        return Err(Error::GridMismatch("velocity and scalar live on different grids".into()));
    }
    if let Velocity::Movie(f) = vel {
        if f.nt() != g.nt || (f.grid().dt - g.dt).abs() > 1e-12 * g.dt.max(1.0) {
            return Err(Error::GridMismatch("velocity movie must share the scalar's frames".into()));
        }
    }
    Ok(g)
}

fn velocity_frame(g: &PeriodicGrid, vel: Velocity<'_>, it: usize) -> Vec<Vec<f64>> {
    match vel {
        Velocity::Steady(f) => f.frame_components(0),
        Velocity::Movie(_) => vel.at(g.time(it)),
    }
}

/// `θ²/2`, `θ²/2 v` and `|∇θ|²` of one frame.
pub fn scalar_energy_frame(g: &PeriodicGrid, theta: &[f64], v: &[Vec<f64>]) -> EnergyFrame {
    let sp = Spectral::for_grid(g);
    let e: Vec<f64> = theta.iter().map(|t| 0.5 * t * t).collect();
    let flux = v.iter().map(|c| e.iter().zip(c).map(|(a, b)| a * b).collect()).collect();
    let mut gradsq = vec![0.0; theta.len()];
    for gr in sp.gradient(theta) {
        for (a, x) in gradsq.iter_mut().zip(gr) {
            *a += x * x;
        }
    }
    EnergyFrame { e, flux, gradsq }
}

/// `u²/2`, `u³/3` and `u_x²` of one frame.
pub fn burgers_energy_frame(g: &PeriodicGrid, u: &[f64]) -> EnergyFrame {
    let sp = Spectral::for_grid(g);
    let e = u.iter().map(|x| 0.5 * x * x).collect();
    let flux = vec![u.iter().map(|x| x * x * x / 3.0).collect()];
    let gradsq = sp.derivative_real(u, 0).into_iter().map(|x| x * x).collect();
    EnergyFrame { e, flux, gradsq }
}

/// Scalar decomposition of one frame; `r` holds the `d` components of `R̃`.
pub fn transport_frame_terms(g: &PeriodicGrid, theta: &[f64], v: &[Vec<f64>], ell: f64) -> Result<FrameTerms> {
    let m = Mollifier::space(ell);
    let sp = Spectral::for_grid(g);
    let np = g.points();
    let tl = mollify_array(g, theta, &m)?;
    let vl: Vec<Vec<f64>> = v.iter().map(|c| mollify_array(g, c, &m)).collect::<Result<_>>()?;
    let w: Vec<f64> = theta.iter().zip(&tl).map(|(a, b)| a - b).collect();
    let big_v: Vec<Vec<f64>> = v.iter().zip(&vl).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    let e: Vec<f64> = w.iter().map(|x| 0.5 * x * x).collect();
    let q_flux = big_v.iter().map(|c| e.iter().zip(c).map(|(a, b)| a * b).collect()).collect();
    let mut r = Vec::with_capacity(g.d);
    for (a, c) in v.iter().enumerate() {
        let prod: Vec<f64> = theta.iter().zip(c).map(|(x, y)| x * y).collect();
        let pl = mollify_array(g, &prod, &m)?;
        r.push((0..np).map(|p| tl[p] * vl[a][p] - pl[p]).collect::<Vec<f64>>());
    }
    let div_r = sp.divergence(&r);
    let grad_tl = sp.gradient(&tl);
    let c = (0..np)
        .map(|p| w[p] * ((0..g.d).map(|a| big_v[a][p] * grad_tl[a][p]).sum::<f64>() + div_r[p]))
        .collect();
    let div_ul = sp.divergence(&vl);
    let mut grad_diff_sq = vec![0.0; np];
    for gr in sp.gradient(&w) {
        for (a, x) in grad_diff_sq.iter_mut().zip(gr) {
            *a += x * x;
        }
    }
    Ok(FrameTerms { e, q_flux, r, c, ul: vl, div_ul, gradsq_ell: Vec::new(), cross: Vec::new(), grad_diff_sq })
}

/// Burgers decomposition of one frame.
pub fn burgers_frame_terms(g: &PeriodicGrid, u: &[f64], ell: f64) -> Result<FrameTerms> {
    let m = Mollifier::space(ell);
    let sp = Spectral::for_grid(g);
    let ul = mollify_array(g, u, &m)?;
    let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
    let sql = mollify_array(g, &sq, &m)?;
    let w: Vec<f64> = u.iter().zip(&ul).map(|(a, b)| a - b).collect();
    let r: Vec<f64> = ul.iter().zip(&sql).map(|(a, b)| a * a - b).collect();
    let rx = sp.derivative_real(&r, 0);
    let ulx = sp.derivative_real(&ul, 0);
    let e = w.iter().map(|x| 0.5 * x * x).collect();
    let q_flux = vec![w.iter().map(|x| x * x * x / 3.0).collect()];
    let c = (0..w.len()).map(|p| 0.5 * w[p] * rx[p] + w[p] * w[p] * ulx[p]).collect();
    let grad_diff_sq = sp.derivative_real(&w, 0).into_iter().map(|x| x * x).collect();
    Ok(FrameTerms { e, q_flux, r: vec![r], c, ul: vec![ul], div_ul: ulx, gradsq_ell: Vec::new(), cross: Vec::new(), grad_diff_sq })
}

fn pairings_with(
    g: &PeriodicGrid,
    nu: f64,
    phis: &[&dyn TestFunctional],
    balance: Balance,
    energy: impl Fn(usize) -> EnergyFrame + Sync + Send,
) -> Result<Vec<f64>> {
    let mut lo = g.nt;
    let mut hi = 0;
    for phi in phis {
        let s = check_support(*phi, g, 0..g.nt)?;
        lo = lo.min(s.start);
        hi = hi.max(s.end);
    }
    let w = time_weights(g);
    let cell = g.cell_volume();
    ordered_sum(lo..hi.max(lo), phis.len(), |it| {
        let ef = energy(it);
        Ok(phis
            .iter()
            .map(|phi| {
                if phi.support(g).contains(&it) {
                    w[it] * ef.pair(&phi.frame(g, it), nu, balance, cell)
                } else {
                    0.0
                }
            })
            .collect())
    })
}

/// `⟨D̃, φ⟩` (or the total `⟨D̃ + κ|∇θ|², φ⟩`) for each test function.
pub fn scalar_pairings(
    theta: &SpaceTimeField,
    vel: Velocity<'_>,
    kappa: f64,
    phis: &[&dyn TestFunctional],
    balance: Balance,
) -> Result<Vec<f64>> {
    let g = check_scalar(theta, vel)?;
    pairings_with(&g, kappa, phis, balance, |it| scalar_energy_frame(&g, theta.component(it, 0), &velocity_frame(&g, vel, it)))
}

/// `∫∫ κ|∇θ|² φ`, the viscous part of the scalar balance.
pub fn scalar_dissipation_pairing(theta: &SpaceTimeField, kappa: f64, phi: &dyn TestFunctional) -> Result<f64> {
    let g = *theta.grid();
    let s = check_support(phi, &g, 0..g.nt)?;
    let w = time_weights(&g);
    let cell = g.cell_volume();
    let sp = Spectral::for_grid(&g);
    let v = ordered_sum(s, 1, |it| {
        let f = phi.frame(&g, it);
        let grads = sp.gradient(theta.component(it, 0));
        let sq: Vec<f64> = (0..g.points()).map(|p| grads.iter().map(|gr| gr[p] * gr[p]).sum()).collect();
        Ok(vec![w[it] * kappa * dot(&sq, &f.value) * cell])
    })?;
    Ok(v[0])
}

pub fn transport_identity_residuals(
    theta: &SpaceTimeField,
    vel: Velocity<'_>,
    kappa: f64,
    ells: &[f64],
    phis: &[&dyn TestFunctional],
) -> Result<Vec<IdentityRow>> {
    let g = check_scalar(theta, vel)?;
    residual_rows(&g, kappa, ells, phis, |it| {
        let th = theta.component(it, 0).to_vec();
        let v = velocity_frame(&g, vel, it);
        let ef = scalar_energy_frame(&g, &th, &v);
        Ok((ef, move |ell| transport_frame_terms(&g, &th, &v, ell)))
    })
}

pub fn transport_identity_residual(
    theta: &SpaceTimeField,
    vel: Velocity<'_>,
    kappa: f64,
    ell: f64,
    phi: &dyn TestFunctional,
) -> Result<f64> {
    Ok(transport_identity_residuals(theta, vel, kappa, &[ell], &[phi])?[0].residual)
}

fn check_burgers(u: &SpaceTimeField) -> Result<PeriodicGrid> {
    let g = *u.grid();
    if g.d != 1 || u.components() != 1 {
        return Err(Error::InvalidField("Burgers movie must be scalar and one-dimensional".into()));
    }
    Ok(g)
}

/// `⟨D, φ⟩` or `⟨𝓔, φ⟩` for a Burgers movie.
pub fn burgers_pairings(u: &SpaceTimeField, nu: f64, phis: &[&dyn TestFunctional], balance: Balance) -> Result<Vec<f64>> {
    let g = check_burgers(u)?;
    pairings_with(&g, nu, phis, balance, |it| burgers_energy_frame(&g, u.component(it, 0)))
}

pub fn burgers_identity_residuals(u: &SpaceTimeField, nu: f64, ells: &[f64], phis: &[&dyn TestFunctional]) -> Result<Vec<IdentityRow>> {
    let g = check_burgers(u)?;
    residual_rows(&g, nu, ells, phis, |it| {
        let uf = u.component(it, 0).to_vec();
        let ef = burgers_energy_frame(&g, &uf);
        Ok((ef, move |ell| burgers_frame_terms(&g, &uf, ell)))
    })
}

/// `ν∫u_x²` at frame `it`, the instantaneous viscous dissipation.
pub fn burgers_dissipation(u: &SpaceTimeField, nu: f64, it: usize) -> Result<f64> {
    let g = check_burgers(u)?;
    let sp = Spectral::for_grid(&g);
    let ux = sp.derivative_real(u.component(it, 0), 0);
    Ok(nu * ux.iter().map(|x| x * x).sum::<f64>() * g.cell_volume())
}

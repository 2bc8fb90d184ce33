//! Weak energy balance, its coarse-grained decomposition and the
//! mollification rates of the dissipation defect.
//!
//! For a velocity movie `u` with pressure `q` and viscosity `ν`, the defect
//! `D` is the distribution
//!
//! ```text
//! ⟨D, φ⟩ = ∫∫ |u|²/2 (∂_t + νΔ)φ + (|u|²/2 + q) u·∇φ − ν|∇u|² φ,
//! ```
//!
//! and `𝓔 = D + ν|∇u|²` drops the last term. With `w = u − u_ℓ` the terms
//!
//! ```text
//! E = |w|²/2,  Q = (E + q − q_ℓ) w,  R = u_ℓ⊗u_ℓ − (u⊗u)_ℓ,
//! C = w·div R + w⊗w : ∇u_ℓ
//! ```
//!
//! satisfy, for every `ℓ`,
//! `−D = (∂_t + u_ℓ·∇ − νΔ)E + div Q + C + ν|∇(u_ℓ − u)|²`. Both sides are
//! evaluated against test functions with every time derivative on `φ`.
//! Space integrals use the grid quadrature, time integrals the trapezoid
//! rule over saved frames.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{fit_power_law, PeriodicGrid, ScalingFit, SpaceTimeField, Spectral, C64};
use crate::mollify::{convolve, spatial_multiplier, sym_index, Mollifier};
use crate::testfn::{check_support, MollifiedSeparable, Separable, TestFrame, TestFunctional};

/// Zero-mean solution of `−Δq = div div(u⊗u)` with the products truncated
/// by the 2/3 rule.
pub fn solve_pressure(g: &PeriodicGrid, u: &[Vec<f64>]) -> Result<Vec<f64>> {
    if u.len() != g.d {
        return Err(Error::InvalidField(format!("velocity needs {} components, got {}", g.d, u.len())));
    }
    let sp = Spectral::for_grid(g);
    let div = sp.divergence(u);
    let gscale: f64 = u
        .iter()
        .enumerate()
        .map(|(a, c)| sp.derivative_real(c, a).iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .sum();
    let dmax = div.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if dmax > 1e-8 * (1.0 + gscale) {
        return Err(Error::InvalidField(format!("velocity is not divergence-free (max |div u| = {dmax:.3e})")));
    }
    let mut acc = vec![C64::new(0.0, 0.0); sp.len()];
    for i in 0..g.d {
        for j in i..g.d {
            let prod: Vec<f64> = u[i].iter().zip(&u[j]).map(|(a, b)| a * b).collect();
            let mut s = sp.forward(&prod);
            sp.dealias(&mut s);
            let mult = if i == j { 1.0 } else { 2.0 };
            for (idx, (a, v)) in acc.iter_mut().zip(s).enumerate() {
                let ki = sp.kphys(idx, i);
                let kj = sp.kphys(idx, j);
                let k2 = sp.k2(idx);
                if k2 > 0.0 && !sp.is_nyquist(idx, i) && !sp.is_nyquist(idx, j) {
                    *a -= v * (mult * ki * kj / k2);
                }
            }
        }
    }
    acc[0] = C64::new(0.0, 0.0);
    Ok(sp.inverse(acc))
}

/// Pressure of every frame of a velocity movie.
pub fn pressure_movie(u: &SpaceTimeField) -> Result<SpaceTimeField> {
    let g = *u.grid();
    let frames: Vec<Vec<f64>> = (0..g.nt)
        .into_par_iter()
        .map(|it| solve_pressure(&g, &u.frame_components(it)))
        .collect::<Result<_>>()?;
    let mut meta = u.meta.clone();
    meta.name = format!("{}:pressure", meta.name);
    SpaceTimeField::new(g, 1, frames.concat(), meta)
}

/// Which balance a pairing measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balance {
    /// The defect `D`.
    Defect,
    /// The total dissipation `𝓔 = D + ν|∇u|²`.
    Total,
}

/// Trapezoid weights in time.
pub fn time_weights(g: &PeriodicGrid) -> Vec<f64> {
    if g.nt == 1 {
        return vec![g.dt];
    }
    (0..g.nt)
        .map(|it| if it == 0 || it == g.nt - 1 { 0.5 * g.dt } else { g.dt })
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sums `f(it)` over `frames` in parallel, returning per-frame vectors
/// added in frame order.
pub(crate) fn ordered_sum(frames: std::ops::Range<usize>, width: usize, f: impl Fn(usize) -> Result<Vec<f64>> + Sync + Send) -> Result<Vec<f64>> {
    let parts: Vec<Vec<f64>> = frames.into_par_iter().map(f).collect::<Result<_>>()?;
    let mut acc = vec![0.0; width];
    for p in parts {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    Ok(acc)
}

/// Frame-local integrand of the weak energy balance.
#[derive(Clone, Debug)]
pub struct EnergyFrame {
    /// `|u|²/2`
    pub e: Vec<f64>,
    /// `(|u|²/2 + q) u`
    pub flux: Vec<Vec<f64>>,
    /// `|∇u|²`
    pub gradsq: Vec<f64>,
}

impl EnergyFrame {
    pub fn new(g: &PeriodicGrid, u: &[Vec<f64>], q: &[f64]) -> Self {
        let sp = Spectral::for_grid(g);
        let grads: Vec<Vec<Vec<f64>>> = u.iter().map(|c| sp.gradient(c)).collect();
        Self::with_gradient(g, u, q, &grads)
    }

    /// Same as [`EnergyFrame::new`] with `∇u` supplied, `grad[i][j] = ∂_j u_i`.
    pub fn with_gradient(g: &PeriodicGrid, u: &[Vec<f64>], q: &[f64], grad: &[Vec<Vec<f64>>]) -> Self {
        let np = g.points();
        let e: Vec<f64> = (0..np).map(|i| 0.5 * u.iter().map(|c| c[i] * c[i]).sum::<f64>()).collect();
        let flux = u.iter().map(|c| (0..np).map(|i| (e[i] + q[i]) * c[i]).collect()).collect();
        let mut gradsq = vec![0.0; np];
        for gr in grad.iter().flatten() {
            for (a, v) in gradsq.iter_mut().zip(gr) {
                *a += v * v;
            }
        }
        Self { e, flux, gradsq }
    }

    /// `∫ e(∂_t + νΔ)φ + flux·∇φ [− ν|∇u|²φ]` over one frame.
    pub fn pair(&self, phi: &TestFrame, nu: f64, balance: Balance, cell: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..self.e.len() {
            s += self.e[i] * (phi.dt[i] + nu * phi.lap[i]);
        }
        for (f, gphi) in self.flux.iter().zip(&phi.grad) {
            s += dot(f, gphi);
        }
        if balance == Balance::Defect && nu != 0.0 {
            s -= nu * dot(&self.gradsq, &phi.value);
        }
        s * cell
    }
}

fn pressure_frame(g: &PeriodicGrid, u: &SpaceTimeField, q: Option<&SpaceTimeField>, it: usize) -> Result<Vec<f64>> {
    match q {
        Some(q) => Ok(q.component(it, 0).to_vec()),
        None => solve_pressure(g, &u.frame_components(it)),
    }
}

fn check_velocity(u: &SpaceTimeField, q: Option<&SpaceTimeField>) -> Result<PeriodicGrid> {
    let g = *u.grid();
    if u.components() != g.d {
        return Err(Error::InvalidField(format!("velocity needs {} components, got {}", g.d, u.components())));
    }
    if let Some(q) = q {
        if q.grid() != u.grid() || q.components() != 1 {
            return Err(Error::GridMismatch("pressure movie does not match the velocity".into()));
        }
    }
    Ok(g)
}

/// Energy integrand of every frame, for repeated pairings.
#[derive(Clone, Debug)]
pub struct EnergyIntegrand {
    pub grid: PeriodicGrid,
    pub nu: f64,
    pub frames: Vec<EnergyFrame>,
}

impl EnergyIntegrand {
    pub fn new(u: &SpaceTimeField, q: Option<&SpaceTimeField>, nu: f64) -> Result<Self> {
        let g = check_velocity(u, q)?;
        let frames = (0..g.nt)
            .into_par_iter()
            .map(|it| Ok(EnergyFrame::new(&g, &u.frame_components(it), &pressure_frame(&g, u, q, it)?)))
            .collect::<Result<_>>()?;
        Ok(Self { grid: g, nu, frames })
    }

    pub fn pair(&self, phi: &dyn TestFunctional, balance: Balance) -> Result<f64> {
        let g = self.grid;
        let support = check_support(phi, &g, 0..g.nt)?;
        let w = time_weights(&g);
        let cell = g.cell_volume();
        let v = ordered_sum(support, 1, |it| {
            let f = phi.frame(&g, it);
            Ok(vec![w[it] * self.frames[it].pair(&f, self.nu, balance, cell)])
        })?;
        Ok(v[0])
    }
}

/// `⟨D, φ⟩` (or `⟨𝓔, φ⟩`) for each test function, streaming over frames.
pub fn dr_pairings(
    u: &SpaceTimeField,
    q: Option<&SpaceTimeField>,
    nu: f64,
    phis: &[&dyn TestFunctional],
    balance: Balance,
) -> Result<Vec<f64>> {
    let g = check_velocity(u, q)?;
    let mut lo = g.nt;
    let mut hi = 0;
    for phi in phis {
        let s = check_support(*phi, &g, 0..g.nt)?;
        lo = lo.min(s.start);
        hi = hi.max(s.end);
    }
    if lo >= hi {
        return Ok(vec![0.0; phis.len()]);
    }
    let w = time_weights(&g);
    let cell = g.cell_volume();
    ordered_sum(lo..hi, phis.len(), |it| {
        let ef = EnergyFrame::new(&g, &u.frame_components(it), &pressure_frame(&g, u, q, it)?);
        Ok(phis
            .iter()
            .map(|phi| {
                if phi.support(&g).contains(&it) {
                    w[it] * ef.pair(&phi.frame(&g, it), nu, balance, cell)
                } else {
                    0.0
                }
            })
            .collect())
    })
}

pub fn dr_pairing(u: &SpaceTimeField, q: Option<&SpaceTimeField>, nu: f64, phi: &dyn TestFunctional) -> Result<f64> {
    Ok(dr_pairings(u, q, nu, &[phi], Balance::Defect)?[0])
}

/// Decomposition fields of one frame.
#[derive(Clone, Debug)]
pub struct FrameTerms {
    pub e: Vec<f64>,
    pub q_flux: Vec<Vec<f64>>,
    /// Upper-triangular storage, see [`crate::mollify::sym_index`].
    pub r: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub ul: Vec<Vec<f64>>,
    pub div_ul: Vec<f64>,
    /// `|∇u_ℓ|²`
    pub gradsq_ell: Vec<f64>,
    /// `∇u : ∇u_ℓ`
    pub cross: Vec<f64>,
    /// `|∇(u_ℓ − u)|²`
    pub grad_diff_sq: Vec<f64>,
}

pub fn frame_terms(g: &PeriodicGrid, u: &[Vec<f64>], q: &[f64], ell: f64) -> Result<FrameTerms> {
    FrameSpectra::new(g, u, q).terms(g, u, q, ell)
}

/// Scale-independent transforms of one frame, shared across `ℓ`.
pub struct FrameSpectra {
    u_hat: Vec<Vec<C64>>,
    q_hat: Vec<C64>,
    prod_hat: Vec<Vec<C64>>,
    grad_u: Vec<Vec<Vec<f64>>>,
}

impl FrameSpectra {
    pub fn new(g: &PeriodicGrid, u: &[Vec<f64>], q: &[f64]) -> Self {
        let sp = Spectral::for_grid(g);
        let d = u.len();
        let u_hat: Vec<Vec<C64>> = u.iter().map(|c| sp.forward(c)).collect();
        let mut prod_hat = vec![Vec::new(); d * (d + 1) / 2];
        for i in 0..d {
            for j in i..d {
                let prod: Vec<f64> = u[i].iter().zip(&u[j]).map(|(a, b)| a * b).collect();
                prod_hat[sym_index(i, j, d)] = sp.forward(&prod);
            }
        }
        let grad_u = u_hat
            .iter()
            .map(|s| (0..g.d).map(|a| sp.inverse(sp.derivative(s, a))).collect())
            .collect();
        Self { u_hat, q_hat: sp.forward(q), prod_hat, grad_u }
    }

    pub fn energy(&self, g: &PeriodicGrid, u: &[Vec<f64>], q: &[f64]) -> EnergyFrame {
        EnergyFrame::with_gradient(g, u, q, &self.grad_u)
    }

    pub fn terms(&self, g: &PeriodicGrid, u: &[Vec<f64>], q: &[f64], ell: f64) -> Result<FrameTerms> {
        let m = Mollifier::space(ell);
        let mult = spatial_multiplier(g, &m)?;
        let sp = Spectral::for_grid(g);
        let d = u.len();
        let np = g.points();
        let smooth = |s: &[C64]| -> Vec<C64> {
            match &mult {
                Some(k) => s.iter().zip(k.iter()).map(|(v, m)| v * m).collect(),
                None => s.to_vec(),
            }
        };
        let ul_hat: Vec<Vec<C64>> = self.u_hat.iter().map(|s| smooth(s)).collect();
        let ul: Vec<Vec<f64>> = ul_hat.iter().map(|s| sp.inverse(s.clone())).collect();
        let ql = sp.inverse(smooth(&self.q_hat));
        let w: Vec<Vec<f64>> = u.iter().zip(&ul).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
        let e: Vec<f64> = (0..np).map(|i| 0.5 * w.iter().map(|c| c[i] * c[i]).sum::<f64>()).collect();
        let q_flux = w.iter().map(|wc| (0..np).map(|i| (e[i] + q[i] - ql[i]) * wc[i]).collect()).collect();
        let mut r = vec![Vec::new(); d * (d + 1) / 2];
        let mut r_hat = vec![Vec::new(); d * (d + 1) / 2];
        for i in 0..d {
            for j in i..d {
                let k = sym_index(i, j, d);
                let pl = sp.inverse(smooth(&self.prod_hat[k]));
                let rij: Vec<f64> = (0..np).map(|p| ul[i][p] * ul[j][p] - pl[p]).collect();
                r_hat[k] = sp.forward(&rij);
                r[k] = rij;
            }
        }
        let grad_ul: Vec<Vec<Vec<f64>>> = ul_hat
            .iter()
            .map(|s| (0..g.d).map(|a| sp.inverse(sp.derivative(s, a))).collect())
            .collect();
        let mut c = vec![0.0; np];
        for i in 0..d {
            let mut acc = vec![C64::new(0.0, 0.0); sp.len()];
            for j in 0..d {
                for (a, v) in acc.iter_mut().zip(sp.derivative(&r_hat[sym_index(i, j, d)], j)) {
                    *a += v;
                }
            }
            let div_r = sp.inverse(acc);
            for p in 0..np {
                let mut s = w[i][p] * div_r[p];
                for j in 0..d {
                    s += w[i][p] * w[j][p] * grad_ul[i][j][p];
                }
                c[p] += s;
            }
        }
        let mut div_ul = vec![0.0; np];
        let mut gradsq_ell = vec![0.0; np];
        let mut cross = vec![0.0; np];
        let mut grad_diff_sq = vec![0.0; np];
        for i in 0..d {
            for j in 0..d {
                let (gu, gl) = (&self.grad_u[i][j], &grad_ul[i][j]);
                for p in 0..np {
                    let (a, b) = (gu[p], gl[p]);
                    gradsq_ell[p] += b * b;
                    cross[p] += a * b;
                    grad_diff_sq[p] += (b - a) * (b - a);
                }
            }
            for (a, v) in div_ul.iter_mut().zip(&grad_ul[i][i]) {
                *a += v;
            }
        }
        Ok(FrameTerms { e, q_flux, r, c, ul, div_ul, gradsq_ell, cross, grad_diff_sq })
    }
}

/// Materialized decomposition of a movie at one scale.
#[derive(Clone, Debug)]
pub struct DecompositionTerms {
    pub ell: f64,
    pub e: SpaceTimeField,
    pub q: SpaceTimeField,
    pub r: SpaceTimeField,
    pub c: SpaceTimeField,
    /// `|∇u_ℓ|²` and `∇u:∇u_ℓ`, present when `ν > 0`.
    pub gradsq_ell: Option<SpaceTimeField>,
    pub cross: Option<SpaceTimeField>,
}

pub fn decomposition_terms(u: &SpaceTimeField, q: Option<&SpaceTimeField>, ell: f64, nu: f64) -> Result<DecompositionTerms> {
    let g = check_velocity(u, q)?;
    if !(ell >= 0.0) || ell > g.length / 2.0 {
        return Err(Error::OutOfRange(format!("ℓ = {ell} outside [0, L/2]")));
    }
    let per: Vec<FrameTerms> = (0..g.nt)
        .into_par_iter()
        .map(|it| frame_terms(&g, &u.frame_components(it), &pressure_frame(&g, u, q, it)?, ell))
        .collect::<Result<_>>()?;
    let stack = |pick: &dyn Fn(&FrameTerms) -> Vec<&Vec<f64>>, name: &str| -> Result<SpaceTimeField> {
        let comps = pick(&per[0]).len();
        let mut data = Vec::with_capacity(g.nt * comps * g.points());
        for t in &per {
            for c in pick(t) {
                data.extend_from_slice(c);
            }
        }
        let mut meta = u.meta.clone();
        meta.name = format!("{}:{name}", u.meta.name);
        SpaceTimeField::new(g, comps, data, meta)
    };
    let viscous = nu > 0.0;
    Ok(DecompositionTerms {
        ell,
        e: stack(&|t| vec![&t.e], "E")?,
        q: stack(&|t| t.q_flux.iter().collect(), "Q")?,
        r: stack(&|t| t.r.iter().collect(), "R")?,
        c: stack(&|t| vec![&t.c], "C")?,
        gradsq_ell: if viscous { Some(stack(&|t| vec![&t.gradsq_ell], "gradsq_ell")?) } else { None },
        cross: if viscous { Some(stack(&|t| vec![&t.cross], "cross")?) } else { None },
    })
}

/// One row of an identity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub phi_id: String,
    pub delta: f64,
    pub ell: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

pub fn identity_csv(rows: &[IdentityRow]) -> String {
    let mut s = String::from("phi_id,delta,ell,lhs,rhs,residual\n");
    for r in rows {
        s.push_str(&format!("{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n", r.phi_id, r.delta, r.ell, r.lhs, r.rhs, r.residual));
    }
    s
}

/// `|a − b| / (|a| + |b| + guard)`, zero when everything vanishes.
pub fn relative_residual(lhs: f64, rhs: f64, guard: f64) -> f64 {
    let den = lhs.abs() + rhs.abs() + guard;
    if den == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / den
    }
}

/// Per-frame contributions `(lhs, rhs, ‖Q‖₁, ‖C‖₁)` for one test frame.
struct SideSums {
    lhs: f64,
    rhs: f64,
    q1: f64,
    c1: f64,
}

fn sides(ef: &EnergyFrame, t: &FrameTerms, phi: &TestFrame, nu: f64, cell: f64) -> SideSums {
    let lhs = -ef.pair(phi, nu, Balance::Defect, cell);
    let np = t.e.len();
    let d = t.ul.len();
    let mut rhs = 0.0;
    let mut q1 = 0.0;
    let mut c1 = 0.0;
    for p in 0..np {
        let mut adv = phi.value[p] * t.div_ul[p];
        let mut qg = 0.0;
        let mut qn = 0.0;
        for a in 0..d {
            adv += t.ul[a][p] * phi.grad[a][p];
            qg += t.q_flux[a][p] * phi.grad[a][p];
            qn += t.q_flux[a][p] * t.q_flux[a][p];
        }
        rhs += -t.e[p] * (phi.dt[p] + adv + nu * phi.lap[p]) - qg
            + t.c[p] * phi.value[p]
            + nu * t.grad_diff_sq[p] * phi.value[p];
        q1 += qn.sqrt();
        c1 += t.c[p].abs();
    }
    SideSums { lhs, rhs: rhs * cell, q1: q1 * cell, c1: c1 * cell }
}

/// Both sides of the decomposition identity for every `(ℓ, φ)` pair.
pub fn identity_residuals(
    u: &SpaceTimeField,
    q: Option<&SpaceTimeField>,
    nu: f64,
    ells: &[f64],
    phis: &[&dyn TestFunctional],
) -> Result<Vec<IdentityRow>> {
    let g = check_velocity(u, q)?;
    residual_rows(&g, nu, ells, phis, |it| {
        let comps = u.frame_components(it);
        let qf = pressure_frame(&g, u, q, it)?;
        let fs = FrameSpectra::new(&g, &comps, &qf);
        let ef = fs.energy(&g, &comps, &qf);
        Ok((ef, move |ell| fs.terms(&g, &comps, &qf, ell)))
    })
}

/// Streams both sides of a decomposition identity. `setup(it)` returns the
/// energy integrand of frame `it` and a builder of its terms at scale `ℓ`.
pub(crate) fn residual_rows<S, T>(
    g: &PeriodicGrid,
    nu: f64,
    ells: &[f64],
    phis: &[&dyn TestFunctional],
    setup: S,
) -> Result<Vec<IdentityRow>>
where
    S: Fn(usize) -> Result<(EnergyFrame, T)> + Sync + Send,
    T: Fn(f64) -> Result<FrameTerms>,
{
    let mut lo = g.nt;
    let mut hi = 0;
    for phi in phis {
        let s = check_support(*phi, g, 0..g.nt)?;
        lo = lo.min(s.start);
        hi = hi.max(s.end);
    }
    let w = time_weights(g);
    let cell = g.cell_volume();
    let np_pairs = ells.len() * phis.len();
    let sums = ordered_sum(lo..hi.max(lo), 4 * np_pairs, |it| {
        let (ef, terms) = setup(it)?;
        let frames: Vec<Option<TestFrame>> = phis
            .iter()
            .map(|phi| phi.support(g).contains(&it).then(|| phi.frame(g, it)))
            .collect();
        let mut out = vec![0.0; 4 * np_pairs];
        for (li, &ell) in ells.iter().enumerate() {
            let t = terms(ell)?;
            for (pi, f) in frames.iter().enumerate() {
                if let Some(f) = f {
                    let s = sides(&ef, &t, f, nu, cell);
                    let k = 4 * (li * phis.len() + pi);
                    out[k] = w[it] * s.lhs;
                    out[k + 1] = w[it] * s.rhs;
                    out[k + 2] = w[it] * s.q1;
                    out[k + 3] = w[it] * s.c1;
                }
            }
        }
        Ok(out)
    })?;
    let mut rows = Vec::with_capacity(np_pairs);
    for (li, &ell) in ells.iter().enumerate() {
        for (pi, phi) in phis.iter().enumerate() {
            let k = 4 * (li * phis.len() + pi);
            let guard = sums[k + 2].max(sums[k + 3]) * phi.sup_norm(g);
            rows.push(IdentityRow {
                phi_id: phi.id(),
                delta: 0.0,
                ell,
                lhs: sums[k],
                rhs: sums[k + 1],
                residual: relative_residual(sums[k], sums[k + 1], guard),
            });
        }
    }
    Ok(rows)
}

pub fn identity_residual(u: &SpaceTimeField, q: Option<&SpaceTimeField>, nu: f64, ell: f64, phi: &dyn TestFunctional) -> Result<f64> {
    Ok(identity_residuals(u, q, nu, &[ell], &[phi])?[0].residual)
}

/// Pairings of the defect against `φ − φ∗ρ_δ` and `φ∗ρ_δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub delta: f64,
    /// Mean over test functions of `|⟨D − D∗ρ_δ, φ⟩|`.
    pub remainder: f64,
    /// Mean over test functions of `|⟨D∗ρ_δ, φ⟩|`.
    pub mollified: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrRates {
    pub sigma: f64,
    pub points: Vec<RatePoint>,
    pub remainder_fit: Option<ScalingFit>,
    pub mollified_fit: Option<ScalingFit>,
    /// Predicted exponents of the two pairings.
    pub predicted: (f64, f64),
    /// Both pairings sit at the quadrature floor.
    pub trivial: bool,
    pub pass: bool,
}

/// Slack for one-sided exponent comparisons.
pub const RATE_SLACK: f64 = 0.15;

/// Pairings below this fraction of `max e · |Ω| · T` count as quadrature noise.
pub const TRIVIAL_FLOOR: f64 = 1e-9;

/// Measures the two pairings over `deltas`, with space-time mollifiers of
/// temporal radius `time_ratio · δ`, averaged over `phis`, against the
/// predicted exponents `(2σ/(1−σ), 2σ/(1−σ) − 1)`.
pub fn dr_mollification_rates(
    integrand: &EnergyIntegrand,
    balance: Balance,
    phis: &[Separable],
    deltas: &[f64],
    time_ratio: f64,
    sigma: f64,
) -> Result<DrRates> {
    let a = 2.0 * sigma / (1.0 - sigma);
    mollification_rates_with(integrand, balance, phis, deltas, time_ratio, sigma, (a, a - 1.0))
}

/// Same measurement with caller-supplied predictions.
pub fn mollification_rates_with(
    integrand: &EnergyIntegrand,
    balance: Balance,
    phis: &[Separable],
    deltas: &[f64],
    time_ratio: f64,
    sigma: f64,
    predicted: (f64, f64),
) -> Result<DrRates> {
    if deltas.len() < 4 {
        return Err(Error::param("at least four scales δ required"));
    }
    if phis.is_empty() {
        return Err(Error::param("at least one test function required"));
    }
    let g = integrand.grid;
    let base: Vec<f64> = phis.iter().map(|p| integrand.pair(p, balance)).collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let m = Mollifier::space_time(delta, delta * time_ratio);
        let (mut rem, mut mol) = (0.0, 0.0);
        for (phi, &b) in phis.iter().zip(&base) {
            let mp = MollifiedSeparable::new(&g, phi, &m)?;
            let v = integrand.pair(&mp, balance)?;
            rem += (b - v).abs();
            mol += v.abs();
        }
        points.push(RatePoint { delta, remainder: rem / phis.len() as f64, mollified: mol / phis.len() as f64 });
    }
    let emax = integrand.frames.iter().map(|f| f.e.iter().cloned().fold(0.0, f64::max)).fold(0.0, f64::max);
    let floor = TRIVIAL_FLOOR * emax * g.volume() * g.duration().max(g.dt);
    let trivial = points.iter().all(|p| p.remainder <= floor && p.mollified <= floor);
    let xs: Vec<f64> = points.iter().map(|p| p.delta).collect();
    let remainder_fit = fit_power_law(&xs, &points.iter().map(|p| p.remainder).collect::<Vec<_>>(), None).ok();
    let mollified_fit = fit_power_law(&xs, &points.iter().map(|p| p.mollified).collect::<Vec<_>>(), None).ok();
    let pass = trivial
        || matches!((remainder_fit, mollified_fit), (Some(r), Some(m))
            if r.exponent >= predicted.0 - RATE_SLACK && m.exponent >= predicted.1 - RATE_SLACK);
    Ok(DrRates { sigma, points, remainder_fit, mollified_fit, predicted, trivial, pass })
}

impl DrRates {
    /// Rows `delta, remainder, mollified`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,remainder,mollified\n");
        for p in &self.points {
            s.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", p.delta, p.remainder, p.mollified));
        }
        s
    }
}

/// `D ∗ ρ_δ` (or `𝓔 ∗ ρ_δ`) as a field on the valid frames of a
/// space-time mollifier; the time derivative falls on the kernel.
pub fn dissipation_sample(
    u: &SpaceTimeField,
    q: Option<&SpaceTimeField>,
    nu: f64,
    m: &Mollifier,
    balance: Balance,
) -> Result<SpaceTimeField> {
    let g = check_velocity(u, q)?;
    let ks = m.slices(&g)?;
    let dks = time_derivative_slices(&g, m)?;
    let frames = m.valid_frames(&g);
    if frames.is_empty() {
        return Err(Error::OutOfRange("movie shorter than the temporal stencil".into()));
    }
    let sp = Spectral::for_grid(&g);
    let integrand = EnergyIntegrand::new(u, q, nu)?;
    let mt = ks.mt;
    let out: Vec<Vec<f64>> = frames
        .clone()
        .into_par_iter()
        .map(|it| {
            let mut acc = vec![C64::new(0.0, 0.0); sp.len()];
            for slot in 0..ks.multipliers.len() {
                let src = it + mt - slot;
                let ef = &integrand.frames[src];
                let mult = &ks.multipliers[slot];
                let dmult = &dks[slot];
                // −∂_t e − div F + νΔe (− ν|∇u|²), all convolved with ρ.
                let es = sp.forward(&ef.e);
                for (idx, a) in acc.iter_mut().enumerate() {
                    *a += es[idx] * (-dmult[idx] - nu * sp.k2(idx) * mult[idx]);
                }
                for (ax, f) in ef.flux.iter().enumerate() {
                    let fs = sp.derivative(&sp.forward(f), ax);
                    for (idx, a) in acc.iter_mut().enumerate() {
                        *a -= fs[idx] * mult[idx];
                    }
                }
                if balance == Balance::Defect && nu != 0.0 {
                    let gs = sp.forward(&ef.gradsq);
                    for (idx, a) in acc.iter_mut().enumerate() {
                        *a -= gs[idx] * (nu * mult[idx]);
                    }
                }
            }
            sp.inverse(acc)
        })
        .collect();
    let out_grid = g.with_time(frames.len(), g.dt)?;
    let mut meta = u.meta.clone();
    meta.name = format!("{}:dissipation", u.meta.name);
    meta.provenance = format!("dissipation_sample(δ={}, δt={:?}, {:?})", m.ell, m.ell_t, balance);
    SpaceTimeField::new(out_grid, 1, out.concat(), meta)
}

/// Spectral multipliers of `∂_t ρ` per time offset, normalized like `ρ`.
fn time_derivative_slices(g: &PeriodicGrid, m: &Mollifier) -> Result<Vec<Vec<f64>>> {
    let mt = m.time_halfwidth(g);
    if mt == 0 {
        return Err(Error::param("dissipation samples need a space-time mollifier spanning several frames"));
    }
    let lt = m.ell_t.expect("space-time mollifier");
    let st = m.stencil(g);
    let h = g.spacing();
    let n = g.n as i64;
    let sp = Spectral::for_grid(g);
    let mut kernels = vec![vec![0.0; g.points()]; 2 * mt + 1];
    let mass: f64 = st.iter().map(|s| s.2).sum();
    let raw_total: f64 = st
        .iter()
        .map(|(off, tau, _)| {
            let r2 = radius2(g, m, h, off, *tau, lt);
            m.profile.eval(r2.sqrt())
        })
        .sum();
    for (off, tau, _) in &st {
        let r2 = radius2(g, m, h, off, *tau, lt);
        let s = 1.0 - r2;
        let dr2dt = 2.0 * (*tau as f64 * g.dt) / (lt * lt);
        let dp = match m.profile {
            crate::mollify::Profile::Quartic => -4.0 * s.powi(3) * dr2dt,
            crate::mollify::Profile::Quadratic => -2.0 * s * dr2dt,
        };
        let mut ix = [0usize; 3];
        for a in 0..g.d {
            ix[a] = off[a].rem_euclid(n) as usize;
        }
        kernels[(tau + mt as i64) as usize][g.ravel(ix)] += dp * mass / raw_total;
    }
    Ok(kernels.iter().map(|k| sp.forward(k).into_iter().map(|c| c.re).collect()).collect())
}

fn radius2(g: &PeriodicGrid, m: &Mollifier, h: f64, off: &[i64; 3], tau: i64, lt: f64) -> f64 {
    let rs: f64 = if m.is_spatial_identity(g) {
        0.0
    } else {
        (0..g.d).map(|a| (off[a] as f64 * h / m.ell).powi(2)).sum()
    };
    rs + (tau as f64 * g.dt / lt).powi(2)
}

/// Convolution helper re-exported for callers pairing custom fields.
pub fn convolve_spatial(g: &PeriodicGrid, x: &[f64], mult: &[f64]) -> Vec<f64> {
    convolve(&Spectral::for_grid(g), x, mult)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{synth_field, SynthKind};
    use crate::testfn::{random_family, SpacePart, TimeBump};

    fn tg_grid(n: usize, nt: usize) -> PeriodicGrid {
        PeriodicGrid::snapshot(2, n).unwrap().with_time(nt, 0.1).unwrap()
    }

    #[test]
    fn taylor_green_pressure() {
        let g = PeriodicGrid::snapshot(2, 32).unwrap();
        let u = synth_field(&g, &SynthKind::TaylorGreen, 0).unwrap();
        let q = solve_pressure(&g, &u.frame_components(0)).unwrap();
        for p in 0..g.points() {
            let x = g.coords(p);
            let want = ((2.0 * x[0]).cos() + (2.0 * x[1]).cos()) / 4.0;
            assert!((q[p] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn shear_has_no_pressure() {
        let g = PeriodicGrid::snapshot(2, 32).unwrap();
        let u: Vec<Vec<f64>> = vec![(0..g.points()).map(|p| g.coords(p)[1].sin()).collect(), vec![0.0; g.points()]];
        let q = solve_pressure(&g, &u).unwrap();
        assert!(q.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn rejects_compressible_velocity() {
        let g = PeriodicGrid::snapshot(2, 16).unwrap();
        let u: Vec<Vec<f64>> = vec![(0..g.points()).map(|p| g.coords(p)[0].sin()).collect(), vec![0.0; g.points()]];
        assert!(solve_pressure(&g, &u).is_err());
    }

    #[test]
    fn stationary_euler_has_no_defect() {
        let g = tg_grid(32, 21);
        let u = synth_field(&g, &SynthKind::TaylorGreen, 0).unwrap();
        let phis = random_family(&g, 3, 4.0, TimeBump::new(0.3, 1.7).unwrap(), 1);
        for phi in &phis {
            let v = dr_pairing(&u, None, 0.0, phi).unwrap();
            assert!(v.abs() < 1e-8, "⟨D,φ⟩ = {v}");
        }
    }

    #[test]
    fn identity_on_static_euler_flow() {
        let g = tg_grid(32, 21);
        let u = synth_field(&g, &SynthKind::TaylorGreen, 0).unwrap();
        let phis = random_family(&g, 2, 3.0, TimeBump::new(0.3, 1.7).unwrap(), 2);
        let refs: Vec<&dyn TestFunctional> = phis.iter().map(|p| p as &dyn TestFunctional).collect();
        let rows = identity_residuals(&u, None, 0.0, &[0.5, 1.0], &refs).unwrap();
        for r in rows {
            assert!(r.residual < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn support_outside_movie_is_rejected() {
        let g = tg_grid(16, 5);
        let u = synth_field(&g, &SynthKind::TaylorGreen, 0).unwrap();
        let phi = Separable::new("late", SpacePart::ones(&g), TimeBump::new(0.2, 3.0).unwrap());
        assert!(matches!(dr_pairing(&u, None, 0.0, &phi), Err(Error::Support(_))));
    }

    #[test]
    fn zero_field_pairs_to_zero() {
        let g = tg_grid(16, 11);
        let u = synth_field(&g, &SynthKind::Constant { c: 0.0, components: 2 }, 0).unwrap();
        let phis = random_family(&g, 1, 3.0, TimeBump::new(0.2, 0.8).unwrap(), 3);
        assert_eq!(dr_pairing(&u, None, 0.1, &phis[0]).unwrap(), 0.0);
        let refs: Vec<&dyn TestFunctional> = vec![&phis[0]];
        let rows = identity_residuals(&u, None, 0.1, &[0.5], &refs).unwrap();
        assert_eq!(rows[0].residual, 0.0);
    }

    #[test]
    fn identity_holds_along_navier_stokes() {
        use crate::solvers::{solve_ns2d, vorticity, SolverConfig};
        let snap = PeriodicGrid::snapshot(2, 64).unwrap();
        let u0 = synth_field(&snap, &SynthKind::RandomSolenoidal { sigma: 2.0 }, 5).unwrap();
        let w0 = SpaceTimeField::new(snap, 1, vorticity(&u0, 0).unwrap(), u0.meta.clone()).unwrap();
        let cfg = SolverConfig { nu: 0.01, t_final: 0.5, frame_dt: Some(0.0025), ..SolverConfig::default() };
        let u = solve_ns2d(&w0, &cfg).unwrap();
        let g = *u.grid();
        let phis = random_family(&g, 2, 3.0, TimeBump::new(0.05, 0.45).unwrap(), 4);
        let refs: Vec<&dyn TestFunctional> = phis.iter().map(|p| p as &dyn TestFunctional).collect();
        for r in identity_residuals(&u, None, 0.01, &[0.4, 0.8], &refs).unwrap() {
            assert!(r.residual < 1e-4, "{r:?}");
        }
    }
}

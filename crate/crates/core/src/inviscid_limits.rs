//! Diagnostics over families of viscous solutions as `ν → 0`.
//!
//! Every predicted exponent is a closed-form function of `σ`; every check
//! is one-sided (measured ≥ predicted − slack) because the underlying
//! estimates are upper bounds.

use serde::{Deserialize, Serialize};

use crate::duchon_robert::{
    mollification_rates_with, pressure_movie, time_weights, Balance, DrRates, EnergyIntegrand, FrameSpectra,
    RATE_SLACK,
};
use crate::error::{Error, Result};
use crate::fields::{fit_power_law, ScalingFit, SpaceTimeField, Spectral};
use crate::mollify::{mollify_array, Mollifier};
use crate::solvers::kinetic_energy;
use crate::structure_fn::longitudinal_frame_mean;
use crate::testfn::{Separable, TimeBump};

/// `2σ/(1−σ)`
pub fn energy_modulus_exponent(sigma: f64) -> f64 {
    2.0 * sigma / (1.0 - sigma)
}

/// `(3σ−1)/(1+σ)`
pub fn quasi_singularity_exponent(sigma: f64) -> f64 {
    (3.0 * sigma - 1.0) / (1.0 + sigma)
}

/// `1/(4σ)`
pub fn resolved_scale_exponent(sigma: f64) -> f64 {
    1.0 / (4.0 * sigma)
}

/// `1/(2(1−σ))`
pub fn four_fifths_scale_exponent(sigma: f64) -> f64 {
    1.0 / (2.0 * (1.0 - sigma))
}

/// `(2σ, 2σ − 2)`
pub fn viscous_besov_exponents(sigma: f64) -> (f64, f64) {
    (2.0 * sigma, 2.0 * sigma - 2.0)
}

/// Extra power of `ν` that makes `ℓ_ν^{4σ}/ν → 0` strictly.
pub const SAFETY_EXPONENT: f64 = 0.05;

/// `ℓ_ν = ν^{1/(4σ) + 0.05}`
pub fn resolved_scale(nu: f64, sigma: f64) -> f64 {
    nu.powf(resolved_scale_exponent(sigma) + SAFETY_EXPONENT)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::OutOfRange(format!("σ = {sigma} outside (0, 1]")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SweepMember {
    pub nu: f64,
    pub u: SpaceTimeField,
}

/// Velocity movies at strictly decreasing viscosities on a common grid.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub members: Vec<SweepMember>,
}

impl Sweep {
    pub fn new(members: Vec<SweepMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::param("empty sweep"));
        }
        let g = *members[0].u.grid();
        for w in members.windows(2) {
            if !(w[1].nu < w[0].nu) {
                return Err(Error::param("sweep viscosities must decrease strictly"));
            }
        }
        for m in &members {
            if !(m.nu > 0.0) {
                return Err(Error::param("sweep viscosities must be positive"));
            }
            if *m.u.grid() != g || m.u.components() != g.d {
                return Err(Error::GridMismatch("sweep movies must share one grid".into()));
            }
        }
        Ok(Self { members })
    }

    pub fn nus(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.nu).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub taus: Vec<f64>,
    pub moduli: Vec<f64>,
    pub fit: Option<ScalingFit>,
    /// `min(2σ/(1−σ), 1)`: energies of finite-energy solutions are at best
    /// Lipschitz in time on a grid.
    pub predicted: f64,
    pub degenerate: bool,
    pub pass: bool,
}

/// Fits `sup_{|t−s|=τ} |e(t) − e(s)|` against `τ` over dyadic lags.
pub fn kinetic_energy_modulus(u: &SpaceTimeField, sigma: f64) -> Result<ModulusReport> {
    check_sigma(sigma)?;
    let g = *u.grid();
    if g.nt < 64 {
        return Err(Error::param(format!("energy modulus needs at least 64 frames, got {}", g.nt)));
    }
    let e: Vec<f64> = (0..g.nt).map(|it| kinetic_energy(u, it)).collect();
    let mut taus = Vec::new();
    let mut moduli = Vec::new();
    let mut lag = 1;
    while lag <= g.nt / 4 {
        taus.push(lag as f64 * g.dt);
        moduli.push((0..g.nt - lag).map(|i| (e[i + lag] - e[i]).abs()).fold(0.0, f64::max));
        lag *= 2;
    }
    let scale = e.iter().cloned().fold(0.0, f64::max);
    let degenerate = moduli.iter().all(|m| *m <= 1e-14 * scale.max(f64::MIN_POSITIVE));
    let fit = if degenerate { None } else { fit_power_law(&taus, &moduli, None).ok() };
    let predicted = energy_modulus_exponent(sigma.min(0.999_999)).min(1.0);
    let pass = !degenerate && fit.is_some_and(|f| f.exponent >= predicted - RATE_SLACK);
    Ok(ModulusReport { taus, moduli, fit, predicted, degenerate, pass })
}

/// `⟨𝓔^ν, φ⟩` for each sweep member.
pub fn total_dissipation_pairings(sweep: &Sweep, phi: &Separable) -> Result<Vec<f64>> {
    sweep
        .members
        .iter()
        .map(|m| EnergyIntegrand::new(&m.u, None, m.nu)?.pair(phi, Balance::Total))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiSingularity {
    pub nus: Vec<f64>,
    pub pairings: Vec<f64>,
    pub fit: ScalingFit,
    pub sigma: f64,
    pub predicted: f64,
    pub pass: bool,
}

/// Exponent of `|⟨𝓔^ν, φ⟩|` against `ν`, compared with `(3σ−1)/(1+σ)`.
pub fn quasi_singularity_fit(nus: &[f64], pairings: &[f64], sigma: f64) -> Result<QuasiSingularity> {
    check_sigma(sigma)?;
    if nus.len() < 3 || nus.len() != pairings.len() {
        return Err(Error::param("quasi-singularity fit needs at least three matching viscosities"));
    }
    let mags: Vec<f64> = pairings.iter().map(|v| v.abs()).collect();
    let fit = fit_power_law(nus, &mags, None)?;
    let predicted = quasi_singularity_exponent(sigma);
    Ok(QuasiSingularity {
        nus: nus.to_vec(),
        pairings: pairings.to_vec(),
        pass: fit.exponent >= predicted - RATE_SLACK,
        fit,
        sigma,
        predicted,
    })
}

/// Value at `ν = 0` of the polynomial through `(ν_i, y_i)`.
pub fn extrapolate_to_zero(nus: &[f64], ys: &[f64]) -> f64 {
    (0..nus.len())
        .map(|i| {
            let w: f64 = (0..nus.len()).filter(|&j| j != i).map(|j| nus[j] / (nus[j] - nus[i])).product();
            w * ys[i]
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourFifthsMember {
    pub nu: f64,
    pub ell_nu: f64,
    /// `⟨𝓔^ν, η⟩`
    pub total: f64,
    /// `⟨C^{ℓ,ν}, η⟩` per scale.
    pub flux: Vec<f64>,
    /// `⟨S_∥(ℓ)/ℓ, η⟩` per scale.
    pub longitudinal: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourFifthsRow {
    pub nu: f64,
    pub ell_i: f64,
    /// `sup_ℓ |⟨𝓔^ν + C^{ℓ,ν}, η⟩|` over dyadic `ℓ ∈ [ℓ_ν, ℓ_I]`, `None` if empty.
    pub sup_total: Option<f64>,
    /// `sup_ℓ |⟨S_∥/ℓ − C^{ℓ,ν}, η⟩|` over the same scales.
    pub sup_longitudinal: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourFifthsReport {
    pub scales: Vec<f64>,
    pub members: Vec<FourFifthsMember>,
    pub rows: Vec<FourFifthsRow>,
    /// `(ℓ_I, sup)` after extrapolating each scale to `ν = 0`.
    pub limit_total: Vec<(f64, f64)>,
    pub limit_longitudinal: Vec<(f64, f64)>,
    pub total_rate: Option<ScalingFit>,
    pub longitudinal_rate: Option<ScalingFit>,
    /// `2σ`, the rate of both limits in `ℓ_I`.
    pub predicted_rate: f64,
    pub pass: bool,
}

impl FourFifthsReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("nu,ell_i,sup_total,sup_longitudinal\n");
        let f = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:.12e}"));
        for r in &self.rows {
            s.push_str(&format!("{:.12e},{:.12e},{},{}\n", r.nu, r.ell_i, f(r.sup_total), f(r.sup_longitudinal)));
        }
        for ((l, a), (_, b)) in self.limit_total.iter().zip(&self.limit_longitudinal) {
            s.push_str(&format!("0,{l:.12e},{a:.12e},{b:.12e}\n"));
        }
        s
    }
}

/// Slack of the four-fifths rate comparison.
pub const FOUR_FIFTHS_SLACK: f64 = 0.1;

/// Dyadic scales `4Δx · 2^k` up to `max_ell` (and a quarter of the box).
pub fn dyadic_scales(g: &crate::fields::PeriodicGrid, max_ell: f64) -> Vec<f64> {
    let h = g.spacing();
    let mut out = Vec::new();
    let mut m = 4usize;
    while m <= g.n / 4 && m as f64 * h <= max_ell * (1.0 + 1e-12) {
        out.push(m as f64 * h);
        m *= 2;
    }
    out
}

/// Four-fifths diagnostics paired with a time-only test function `η`.
pub fn four_fifths_residual(sweep: &Sweep, ell_is: &[f64], eta: TimeBump, sigma: f64, ndirections: usize) -> Result<FourFifthsReport> {
    check_sigma(sigma)?;
    if ell_is.is_empty() {
        return Err(Error::param("no inertial scales ℓ_I given"));
    }
    let g = *sweep.members[0].u.grid();
    let scales = dyadic_scales(&g, ell_is.iter().cloned().fold(0.0, f64::max));
    if scales.is_empty() {
        return Err(Error::OutOfRange("no dyadic scale fits below ℓ_I".into()));
    }
    let w = time_weights(&g);
    let frames = eta.frames(&g);
    if frames.end > g.nt {
        return Err(Error::Support("η extends past the movie".into()));
    }
    let vol = g.volume();
    let mut members = Vec::with_capacity(sweep.members.len());
    for m in &sweep.members {
        let q = pressure_movie(&m.u)?;
        let mut total = 0.0;
        let mut flux = vec![0.0; scales.len()];
        let mut longitudinal = vec![0.0; scales.len()];
        for it in frames.clone() {
            let t = g.time(it);
            let (eta_t, deta_t) = (eta.value(t), eta.derivative(t));
            total += w[it] * kinetic_energy(&m.u, it) * deta_t;
            if eta_t == 0.0 {
                continue;
            }
            let comps = m.u.frame_components(it);
            let qf = q.component(it, 0);
            let fs = FrameSpectra::new(&g, &comps, qf);
            for (k, &ell) in scales.iter().enumerate() {
                let terms = fs.terms(&g, &comps, qf, ell)?;
                flux[k] += w[it] * eta_t * terms.c.iter().sum::<f64>() * g.cell_volume();
                longitudinal[k] += w[it] * eta_t * vol * longitudinal_frame_mean(&m.u, it, ell, ndirections)? / ell;
            }
        }
        members.push(FourFifthsMember { nu: m.nu, ell_nu: resolved_scale(m.nu, sigma), total, flux, longitudinal });
    }
    let mut rows = Vec::new();
    for m in &members {
        for &ell_i in ell_is {
            let window: Vec<usize> = (0..scales.len()).filter(|&k| scales[k] >= m.ell_nu && scales[k] <= ell_i * (1.0 + 1e-12)).collect();
            let sup = |f: &dyn Fn(usize) -> f64| window.iter().map(|&k| f(k).abs()).reduce(f64::max);
            rows.push(FourFifthsRow {
                nu: m.nu,
                ell_i,
                sup_total: sup(&|k| m.total + m.flux[k]),
                sup_longitudinal: sup(&|k| m.longitudinal[k] - m.flux[k]),
            });
        }
    }
    if rows.iter().all(|r| r.sup_total.is_none()) {
        return Err(Error::OutOfRange("empty inertial window: ℓ_ν ≥ ℓ_I for every member".into()));
    }
    let nus: Vec<f64> = members.iter().map(|m| m.nu).collect();
    let lim = |f: &dyn Fn(&FourFifthsMember, usize) -> f64| -> Vec<f64> {
        (0..scales.len())
            .map(|k| extrapolate_to_zero(&nus, &members.iter().map(|m| f(m, k)).collect::<Vec<_>>()))
            .collect()
    };
    let lt = lim(&|m, k| m.total + m.flux[k]);
    let ll = lim(&|m, k| m.longitudinal[k] - m.flux[k]);
    let sup_below = |v: &[f64], ell_i: f64| {
        (0..scales.len()).filter(|&k| scales[k] <= ell_i * (1.0 + 1e-12)).map(|k| v[k].abs()).fold(0.0, f64::max)
    };
    let limit_total: Vec<(f64, f64)> = ell_is.iter().map(|&l| (l, sup_below(&lt, l))).collect();
    let limit_longitudinal: Vec<(f64, f64)> = ell_is.iter().map(|&l| (l, sup_below(&ll, l))).collect();
    let rate = |pts: &[(f64, f64)]| {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().cloned().unzip();
        fit_power_law(&x, &y, None).ok()
    };
    let total_rate = rate(&limit_total);
    let longitudinal_rate = rate(&limit_longitudinal);
    let predicted_rate = 2.0 * sigma;
    // Identically vanishing limits satisfy any rate.
    let ok = |f: Option<ScalingFit>, pts: &[(f64, f64)]| {
        pts.iter().all(|(_, v)| *v == 0.0) || f.is_some_and(|f| f.exponent >= predicted_rate - FOUR_FIFTHS_SLACK)
    };
    Ok(FourFifthsReport {
        pass: ok(total_rate, &limit_total) && ok(longitudinal_rate, &limit_longitudinal),
        total_rate,
        longitudinal_rate,
        predicted_rate,
        scales,
        members,
        rows,
        limit_total,
        limit_longitudinal,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRow {
    pub nu: f64,
    pub ell_nu: f64,
    /// `ν∫∫|∇u_{ℓ_ν}|² η`
    pub coarse: f64,
    /// `⟨𝓔^ν, η⟩`
    pub total: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedReport {
    pub sigma: f64,
    pub exponent: f64,
    pub rows: Vec<ResolvedRow>,
    /// Every member has `total ≤ (1 + band)·coarse`.
    pub pass: bool,
}

/// Tolerance band of the resolved-scale comparison.
pub const RESOLVED_BAND: f64 = 0.1;

pub fn resolved_scale_check(sweep: &Sweep, sigma: f64, eta: TimeBump) -> Result<ResolvedReport> {
    check_sigma(sigma)?;
    if sweep.members.len() < 3 {
        return Err(Error::param("resolved-scale check needs at least three viscosities"));
    }
    let g = *sweep.members[0].u.grid();
    let frames = eta.frames(&g);
    if frames.end > g.nt {
        return Err(Error::Support("η extends past the movie".into()));
    }
    let w = time_weights(&g);
    let sp = Spectral::for_grid(&g);
    let mut rows = Vec::new();
    for m in &sweep.members {
        let ell_nu = resolved_scale(m.nu, sigma);
        let moll = Mollifier::space(ell_nu);
        let (mut coarse, mut total) = (0.0, 0.0);
        for it in frames.clone() {
            let t = g.time(it);
            total += w[it] * kinetic_energy(&m.u, it) * eta.derivative(t);
            let et = eta.value(t);
            if et == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for c in m.u.frame_components(it) {
                for gr in sp.gradient(&mollify_array(&g, &c, &moll)?) {
                    s += gr.iter().map(|x| x * x).sum::<f64>();
                }
            }
            coarse += w[it] * et * m.nu * s * g.cell_volume();
        }
        rows.push(ResolvedRow { nu: m.nu, ell_nu, coarse, total, ratio: total / coarse });
    }
    let pass = rows.iter().all(|r| r.coarse > 0.0 && r.total <= (1.0 + RESOLVED_BAND) * r.coarse);
    Ok(ResolvedReport { sigma, exponent: resolved_scale_exponent(sigma) + SAFETY_EXPONENT, rows, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformReport {
    pub sigma: f64,
    pub p: f64,
    pub per_nu: Vec<(f64, DrRates)>,
    pub spread_remainder: f64,
    pub spread_mollified: f64,
    pub pass: bool,
}

/// Largest allowed spread of fitted exponents across the sweep.
pub const UNIFORM_SPREAD: f64 = 0.2;

/// Mollification rates of `𝓔^ν` for every member against `(2σ, 2σ−2)`
/// and their spread across the sweep. `p` is recorded, not used.
pub fn uniform_viscous_besov(
    sweep: &Sweep,
    phis: &[Separable],
    deltas: &[f64],
    time_ratio: f64,
    sigma: f64,
    p: f64,
) -> Result<UniformReport> {
    check_sigma(sigma)?;
    let predicted = viscous_besov_exponents(sigma);
    let mut per_nu = Vec::new();
    for m in &sweep.members {
        let integrand = EnergyIntegrand::new(&m.u, None, m.nu)?;
        per_nu.push((m.nu, mollification_rates_with(&integrand, Balance::Total, phis, deltas, time_ratio, sigma, predicted)?));
    }
    let spread = |pick: &dyn Fn(&DrRates) -> Option<f64>| {
        let v: Vec<f64> = per_nu.iter().filter_map(|(_, r)| pick(r)).collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
        }
    };
    let spread_remainder = spread(&|r| r.remainder_fit.map(|f| f.exponent));
    let spread_mollified = spread(&|r| r.mollified_fit.map(|f| f.exponent));
    let pass = per_nu.iter().all(|(_, r)| r.pass) && spread_remainder <= UNIFORM_SPREAD && spread_mollified <= UNIFORM_SPREAD;
    Ok(UniformReport { sigma, p, per_nu, spread_remainder, spread_mollified, pass })
}

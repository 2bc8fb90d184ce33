//! Friedrichs mollification with a compactly supported polynomial bump.
//!
//! The stencil samples the radial profile at grid offsets inside the
//! support and is renormalized to unit discrete mass. Applying it is a
//! circular convolution, carried out through the FFT of the periodized
//! stencil; [`Mollifier::apply_direct`] runs the same sum in physical space.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{fit_power_law, lp_norm, PeriodicGrid, ScalingFit, SpaceTimeField, Spectral, C64};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `(1 − r²)⁴`
    #[default]
    Quartic,
    /// `(1 − r²)²`
    Quadratic,
}

impl Profile {
    pub fn eval(self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - r * r;
        match self {
            Profile::Quartic => s.powi(4),
            Profile::Quadratic => s * s,
        }
    }
}

/// Mollifier of spatial radius `ell` and, for space-time kernels, temporal
/// radius `ell_t` (both in physical units).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    pub ell: f64,
    pub ell_t: Option<f64>,
    pub profile: Profile,
}

/// Spatial slices of a discrete kernel, one per time offset.
#[derive(Clone, Debug)]
pub struct KernelSlices {
    /// Time half-width in frames.
    pub mt: usize,
    /// Spectral multiplier of each slice, offsets `−mt..=mt`.
    pub multipliers: Vec<Vec<f64>>,
    /// Whether the spatial stencil is the identity.
    pub identity: bool,
}

impl Mollifier {
    pub fn space(ell: f64) -> Self {
        Self { ell, ell_t: None, profile: Profile::Quartic }
    }

    pub fn space_time(ell: f64, ell_t: f64) -> Self {
        Self { ell, ell_t: Some(ell_t), profile: Profile::Quartic }
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self
    }

    fn validate(&self, g: &PeriodicGrid) -> Result<()> {
        if !(self.ell >= 0.0) || self.ell > g.length / 2.0 {
            return Err(Error::OutOfRange(format!("ℓ = {} exceeds half the domain", self.ell)));
        }
        if let Some(lt) = self.ell_t {
            if !(lt >= 0.0) {
                return Err(Error::param("temporal radius must be non-negative"));
            }
        }
        Ok(())
    }

    /// Whether the spatial stencil degenerates to the identity (`ℓ < 2Δx`).
    pub fn is_spatial_identity(&self, g: &PeriodicGrid) -> bool {
        self.ell < 2.0 * g.spacing()
    }

    /// Time half-width in frames (`0` for space-only kernels).
    pub fn time_halfwidth(&self, g: &PeriodicGrid) -> usize {
        match self.ell_t {
            Some(lt) if g.nt > 1 && lt >= 2.0 * g.dt => (lt / g.dt + 1e-9).floor() as usize,
            _ => 0,
        }
    }

    /// Frames of a length-`nt` movie where the kernel fits entirely.
    pub fn valid_frames(&self, g: &PeriodicGrid) -> std::ops::Range<usize> {
        let mt = self.time_halfwidth(g);
        mt..g.nt.saturating_sub(mt)
    }

    /// Stencil weights as `(offset, time offset, weight)`, unit total mass.
    pub fn stencil(&self, g: &PeriodicGrid) -> Vec<([i64; 3], i64, f64)> {
        let mt = self.time_halfwidth(g) as i64;
        let h = g.spacing();
        let ms = if self.is_spatial_identity(g) { 0 } else { (self.ell / h + 1e-9).floor() as i64 };
        let mut out = Vec::new();
        let range = |a: usize| if a < g.d { -ms..=ms } else { 0..=0 };
        for tau in -mt..=mt {
            let rt = if mt > 0 { tau as f64 * g.dt / self.ell_t.unwrap_or(1.0) } else { 0.0 };
            for i in range(0) {
                for j in range(1) {
                    for k in range(2) {
                        let off = [i, j, k];
                        let rs2: f64 = if ms > 0 {
                            (0..g.d).map(|a| (off[a] as f64 * h / self.ell).powi(2)).sum()
                        } else {
                            0.0
                        };
                        let w = self.profile.eval((rs2 + rt * rt).sqrt());
                        if w > 0.0 {
                            out.push((off, tau, w));
                        }
                    }
                }
            }
        }
        let total: f64 = out.iter().map(|s| s.2).sum();
        for s in &mut out {
            s.2 /= total;
        }
        out
    }

    /// Per-time-offset spectral multipliers of the stencil.
    pub fn slices(&self, g: &PeriodicGrid) -> Result<KernelSlices> {
        self.validate(g)?;
        let mt = self.time_halfwidth(g);
        let sp = Spectral::for_grid(g);
        let identity = self.is_spatial_identity(g);
        let n = g.n as i64;
        let mut kernels = vec![vec![0.0; g.points()]; 2 * mt + 1];
        for (off, tau, w) in self.stencil(g) {
            let mut ix = [0usize; 3];
            for a in 0..g.d {
                ix[a] = off[a].rem_euclid(n) as usize;
            }
            kernels[(tau + mt as i64) as usize][g.ravel(ix)] += w;
        }
        let multipliers = kernels.iter().map(|k| sp.forward(k).into_iter().map(|c| c.re).collect()).collect();
        Ok(KernelSlices { mt, multipliers, identity })
    }

    /// Physical-space evaluation of the same convolution, for small stencils.
    pub fn apply_direct(&self, f: &SpaceTimeField) -> Result<SpaceTimeField> {
        let g = *f.grid();
        self.validate(&g)?;
        let st = self.stencil(&g);
        let frames = self.valid_frames(&g);
        let out_grid = g.with_time(frames.len(), g.dt)?;
        let n = g.n as i64;
        let mut data = Vec::with_capacity(out_grid.nt * f.components() * g.points());
        for it in frames {
            for c in 0..f.components() {
                for p in 0..g.points() {
                    let ix = g.unravel(p);
                    let mut acc = 0.0;
                    for (off, tau, w) in &st {
                        let mut jx = [0usize; 3];
                        for a in 0..g.d {
                            jx[a] = (ix[a] as i64 - off[a]).rem_euclid(n) as usize;
                        }
                        let src = (it as i64 - tau) as usize;
                        acc += w * f.component(src, c)[g.ravel(jx)];
                    }
                    data.push(acc);
                }
            }
        }
        SpaceTimeField::new(out_grid, f.components(), data, f.meta.clone())
    }
}

/// Convolves one spatial array with a spectral multiplier.
pub fn convolve(sp: &Spectral, x: &[f64], mult: &[f64]) -> Vec<f64> {
    let s: Vec<C64> = sp.forward(x).into_iter().zip(mult).map(|(v, m)| v * m).collect();
    sp.inverse(s)
}

/// Mollifies every component; space-time kernels return only the frames
/// where the kernel fits (see [`Mollifier::valid_frames`]).
pub fn mollify(f: &SpaceTimeField, m: &Mollifier) -> Result<SpaceTimeField> {
    let g = *f.grid();
    let ks = m.slices(&g)?;
    let frames = m.valid_frames(&g);
    let out_grid = g.with_time(frames.len().max(1), g.dt)?;
    if frames.is_empty() {
        return Err(Error::OutOfRange("movie shorter than the temporal stencil".into()));
    }
    let sp = Spectral::for_grid(&g);
    let mut data = Vec::with_capacity(out_grid.nt * f.components() * g.points());
    if ks.mt == 0 {
        for it in frames {
            for c in 0..f.components() {
                let x = f.component(it, c);
                if ks.identity {
                    data.extend_from_slice(x);
                } else {
                    data.extend(convolve(&sp, x, &ks.multipliers[0]));
                }
            }
        }
    } else {
        let mt = ks.mt;
        let nf = frames.len();
        let mut per_comp: Vec<Vec<f64>> = vec![Vec::with_capacity(nf * g.points()); f.components()];
        for (c, out) in per_comp.iter_mut().enumerate() {
            let spectra: Vec<Vec<C64>> = (0..g.nt).map(|it| sp.forward(f.component(it, c))).collect();
            for it in frames.clone() {
                let mut acc = vec![C64::new(0.0, 0.0); sp.len()];
                for (slot, mult) in ks.multipliers.iter().enumerate() {
                    let src = it + mt - slot;
                    for ((a, v), w) in acc.iter_mut().zip(&spectra[src]).zip(mult) {
                        *a += v * w;
                    }
                }
                out.extend(sp.inverse(acc));
            }
        }
        let np = g.points();
        for k in 0..nf {
            for comp in &per_comp {
                data.extend_from_slice(&comp[k * np..(k + 1) * np]);
            }
        }
    }
    let mut meta = f.meta.clone();
    meta.provenance = format!("{}|mollify(ℓ={},ℓt={:?})", meta.provenance, m.ell, m.ell_t);
    SpaceTimeField::new(out_grid, f.components(), data, meta)
}

/// Mollifies a single spatial array (space-only kernel).
pub fn mollify_array(g: &PeriodicGrid, x: &[f64], m: &Mollifier) -> Result<Vec<f64>> {
    match spatial_multiplier(g, m)? {
        None => Ok(x.to_vec()),
        Some(mult) => Ok(convolve(&Spectral::for_grid(g), x, &mult)),
    }
}

type KernelKey = (usize, usize, u64, u64, Profile);

/// Spectral multiplier of the spatial part of `m`, `None` for the identity.
/// Recently used kernels are cached.
pub fn spatial_multiplier(g: &PeriodicGrid, m: &Mollifier) -> Result<Option<Arc<Vec<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<KernelKey, Arc<Vec<f64>>>>> = OnceLock::new();
    let space = Mollifier { ell_t: None, ..*m };
    let snap = PeriodicGrid { nt: 1, ..*g };
    space.validate(&snap)?;
    if space.is_spatial_identity(&snap) {
        return Ok(None);
    }
    let key = (g.d, g.n, g.length.to_bits(), m.ell.to_bits(), m.profile);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(k) = cache.lock().expect("kernel cache").get(&key) {
        return Ok(Some(k.clone()));
    }
    let k = Arc::new(space.slices(&snap)?.multipliers.swap_remove(0));
    let mut map = cache.lock().expect("kernel cache");
    if map.len() >= 64 {
        map.clear();
    }
    map.insert(key, k.clone());
    Ok(Some(k))
}

/// Index of symmetric tensor entry `(i, j)` in upper-triangular storage.
pub fn sym_index(i: usize, j: usize, c: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * c - a * (a + 1) / 2 + b
}

/// `R^ℓ = u_ℓ⊗u_ℓ − (u⊗u)_ℓ` of one frame, symmetric storage.
pub fn commutator_frame(g: &PeriodicGrid, u: &[Vec<f64>], ul: &[Vec<f64>], m: &Mollifier) -> Result<Vec<Vec<f64>>> {
    let c = u.len();
    let mut out = vec![Vec::new(); c * (c + 1) / 2];
    for i in 0..c {
        for j in i..c {
            let prod: Vec<f64> = u[i].iter().zip(&u[j]).map(|(a, b)| a * b).collect();
            let pl = mollify_array(g, &prod, m)?;
            out[sym_index(i, j, c)] = ul[i].iter().zip(&ul[j]).zip(pl).map(|((a, b), p)| a * b - p).collect();
        }
    }
    Ok(out)
}

/// Space-only commutator tensor of a vector movie.
pub fn commutator(u: &SpaceTimeField, ell: f64) -> Result<SpaceTimeField> {
    if u.components() < 2 {
        return Err(Error::InvalidField("commutator needs a vector field".into()));
    }
    let g = *u.grid();
    let m = Mollifier::space(ell);
    let c = u.components();
    let mut data = Vec::with_capacity(g.nt * c * (c + 1) / 2 * g.points());
    for it in 0..g.nt {
        let comps = u.frame_components(it);
        let ul: Vec<Vec<f64>> = comps.iter().map(|x| mollify_array(&g, x, &m)).collect::<Result<_>>()?;
        for r in commutator_frame(&g, &comps, &ul, &m)? {
            data.extend(r);
        }
    }
    SpaceTimeField::new(g, c * (c + 1) / 2, data, u.meta.clone())
}

/// Pointwise magnitude of a stack of component arrays.
pub(crate) fn magnitude(comps: &[Vec<f64>]) -> Vec<f64> {
    (0..comps[0].len())
        .map(|i| comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub ell: f64,
    /// `‖f − f_ℓ‖_p`
    pub difference: f64,
    /// `‖∇f_ℓ‖_p`
    pub gradient: f64,
    /// `‖∇(f_ℓ f_ℓ − (f f)_ℓ)‖_{p/2}`
    pub commutator_gradient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub p: f64,
    pub sigma_target: f64,
    pub rows: Vec<RateRow>,
    pub difference_fit: Option<ScalingFit>,
    pub gradient_fit: Option<ScalingFit>,
    pub commutator_fit: Option<ScalingFit>,
    /// Predicted exponents `(σ, σ − 1, 2σ − 1)`.
    pub predicted: (f64, f64, f64),
    /// All differences vanish (e.g. constant input).
    pub degenerate: bool,
}

impl RateReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("ell,difference,gradient,commutator_gradient\n");
        for r in &self.rows {
            s.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e}\n", r.ell, r.difference, r.gradient, r.commutator_gradient));
        }
        s
    }
}

/// Measures the three mollification estimates over `ells` on frame 0..nt.
pub fn mollification_rate_report(f: &SpaceTimeField, p: f64, sigma_target: f64, ells: &[f64]) -> Result<RateReport> {
    if ells.len() < 4 {
        return Err(Error::param("at least four scales required"));
    }
    let g = *f.grid();
    let sp = Spectral::for_grid(&g);
    let scale = f.max_abs().max(f64::MIN_POSITIVE);
    let mut rows = Vec::with_capacity(ells.len());
    for &ell in ells {
        let m = Mollifier::space(ell);
        let (mut d_acc, mut g_acc, mut c_acc) = (Vec::new(), Vec::new(), Vec::new());
        for it in 0..g.nt {
            let comps = f.frame_components(it);
            let fl: Vec<Vec<f64>> = comps.iter().map(|x| mollify_array(&g, x, &m)).collect::<Result<_>>()?;
            let diff: Vec<Vec<f64>> = comps.iter().zip(&fl).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
            d_acc.push(lp_norm(&magnitude(&diff), p));
            let grads: Vec<Vec<f64>> = fl.iter().flat_map(|x| sp.gradient(x)).collect();
            g_acc.push(lp_norm(&magnitude(&grads), p));
            let mut cgrads = Vec::new();
            for i in 0..comps.len() {
                let prod: Vec<f64> = comps[i].iter().map(|a| a * a).collect();
                let pl = mollify_array(&g, &prod, &m)?;
                let r: Vec<f64> = fl[i].iter().zip(&pl).map(|(a, b)| a * a - b).collect();
                cgrads.extend(sp.gradient(&r));
            }
            c_acc.push(lp_norm(&magnitude(&cgrads), (p / 2.0).max(1.0)));
        }
        rows.push(RateRow {
            ell,
            difference: lp_norm(&d_acc, p),
            gradient: lp_norm(&g_acc, p),
            commutator_gradient: lp_norm(&c_acc, (p / 2.0).max(1.0)),
        });
    }
    let floor = 1e-13 * scale;
    let degenerate = rows.iter().all(|r| r.difference <= floor);
    let xs: Vec<f64> = rows.iter().map(|r| r.ell).collect();
    let fit = |ys: Vec<f64>| if degenerate { None } else { fit_power_law(&xs, &ys, None).ok() };
    Ok(RateReport {
        p,
        sigma_target,
        difference_fit: fit(rows.iter().map(|r| r.difference).collect()),
        gradient_fit: fit(rows.iter().map(|r| r.gradient).collect()),
        commutator_fit: fit(rows.iter().map(|r| r.commutator_gradient).collect()),
        rows,
        predicted: (sigma_target, sigma_target - 1.0, 2.0 * sigma_target - 1.0),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{synth_field, SynthKind};

    #[test]
    fn constant_is_fixed() {
        let g = PeriodicGrid::snapshot(2, 32).unwrap();
        let f = synth_field(&g, &SynthKind::Constant { c: 1.5, components: 1 }, 0).unwrap();
        let out = mollify(&f, &Mollifier::space(0.6)).unwrap();
        assert!(out.data().iter().all(|v| (v - 1.5).abs() < 1e-13));
    }

    #[test]
    fn fft_matches_direct() {
        let g = PeriodicGrid::new(2, 16, 2.0 * std::f64::consts::PI, 9, 0.1).unwrap();
        let f = synth_field(&g, &SynthKind::RandomPhaseBesov { sigma: 0.4, p_target: 2.0 }, 2).unwrap();
        for m in [Mollifier::space(1.3), Mollifier::space_time(1.0, 0.35)] {
            let a = mollify(&f, &m).unwrap();
            let b = m.apply_direct(&f).unwrap();
            assert_eq!(a.nt(), b.nt());
            let err = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err < 1e-12, "err = {err}");
        }
    }

    #[test]
    fn stencil_is_normalized_and_trimmed() {
        let g = PeriodicGrid::new(1, 64, 2.0 * std::f64::consts::PI, 20, 0.1).unwrap();
        let m = Mollifier::space_time(0.5, 0.3);
        let total: f64 = m.stencil(&g).iter().map(|s| s.2).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(m.valid_frames(&g), 3..17);
        assert!(Mollifier::space(4.0).slices(&g).is_err());
    }

    #[test]
    fn commutator_vanishes_for_constants() {
        let g = PeriodicGrid::snapshot(2, 16).unwrap();
        let u = synth_field(&g, &SynthKind::Constant { c: 0.7, components: 2 }, 0).unwrap();
        let r = commutator(&u, 0.8).unwrap();
        assert_eq!(r.components(), 3);
        assert!(r.max_abs() < 1e-14);
    }

    #[test]
    fn sym_storage() {
        assert_eq!(sym_index(0, 0, 2), 0);
        assert_eq!(sym_index(1, 0, 2), 1);
        assert_eq!(sym_index(1, 1, 2), 2);
        assert_eq!(sym_index(2, 2, 3), 5);
        assert_eq!(sym_index(1, 2, 3), 4);
    }
}

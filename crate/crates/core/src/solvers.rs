//! Pseudo-spectral integrators for viscous Burgers, 2D Navier–Stokes in
//! vorticity form and 2D advection–diffusion.
//!
//! All three use classical fourth-order Runge–Kutta in integrating-factor
//! form, so the diffusive part is integrated exactly, and the 2/3 rule on
//! every quadratic product. The base step is `cfl·Δx/max|u|` on the initial
//! data, adjusted so that frames fall on a uniform time grid. Every ten steps
//! the CFL number is re-evaluated; if it is exceeded the step is split into
//! twice as many substeps from then on, which keeps the frame spacing fixed.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldMeta, PeriodicGrid, SpaceTimeField, Spectral, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Viscosity, or diffusivity for the scalar solver.
    pub nu: f64,
    pub t_final: f64,
    pub cfl: f64,
    pub dealias: bool,
    /// Number of base steps between saved frames.
    pub stride: usize,
    /// Saved-frame spacing; overrides `stride` when set.
    pub frame_dt: Option<f64>,
    /// Fixed base step; overrides the CFL estimate when set.
    pub dt: Option<f64>,
    /// Wavenumber shell `[k_min, k_max]` of the steady forcing.
    pub forcing_shell: Option<(f64, f64)>,
    pub forcing_amp: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nu: 1e-3,
            t_final: 1.0,
            cfl: 0.5,
            dealias: true,
            stride: 1,
            frame_dt: None,
            dt: None,
            forcing_shell: None,
            forcing_amp: 0.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::param("T must be positive"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::param("cfl must lie in (0, 1]"));
        }
        if !(self.nu >= 0.0) {
            return Err(Error::param("nu must be non-negative"));
        }
        if self.stride == 0 {
            return Err(Error::param("stride must be at least 1"));
        }
        if let Some(f) = self.frame_dt {
            if !(f > 0.0) {
                return Err(Error::param("frame_dt must be positive"));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::param("dt must be positive"));
            }
        }
        if let Some((a, b)) = self.forcing_shell {
            if !(a >= 0.0 && b >= a) {
                return Err(Error::param("forcing_shell must satisfy 0 ≤ k_min ≤ k_max"));
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys: `nu`, `kappa`,
    /// `T`, `cfl`, `dealias`, `stride`, `frame_dt`, `dt`, `forcing_shell`
    /// (two numbers), `forcing_amp`, `seed`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SolverConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::param(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| Error::param(format!("line {}: {key} expects a number", lineno + 1)))
            };
            match key {
                "nu" | "kappa" => cfg.nu = num(value)?,
                "T" => cfg.t_final = num(value)?,
                "cfl" => cfg.cfl = num(value)?,
                "dealias" => {
                    cfg.dealias = value
                        .parse()
                        .map_err(|_| Error::param(format!("line {}: dealias expects true/false", lineno + 1)))?
                }
                "stride" => {
                    cfg.stride = value
                        .parse()
                        .map_err(|_| Error::param(format!("line {}: stride expects an integer", lineno + 1)))?
                }
                "frame_dt" => cfg.frame_dt = Some(num(value)?),
                "dt" => cfg.dt = Some(num(value)?),
                "forcing_shell" => {
                    let parts: Vec<&str> = value.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
                    if parts.len() != 2 {
                        return Err(Error::param(format!("line {}: forcing_shell expects two numbers", lineno + 1)));
                    }
                    cfg.forcing_shell = Some((num(parts[0])?, num(parts[1])?));
                }
                "forcing_amp" => cfg.forcing_amp = num(value)?,
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| Error::param(format!("line {}: seed expects an integer", lineno + 1)))?
                }
                other => return Err(Error::param(format!("line {}: unknown key {other}", lineno + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Step and frame bookkeeping shared by the three solvers.
#[derive(Clone, Copy, Debug)]
struct Schedule {
    dt: f64,
    steps_per_frame: usize,
    frames: usize,
}

fn schedule(cfg: &SolverConfig, dx: f64, umax: f64) -> Schedule {
    let dt_cfl = cfg.dt.unwrap_or_else(|| {
        if umax > 0.0 {
            cfg.cfl * dx / umax
        } else {
            cfg.t_final / 16.0
        }
    });
    match cfg.frame_dt {
        Some(fdt) => {
            let frames = (cfg.t_final / fdt).round().max(1.0) as usize;
            let fdt = cfg.t_final / frames as f64;
            let spf = (fdt / dt_cfl).ceil().max(1.0) as usize;
            Schedule { dt: fdt / spf as f64, steps_per_frame: spf, frames }
        }
        None => {
            let spf = cfg.stride;
            let chunk = spf as f64 * dt_cfl;
            let frames = (cfg.t_final / chunk).ceil().max(1.0) as usize;
            Schedule { dt: cfg.t_final / (frames * spf) as f64, steps_per_frame: spf, frames }
        }
    }
}

/// Semi-discrete system `dû/dt = −λ(k) û + N(û, t)` on a half-spectrum.
trait Rhs {
    fn decay(&self) -> &[f64];
    fn nonlinear(&self, s: &[C64], t: f64) -> Vec<C64>;
    fn max_speed(&self, s: &[C64], t: f64) -> f64;
}

fn axpy(a: &[C64], h: f64, b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y * h).collect()
}

fn scale(a: &[C64], e: &[f64]) -> Vec<C64> {
    a.iter().zip(e).map(|(x, f)| x * f).collect()
}

fn rk4_if_step(rhs: &dyn Rhs, s: &[C64], t: f64, h: f64) -> Vec<C64> {
    let lam = rhs.decay();
    let e1: Vec<f64> = lam.iter().map(|l| (-l * h * 0.5).exp()).collect();
    let e2: Vec<f64> = lam.iter().map(|l| (-l * h).exp()).collect();
    let k1 = rhs.nonlinear(s, t);
    let u2 = scale(&axpy(s, 0.5 * h, &k1), &e1);
    let k2 = rhs.nonlinear(&u2, t + 0.5 * h);
    let eu = scale(s, &e1);
    let u3 = axpy(&eu, 0.5 * h, &k2);
    let k3 = rhs.nonlinear(&u3, t + 0.5 * h);
    let u4 = axpy(&scale(s, &e2), h, &scale(&k3, &e1));
    let k4 = rhs.nonlinear(&u4, t + h);
    (0..s.len())
        .map(|i| e2[i] * s[i] + (e2[i] * k1[i] + 2.0 * e1[i] * (k2[i] + k3[i]) + k4[i]) * (h / 6.0))
        .collect()
}

fn all_finite(s: &[C64]) -> bool {
    s.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

/// Integrates `rhs` from `s0`, calling `emit` with each saved frame's state.
fn integrate(
    rhs: &dyn Rhs,
    s0: Vec<C64>,
    sched: Schedule,
    dx: f64,
    cfl: f64,
    mut emit: impl FnMut(&[C64]) -> Result<()>,
) -> Result<()> {
    let mut s = s0;
    emit(&s)?;
    let mut t = 0.0;
    let mut sub = 1usize;
    let mut count = 0usize;
    for _ in 0..sched.frames {
        for _ in 0..sched.steps_per_frame {
            if count % 10 == 0 {
                let umax = rhs.max_speed(&s, t);
                while umax * sched.dt / sub as f64 > cfl * dx * 1.5 {
                    sub *= 2;
                    if sub > 1 << 12 {
                        return Err(Error::Solver(format!("CFL cannot be met at t = {t:.4}")));
                    }
                }
            }
            let h = sched.dt / sub as f64;
            for _ in 0..sub {
                s = rk4_if_step(rhs, &s, t, h);
                t += h;
            }
            count += 1;
        }
        if !all_finite(&s) {
            return Err(Error::Solver(format!("non-finite state at t = {t:.4}")));
        }
        emit(&s)?;
    }
    Ok(())
}

/// Steady band-limited forcing in the shell `[k_min, k_max]` with random
/// phases; unit-amplitude modes scaled by `amp`.
fn forcing_spectrum(sp: &Spectral, cfg: &SolverConfig) -> Option<Vec<C64>> {
    let (kmin, kmax) = cfg.forcing_shell?;
    if cfg.forcing_amp == 0.0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = sp.real_len() as f64;
    let d = sp.d();
    let mut f = vec![C64::new(0.0, 0.0); sp.len()];
    for (idx, v) in f.iter_mut().enumerate() {
        let phase = rng.gen_range(0.0..2.0 * PI);
        let k = sp.kmag_lattice(idx);
        let kk = sp.k(idx);
        // Keep self-conjugate modes out so the forcing stays real.
        if k >= kmin && k <= kmax && k > 0.0 && kk[d - 1] > 0 {
            *v = C64::from_polar(cfg.forcing_amp * n / 2.0, phase);
        }
    }
    Some(f)
}

struct Burgers {
    sp: Arc<Spectral>,
    decay: Vec<f64>,
    dealias: bool,
    forcing: Option<Vec<C64>>,
}

impl Rhs for Burgers {
    fn decay(&self) -> &[f64] {
        &self.decay
    }

    fn nonlinear(&self, s: &[C64], _t: f64) -> Vec<C64> {
        let u = self.sp.inverse(s.to_vec());
        let sq: Vec<f64> = u.iter().map(|v| 0.5 * v * v).collect();
        let mut f = self.sp.forward(&sq);
        if self.dealias {
            self.sp.dealias(&mut f);
        }
        let mut out = self.sp.derivative(&f, 0);
        for v in &mut out {
            *v = -*v;
        }
        if let Some(force) = &self.forcing {
            for (o, g) in out.iter_mut().zip(force) {
                *o += g;
            }
        }
        out
    }

    fn max_speed(&self, s: &[C64], _t: f64) -> f64 {
        max_abs(&self.sp.inverse(s.to_vec()))
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn single_snapshot(f: &SpaceTimeField, comps: usize, what: &str) -> Result<()> {
    if f.components() != comps {
        return Err(Error::InvalidField(format!("{what} needs {comps} component(s), got {}", f.components())));
    }
    if f.nt() != 1 {
        return Err(Error::InvalidField(format!("{what} needs a single snapshot, got {} frames", f.nt())));
    }
    Ok(())
}

fn movie_grid(space: &PeriodicGrid, sched: Schedule) -> Result<PeriodicGrid> {
    space.with_time(sched.frames + 1, sched.dt * sched.steps_per_frame as f64)
}

fn viscous_decay(sp: &Spectral, nu: f64) -> Vec<f64> {
    (0..sp.len()).map(|i| nu * sp.k2(i)).collect()
}

/// Viscous Burgers `∂_t u + ∂_x(u²/2) = ν ∂_xx u (+ f)`.
pub fn solve_burgers(u0: &SpaceTimeField, cfg: &SolverConfig) -> Result<SpaceTimeField> {
    cfg.validate()?;
    let g = *u0.grid();
    if g.d != 1 {
        return Err(Error::GridMismatch("Burgers solver needs d = 1".into()));
    }
    single_snapshot(u0, 1, "Burgers initial data")?;
    if !(cfg.nu > 0.0) {
        return Err(Error::param("Burgers solver needs nu > 0"));
    }
    let sp = Spectral::for_grid(&g);
    let rhs = Burgers {
        decay: viscous_decay(&sp, cfg.nu),
        dealias: cfg.dealias,
        forcing: forcing_spectrum(&sp, cfg),
        sp: sp.clone(),
    };
    let sched = schedule(cfg, g.spacing(), u0.max_abs());
    let grid = movie_grid(&g, sched)?;
    let mut data = Vec::with_capacity(grid.nt * g.points());
    integrate(&rhs, sp.forward(u0.component(0, 0)), sched, g.spacing(), cfg.cfl, |s| {
        data.extend(sp.inverse(s.to_vec()));
        Ok(())
    })?;
    let meta = FieldMeta {
        name: "burgers".into(),
        viscosity: cfg.nu,
        provenance: format!("solve_burgers:{}", serde_json::to_string(cfg).unwrap_or_default()),
        seed: cfg.forcing_shell.map(|_| cfg.seed),
    };
    SpaceTimeField::new(grid, 1, data, meta)
}

struct Vorticity {
    sp: Arc<Spectral>,
    decay: Vec<f64>,
    dealias: bool,
    forcing: Option<Vec<C64>>,
}

/// Velocity `(∂_y ψ, −∂_x ψ)` with `−Δψ = ω`, from the vorticity spectrum.
pub fn velocity_from_vorticity(sp: &Spectral, w: &[C64]) -> [Vec<C64>; 2] {
    let psi: Vec<C64> = w
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let k2 = sp.k2(i);
            if k2 > 0.0 {
                v / k2
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let u = sp.derivative(&psi, 1);
    let v: Vec<C64> = sp.derivative(&psi, 0).into_iter().map(|x| -x).collect();
    [u, v]
}

impl Rhs for Vorticity {
    fn decay(&self) -> &[f64] {
        &self.decay
    }

    fn nonlinear(&self, s: &[C64], _t: f64) -> Vec<C64> {
        let [us, vs] = velocity_from_vorticity(&self.sp, s);
        let u = self.sp.inverse(us);
        let v = self.sp.inverse(vs);
        let wx = self.sp.inverse(self.sp.derivative(s, 0));
        let wy = self.sp.inverse(self.sp.derivative(s, 1));
        let adv: Vec<f64> = (0..u.len()).map(|i| -(u[i] * wx[i] + v[i] * wy[i])).collect();
        let mut out = self.sp.forward(&adv);
        if self.dealias {
            self.sp.dealias(&mut out);
        }
        if let Some(force) = &self.forcing {
            for (o, g) in out.iter_mut().zip(force) {
                *o += g;
            }
        }
        out
    }

    fn max_speed(&self, s: &[C64], _t: f64) -> f64 {
        let [us, vs] = velocity_from_vorticity(&self.sp, s);
        max_abs(&self.sp.inverse(us)).max(max_abs(&self.sp.inverse(vs)))
    }
}

/// 2D incompressible Navier–Stokes in vorticity form; returns the velocity.
pub fn solve_ns2d(w0: &SpaceTimeField, cfg: &SolverConfig) -> Result<SpaceTimeField> {
    cfg.validate()?;
    let g = *w0.grid();
    if g.d != 2 {
        return Err(Error::GridMismatch("Navier–Stokes solver needs d = 2".into()));
    }
    single_snapshot(w0, 1, "initial vorticity")?;
    let scale = w0.max_abs().max(1.0);
    if w0.mean().abs() > 1e-10 * scale {
        return Err(Error::InvalidField(format!("initial vorticity has mean {:.3e}", w0.mean())));
    }
    if !(cfg.nu > 0.0) {
        return Err(Error::param("Navier–Stokes solver needs nu > 0"));
    }
    let sp = Spectral::for_grid(&g);
    let rhs = Vorticity {
        decay: viscous_decay(&sp, cfg.nu),
        dealias: cfg.dealias,
        forcing: forcing_spectrum(&sp, cfg),
        sp: sp.clone(),
    };
    let mut s0 = sp.forward(w0.component(0, 0));
    s0[0] = C64::new(0.0, 0.0);
    let umax = rhs.max_speed(&s0, 0.0);
    let sched = schedule(cfg, g.spacing(), umax);
    let grid = movie_grid(&g, sched)?;
    let mut data = Vec::with_capacity(grid.nt * 2 * g.points());
    integrate(&rhs, s0, sched, g.spacing(), cfg.cfl, |s| {
        let [u, v] = velocity_from_vorticity(&sp, s);
        data.extend(sp.inverse(u));
        data.extend(sp.inverse(v));
        Ok(())
    })?;
    let meta = FieldMeta {
        name: "ns2d".into(),
        viscosity: cfg.nu,
        provenance: format!("solve_ns2d:{}", serde_json::to_string(cfg).unwrap_or_default()),
        seed: cfg.forcing_shell.map(|_| cfg.seed),
    };
    SpaceTimeField::new(grid, 2, data, meta)
}

/// Vorticity `∂_x v − ∂_y u` of one frame of a 2D velocity field.
pub fn vorticity(u: &SpaceTimeField, it: usize) -> Result<Vec<f64>> {
    if u.grid().d != 2 || u.components() != 2 {
        return Err(Error::InvalidField("vorticity needs a 2D velocity".into()));
    }
    let sp = Spectral::for_grid(u.grid());
    let vx = sp.derivative_real(u.component(it, 1), 0);
    let uy = sp.derivative_real(u.component(it, 0), 1);
    Ok(vx.iter().zip(&uy).map(|(a, b)| a - b).collect())
}

/// Advecting velocity: steady, or a movie interpolated linearly in time.
#[derive(Clone, Copy, Debug)]
pub enum Velocity<'a> {
    Steady(&'a SpaceTimeField),
    Movie(&'a SpaceTimeField),
}

impl<'a> Velocity<'a> {
    pub fn field(&self) -> &'a SpaceTimeField {
        match *self {
            Velocity::Steady(f) | Velocity::Movie(f) => f,
        }
    }

    pub fn at(&self, t: f64) -> Vec<Vec<f64>> {
        match *self {
            Velocity::Steady(f) => f.frame_components(0),
            Velocity::Movie(f) => {
                let g = f.grid();
                if g.nt == 1 {
                    return f.frame_components(0);
                }
                let pos = (t / g.dt).clamp(0.0, (g.nt - 1) as f64);
                let i0 = (pos.floor() as usize).min(g.nt - 2);
                let w = pos - i0 as f64;
                (0..f.components())
                    .map(|c| {
                        let a = f.component(i0, c);
                        let b = f.component(i0 + 1, c);
                        a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect()
                    })
                    .collect()
            }
        }
    }
}

struct Advection<'a> {
    sp: Arc<Spectral>,
    decay: Vec<f64>,
    dealias: bool,
    vel: Velocity<'a>,
}

impl Rhs for Advection<'_> {
    fn decay(&self) -> &[f64] {
        &self.decay
    }

    fn nonlinear(&self, s: &[C64], t: f64) -> Vec<C64> {
        let v = self.vel.at(t);
        let d = self.sp.d();
        let mut acc = vec![0.0; self.sp.real_len()];
        for a in 0..d {
            let g = self.sp.inverse(self.sp.derivative(s, a));
            for i in 0..acc.len() {
                acc[i] -= v[a][i] * g[i];
            }
        }
        let mut out = self.sp.forward(&acc);
        if self.dealias {
            self.sp.dealias(&mut out);
        }
        out
    }

    fn max_speed(&self, _s: &[C64], t: f64) -> f64 {
        let v = self.vel.at(t);
        (0..v[0].len())
            .map(|i| v.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Advection–diffusion `∂_t θ + v·∇θ = κΔθ` with `κ = cfg.nu`.
pub fn solve_advection(theta0: &SpaceTimeField, vel: Velocity<'_>, cfg: &SolverConfig) -> Result<SpaceTimeField> {
    cfg.validate()?;
    let g = *theta0.grid();
    single_snapshot(theta0, 1, "initial scalar")?;
    let vf = vel.field();
    if !vf.grid().same_space(&g) || vf.components() != g.d {
        return Err(Error::GridMismatch("velocity and scalar live on different grids".into()));
    }
    if !(cfg.nu > 0.0) {
        return Err(Error::param("advection solver needs kappa > 0"));
    }
    let sp = Spectral::for_grid(&g);
    let div_tol = 1e-8 * vf.max_abs().max(1.0);
    for it in [0, vf.nt() - 1] {
        let div = sp.divergence(&vf.frame_components(it));
        if max_abs(&div) > div_tol {
            return Err(Error::InvalidField("advecting velocity is not divergence-free".into()));
        }
    }
    let rhs = Advection { decay: viscous_decay(&sp, cfg.nu), dealias: cfg.dealias, vel, sp: sp.clone() };
    let sched = schedule(cfg, g.spacing(), rhs.max_speed(&[], 0.0));
    if let Velocity::Movie(m) = vel {
        if m.nt() > 1 && m.grid().duration() + 1e-12 < cfg.t_final {
            return Err(Error::param("velocity movie is shorter than T"));
        }
    }
    let grid = movie_grid(&g, sched)?;
    let mut data = Vec::with_capacity(grid.nt * g.points());
    integrate(&rhs, sp.forward(theta0.component(0, 0)), sched, g.spacing(), cfg.cfl, |s| {
        data.extend(sp.inverse(s.to_vec()));
        Ok(())
    })?;
    let meta = FieldMeta {
        name: "scalar".into(),
        viscosity: cfg.nu,
        provenance: format!("solve_advection:{}", serde_json::to_string(cfg).unwrap_or_default()),
        seed: None,
    };
    SpaceTimeField::new(grid, 1, data, meta)
}

/// `½∫|u|² dx` of frame `it`.
pub fn kinetic_energy(u: &SpaceTimeField, it: usize) -> f64 {
    let g = u.grid();
    let s: f64 = (0..u.components()).map(|c| u.component(it, c).iter().map(|v| v * v).sum::<f64>()).sum();
    0.5 * s * g.cell_volume()
}

/// `ν∫|∇u|² dx` of frame `it` with `ν` from the field metadata.
pub fn dissipation_rate(u: &SpaceTimeField, it: usize) -> f64 {
    let g = u.grid();
    let sp = Spectral::for_grid(g);
    let mut s = 0.0;
    for c in 0..u.components() {
        for grad in sp.gradient(u.component(it, c)) {
            s += grad.iter().map(|v| v * v).sum::<f64>();
        }
    }
    u.meta.viscosity * s * g.cell_volume()
}

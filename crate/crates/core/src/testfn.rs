//! Smooth space-time test functions with exact derivatives.
//!
//! Spatial parts are either band-limited trigonometric polynomials, whose
//! derivatives are exact spectrally, or products of septic smoothstep
//! windows differentiated analytically. Time parts are the polynomial bump
//! `(1 − s²)⁴` on `(t₀, t₁)`.

use std::f64::consts::PI;
use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{PeriodicGrid, Spectral, C64};
use crate::mollify::{convolve, Mollifier};

/// Values and derivatives of a test function on one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFrame {
    pub value: Vec<f64>,
    pub dt: Vec<f64>,
    pub grad: Vec<Vec<f64>>,
    pub lap: Vec<f64>,
}

impl TestFrame {
    fn zeros(d: usize, np: usize) -> Self {
        Self { value: vec![0.0; np], dt: vec![0.0; np], grad: vec![vec![0.0; np]; d], lap: vec![0.0; np] }
    }

    fn axpy(&mut self, a: f64, b: f64, sp: &SpacePart) {
        for i in 0..self.value.len() {
            self.value[i] += a * sp.value[i];
            self.dt[i] += b * sp.value[i];
            self.lap[i] += a * sp.lap[i];
        }
        for (g, s) in self.grad.iter_mut().zip(&sp.grad) {
            for (x, y) in g.iter_mut().zip(s) {
                *x += a * y;
            }
        }
    }
}

pub trait TestFunctional: Send + Sync {
    fn id(&self) -> String;
    /// Frames of a movie on `g` where the function may be nonzero.
    fn support(&self, g: &PeriodicGrid) -> Range<usize>;
    fn frame(&self, g: &PeriodicGrid, it: usize) -> TestFrame;

    fn sup_norm(&self, g: &PeriodicGrid) -> f64 {
        self.support(g)
            .map(|it| self.frame(g, it).value.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .fold(0.0, f64::max)
    }
}

/// Checks that `phi` vanishes outside the frames `valid` of the movie.
pub fn check_support(phi: &dyn TestFunctional, g: &PeriodicGrid, valid: Range<usize>) -> Result<Range<usize>> {
    let s = phi.support(g);
    let leaks_before_start = s.start == 0 && s.end > 0 && {
        let f = phi.frame(g, 0);
        f.value.iter().chain(&f.dt).any(|v| *v != 0.0)
    };
    if s.start < valid.start || s.end > valid.end || leaks_before_start {
        return Err(Error::Support(format!(
            "test function {} lives on frames {s:?}, outside {valid:?}",
            phi.id()
        )));
    }
    Ok(s)
}

/// Bump `(1 − s²)⁴` with `s` mapping `(t₀, t₁)` onto `(−1, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeBump {
    pub t0: f64,
    pub t1: f64,
}

impl TimeBump {
    pub fn new(t0: f64, t1: f64) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::param("time bump needs t0 < t1"));
        }
        Ok(Self { t0, t1 })
    }

    fn s(&self, t: f64) -> f64 {
        (2.0 * t - self.t0 - self.t1) / (self.t1 - self.t0)
    }

    pub fn value(&self, t: f64) -> f64 {
        let s = self.s(t);
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - s * s).powi(4)
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let s = self.s(t);
        if s.abs() >= 1.0 {
            0.0
        } else {
            -8.0 * s * (1.0 - s * s).powi(3) * 2.0 / (self.t1 - self.t0)
        }
    }

    /// `∫ b dt = (t₁ − t₀)/2 · 256/315`.
    pub fn integral(&self) -> f64 {
        0.5 * (self.t1 - self.t0) * 256.0 / 315.0
    }

    pub fn frames(&self, g: &PeriodicGrid) -> Range<usize> {
        let a = (self.t0 / g.dt).floor().max(0.0) as usize;
        let b = (self.t1 / g.dt - 1e-9).ceil() as usize + 1;
        a..b.max(a)
    }
}

/// Spatial factor with its gradient and Laplacian.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacePart {
    pub value: Vec<f64>,
    pub grad: Vec<Vec<f64>>,
    pub lap: Vec<f64>,
}

impl SpacePart {
    pub fn ones(g: &PeriodicGrid) -> Self {
        let np = g.points();
        Self { value: vec![1.0; np], grad: vec![vec![0.0; np]; g.d], lap: vec![0.0; np] }
    }

    /// Derivatives taken spectrally; exact for trigonometric polynomials.
    pub fn from_spectral(g: &PeriodicGrid, value: Vec<f64>) -> Self {
        let sp = Spectral::for_grid(g);
        let s = sp.forward(&value);
        let grad = (0..g.d).map(|a| sp.inverse(sp.derivative(&s, a))).collect();
        let lap = sp.inverse(sp.laplacian_spec(&s));
        Self { value, grad, lap }
    }

    /// Random trigonometric polynomial with modes `0 < |k| ≤ kmax` (lattice
    /// units), normalized to unit maximum.
    pub fn random(g: &PeriodicGrid, kmax: f64, seed: u64) -> Self {
        let sp = Spectral::for_grid(g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = g.d;
        let mut s = vec![C64::new(0.0, 0.0); sp.len()];
        for (idx, v) in s.iter_mut().enumerate() {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let ph: f64 = rng.gen_range(0.0..2.0 * PI);
            let k = sp.k(idx);
            let r = sp.kmag_lattice(idx);
            if r > 0.0 && r <= kmax && k[d - 1] > 0 {
                *v = C64::from_polar(a, ph);
            }
        }
        let raw = sp.inverse(s);
        let m = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let scaled: Vec<f64> = raw.iter().map(|v| if m > 0.0 { v / m } else { 0.0 }).collect();
        Self::from_spectral(g, scaled)
    }

    /// Product over axes of windows equal to 1 within `inner` of `center`
    /// and 0 beyond `outer` (periodic distance), blended by the septic
    /// smoothstep.
    pub fn plateau(g: &PeriodicGrid, center: [f64; 3], inner: f64, outer: f64) -> Result<Self> {
        if !(outer > inner && inner >= 0.0 && outer < g.length / 2.0) {
            return Err(Error::param("plateau needs 0 ≤ inner < outer < L/2"));
        }
        let np = g.points();
        let mut value = vec![0.0; np];
        let mut grad = vec![vec![0.0; np]; g.d];
        let mut lap = vec![0.0; np];
        for p in 0..np {
            let x = g.coords(p);
            let mut w = [(1.0, 0.0, 0.0); 3];
            for a in 0..g.d {
                let mut dx = (x[a] - center[a]).rem_euclid(g.length);
                if dx > g.length / 2.0 {
                    dx -= g.length;
                }
                w[a] = window(dx, inner, outer);
            }
            let prod: f64 = (0..g.d).map(|a| w[a].0).product();
            value[p] = prod;
            for a in 0..g.d {
                let others: f64 = (0..g.d).filter(|&b| b != a).map(|b| w[b].0).product();
                grad[a][p] = w[a].1 * others;
                lap[p] += w[a].2 * others;
            }
        }
        Ok(Self { value, grad, lap })
    }
}

fn septic(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let v = 1.0 - u;
    let s = u.powi(4) * (35.0 - 84.0 * u + 70.0 * u * u - 20.0 * u.powi(3));
    let s1 = 140.0 * u.powi(3) * v.powi(3);
    let s2 = 420.0 * u * u * v * v * (1.0 - 2.0 * u);
    (s, s1, s2)
}

/// Window value and first two derivatives at signed offset `dx`.
fn window(dx: f64, inner: f64, outer: f64) -> (f64, f64, f64) {
    let w = outer - inner;
    let r = dx.abs();
    let (s, s1, s2) = septic((r - inner) / w);
    let sign = if dx < 0.0 { -1.0 } else { 1.0 };
    (1.0 - s, -s1 / w * sign, -s2 / (w * w))
}

/// `φ(x, t) = a(x) b(t)`.
#[derive(Clone, Debug)]
pub struct Separable {
    pub name: String,
    pub space: Arc<SpacePart>,
    pub time: TimeBump,
}

impl Separable {
    pub fn new(name: impl Into<String>, space: SpacePart, time: TimeBump) -> Self {
        Self { name: name.into(), space: Arc::new(space), time }
    }
}

impl TestFunctional for Separable {
    fn id(&self) -> String {
        self.name.clone()
    }

    fn support(&self, g: &PeriodicGrid) -> Range<usize> {
        self.time.frames(g)
    }

    fn frame(&self, g: &PeriodicGrid, it: usize) -> TestFrame {
        let t = g.time(it);
        let mut f = TestFrame::zeros(g.d, g.points());
        f.axpy(self.time.value(t), self.time.derivative(t), &self.space);
        f
    }

    fn sup_norm(&self, _g: &PeriodicGrid) -> f64 {
        self.space.value.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// `φ ∗ ρ` for separable `φ` and a space-time mollifier `ρ`.
#[derive(Clone, Debug)]
pub struct MollifiedSeparable {
    base: Separable,
    mt: usize,
    slices: Vec<SpacePart>,
    tag: String,
}

impl MollifiedSeparable {
    pub fn new(g: &PeriodicGrid, base: &Separable, m: &Mollifier) -> Result<Self> {
        let ks = m.slices(g)?;
        let sp = Spectral::for_grid(g);
        let slices = ks
            .multipliers
            .iter()
            .map(|mult| {
                let conv = |x: &[f64]| convolve(&sp, x, mult);
                SpacePart {
                    value: conv(&base.space.value),
                    grad: base.space.grad.iter().map(|x| conv(x)).collect(),
                    lap: conv(&base.space.lap),
                }
            })
            .collect();
        Ok(Self { base: base.clone(), mt: ks.mt, slices, tag: format!("ℓ={},ℓt={:?}", m.ell, m.ell_t) })
    }
}

impl TestFunctional for MollifiedSeparable {
    fn id(&self) -> String {
        format!("{}*rho({})", self.base.name, self.tag)
    }

    fn support(&self, g: &PeriodicGrid) -> Range<usize> {
        let s = self.base.support(g);
        s.start.saturating_sub(self.mt)..s.end + self.mt
    }

    fn frame(&self, g: &PeriodicGrid, it: usize) -> TestFrame {
        let mut f = TestFrame::zeros(g.d, g.points());
        let t = g.time(it);
        for (slot, part) in self.slices.iter().enumerate() {
            let tau = slot as f64 - self.mt as f64;
            let ts = t - tau * g.dt;
            let (b, db) = (self.base.time.value(ts), self.base.time.derivative(ts));
            if b != 0.0 || db != 0.0 {
                f.axpy(b, db, part);
            }
        }
        f
    }
}

/// Finite linear combination `Σ c_i φ_i`.
#[derive(Clone)]
pub struct Combination {
    pub terms: Vec<(f64, Arc<dyn TestFunctional>)>,
}

impl TestFunctional for Combination {
    fn id(&self) -> String {
        self.terms.iter().map(|(c, f)| format!("{c}·{}", f.id())).collect::<Vec<_>>().join("+")
    }

    fn support(&self, g: &PeriodicGrid) -> Range<usize> {
        let mut lo = usize::MAX;
        let mut hi = 0;
        for (_, f) in &self.terms {
            let s = f.support(g);
            lo = lo.min(s.start);
            hi = hi.max(s.end);
        }
        if lo > hi {
            0..0
        } else {
            lo..hi
        }
    }

    fn frame(&self, g: &PeriodicGrid, it: usize) -> TestFrame {
        let mut out = TestFrame::zeros(g.d, g.points());
        for (c, f) in &self.terms {
            if !f.support(g).contains(&it) {
                continue;
            }
            let fr = f.frame(g, it);
            for i in 0..out.value.len() {
                out.value[i] += c * fr.value[i];
                out.dt[i] += c * fr.dt[i];
                out.lap[i] += c * fr.lap[i];
            }
            for (a, b) in out.grad.iter_mut().zip(&fr.grad) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += c * y;
                }
            }
        }
        out
    }
}

/// `φ − φ ∗ ρ`.
pub fn difference(base: &Separable, mollified: MollifiedSeparable) -> Combination {
    Combination { terms: vec![(1.0, Arc::new(base.clone())), (-1.0, Arc::new(mollified))] }
}

/// A family of `count` random separable test functions sharing one bump.
pub fn random_family(g: &PeriodicGrid, count: usize, kmax: f64, time: TimeBump, seed: u64) -> Vec<Separable> {
    (0..count)
        .map(|i| {
            let s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
            Separable::new(format!("rand{seed}-{i}"), SpacePart::random(g, kmax, s), time)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_derivative_matches_difference_quotient() {
        let b = TimeBump::new(0.2, 1.4).unwrap();
        for t in [0.3, 0.7, 0.81, 1.3] {
            let h = 1e-6;
            let fd = (b.value(t + h) - b.value(t - h)) / (2.0 * h);
            assert!((fd - b.derivative(t)).abs() < 1e-6);
        }
        assert_eq!(b.value(0.2), 0.0);
        assert_eq!(b.value(1.5), 0.0);
    }

    #[test]
    fn plateau_derivatives_are_consistent() {
        let g = PeriodicGrid::snapshot(1, 4096).unwrap();
        let sp = SpacePart::plateau(&g, [3.0, 0.0, 0.0], 0.5, 1.2).unwrap();
        assert_eq!(sp.value[g.n * 3 / 6], 1.0);
        let h = g.spacing();
        for i in 1..g.n - 1 {
            let fd = (sp.value[i + 1] - sp.value[i - 1]) / (2.0 * h);
            assert!((fd - sp.grad[0][i]).abs() < 1e-4);
        }
    }

    #[test]
    fn mollified_mass_and_support() {
        let g = PeriodicGrid::new(1, 64, 2.0 * PI, 40, 0.05).unwrap();
        let base = Separable::new("one", SpacePart::ones(&g), TimeBump::new(0.5, 1.5).unwrap());
        let m = Mollifier::space_time(0.3, 0.2);
        let mo = MollifiedSeparable::new(&g, &base, &m).unwrap();
        assert_eq!(mo.support(&g), 6..35);
        // A spatially constant φ stays constant, and the time sum of ρ∗b
        // equals the time sum of b.
        let s0: f64 = (0..g.nt).map(|it| base.frame(&g, it).value[0]).sum();
        let s1: f64 = (0..g.nt).map(|it| mo.frame(&g, it).value[0]).sum();
        assert!((s0 - s1).abs() < 1e-12);
    }
}

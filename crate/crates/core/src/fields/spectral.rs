//! Real-to-complex transforms on periodic grids of dimension 1 to 3.
//!
//! The spectrum is stored as a half-spectrum: the last axis keeps
//! `n/2 + 1` nonnegative frequencies, the other axes keep all `n`. Spectral
//! index `(j0, .., j_last)` is flattened row-major.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use super::grid::{signed_index, PeriodicGrid};

pub type C64 = Complex64;

pub struct Spectral {
    d: usize,
    n: usize,
    nh: usize,
    unit: f64,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kint: Vec<[i32; 3]>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("d", &self.d).field("n", &self.n).finish()
    }
}

type CacheKey = (usize, usize, u64);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<Spectral>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<Spectral>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Spectral {
    /// Shared transform plans for the spatial part of `grid`.
    pub fn for_grid(grid: &PeriodicGrid) -> Arc<Spectral> {
        Self::for_shape(grid.d, grid.n, grid.length)
    }

    pub fn for_shape(d: usize, n: usize, length: f64) -> Arc<Spectral> {
        let key = (d, n, length.to_bits());
        let mut map = cache().lock().expect("spectral cache poisoned");
        map.entry(key)
            .or_insert_with(|| Arc::new(Spectral::build(d, n, length)))
            .clone()
    }

    fn build(d: usize, n: usize, length: f64) -> Self {
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        let nh = n / 2 + 1;
        let len = n.pow(d as u32 - 1) * nh;
        let mut kint = Vec::with_capacity(len);
        for idx in 0..len {
            let mut k = [0i32; 3];
            let mut rem = idx;
            k[d - 1] = (rem % nh) as i32;
            rem /= nh;
            for a in (0..d - 1).rev() {
                k[a] = signed_index(rem % n, n) as i32;
                rem /= n;
            }
            kint.push(k);
        }
        Self {
            d,
            n,
            nh,
            unit: 2.0 * std::f64::consts::PI / length,
            r2c: rp.plan_fft_forward(n),
            c2r: rp.plan_fft_inverse(n),
            fwd: cp.plan_fft_forward(n),
            inv: cp.plan_fft_inverse(n),
            kint,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn real_len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn len(&self) -> usize {
        self.kint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kint.is_empty()
    }

    /// Integer lattice wavevector of spectral index `idx`.
    pub fn k(&self, idx: usize) -> [i32; 3] {
        self.kint[idx]
    }

    pub fn kvecs(&self) -> &[[i32; 3]] {
        &self.kint
    }

    /// Physical wavenumber along `axis`.
    pub fn kphys(&self, idx: usize, axis: usize) -> f64 {
        self.kint[idx][axis] as f64 * self.unit
    }

    pub fn unit(&self) -> f64 {
        self.unit
    }

    /// Squared physical wavenumber magnitude.
    pub fn k2(&self, idx: usize) -> f64 {
        let k = self.kint[idx];
        let s: i64 = (0..self.d).map(|a| (k[a] as i64) * (k[a] as i64)).sum();
        s as f64 * self.unit * self.unit
    }

    /// Lattice magnitude `|k|` in integer units.
    pub fn kmag_lattice(&self, idx: usize) -> f64 {
        let k = self.kint[idx];
        ((0..self.d).map(|a| (k[a] as f64).powi(2)).sum::<f64>()).sqrt()
    }

    /// Whether `idx` lies on a Nyquist plane along `axis`.
    pub fn is_nyquist(&self, idx: usize, axis: usize) -> bool {
        self.kint[idx][axis].unsigned_abs() as usize == self.n / 2
    }

    /// Multiplicity of a half-spectrum entry in the full spectrum.
    pub fn weight(&self, idx: usize) -> f64 {
        let j = self.kint[idx][self.d - 1];
        if j == 0 || j as usize == self.n / 2 {
            1.0
        } else {
            2.0
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<C64> {
        let n = self.n;
        let nh = self.nh;
        assert_eq!(x.len(), self.real_len(), "real array length mismatch");
        let rows = x.len() / n;
        let mut out = vec![C64::new(0.0, 0.0); rows * nh];
        let mut row = vec![0.0; n];
        let mut scratch = self.r2c.make_scratch_vec();
        for r in 0..rows {
            row.copy_from_slice(&x[r * n..(r + 1) * n]);
            self.r2c
                .process_with_scratch(&mut row, &mut out[r * nh..(r + 1) * nh], &mut scratch)
                .expect("r2c length");
        }
        for axis in (0..self.d - 1).rev() {
            self.c2c_axis(&mut out, axis, false);
        }
        out
    }

    /// Inverse transform, normalized so that `inverse(forward(x)) == x`.
    pub fn inverse(&self, mut s: Vec<C64>) -> Vec<f64> {
        let n = self.n;
        let nh = self.nh;
        assert_eq!(s.len(), self.len(), "spectral array length mismatch");
        for axis in 0..self.d - 1 {
            self.c2c_axis(&mut s, axis, true);
        }
        let rows = s.len() / nh;
        let scale = 1.0 / self.real_len() as f64;
        let mut out = vec![0.0; rows * n];
        let mut scratch = self.c2r.make_scratch_vec();
        for r in 0..rows {
            let line = &mut s[r * nh..(r + 1) * nh];
            line[0].im = 0.0;
            line[nh - 1].im = 0.0;
            // Imaginary parts at DC/Nyquist are zeroed above, so the only
            // possible error is a length mismatch, which the asserts exclude.
            let _ = self
                .c2r
                .process_with_scratch(line, &mut out[r * n..(r + 1) * n], &mut scratch);
        }
        for v in &mut out {
            *v *= scale;
        }
        out
    }

    fn c2c_axis(&self, data: &mut [C64], axis: usize, inverse: bool) {
        let n = self.n;
        let dims: Vec<usize> = (0..self.d).map(|a| if a == self.d - 1 { self.nh } else { n }).collect();
        let stride: usize = dims[axis + 1..].iter().product();
        let outer: usize = dims[..axis].iter().product();
        let lines = outer * stride;
        let mut buf = vec![C64::new(0.0, 0.0); lines * n];
        for o in 0..outer {
            for i in 0..stride {
                let line = o * stride + i;
                let base = o * n * stride + i;
                for j in 0..n {
                    buf[line * n + j] = data[base + j * stride];
                }
            }
        }
        let plan = if inverse { &self.inv } else { &self.fwd };
        plan.process(&mut buf);
        for o in 0..outer {
            for i in 0..stride {
                let line = o * stride + i;
                let base = o * n * stride + i;
                for j in 0..n {
                    data[base + j * stride] = buf[line * n + j];
                }
            }
        }
    }

    /// Flattened index of lattice wavevector `k`, if it is stored.
    pub fn index_of(&self, k: [i32; 3]) -> Option<usize> {
        let n = self.n as i32;
        let mut idx = 0usize;
        for a in 0..self.d - 1 {
            if k[a] <= -n / 2 || k[a] > n / 2 {
                return None;
            }
            idx = idx * self.n + k[a].rem_euclid(n) as usize;
        }
        let last = k[self.d - 1];
        if last < 0 || last as usize >= self.nh {
            return None;
        }
        Some(idx * self.nh + last as usize)
    }

    /// Trigonometric interpolation of `x` onto the grid of `target`; modes
    /// at or beyond the coarser Nyquist frequency are dropped.
    pub fn resample(&self, x: &[f64], target: &Spectral) -> Vec<f64> {
        assert_eq!(self.d, target.d, "resample across dimensions");
        let s = self.forward(x);
        let cut = (self.n.min(target.n) / 2) as i32;
        let scale = target.real_len() as f64 / self.real_len() as f64;
        let out = target
            .kint
            .iter()
            .map(|k| {
                if (0..self.d).any(|a| k[a].abs() >= cut) {
                    return C64::new(0.0, 0.0);
                }
                self.index_of(*k).map_or(C64::new(0.0, 0.0), |i| s[i] * scale)
            })
            .collect();
        target.inverse(out)
    }

    /// Spectral derivative along `axis` (Nyquist modes dropped).
    pub fn derivative(&self, s: &[C64], axis: usize) -> Vec<C64> {
        s.iter()
            .enumerate()
            .map(|(idx, &v)| {
                if self.is_nyquist(idx, axis) {
                    C64::new(0.0, 0.0)
                } else {
                    v * C64::new(0.0, self.kphys(idx, axis))
                }
            })
            .collect()
    }

    pub fn derivative_real(&self, x: &[f64], axis: usize) -> Vec<f64> {
        let s = self.forward(x);
        self.inverse(self.derivative(&s, axis))
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let s = self.forward(x);
        (0..self.d).map(|a| self.inverse(self.derivative(&s, a))).collect()
    }

    pub fn laplacian_spec(&self, s: &[C64]) -> Vec<C64> {
        s.iter().enumerate().map(|(idx, &v)| v * (-self.k2(idx))).collect()
    }

    pub fn laplacian(&self, x: &[f64]) -> Vec<f64> {
        let s = self.forward(x);
        self.inverse(self.laplacian_spec(&s))
    }

    /// Divergence of a vector field given by its components.
    pub fn divergence(&self, comps: &[Vec<f64>]) -> Vec<f64> {
        let mut acc = vec![C64::new(0.0, 0.0); self.len()];
        for (a, c) in comps.iter().enumerate() {
            let s = self.forward(c);
            for (idx, v) in self.derivative(&s, a).into_iter().enumerate() {
                acc[idx] += v;
            }
        }
        self.inverse(acc)
    }

    /// Largest lattice wavenumber kept by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i32 {
        ((self.n - 1) / 3) as i32
    }

    /// Zeroes every mode with some |k_a| beyond the 2/3-rule cutoff.
    pub fn dealias(&self, s: &mut [C64]) {
        let kc = self.dealias_cutoff();
        for (idx, v) in s.iter_mut().enumerate() {
            let k = self.kint[idx];
            if (0..self.d).any(|a| k[a].abs() > kc) {
                *v = C64::new(0.0, 0.0);
            }
        }
    }

    /// Pointwise product projected onto the 2/3-rule band.
    pub fn dealiased_product(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
        let mut s = self.forward(&prod);
        self.dealias(&mut s);
        self.inverse(s)
    }

    /// Multiplies the spectrum by a real function of the integer wavevector.
    pub fn apply_multiplier(&self, s: &mut [C64], mult: impl Fn([i32; 3]) -> f64) {
        for (idx, v) in s.iter_mut().enumerate() {
            *v *= mult(self.kint[idx]);
        }
    }

    pub fn filter(&self, x: &[f64], mult: impl Fn([i32; 3]) -> f64) -> Vec<f64> {
        let mut s = self.forward(x);
        self.apply_multiplier(&mut s, mult);
        self.inverse(s)
    }

    /// Trigonometric-interpolant evaluation of `x ↦ f(x + shift)`.
    pub fn shift(&self, s: &[C64], shift: [f64; 3]) -> Vec<f64> {
        let half = (self.n / 2) as i32;
        let out: Vec<C64> = s
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                let k = self.kint[idx];
                let mut m = C64::new(1.0, 0.0);
                for a in 0..self.d {
                    let phase = k[a] as f64 * self.unit * shift[a];
                    if k[a].abs() == half {
                        m *= phase.cos();
                    } else {
                        m *= C64::new(phase.cos(), phase.sin());
                    }
                }
                v * m
            })
            .collect();
        self.inverse(out)
    }

    /// Sum of `|f|^2` over the grid computed from the half-spectrum.
    pub fn parseval_sum(&self, s: &[C64]) -> f64 {
        let acc: f64 = s.iter().enumerate().map(|(idx, v)| self.weight(idx) * v.norm_sqr()).sum();
        acc / self.real_len() as f64
    }
}

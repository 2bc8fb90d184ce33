use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic space grid of `n^d` points on `[0, L)^d` times a uniform
/// time grid of `nt` samples spaced `dt` apart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub d: usize,
    pub n: usize,
    pub length: f64,
    pub nt: usize,
    pub dt: f64,
}

impl PeriodicGrid {
    pub fn new(d: usize, n: usize, length: f64, nt: usize, dt: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} not in 1..=3")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be a power of two and at least 8"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!("domain length {length} must be positive")));
        }
        if nt == 0 {
            return Err(Error::InvalidGrid("nt must be at least 1".into()));
        }
        if !dt.is_finite() || (nt > 1 && !(dt > 0.0)) {
            return Err(Error::InvalidGrid(format!("time step {dt} must be positive")));
        }
        Ok(Self { d, n, length, nt, dt })
    }

    /// Static 2π-periodic grid with a single time sample.
    pub fn snapshot(d: usize, n: usize) -> Result<Self> {
        Self::new(d, n, 2.0 * PI, 1, 1.0)
    }

    pub fn with_time(&self, nt: usize, dt: f64) -> Result<Self> {
        Self::new(self.d, self.n, self.length, nt, dt)
    }

    /// Number of spatial points, `n^d`.
    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Volume of one spatial cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.d as i32)
    }

    /// Conversion from integer lattice wavenumber to physical frequency.
    pub fn wavenumber_unit(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Signed lattice wavenumber of FFT index `j`, in `{-n/2+1, .., n/2}`.
    pub fn lattice_wavenumber(&self, j: usize) -> i64 {
        signed_index(j, self.n)
    }

    pub fn time(&self, it: usize) -> f64 {
        it as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        (self.nt.saturating_sub(1)) as f64 * self.dt
    }

    /// Spatial multi-index of a flat point index (axis 0 outermost).
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        let mut rem = idx;
        for a in (0..self.d).rev() {
            out[a] = rem % self.n;
            rem /= self.n;
        }
        out
    }

    pub fn ravel(&self, ix: [usize; 3]) -> usize {
        (0..self.d).fold(0, |acc, a| acc * self.n + ix[a])
    }

    /// Physical coordinates of a flat point index.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let ix = self.unravel(idx);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = ix[a] as f64 * h;
        }
        x
    }

    pub fn same_space(&self, other: &PeriodicGrid) -> bool {
        self.d == other.d && self.n == other.n && self.length == other.length
    }
}

pub(crate) fn signed_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

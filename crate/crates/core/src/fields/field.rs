use serde::{Deserialize, Serialize};

use super::grid::PeriodicGrid;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub name: String,
    /// Viscosity or diffusivity attached to the run that produced the field.
    pub viscosity: f64,
    pub provenance: String,
    /// Seed of the `ChaCha8` generator, when a stochastic step was involved.
    pub seed: Option<u64>,
}

impl FieldMeta {
    pub fn named(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Default::default() }
    }
}

/// Samples of a scalar or vector field on a periodic space-time grid.
///
/// Layout is row-major with time outermost, then component, then the spatial
/// multi-index (axis 0 outermost). Fields are immutable once built; every
/// operation returns a new field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    grid: PeriodicGrid,
    components: usize,
    data: Vec<f64>,
    pub meta: FieldMeta,
}

impl SpaceTimeField {
    pub fn new(grid: PeriodicGrid, components: usize, data: Vec<f64>, meta: FieldMeta) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidField("at least one component required".into()));
        }
        let expected = grid.nt * components * grid.points();
        if data.len() != expected {
            return Err(Error::InvalidField(format!(
                "sample count {} does not match nt*c*n^d = {expected}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite sample at index {pos}")));
        }
        if !(meta.viscosity >= 0.0) {
            return Err(Error::InvalidField("viscosity must be non-negative".into()));
        }
        Ok(Self { grid, components, data, meta })
    }

    pub fn zeros(grid: PeriodicGrid, components: usize, meta: FieldMeta) -> Self {
        let len = grid.nt * components * grid.points();
        Self { grid, components, data: vec![0.0; len], meta }
    }

    /// Builds a movie from per-frame component arrays.
    pub fn from_frames(grid: PeriodicGrid, frames: Vec<Vec<Vec<f64>>>, meta: FieldMeta) -> Result<Self> {
        if frames.len() != grid.nt {
            return Err(Error::InvalidField(format!(
                "{} frames supplied for nt = {}",
                frames.len(),
                grid.nt
            )));
        }
        let components = frames.first().map(|f| f.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(grid.nt * components * grid.points());
        for frame in frames {
            if frame.len() != components {
                return Err(Error::InvalidField("ragged component count across frames".into()));
            }
            for comp in frame {
                if comp.len() != grid.points() {
                    return Err(Error::InvalidField("component length differs from n^d".into()));
                }
                data.extend_from_slice(&comp);
            }
        }
        Self::new(grid, components, data, meta)
    }

    /// Repeats a single snapshot over every frame of `grid`.
    pub fn static_movie(grid: PeriodicGrid, snapshot: Vec<Vec<f64>>, meta: FieldMeta) -> Result<Self> {
        let frames = vec![snapshot; grid.nt];
        Self::from_frames(grid, frames, meta)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn nt(&self) -> usize {
        self.grid.nt
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    fn frame_len(&self) -> usize {
        self.components * self.grid.points()
    }

    pub fn frame(&self, it: usize) -> &[f64] {
        let len = self.frame_len();
        &self.data[it * len..(it + 1) * len]
    }

    pub fn component(&self, it: usize, c: usize) -> &[f64] {
        let np = self.grid.points();
        let start = it * self.frame_len() + c * np;
        &self.data[start..start + np]
    }

    /// All components of frame `it`, cloned.
    pub fn frame_components(&self, it: usize) -> Vec<Vec<f64>> {
        (0..self.components).map(|c| self.component(it, c).to_vec()).collect()
    }

    /// Single-frame field holding frame `it`.
    pub fn slice(&self, it: usize) -> Self {
        let grid = PeriodicGrid { nt: 1, ..self.grid };
        Self {
            grid,
            components: self.components,
            data: self.frame(it).to_vec(),
            meta: self.meta.clone(),
        }
    }

    /// Frames `range`, with the time origin unchanged in spacing.
    pub fn frames(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.grid.nt {
            return Err(Error::OutOfRange(format!("frame range {range:?} outside 0..{}", self.grid.nt)));
        }
        let grid = PeriodicGrid { nt: range.end - range.start, ..self.grid };
        let len = self.frame_len();
        Ok(Self {
            grid,
            components: self.components,
            data: self.data[range.start * len..range.end * len].to_vec(),
            meta: self.meta.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            components: self.components,
            data: self.data.iter().map(|&v| f(v)).collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn with_meta(mut self, meta: FieldMeta) -> Self {
        self.meta = meta;
        self
    }
}

/// Unit-measure L^p norm of a slice (`p = ∞` is the max norm).
pub fn lp_norm(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    if p.is_infinite() {
        return values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    let s: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
    (s / values.len() as f64).powf(1.0 / p)
}

/// Unit-measure L^p norm of the pointwise Euclidean magnitude of a vector field.
pub fn lp_norm_vector(components: &[Vec<f64>], p: f64) -> f64 {
    let Some(first) = components.first() else {
        return 0.0;
    };
    let mag: Vec<f64> = (0..first.len())
        .map(|i| components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
        .collect();
    lp_norm(&mag, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_nan() {
        let g = PeriodicGrid::snapshot(1, 8).unwrap();
        assert!(SpaceTimeField::new(g, 1, vec![0.0; 7], FieldMeta::default()).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(SpaceTimeField::new(g, 1, v, FieldMeta::default()).is_err());
    }

    #[test]
    fn indexing_layout() {
        let g = PeriodicGrid::new(1, 8, 1.0, 2, 0.5).unwrap();
        let data: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let f = SpaceTimeField::new(g, 2, data, FieldMeta::default()).unwrap();
        assert_eq!(f.component(1, 0)[0], 16.0);
        assert_eq!(f.component(1, 1)[7], 31.0);
        assert_eq!(f.slice(1).component(0, 1)[0], 24.0);
    }

    #[test]
    fn norms() {
        assert!((lp_norm(&[1.0, -1.0, 1.0, -1.0], 2.0) - 1.0).abs() < 1e-15);
        assert_eq!(lp_norm(&[0.5, -3.0], f64::INFINITY), 3.0);
    }
}

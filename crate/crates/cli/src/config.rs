//! TOML pipeline configuration.

use std::path::{Path, PathBuf};

use disslab::fields::SynthKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    /// Field analyzed by every command except `generate`, `bounds`, `sweep`
    /// and `report`.
    pub input: Option<PathBuf>,
    /// Advecting velocity for scalar inputs.
    pub velocity: Option<PathBuf>,
    /// Viscosity or diffusivity of the input; defaults to the value stored
    /// in the field file.
    pub nu: Option<f64>,
    pub generate: Option<GenerateConfig>,
    pub besov: Option<BesovConfig>,
    pub decompose: Option<DecomposeConfig>,
    pub identity: Option<IdentityConfig>,
    pub rates: Option<RatesConfig>,
    pub sf: Option<SfConfig>,
    pub dims: Option<DimsConfig>,
    pub bounds: Option<BoundsConfig>,
    pub sweep: Option<SweepConfig>,
    pub report: Option<ReportConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Ns2d,
    Burgers,
    Advection,
}

/// Solver settings; unset keys take the solver defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub equation: Equation,
    pub nu: f64,
    pub t_final: f64,
    pub cfl: Option<f64>,
    pub stride: Option<usize>,
    pub frame_dt: Option<f64>,
    pub dt: Option<f64>,
    pub dealias: Option<bool>,
    pub forcing_shell: Option<(f64, f64)>,
    pub forcing_amp: Option<f64>,
    /// Keep only Fourier modes with `|k| ≤ kmax` in the initial vorticity.
    pub initial_kmax: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub grid: GridConfig,
    pub field: SynthKind,
    pub solver: Option<SolveConfig>,
    #[serde(default = "default_field_name")]
    pub output: String,
}

fn default_field_name() -> String {
    "field.dlf".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesovConfig {
    pub p: f64,
    pub window: Option<(usize, usize)>,
    #[serde(default)]
    pub space_time: bool,
    /// Expected `σ`; with `tolerance` the fit becomes a check.
    pub expect: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    /// Scales as multiples of the grid spacing.
    pub ell_cells: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFamilyConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_kmax")]
    pub kmax: f64,
    /// Time support as fractions of the movie duration.
    #[serde(default = "default_window")]
    pub window: (f64, f64),
}

fn default_count() -> usize {
    10
}

fn default_kmax() -> f64 {
    4.0
}

fn default_window() -> (f64, f64) {
    (0.1, 0.9)
}

impl Default for TestFamilyConfig {
    fn default() -> Self {
        Self { count: default_count(), kmax: default_kmax(), window: default_window() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityConfig {
    pub ell_cells: Vec<f64>,
    #[serde(default)]
    pub tests: TestFamilyConfig,
    #[serde(default = "default_identity_tol")]
    pub tolerance: f64,
}

fn default_identity_tol() -> f64 {
    1e-4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub sigma: f64,
    pub delta_cells: Vec<f64>,
    #[serde(default = "default_time_ratio")]
    pub time_ratio: f64,
    #[serde(default)]
    pub total: bool,
    #[serde(default)]
    pub tests: TestFamilyConfig,
}

fn default_time_ratio() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfConfig {
    pub p: Vec<f64>,
    pub ell_cells: Vec<f64>,
    pub ndirections: usize,
    #[serde(default)]
    pub longitudinal: bool,
    /// Fit window in physical units.
    pub window: Option<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimsSource {
    /// Middle-thirds Cantor mask, optionally times a time axis.
    Cantor,
    /// The input is itself a scalar density movie.
    Density,
    /// Dissipation density of the input movie.
    Dissipation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimsMethod {
    BoxCount,
    Covering,
    Density,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsConfig {
    pub source: DimsSource,
    #[serde(default = "default_method")]
    pub method: DimsMethod,
    #[serde(default = "default_levels")]
    pub levels: u32,
    /// Length of a uniform time axis multiplying the Cantor mask.
    pub time_cells: Option<usize>,
    /// Box sides in cells for box counting.
    pub sizes: Option<Vec<usize>>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Mollification scale of the dissipation sample.
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub sigma: Option<f64>,
    pub p: Option<f64>,
    #[serde(default = "default_points")]
    pub npoints: usize,
    pub expect: Option<f64>,
    pub tolerance: Option<f64>,
}

fn default_method() -> DimsMethod {
    DimsMethod::BoxCount
}

fn default_levels() -> u32 {
    8
}

fn default_threshold() -> f64 {
    disslab::fractal::DEFAULT_THRESHOLD
}

fn default_points() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryConfig {
    pub p: f64,
    pub zeta: f64,
    #[serde(default)]
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub gamma: f64,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_gamma_method")]
    pub gamma_method: String,
    /// Exponent table as inline entries.
    #[serde(default)]
    pub entries: Vec<EntryConfig>,
    /// Exponent table as a CSV with header `p,zeta[,stderr]`.
    pub table: Option<PathBuf>,
    /// Range and sample count of the emitted `ζ*_p` curve.
    #[serde(default = "default_curve")]
    pub curve: (f64, f64, usize),
}

fn default_d() -> usize {
    3
}

fn default_gamma_method() -> String {
    "input".into()
}

fn default_curve() -> (f64, f64, usize) {
    (3.0, 6.0, 61)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: GridConfig,
    pub field: SynthKind,
    pub nus: Vec<f64>,
    pub t_final: f64,
    pub frame_dt: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Regularity used in the predictions; measured at the smallest `ν`
    /// when absent.
    pub sigma: Option<f64>,
    /// Inertial scales `ℓ_I` in cells.
    pub ell_i_cells: Vec<f64>,
    /// Time support of `η` in physical time.
    pub eta: (f64, f64),
    #[serde(default = "default_ndir")]
    pub ndirections: usize,
    pub delta_cells: Vec<f64>,
    #[serde(default = "default_time_ratio")]
    pub time_ratio: f64,
    #[serde(default)]
    pub tests: TestFamilyConfig,
    #[serde(default = "default_sweep_p")]
    pub p: f64,
    #[serde(default)]
    pub save_movies: bool,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_ndir() -> usize {
    16
}

fn default_sweep_p() -> f64 {
    3.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Directories holding `manifest.json`; the output directory when empty.
    #[serde(default)]
    pub runs: Vec<PathBuf>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    /// Reads `path`, resolves relative paths against its directory and
    /// checks that every referenced input exists.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base)?;
        Ok(cfg)
    }

    /// Copy with every path reduced to its file name, as recorded in
    /// manifests so that they do not depend on where runs live.
    pub fn portable(&self) -> Self {
        let strip = |p: &mut PathBuf| {
            if let Some(name) = p.file_name() {
                *p = PathBuf::from(name);
            }
        };
        let mut c = self.clone();
        for p in [c.input.as_mut(), c.velocity.as_mut()].into_iter().flatten() {
            strip(p);
        }
        if let Some(t) = c.bounds.as_mut().and_then(|b| b.table.as_mut()) {
            strip(t);
        }
        if let Some(r) = c.report.as_mut() {
            r.runs.iter_mut().for_each(strip);
        }
        c
    }

    fn resolve(&mut self, base: &Path) -> Result<(), CliError> {
        let fix = |p: &mut PathBuf| -> Result<(), CliError> {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.exists() {
                return Err(CliError::Usage(format!("missing input {}", p.display())));
            }
            Ok(())
        };
        for p in [self.input.as_mut(), self.velocity.as_mut()].into_iter().flatten() {
            fix(p)?;
        }
        if let Some(t) = self.bounds.as_mut().and_then(|b| b.table.as_mut()) {
            fix(t)?;
        }
        if let Some(r) = self.report.as_mut() {
            for p in &mut r.runs {
                fix(p)?;
            }
        }
        Ok(())
    }
}

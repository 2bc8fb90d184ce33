//! Grid and field data model, spectral transforms, synthetic fields,
//! the DLF1 container format and the shared power-law fitter.

mod field;
mod fit;
mod grid;
pub mod io;
pub mod spectral;
pub mod synth;

pub use field::{lp_norm, lp_norm_vector, FieldMeta, SpaceTimeField};
pub use fit::{fit_power_law, ScalingFit};
pub use grid::PeriodicGrid;
pub use io::{read_field, write_field};
pub use spectral::{Spectral, C64};
pub use synth::{synth_field, SynthKind};

//! Spectral diagnostics for the local energy balance of incompressible flows
//! and passive scalars.
//!
//! The crate samples velocity and scalar fields on periodic grids, coarse
//! grains them with compactly supported mollifiers, and evaluates the defect
//! in the weak energy balance together with its scale-by-scale decomposition.
//! Around that core sit estimators for Besov regularity, structure-function
//! exponents and box-counting dimensions, pseudo-spectral solvers that
//! produce test movies, and closed-form evaluators for the intermittency
//! bounds those quantities are checked against.

pub mod bounds;
pub mod duchon_robert;
pub mod error;
pub mod fields;
pub mod fractal;
pub mod inviscid_limits;
pub mod lp_besov;
pub mod mollify;
pub mod solvers;
pub mod structure_fn;
pub mod testfn;
pub mod transport;

pub use error::{Error, Result};
pub use fields::{FieldMeta, PeriodicGrid, ScalingFit, SpaceTimeField};

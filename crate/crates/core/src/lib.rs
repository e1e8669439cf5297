//! Discrete stability analysis for steady 2D Euler flows in multiply-connected
//! domains.

pub mod dynamics;
pub mod error;
pub mod field;
pub mod functionals;
pub mod gfunc;
pub mod harmonic;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod rearrange;
pub mod spectra;
pub mod steady;

pub use error::{Error, Result};
pub use grid::{CellKind, CirculationVector, GridDomain, ScalarField};

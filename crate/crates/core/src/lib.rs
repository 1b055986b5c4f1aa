//! Physics-informed solvers with trainable Fourier cross-features, the
//! baseline feature maps they are compared against, optimizer schedules and
//! conditioning diagnostics.

pub mod error;
pub mod bench;
pub mod diff;
pub mod features;
pub mod jet;
pub mod model;
pub mod pde;
pub mod scalar;
pub mod spectra;
pub mod training;

pub use error::{Error, Result};

//! Resolvent kernels of the Laplacian on p.c.f. self-similar fractals.
//!
//! The kernel is assembled as a series over cells of rescaled level-1
//! solutions. Closed forms are provided for the unit interval, the
//! Sierpinski gasket (`sg`) and its 3-subdivision variant (`sg3`); a dense
//! graph oracle in [`oracle`] checks everything independently.

pub mod decimation;
mod error;
pub mod kernel;
pub mod linalg;
pub mod oracle;
pub mod pcf;

pub use error::{Culprit, Error, Result};

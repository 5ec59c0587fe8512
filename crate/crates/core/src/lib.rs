//! Shape representation as a mixture of Gaussian-process directional
//! distance fields, with the data preparation, reconstruction and evaluation
//! tools around it.

pub mod error;
pub mod geometry;
pub mod io;
pub mod gp;
pub mod kernels;
pub mod metrics;
pub mod mixture;
pub mod partition;

pub use error::{Error, Result};

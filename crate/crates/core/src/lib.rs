//! Weighted-bootstrap approximation for quadratic forms of sample averages
//! whose dimension may grow with the sample size.

pub mod bootstrap;
pub mod diagnostics;
pub mod error;
pub mod gmm;
pub mod io;
pub mod linalg;
pub mod reference;
pub mod sim;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};

//! Monte Carlo ensembles, reports, file formats and the `arw` command line
//! on top of `arw-core`.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod probe;
pub mod report;
pub mod sweep;
pub mod verify;

pub use error::{LabError, Result};

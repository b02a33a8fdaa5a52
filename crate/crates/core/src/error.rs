use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::sitewise::Stabilization;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone)]
pub enum Error {
    /// A parameter is outside its domain.
    Parameter(String),
    /// Toppling was requested at a stable site.
    IllegalToppling { site: i64 },
    /// The site is not part of the simulated interval.
    SiteOutOfRange { site: i64 },
    /// `stabilize` hit its toppling budget; carries the partial state.
    BudgetExceeded { budget: u64, partial: Box<Stabilization> },
    /// The carpet-hole procedure hit its toppling budget.
    CarpetBudgetExceeded { budget: u64, attempts: usize },
    /// A structural invariant of the carpet-hole procedure failed.
    Invariant(Box<InvariantFailure>),
}

/// Diagnostic attached to an invariant failure.
#[derive(Debug, Clone)]
pub struct InvariantFailure {
    /// Number of completed attempted emissions when the check failed.
    pub attempt: usize,
    pub violations: Vec<String>,
    /// Human-readable dump of the block state.
    pub dump: String,
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::IllegalToppling { site } => {
                write!(f, "illegal toppling: site {site} is stable")
            }
            Error::SiteOutOfRange { site } => write!(f, "site {site} is outside the interval"),
            Error::BudgetExceeded { budget, partial } => write!(
                f,
                "stabilization exceeded {budget} topplings ({} particles still present)",
                partial.configuration.particles_present()
            ),
            Error::CarpetBudgetExceeded { budget, attempts } => write!(
                f,
                "carpet-hole procedure exceeded {budget} topplings after {attempts} attempts"
            ),
            Error::Invariant(failure) => {
                write!(f, "invariant violated after attempt {}: ", failure.attempt)?;
                for (i, v) in failure.violations.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    f.write_str(v)?;
                }
                Ok(())
            }
        }
    }
}

impl core::error::Error for Error {}

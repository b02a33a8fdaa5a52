//! Activated Random Walk on ℤ in its site-wise representation.
//!
//! * [`sitewise`]: configurations, lazily generated instruction stacks,
//!   legal topplings, odometers and finite-interval stabilization.
//! * [`carpet`]: the carpet-hole toppling procedure on a row of blocks,
//!   with its particle ledger, structural property checks and the
//!   mass-balance replay.
//! * [`block_stats`]: the single-block jump laws, drift formulas, tail
//!   bounds, the auxiliary chain `W` and hole-process statistics.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod block_stats;
pub mod carpet;
pub mod error;
pub mod rng;
pub mod sitewise;

pub use error::{Error, InvariantFailure, Result};

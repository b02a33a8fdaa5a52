//! The carpet-hole toppling procedure on the blocks `1..=n`.

mod engine;
mod layout;
mod ledger;
mod record;
mod replay;

pub use engine::{
    build_neat, build_neat_with_mass, run_carpet_hole, run_carpet_hole_with, CarpetHole, CarpetParams,
    CheckMode, RunOptions, StepEvent, StepKind, StepObserver, AUTO_CHECK_MAX_BLOCKS, DEFAULT_CARPET_BUDGET,
};
pub use layout::{BlockLayout, Region};
pub use ledger::{FreeState, HotChoice, Particle, ParticleId, ParticleLedger, Role, Slot};
pub use record::{AttemptRecord, Outcome, RunParams, RunRecord, RUN_RECORD_SCHEMA};
pub use replay::{mass_balance_replay, mass_balance_replay_with, BlockReplay, ReplayReport};

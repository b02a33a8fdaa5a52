//! Block-by-block replay of a completed run.
//!
//! For each block `i` the procedure is rerun on blocks `1..=i` alone, from
//! the neat configuration with `M_i` extra particles stacked at `iK+a`,
//! on the same instruction stacks. The frozen indicator and the left
//! emission count of block `i` must match the full run exactly, and the
//! left emissions must feed block `i−1` exactly `M_{i−1}` particles.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::engine::{run_carpet_hole_with, CarpetParams, CheckMode, RunOptions};
use super::record::RunRecord;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockReplay {
    pub block: usize,
    /// `M_i`, the mass stacked at `iK+a` for the replay.
    pub mass: u64,
    /// `S_i^n(0)` from the full run.
    pub frozen_full: u64,
    /// `S_i(M_i)` from the replay.
    pub frozen_replay: u64,
    /// `L_i^n(0)` from the full run.
    pub left_full: u64,
    /// `L_i(M_i)` from the replay.
    pub left_replay: u64,
    /// `M_{i−1}` from the full run.
    pub fed_left: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub full: RunRecord,
    pub blocks: Vec<BlockReplay>,
    pub mismatches: Vec<String>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Runs the procedure on `D_n` from the neat configuration, then replays
/// every block. Mismatches are collected in the report, not raised.
pub fn mass_balance_replay(params: CarpetParams, seed: u64) -> Result<ReplayReport> {
    mass_balance_replay_with(params, seed, CheckMode::Auto)
}

pub fn mass_balance_replay_with(params: CarpetParams, seed: u64, check: CheckMode) -> Result<ReplayReport> {
    if params.m_boundary != 0 {
        return Err(Error::parameter("replay starts from the neat configuration (m = 0)"));
    }
    if !params.n.is_multiple_of(2) {
        return Err(Error::parameter("replay needs an even number of blocks"));
    }
    let options = RunOptions { check, trace: false, ..RunOptions::default() };
    let full = run_carpet_hole_with(params, seed, options)?;
    let n = params.n;
    let mut mismatches = full.conservation_failures();
    if full.m[0] > (n / 2) as u64 {
        mismatches.push(format!("M_0 = {} exceeds n/2 = {}", full.m[0], n / 2));
    }

    let mut blocks = Vec::with_capacity(n);
    for i in 1..=n {
        let sub_params = CarpetParams { n: i, m_boundary: full.m[i], ..params };
        let sub = run_carpet_hole_with(sub_params, seed, options)?;
        let b = BlockReplay {
            block: i,
            mass: full.m[i],
            frozen_full: full.s_vec[i],
            frozen_replay: sub.s_vec[i],
            left_full: full.l_vec[i],
            left_replay: sub.l_vec[i],
            fed_left: full.m[i - 1],
        };
        if b.frozen_full != b.frozen_replay {
            mismatches.push(format!("block {i}: S_i^n(0) = {} but S_i(M_i) = {}", b.frozen_full, b.frozen_replay));
        }
        if b.left_full != b.left_replay {
            mismatches.push(format!("block {i}: L_i^n(0) = {} but L_i(M_i) = {}", b.left_full, b.left_replay));
        }
        if b.left_replay != b.fed_left {
            mismatches.push(format!("block {i}: L_i(M_i) = {} but M_(i-1) = {}", b.left_replay, b.fed_left));
        }
        for failure in sub.conservation_failures() {
            mismatches.push(format!("replay of block {i}: {failure}"));
        }
        blocks.push(b);
    }
    Ok(ReplayReport { full, blocks, mismatches })
}

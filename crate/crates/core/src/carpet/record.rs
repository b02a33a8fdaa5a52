use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Version tag carried by every serialized [`RunRecord`].
pub const RUN_RECORD_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub lambda: f64,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: i64,
    pub a: i64,
    /// Extra free particles stacked at `nK+a` before the run.
    pub m_boundary: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    EmitLeft,
    EmitRight,
    Failure,
}

impl Outcome {
    pub fn is_emission(self) -> bool {
        !matches!(self, Outcome::Failure)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub block: usize,
    pub outcome: Outcome,
    /// Hole position after the attempt, relative to the block centre.
    pub hole_after: i64,
    /// Hole-departure steps taken during the attempt.
    pub steps: u64,
}

/// Complete outcome of one carpet-hole run.
///
/// `M`, `L_vec` and `S_vec` have length `n + 1`. `M[i]` counts emissions
/// from block `i+1` to block `i` (`M[0]` are exits on the left). `L_vec[i]`
/// and `S_vec[i]` refer to block `i`; index 0 is unused and always zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub parameters: RunParams,
    pub master_seed: u64,
    #[serde(rename = "Frozen")]
    pub frozen: u64,
    #[serde(rename = "Exit")]
    pub exit: u64,
    #[serde(rename = "M")]
    pub m: Vec<u64>,
    #[serde(rename = "L_vec")]
    pub l_vec: Vec<u64>,
    #[serde(rename = "S_vec")]
    pub s_vec: Vec<u64>,
    pub attempts: Vec<AttemptRecord>,
    pub property_violations: Vec<String>,
}

impl RunRecord {
    /// Number of free particles the run started with.
    pub fn free_particles(&self) -> u64 {
        self.parameters.n.div_ceil(2) as u64 + self.parameters.m_boundary
    }

    /// Checks `Exit + Frozen = #free`, `Frozen = Σ S_i`, `L_i = M_{i−1}`
    /// and `M_n = 0`; returns a message per failure.
    pub fn conservation_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.parameters.n;
        if self.exit + self.frozen != self.free_particles() {
            out.push(alloc::format!(
                "Exit + Frozen = {} + {} != {}",
                self.exit,
                self.frozen,
                self.free_particles()
            ));
        }
        let s_sum: u64 = self.s_vec.iter().sum();
        if self.frozen != s_sum {
            out.push(alloc::format!("Frozen = {} != sum S_i = {s_sum}", self.frozen));
        }
        if self.m.len() != n + 1 || self.l_vec.len() != n + 1 || self.s_vec.len() != n + 1 {
            out.push("vector lengths differ from n + 1".into());
            return out;
        }
        for i in 1..=n {
            if self.l_vec[i] != self.m[i - 1] {
                out.push(alloc::format!("L_{i} = {} != M_{} = {}", self.l_vec[i], i - 1, self.m[i - 1]));
            }
        }
        if self.m[n] != 0 {
            out.push(alloc::format!("M_n = {} != 0", self.m[n]));
        }
        out
    }
}

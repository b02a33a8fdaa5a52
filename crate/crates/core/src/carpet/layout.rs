use crate::error::{Error, Result};
use crate::sitewise::Lane;

/// Geometry of `n` blocks of half-width `a` centred on `K, 2K, …, nK`.
///
/// Block `i` is `[iK−a, iK+a]`; transit region `i` is `(iK+a, (i+1)K−a)`
/// for `i = 0..=n`. The working interval is `D_n = (a, nK+K−a)`; its two
/// end points `a` and `nK+K−a` are where exiting particles land.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    n: usize,
    k: i64,
    a: i64,
}

/// Where a site sits relative to the blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Block(usize),
    Transit(usize),
    Outside,
}

impl BlockLayout {
    pub fn new(n: usize, k: i64, a: i64) -> Result<Self> {
        if n == 0 {
            return Err(Error::parameter("need at least one block"));
        }
        if a < 1 {
            return Err(Error::parameter("block half-width a must be >= 1"));
        }
        // Transit regions are open intervals of length K−2a−1.
        if k < 2 * a + 2 {
            return Err(Error::parameter(alloc::format!(
                "K = {k} leaves no transit region between blocks of half-width a = {a} (need K >= 2a+2)"
            )));
        }
        Ok(BlockLayout { n, k, a })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    #[inline]
    pub fn center(&self, block: usize) -> i64 {
        block as i64 * self.k
    }

    /// Left end `iK−a` of block `i`.
    #[inline]
    pub fn block_lo(&self, block: usize) -> i64 {
        self.center(block) - self.a
    }

    /// Right end `iK+a` of block `i`.
    #[inline]
    pub fn block_hi(&self, block: usize) -> i64 {
        self.center(block) + self.a
    }

    /// Arrival site of a left emission from block `i`: `iK−K+a`.
    #[inline]
    pub fn left_target(&self, block: usize) -> i64 {
        self.center(block) - self.k + self.a
    }

    /// Arrival site of a right emission from block `i`: `iK+K−a`.
    #[inline]
    pub fn right_target(&self, block: usize) -> i64 {
        self.center(block) + self.k - self.a
    }

    /// First site of `D_n`.
    pub fn domain_lo(&self) -> i64 {
        self.a + 1
    }

    /// Last site of `D_n`.
    pub fn domain_hi(&self) -> i64 {
        self.exit_right() - 1
    }

    pub fn exit_left(&self) -> i64 {
        self.a
    }

    pub fn exit_right(&self) -> i64 {
        (self.n as i64 + 1) * self.k - self.a
    }

    pub fn in_domain(&self, x: i64) -> bool {
        x > self.exit_left() && x < self.exit_right()
    }

    pub fn region(&self, x: i64) -> Region {
        if !self.in_domain(x) {
            return Region::Outside;
        }
        let i = (x + self.a).div_euclid(self.k);
        if i >= 1 && x - self.center(i as usize) <= self.a {
            Region::Block(i as usize)
        } else {
            Region::Transit(i as usize)
        }
    }

    /// Stack lane used by a particle walking out of `block` at site `x`.
    ///
    /// Transit sites read the `L` stack when the last block visited lies to
    /// their left, the `R` stack otherwise.
    #[inline]
    pub fn lane(&self, x: i64, block: usize) -> Lane {
        if x < self.block_lo(block) {
            Lane::Right
        } else if x > self.block_hi(block) {
            Lane::Left
        } else {
            Lane::Single
        }
    }

    /// The `R`-lane site whose left steps are the emissions from block `i`
    /// to block `i−1`: `(i−1)K+a+1`.
    pub fn left_emission_site(&self, block: usize) -> i64 {
        self.left_target(block) + 1
    }

    /// Particle density of the neat configuration, `1 − 1/(2K)`.
    pub fn neat_density(&self) -> f64 {
        1.0 - 1.0 / (2.0 * self.k as f64)
    }

    pub fn blocks(&self) -> impl Iterator<Item = usize> {
        1..=self.n
    }
}

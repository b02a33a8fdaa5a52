//! Particle roles of the carpet-hole procedure and the structural
//! properties P1–P9 they must satisfy between attempted emissions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::layout::{BlockLayout, Region};
use crate::sitewise::{BoundaryPolicy, Configuration, SiteState};
use crate::error::Result;

pub type ParticleId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreeState {
    Hot,
    Thawed,
    Frozen,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Carpet,
    Free(FreeState),
    /// A free particle that left `D_n`.
    Exited,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Particle {
    pub role: Role,
    pub site: i64,
    /// Ordinal among the particles added at the right boundary of the last
    /// block, if this is one of them.
    pub extra: Option<u64>,
}

/// The three sites where idle free particles may wait, in hot-selection
/// priority order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Slot {
    /// `iK`
    Center,
    /// `iK−a`
    Left,
    /// `iK+a`
    Right,
}

impl Slot {
    const PRIORITY: [Slot; 3] = [Slot::Center, Slot::Left, Slot::Right];

    fn index(self) -> usize {
        match self {
            Slot::Center => 0,
            Slot::Left => 1,
            Slot::Right => 2,
        }
    }

    pub fn site(self, layout: &BlockLayout, block: usize) -> i64 {
        match self {
            Slot::Center => layout.center(block),
            Slot::Left => layout.block_lo(block),
            Slot::Right => layout.block_hi(block),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct BlockState {
    hole: i64,
    frozen: Option<ParticleId>,
    /// Thawed free particles per slot, sorted by id.
    thawed: [Vec<ParticleId>; 3],
}

/// The particle chosen to be hot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HotChoice {
    pub particle: ParticleId,
    pub block: usize,
    pub site: i64,
    pub slot: Slot,
    pub extra: Option<u64>,
}

/// Identity and role of every particle in `D_n`, plus the block holes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParticleLedger {
    layout: BlockLayout,
    particles: Vec<Particle>,
    blocks: Vec<BlockState>,
    carpet_at: Vec<Option<ParticleId>>,
    hot: Option<HotChoice>,
    initial_free: u64,
}

/// The neat configuration on `[a, nK+K−a]` with `extra` additional free
/// particles at `nK+a`, and its ledger.
///
/// The configuration includes the two exit sites so that particles leaving
/// `D_n` are still counted; sites outside `D_n` are never toppled.
pub fn build_neat_state(layout: BlockLayout, extra: u64) -> Result<(Configuration, ParticleLedger)> {
    let lo = layout.exit_left();
    let hi = layout.exit_right();
    let two_k = 2 * layout.k();
    let mut config = Configuration::empty(lo, hi, BoundaryPolicy::Closed)?;
    let mut particles = Vec::new();
    let d_lo = layout.domain_lo();
    let mut carpet_at = vec![None; (layout.domain_hi() - d_lo + 1) as usize];
    let mut blocks: Vec<BlockState> = layout
        .blocks()
        .map(|i| BlockState { hole: layout.center(i), frozen: None, thawed: Default::default() })
        .collect();

    for x in lo..=hi {
        if x.rem_euclid(two_k) == 0 {
            continue;
        }
        config.set(x, SiteState::Active(1))?;
        if !layout.in_domain(x) {
            continue;
        }
        let id = particles.len() as ParticleId;
        match layout.region(x) {
            Region::Block(i) if x == layout.center(i) => {
                particles.push(Particle { role: Role::Free(FreeState::Thawed), site: x, extra: None });
                blocks[i - 1].thawed[Slot::Center.index()].push(id);
            }
            _ => {
                particles.push(Particle { role: Role::Carpet, site: x, extra: None });
                carpet_at[(x - d_lo) as usize] = Some(id);
            }
        }
    }
    let n = layout.n();
    let boundary = layout.block_hi(n);
    for e in 0..extra {
        let id = particles.len() as ParticleId;
        particles.push(Particle { role: Role::Free(FreeState::Thawed), site: boundary, extra: Some(e) });
        blocks[n - 1].thawed[Slot::Right.index()].push(id);
        config.add_active(boundary, 1)?;
    }
    let initial_free = particles.iter().filter(|p| matches!(p.role, Role::Free(_))).count() as u64;
    Ok((
        config,
        ParticleLedger { layout, particles, blocks, carpet_at, hot: None, initial_free },
    ))
}

impl ParticleLedger {
    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn particle(&self, id: ParticleId) -> &Particle {
        &self.particles[id as usize]
    }

    /// Number of free particles at construction; constant over the run.
    pub fn initial_free(&self) -> u64 {
        self.initial_free
    }

    fn block(&self, i: usize) -> &BlockState {
        &self.blocks[i - 1]
    }

    fn block_mut(&mut self, i: usize) -> &mut BlockState {
        &mut self.blocks[i - 1]
    }

    /// Absolute hole position of block `i`.
    pub fn hole(&self, i: usize) -> i64 {
        self.block(i).hole
    }

    /// Hole position of block `i` relative to its centre, in `[0, a]`.
    pub fn hole_offset(&self, i: usize) -> i64 {
        self.block(i).hole - self.layout.center(i)
    }

    pub fn frozen(&self, i: usize) -> Option<ParticleId> {
        self.block(i).frozen
    }

    pub fn frozen_count(&self) -> u64 {
        self.blocks.iter().filter(|b| b.frozen.is_some()).count() as u64
    }

    pub fn hot(&self) -> Option<HotChoice> {
        self.hot
    }

    pub fn thawed_at(&self, i: usize, slot: Slot) -> &[ParticleId] {
        &self.block(i).thawed[slot.index()]
    }

    pub fn carpet_at(&self, x: i64) -> Option<ParticleId> {
        if !self.layout.in_domain(x) {
            return None;
        }
        self.carpet_at[(x - self.layout.domain_lo()) as usize]
    }

    fn carpet_slot(&mut self, x: i64) -> &mut Option<ParticleId> {
        let d_lo = self.layout.domain_lo();
        &mut self.carpet_at[(x - d_lo) as usize]
    }

    /// Left-most priority policy: the left-most block holding a thawed free
    /// particle; inside it `iK`, then `iK−a`, then `iK+a`; lowest id first.
    /// `None` means the procedure is over.
    pub fn choose_hot(&self) -> Option<HotChoice> {
        for i in self.layout.blocks() {
            let b = self.block(i);
            for slot in Slot::PRIORITY {
                if let Some(&particle) = b.thawed[slot.index()].first() {
                    return Some(HotChoice {
                        particle,
                        block: i,
                        site: slot.site(&self.layout, i),
                        slot,
                        extra: self.particles[particle as usize].extra,
                    });
                }
            }
        }
        None
    }

    pub(crate) fn designate(&mut self, choice: HotChoice) {
        let list = &mut self.block_mut(choice.block).thawed[choice.slot.index()];
        let pos = list.iter().position(|&p| p == choice.particle).expect("chosen particle is thawed");
        list.remove(pos);
        self.particles[choice.particle as usize].role = Role::Free(FreeState::Hot);
        self.hot = Some(choice);
    }

    fn hot_id(&self) -> ParticleId {
        self.hot.expect("a hot particle is designated").particle
    }

    /// Moves the hot particle's recorded position.
    pub(crate) fn set_hot_site(&mut self, x: i64) {
        let id = self.hot_id();
        self.particles[id as usize].site = x;
    }

    /// The hot particle (at its current site) becomes carpet; the hole of
    /// its block moves to `new_hole` and the carpet particle there becomes
    /// hot.
    pub(crate) fn hand_over(&mut self, new_hole: i64) {
        let mut hot = self.hot.expect("a hot particle is designated");
        let id = hot.particle;
        let site = self.particles[id as usize].site;
        if site == new_hole {
            self.block_mut(hot.block).hole = new_hole;
            return;
        }
        let successor = self.carpet_slot(new_hole).take().expect("carpet under the new hole");
        self.particles[id as usize].role = Role::Carpet;
        *self.carpet_slot(site) = Some(id);
        self.particles[successor as usize].role = Role::Free(FreeState::Hot);
        self.block_mut(hot.block).hole = new_hole;
        hot.particle = successor;
        hot.site = new_hole;
        hot.extra = None;
        self.hot = Some(hot);
    }

    /// Failed emission: the hot particle freezes where it stands.
    pub(crate) fn freeze_hot(&mut self) {
        let hot = self.hot.take().expect("a hot particle is designated");
        self.particles[hot.particle as usize].role = Role::Free(FreeState::Frozen);
        self.block_mut(hot.block).frozen = Some(hot.particle);
    }

    /// Successful emission into block `to`, landing on `slot`.
    pub(crate) fn land_hot(&mut self, to: usize, slot: Slot) {
        let hot = self.hot.take().expect("a hot particle is designated");
        let site = slot.site(&self.layout, to);
        let p = &mut self.particles[hot.particle as usize];
        p.role = Role::Free(FreeState::Thawed);
        p.site = site;
        let list = &mut self.block_mut(to).thawed[slot.index()];
        let pos = list.partition_point(|&q| q < hot.particle);
        list.insert(pos, hot.particle);
    }

    /// Successful emission out of `D_n`.
    pub(crate) fn exit_hot(&mut self, site: i64) {
        let hot = self.hot.take().expect("a hot particle is designated");
        let p = &mut self.particles[hot.particle as usize];
        p.role = Role::Exited;
        p.site = site;
    }

    /// Case 1 reset of block `i`: hole back to `iK`, the frozen particle
    /// becomes carpet, the carpet particle at `iK` becomes thawed free.
    pub(crate) fn thaw_block(&mut self, i: usize) {
        let center = self.layout.center(i);
        let edge = self.layout.block_hi(i);
        let frozen = self.block_mut(i).frozen.take().expect("frozen particle in block");
        let freed = self.carpet_slot(center).take().expect("carpet at block centre");
        self.particles[frozen as usize].role = Role::Carpet;
        *self.carpet_slot(edge) = Some(frozen);
        self.particles[freed as usize].role = Role::Free(FreeState::Thawed);
        let b = self.block_mut(i);
        b.hole = center;
        b.thawed[Slot::Center.index()].push(freed);
        b.thawed[Slot::Center.index()].sort_unstable();
    }

    /// Re-derives P1–P9 (and the ledger/configuration consistency they rely
    /// on) from the particle list and the ARW configuration. Returns one
    /// message per violation.
    pub fn check_properties(&self, config: &Configuration, exits: (u64, u64)) -> Vec<String> {
        let l = &self.layout;
        let mut out = Vec::new();
        let d_lo = l.domain_lo();
        let len = (l.domain_hi() - d_lo + 1) as usize;
        let mut carpets = vec![0u32; len];
        let mut frees = vec![0u32; len];
        let mut hot_count = 0;
        let mut free_total = 0u64;
        let mut exited = 0u64;
        let mut frozen_per_block = vec![Vec::new(); l.n() + 1];

        for (id, p) in self.particles.iter().enumerate() {
            match p.role {
                Role::Exited => {
                    exited += 1;
                    continue;
                }
                Role::Carpet => {}
                Role::Free(_) => free_total += 1,
            }
            if !l.in_domain(p.site) {
                out.push(format!("particle {id} at {} is outside D_n", p.site));
                continue;
            }
            let s = (p.site - d_lo) as usize;
            match p.role {
                Role::Carpet => carpets[s] += 1,
                Role::Free(state) => {
                    frees[s] += 1;
                    // P4
                    if !config.get(p.site).is_unstable() {
                        out.push(format!("P4: free particle {id} at {} is not active", p.site));
                    }
                    match state {
                        FreeState::Hot => {
                            hot_count += 1;
                            if self.hot.map(|h| h.particle) != Some(id as ParticleId) {
                                out.push(format!("P9: particle {id} is hot but not designated"));
                            }
                        }
                        FreeState::Thawed | FreeState::Frozen => {
                            // P5
                            let idle_ok = match l.region(p.site) {
                                Region::Block(i) => {
                                    let off = p.site - l.center(i);
                                    off == 0 || off == l.a() || off == -l.a()
                                }
                                _ => false,
                            };
                            if !idle_ok {
                                out.push(format!("P5: idle free particle {id} at {}", p.site));
                            }
                            if state == FreeState::Frozen {
                                if let Region::Block(i) = l.region(p.site) {
                                    frozen_per_block[i].push((id as ParticleId, p.site));
                                }
                            }
                        }
                    }
                }
                Role::Exited => unreachable!(),
            }
        }

        // Conservation of free particles.
        if free_total + exited != self.initial_free {
            out.push(format!(
                "free particles not conserved: {free_total} present + {exited} exited != {}",
                self.initial_free
            ));
        }
        if exited != exits.0 + exits.1 {
            out.push(format!("exit ledger {exited} != counters {}", exits.0 + exits.1));
        }

        for x in d_lo..=l.domain_hi() {
            let s = (x - d_lo) as usize;
            let hole_of = match l.region(x) {
                Region::Block(i) if self.block(i).hole == x => Some(i),
                _ => None,
            };
            // P1, P2
            match (hole_of, carpets[s]) {
                (Some(i), c) if c != 0 => {
                    out.push(format!("P2: hole of block {i} at {x} holds {c} carpet particle(s)"))
                }
                (None, c) if c != 1 => out.push(format!("P2: site {x} holds {c} carpet particles")),
                _ => {}
            }
            // Ledger and configuration agree on occupation.
            let count = config.get(x).count();
            let expected = (carpets[s] + frees[s]) as u64;
            if count != expected {
                out.push(format!("site {x}: configuration holds {count}, ledger expects {expected}"));
            }
        }
        if config.get(l.exit_left()).count() != 1 + exits.0 {
            out.push(format!("left exit site does not hold 1 + {} particles", exits.0));
        }
        if config.get(l.exit_right()).count() != 1 + exits.1 {
            out.push(format!("right exit site does not hold 1 + {} particles", exits.1));
        }

        for i in l.blocks() {
            let b = self.block(i);
            let center = l.center(i);
            let edge = l.block_hi(i);
            // P1
            if b.hole < center || b.hole > edge {
                out.push(format!("P1: hole of block {i} at {} is outside [iK, iK+a]", b.hole));
            }
            let carpetless = (l.block_lo(i)..=edge).filter(|&x| carpets[(x - d_lo) as usize] == 0).count();
            if carpetless != 1 {
                out.push(format!("P1: block {i} has {carpetless} sites without carpet"));
            }
            // P3
            for x in (b.hole + 1)..edge {
                if !config.get(x).is_unstable() {
                    out.push(format!("P3: carpet at {x} (block {i}) is not active"));
                }
            }
            // P5: at most one free particle at iK.
            let at_center = frees[(center - d_lo) as usize];
            if at_center > 1 {
                out.push(format!("P5: {at_center} free particles at centre of block {i}"));
            }
            // P6
            let frozen = &frozen_per_block[i];
            if frozen.len() > 1 {
                out.push(format!("P6: block {i} has {} frozen particles", frozen.len()));
            }
            // P7
            let frozen_at_edge = frozen.iter().any(|&(_, x)| x == edge);
            let has_frozen = !frozen.is_empty();
            if has_frozen != (b.hole == edge && frozen_at_edge) {
                out.push(format!(
                    "P7: block {i} frozen={has_frozen} but hole at offset {}",
                    b.hole - center
                ));
            }
            if b.frozen.map(|f| (f, self.particles[f as usize].site)) != frozen.first().copied() {
                out.push(format!("block {i}: frozen pointer disagrees with particle roles"));
            }
            for slot in Slot::PRIORITY {
                for &p in &b.thawed[slot.index()] {
                    let part = &self.particles[p as usize];
                    if part.role != Role::Free(FreeState::Thawed) || part.site != slot.site(l, i) {
                        out.push(format!("block {i}: thawed list holds particle {p} in {:?}", part));
                    }
                }
            }
        }

        // P9
        if hot_count > 1 {
            out.push(format!("P9: {hot_count} hot particles"));
        }
        if let Some(h) = self.hot {
            let p = &self.particles[h.particle as usize];
            if p.role != Role::Free(FreeState::Hot) {
                out.push(format!("P9: designated hot particle {} has role {:?}", h.particle, p.role));
            }
            // P8
            let b = self.block(h.block);
            if b.hole != l.block_hi(h.block) {
                let s = (b.hole - d_lo) as usize;
                let others = frees[s] - (p.site == b.hole) as u32;
                if others > 0 {
                    out.push(format!(
                        "P8: hole of hot block {} holds {others} other free particle(s)",
                        h.block
                    ));
                }
            }
        } else if hot_count == 1 {
            out.push("P9: hot particle without designation".into());
        }
        out
    }

    /// Compact text picture of every block, for diagnostics.
    pub fn dump(&self, config: &Configuration) -> String {
        let mut s = String::new();
        for i in self.layout.blocks() {
            let b = self.block(i);
            let _ = write!(
                s,
                "block {i}: hole@{} frozen={:?} thawed(c/l/r)={:?}/{:?}/{:?} sites:",
                b.hole - self.layout.center(i),
                b.frozen,
                b.thawed[0],
                b.thawed[1],
                b.thawed[2]
            );
            for x in self.layout.block_lo(i)..=self.layout.block_hi(i) {
                let c = match config.get(x) {
                    SiteState::Empty => String::from("0"),
                    SiteState::Sleeping => String::from("s"),
                    SiteState::Active(n) => format!("{n}"),
                };
                let _ = write!(s, " {c}");
            }
            s.push('\n');
        }
        s
    }
}

//! The random-sequence multigraph: a degree profile paired into a 2m-long
//! sequence of vertex ids, star-deletion edits, and simplicity testing.
//!
//! Edge i occupies positions 2i and 2i+1. Deleting an edge replaces both
//! positions by STAR, never shrinking the array, so position indices stay
//! stable for the whole run.

use crate::degree::DegreeProfile;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

pub const STAR: u32 = u32::MAX;
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct HalfEdgeSequence {
    pub n: usize,
    entries: Vec<u32>,
    /// live positions of each vertex, swap-compacted
    positions: Vec<Vec<u32>>,
    /// position -> slot in its vertex's position list (NONE when starred)
    slot: Vec<u32>,
    /// live edge ids, swap-compacted, for uniform sampling
    live_edges: Vec<u32>,
    edge_slot: Vec<u32>,
}

impl HalfEdgeSequence {
    pub fn from_entries(n: usize, entries: Vec<u32>) -> Self {
        assert!(entries.len() % 2 == 0);
        let m = entries.len() / 2;
        let mut positions = vec![Vec::new(); n];
        let mut slot = vec![NONE; entries.len()];
        for (p, &v) in entries.iter().enumerate() {
            if v != STAR {
                slot[p] = positions[v as usize].len() as u32;
                positions[v as usize].push(p as u32);
            }
        }
        let mut live_edges = Vec::with_capacity(m);
        let mut edge_slot = vec![NONE; m];
        for e in 0..m {
            let a = entries[2 * e];
            let b = entries[2 * e + 1];
            assert_eq!(a == STAR, b == STAR, "stars must come in pairs");
            if a != STAR {
                edge_slot[e] = live_edges.len() as u32;
                live_edges.push(e as u32);
            }
        }
        HalfEdgeSequence { n, entries, positions, slot, live_edges, edge_slot }
    }

    /// Uniformly random pairing of the profile's degree multiset.
    pub fn pair_sequence<R: Rng>(profile: &DegreeProfile, rng: &mut R) -> Self {
        assert!(profile.total % 2 == 0, "total degree must be even");
        let mut entries = Vec::with_capacity(profile.total as usize);
        for (v, &d) in profile.degrees.iter().enumerate() {
            entries.extend(std::iter::repeat(v as u32).take(d as usize));
        }
        entries.shuffle(rng);
        Self::from_entries(profile.degrees.len(), entries)
    }

    pub fn live_edge_count(&self) -> usize {
        self.live_edges.len()
    }

    pub fn initial_edge_count(&self) -> usize {
        self.entries.len() / 2
    }

    pub fn degree(&self, v: u32) -> usize {
        self.positions[v as usize].len()
    }

    pub fn vertex_at(&self, pos: u32) -> u32 {
        self.entries[pos as usize]
    }

    pub fn partner_position(pos: u32) -> u32 {
        pos ^ 1
    }

    pub fn live_positions_of(&self, v: u32) -> &[u32] {
        &self.positions[v as usize]
    }

    pub fn edge_endpoints(&self, e: u32) -> (u32, u32) {
        (self.entries[2 * e as usize], self.entries[2 * e as usize + 1])
    }

    pub fn is_live_edge(&self, e: u32) -> bool {
        self.edge_slot[e as usize] != NONE
    }

    fn unlink_position(&mut self, p: u32) {
        let v = self.entries[p as usize];
        assert_ne!(v, STAR, "deleting a STAR position is a fault");
        let s = self.slot[p as usize] as usize;
        let list = &mut self.positions[v as usize];
        let last = *list.last().unwrap();
        list[s] = last;
        self.slot[last as usize] = s as u32;
        list.pop();
        self.slot[p as usize] = NONE;
        self.entries[p as usize] = STAR;
    }

    /// Star both positions of the edge containing `pos`.
    pub fn delete_pair(&mut self, pos: u32) {
        let e = pos / 2;
        assert_ne!(self.edge_slot[e as usize], NONE, "edge already deleted");
        self.unlink_position(2 * e);
        self.unlink_position(2 * e + 1);
        let s = self.edge_slot[e as usize] as usize;
        let last = *self.live_edges.last().unwrap();
        self.live_edges[s] = last;
        self.edge_slot[last as usize] = s as u32;
        self.live_edges.pop();
        self.edge_slot[e as usize] = NONE;
    }

    /// Delete every live edge at `v`; returns the partner vertex of each
    /// removed edge. A loop at `v` appears once, flagged.
    pub fn delete_vertex_edges(&mut self, v: u32) -> Vec<(u32, bool)> {
        let mut removed = Vec::with_capacity(self.degree(v));
        while let Some(&p) = self.positions[v as usize].last() {
            let q = p ^ 1;
            let w = self.entries[q as usize];
            let is_loop = w == v;
            self.delete_pair(p);
            removed.push((if is_loop { v } else { w }, is_loop));
        }
        removed
    }

    /// Uniformly random live position whose vertex satisfies `pred`.
    pub fn random_live_halfedge<R: Rng>(
        &self,
        rng: &mut R,
        pred: impl Fn(u32) -> bool,
    ) -> Result<u32> {
        if self.live_edges.is_empty() {
            return Err(Error::EmptySupport);
        }
        let cap = 64 * (self.live_edges.len() + 1);
        for _ in 0..cap {
            let e = self.live_edges[rng.gen_range(0..self.live_edges.len())];
            let pos = 2 * e + rng.gen_range(0..2u32);
            if pred(self.entries[pos as usize]) {
                return Ok(pos);
            }
        }
        // rejection took too long; fall back to an exact scan
        let all: Vec<u32> = self
            .live_edges
            .iter()
            .flat_map(|&e| [2 * e, 2 * e + 1])
            .filter(|&p| pred(self.entries[p as usize]))
            .collect();
        if all.is_empty() {
            Err(Error::EmptySupport)
        } else {
            Ok(all[rng.gen_range(0..all.len())])
        }
    }

    /// True iff the live part has no loop and no repeated unordered edge.
    pub fn is_simple(&self) -> bool {
        let mut keys: Vec<u64> = Vec::with_capacity(self.live_edges.len());
        for &e in &self.live_edges {
            let (a, b) = self.edge_endpoints(e);
            if a == b {
                return false;
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            keys.push((lo as u64) << 32 | hi as u64);
        }
        keys.sort_unstable();
        keys.windows(2).all(|w| w[0] != w[1])
    }

    /// Live edges as an (unsorted) endpoint list.
    pub fn live_edge_list(&self) -> Vec<(u32, u32)> {
        self.live_edges.iter().map(|&e| self.edge_endpoints(e)).collect()
    }

    /// Full recount of per-vertex degrees and the live-edge total against
    /// the incremental bookkeeping. O(n + m).
    pub fn audit_counts(&self) -> Result<()> {
        let mut deg = vec![0usize; self.n];
        let mut live = 0usize;
        for (p, &v) in self.entries.iter().enumerate() {
            let paired = self.entries[p ^ 1];
            if (v == STAR) != (paired == STAR) {
                return Err(Error::AuditFailure(format!("unpaired star at position {p}")));
            }
            if v != STAR {
                deg[v as usize] += 1;
                live += 1;
            }
        }
        if live != 2 * self.live_edges.len() {
            return Err(Error::AuditFailure(format!(
                "live entry count {live} != 2 * mu = {}",
                2 * self.live_edges.len()
            )));
        }
        for v in 0..self.n {
            if deg[v] != self.positions[v].len() {
                return Err(Error::AuditFailure(format!(
                    "vertex {v}: recount degree {} != indexed degree {}",
                    deg[v],
                    self.positions[v].len()
                )));
            }
        }
        Ok(())
    }
}

/// Regenerate degrees and pairing until the pairing is simple.
pub fn sample_simple<R: Rng>(
    mut profile_gen: impl FnMut(&mut R) -> Result<DegreeProfile>,
    rng: &mut R,
    cap: u64,
) -> Result<HalfEdgeSequence> {
    for attempt in 1..=cap {
        let profile = profile_gen(rng)?;
        let seq = HalfEdgeSequence::pair_sequence(&profile, rng);
        if seq.is_simple() {
            return Ok(seq);
        }
        let _ = attempt;
    }
    Err(Error::SimplicityFailure { attempts: cap, rate: 0.0 })
}

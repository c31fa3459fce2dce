//! The greedy 2-matching pass: priority-driven forced moves on vertices of
//! degree one or two, random expansion from uncovered high-degree vertices,
//! handoff to the residual matcher, trajectory capture, and the drift
//! predictor used to check the step statistics.

use crate::degree::solve_lambda;
use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use crate::matching::{augment, combine, karp_sipser, TwoMatching};
use crate::seq::HalfEdgeSequence;
use crate::special::{abcd, f, q_value};
use rand::Rng;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum StepKind {
    OneA,
    OneB,
    OneC,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Y1,
    Y2,
    Ybig,
    Z1,
    Zbig,
    V00,
    V01,
}

/// Set with O(1) insert, remove and uniform random choice.
#[derive(Debug, Clone, Default)]
struct IndexedSet {
    items: Vec<u32>,
    slot: Vec<u32>,
}

impl IndexedSet {
    fn with_capacity(n: usize) -> Self {
        IndexedSet { items: Vec::new(), slot: vec![NONE; n] }
    }
    fn len(&self) -> usize {
        self.items.len()
    }
    fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
    fn insert(&mut self, v: u32) {
        debug_assert_eq!(self.slot[v as usize], NONE);
        self.slot[v as usize] = self.items.len() as u32;
        self.items.push(v);
    }
    fn remove(&mut self, v: u32) {
        let s = self.slot[v as usize] as usize;
        debug_assert_ne!(s as u32, NONE);
        let last = *self.items.last().unwrap();
        self.items[s] = last;
        self.slot[last as usize] = s as u32;
        self.items.pop();
        self.slot[v as usize] = NONE;
    }
    fn random<R: Rng>(&self, rng: &mut R) -> u32 {
        self.items[rng.gen_range(0..self.items.len())]
    }
}

/// The six tracked counts after a step.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct StateVector {
    pub y1: usize,
    pub y2: usize,
    pub z1: usize,
    pub y: usize,
    pub z: usize,
    pub mu: usize,
}

impl StateVector {
    pub fn zeta(&self) -> usize {
        self.y1 + 2 * self.y2 + self.z1
    }
    pub fn n_live(&self) -> usize {
        self.y + self.z
    }
    pub fn pi(&self) -> f64 {
        2.0 * self.mu as f64 - self.zeta() as f64
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub kind: Option<StepKind>,
    pub state: StateVector,
    pub lambda: f64,
    pub q: f64,
    pub kappa_running: usize,
}

#[derive(Debug, Clone, Copy)]
pub enum Capture {
    Auto,
    Every(usize),
    Full,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub capture: Capture,
    /// full-state audit every k steps (0 disables)
    pub audit_every: usize,
    pub augment_passes: u32,
    /// step 2 draws a uniform eligible edge instead of a uniform
    /// uncovered-side half-edge (the default matches the drift accounting)
    pub step2_edge_uniform: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            capture: Capture::Auto,
            audit_every: 0,
            augment_passes: 64,
            step2_edge_uniform: false,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub steps_by_kind: [usize; 4],
    pub final_y: usize,
    pub final_z: usize,
    pub final_mu: usize,
    pub final_lambda: f64,
    pub max_zeta: usize,
    pub max_zeta_up_to_t0: usize,
    pub longest_zeta_excursion: usize,
    pub t0: Option<usize>,
    /// component-opening reclassifications (vertices stranded by tidy-up)
    pub new_path_events: usize,
    pub completed_cycles: usize,
    pub exposed_after_matching: usize,
    pub kappa_total: usize,
    pub kappa_nontrivial: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub two_matching: TwoMatching,
    pub trajectory: Vec<TrajectoryRecord>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone)]
pub struct TwoGreedy {
    seq: HalfEdgeSequence,
    n: usize,
    b: Vec<bool>,
    partner: Vec<u32>,
    m_adj: Vec<[u32; 2]>,
    m_deg: Vec<u8>,
    m_edges: Vec<(u32, u32)>,
    cycles: Vec<Vec<u32>>,
    class: Vec<Class>,
    y1: IndexedSet,
    y2: IndexedSet,
    z1: IndexedSet,
    ybig: IndexedSet,
    z_count: usize,
    v00_count: usize,
    v01_count: usize,
    finished_paths: usize,
    new_path_events: usize,
    t: usize,
    steps_by_kind: [usize; 4],
    max_zeta: usize,
    cur_excursion: usize,
    longest_excursion: usize,
    t0: Option<usize>,
    last_lambda: f64,
    step2_edge_uniform: bool,
}

impl TwoGreedy {
    pub fn new(seq: HalfEdgeSequence) -> Self {
        let n = seq.n;
        let mut g = TwoGreedy {
            n,
            b: vec![false; n],
            partner: vec![NONE; n],
            m_adj: vec![[NONE; 2]; n],
            m_deg: vec![0; n],
            m_edges: Vec::new(),
            cycles: Vec::new(),
            class: vec![Class::V00; n],
            y1: IndexedSet::with_capacity(n),
            y2: IndexedSet::with_capacity(n),
            z1: IndexedSet::with_capacity(n),
            ybig: IndexedSet::with_capacity(n),
            z_count: 0,
            v00_count: 0,
            v01_count: 0,
            finished_paths: 0,
            new_path_events: 0,
            t: 0,
            steps_by_kind: [0; 4],
            max_zeta: 0,
            cur_excursion: 0,
            longest_excursion: 0,
            t0: None,
            last_lambda: 0.0,
            step2_edge_uniform: false,
            seq,
        };
        for v in 0..n as u32 {
            let c = g.classify(v);
            g.add_to_class(v, c);
            g.class[v as usize] = c;
        }
        g
    }

    fn classify(&self, v: u32) -> Class {
        let d = self.seq.degree(v);
        match (self.b[v as usize], d) {
            (false, 0) => Class::V00,
            (false, 1) => Class::Y1,
            (false, 2) => Class::Y2,
            (false, _) => Class::Ybig,
            (true, 0) => Class::V01,
            (true, 1) => Class::Z1,
            (true, _) => Class::Zbig,
        }
    }

    fn add_to_class(&mut self, v: u32, c: Class) {
        match c {
            Class::Y1 => self.y1.insert(v),
            Class::Y2 => self.y2.insert(v),
            Class::Z1 => self.z1.insert(v),
            Class::Ybig => self.ybig.insert(v),
            Class::Zbig => self.z_count += 1,
            Class::V00 => self.v00_count += 1,
            Class::V01 => self.v01_count += 1,
        }
    }

    fn drop_from_class(&mut self, v: u32, c: Class) {
        match c {
            Class::Y1 => self.y1.remove(v),
            Class::Y2 => self.y2.remove(v),
            Class::Z1 => self.z1.remove(v),
            Class::Ybig => self.ybig.remove(v),
            Class::Zbig => self.z_count -= 1,
            Class::V00 => self.v00_count -= 1,
            Class::V01 => self.v01_count -= 1,
        }
    }

    /// Recompute `v`'s class from (degree, b). `deliberate` marks moves the
    /// step itself makes; only tidy-up transitions into V00 or into V01 at
    /// a live path end count as component-opening events.
    fn set_class(&mut self, v: u32, deliberate: bool) {
        let old = self.class[v as usize];
        let new = self.classify(v);
        if old == new {
            return;
        }
        self.drop_from_class(v, old);
        self.add_to_class(v, new);
        self.class[v as usize] = new;
        let has_partner = self.partner[v as usize] != NONE;
        if !deliberate && (new == Class::V00 || (new == Class::V01 && has_partner)) {
            self.new_path_events += 1;
        }
        if new == Class::V01 && has_partner {
            let u = self.partner[v as usize] as usize;
            if self.class[u] == Class::V01 {
                self.finished_paths += 1;
            }
        }
    }

    fn add_m_edge(&mut self, u: u32, v: u32) {
        for (a, b) in [(u, v), (v, u)] {
            let d = self.m_deg[a as usize] as usize;
            assert!(d < 2, "vertex {a} would exceed degree 2 in the 2-matching");
            self.m_adj[a as usize][d] = b;
            self.m_deg[a as usize] += 1;
        }
        self.m_edges.push((u, v));
    }

    /// Delete `v` from the evolving graph: star all its edges and
    /// reclassify the far endpoints (tidy-up).
    fn remove_vertex(&mut self, v: u32) {
        let removed = self.seq.delete_vertex_edges(v);
        for (w, is_loop) in removed {
            if !is_loop {
                self.set_class(w, false);
            }
        }
        self.set_class(v, true);
    }

    /// Walk the closed 2-matching component through `start` and collect it.
    fn collect_cycle(&self, start: u32) -> Vec<u32> {
        let mut out = vec![start];
        let mut prev = start;
        let mut cur = self.m_adj[start as usize][0];
        while cur != start {
            out.push(cur);
            let nxt = if self.m_adj[cur as usize][0] != prev {
                self.m_adj[cur as usize][0]
            } else {
                self.m_adj[cur as usize][1]
            };
            prev = cur;
            cur = nxt;
        }
        out
    }

    pub fn state_vector(&self) -> StateVector {
        StateVector {
            y1: self.y1.len(),
            y2: self.y2.len(),
            z1: self.z1.len(),
            y: self.ybig.len(),
            z: self.z_count,
            mu: self.seq.live_edge_count(),
        }
    }

    pub fn zeta(&self) -> usize {
        self.state_vector().zeta()
    }

    pub fn peek_kind(&self) -> Option<StepKind> {
        if !self.y1.is_empty() {
            Some(StepKind::OneA)
        } else if !self.y2.is_empty() {
            Some(StepKind::OneB)
        } else if !self.z1.is_empty() {
            Some(StepKind::OneC)
        } else if !self.ybig.is_empty() {
            Some(StepKind::Two)
        } else {
            None
        }
    }

    fn step_1a<R: Rng>(&mut self, rng: &mut R) {
        let v = self.y1.random(rng);
        debug_assert_eq!(self.seq.degree(v), 1);
        let p = self.seq.live_positions_of(v)[0];
        let w = self.seq.vertex_at(HalfEdgeSequence::partner_position(p));
        debug_assert_ne!(w, v, "degree-1 vertex cannot carry a loop");
        self.seq.delete_pair(p);
        self.add_m_edge(v, w);
        self.b[v as usize] = true;
        if !self.b[w as usize] {
            self.b[w as usize] = true;
            self.partner[v as usize] = w;
            self.partner[w as usize] = v;
            self.set_class(v, true);
            self.set_class(w, false); // re-assign
        } else {
            let u = self.partner[w as usize];
            debug_assert_ne!(u, NONE);
            self.partner[v as usize] = u;
            self.partner[u as usize] = v;
            self.partner[w as usize] = NONE;
            self.set_class(v, true);
            self.remove_vertex(w);
        }
    }

    fn step_1b<R: Rng>(&mut self, rng: &mut R) {
        let v = self.y2.random(rng);
        debug_assert_eq!(self.seq.degree(v), 2);
        let p1 = self.seq.live_positions_of(v)[0];
        let w1 = self.seq.vertex_at(HalfEdgeSequence::partner_position(p1));
        if w1 == v {
            // the two half-edges of v form a loop; drop v outright
            self.seq.delete_pair(p1);
            self.set_class(v, false); // lands in V00, a trivial component
            return;
        }
        let p2 = self.seq.live_positions_of(v)[1];
        let w2 = self.seq.vertex_at(HalfEdgeSequence::partner_position(p2));
        debug_assert_ne!(w2, v);
        self.seq.delete_pair(p1);
        // position indices may have moved; re-resolve the remaining edge
        let p2 = self.seq.live_positions_of(v)[0];
        debug_assert_eq!(self.seq.vertex_at(HalfEdgeSequence::partner_position(p2)), w2);
        self.seq.delete_pair(p2);
        self.b[v as usize] = true;

        if w1 == w2 {
            let w = w1;
            if !self.b[w as usize] {
                // doubled edge to an uncovered vertex closes a 2-cycle
                self.add_m_edge(v, w);
                self.add_m_edge(v, w);
                self.b[w as usize] = true;
                self.cycles.push(vec![v, w]);
                self.set_class(v, true);
                self.remove_vertex(w);
            } else {
                // only one copy fits into the 2-matching; the other copy is
                // already deleted, and v joins w's path as in step 1(a)
                self.add_m_edge(v, w);
                let u = self.partner[w as usize];
                debug_assert_ne!(u, NONE);
                self.partner[v as usize] = u;
                self.partner[u as usize] = v;
                self.partner[w as usize] = NONE;
                self.set_class(v, true);
                self.remove_vertex(w);
            }
            return;
        }

        self.add_m_edge(v, w1);
        self.add_m_edge(v, w2);
        match (self.b[w1 as usize], self.b[w2 as usize]) {
            (false, false) => {
                self.b[w1 as usize] = true;
                self.b[w2 as usize] = true;
                self.partner[w1 as usize] = w2;
                self.partner[w2 as usize] = w1;
                self.set_class(v, true);
                self.set_class(w1, false);
                self.set_class(w2, false);
            }
            (true, true) => {
                let u1 = self.partner[w1 as usize];
                let u2 = self.partner[w2 as usize];
                debug_assert!(u1 != NONE && u2 != NONE);
                if u1 == w2 {
                    // w1 and w2 end the same path: the new edges close a cycle
                    debug_assert_eq!(u2, w1);
                    self.partner[w1 as usize] = NONE;
                    self.partner[w2 as usize] = NONE;
                    let cycle = self.collect_cycle(v);
                    self.cycles.push(cycle);
                    self.set_class(v, true);
                    self.remove_vertex(w1);
                    self.remove_vertex(w2);
                } else {
                    debug_assert_ne!(u1, u2);
                    self.partner[u1 as usize] = u2;
                    self.partner[u2 as usize] = u1;
                    self.partner[w1 as usize] = NONE;
                    self.partner[w2 as usize] = NONE;
                    self.set_class(v, true);
                    self.remove_vertex(w1);
                    self.remove_vertex(w2);
                }
            }
            (covered1, _) => {
                // exactly one covered endpoint
                let (wu, wc) = if covered1 { (w2, w1) } else { (w1, w2) };
                let u = self.partner[wc as usize];
                debug_assert_ne!(u, NONE);
                self.partner[wu as usize] = u;
                self.partner[u as usize] = wu;
                self.partner[wc as usize] = NONE;
                self.b[wu as usize] = true;
                self.set_class(v, true);
                self.set_class(wu, false);
                self.remove_vertex(wc);
            }
        }
    }

    fn step_1c<R: Rng>(&mut self, rng: &mut R) {
        let v = self.z1.random(rng);
        debug_assert_eq!(self.seq.degree(v), 1);
        let u = self.partner[v as usize];
        debug_assert_ne!(u, NONE);
        let p = self.seq.live_positions_of(v)[0];
        let w = self.seq.vertex_at(HalfEdgeSequence::partner_position(p));
        debug_assert_ne!(w, v);
        self.seq.delete_pair(p);
        self.add_m_edge(v, w);
        self.partner[v as usize] = NONE;
        if !self.b[w as usize] {
            self.b[w as usize] = true;
            self.partner[w as usize] = u;
            self.partner[u as usize] = w;
            self.set_class(v, true);
            self.set_class(w, false);
        } else if self.partner[w as usize] == v {
            // w is the far end of v's own path: a cycle closes
            debug_assert_eq!(u, w);
            self.partner[w as usize] = NONE;
            let cycle = self.collect_cycle(v);
            self.cycles.push(cycle);
            self.set_class(v, true);
            self.remove_vertex(w);
        } else {
            let q = self.partner[w as usize];
            debug_assert!(q != NONE && q != u);
            self.partner[u as usize] = q;
            self.partner[q as usize] = u;
            self.partner[w as usize] = NONE;
            self.set_class(v, true);
            self.remove_vertex(w);
        }
    }

    /// One step-2 expansion. Returns false when the drawn half-edge was a
    /// loop (deleted, step to be retried).
    fn step_2<R: Rng>(&mut self, rng: &mut R) -> bool {
        let class = &self.class;
        let p = if self.step2_edge_uniform {
            // variant: uniform over eligible edges, uncovered side chosen
            let pos = self
                .seq
                .random_live_halfedge(rng, |x| class[x as usize] == Class::Ybig)
                .expect("step 2 requires a nonempty Y class");
            let q = HalfEdgeSequence::partner_position(pos);
            let (a, b) = (self.seq.vertex_at(pos), self.seq.vertex_at(q));
            let both = class[a as usize] == Class::Ybig && class[b as usize] == Class::Ybig;
            // a doubly-eligible edge was twice as likely to be drawn;
            // reject half of those draws to land uniform on edges
            if both && rng.gen_bool(0.5) {
                return self.step_2(rng);
            }
            pos
        } else {
            self.seq
                .random_live_halfedge(rng, |x| class[x as usize] == Class::Ybig)
                .expect("step 2 requires a nonempty Y class")
        };
        let p = p;
        let v = self.seq.vertex_at(p);
        let w = self.seq.vertex_at(HalfEdgeSequence::partner_position(p));
        if w == v {
            self.seq.delete_pair(p);
            self.set_class(v, false);
            return false;
        }
        self.seq.delete_pair(p);
        self.add_m_edge(v, w);
        self.b[v as usize] = true;
        self.set_class(v, false); // deg >= 2 keeps it covered-live
        if !self.b[w as usize] {
            self.b[w as usize] = true;
            self.partner[v as usize] = w;
            self.partner[w as usize] = v;
            self.set_class(w, false);
        } else {
            let u = self.partner[w as usize];
            debug_assert!(u != NONE && u != v);
            self.partner[v as usize] = u;
            self.partner[u as usize] = v;
            self.partner[w as usize] = NONE;
            self.remove_vertex(w);
        }
        true
    }

    /// Execute one numbered step (retrying internally over loop deletions).
    /// Returns the kind executed, or None when only the residual phase is left.
    pub fn step_once<R: Rng>(&mut self, rng: &mut R) -> Option<StepKind> {
        loop {
            let kind = self.peek_kind()?;
            let done = match kind {
                StepKind::OneA => {
                    self.step_1a(rng);
                    true
                }
                StepKind::OneB => {
                    self.step_1b(rng);
                    true
                }
                StepKind::OneC => {
                    self.step_1c(rng);
                    true
                }
                StepKind::Two => self.step_2(rng),
            };
            if done {
                self.t += 1;
                self.steps_by_kind[kind as usize] += 1;
                let zeta = self.zeta();
                self.max_zeta = self.max_zeta.max(zeta);
                if zeta > 0 {
                    self.cur_excursion += 1;
                    self.longest_excursion = self.longest_excursion.max(self.cur_excursion);
                } else {
                    self.cur_excursion = 0;
                }
                return Some(kind);
            }
        }
    }

    fn solve_state_lambda(&mut self) -> f64 {
        let sv = self.state_vector();
        if sv.n_live() == 0 {
            return 0.0;
        }
        let pi = sv.pi();
        if pi <= 3.0 * sv.y as f64 + 2.0 * sv.z as f64 {
            return 0.0;
        }
        match solve_lambda(sv.y as f64, sv.z as f64, pi, Some(self.last_lambda)) {
            Ok(l) => {
                self.last_lambda = l;
                l
            }
            Err(_) => 0.0,
        }
    }

    fn capture(&mut self, kind: Option<StepKind>, out: &mut Vec<TrajectoryRecord>) {
        let state = self.state_vector();
        let lambda = self.solve_state_lambda();
        let q = if lambda > 0.0 && state.mu > 0 && state.n_live() > 0 {
            abcd(state.y as f64, state.z as f64, state.mu as f64, lambda)
                .map(|m| m.q())
                .unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        let kappa_running = self.cycles.len() + self.v00_count + self.finished_paths;
        out.push(TrajectoryRecord { t: self.t, kind, state, lambda, q, kappa_running });
        // stopping-time monitor (never stops the run)
        if self.t0.is_none()
            && ((lambda > 0.0 && lambda <= 1.0) || state.n_live() * 2 <= self.n)
        {
            self.t0 = Some(self.t);
        }
    }

    /// Full rescan of every invariant the incremental state maintains.
    pub fn audit(&self) -> Result<()> {
        self.seq.audit_counts()?;
        for v in 0..self.n as u32 {
            let expect = self.classify(v);
            if self.class[v as usize] != expect {
                return Err(Error::AuditFailure(format!(
                    "vertex {v}: stored class {:?} but degree/b imply {:?}",
                    self.class[v as usize], expect
                )));
            }
            let covered = self.m_deg[v as usize] > 0;
            if covered != self.b[v as usize] {
                return Err(Error::AuditFailure(format!(
                    "vertex {v}: b flag {} but 2-matching degree {}",
                    self.b[v as usize], self.m_deg[v as usize]
                )));
            }
            let p = self.partner[v as usize];
            if p != NONE {
                if p == v {
                    return Err(Error::AuditFailure(format!("vertex {v} partnered to itself")));
                }
                if self.partner[p as usize] != v {
                    return Err(Error::AuditFailure(format!(
                        "partner map not involutive at {v}"
                    )));
                }
                if self.m_deg[v as usize] != 1 {
                    return Err(Error::AuditFailure(format!(
                        "vertex {v} has a partner but 2-matching degree {}",
                        self.m_deg[v as usize]
                    )));
                }
            } else if self.m_deg[v as usize] == 1 {
                return Err(Error::AuditFailure(format!(
                    "path endpoint {v} lacks a partner entry"
                )));
            }
        }
        // each partner pair must be the two ends of one 2-matching path
        let mut seen = vec![false; self.n];
        for v in 0..self.n as u32 {
            let u = self.partner[v as usize];
            if u == NONE || seen[v as usize] {
                continue;
            }
            let mut prev = v;
            let mut cur = self.m_adj[v as usize][0];
            let mut guard = 0;
            while self.m_deg[cur as usize] == 2 {
                let nxt = if self.m_adj[cur as usize][0] != prev {
                    self.m_adj[cur as usize][0]
                } else {
                    self.m_adj[cur as usize][1]
                };
                prev = cur;
                cur = nxt;
                guard += 1;
                if guard > self.n {
                    return Err(Error::AuditFailure(format!(
                        "path walk from {v} did not terminate"
                    )));
                }
            }
            if cur != u {
                return Err(Error::AuditFailure(format!(
                    "partner of {v} is {u} but its path ends at {cur}"
                )));
            }
            seen[v as usize] = true;
            seen[u as usize] = true;
        }
        Ok(())
    }

    /// Residual live edges collapsed to simple support (loops dropped,
    /// multiplicity flattened) for the matcher.
    fn residual_support(&self) -> Result<SimpleGraph> {
        let mut edges: Vec<(u32, u32)> = self
            .seq
            .live_edge_list()
            .into_iter()
            .filter(|&(a, b)| a != b)
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        SimpleGraph::new(self.n, edges)
    }

    pub fn run<R: Rng>(mut self, rng: &mut R, opts: &RunOptions) -> Result<RunOutput> {
        self.step2_edge_uniform = opts.step2_edge_uniform;
        let every = match opts.capture {
            Capture::Full => 1,
            Capture::Every(k) => k.max(1),
            Capture::Auto => self.n.div_ceil(10_000),
        };
        let mut trajectory = Vec::new();
        self.capture(None, &mut trajectory);
        while let Some(kind) = self.step_once(rng) {
            if self.t % every == 0 {
                self.capture(Some(kind), &mut trajectory);
            }
            if opts.audit_every > 0 && self.t % opts.audit_every == 0 {
                self.audit()?;
            }
        }
        if self.t % every != 0 {
            self.capture(None, &mut trajectory);
        }
        if opts.audit_every > 0 {
            self.audit()?;
        }
        let final_state = self.state_vector();
        let final_lambda = self.solve_state_lambda();
        debug_assert_eq!(final_state.y1 + final_state.y2 + final_state.y, 0);

        // residual phase: near-perfect matching on what remains
        let residual = self.residual_support()?;
        let m_star = augment(&residual, karp_sipser(&residual, rng), opts.augment_passes);
        let exposed = m_star.exposed(&residual).len();
        let two_matching = combine(self.n, &self.m_edges, &m_star)?;

        let t0 = self.t0;
        let max_zeta_up_to_t0 = trajectory
            .iter()
            .filter(|r| t0.is_none_or(|cut| r.t <= cut))
            .map(|r| r.state.zeta())
            .max()
            .unwrap_or(0);
        let summary = RunSummary {
            steps: self.t,
            steps_by_kind: self.steps_by_kind,
            final_y: final_state.y,
            final_z: final_state.z,
            final_mu: final_state.mu,
            final_lambda,
            max_zeta: self.max_zeta,
            max_zeta_up_to_t0,
            longest_zeta_excursion: self.longest_excursion,
            t0,
            new_path_events: self.new_path_events,
            completed_cycles: self.cycles.len(),
            exposed_after_matching: exposed,
            kappa_total: two_matching.kappa_total,
            kappa_nontrivial: two_matching.kappa_nontrivial,
        };
        Ok(RunOutput { two_matching, trajectory, summary })
    }
}

/// Expected one-step change of (y1, y2, z1, y, z, mu) in the simplified
/// multiplier form, by step kind.
pub fn expected_delta(kind: StepKind, sv: &StateVector, lambda: f64) -> Result<[f64; 6]> {
    let m = abcd(sv.y as f64, sv.z as f64, sv.mu as f64, lambda)?;
    let (a, b, c, d) = (m.a, m.b, m.c, m.d);
    Ok(match kind {
        StepKind::OneA => [-1.0, a, b, -c - a, 2.0 * c - 1.0 - b, -1.0 - d],
        StepKind::OneB => {
            [0.0, -1.0 + 2.0 * a, 2.0 * b, -2.0 * c - 2.0 * a, 4.0 * c - 2.0 - 2.0 * b, -2.0 - 2.0 * d]
        }
        StepKind::OneC => [0.0, a, -1.0 + b, -c - a, 2.0 * c - 1.0 - b, -1.0 - d],
        StepKind::Two => [0.0, a, b, -1.0 - c - a, 2.0 * c - b, -1.0 - d],
    })
}

/// Expected one-step change of zeta = y1 + 2 y2 + z1, including the
/// state-size correction terms for the forced kinds.
pub fn zeta_drift(kind: StepKind, sv: &StateVector, lambda: f64) -> Result<f64> {
    let m = abcd(sv.y as f64, sv.z as f64, sv.mu as f64, lambda)?;
    let q = q_value(m.a, m.b);
    let mu = sv.mu as f64;
    let zeta = sv.zeta() as f64;
    let corr = sv.z as f64 * lambda * lambda * f(0, lambda) / (4.0 * mu * mu * f(2, lambda));
    Ok(match kind {
        StepKind::OneA => {
            -(1.0 - q) - (zeta + sv.y2 as f64) * (1.0 / (2.0 * mu) + corr)
        }
        StepKind::OneB => -2.0 * (1.0 - q) - zeta * (1.0 / mu + 2.0 * corr),
        StepKind::OneC => -(1.0 - q) - zeta * (1.0 / (2.0 * mu) + corr),
        StepKind::Two => q,
    })
}

/// Post-hoc zeta statistics over a captured trajectory: maximum before the
/// monitor time t0 (first record with lambda <= 1 or y + z <= n/2) and the
/// longest positive excursion, at record granularity.
pub struct ZetaReport {
    pub max_zeta: usize,
    pub longest_excursion_records: usize,
    pub t0: Option<usize>,
}

pub fn zeta_monitor(trajectory: &[TrajectoryRecord], n: usize) -> ZetaReport {
    let mut t0 = None;
    for r in trajectory {
        if (r.lambda > 0.0 && r.lambda <= 1.0) || 2 * r.state.n_live() <= n {
            t0 = Some(r.t);
            break;
        }
    }
    let upto = |t: usize| t0.is_none_or(|cut| t <= cut);
    let max_zeta =
        trajectory.iter().filter(|r| upto(r.t)).map(|r| r.state.zeta()).max().unwrap_or(0);
    let mut longest = 0;
    let mut cur = 0;
    for r in trajectory {
        if r.state.zeta() > 0 && upto(r.t) {
            cur += 1;
            longest = longest.max(cur);
        } else {
            cur = 0;
        }
    }
    ZetaReport { max_zeta, longest_excursion_records: longest, t0 }
}

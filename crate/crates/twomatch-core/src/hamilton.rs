//! From a 2-matching to a Hamilton cycle: booster-edge splitting, the
//! rotation search with the distinct-endpoint rule, and the component
//! absorption loop, plus an independent cycle verifier.

use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use rand::Rng;
use std::collections::HashMap;

const NONE: u32 = u32::MAX;

/// Reserve edges disjoint from every degree-3 vertex, remove them, and hand
/// them back as candidate cycle closers. Resampled until the remainder
/// keeps minimum degree 3 (two removals can meet at a degree-4 vertex).
pub fn split_boosters<R: Rng>(
    g: &SimpleGraph,
    s: usize,
    rng: &mut R,
) -> Result<(SimpleGraph, BoosterSet)> {
    let eligible: Vec<(u32, u32)> = g
        .edges
        .iter()
        .copied()
        .filter(|&(u, v)| g.degree(u) > 3 && g.degree(v) > 3)
        .collect();
    if eligible.len() < s {
        return Err(Error::InsufficientEligibleEdges { need: s, have: eligible.len() });
    }
    let cap = 200;
    for _ in 0..cap {
        let mut idx: Vec<usize> = (0..eligible.len()).collect();
        for i in 0..s {
            let j = rng.gen_range(i..idx.len());
            idx.swap(i, j);
        }
        let picked: Vec<(u32, u32)> = idx[..s].iter().map(|&i| eligible[i]).collect();
        let h = g.without_edges(&picked)?;
        if h.min_degree() >= 3 {
            return Ok((h, BoosterSet::new(picked)));
        }
    }
    Err(Error::BoosterSplitFailure { attempts: cap })
}

/// Candidate closing edges, examined in a fixed order and never revisited.
#[derive(Debug, Clone)]
pub struct BoosterSet {
    pub edges: Vec<(u32, u32)>,
    pub examined: usize,
}

impl BoosterSet {
    pub fn new(edges: Vec<(u32, u32)>) -> Self {
        BoosterSet { edges, examined: 0 }
    }
    pub fn empty() -> Self {
        BoosterSet::new(Vec::new())
    }
    fn next(&mut self) -> Option<(u32, u32)> {
        let e = self.edges.get(self.examined).copied();
        if e.is_some() {
            self.examined += 1;
        }
        e
    }
    /// Edges looked at so far (only these may appear in the output cycle).
    pub fn consumed(&self) -> &[(u32, u32)] {
        &self.edges[..self.examined]
    }
}

/// Path surgery along a chord from the free endpoint: (u1..ui, uk..u_{i+1}).
/// The pivot must join the last vertex to a vertex at distance >= 2 from it.
pub fn rotate(path: &[u32], pivot: (u32, u32)) -> Vec<u32> {
    let k = path.len();
    assert!(k >= 3, "rotation needs at least three vertices");
    assert_eq!(pivot.0, path[k - 1], "pivot must start at the free endpoint");
    let i = path.iter().position(|&v| v == pivot.1).expect("pivot target not on path");
    assert!(i + 2 < k, "pivot target adjacent to the endpoint is not a rotation");
    let mut out = path.to_vec();
    out[i + 1..].reverse();
    out
}

/// Rotation tree rooted at one starting path: each discovered endpoint
/// stores its parent entry and the pivot index, so any derived path can be
/// replayed on demand.
#[derive(Debug, Clone)]
pub struct RotationForest {
    pub fixed: u32,
    root_path: Vec<u32>,
    parent: Vec<u32>,
    pivot: Vec<u32>,
    endpoint: Vec<u32>,
    entry_of: HashMap<u32, u32>,
    pub expansions: usize,
}

impl RotationForest {
    fn new(root_path: &[u32]) -> Self {
        let moving = *root_path.last().unwrap();
        let mut entry_of = HashMap::new();
        entry_of.insert(moving, 0);
        RotationForest {
            fixed: root_path[0],
            root_path: root_path.to_vec(),
            parent: vec![NONE],
            pivot: vec![NONE],
            endpoint: vec![moving],
            entry_of,
            expansions: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.endpoint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoint.is_empty()
    }

    pub fn contains(&self, v: u32) -> bool {
        self.entry_of.contains_key(&v)
    }

    pub fn endpoints(&self) -> &[u32] {
        &self.endpoint
    }

    fn push(&mut self, endpoint: u32, parent: u32, pivot: u32) -> u32 {
        let id = self.endpoint.len() as u32;
        self.endpoint.push(endpoint);
        self.parent.push(parent);
        self.pivot.push(pivot);
        self.entry_of.insert(endpoint, id);
        id
    }

    fn replay(&self, entry: u32, out: &mut Vec<u32>) {
        let mut chain = Vec::new();
        let mut e = entry;
        while e != 0 {
            chain.push(self.pivot[e as usize] as usize);
            e = self.parent[e as usize];
        }
        out.clear();
        out.extend_from_slice(&self.root_path);
        for &i in chain.iter().rev() {
            out[i + 1..].reverse();
        }
    }

    /// Path from the fixed endpoint to `v` (which must be in the forest).
    pub fn path_to(&self, v: u32) -> Vec<u32> {
        let mut out = Vec::new();
        self.replay(self.entry_of[&v], &mut out);
        out
    }
}

#[derive(Debug, Clone)]
pub enum RrsOutcome {
    /// a derived path whose endpoint sees a vertex off the path
    Extension { path: Vec<u32>, outside: u32 },
    /// a derived path spanning the whole graph whose endpoint sees the
    /// fixed endpoint (only reported when closure is enabled)
    Closure { path: Vec<u32> },
    /// endpoint budget or rotation supply ran out without an extension
    Exhausted { forest: RotationForest },
}

/// Breadth-first rotation expansion honoring the distinct-endpoint rule:
/// stop at the first extension, or after `nu` endpoints exist.
pub fn rrs(h: &SimpleGraph, path: &[u32], nu: usize) -> RrsOutcome {
    rrs_inner(h, path, nu, false)
}

fn rrs_inner(h: &SimpleGraph, path: &[u32], nu: usize, closure: bool) -> RrsOutcome {
    let n = h.n;
    let mut forest = RotationForest::new(path);
    let mut pos = vec![NONE; n];
    let mut queue_head = 0u32;
    let mut buf = Vec::with_capacity(path.len());
    while (queue_head as usize) < forest.len() {
        let entry = queue_head;
        queue_head += 1;
        forest.replay(entry, &mut buf);
        forest.expansions += 1;
        debug_assert!(forest.expansions <= nu.max(1) * nu.max(1) + 1);
        for (i, &v) in buf.iter().enumerate() {
            pos[v as usize] = i as u32;
        }
        let k = buf.len();
        let x = buf[k - 1];
        let spanning = k == n;
        for &w in h.neighbors(x) {
            if pos[w as usize] == NONE {
                return RrsOutcome::Extension { path: buf, outside: w };
            }
            if closure && spanning && w == forest.fixed && k >= 3 {
                return RrsOutcome::Closure { path: buf };
            }
            let i = pos[w as usize] as usize;
            if i + 2 >= k {
                continue; // path neighbor or the endpoint itself
            }
            let new_end = buf[i + 1];
            if !forest.contains(new_end) {
                forest.push(new_end, entry, i as u32);
                if forest.len() >= nu {
                    return RrsOutcome::Exhausted { forest };
                }
            }
        }
        // every derived path permutes the same vertex set, so the position
        // stamps are fully overwritten on the next replay
    }
    RrsOutcome::Exhausted { forest }
}

/// Full two-level search: endpoint sets from the fixed end, then one set
/// from each discovered endpoint. Intended for small fixtures; the cycle
/// builder expands second-level sets lazily instead.
pub struct EndpointSets {
    pub from_fixed: RotationForest,
    pub from_each: Vec<(u32, RrsOutcome)>,
}

pub fn rrs_full(h: &SimpleGraph, path: &[u32], nu: usize) -> std::result::Result<EndpointSets, Box<RrsOutcome>> {
    match rrs_inner(h, path, nu, false) {
        RrsOutcome::Exhausted { forest } => {
            let mut from_each = Vec::new();
            for &x in forest.endpoints() {
                let mut p = forest.path_to(x);
                p.reverse();
                from_each.push((x, rrs_inner(h, &p, nu, false)));
            }
            Ok(EndpointSets { from_fixed: forest, from_each })
        }
        other => Err(Box::new(other)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum HamFailure {
    Disconnected,
    BoostersExhausted,
    RrsStalled,
}

impl std::fmt::Display for HamFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            HamFailure::Disconnected => "input graph is disconnected",
            HamFailure::BoostersExhausted => "ran out of candidate closing edges",
            HamFailure::RrsStalled => "rotation search exceeded its execution budget",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct HamRun {
    pub cycle: Vec<u32>,
    pub boosters_examined: usize,
    pub rrs_executions: usize,
}

#[derive(Debug, Clone)]
struct Comp {
    verts: Vec<u32>,
    is_cycle: bool,
}

/// Splice `outside`'s component onto the end of `path`. Cycles are
/// absorbed whole; a path component contributes its longer side (the
/// short side, at most half, is re-filed as a fresh path component).
fn absorb(
    path: &mut Vec<u32>,
    outside: u32,
    comps: &mut Vec<Comp>,
    comp_of: &mut [u32],
) {
    let ci = comp_of[outside as usize] as usize;
    let verts = std::mem::take(&mut comps[ci].verts);
    let is_cycle = comps[ci].is_cycle;
    let j = verts.iter().position(|&v| v == outside).unwrap();
    let l = verts.len();
    let mark = |path: &mut Vec<u32>, v: u32, comp_of: &mut [u32]| {
        comp_of[v as usize] = NONE;
        path.push(v);
    };
    if is_cycle {
        for k in 0..l {
            mark(path, verts[(j + k) % l], comp_of);
        }
    } else {
        let left = j + 1;
        let right = l - j;
        let leftover: Vec<u32> = if left >= right {
            for k in (0..=j).rev() {
                mark(path, verts[k], comp_of);
            }
            verts[j + 1..].to_vec()
        } else {
            for k in j..l {
                mark(path, verts[k], comp_of);
            }
            verts[..j].to_vec()
        };
        if !leftover.is_empty() {
            let id = comps.len() as u32;
            for &v in &leftover {
                comp_of[v as usize] = id;
            }
            comps.push(Comp { verts: leftover, is_cycle: false });
        }
    }
}

fn components_of(n: usize, edges: &[(u32, u32)]) -> Vec<Comp> {
    let mut adj = vec![[NONE; 2]; n];
    let mut deg = vec![0u8; n];
    for &(u, v) in edges {
        for (a, b) in [(u, v), (v, u)] {
            assert!(deg[a as usize] < 2, "not a 2-matching");
            adj[a as usize][deg[a as usize] as usize] = b;
            deg[a as usize] += 1;
        }
    }
    let walk = |start: u32, first: u32, seen: &mut [bool]| -> Vec<u32> {
        let mut verts = vec![start];
        seen[start as usize] = true;
        let (mut prev, mut cur) = (start, first);
        while cur != NONE && cur != start {
            verts.push(cur);
            seen[cur as usize] = true;
            let nx = adj[cur as usize];
            let nxt = if nx[0] != prev { nx[0] } else { nx[1] };
            prev = cur;
            cur = nxt;
        }
        verts
    };
    let mut comps = Vec::new();
    let mut seen = vec![false; n];
    for v in 0..n as u32 {
        if !seen[v as usize] && deg[v as usize] <= 1 {
            let first = adj[v as usize][0];
            let verts = walk(v, first, &mut seen);
            comps.push(Comp { verts, is_cycle: false });
        }
    }
    for v in 0..n as u32 {
        if !seen[v as usize] {
            let verts = walk(v, adj[v as usize][0], &mut seen);
            comps.push(Comp { verts, is_cycle: true });
        }
    }
    comps
}

/// Grow a Hamilton cycle of `h` (+ examined boosters) from a spanning
/// 2-matching. Each search execution either merges two components, splits
/// off at most half of one, or closes the final cycle, which bounds the
/// execution count by kappa + sum log2 n_i (+ slack for the closure).
pub fn ham<R: Rng>(
    h: &SimpleGraph,
    boosters: &mut BoosterSet,
    m0_edges: &[(u32, u32)],
    nu: usize,
    rng: &mut R,
) -> std::result::Result<HamRun, HamFailure> {
    let n = h.n;
    if !h.is_connected() {
        return Err(HamFailure::Disconnected);
    }
    if n < 3 {
        return Err(HamFailure::RrsStalled);
    }
    let mut comps = components_of(n, m0_edges);
    let exec_cap: usize = comps.len()
        + comps.iter().map(|c| (c.verts.len() as f64).log2().ceil() as usize).sum::<usize>()
        + 4;
    // comp_of[v] = index into comps, or NONE when v sits on the working path
    let mut comp_of = vec![NONE; n];
    for (i, c) in comps.iter().enumerate() {
        for &v in &c.verts {
            comp_of[v as usize] = i as u32;
        }
    }

    // working path: longest path component, or the largest cycle opened at
    // a random edge
    let start = comps
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_cycle)
        .max_by_key(|(_, c)| c.verts.len())
        .map(|(i, _)| i)
        .unwrap_or_else(|| {
            comps.iter().enumerate().max_by_key(|(_, c)| c.verts.len()).map(|(i, _)| i).unwrap()
        });
    let mut path = {
        let c = &comps[start];
        if c.is_cycle {
            let cut = rng.gen_range(0..c.verts.len());
            let mut p = c.verts[cut + 1..].to_vec();
            p.extend_from_slice(&c.verts[..=cut]);
            p
        } else {
            c.verts.clone()
        }
    };
    for &v in &path {
        comp_of[v as usize] = NONE;
    }

    let mut rrs_executions = 0usize;

    loop {
        if rrs_executions >= exec_cap {
            return Err(HamFailure::RrsStalled);
        }
        rrs_executions += 1;
        match rrs_inner(h, &path, nu, true) {
            RrsOutcome::Closure { path: p } => {
                debug_assert!(verify_hamilton(h, boosters.consumed(), &p));
                return Ok(HamRun {
                    cycle: p,
                    boosters_examined: boosters.examined,
                    rrs_executions,
                });
            }
            RrsOutcome::Extension { path: p, outside } => {
                path = p;
                absorb(&mut path, outside, &mut comps, &mut comp_of);
            }
            RrsOutcome::Exhausted { forest } => {
                // second level: search again from every discovered endpoint,
                // taking any extension for free, before touching the
                // closing-edge supply
                let mut second: HashMap<u32, RotationForest> = HashMap::new();
                let mut progressed = false;
                for &x in forest.endpoints() {
                    let mut pp = forest.path_to(x);
                    pp.reverse();
                    match rrs_inner(h, &pp, nu, true) {
                        RrsOutcome::Closure { path: c } => {
                            debug_assert!(verify_hamilton(h, boosters.consumed(), &c));
                            return Ok(HamRun {
                                cycle: c,
                                boosters_examined: boosters.examined,
                                rrs_executions,
                            });
                        }
                        RrsOutcome::Extension { path: np, outside } => {
                            path = np;
                            absorb(&mut path, outside, &mut comps, &mut comp_of);
                            progressed = true;
                            break;
                        }
                        RrsOutcome::Exhausted { forest: fx } => {
                            second.insert(x, fx);
                        }
                    }
                }
                if progressed {
                    continue;
                }
                'scan: while let Some((a, b)) = boosters.next() {
                    for (p, q) in [(a, b), (b, a)] {
                        let Some(fp) = second.get(&p) else { continue };
                        if !fp.contains(q) {
                            continue;
                        }
                        // cycle: path p..q closed by the examined edge (p, q)
                        let cyc = fp.path_to(q);
                        if cyc.len() == n {
                            debug_assert!(verify_hamilton(h, boosters.consumed(), &cyc));
                            return Ok(HamRun {
                                cycle: cyc,
                                boosters_examined: boosters.examined,
                                rrs_executions,
                            });
                        }
                        // reopen the cycle next to a vertex with an outside
                        // neighbor, then extend out of it
                        let on_cycle: std::collections::HashSet<u32> =
                            cyc.iter().copied().collect();
                        let mut hook = None;
                        'find: for (i, &u) in cyc.iter().enumerate() {
                            for &w in h.neighbors(u) {
                                if !on_cycle.contains(&w) {
                                    hook = Some((i, w));
                                    break 'find;
                                }
                            }
                        }
                        let Some((i, v_out)) = hook else {
                            // connectivity precheck makes this unreachable
                            return Err(HamFailure::RrsStalled);
                        };
                        let l = cyc.len();
                        let prev = cyc[(i + l - 1) % l];
                        let next = cyc[(i + 1) % l];
                        // drop the cycle edge toward the smaller neighbor id,
                        // leaving a path that ends at the hook vertex
                        let mut newp = Vec::with_capacity(l);
                        if prev < next {
                            for k in 0..l {
                                newp.push(cyc[(i + l - 1 - k) % l]);
                            }
                        } else {
                            for k in 0..l {
                                newp.push(cyc[(i + 1 + k) % l]);
                            }
                        }
                        debug_assert_eq!(*newp.last().unwrap(), cyc[i]);
                        path = newp;
                        absorb(&mut path, v_out, &mut comps, &mut comp_of);
                        progressed = true;
                        break 'scan;
                    }
                }
                if !progressed {
                    return Err(HamFailure::BoostersExhausted);
                }
            }
        }
    }
}

/// True iff `cycle` visits every vertex exactly once and every consecutive
/// pair (wrapping) is an edge of `g` or a declared booster.
pub fn verify_hamilton(g: &SimpleGraph, boosters: &[(u32, u32)], cycle: &[u32]) -> bool {
    if cycle.len() != g.n || g.n < 3 {
        return false;
    }
    let mut seen = vec![false; g.n];
    for &v in cycle {
        if v as usize >= g.n || seen[v as usize] {
            return false;
        }
        seen[v as usize] = true;
    }
    let is_booster = |u: u32, v: u32| {
        boosters.iter().any(|&(a, b)| (a, b) == (u, v) || (a, b) == (v, u))
    };
    cycle.iter().zip(cycle.iter().cycle().skip(1)).all(|(&u, &v)| {
        g.has_edge(u, v) || is_booster(u, v)
    })
}

/// Canonical printed form: start at the smallest id, smaller neighbor second.
pub fn canonical_cycle(cycle: &[u32]) -> Vec<u32> {
    let n = cycle.len();
    let i = (0..n).min_by_key(|&i| cycle[i]).unwrap();
    let fwd = cycle[(i + 1) % n];
    let bwd = cycle[(i + n - 1) % n];
    let mut out = Vec::with_capacity(n);
    if fwd <= bwd {
        for k in 0..n {
            out.push(cycle[(i + k) % n]);
        }
    } else {
        for k in 0..n {
            out.push(cycle[(i + n - k) % n]);
        }
    }
    out
}

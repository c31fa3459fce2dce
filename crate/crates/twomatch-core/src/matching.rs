//! Near-perfect matching on the residual graph: Karp-Sipser greedy with
//! forced degree-1 moves, blossom-free alternating-path augmentation, and
//! the union step assembling the final 2-matching.

use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use rand::Rng;
use std::collections::VecDeque;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct Matching {
    pub mate: Vec<u32>,
}

impl Matching {
    pub fn empty(n: usize) -> Self {
        Matching { mate: vec![NONE; n] }
    }

    pub fn size(&self) -> usize {
        self.mate.iter().filter(|&&m| m != NONE).count() / 2
    }

    pub fn is_matched(&self, v: u32) -> bool {
        self.mate[v as usize] != NONE
    }

    pub fn edges(&self) -> Vec<(u32, u32)> {
        self.mate
            .iter()
            .enumerate()
            .filter_map(|(v, &m)| (m != NONE && (v as u32) < m).then_some((v as u32, m)))
            .collect()
    }

    /// Vertices of the graph's support left unmatched (isolated vertices of
    /// the ambient id range are not counted).
    pub fn exposed(&self, g: &SimpleGraph) -> Vec<u32> {
        (0..g.n as u32)
            .filter(|&v| g.degree(v) > 0 && !self.is_matched(v))
            .collect()
    }

    pub fn validate(&self, g: &SimpleGraph) -> Result<()> {
        for v in 0..self.mate.len() as u32 {
            let m = self.mate[v as usize];
            if m != NONE {
                if self.mate[m as usize] != v {
                    return Err(Error::AuditFailure(format!("mate not involutive at {v}")));
                }
                if v < m && !g.has_edge(v, m) {
                    return Err(Error::AuditFailure(format!("matched non-edge {v}-{m}")));
                }
            }
        }
        Ok(())
    }
}

/// Greedy matching: while a degree-1 vertex exists match its unique edge
/// (never a mistake), otherwise match a uniformly random live edge.
pub fn karp_sipser<R: Rng>(g: &SimpleGraph, rng: &mut R) -> Matching {
    let n = g.n;
    let mut matching = Matching::empty(n);
    let mut alive = vec![true; n];
    let mut deg: Vec<u32> = (0..n as u32).map(|v| g.degree(v) as u32).collect();
    let mut queue: VecDeque<u32> = (0..n as u32).filter(|&v| deg[v as usize] == 1).collect();
    // live edge pool with lazy deletion
    let mut pool: Vec<u32> = (0..g.edges.len() as u32).collect();

    let remove = |v: u32,
                      alive: &mut Vec<bool>,
                      deg: &mut Vec<u32>,
                      queue: &mut VecDeque<u32>| {
        alive[v as usize] = false;
        for &w in g.neighbors(v) {
            if alive[w as usize] {
                deg[w as usize] -= 1;
                if deg[w as usize] == 1 {
                    queue.push_back(w);
                }
            }
        }
    };

    loop {
        // forced moves first
        if let Some(u) = queue.pop_front() {
            if !alive[u as usize] || deg[u as usize] != 1 {
                continue;
            }
            let v = *g
                .neighbors(u)
                .iter()
                .find(|&&w| alive[w as usize])
                .expect("degree-1 vertex with no live neighbor");
            matching.mate[u as usize] = v;
            matching.mate[v as usize] = u;
            remove(u, &mut alive, &mut deg, &mut queue);
            remove(v, &mut alive, &mut deg, &mut queue);
            continue;
        }
        // random move: draw from the pool until a live edge comes up
        let mut picked = None;
        while !pool.is_empty() {
            let i = rng.gen_range(0..pool.len());
            let e = pool[i];
            let (u, v) = g.edges[e as usize];
            if alive[u as usize] && alive[v as usize] {
                picked = Some((u, v));
                break;
            }
            pool.swap_remove(i);
        }
        match picked {
            Some((u, v)) => {
                matching.mate[u as usize] = v;
                matching.mate[v as usize] = u;
                remove(u, &mut alive, &mut deg, &mut queue);
                remove(v, &mut alive, &mut deg, &mut queue);
            }
            None => break,
        }
    }
    matching
}

/// Alternating-path augmentation by BFS from exposed vertices, without
/// blossom shrinking, repeated until a pass finds nothing or the pass
/// budget runs out. Never decreases the matching.
pub fn augment(g: &SimpleGraph, mut matching: Matching, passes: u32) -> Matching {
    let n = g.n;
    let mut parent = vec![NONE; n];
    let mut visited = vec![0u32; n];
    let mut epoch = 0u32;
    for _ in 0..passes {
        let mut improved = false;
        for root in 0..n as u32 {
            if matching.is_matched(root) || g.degree(root) == 0 {
                continue;
            }
            epoch += 1;
            // BFS over even-level vertices only
            let mut queue = VecDeque::new();
            queue.push_back(root);
            visited[root as usize] = epoch;
            parent[root as usize] = NONE;
            let mut endpoint = None;
            'search: while let Some(u) = queue.pop_front() {
                for &w in g.neighbors(u) {
                    if visited[w as usize] == epoch {
                        continue;
                    }
                    if !matching.is_matched(w) {
                        // augmenting path root ... u - w
                        visited[w as usize] = epoch;
                        parent[w as usize] = u;
                        endpoint = Some(w);
                        break 'search;
                    }
                    let x = matching.mate[w as usize];
                    visited[w as usize] = epoch;
                    parent[w as usize] = u;
                    if visited[x as usize] != epoch {
                        visited[x as usize] = epoch;
                        parent[x as usize] = w;
                        queue.push_back(x);
                    }
                }
            }
            if let Some(mut w) = endpoint {
                // flip along root..w; even vertices re-pair with the child side
                loop {
                    let u = parent[w as usize];
                    let prev_odd = if u == root { NONE } else { parent[u as usize] };
                    matching.mate[w as usize] = u;
                    matching.mate[u as usize] = w;
                    if u == root {
                        break;
                    }
                    w = prev_odd;
                }
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    matching
}

/// Component census of a spanning subgraph with maximum degree 2.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TwoMatching {
    pub n: usize,
    pub edges: Vec<(u32, u32)>,
    pub cycles: usize,
    pub paths: usize,
    pub isolated: usize,
    pub kappa_total: usize,
    pub kappa_nontrivial: usize,
    /// component sizes, one per component
    pub component_sizes: Vec<usize>,
}

/// Union of the grown 2-matching edges and the residual matching, with a
/// degree check and component classification.
pub fn combine(n: usize, m_edges: &[(u32, u32)], m_star: &Matching) -> Result<TwoMatching> {
    let mut edges: Vec<(u32, u32)> = m_edges.to_vec();
    edges.extend(m_star.edges());
    let mut adj = vec![[NONE; 2]; n];
    let mut deg = vec![0u8; n];
    for &(u, v) in &edges {
        for (a, b) in [(u, v), (v, u)] {
            if deg[a as usize] >= 2 {
                return Err(Error::NotATwoMatching(a));
            }
            adj[a as usize][deg[a as usize] as usize] = b;
            deg[a as usize] += 1;
        }
    }
    let mut seen = vec![false; n];
    let (mut cycles, mut paths, mut isolated) = (0, 0, 0);
    let mut component_sizes = Vec::new();
    for s in 0..n as u32 {
        if seen[s as usize] {
            continue;
        }
        if deg[s as usize] == 0 {
            seen[s as usize] = true;
            isolated += 1;
            component_sizes.push(1);
            continue;
        }
        if deg[s as usize] == 2 {
            continue; // paths are traversed from an endpoint; cycles picked up below
        }
        // endpoint of a path: walk it
        let mut size = 1;
        seen[s as usize] = true;
        let (mut prev, mut cur) = (s, adj[s as usize][0]);
        while cur != NONE {
            seen[cur as usize] = true;
            size += 1;
            let nexts = adj[cur as usize];
            let nxt = if nexts[0] != prev { nexts[0] } else { nexts[1] };
            prev = cur;
            cur = nxt;
        }
        paths += 1;
        component_sizes.push(size);
    }
    for s in 0..n as u32 {
        if seen[s as usize] {
            continue;
        }
        // remaining components are cycles
        let mut size = 1;
        seen[s as usize] = true;
        let (mut prev, mut cur) = (s, adj[s as usize][0]);
        while cur != s {
            seen[cur as usize] = true;
            size += 1;
            let nexts = adj[cur as usize];
            let nxt = if nexts[0] != prev { nexts[0] } else { nexts[1] };
            prev = cur;
            cur = nxt;
        }
        cycles += 1;
        component_sizes.push(size);
    }
    let kappa_total = cycles + paths + isolated;
    Ok(TwoMatching {
        n,
        edges,
        cycles,
        paths,
        isolated,
        kappa_total,
        kappa_nontrivial: kappa_total - isolated,
        component_sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn graph(n: usize, edges: &[(u32, u32)]) -> SimpleGraph {
        SimpleGraph::new(n, edges.to_vec()).unwrap()
    }

    /// Exact maximum matching size by memoized branching; fine for n <= 20.
    pub(crate) fn max_matching_size(g: &SimpleGraph) -> usize {
        fn rec(g: &SimpleGraph, free: u32, memo: &mut std::collections::HashMap<u32, usize>) -> usize {
            if free == 0 {
                return 0;
            }
            if let Some(&v) = memo.get(&free) {
                return v;
            }
            let v = free.trailing_zeros();
            let without = rec(g, free & !(1 << v), memo);
            let mut best = without;
            for &w in g.neighbors(v) {
                if free & (1 << w) != 0 {
                    best = best.max(1 + rec(g, free & !(1 << v) & !(1 << w), memo));
                }
            }
            memo.insert(free, best);
            best
        }
        let mut memo = std::collections::HashMap::new();
        rec(g, (1u32 << g.n) - 1, &mut memo)
    }

    #[test]
    fn forced_move_on_path() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let m = karp_sipser(&g, &mut rng);
        m.validate(&g).unwrap();
        assert_eq!(m.size(), 1);
        assert_eq!(m.exposed(&g).len(), 1);
    }

    #[test]
    fn four_cycle_always_perfect() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        for seed in 0..50 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let m = karp_sipser(&g, &mut rng);
            m.validate(&g).unwrap();
            assert_eq!(m.size(), 2, "seed {seed}");
        }
    }

    #[test]
    fn empty_graph_empty_matching() {
        let g = graph(5, &[]);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let m = karp_sipser(&g, &mut rng);
        assert_eq!(m.size(), 0);
        assert!(m.exposed(&g).is_empty());
    }

    #[test]
    fn augmenting_single_path() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let mut m = Matching::empty(4);
        m.mate[1] = 2;
        m.mate[2] = 1;
        let m = augment(&g, m, 10);
        m.validate(&g).unwrap();
        assert_eq!(m.size(), 2);
        assert!(m.exposed(&g).is_empty());
    }

    #[test]
    fn augment_is_monotone_and_idempotent() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..30 {
            let g = crate::graph::sample_gnm(12, 18, &mut rng).unwrap();
            let m0 = karp_sipser(&g, &mut rng);
            let s0 = m0.size();
            let m1 = augment(&g, m0, 50);
            m1.validate(&g).unwrap();
            assert!(m1.size() >= s0);
            let m2 = augment(&g, m1.clone(), 50);
            assert_eq!(m1.size(), m2.size());
        }
    }

    #[test]
    fn near_bruteforce_on_small_graphs() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let mut agree = 0;
        let trials = 200;
        for _ in 0..trials {
            let n = rng.gen_range(4..=12usize);
            let m = rng.gen_range(n / 2..=(n * (n - 1) / 2).min(2 * n));
            let g = crate::graph::sample_gnm(n, m, &mut rng).unwrap();
            let best = max_matching_size(&g);
            let got = augment(&g, karp_sipser(&g, &mut rng), 100).size();
            assert!(got <= best);
            if got == best {
                agree += 1;
            }
        }
        assert!(agree * 100 >= trials * 95, "only {agree}/{trials} optimal");
    }

    #[test]
    fn union_census() {
        // path 1-3-2 contracted to partner pair (1,2); m_star closes it
        let m_edges = vec![(1, 3), (3, 2)];
        let mut star = Matching::empty(4);
        star.mate[1] = 2;
        star.mate[2] = 1;
        let tm = combine(4, &m_edges, &star).unwrap();
        assert_eq!(tm.cycles, 1);
        assert_eq!(tm.isolated, 1); // vertex 0
        assert_eq!(tm.kappa_total, 2);
        assert_eq!(tm.kappa_nontrivial, 1);

        // perfect matching alone: k one-edge paths
        let mut star = Matching::empty(6);
        for (a, b) in [(0u32, 1u32), (2, 3), (4, 5)] {
            star.mate[a as usize] = b;
            star.mate[b as usize] = a;
        }
        let tm = combine(6, &[], &star).unwrap();
        assert_eq!(tm.paths, 3);
        assert_eq!(tm.kappa_total, 3);

        // degree-3 vertex rejected
        let bad = vec![(0u32, 1u32), (0, 2), (0, 3)];
        assert!(matches!(
            combine(4, &bad, &Matching::empty(4)),
            Err(Error::NotATwoMatching(0))
        ));
    }
}

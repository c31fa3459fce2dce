//! Plain simple-graph container shared by the matcher and the Hamilton
//! pipeline, plus samplers for the min-degree-conditioned models and the
//! text interchange format.

use crate::degree::{sample_conditioned_degrees, ProfileTemplate, TruncatedPoisson};
use crate::error::{Error, Result};
use crate::seq::HalfEdgeSequence;
use rand::Rng;
use std::collections::HashSet;
use std::io::{BufRead, Write};

#[derive(Debug, Clone)]
pub struct SimpleGraph {
    pub n: usize,
    pub edges: Vec<(u32, u32)>,
    adj: Vec<Vec<u32>>,
}

impl SimpleGraph {
    pub fn new(n: usize, mut edges: Vec<(u32, u32)>) -> Result<Self> {
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
            if e.0 == e.1 {
                return Err(Error::BadGraphFile(format!("loop at vertex {}", e.0)));
            }
            if e.1 as usize >= n {
                return Err(Error::BadGraphFile(format!("vertex {} out of range", e.1)));
            }
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::BadGraphFile("repeated edge".into()));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
        }
        Ok(SimpleGraph { n, edges, adj })
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].binary_search(&v).is_ok()
    }

    pub fn min_degree(&self) -> usize {
        (0..self.n).map(|v| self.adj[v].len()).min().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0u32];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in self.neighbors(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }

    /// Graph with the edge set minus `remove` (which must be present edges).
    pub fn without_edges(&self, remove: &[(u32, u32)]) -> Result<SimpleGraph> {
        let gone: HashSet<(u32, u32)> =
            remove.iter().map(|&(u, v)| if u < v { (u, v) } else { (v, u) }).collect();
        let kept: Vec<(u32, u32)> =
            self.edges.iter().copied().filter(|e| !gone.contains(e)).collect();
        SimpleGraph::new(self.n, kept)
    }

    /// First line "n m", then m lines "u v", 0-based, lexicographically
    /// sorted. Loops are rejected at construction so none can be written.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.edges.len())?;
        for &(u, v) in &self.edges {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<SimpleGraph> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::BadGraphFile("bad header".into()))?;
        let m: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::BadGraphFile("bad header".into()))?;
        let mut edges = Vec::with_capacity(m);
        for line in r.lines().take(m) {
            let line = line?;
            let mut it = line.split_whitespace();
            let u: u32 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::BadGraphFile(format!("bad edge line: {line}")))?;
            let v: u32 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::BadGraphFile(format!("bad edge line: {line}")))?;
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(Error::BadGraphFile(format!(
                "expected {m} edges, found {}",
                edges.len()
            )));
        }
        SimpleGraph::new(n, edges)
    }

    pub fn from_halfedge(seq: &HalfEdgeSequence) -> Result<SimpleGraph> {
        SimpleGraph::new(seq.n, seq.live_edge_list())
    }
}

/// Uniform m-subset of vertex pairs (an Erdos-Renyi G(n, m) draw).
pub fn sample_gnm<R: Rng>(n: usize, m: usize, rng: &mut R) -> Result<SimpleGraph> {
    let pairs = n as u64 * (n as u64 - 1) / 2;
    assert!((m as u64) <= pairs, "more edges than vertex pairs");
    let mut seen = HashSet::with_capacity(2 * m);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let u = rng.gen_range(0..n as u32);
        let v = rng.gen_range(0..n as u32);
        if u == v {
            continue;
        }
        let key = if u < v { (u, v) } else { (v, u) };
        if seen.insert(key) {
            edges.push(key);
        }
    }
    SimpleGraph::new(n, edges)
}

/// Uniform simple graph with n vertices, m edges and minimum degree >= 3.
///
/// Two exact rejection routes target the same distribution: resampling
/// G(n, m) until the minimum degree holds, and resampling a conditioned
/// pairing until it is simple. Their acceptance rates collapse in opposite
/// density regimes, so the expected-cheaper route is taken; if both rates
/// are estimated below 1e-6 the sampler refuses rather than spin.
pub fn sample_min_degree3<R: Rng>(n: usize, m: usize, rng: &mut R) -> Result<SimpleGraph> {
    let rate_gnm = gnm_min_degree_rate(n, m);
    let rate_cfg = pairing_simplicity_rate(n, m);
    if rate_gnm >= rate_cfg {
        if rate_gnm < 1e-6 {
            return Err(Error::SamplingFailure { attempts: 0 });
        }
        let cap = (200.0 / rate_gnm).ceil() as u64;
        for _ in 0..cap {
            let g = sample_gnm(n, m, rng)?;
            if g.min_degree() >= 3 {
                return Ok(g);
            }
        }
        Err(Error::SamplingFailure { attempts: cap })
    } else {
        if rate_cfg < 1e-6 {
            return Err(Error::SamplingFailure { attempts: 0 });
        }
        let seq = sample_pairing_min_degree3_simple(n, m, rng, (200.0 / rate_cfg).ceil() as u64)?;
        SimpleGraph::from_halfedge(&seq)
    }
}

/// Conditioned pairing resampled until simple.
pub fn sample_pairing_min_degree3_simple<R: Rng>(
    n: usize,
    m: usize,
    rng: &mut R,
    cap: u64,
) -> Result<HalfEdgeSequence> {
    let template = ProfileTemplate::min_degree3(n);
    crate::seq::sample_simple(
        |r: &mut R| Ok(sample_conditioned_degrees(&template, m as u64, r)?.profile),
        rng,
        cap,
    )
}

/// Raw conditioned pairing (multigraph allowed).
pub fn sample_pairing_min_degree3<R: Rng>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<HalfEdgeSequence> {
    let template = ProfileTemplate::min_degree3(n);
    let s = sample_conditioned_degrees(&template, m as u64, rng)?;
    Ok(HalfEdgeSequence::pair_sequence(&s.profile, rng))
}

/// Estimated probability that G(n, m) has minimum degree >= 3, from the
/// Poisson degree approximation.
fn gnm_min_degree_rate(n: usize, m: usize) -> f64 {
    let mean = 2.0 * m as f64 / n as f64;
    let p_low = (-mean).exp() * (1.0 + mean + 0.5 * mean * mean);
    (-(n as f64) * p_low).exp()
}

/// Estimated probability that a conditioned pairing is simple:
/// exp(-nu/2 - nu^2/4) with nu = E[d(d-1)] / E[d].
fn pairing_simplicity_rate(n: usize, m: usize) -> f64 {
    let lambda = match crate::degree::solve_lambda(n as f64, 0.0, 2.0 * m as f64, None) {
        Ok(l) => l,
        Err(_) => return 1.0, // boundary: forced 3-regular profiles
    };
    let dist = TruncatedPoisson::new(lambda, 3);
    let (mut e1, mut e2) = (0.0, 0.0);
    for k in 3..200 {
        let p = dist.pmf(k);
        e1 += k as f64 * p;
        e2 += (k * (k - 1)) as f64 * p;
    }
    let nu = e2 / e1;
    (-nu / 2.0 - nu * nu / 4.0).exp()
}

/// The Petersen graph; hypohamiltonian, so the cycle search must fail on it.
pub fn petersen() -> SimpleGraph {
    let mut edges = Vec::new();
    for i in 0..5u32 {
        edges.push((i, (i + 1) % 5)); // outer cycle
        edges.push((i, i + 5)); // spokes
        edges.push((i + 5, (i + 2) % 5 + 5)); // pentagram
    }
    SimpleGraph::new(10, edges).unwrap()
}

pub fn complete_graph(n: usize) -> SimpleGraph {
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            edges.push((u, v));
        }
    }
    SimpleGraph::new(n, edges).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn k4_is_forced_at_n4_m6() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let g = sample_min_degree3(4, 6, &mut rng).unwrap();
        assert_eq!(g.edges.len(), 6);
        assert_eq!(g.min_degree(), 3);
        assert_eq!(g.edges, complete_graph(4).edges);
    }

    #[test]
    fn high_density_route_is_gnm() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let g = sample_min_degree3(2000, 30_000, &mut rng).unwrap();
        assert_eq!(g.edges.len(), 30_000);
        assert!(g.min_degree() >= 3);
    }

    #[test]
    fn low_density_route_is_pairing() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let g = sample_min_degree3(300, 480, &mut rng).unwrap();
        assert_eq!(g.edges.len(), 480);
        assert!(g.min_degree() >= 3);
    }

    #[test]
    fn roundtrip_format() {
        let g = petersen();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("10 15\n"));
        let g2 = SimpleGraph::read_from(&mut &buf[..]).unwrap();
        assert_eq!(g.edges, g2.edges);
        // sorted output
        let mut sorted = g.edges.clone();
        sorted.sort_unstable();
        assert_eq!(g.edges, sorted);
    }

    #[test]
    fn petersen_shape() {
        let g = petersen();
        assert_eq!(g.n, 10);
        assert_eq!(g.edges.len(), 15);
        assert!(g.is_connected());
        assert!((0..10).all(|v| g.degree(v) == 3));
    }

    #[test]
    fn connectivity_and_removal() {
        let g = complete_graph(5);
        assert!(g.is_connected());
        let h = g.without_edges(&[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        assert!(!h.is_connected());
    }
}

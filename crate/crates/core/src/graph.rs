//! Simple undirected graphs in compressed adjacency form, the configuration
//! model with simplicity rejection, and breadth-first measurements.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::degrees::{DegreeSampler, DegreesError, DEFAULT_RESAMPLE_CAP};
use crate::scalar::Real;

/// Default cap on whole-matching retries in [`configuration_model`].
pub const DEFAULT_MAX_RETRIES: usize = 100_000_000;

const UNSEEN: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("degree sum {0} is odd")]
    OddDegreeSum(usize),
    #[error("vertex {vertex} has degree 0; every degree must be at least 1")]
    ZeroDegree { vertex: usize },
    #[error("no simple pairing found in {retries} attempts")]
    SimplicityUnreachable { retries: usize },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("not a simple graph: {0}")]
    NotSimple(String),
    #[error("edge list parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Degrees(#[from] DegreesError),
}

/// Immutable simple undirected graph.
///
/// Vertex ids are `0..n`; neighbor lists are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an edge list, rejecting loops and repeated edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut deg = vec![0usize; n];
        for &(u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(GraphError::NotSimple(format!("self-loop at {u}")));
            }
            deg[u] += 1;
            deg[v] += 1;
        }
        let g = Self::assemble(&deg, edges.iter().copied());
        if let Some(v) = g.first_repeat() {
            return Err(GraphError::NotSimple(format!("repeated edge at vertex {v}")));
        }
        Ok(g)
    }

    /// CSR assembly with sorted neighbor lists; no simplicity check.
    fn assemble(deg: &[usize], edges: impl Iterator<Item = (usize, usize)>) -> Self {
        let n = deg.len();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in deg {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0; offsets[n]];
        for (u, v) in edges {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }
        for v in 0..n {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Self { offsets, neighbors }
    }

    fn first_repeat(&self) -> Option<usize> {
        (0..self.n()).find(|&v| {
            self.neighbors(v).windows(2).any(|w| w[0] == w[1]) || self.neighbors(v).contains(&v)
        })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            offsets: vec![0; n + 1],
            neighbors: Vec::new(),
        }
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        Self::from_edges(n, &edges).expect("complete graph is simple")
    }

    /// Cycle on `n >= 3` vertices.
    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 vertices");
        let edges: Vec<_> = (0..n).map(|u| (u, (u + 1) % n)).collect();
        Self::from_edges(n, &edges).expect("cycle is simple")
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        Self::from_edges(n, &edges).expect("path is simple")
    }

    /// Star with center 0 and leaves `1..=leaves`.
    pub fn star(leaves: usize) -> Self {
        let edges: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
        Self::from_edges(leaves + 1, &edges).expect("star is simple")
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n()).map(|v| self.degree(v)).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Text form: `"n m"` then one sorted `"u v"` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(16 * (self.edge_count() + 1));
        let _ = writeln!(out, "{} {}", self.n(), self.edge_count());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    /// Parses [`Graph::to_edge_list`] output; rejects unsorted or non-simple input.
    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().enumerate();
        let parse_pair = |line: usize, s: &str| -> Result<(usize, usize), GraphError> {
            let mut it = s.split(' ');
            let a = it.next().and_then(|x| x.parse().ok());
            let b = it.next().and_then(|x| x.parse().ok());
            match (a, b, it.next()) {
                (Some(a), Some(b), None) => Ok((a, b)),
                _ => Err(GraphError::Parse {
                    line,
                    msg: format!("expected two integers, got {s:?}"),
                }),
            }
        };
        let (n, m) = match lines.next() {
            Some((_, l)) => parse_pair(1, l)?,
            None => {
                return Err(GraphError::Parse {
                    line: 1,
                    msg: "missing header".into(),
                })
            }
        };
        let mut edges = Vec::with_capacity(m);
        for (i, l) in lines {
            let (u, v) = parse_pair(i + 1, l)?;
            if u >= v {
                return Err(GraphError::Parse {
                    line: i + 1,
                    msg: format!("edge {u} {v} must satisfy u < v"),
                });
            }
            if let Some(&prev) = edges.last() {
                if prev >= (u, v) {
                    return Err(GraphError::Parse {
                        line: i + 1,
                        msg: "edges must be strictly increasing".into(),
                    });
                }
            }
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(GraphError::Parse {
                line: 1,
                msg: format!("header promises {m} edges, found {}", edges.len()),
            });
        }
        Self::from_edges(n, &edges)
    }

    /// Checks the structural invariants: sorted lists, simplicity, symmetry.
    pub fn check_invariants(&self) -> Result<(), GraphError> {
        for v in 0..self.n() {
            let nb = self.neighbors(v);
            if nb.windows(2).any(|w| w[0] >= w[1]) {
                return Err(GraphError::NotSimple(format!(
                    "neighbors of {v} not strictly increasing"
                )));
            }
            for &u in nb {
                if u == v {
                    return Err(GraphError::NotSimple(format!("self-loop at {v}")));
                }
                if u >= self.n() || !self.has_edge(u, v) {
                    return Err(GraphError::NotSimple(format!("asymmetric edge {v}->{u}")));
                }
            }
        }
        Ok(())
    }

    /// BFS distances from `src`; `None` for unreachable vertices.
    pub fn distances_from(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![UNSEEN; self.n()];
        self.bfs_into(src, &mut dist, &mut VecDeque::new());
        dist.into_iter()
            .map(|d| (d != UNSEEN).then_some(d as usize))
            .collect()
    }

    /// Fills `dist` with BFS distances; returns (reached, eccentricity).
    fn bfs_into(&self, src: usize, dist: &mut [u32], queue: &mut VecDeque<usize>) -> (usize, u32) {
        dist.fill(UNSEEN);
        queue.clear();
        dist[src] = 0;
        queue.push_back(src);
        let mut reached = 1;
        let mut ecc = 0;
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            ecc = du;
            for &w in self.neighbors(u) {
                if dist[w] == UNSEEN {
                    dist[w] = du + 1;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        (reached, ecc)
    }

    /// Largest BFS distance from `v` within its component.
    pub fn eccentricity(&self, v: usize) -> usize {
        let mut dist = vec![UNSEEN; self.n()];
        self.bfs_into(v, &mut dist, &mut VecDeque::new()).1 as usize
    }
}

/// Result of [`configuration_model`].
#[derive(Debug, Clone)]
pub struct ConfigurationSample {
    pub graph: Graph,
    /// Rejected pairings before the accepted one.
    pub retries: usize,
}

fn check_degrees(degrees: &[usize]) -> Result<(), GraphError> {
    if let Some(vertex) = degrees.iter().position(|&d| d == 0) {
        return Err(GraphError::ZeroDegree { vertex });
    }
    let total: usize = degrees.iter().sum();
    if total % 2 == 1 {
        return Err(GraphError::OddDegreeSum(total));
    }
    Ok(())
}

/// One uniform perfect matching by full shuffle; `None` if it is not simple.
///
/// Reference sampler: [`configuration_model`] draws from the same law with
/// early rejection.
///
/// Panics on an odd degree sum.
pub fn pair_half_edges<G: Rng + ?Sized>(degrees: &[usize], rng: &mut G) -> Option<Graph> {
    let mut stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(v, &d)| std::iter::repeat_n(v, d))
        .collect();
    assert!(stubs.len().is_multiple_of(2), "odd number of half-edges");
    stubs.shuffle(rng);
    let pairs = stubs.chunks_exact(2);
    if pairs.clone().any(|p| p[0] == p[1]) {
        return None;
    }
    let g = Graph::assemble(degrees, pairs.map(|p| (p[0], p[1])));
    g.first_repeat().is_none().then_some(g)
}

#[derive(Default)]
struct EdgeKeyHasher(u64);

impl std::hash::Hasher for EdgeKeyHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0.rotate_left(8) ^ b as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
    }

    fn write_u64(&mut self, x: u64) {
        self.0 = crate::seed::mix64(x);
    }
}

type EdgeSet = std::collections::HashSet<u64, std::hash::BuildHasherDefault<EdgeKeyHasher>>;

/// Sequential half-edge pairing with early rejection.
///
/// The live half-edges sit in `pool[next..]`, initially hubs first. The
/// half-edge at `next` is matched with a uniformly chosen live one, which is
/// swapped into `next + 1`. A uniform partner at every step makes the full
/// matching uniform whatever rule picks the next half-edge, so aborting at
/// the first loop or repeated edge and starting over samples the
/// configuration model conditioned on simplicity. Most conflicts involve the
/// largest degrees, and an aborted attempt is undone in time proportional to
/// the work it did.
#[derive(Default)]
struct SequentialPairing {
    vorder: Vec<u32>,
    /// Owner of each half-edge.
    pool: Vec<u32>,
    swaps: Vec<u32>,
    edges: EdgeSet,
}

impl SequentialPairing {
    fn load(&mut self, degrees: &[usize]) {
        degree_order(degrees, &mut self.vorder);
        self.pool.clear();
        for &v in &self.vorder {
            self.pool.extend(std::iter::repeat_n(v, degrees[v as usize]));
        }
        self.edges.reserve(self.pool.len() / 2);
    }

    /// One attempt; on success `pool` holds the matching as consecutive pairs.
    fn attempt<G: Rng + ?Sized>(&mut self, rng: &mut G) -> bool {
        let total = self.pool.len();
        self.swaps.clear();
        self.edges.clear();
        for next in (0..total).step_by(2) {
            let r = rng.random_range(next + 1..total);
            self.pool.swap(next + 1, r);
            self.swaps.push(r as u32);
            let (u, w) = (self.pool[next], self.pool[next + 1]);
            let key = (u.min(w) as u64) << 32 | u.max(w) as u64;
            if u == w || !self.edges.insert(key) {
                for (i, &r) in self.swaps.iter().enumerate().rev() {
                    self.pool.swap(2 * i + 1, r as usize);
                }
                return false;
            }
        }
        true
    }

    fn graph(&self, degrees: &[usize]) -> Graph {
        Graph::assemble(
            degrees,
            self.pool
                .chunks_exact(2)
                .map(|p| (p[0] as usize, p[1] as usize)),
        )
    }
}

/// Vertices by decreasing degree, ties by id.
fn degree_order(degrees: &[usize], out: &mut Vec<u32>) {
    const SMALL: usize = 64;
    out.clear();
    out.extend((0..degrees.len() as u32).filter(|&v| degrees[v as usize] >= SMALL));
    out.sort_unstable_by_key(|&v| (std::cmp::Reverse(degrees[v as usize]), v));
    let mut count = [0usize; SMALL];
    for &d in degrees.iter().filter(|&&d| d < SMALL) {
        count[d] += 1;
    }
    // Bucket starts, largest small degree first.
    let mut start = [0usize; SMALL];
    let mut at = out.len();
    for d in (0..SMALL).rev() {
        start[d] = at;
        at += count[d];
    }
    out.resize(degrees.len(), 0);
    for (v, &d) in degrees.iter().enumerate() {
        if d < SMALL {
            out[start[d]] = v as u32;
            start[d] += 1;
        }
    }
}

fn check_half_edges(degrees: &[usize]) -> Result<(), GraphError> {
    check_degrees(degrees)?;
    if degrees.iter().sum::<usize>() >= u32::MAX as usize {
        return Err(GraphError::NotSimple("too many half-edges".into()));
    }
    Ok(())
}

/// Configuration model on a fixed degree sequence, conditioned on
/// simplicity: uniform matchings are drawn and rejected until one is simple.
/// `retries` counts the rejections.
pub fn configuration_model<G: Rng + ?Sized>(
    degrees: &[usize],
    rng: &mut G,
    max_retries: usize,
) -> Result<ConfigurationSample, GraphError> {
    check_half_edges(degrees)?;
    let mut pairing = SequentialPairing::default();
    pairing.load(degrees);
    for retries in 0..=max_retries {
        if pairing.attempt(rng) {
            return Ok(ConfigurationSample {
                graph: pairing.graph(degrees),
                retries,
            });
        }
    }
    Err(GraphError::SimplicityUnreachable {
        retries: max_retries,
    })
}

/// A draw of `G_n` with its rejection counts.
#[derive(Debug, Clone)]
pub struct RandomGraph {
    pub graph: Graph,
    /// Rounds rejected because the matching was not simple.
    pub retries: usize,
    /// Degree sequences redrawn for an odd sum, over all rounds.
    pub parity_resamples: usize,
}

/// `G_n` with i.i.d. degrees: each round draws a fresh degree sequence
/// conditioned on an even sum and one uniform matching, and the round is
/// repeated until the matching is simple. The degrees are therefore
/// conditioned on simplicity together with the matching.
pub fn random_graph<R: Real, G: Rng + ?Sized>(
    sampler: &DegreeSampler<R>,
    n: usize,
    rng: &mut G,
    max_retries: usize,
) -> Result<RandomGraph, GraphError> {
    if n > 0 && sampler.min_degree() >= n {
        return Err(GraphError::NotSimple(format!(
            "every degree is at least {} but there are only {n} vertices",
            sampler.min_degree()
        )));
    }
    let mut pairing = SequentialPairing::default();
    let mut parity_resamples = 0;
    for retries in 0..=max_retries {
        let seq = sampler.sample_sequence(n, rng, DEFAULT_RESAMPLE_CAP)?;
        parity_resamples += seq.resamples;
        check_half_edges(&seq.degrees)?;
        pairing.load(&seq.degrees);
        if pairing.attempt(rng) {
            return Ok(RandomGraph {
                graph: pairing.graph(&seq.degrees),
                retries,
                parity_resamples,
            });
        }
    }
    Err(GraphError::SimplicityUnreachable {
        retries: max_retries,
    })
}

/// True iff BFS from vertex 0 reaches every vertex. The empty graph counts
/// as connected.
pub fn is_connected(g: &Graph) -> bool {
    if g.n() == 0 {
        return true;
    }
    let mut dist = vec![UNSEEN; g.n()];
    g.bfs_into(0, &mut dist, &mut VecDeque::new()).0 == g.n()
}

/// Exact diameter.
///
/// Uses eccentricity bounding: each BFS from `v` gives
/// `max(ecc(v) - d(v,w), d(v,w)) <= ecc(w) <= ecc(v) + d(v,w)` for every `w`,
/// and vertices whose upper bound cannot beat the best lower bound are
/// dropped. The answer equals the all-source BFS maximum.
pub fn diameter(g: &Graph) -> Result<usize, GraphError> {
    let n = g.n();
    if n == 0 {
        return Ok(0);
    }
    let mut dist = vec![UNSEEN; n];
    let mut queue = VecDeque::new();
    let mut lower = vec![0u32; n];
    let mut upper = vec![u32::MAX; n];
    let mut live: Vec<usize> = (0..n).collect();
    let mut d_low = 0u32;
    let mut d_high = u32::MAX;
    let mut pick_high = true;

    while !live.is_empty() && d_low < d_high {
        let v = if pick_high {
            *live
                .iter()
                .max_by_key(|&&w| (upper[w], g.degree(w), std::cmp::Reverse(w)))
                .unwrap()
        } else {
            *live
                .iter()
                .min_by_key(|&&w| (lower[w], std::cmp::Reverse(g.degree(w)), w))
                .unwrap()
        };
        pick_high = !pick_high;

        let (reached, ecc) = g.bfs_into(v, &mut dist, &mut queue);
        if reached != n {
            return Err(GraphError::Disconnected);
        }
        d_low = d_low.max(ecc);
        d_high = d_high.min(2 * ecc);
        let mut max_upper = 0;
        live.retain(|&w| {
            let d = dist[w];
            lower[w] = lower[w].max(d.max(ecc - d));
            upper[w] = upper[w].min(ecc + d);
            let keep = upper[w] > d_low && w != v;
            if keep {
                max_upper = max_upper.max(upper[w]);
            }
            keep
        });
        d_high = d_high.min(max_upper.max(d_low));
    }
    Ok(d_low as usize)
}

/// Exact diameter by BFS from every vertex, `O(n m)`.
pub fn diameter_all_sources(g: &Graph) -> Result<usize, GraphError> {
    let mut dist = vec![UNSEEN; g.n()];
    let mut queue = VecDeque::new();
    let mut best = 0;
    for v in 0..g.n() {
        let (reached, ecc) = g.bfs_into(v, &mut dist, &mut queue);
        if reached != g.n() {
            return Err(GraphError::Disconnected);
        }
        best = best.max(ecc as usize);
    }
    Ok(best)
}

/// Lower bound on the diameter: largest eccentricity over `sources` random
/// start vertices.
pub fn diameter_sampled<G: Rng + ?Sized>(
    g: &Graph,
    sources: usize,
    rng: &mut G,
) -> Result<usize, GraphError> {
    let n = g.n();
    if n == 0 {
        return Ok(0);
    }
    let mut dist = vec![UNSEEN; n];
    let mut queue = VecDeque::new();
    let mut best = 0;
    for _ in 0..sources.max(1) {
        let v = rng.random_range(0..n);
        let (reached, ecc) = g.bfs_into(v, &mut dist, &mut queue);
        if reached != n {
            return Err(GraphError::Disconnected);
        }
        best = best.max(ecc as usize);
    }
    Ok(best)
}

/// Breadth-first exposure of the cluster around a root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterGrowth {
    pub root: usize,
    /// Vertices at BFS distance 0, 1, 2, ...
    pub generation_sizes: Vec<usize>,
    /// Non-tree edges found between exposed vertices.
    pub collisions: usize,
    pub exposed: usize,
}

/// Exposes generations around `root` until `max_size` vertices are exposed or
/// the component is exhausted.
///
/// An edge scanned from `u` to an already-exposed `w` counts as a collision
/// once: at the first scan of either endpoint, and never for the tree edge
/// that discovered `w`.
pub fn expose_cluster(g: &Graph, root: usize, max_size: usize) -> Result<ClusterGrowth, GraphError> {
    let n = g.n();
    if root >= n {
        return Err(GraphError::VertexOutOfRange { vertex: root, n });
    }
    let mut dist = vec![UNSEEN; n];
    let mut parent = vec![usize::MAX; n];
    let mut scanned = vec![false; n];
    let mut queue = VecDeque::new();
    let mut generation_sizes = vec![1];
    let mut collisions = 0;
    let mut exposed = 1;
    dist[root] = 0;
    queue.push_back(root);
    let cap = max_size.max(1);

    'outer: while let Some(u) = queue.pop_front() {
        scanned[u] = true;
        let du = dist[u];
        for &w in g.neighbors(u) {
            if dist[w] == UNSEEN {
                if exposed >= cap {
                    break 'outer;
                }
                dist[w] = du + 1;
                parent[w] = u;
                exposed += 1;
                let gen = (du + 1) as usize;
                if generation_sizes.len() <= gen {
                    generation_sizes.push(0);
                }
                generation_sizes[gen] += 1;
                queue.push_back(w);
            } else if !scanned[w] && parent[w] != u {
                collisions += 1;
            }
        }
    }
    Ok(ClusterGrowth {
        root,
        generation_sizes,
        collisions,
        exposed,
    })
}

/// Degree threshold `n^epsilon` for stars.
pub fn star_threshold(n: usize, epsilon: f64) -> f64 {
    (n as f64).powf(epsilon)
}

/// Vertices with degree at least `n^epsilon`, ascending.
pub fn stars_above(g: &Graph, epsilon: f64) -> Vec<usize> {
    let threshold = star_threshold(g.n(), epsilon);
    (0..g.n())
        .filter(|&v| g.degree(v) as f64 >= threshold)
        .collect()
}

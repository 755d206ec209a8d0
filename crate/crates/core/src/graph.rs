//! Simple d-regular graphs and the structural queries used around them:
//! balls, excess, vertex deletion, distances and the typical-neighbourhood census.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::GraphError;
use crate::seeding::stream_rng;

pub type Vertex = usize;

/// Read access to a simple undirected graph with sorted neighbour lists.
pub trait Adjacency {
    fn order(&self) -> usize;
    fn neighbors(&self, v: Vertex) -> &[Vertex];

    fn degree(&self, v: Vertex) -> usize {
        self.neighbors(v).len()
    }

    fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }
}

/// Immutable simple d-regular graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularGraph {
    n: usize,
    d: usize,
    adj: Vec<Vec<Vertex>>,
    edges: Vec<(Vertex, Vertex)>,
}

impl RegularGraph {
    /// Builds and validates a d-regular graph from undirected edges in any order.
    pub fn from_edges<I>(n: usize, d: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (Vertex, Vertex)>,
    {
        if (n * d) % 2 != 0 {
            return Err(GraphError::Parity { n, d });
        }
        if d >= n {
            return Err(GraphError::DegreeRange { n, d, min: 0 });
        }
        let mut adj = vec![Vec::with_capacity(d); n];
        let mut list = Vec::with_capacity(n * d / 2);
        for (u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::VertexOutOfRange { v: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            adj[a].push(b);
            adj[b].push(a);
            list.push((a, b));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::RepeatedEdge(w[0].0, w[0].1));
        }
        for (v, nbrs) in adj.iter_mut().enumerate() {
            if nbrs.len() != d {
                return Err(GraphError::Degree { v, found: nbrs.len(), d });
            }
            nbrs.sort_unstable();
        }
        Ok(Self { n, d, adj, edges: list })
    }

    /// The complete graph K_n, which is (n-1)-regular.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Self::from_edges(n, n.saturating_sub(1), edges).expect("complete graph is regular")
    }

    /// The Petersen graph: outer 5-cycle, inner pentagram, five spokes.
    pub fn petersen() -> Self {
        let mut edges = Vec::with_capacity(15);
        for i in 0..5 {
            edges.push((i, (i + 1) % 5));
            edges.push((i, i + 5));
            edges.push((i + 5, (i + 2) % 5 + 5));
        }
        Self::from_edges(10, 3, edges).expect("Petersen graph is 3-regular")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Undirected edges `(u, v)` with `u < v`, sorted lexicographically.
    pub fn edges(&self) -> &[(Vertex, Vertex)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Both orientations of every edge, sorted.
    pub fn oriented_edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .flat_map(|&(u, v)| [(u, v), (v, u)])
            .collect();
        out.sort_unstable();
        out
    }

    /// Number of triangles, each counted once.
    pub fn triangle_count(&self) -> usize {
        self.edges
            .iter()
            .map(|&(u, v)| {
                self.adj[u]
                    .iter()
                    .filter(|&&w| w > v && self.has_edge(v, w))
                    .count()
            })
            .sum()
    }
}

impl Adjacency for RegularGraph {
    fn order(&self) -> usize {
        self.n
    }

    fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adj[v]
    }
}

/// General simple graph, used for minors and switched supports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<Vertex>>,
}

impl Graph {
    /// Builds a graph from edges; duplicates and self-loops are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (Vertex, Vertex)>,
    {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::VertexOutOfRange { v: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for (u, nbrs) in adj.iter_mut().enumerate() {
            nbrs.sort_unstable();
            if let Some(w) = nbrs.windows(2).find(|w| w[0] == w[1]) {
                return Err(GraphError::RepeatedEdge(u.min(w[0]), u.max(w[0])));
            }
        }
        Ok(Self { adj })
    }

    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut out = Vec::new();
        for (u, nbrs) in self.adj.iter().enumerate() {
            out.extend(nbrs.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }
}

impl Adjacency for Graph {
    fn order(&self) -> usize {
        self.adj.len()
    }

    fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adj[v]
    }
}

impl From<&RegularGraph> for Graph {
    fn from(g: &RegularGraph) -> Self {
        Self { adj: g.adj.clone() }
    }
}

/// Subgraph of a parent graph, in the parent's vertex numbering.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subgraph {
    /// Sorted vertex ids.
    pub vertices: Vec<Vertex>,
    /// Sorted edges `(u, v)`, `u < v`, both endpoints in `vertices`.
    pub edges: Vec<(Vertex, Vertex)>,
    pub root: Option<Vertex>,
}

impl Subgraph {
    /// Induced subgraph of `g` on `vertices`.
    pub fn induced<G: Adjacency>(g: &G, mut vertices: Vec<Vertex>, root: Option<Vertex>) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        let mut edges = Vec::new();
        for &u in &vertices {
            for &v in g.neighbors(u) {
                if v > u && vertices.binary_search(&v).is_ok() {
                    edges.push((u, v));
                }
            }
        }
        edges.sort_unstable();
        Self { vertices, edges, root }
    }

    /// Rooted tree of the given depth: the root has `root_children` children and every
    /// other non-leaf vertex has `branching` children. Vertices are numbered in BFS order.
    pub fn truncated_tree(root_children: usize, branching: usize, depth: usize) -> Self {
        let mut edges = Vec::new();
        let mut level = vec![0];
        let mut next_id = 1;
        for k in 0..depth {
            let kids = if k == 0 { root_children } else { branching };
            let mut next = Vec::with_capacity(level.len() * kids);
            for &p in &level {
                for _ in 0..kids {
                    edges.push((p, next_id));
                    next.push(next_id);
                    next_id += 1;
                }
            }
            level = next;
        }
        edges.sort_unstable();
        Self { vertices: (0..next_id).collect(), edges, root: Some(0) }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    /// Position of `v` in `vertices`.
    pub fn local_index(&self, v: Vertex) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    /// Degrees inside the subgraph, aligned with `vertices`.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertices.len()];
        for &(u, v) in &self.edges {
            deg[self.local_index(u).expect("edge endpoint in subgraph")] += 1;
            deg[self.local_index(v).expect("edge endpoint in subgraph")] += 1;
        }
        deg
    }

    pub fn components(&self) -> usize {
        let mut uf = UnionFind::new(self.vertices.len());
        for &(u, v) in &self.edges {
            uf.union(self.local_index(u).unwrap(), self.local_index(v).unwrap());
        }
        uf.count()
    }

    pub fn is_tree(&self) -> bool {
        !self.vertices.is_empty() && self.components() == 1 && excess(self) == 0
    }
}

/// Number of independent cycles: |E| - |V| + #components.
pub fn excess(s: &Subgraph) -> usize {
    (s.edges.len() + s.components()) - s.vertices.len()
}

struct UnionFind {
    parent: Vec<usize>,
    sets: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), sets: n }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.sets -= 1;
        }
    }

    fn count(&self) -> usize {
        self.sets
    }
}

/// Reusable breadth-first search state. Distances stay valid until the next call.
pub struct Explorer {
    dist: Vec<usize>,
    stamp: Vec<u32>,
    epoch: u32,
    order: Vec<Vertex>,
}

impl Explorer {
    pub fn new(n: usize) -> Self {
        Self { dist: vec![0; n], stamp: vec![0; n], epoch: 0, order: Vec::new() }
    }

    /// Multi-source BFS to depth `radius` (unbounded if `None`). Vertices flagged in
    /// `blocked` are treated as deleted. Returns visited vertices in BFS order.
    pub fn explore<G: Adjacency>(
        &mut self,
        g: &G,
        sources: &[Vertex],
        radius: Option<usize>,
        blocked: Option<&[bool]>,
    ) -> &[Vertex] {
        if self.dist.len() < g.order() {
            *self = Self::new(g.order());
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let is_blocked = |v: Vertex| blocked.is_some_and(|b| b[v]);
        self.order.clear();
        for &s in sources {
            if !is_blocked(s) && self.stamp[s] != self.epoch {
                self.stamp[s] = self.epoch;
                self.dist[s] = 0;
                self.order.push(s);
            }
        }
        let mut head = 0;
        while head < self.order.len() {
            let u = self.order[head];
            head += 1;
            let du = self.dist[u];
            if radius.is_some_and(|r| du >= r) {
                continue;
            }
            for &w in g.neighbors(u) {
                if self.stamp[w] != self.epoch && !is_blocked(w) {
                    self.stamp[w] = self.epoch;
                    self.dist[w] = du + 1;
                    self.order.push(w);
                }
            }
        }
        &self.order
    }

    /// Distance found by the last search, `None` if not reached.
    pub fn distance(&self, v: Vertex) -> Option<usize> {
        (self.stamp[v] == self.epoch).then(|| self.dist[v])
    }
}

/// Induced ball of radius `r` around `v`, rooted at `v`.
pub fn ball<G: Adjacency>(g: &G, v: Vertex, r: usize) -> Subgraph {
    let mut ex = Explorer::new(g.order());
    let verts = ex.explore(g, &[v], Some(r), None).to_vec();
    Subgraph::induced(g, verts, Some(v))
}

/// Induced ball of radius `r` around a vertex set, in the graph with `blocked` deleted.
pub fn ball_around<G: Adjacency>(
    g: &G,
    sources: &[Vertex],
    r: usize,
    blocked: Option<&[bool]>,
) -> Subgraph {
    let mut ex = Explorer::new(g.order());
    let verts = ex.explore(g, sources, Some(r), blocked).to_vec();
    Subgraph::induced(g, verts, None)
}

/// Graph distance; `None` encodes disconnection.
pub fn distance<G: Adjacency>(g: &G, u: Vertex, v: Vertex) -> Option<usize> {
    let mut ex = Explorer::new(g.order());
    ex.explore(g, &[u], None, None);
    ex.distance(v)
}

/// Induced graph on the complement of `removed`, relabelled to `0..n-|removed|`.
#[derive(Clone, Debug)]
pub struct Minor {
    pub graph: Graph,
    /// Parent vertex -> minor vertex.
    pub relabel: Vec<Option<Vertex>>,
    /// Minor vertex -> parent vertex.
    pub original: Vec<Vertex>,
}

pub fn remove_vertices<G: Adjacency>(g: &G, removed: &[Vertex]) -> Minor {
    let n = g.order();
    let mut gone = vec![false; n];
    for &v in removed {
        gone[v] = true;
    }
    let mut relabel = vec![None; n];
    let mut original = Vec::with_capacity(n);
    for v in (0..n).filter(|&v| !gone[v]) {
        relabel[v] = Some(original.len());
        original.push(v);
    }
    let mut edges = Vec::new();
    for (new_u, &u) in original.iter().enumerate() {
        for &w in g.neighbors(u) {
            if let Some(new_w) = relabel[w] {
                if new_w > new_u {
                    edges.push((new_u, new_w));
                }
            }
        }
    }
    let graph = Graph::from_edges(original.len(), edges).expect("minor of a simple graph is simple");
    Minor { graph, relabel, original }
}

/// Outcome of the typical-neighbourhood census on one graph.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct OmegaBarReport {
    pub radius: usize,
    pub excess_cap: usize,
    pub bad_vertex_count: usize,
    pub max_excess: usize,
    /// N^c.
    pub threshold: f64,
    pub holds: bool,
}

/// Census radius floor((c/4) log_{d-1} n), at least 1.
pub fn census_radius(n: usize, d: usize, c: f64) -> usize {
    let r = (c / 4.0) * (n as f64).ln() / ((d - 1) as f64).ln();
    (r.floor() as usize).max(1)
}

pub fn omega_bar_census(g: &RegularGraph, c: f64, excess_cap: usize) -> OmegaBarReport {
    omega_bar_census_with_radius(g, census_radius(g.n(), g.d(), c), c, excess_cap)
}

pub fn omega_bar_census_with_radius(
    g: &RegularGraph,
    radius: usize,
    c: f64,
    excess_cap: usize,
) -> OmegaBarReport {
    let mut ex = Explorer::new(g.n());
    let mut bad = 0;
    let mut max_excess = 0;
    for v in 0..g.n() {
        let verts = ex.explore(g, &[v], Some(radius), None).to_vec();
        let e = excess(&Subgraph::induced(g, verts, Some(v)));
        if e > 0 {
            bad += 1;
        }
        max_excess = max_excess.max(e);
    }
    let threshold = (g.n() as f64).powf(c);
    OmegaBarReport {
        radius,
        excess_cap,
        bad_vertex_count: bad,
        max_excess,
        threshold,
        holds: (bad as f64) <= threshold && max_excess <= excess_cap,
    }
}

/// Configuration-model sampler with whole-graph rejection of non-simple pairings.
#[derive(Clone, Copy, Debug)]
pub struct UniformSampler {
    pub max_attempts: usize,
}

impl Default for UniformSampler {
    fn default() -> Self {
        Self { max_attempts: 100_000 }
    }
}

impl UniformSampler {
    /// Samples a uniform simple d-regular graph; also returns the number of pairings tried.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        d: usize,
        rng: &mut R,
    ) -> Result<(RegularGraph, usize), GraphError> {
        check_sampling_params(n, d)?;
        let mut points: Vec<Vertex> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
        let mut adj: Vec<Vec<Vertex>> = vec![Vec::with_capacity(d); n];
        for attempt in 1..=self.max_attempts {
            points.shuffle(rng);
            adj.iter_mut().for_each(Vec::clear);
            let simple = points.chunks_exact(2).all(|pair| {
                let (u, v) = (pair[0], pair[1]);
                if u == v || adj[u].contains(&v) {
                    return false;
                }
                adj[u].push(v);
                adj[v].push(u);
                true
            });
            if simple {
                let edges = points.chunks_exact(2).map(|p| (p[0], p[1]));
                let g = RegularGraph::from_edges(n, d, edges)?;
                return Ok((g, attempt));
            }
        }
        Err(GraphError::RejectionBudget { attempts: self.max_attempts })
    }
}

fn check_sampling_params(n: usize, d: usize) -> Result<(), GraphError> {
    if (n * d) % 2 != 0 {
        return Err(GraphError::Parity { n, d });
    }
    if d < 3 || d >= n {
        return Err(GraphError::DegreeRange { n, d, min: 3 });
    }
    Ok(())
}

/// Uniform simple d-regular graph on `n` vertices from a seed.
pub fn sample_uniform(n: usize, d: usize, seed: u64) -> Result<RegularGraph, GraphError> {
    let mut rng = stream_rng(seed, 0);
    UniformSampler::default().sample(n, d, &mut rng).map(|(g, _)| g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k4_is_the_only_cubic_graph_on_four_vertices() {
        for seed in 0..20 {
            assert_eq!(sample_uniform(4, 3, seed).unwrap(), RegularGraph::complete(4));
        }
    }

    #[test]
    fn sampler_rejects_bad_parameters() {
        assert_eq!(sample_uniform(5, 3, 1), Err(GraphError::Parity { n: 5, d: 3 }));
        assert!(matches!(sample_uniform(4, 4, 1), Err(GraphError::DegreeRange { .. })));
        assert!(matches!(sample_uniform(10, 2, 1), Err(GraphError::DegreeRange { .. })));
    }

    #[test]
    fn rejection_budget_is_reported() {
        let mut rng = stream_rng(3, 0);
        let sampler = UniformSampler { max_attempts: 1 };
        // K_{n} complement-style dense case: d = n - 1 is almost never hit in one pairing
        let res = (0..50)
            .map(|_| sampler.sample(12, 11, &mut rng))
            .find(|r| r.is_err());
        assert_eq!(res, Some(Err(GraphError::RejectionBudget { attempts: 1 })));
    }

    #[test]
    fn from_edges_validates() {
        assert_eq!(
            RegularGraph::from_edges(4, 1, [(0, 0), (1, 2)]),
            Err(GraphError::SelfLoop(0))
        );
        assert_eq!(
            RegularGraph::from_edges(2, 1, [(0, 1), (1, 0)]),
            Err(GraphError::RepeatedEdge(0, 1))
        );
        assert!(matches!(
            RegularGraph::from_edges(4, 1, [(0, 1), (2, 4)]),
            Err(GraphError::VertexOutOfRange { v: 4, n: 4 })
        ));
        assert!(matches!(
            RegularGraph::from_edges(4, 1, [(0, 1), (1, 2)]),
            Err(GraphError::Degree { .. })
        ));
    }

    #[test]
    fn truncated_trees() {
        let t = Subgraph::truncated_tree(3, 2, 2);
        assert_eq!(t.num_vertices(), 1 + 3 + 6);
        assert!(t.is_tree());
        assert_eq!(t.degrees()[0], 3);
        let leaf = Subgraph::truncated_tree(2, 2, 0);
        assert_eq!(leaf.num_vertices(), 1);
        assert!(leaf.edges.is_empty());
    }

    #[test]
    fn balls() {
        let k4 = RegularGraph::complete(4);
        let b = ball(&k4, 0, 1);
        assert_eq!(b.vertices, vec![0, 1, 2, 3]);
        assert_eq!(b.edges.len(), 6);

        let p = RegularGraph::petersen();
        for v in 0..10 {
            let b = ball(&p, v, 1);
            assert_eq!(b.num_vertices(), 4);
            assert_eq!(b.edges.len(), 3);
            assert!(b.is_tree());
            let b0 = ball(&p, v, 0);
            assert_eq!(b0.vertices, vec![v]);
            assert!(b0.edges.is_empty());
        }
    }

    #[test]
    fn excess_examples() {
        let k4 = RegularGraph::complete(4);
        assert_eq!(excess(&ball(&k4, 0, 1)), 3);
        let tree = ball(&RegularGraph::petersen(), 0, 1);
        assert_eq!(excess(&tree), 0);
        let cycle = Subgraph {
            vertices: vec![0, 1, 2, 3, 4],
            edges: vec![(0, 1), (0, 4), (1, 2), (2, 3), (3, 4)],
            root: None,
        };
        assert_eq!(excess(&cycle), 1);
        // Petersen radius 2 ball is the whole graph: 15 - 10 + 1
        assert_eq!(excess(&ball(&RegularGraph::petersen(), 3, 2)), 6);
    }

    #[test]
    fn distances() {
        let k4 = RegularGraph::complete(4);
        assert_eq!(distance(&k4, 0, 2), Some(1));
        assert_eq!(distance(&k4, 1, 1), Some(0));
        let two_k4 = Graph::from_edges(
            8,
            RegularGraph::complete(4)
                .edges()
                .iter()
                .flat_map(|&(u, v)| [(u, v), (u + 4, v + 4)]),
        )
        .unwrap();
        assert_eq!(distance(&two_k4, 0, 5), None);
        assert_eq!(distance(&RegularGraph::petersen(), 0, 7), Some(2));
    }

    #[test]
    fn vertex_removal() {
        let k4 = RegularGraph::complete(4);
        let m = remove_vertices(&k4, &[]);
        assert_eq!(m.graph, Graph::from(&k4));
        let tri = remove_vertices(&k4, &[2]);
        assert_eq!(tri.graph.edges(), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(tri.original, vec![0, 1, 3]);

        let p = remove_vertices(&RegularGraph::petersen(), &[0]);
        let degs: Vec<_> = (0..9).map(|v| p.graph.degree(v)).collect();
        assert_eq!(degs.iter().filter(|&&k| k == 2).count(), 3);
        assert_eq!(degs.iter().filter(|&&k| k == 3).count(), 6);
    }

    #[test]
    fn census_on_k4() {
        let k4 = RegularGraph::complete(4);
        let r = omega_bar_census_with_radius(&k4, 1, 0.4, 1);
        assert_eq!(r.max_excess, 3);
        assert_eq!(r.bad_vertex_count, 4);
        assert!(!r.holds);
        let capped = omega_bar_census_with_radius(&k4, 1, 0.99, k4.num_edges());
        assert!(capped.max_excess <= capped.excess_cap);
    }

    #[test]
    fn census_radius_is_clamped() {
        assert_eq!(census_radius(1000, 3, 0.4), 1);
        assert_eq!(census_radius(1 << 20, 3, 0.8), 4);
    }

    #[test]
    fn triangles() {
        assert_eq!(RegularGraph::complete(4).triangle_count(), 4);
        assert_eq!(RegularGraph::petersen().triangle_count(), 0);
    }
}

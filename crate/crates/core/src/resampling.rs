//! Local resampling by simple switchings around a ball, the admissibility
//! indicators, the exchangeable-pair test, and the low-rank (Woodbury) update of
//! the Green's function under a resampling.

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{NumericError, ResamplingError};
use crate::graph::{ball, census_radius, Adjacency, Explorer, RegularGraph, Subgraph, UniformSampler, Vertex};
use crate::greens::{
    eigenvalues, tree_extension_p, Compensation, Eigensystem, GreensMatrix, TreeWeight,
};
use crate::km::SpectralPoint;
use crate::seeding::stream_rng;
use crate::stats::{mann_whitney, sign_test, RankTest, SignTest};

/// Oriented edge `(tail, head)`.
pub type Arc = (Vertex, Vertex);

/// Boundary edges `(l, a)` of the ball `T = B_ell(o)` and the partner edges
/// `(b, c)` they are switched against.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ResamplingData {
    pub center: Vertex,
    pub ell: usize,
    /// Sorted vertex set of `T`.
    pub ball: Vec<Vertex>,
    pub boundary: Vec<Arc>,
    pub partners: Vec<Arc>,
}

impl ResamplingData {
    pub fn mu(&self) -> usize {
        self.boundary.len()
    }

    /// Indicator of `T` over `0..n`.
    pub fn ball_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &v in &self.ball {
            mask[v] = true;
        }
        mask
    }
}

/// The ball `B_ell(o)` and its edge boundary, oriented inside-to-outside, sorted.
pub fn boundary_data<G: Adjacency>(g: &G, o: Vertex, ell: usize) -> Result<(Subgraph, Vec<Arc>), ResamplingError> {
    if ell == 0 {
        return Err(ResamplingError::Radius);
    }
    let t = ball(g, o, ell);
    let mut boundary = Vec::new();
    for &l in &t.vertices {
        for &a in g.neighbors(l) {
            if !t.contains(a) {
                boundary.push((l, a));
            }
        }
    }
    boundary.sort_unstable();
    Ok((t, boundary))
}

/// Oriented edges of `G` with neither endpoint in `T`, in sorted order.
pub fn outside_arcs<G: Adjacency>(g: &G, in_ball: &[bool]) -> Vec<Arc> {
    let mut arcs = Vec::new();
    for u in 0..g.order() {
        if in_ball[u] {
            continue;
        }
        for &v in g.neighbors(u) {
            if !in_ball[v] {
                arcs.push((u, v));
            }
        }
    }
    arcs
}

/// How partner edges are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PartnerSampler {
    /// Independent uniform oriented edges of `G^(T)`, repetitions allowed.
    Uniform,
    /// Uniform over the fixed sub-list of the `keep` oriented edges `(b, c)` of
    /// `G^(T)` maximizing `u(b) u(c)`, with `u` the eigenvector of the second largest
    /// eigenvalue. Deliberately not exchangeable; used as a negative control.
    Aligned { keep: usize },
}

pub fn sample_resampling_data_with<G: Adjacency, R: Rng + ?Sized>(
    g: &G,
    o: Vertex,
    ell: usize,
    sampler: PartnerSampler,
    rng: &mut R,
) -> Result<ResamplingData, ResamplingError> {
    let (t, boundary) = boundary_data(g, o, ell)?;
    let in_ball = {
        let mut m = vec![false; g.order()];
        t.vertices.iter().for_each(|&v| m[v] = true);
        m
    };
    let mut pool = outside_arcs(g, &in_ball);
    if let PartnerSampler::Aligned { keep } = sampler {
        let sys = Eigensystem::new(g, max_degree(g).max(2))
            .map_err(|_| ResamplingError::NoPartnerEdges { center: o, ell })?;
        let u = sys.vectors().col(g.order() - 2);
        pool.sort_by(|&(a, b), &(c, d)| (u[c] * u[d]).total_cmp(&(u[a] * u[b])));
        pool.truncate(keep);
    }
    if pool.is_empty() && !boundary.is_empty() {
        return Err(ResamplingError::NoPartnerEdges { center: o, ell });
    }
    let partners = (0..boundary.len())
        .map(|_| pool[rng.random_range(0..pool.len())])
        .collect();
    Ok(ResamplingData { center: o, ell, ball: t.vertices, boundary, partners })
}

fn max_degree<G: Adjacency>(g: &G) -> usize {
    (0..g.order()).map(|v| g.degree(v)).max().unwrap_or(0)
}

/// Resampling data with uniform partners drawn from the stream `(seed, 0)`.
pub fn sample_resampling_data<G: Adjacency>(
    g: &G,
    o: Vertex,
    ell: usize,
    seed: u64,
) -> Result<ResamplingData, ResamplingError> {
    sample_resampling_data_with(g, o, ell, PartnerSampler::Uniform, &mut stream_rng(seed, 0))
}

/// Per-alpha switchability flags and the admissible index set `W_S`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdmissibleSet {
    pub flags: Vec<bool>,
    pub indices: Vec<usize>,
}

impl AdmissibleSet {
    fn from_flags(flags: Vec<bool>) -> Self {
        let indices = flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect();
        Self { flags, indices }
    }
}

/// The isolation radius used by the indicators: `max(1, floor(radius / 4))`.
pub fn quarter_radius(radius: usize) -> usize {
    (radius / 4).max(1)
}

/// Default indicator radius for `(n, d)` and small constant `c`.
pub fn default_radius(n: usize, d: usize, c: f64) -> usize {
    census_radius(n, d, c)
}

fn triple(rd: &ResamplingData, alpha: usize) -> [Vertex; 3] {
    [rd.boundary[alpha].1, rd.partners[alpha].0, rd.partners[alpha].1]
}

/// Condition (1): the radius-`q` neighbourhood of `{a, b, c}` in `G^(T)`, with the
/// edge `{a, b}` added, is a tree.
fn tree_condition<G: Adjacency>(g: &G, in_ball: &[bool], tri: [Vertex; 3], q: usize, ex: &mut Explorer) -> bool {
    let [a, b, _] = tri;
    if a == b || g.has_edge(a, b) {
        return false;
    }
    let verts = ex.explore(g, &tri, Some(q), Some(in_ball)).to_vec();
    let mut sub = Subgraph::induced(g, verts, None);
    sub.edges.push((a.min(b), a.max(b)));
    sub.is_tree()
}

fn check_alpha(rd: &ResamplingData, alpha: usize) -> Result<(), ResamplingError> {
    if alpha >= rd.mu() || rd.partners.len() != rd.mu() {
        return Err(ResamplingError::AlphaOutOfRange { alpha, mu: rd.mu() });
    }
    Ok(())
}

/// The indicator `I_alpha` for indicator radius `radius`.
pub fn indicator_alpha<G: Adjacency>(
    g: &G,
    rd: &ResamplingData,
    alpha: usize,
    radius: usize,
) -> Result<bool, ResamplingError> {
    check_alpha(rd, alpha)?;
    Ok(admissible_set(g, rd, radius).flags[alpha])
}

/// All indicators at once.
pub fn admissible_set<G: Adjacency>(g: &G, rd: &ResamplingData, radius: usize) -> AdmissibleSet {
    let n = g.order();
    let q = quarter_radius(radius);
    let in_ball = rd.ball_mask(n);
    let mu = rd.mu();
    let mut owners: BTreeMap<Vertex, Vec<usize>> = BTreeMap::new();
    for alpha in 0..mu {
        for v in triple(rd, alpha) {
            owners.entry(v).or_default().push(alpha);
        }
    }
    let mut ex = Explorer::new(n);
    let flags = (0..mu)
        .map(|alpha| {
            let tri = triple(rd, alpha);
            if !tree_condition(g, &in_ball, tri, q, &mut ex) {
                return false;
            }
            let near = ex.explore(g, &tri, Some(q), Some(&in_ball));
            !near.iter().any(|v| {
                owners
                    .get(v)
                    .is_some_and(|list| list.iter().any(|&beta| beta != alpha))
            })
        })
        .collect();
    AdmissibleSet::from_flags(flags)
}

/// Mutable adjacency lists used while switching.
struct WorkGraph {
    adj: Vec<Vec<Vertex>>,
}

impl Adjacency for WorkGraph {
    fn order(&self) -> usize {
        self.adj.len()
    }

    fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adj[v]
    }
}

impl WorkGraph {
    fn remove(&mut self, u: Vertex, v: Vertex) {
        for (x, y) in [(u, v), (v, u)] {
            let pos = self.adj[x].binary_search(&y).expect("edge present");
            self.adj[x].remove(pos);
        }
    }

    fn insert(&mut self, u: Vertex, v: Vertex) {
        for (x, y) in [(u, v), (v, u)] {
            let pos = self.adj[x].binary_search(&y).expect_err("edge absent");
            self.adj[x].insert(pos, y);
        }
    }
}

/// Result of applying the resampling `T_S`.
#[derive(Clone, Debug)]
pub struct SwitchOutcome {
    pub graph: RegularGraph,
    /// Data that undoes the resampling when applied to `graph`.
    pub reverse: ResamplingData,
    /// Indicator outcome before collision handling.
    pub indicated: AdmissibleSet,
    /// The switches actually performed.
    pub applied: AdmissibleSet,
    /// Admissible switches dropped because they would break simplicity.
    pub collisions: usize,
}

/// Applies the admissible switches `{l,a},{b,c} -> {l,c},{a,b}` in ascending alpha.
pub fn apply_switch(g: &RegularGraph, rd: &ResamplingData, radius: usize) -> Result<SwitchOutcome, ResamplingError> {
    if rd.partners.len() != rd.mu() {
        return Err(ResamplingError::AlphaOutOfRange { alpha: rd.partners.len(), mu: rd.mu() });
    }
    let indicated = admissible_set(g, rd, radius);
    let mut work = WorkGraph { adj: (0..g.n()).map(|v| g.neighbors(v).to_vec()).collect() };
    let mut flags = vec![false; rd.mu()];
    let mut collisions = 0;
    let mut reverse = rd.clone();
    for &alpha in &indicated.indices {
        let (l, a) = rd.boundary[alpha];
        let (b, c) = rd.partners[alpha];
        let distinct = l != a && l != b && l != c && a != b && a != c && b != c;
        let legal = distinct
            && work.has_edge(l, a)
            && work.has_edge(b, c)
            && !work.has_edge(l, c)
            && !work.has_edge(a, b);
        if !legal {
            collisions += 1;
            continue;
        }
        work.remove(l, a);
        work.remove(b, c);
        work.insert(l, c);
        work.insert(a, b);
        flags[alpha] = true;
        reverse.boundary[alpha] = (l, c);
        reverse.partners[alpha] = (b, a);
    }
    let edges = (0..work.order()).flat_map(|u| {
        work.adj[u].iter().filter(move |&&v| v > u).map(move |&v| (u, v))
    });
    let graph = RegularGraph::from_edges(g.n(), g.d(), edges.collect::<Vec<_>>())?;
    Ok(SwitchOutcome { graph, reverse, indicated, applied: AdmissibleSet::from_flags(flags), collisions })
}

/// One signed rank-2 term `xi_alpha = (1/sqrt(d-1)) (D_lc + D_ab - D_la - D_bc)`,
/// with `D_xy = e_x e_y^T + e_y e_x^T`. Stored as its four undirected edges.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XiTerm {
    pub alpha: usize,
    /// `(u, v, sign)` with `u < v`.
    pub edges: [(Vertex, Vertex, f64); 4],
}

fn ordered(u: Vertex, v: Vertex) -> (Vertex, Vertex) {
    (u.min(v), u.max(v))
}

/// Decomposition of `H~ - H` into per-switch terms, with the matrix `F` on the support.
#[derive(Clone, Debug)]
pub struct SwitchDelta {
    pub xi_list: Vec<XiTerm>,
    /// Sorted support vertices of the switched region.
    pub support: Vec<Vertex>,
    pub weight: f64,
}

impl SwitchDelta {
    pub fn new(rd: &ResamplingData, applied: &AdmissibleSet, d: usize) -> Self {
        let mut support = Vec::new();
        let xi_list = applied
            .indices
            .iter()
            .map(|&alpha| {
                let (l, a) = rd.boundary[alpha];
                let (b, c) = rd.partners[alpha];
                support.extend([l, a, b, c]);
                let e = |u, v, s| {
                    let (x, y) = ordered(u, v);
                    (x, y, s)
                };
                XiTerm { alpha, edges: [e(l, c, 1.0), e(a, b, 1.0), e(l, a, -1.0), e(b, c, -1.0)] }
            })
            .collect();
        support.sort_unstable();
        support.dedup();
        Self { xi_list, support, weight: 1.0 / ((d - 1) as f64).sqrt() }
    }

    /// `sum_alpha xi_alpha` as a sparse upper-triangular map.
    pub fn sum(&self) -> BTreeMap<(Vertex, Vertex), f64> {
        let mut acc = BTreeMap::new();
        for term in &self.xi_list {
            for &(u, v, s) in &term.edges {
                *acc.entry((u, v)).or_insert(0.0) += s * self.weight;
            }
        }
        acc.retain(|_, x| *x != 0.0);
        acc
    }

    /// Whether `sum_alpha xi_alpha` equals `H~ - H` entry for entry.
    pub fn sums_to_difference<G: Adjacency, T: Adjacency>(&self, g: &G, g_tilde: &T) -> bool {
        let mut diff = BTreeMap::new();
        for u in 0..g.order() {
            for &v in g.neighbors(u) {
                if v > u && !g_tilde.has_edge(u, v) {
                    diff.insert((u, v), -self.weight);
                }
            }
            for &v in g_tilde.neighbors(u) {
                if v > u && !g.has_edge(u, v) {
                    diff.insert((u, v), self.weight);
                }
            }
        }
        diff == self.sum()
    }

    /// `sum_alpha xi_alpha` as a dense matrix indexed by `index` (parent vertex -> row).
    fn dense(&self, index: &BTreeMap<Vertex, usize>) -> Mat<Complex64> {
        let k = index.len();
        let mut m = Mat::from_fn(k, k, |_, _| Complex64::new(0.0, 0.0));
        for ((u, v), x) in self.sum() {
            let (p, q) = (index[&u], index[&v]);
            m[(p, q)] += x;
            m[(q, p)] += x;
        }
        m
    }
}

/// The support graph `B_{ell+1}(o)` plus every partner edge, before and after switching.
pub fn woodbury_supports<G: Adjacency>(g: &G, rd: &ResamplingData, applied: &AdmissibleSet) -> (Subgraph, Subgraph) {
    let outer = ball(g, rd.center, rd.ell + 1);
    let mut vertices = outer.vertices.clone();
    let mut edges = outer.edges.clone();
    for &(b, c) in &rd.partners {
        vertices.extend([b, c]);
        edges.push(ordered(b, c));
    }
    vertices.sort_unstable();
    vertices.dedup();
    edges.sort_unstable();
    edges.dedup();
    let before = Subgraph { vertices: vertices.clone(), edges: edges.clone(), root: Some(rd.center) };
    let mut after_edges = edges;
    for &alpha in &applied.indices {
        let (l, a) = rd.boundary[alpha];
        let (b, c) = rd.partners[alpha];
        after_edges.retain(|&e| e != ordered(l, a) && e != ordered(b, c));
        after_edges.extend([ordered(l, c), ordered(a, b)]);
    }
    after_edges.sort_unstable();
    after_edges.dedup();
    let after = Subgraph { vertices, edges: after_edges, root: Some(rd.center) };
    (before, after)
}

/// Truncated Woodbury series for `G~ - G` with per-order errors against a reference.
#[derive(Clone, Debug)]
pub struct WoodburyExpansion {
    pub support_size: usize,
    /// `sum_{k <= k_max} G F ((G|_F - P) F)^k G`.
    pub delta: Mat<Complex64>,
    /// Entrywise max error of the partial sum through order `k`, `k = 0..=k_max`.
    pub errors: Vec<f64>,
    /// Entrywise max of the reference difference.
    pub reference_scale: f64,
}

impl WoodburyExpansion {
    /// `errors[k+1] / errors[k]`.
    pub fn decay_ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[1] / w[0]).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }
}

/// Woodbury expansion of `G~ - G` around the tree extensions of the support, with
/// boundary weight `m_sc`. `reference` is the directly computed difference.
pub fn woodbury_delta<G: Adjacency>(
    gm: &GreensMatrix,
    g: &G,
    rd: &ResamplingData,
    applied: &AdmissibleSet,
    d: usize,
    k_max: usize,
    reference: &Mat<Complex64>,
) -> Result<WoodburyExpansion, NumericError> {
    let n = gm.n();
    let z = gm.z();
    let (before, after) = woodbury_supports(g, rd, applied);
    let w = TreeWeight::semicircle(z);
    let p = tree_extension_p(&before, d, z, w, Compensation::Full)?;
    let p_tilde = tree_extension_p(&after, d, z, w, Compensation::Full)?;
    let verts = before.vertices.clone();
    let index: BTreeMap<Vertex, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let xi = SwitchDelta::new(rd, applied, d).dense(&index);
    let f = (&xi * p_tilde.matrix() * &xi) - &xi;
    let k = verts.len();
    let g_block = Mat::from_fn(k, k, |i, j| gm.get(verts[i], verts[j]));
    let contraction = (&g_block - p.matrix()) * &f;
    let g_cols = Mat::from_fn(n, k, |i, j| gm.get(i, verts[j]));
    let reference_scale = reference.norm_max();
    let mut inner = f.clone();
    let mut term = f;
    let mut errors = Vec::with_capacity(k_max + 1);
    let mut delta = Mat::zeros(n, n);
    for order in 0..=k_max {
        if order > 0 {
            term = &term * &contraction;
            inner += &term;
        }
        delta = &g_cols * &inner * g_cols.transpose();
        errors.push((&delta - reference).norm_max());
    }
    Ok(WoodburyExpansion { support_size: k, delta, errors, reference_scale })
}

/// `G~ - G` from two independent eigendecompositions.
pub fn direct_delta<G: Adjacency, T: Adjacency>(
    g: &G,
    g_tilde: &T,
    d: usize,
    z: SpectralPoint,
) -> Result<(GreensMatrix, GreensMatrix, Mat<Complex64>), NumericError> {
    let gm = Eigensystem::new(g, d)?.greens(z);
    let gt = Eigensystem::new(g_tilde, d)?.greens(z);
    let diff = gt.entries() - gm.entries();
    Ok((gm, gt, diff))
}

/// Entrywise max of `|(G~ - G) + G~ (H~ - H) G|`.
pub fn resolvent_identity_residual(
    gm: &GreensMatrix,
    gt: &GreensMatrix,
    delta: &SwitchDelta,
    diff: &Mat<Complex64>,
) -> f64 {
    let n = gm.n();
    let verts = &delta.support;
    if verts.is_empty() {
        return diff.norm_max();
    }
    let index: BTreeMap<Vertex, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let xi = delta.dense(&index);
    let k = verts.len();
    let left = Mat::from_fn(n, k, |i, j| gt.get(i, verts[j]));
    let right = Mat::from_fn(k, n, |i, j| gm.get(verts[i], j));
    let product = &left * &xi * &right;
    (diff + &product).norm_max()
}

/// Graph functional used by the exchangeability test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Statistic {
    /// Second largest eigenvalue of `H`.
    Lambda2,
    TriangleCount,
    /// `Im m(i)`.
    StieltjesAtI,
    Constant,
}

impl Statistic {
    pub fn evaluate(&self, g: &RegularGraph) -> Result<f64, NumericError> {
        match self {
            Statistic::Lambda2 => {
                let ev = eigenvalues(g, g.d())?;
                Ok(ev[ev.len() - 2])
            }
            Statistic::TriangleCount => Ok(g.triangle_count() as f64),
            Statistic::StieltjesAtI => {
                let ev = eigenvalues(g, g.d())?;
                Ok(crate::greens::stieltjes_of(&ev, SpectralPoint::new(0.0, 1.0)?).im)
            }
            Statistic::Constant => Ok(0.0),
        }
    }
}

impl std::str::FromStr for Statistic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lambda2" => Ok(Self::Lambda2),
            "triangles" => Ok(Self::TriangleCount),
            "m_i" => Ok(Self::StieltjesAtI),
            "constant" => Ok(Self::Constant),
            other => Err(format!("unknown statistic {other:?} (lambda2, triangles, m_i, constant)")),
        }
    }
}

/// Configuration of a batch of resampling trials.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrialConfig {
    pub n: usize,
    pub d: usize,
    pub ell: usize,
    /// Indicator radius; the isolation distance is `max(1, radius/4)`.
    pub radius: usize,
    pub sampler: PartnerSampler,
}

/// One sampled pair `(G, T_S G)`.
#[derive(Clone, Debug)]
pub struct Trial {
    pub graph: RegularGraph,
    pub data: ResamplingData,
    pub outcome: SwitchOutcome,
}

/// Samples `G`, a uniform center, the resampling data and applies `T_S`. Trial `t`
/// draws from stream `(seed, t)`.
pub fn run_trial(cfg: &TrialConfig, seed: u64, t: u64) -> Result<Trial, ResamplingError> {
    let mut rng = stream_rng(seed, t);
    let (graph, _) = UniformSampler::default().sample(cfg.n, cfg.d, &mut rng)?;
    let o = rng.random_range(0..cfg.n);
    let data = sample_resampling_data_with(&graph, o, cfg.ell, cfg.sampler, &mut rng)?;
    let outcome = apply_switch(&graph, &data, cfg.radius)?;
    Ok(Trial { graph, data, outcome })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExchangeabilityReport {
    pub statistic: Statistic,
    pub trials: usize,
    /// Trials in which at least one switch was performed.
    pub switched_trials: usize,
    pub mean_mu: f64,
    pub admissible_rate: f64,
    pub collisions: usize,
    pub sign: SignTest,
    pub rank: RankTest,
}

/// Tests whether `(G, T_S G)` is exchangeable by comparing `f(G)` with `f(T_S G)`.
pub fn exchangeability_test(
    statistic: Statistic,
    cfg: &TrialConfig,
    trials: usize,
    seed: u64,
) -> Result<ExchangeabilityReport, NumericError> {
    let rows: Vec<Result<(f64, f64, usize, usize, usize, bool), NumericError>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let trial = run_trial(cfg, seed, t).map_err(|e| NumericError::Domain(e.to_string()))?;
            let before = statistic.evaluate(&trial.graph)?;
            let after = statistic.evaluate(&trial.outcome.graph)?;
            Ok((
                before,
                after,
                trial.data.mu(),
                trial.outcome.applied.indices.len(),
                trial.outcome.collisions,
                !trial.outcome.applied.indices.is_empty(),
            ))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let before: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let after: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let diffs: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    let total_mu: usize = rows.iter().map(|r| r.2).sum();
    let total_applied: usize = rows.iter().map(|r| r.3).sum();
    Ok(ExchangeabilityReport {
        statistic,
        trials,
        switched_trials: rows.iter().filter(|r| r.5).count(),
        mean_mu: total_mu as f64 / trials.max(1) as f64,
        admissible_rate: if total_mu == 0 { 0.0 } else { total_applied as f64 / total_mu as f64 },
        collisions: rows.iter().map(|r| r.4).sum(),
        sign: sign_test(&diffs),
        rank: mann_whitney(&before, &after),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sample_uniform;
    use proptest::prelude::*;

    fn uniform_cfg(n: usize) -> TrialConfig {
        TrialConfig { n, d: 3, ell: 1, radius: 4, sampler: PartnerSampler::Uniform }
    }

    #[test]
    fn boundary_of_tree_neighbourhood() {
        let g = sample_uniform(2000, 3, 3).unwrap();
        let o = (0..g.n()).find(|&v| ball(&g, v, 2).is_tree()).unwrap();
        let (t, boundary) = boundary_data(&g, o, 1).unwrap();
        assert_eq!(t.num_vertices(), 4);
        assert_eq!(boundary.len(), 6);
        assert!(boundary.iter().all(|&(l, a)| t.contains(l) && !t.contains(a)));
        assert!(boundary.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn k4_ball_swallows_graph() {
        let k4 = RegularGraph::complete(4);
        let (t, boundary) = boundary_data(&k4, 0, 1).unwrap();
        assert_eq!(t.num_vertices(), 4);
        assert!(boundary.is_empty());
        let rd = sample_resampling_data(&k4, 0, 1, 1).unwrap();
        assert_eq!(rd.mu(), 0);
        let out = apply_switch(&k4, &rd, 4).unwrap();
        assert_eq!(out.graph, k4);
        assert!(matches!(boundary_data(&k4, 0, 0), Err(ResamplingError::Radius)));
    }

    #[test]
    fn partners_avoid_the_ball() {
        let g = sample_uniform(300, 3, 8).unwrap();
        let rd = sample_resampling_data(&g, 5, 2, 9).unwrap();
        assert_eq!(rd.partners.len(), rd.mu());
        for &(b, c) in &rd.partners {
            assert!(g.has_edge(b, c));
            assert!(rd.ball.binary_search(&b).is_err() && rd.ball.binary_search(&c).is_err());
        }
    }

    #[test]
    fn adjacent_partners_are_not_admissible() {
        let g = sample_uniform(500, 3, 2).unwrap();
        let mut rd = sample_resampling_data(&g, 0, 1, 4).unwrap();
        // Force partner 1 to share a vertex neighbourhood with partner 0.
        let (b0, _) = rd.partners[0];
        let nb = g.neighbors(b0).iter().copied().find(|&x| rd.ball.binary_search(&x).is_err()).unwrap();
        let next = g.neighbors(nb).iter().copied().find(|&x| x != b0 && rd.ball.binary_search(&x).is_err());
        if let Some(c1) = next {
            rd.partners[1] = (nb, c1);
            assert!(!indicator_alpha(&g, &rd, 0, 8).unwrap());
            assert!(!indicator_alpha(&g, &rd, 1, 8).unwrap());
        }
        assert!(matches!(
            indicator_alpha(&g, &rd, rd.mu(), 8),
            Err(ResamplingError::AlphaOutOfRange { .. })
        ));
    }

    #[test]
    fn short_cycle_near_partner_blocks_alpha() {
        // Prism graph: the partner edge 4-5 sits on the triangle 3-4-5.
        let prism = RegularGraph::from_edges(6, 3, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)]).unwrap();
        let rd = ResamplingData {
            center: 0,
            ell: 1,
            ball: vec![0],
            boundary: vec![(0, 3)],
            partners: vec![(4, 5)],
        };
        assert!(!indicator_alpha(&prism, &rd, 0, 4).unwrap());
    }

    #[test]
    fn switching_preserves_regularity_and_reverses() {
        let cfg = uniform_cfg(500);
        let mut recovered = 0;
        for t in 0..40 {
            let trial = run_trial(&cfg, 77, t).unwrap();
            let out = &trial.outcome;
            let delta = SwitchDelta::new(&trial.data, &out.applied, 3);
            assert!(delta.sums_to_difference(&trial.graph, &out.graph));
            let back = apply_switch(&out.graph, &out.reverse, cfg.radius).unwrap();
            if back.graph == trial.graph {
                recovered += 1;
            }
        }
        assert!(recovered >= 36, "recovered {recovered}/40");
    }

    #[test]
    fn woodbury_series_converges() {
        let cfg = uniform_cfg(200);
        let trial = run_trial(&cfg, 5, 0).unwrap();
        let z = SpectralPoint::new(0.3, 1.0).unwrap();
        let (gm, gt, diff) = direct_delta(&trial.graph, &trial.outcome.graph, 3, z).unwrap();
        let delta = SwitchDelta::new(&trial.data, &trial.outcome.applied, 3);
        assert!(resolvent_identity_residual(&gm, &gt, &delta, &diff) < 1e-9);
        let w = woodbury_delta(&gm, &trial.graph, &trial.data, &trial.outcome.applied, 3, 6, &diff).unwrap();
        assert!(w.errors[6] < w.errors[0]);
        assert!(w.errors[6] < 1e-3 * w.reference_scale.max(1e-12) || w.errors[6] < 1e-10);
    }

    #[test]
    fn empty_switch_gives_zero_difference() {
        let g = sample_uniform(60, 3, 3).unwrap();
        let z = SpectralPoint::new(0.0, 1.0).unwrap();
        let (_, _, diff) = direct_delta(&g, &g, 3, z).unwrap();
        assert_eq!(diff.norm_max(), 0.0);
    }

    #[test]
    fn constant_statistic_is_trivially_symmetric() {
        let report = exchangeability_test(Statistic::Constant, &uniform_cfg(60), 20, 1).unwrap();
        assert_eq!(report.sign.p_value, 1.0);
        assert_eq!(report.trials, 20);
    }

    #[test]
    fn statistic_names_parse() {
        assert_eq!("lambda2".parse::<Statistic>().unwrap(), Statistic::Lambda2);
        assert!("nope".parse::<Statistic>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn switched_graphs_stay_regular(seed in any::<u64>(), ell in 1usize..3) {
            let cfg = TrialConfig { n: 120, d: 3, ell, radius: 4, sampler: PartnerSampler::Uniform };
            let trial = run_trial(&cfg, seed, 0).unwrap();
            let g = &trial.outcome.graph;
            prop_assert_eq!(g.num_edges(), trial.graph.num_edges());
            prop_assert!(trial.outcome.applied.indices.iter().all(|&a| trial.outcome.indicated.flags[a]));
            let delta = SwitchDelta::new(&trial.data, &trial.outcome.applied, 3);
            prop_assert!(delta.sums_to_difference(&trial.graph, g));
        }
    }
}

//! Green's functions of the normalized adjacency matrix `H = A/sqrt(d-1)`: dense and
//! lazy resolvents, Schur-complement minors, `Q(z;G)`, tree extensions and the scalar
//! tree recursions `X_l`, `Y_l`.

use faer::{Mat, Side};
use faer::linalg::solvers::DenseSolveCore;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::NumericError;
use crate::graph::{Adjacency, Subgraph, Vertex};
use crate::km::{m_d, m_sc, SpectralPoint};

/// Dense `A/sqrt(d-1)` for a graph whose degrees are at most `d`.
pub fn normalized_adjacency<G: Adjacency>(g: &G, d: usize) -> Mat<f64> {
    let n = g.order();
    let w = 1.0 / ((d - 1) as f64).sqrt();
    let mut h = Mat::zeros(n, n);
    for u in 0..n {
        for &v in g.neighbors(u) {
            h[(u, v)] = w;
        }
    }
    h
}

/// Eigenvalues of `H` in ascending order.
pub fn eigenvalues<G: Adjacency>(g: &G, d: usize) -> Result<Vec<f64>, NumericError> {
    normalized_adjacency(g, d)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| NumericError::Eigen(format!("{e:?}")))
}

/// Full eigendecomposition of `H`, reused for every spectral parameter.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    values: Vec<f64>,
    /// Row-major `U`: `rows[i * n + k]` is component `i` of eigenvector `k`.
    rows: Vec<f64>,
    vectors: Mat<f64>,
}

impl Eigensystem {
    pub fn new<G: Adjacency>(g: &G, d: usize) -> Result<Self, NumericError> {
        let h = normalized_adjacency(g, d);
        let eig = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| NumericError::Eigen(format!("{e:?}")))?;
        let n = h.nrows();
        let s = eig.S().column_vector();
        let values: Vec<f64> = (0..n).map(|k| s[k]).collect();
        if values.iter().any(|x| !x.is_finite()) {
            return Err(NumericError::Eigen("non-finite eigenvalue".into()));
        }
        let vectors = eig.U().to_owned();
        let mut rows = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                rows[i * n + k] = vectors[(i, k)];
            }
        }
        Ok(Self { values, rows, vectors })
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }

    /// Eigenvalues in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &Mat<f64> {
        &self.vectors
    }

    /// `m(z) = (1/N) sum_k 1/(lambda_k - z)`.
    pub fn stieltjes(&self, z: SpectralPoint) -> Complex64 {
        stieltjes_of(&self.values, z)
    }

    /// Entry-on-demand view of `G(z)`, O(N) per entry.
    pub fn resolvent(&self, z: SpectralPoint) -> Resolvent<'_> {
        let weights = self.values.iter().map(|&l| 1.0 / (l - z.z())).collect();
        Resolvent { sys: self, z, weights, m: self.stieltjes(z) }
    }

    /// Dense `G(z) = U diag(1/(lambda - z)) U^T`.
    pub fn greens(&self, z: SpectralPoint) -> GreensMatrix {
        let n = self.order();
        let w: Vec<Complex64> = self.values.iter().map(|&l| 1.0 / (l - z.z())).collect();
        let u = &self.vectors;
        let scaled_re = Mat::from_fn(n, n, |i, k| u[(i, k)] * w[k].re);
        let scaled_im = Mat::from_fn(n, n, |i, k| u[(i, k)] * w[k].im);
        let re = &scaled_re * u.transpose();
        let im = &scaled_im * u.transpose();
        let entries = Mat::from_fn(n, n, |i, j| Complex64::new(re[(i, j)], im[(i, j)]));
        GreensMatrix { z, entries, m: self.stieltjes(z) }
    }
}

/// `(1/N) sum_k 1/(lambda_k - z)` for an arbitrary list of eigenvalues.
pub fn stieltjes_of(values: &[f64], z: SpectralPoint) -> Complex64 {
    let sum: Complex64 = values.iter().map(|&l| 1.0 / (l - z.z())).sum();
    sum / values.len() as f64
}

/// Read access to Green's function entries at a fixed spectral parameter.
pub trait GreensEntries {
    fn order(&self) -> usize;
    fn point(&self) -> SpectralPoint;
    fn entry(&self, i: Vertex, j: Vertex) -> Complex64;
    /// Normalized trace `m(z)`.
    fn stieltjes(&self) -> Complex64;
}

/// Lazily evaluated `G(z)` backed by an [`Eigensystem`].
pub struct Resolvent<'a> {
    sys: &'a Eigensystem,
    z: SpectralPoint,
    weights: Vec<Complex64>,
    m: Complex64,
}

impl GreensEntries for Resolvent<'_> {
    fn order(&self) -> usize {
        self.sys.order()
    }

    fn point(&self) -> SpectralPoint {
        self.z
    }

    fn entry(&self, i: Vertex, j: Vertex) -> Complex64 {
        let n = self.sys.order();
        let ri = &self.sys.rows[i * n..(i + 1) * n];
        let rj = &self.sys.rows[j * n..(j + 1) * n];
        ri.iter()
            .zip(rj)
            .zip(&self.weights)
            .map(|((&a, &b), &w)| w * (a * b))
            .sum()
    }

    fn stieltjes(&self) -> Complex64 {
        self.m
    }
}

/// Dense complex symmetric `G(z) = (H - z)^{-1}` with its normalized trace.
#[derive(Clone, Debug)]
pub struct GreensMatrix {
    z: SpectralPoint,
    entries: Mat<Complex64>,
    m: Complex64,
}

impl GreensMatrix {
    /// `G(z)` by LU inversion of `H - z`, independent of any eigensolve. Works for
    /// graphs with degrees below `d` (minors, supports).
    pub fn direct<G: Adjacency>(g: &G, d: usize, z: SpectralPoint) -> Result<Self, NumericError> {
        let h = normalized_adjacency(g, d);
        let n = h.nrows();
        let zc = z.z();
        let a = Mat::from_fn(n, n, |i, j| {
            let diag = if i == j { zc } else { Complex64::new(0.0, 0.0) };
            Complex64::new(h[(i, j)], 0.0) - diag
        });
        let entries = invert(&a, "resolvent")?;
        let m = (0..n).map(|i| entries[(i, i)]).sum::<Complex64>() / n as f64;
        Ok(Self { z, entries, m })
    }

    pub fn z(&self) -> SpectralPoint {
        self.z
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn m(&self) -> Complex64 {
        self.m
    }

    pub fn get(&self, i: Vertex, j: Vertex) -> Complex64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &Mat<Complex64> {
        &self.entries
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.n()).map(|i| self.entries[(i, i)]).collect()
    }

    /// Entrywise max of `|(H - z) G - I|`.
    pub fn defining_residual<G: Adjacency>(&self, g: &G, d: usize) -> f64 {
        let n = self.n();
        let w = 1.0 / ((d - 1) as f64).sqrt();
        let zc = self.z.z();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = -zc * self.entries[(i, j)];
                for &k in g.neighbors(i) {
                    acc += w * self.entries[(k, j)];
                }
                if i == j {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// Entrywise max of `|G - G^T|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).norm());
            }
        }
        worst
    }
}

impl GreensEntries for GreensMatrix {
    fn order(&self) -> usize {
        self.n()
    }

    fn point(&self) -> SpectralPoint {
        self.z
    }

    fn entry(&self, i: Vertex, j: Vertex) -> Complex64 {
        self.entries[(i, j)]
    }

    fn stieltjes(&self) -> Complex64 {
        self.m
    }
}

/// Inverse of a small dense complex matrix; fails when the result does not
/// reproduce the identity.
pub(crate) fn invert(a: &Mat<Complex64>, what: &'static str) -> Result<Mat<Complex64>, NumericError> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let inv = a.partial_piv_lu().inverse();
    if inv.col_iter().any(|c| c.iter().any(|x| !x.re.is_finite() || !x.im.is_finite())) {
        return Err(NumericError::Singular(what));
    }
    let check = a * &inv;
    let scale = inv.norm_max().max(1.0);
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            if (check[(i, j)] - target).norm() > 1e-8 * scale {
                return Err(NumericError::Singular(what));
            }
        }
    }
    Ok(inv)
}

/// Deviations from the Ward identity `sum_j |G_ij|^2 = Im G_ii / eta`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WardReport {
    /// `max_i |(1/N) sum_j |G_ij|^2 - Im G_ii/(N eta)|`.
    pub max_row: f64,
    /// `|(1/N^2) sum_ij |G_ij|^2 - Im m/(N eta)|`.
    pub aggregate: f64,
}

impl WardReport {
    pub fn max(&self) -> f64 {
        self.max_row.max(self.aggregate)
    }
}

pub fn ward_check(gm: &GreensMatrix) -> WardReport {
    let n = gm.n();
    let nf = n as f64;
    let eta = gm.z.eta();
    let mut max_row: f64 = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| gm.entries[(i, j)].norm_sqr()).sum();
        total += row;
        let dev = (row / nf - gm.entries[(i, i)].im / (nf * eta)).abs();
        max_row = max_row.max(dev);
    }
    let aggregate = (total / (nf * nf) - gm.m.im / (nf * eta)).abs();
    WardReport { max_row, aggregate }
}

/// Green's function of the graph with the vertices `removed` deleted, in the parent's
/// labels.
#[derive(Clone, Debug)]
pub struct MinorGreens {
    removed: Vec<Vertex>,
    kept: Vec<Vertex>,
    /// Position in `kept` for each parent vertex.
    index: Vec<Option<usize>>,
    entries: Mat<Complex64>,
}

impl MinorGreens {
    pub fn removed(&self) -> &[Vertex] {
        &self.removed
    }

    pub fn kept(&self) -> &[Vertex] {
        &self.kept
    }

    /// `G^{(s)}_{xy}`, or `None` when `x` or `y` was removed.
    pub fn get(&self, x: Vertex, y: Vertex) -> Option<Complex64> {
        Some(self.entries[(self.index[x]?, self.index[y]?)])
    }
}

/// Largest vertex set accepted by [`schur_minor`].
pub const MAX_MINOR_SET: usize = 16;

/// `G^{(s)}_{xy} = G_xy - G_{x,s} (G|_s)^{-1} G_{s,y}` for all `x, y` outside `s`.
pub fn schur_minor<E: GreensEntries>(gm: &E, s: &[Vertex]) -> Result<MinorGreens, NumericError> {
    let n = gm.order();
    let mut removed = s.to_vec();
    removed.sort_unstable();
    removed.dedup();
    if removed.len() > MAX_MINOR_SET {
        return Err(NumericError::Domain(format!(
            "minor set of size {} exceeds {MAX_MINOR_SET}",
            removed.len()
        )));
    }
    if let Some(&v) = removed.iter().find(|&&v| v >= n) {
        return Err(NumericError::Domain(format!("vertex {v} out of range for n={n}")));
    }
    let k = removed.len();
    let block = Mat::from_fn(k, k, |a, b| gm.entry(removed[a], removed[b]));
    let block_inv = invert(&block, "minor block")?;
    let kept: Vec<Vertex> = (0..n).filter(|v| removed.binary_search(v).is_err()).collect();
    let mut index = vec![None; n];
    for (p, &v) in kept.iter().enumerate() {
        index[v] = Some(p);
    }
    let m = kept.len();
    let cross = Mat::from_fn(m, k, |x, a| gm.entry(kept[x], removed[a]));
    let left = &cross * &block_inv;
    let correction = &left * cross.transpose();
    let entries = Mat::from_fn(m, m, |x, y| gm.entry(kept[x], kept[y]) - correction[(x, y)]);
    Ok(MinorGreens { removed, kept, index, entries })
}

/// `G^{(u)}_{vv} = G_vv - G_uv^2 / G_uu`.
pub fn single_vertex_minor_diag<E: GreensEntries>(gm: &E, u: Vertex, v: Vertex) -> Complex64 {
    let guv = gm.entry(u, v);
    gm.entry(v, v) - guv * guv / gm.entry(u, u)
}

/// `Q(z;G) = (1/(N d)) sum over ordered adjacent pairs (i, j) of G^{(i)}_{jj}`.
pub fn q_of<E: GreensEntries, G: Adjacency>(gm: &E, g: &G) -> Complex64 {
    let n = g.order();
    let diag: Vec<Complex64> = (0..n).map(|i| gm.entry(i, i)).collect();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut pairs = 0usize;
    for i in 0..n {
        for &j in g.neighbors(i) {
            if j > i {
                let gij = gm.entry(i, j);
                let g2 = gij * gij;
                sum += diag[j] - g2 / diag[i];
                sum += diag[i] - g2 / diag[j];
                pairs += 2;
            }
        }
    }
    if pairs == 0 {
        return Complex64::new(0.0, 0.0);
    }
    sum / pairs as f64
}

/// Boundary weight `Delta(z)` used by tree extensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TreeWeight {
    delta: Complex64,
}

impl TreeWeight {
    pub fn new(delta: Complex64) -> Result<Self, NumericError> {
        if !delta.re.is_finite() || !delta.im.is_finite() {
            return Err(NumericError::Domain(format!("tree weight {delta} is not finite")));
        }
        Ok(Self { delta })
    }

    /// The semicircle weight `Delta = m_sc(z)`.
    pub fn semicircle(z: SpectralPoint) -> Self {
        Self { delta: m_sc(z) }
    }

    pub fn delta(&self) -> Complex64 {
        self.delta
    }
}

/// Which degree deficits receive the `Delta/(d-1)` compensation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Compensation {
    /// Every vertex of degree below `d`.
    Full,
    /// As `Full`, except the root's deficit is counted against `d-1`: its one missing
    /// direction is not a truncation artifact. This is the operator whose root entry
    /// on the (d-1)-ary tree is `Y_l`.
    BoundaryOnly,
}

/// `P = (-z + H(T) - (Delta/(d-1))(d I - D(T)))^{-1}`, indexed by `t.vertices`.
#[derive(Clone, Debug)]
pub struct TreeExtension {
    vertices: Vec<Vertex>,
    matrix: Mat<Complex64>,
}

impl TreeExtension {
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn matrix(&self) -> &Mat<Complex64> {
        &self.matrix
    }

    /// Entry by parent labels.
    pub fn get(&self, u: Vertex, v: Vertex) -> Option<Complex64> {
        let a = self.vertices.binary_search(&u).ok()?;
        let b = self.vertices.binary_search(&v).ok()?;
        Some(self.matrix[(a, b)])
    }
}

/// The operator inverted by [`tree_extension_p`].
pub fn tree_extension_operator(
    t: &Subgraph,
    d: usize,
    z: SpectralPoint,
    w: TreeWeight,
    mode: Compensation,
) -> Result<Mat<Complex64>, NumericError> {
    let k = t.num_vertices();
    let deg = t.degrees();
    if let Some(p) = deg.iter().position(|&x| x > d) {
        return Err(NumericError::Domain(format!(
            "vertex {} has degree {} > d={d} in the tree extension",
            t.vertices[p], deg[p]
        )));
    }
    let h = 1.0 / ((d - 1) as f64).sqrt();
    let comp = w.delta / (d - 1) as f64;
    let mut a = Mat::from_fn(k, k, |_, _| Complex64::new(0.0, 0.0));
    for (p, &v) in t.vertices.iter().enumerate() {
        let target = match mode {
            Compensation::BoundaryOnly if t.root == Some(v) => d - 1,
            _ => d,
        };
        let deficit = target.saturating_sub(deg[p]) as f64;
        a[(p, p)] = -z.z() - comp * deficit;
    }
    for &(u, v) in &t.edges {
        let (p, q) = (t.local_index(u).unwrap(), t.local_index(v).unwrap());
        a[(p, q)] = Complex64::new(h, 0.0);
        a[(q, p)] = Complex64::new(h, 0.0);
    }
    Ok(a)
}

pub fn tree_extension_p(
    t: &Subgraph,
    d: usize,
    z: SpectralPoint,
    w: TreeWeight,
    mode: Compensation,
) -> Result<TreeExtension, NumericError> {
    let a = tree_extension_operator(t, d, z, w, mode)?;
    Ok(TreeExtension { vertices: t.vertices.clone(), matrix: invert(&a, "tree extension")? })
}

/// `phi(w) = 1/(-z - w)`.
pub fn phi(z: SpectralPoint, w: Complex64) -> Complex64 {
    1.0 / (-z.z() - w)
}

fn phi_iter(delta: Complex64, z: SpectralPoint, k: usize) -> Complex64 {
    (0..k).fold(delta, |w, _| phi(z, w))
}

/// `Y_l(Delta) = phi^{l+1}(Delta)`, the root entry of the depth-l truncated
/// (d-1)-ary tree.
pub fn y_ell(delta: Complex64, z: SpectralPoint, ell: usize) -> Complex64 {
    phi_iter(delta, z, ell + 1)
}

/// `X_l(Delta) = 1/(-z - (d/(d-1)) phi^l(Delta))`, the root entry of the depth-l
/// truncated d-regular tree.
pub fn x_ell(delta: Complex64, z: SpectralPoint, ell: usize, d: usize) -> Complex64 {
    let ratio = d as f64 / (d - 1) as f64;
    1.0 / (-z.z() - ratio * phi_iter(delta, z, ell))
}

/// `dY_l/dDelta` by the chain rule along the orbit: `prod_k phi(w_k)^2`.
pub fn y_ell_derivative(delta: Complex64, z: SpectralPoint, ell: usize) -> Complex64 {
    let mut w = delta;
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..=ell {
        w = phi(z, w);
        acc *= w * w;
    }
    acc
}

/// Residuals of the second-order expansions of `X_l` and `Y_l` around `m_sc`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TaylorResiduals {
    /// `X_l - m_d - (d/(d-1)) m_d^2 m_sc^{2l} delta`.
    pub x: Complex64,
    /// `Y_l - m_sc - m_sc^{2l+2} delta - m_sc^{2l+3} (1 - m_sc^{2l+2})/(1 - m_sc^2) delta^2`.
    pub y: Complex64,
}

pub fn taylor_check_recurbound(delta: Complex64, z: SpectralPoint, ell: usize, d: usize) -> TaylorResiduals {
    let ms = m_sc(z);
    let md = m_d(z, d);
    let dd = delta - ms;
    let ratio = d as f64 / (d - 1) as f64;
    let p2l = ms.powu(2 * ell as u32);
    let x = x_ell(delta, z, ell, d) - md - ratio * md * md * p2l * dd;
    let p2l2 = p2l * ms * ms;
    let quad_coef = p2l2 * ms * (1.0 - p2l2) / (1.0 - ms * ms);
    let y = y_ell(delta, z, ell) - ms - p2l2 * dd - quad_coef * dd * dd;
    TaylorResiduals { x, y }
}

/// Self-consistent quantities at one spectral parameter.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScResiduals {
    pub m: Complex64,
    pub q: Complex64,
    pub y_of_q: Complex64,
    pub x_of_q: Complex64,
    pub q_minus_y: Complex64,
    pub m_minus_x: Complex64,
    /// Control parameter `N^c Im m / (N eta)`.
    pub phi: f64,
}

pub fn sc_residuals<E: GreensEntries, G: Adjacency>(
    g: &G,
    gm: &E,
    d: usize,
    ell: usize,
    c: f64,
) -> ScResiduals {
    let z = gm.point();
    let n = g.order() as f64;
    let m = gm.stieltjes();
    let q = q_of(gm, g);
    let y_of_q = y_ell(q, z, ell);
    let x_of_q = x_ell(q, z, ell, d);
    ScResiduals {
        m,
        q,
        y_of_q,
        x_of_q,
        q_minus_y: q - y_of_q,
        m_minus_x: m - x_of_q,
        phi: (n.powf(c) * m.im / (n * z.eta())).max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ball, remove_vertices, sample_uniform, RegularGraph};
    use proptest::prelude::*;

    fn sp(e: f64, eta: f64) -> SpectralPoint {
        SpectralPoint::new(e, eta).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn k4_stieltjes_closed_form() {
        let k4 = RegularGraph::complete(4);
        let sys = Eigensystem::new(&k4, 3).unwrap();
        let s2 = 2f64.sqrt();
        let z = c(0.0, 1.0);
        let expected = (1.0 / (3.0 / s2 - z) + 3.0 / (-1.0 / s2 - z)) / 4.0;
        let gm = sys.greens(sp(0.0, 1.0));
        assert!((gm.m() - expected).norm() < 1e-14);
        assert!((sys.values()[3] - 3.0 / s2).abs() < 1e-12);
    }

    #[test]
    fn k4_ward_at_2i() {
        let gm = Eigensystem::new(&RegularGraph::complete(4), 3).unwrap().greens(sp(0.0, 2.0));
        assert!(ward_check(&gm).max() < 1e-12);
    }

    #[test]
    fn eigen_and_direct_routes_agree() {
        let g = sample_uniform(100, 3, 5).unwrap();
        let z = sp(0.3, 0.2);
        let a = Eigensystem::new(&g, 3).unwrap().greens(z);
        let b = GreensMatrix::direct(&g, 3, z).unwrap();
        assert!(a.defining_residual(&g, 3) < 1e-10);
        assert!(b.defining_residual(&g, 3) < 1e-10);
        assert!(a.asymmetry() < 1e-12);
        assert!((a.m() - b.m()).norm() < 1e-10);
        assert!(a.diagonal().iter().all(|x| x.im > 0.0));
    }

    #[test]
    fn lazy_resolvent_matches_dense() {
        let g = sample_uniform(60, 4, 2).unwrap();
        let sys = Eigensystem::new(&g, 4).unwrap();
        let z = sp(-0.4, 0.1);
        let dense = sys.greens(z);
        let lazy = sys.resolvent(z);
        for (i, j) in [(0, 0), (3, 17), (59, 2)] {
            assert!((dense.get(i, j) - lazy.entry(i, j)).norm() < 1e-12);
        }
        assert!((q_of(&dense, &g) - q_of(&lazy, &g)).norm() < 1e-12);
    }

    #[test]
    fn minor_of_empty_set_is_identity() {
        let g = sample_uniform(20, 3, 1).unwrap();
        let gm = Eigensystem::new(&g, 3).unwrap().greens(sp(0.1, 0.5));
        let minor = schur_minor(&gm, &[]).unwrap();
        assert_eq!(minor.get(4, 7), Some(gm.get(4, 7)));
    }

    #[test]
    fn minors_match_direct_inversion() {
        let g = sample_uniform(60, 3, 9).unwrap();
        let z = sp(0.7, 0.3);
        let gm = Eigensystem::new(&g, 3).unwrap().greens(z);
        for s in [vec![5], vec![0, 1, 2], vec![10, 40, 41, 59]] {
            let via_schur = schur_minor(&gm, &s).unwrap();
            let minor = remove_vertices(&g, &s);
            let direct = GreensMatrix::direct(&minor.graph, 3, z).unwrap();
            for (x, &ox) in minor.original.iter().enumerate() {
                for (y, &oy) in minor.original.iter().enumerate() {
                    assert!((via_schur.get(ox, oy).unwrap() - direct.get(x, y)).norm() < 1e-10);
                }
            }
            assert_eq!(via_schur.get(s[0], s[0]), None);
        }
        let u = 3;
        let v = g.neighbors(u)[0];
        let minor = remove_vertices(&g, &[u]);
        let direct = GreensMatrix::direct(&minor.graph, 3, z).unwrap();
        let rv = minor.relabel[v].unwrap();
        assert!((single_vertex_minor_diag(&gm, u, v) - direct.get(rv, rv)).norm() < 1e-10);
    }

    #[test]
    fn oversized_minor_rejected() {
        let g = sample_uniform(40, 3, 1).unwrap();
        let gm = Eigensystem::new(&g, 3).unwrap().greens(sp(0.0, 1.0));
        let s: Vec<usize> = (0..17).collect();
        assert!(schur_minor(&gm, &s).is_err());
    }

    #[test]
    fn q_on_vertex_transitive_graphs() {
        for g in [RegularGraph::complete(4), RegularGraph::petersen()] {
            let gm = Eigensystem::new(&g, 3).unwrap().greens(sp(0.0, 1.0));
            let q = q_of(&gm, &g);
            let (i, j) = g.edges()[0];
            let minor = remove_vertices(&g, &[i]);
            let direct = GreensMatrix::direct(&minor.graph, 3, sp(0.0, 1.0)).unwrap();
            let rj = minor.relabel[j].unwrap();
            assert!((q - direct.get(rj, rj)).norm() < 1e-12);
        }
    }

    #[test]
    fn k4_q_closed_form() {
        // K4: G_ii = (1/4)(1/(a-z) + 3/(b-z)), G_ij = (1/4)(1/(a-z) - 1/(b-z)),
        // a = 3/sqrt2, b = -1/sqrt2.
        let z = c(0.0, 1.0);
        let s2 = 2f64.sqrt();
        let (ra, rb) = (1.0 / (3.0 / s2 - z), 1.0 / (-1.0 / s2 - z));
        let gii = (ra + 3.0 * rb) / 4.0;
        let gij = (ra - rb) / 4.0;
        let expected = gii - gij * gij / gii;
        let k4 = RegularGraph::complete(4);
        let gm = Eigensystem::new(&k4, 3).unwrap().greens(sp(0.0, 1.0));
        assert!((q_of(&gm, &k4) - expected).norm() < 1e-13);
    }

    #[test]
    fn single_vertex_extension() {
        let t = Subgraph::truncated_tree(0, 0, 0);
        let z = sp(0.2, 0.4);
        let w = TreeWeight::new(c(0.1, 0.3)).unwrap();
        let p = tree_extension_p(&t, 3, z, w, Compensation::Full).unwrap();
        let expected = 1.0 / (-z.z() - 3.0 * w.delta() / 2.0);
        assert!((p.get(0, 0).unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn depth_one_ary_tree_boundary_only() {
        let t = Subgraph::truncated_tree(2, 2, 1);
        let w = TreeWeight::new(c(0.0, 0.0)).unwrap();
        let p = tree_extension_p(&t, 3, sp(0.0, 1.0), w, Compensation::BoundaryOnly).unwrap();
        assert!((p.get(0, 0).unwrap() - c(0.0, 0.5)).norm() < 1e-14);
        assert!((y_ell(c(0.0, 0.0), sp(0.0, 1.0), 1) - c(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn scalar_recursions_match_tree_matrices() {
        let delta = c(0.15, 0.4);
        let w = TreeWeight::new(delta).unwrap();
        for d in [3, 4] {
            for ell in 0..=5 {
                for z in [sp(0.5, 0.3), sp(-1.8, 0.05), sp(2.5, 1.0)] {
                    let ary = Subgraph::truncated_tree(d - 1, d - 1, ell);
                    let p = tree_extension_p(&ary, d, z, w, Compensation::BoundaryOnly).unwrap();
                    assert!((p.get(0, 0).unwrap() - y_ell(delta, z, ell)).norm() < 1e-10);
                    let reg = Subgraph::truncated_tree(d, d - 1, ell);
                    let p = tree_extension_p(&reg, d, z, w, Compensation::Full).unwrap();
                    assert!((p.get(0, 0).unwrap() - x_ell(delta, z, ell, d)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn full_mode_breaks_fixed_point_on_ary_tree() {
        let z = sp(0.3, 0.5);
        let w = TreeWeight::semicircle(z);
        let t = Subgraph::truncated_tree(2, 2, 2);
        let full = tree_extension_p(&t, 3, z, w, Compensation::Full).unwrap();
        let boundary = tree_extension_p(&t, 3, z, w, Compensation::BoundaryOnly).unwrap();
        assert!((boundary.get(0, 0).unwrap() - m_sc(z)).norm() < 1e-12);
        assert!((full.get(0, 0).unwrap() - m_sc(z)).norm() > 1e-3);
    }

    #[test]
    fn tree_extension_decays_with_distance() {
        let z = sp(0.4, 0.2);
        let d = 3;
        let t = Subgraph::truncated_tree(d, d - 1, 5);
        let p = tree_extension_p(&t, d, z, TreeWeight::semicircle(z), Compensation::Full).unwrap();
        let rate = m_sc(z).norm() / ((d - 1) as f64).sqrt();
        let g: crate::graph::Graph = crate::graph::Graph::from_edges(t.num_vertices(), t.edges.clone()).unwrap();
        let mut worst: f64 = 0.0;
        for v in 0..t.num_vertices() {
            let dist = crate::graph::distance(&g, 0, v).unwrap();
            worst = worst.max(p.get(0, v).unwrap().norm() / rate.powi(dist as i32));
        }
        assert!(worst < 2.0, "decay constant {worst}");
    }

    #[test]
    fn degree_above_d_rejected() {
        let t = Subgraph::truncated_tree(4, 2, 1);
        let w = TreeWeight::new(c(0.0, 0.0)).unwrap();
        assert!(tree_extension_p(&t, 3, sp(0.0, 1.0), w, Compensation::Full).is_err());
        assert!(TreeWeight::new(c(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn fixed_points() {
        for z in [sp(0.0, 1.0), sp(1.9, 0.01), sp(-3.0, 10.0)] {
            let ms = m_sc(z);
            for ell in 0..=40 {
                assert!((y_ell(ms, z, ell) - ms).norm() < 1e-12);
                assert!((x_ell(ms, z, ell, 3) - m_d(z, 3)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_identities() {
        let z = sp(0.6, 0.2);
        let ms = m_sc(z);
        for ell in 0..6 {
            let exact = ms.powu(2 * ell as u32 + 2);
            assert!((y_ell_derivative(ms, z, ell) - exact).norm() < 1e-12);
        }
        let delta = c(0.2, 0.3);
        let y0 = y_ell(delta, z, 0);
        assert!((y_ell_derivative(delta, z, 0) - y0 * y0).norm() < 1e-15);
        let h = 1e-6;
        let fd = (y_ell(delta + h, z, 4) - y_ell(delta - h, z, 4)) / (2.0 * h);
        assert!((fd - y_ell_derivative(delta, z, 4)).norm() < 1e-7);
    }

    #[test]
    fn taylor_residuals_vanish_at_center_and_scale() {
        let z = sp(0.5, 0.3);
        let r = taylor_check_recurbound(m_sc(z), z, 3, 3);
        assert!(r.x.norm() < 1e-12 && r.y.norm() < 1e-12);
        let dir = c(0.6, 0.8);
        let big = taylor_check_recurbound(m_sc(z) + 1e-2 * dir, z, 2, 3);
        let small = taylor_check_recurbound(m_sc(z) + 5e-3 * dir, z, 2, 3);
        let ry = big.y.norm() / small.y.norm();
        let rx = big.x.norm() / small.x.norm();
        assert!((6.0..=10.0).contains(&ry), "{ry}");
        assert!((3.5..=4.5).contains(&rx), "{rx}");
    }

    #[test]
    fn sc_residual_bookkeeping() {
        let g = sample_uniform(80, 3, 4).unwrap();
        let sys = Eigensystem::new(&g, 3).unwrap();
        let r = sc_residuals(&g, &sys.resolvent(sp(0.2, 1.0)), 3, 2, 0.1);
        assert_eq!(r.q_minus_y, r.q - r.y_of_q);
        assert_eq!(r.m_minus_x, r.m - r.x_of_q);
        assert!(r.phi >= 0.0);
    }

    #[test]
    fn ball_extension_on_random_graph() {
        let g = sample_uniform(200, 3, 11).unwrap();
        let t = ball(&g, 0, 2);
        let z = sp(0.0, 1.0);
        let p = tree_extension_p(&t, 3, z, TreeWeight::semicircle(z), Compensation::Full).unwrap();
        assert!(p.get(0, 0).unwrap().im > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ward_identity_holds(seed in any::<u64>(), e in -2.5f64..2.5, eta in 0.01f64..3.0) {
            let g = sample_uniform(50, 3, seed).unwrap();
            let gm = Eigensystem::new(&g, 3).unwrap().greens(sp(e, eta));
            prop_assert!(ward_check(&gm).max() < 1e-10);
            prop_assert!(gm.m().im > 0.0);
        }

        #[test]
        fn y_fixed_point_everywhere(e in -4.0f64..4.0, eta in 0.001f64..10.0, ell in 0usize..40) {
            let z = sp(e, eta);
            let ms = m_sc(z);
            prop_assert!((y_ell(ms, z, ell) - ms).norm() < 1e-12);
        }
    }
}

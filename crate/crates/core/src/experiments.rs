//! Monte-Carlo experiments on sampled graphs: spectra, rigidity profiles, edge
//! fluctuation scaling, Stieltjes-transform concentration and self-consistent
//! moment estimates. Samples run in parallel; sample `k` of a run with seed `s`
//! always uses the graph seed [`sample_seed`]`(s, k)`, and results keep that order.

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::NumericError;
use crate::graph::{sample_uniform, RegularGraph};
use crate::greens::{eigenvalues, sc_residuals, stieltjes_of, y_ell_derivative, Eigensystem};
use crate::km::{classical_locations, in_spectral_domain, km_cdf, m_d, m_sc, LawParams, SpectralPoint};
use crate::seeding::stream_rng;
use crate::stats::{loglog_fit, mean, median, quantile, std_dev};

/// Tolerance for the trivial eigenvalue `d/sqrt(d-1)`.
pub const TOP_EIGENVALUE_TOL: f64 = 1e-9;

/// Graph seed of sample `index` in a run with seed `seed`.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    stream_rng(seed, index).next_u64()
}

fn numeric<E: std::fmt::Display>(e: E) -> NumericError {
    NumericError::Domain(e.to_string())
}

/// Spectrum of one sampled graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumRecord {
    pub n: usize,
    pub d: usize,
    /// Seed passed to [`sample_uniform`].
    pub seed: u64,
    /// `lambda_1 >= ... >= lambda_N` of `H = A/sqrt(d-1)`.
    pub eigenvalues: Vec<f64>,
}

impl SpectrumRecord {
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues[1]
    }

    pub fn lambda_n(&self) -> f64 {
        self.eigenvalues[self.n - 1]
    }

    /// `m(z)` from the stored eigenvalues.
    pub fn stieltjes(&self, z: SpectralPoint) -> num_complex::Complex64 {
        stieltjes_of(&self.eigenvalues, z)
    }
}

/// Dense eigensolve of `H`, checked against the trivial eigenvalue.
pub fn spectrum(g: &RegularGraph, seed: u64) -> Result<SpectrumRecord, NumericError> {
    let mut ev = eigenvalues(g, g.d())?;
    ev.reverse();
    let d = g.d() as f64;
    let top = d / (d - 1.0).sqrt();
    if (ev[0] - top).abs() > TOP_EIGENVALUE_TOL || ev.iter().any(|x| x.abs() > top + TOP_EIGENVALUE_TOL) {
        return Err(NumericError::Eigen(format!(
            "top eigenvalue {} differs from d/sqrt(d-1) = {top}",
            ev[0]
        )));
    }
    Ok(SpectrumRecord { n: g.n(), d: g.d(), seed, eigenvalues: ev })
}

/// Spectra of `samples` independent graphs, in sample order.
pub fn spectra(n: usize, d: usize, samples: usize, seed: u64) -> Result<Vec<SpectrumRecord>, NumericError> {
    (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let s = sample_seed(seed, k);
            let g = sample_uniform(n, d, s).map_err(numeric)?;
            spectrum(&g, s)
        })
        .collect()
}

/// Normalized deviations `r_i = |lambda_i - gamma_i| N^{2/3} min(i, N-i+1)^{1/3}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigidityProfile {
    pub n: usize,
    /// `r_i` for `i = 2..=N`, so `r[k]` belongs to `i = k + 2`.
    pub r: Vec<f64>,
    pub max_r: f64,
    pub argmax_i: usize,
}

/// Rigidity profile of descending eigenvalues against descending locations
/// `gamma_2..gamma_N`.
pub fn rigidity_profile_with(eigenvalues: &[f64], gammas: &[f64]) -> Result<RigidityProfile, NumericError> {
    let n = eigenvalues.len();
    if gammas.len() + 1 != n {
        return Err(NumericError::Domain(format!(
            "{} classical locations for {n} eigenvalues",
            gammas.len()
        )));
    }
    let scale = (n as f64).powf(2.0 / 3.0);
    let r: Vec<f64> = (2..=n)
        .map(|i| {
            let weight = (i.min(n - i + 1) as f64).cbrt();
            (eigenvalues[i - 1] - gammas[i - 2]).abs() * scale * weight
        })
        .collect();
    let (k, &max_r) = r
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap_or((0, &0.0));
    Ok(RigidityProfile { n, r, max_r, argmax_i: k + 2 })
}

pub fn rigidity_profile(rec: &SpectrumRecord) -> Result<RigidityProfile, NumericError> {
    rigidity_profile_with(&rec.eigenvalues, &classical_locations(rec.n, rec.d))
}

/// Log-log scaling of a per-size statistic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub sizes: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// The value regressed against `N` (std or median, see the producer).
    pub values: Vec<f64>,
    pub loglog_slope: f64,
    pub slope_stderr: f64,
}

impl ScalingFit {
    fn from_groups(sizes: &[usize], groups: &[Vec<f64>], value: impl Fn(&[f64]) -> f64) -> Result<Self, NumericError> {
        if sizes.len() < 2 {
            return Err(NumericError::InsufficientSizes { needed: 2, got: sizes.len() });
        }
        let values: Vec<f64> = groups.iter().map(|g| value(g)).collect();
        let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
        let fit = loglog_fit(&xs, &values)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            means: groups.iter().map(|g| mean(g)).collect(),
            stds: groups.iter().map(|g| std_dev(g)).collect(),
            values,
            loglog_slope: fit.slope,
            slope_stderr: fit.slope_stderr,
        })
    }

    pub fn slope_within(&self, lo: f64, hi: f64) -> bool {
        (lo..=hi).contains(&self.loglog_slope)
    }
}

fn check_sizes(sizes: &[usize]) -> Result<(), NumericError> {
    if sizes.len() < 2 {
        return Err(NumericError::InsufficientSizes { needed: 2, got: sizes.len() });
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(NumericError::Domain("sizes must be strictly ascending".into()));
    }
    Ok(())
}

/// One row of `edge_scan.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EdgeRow {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub lambda2: f64,
    pub lambda_n: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeScan {
    pub rows: Vec<EdgeRow>,
    /// Scaling of `std(lambda_2 - 2)`.
    pub lambda2: ScalingFit,
    /// Scaling of `std(|lambda_N| - 2)`.
    pub lambda_n: ScalingFit,
    /// Mean of `N^{2/3} (lambda_2 - 2)` per size.
    pub centered_means: Vec<f64>,
}

/// Edge statistics of precomputed spectra grouped by size.
pub fn edge_scan_from(banks: &[Vec<SpectrumRecord>]) -> Result<EdgeScan, NumericError> {
    let sizes: Vec<usize> = banks.iter().map(|b| b.first().map_or(0, |r| r.n)).collect();
    check_sizes(&sizes)?;
    let rows: Vec<EdgeRow> = banks
        .iter()
        .flatten()
        .map(|r| EdgeRow { n: r.n, d: r.d, seed: r.seed, lambda2: r.lambda2(), lambda_n: r.lambda_n() })
        .collect();
    let top: Vec<Vec<f64>> = banks.iter().map(|b| b.iter().map(|r| r.lambda2() - 2.0).collect()).collect();
    let bottom: Vec<Vec<f64>> = banks.iter().map(|b| b.iter().map(|r| r.lambda_n().abs() - 2.0).collect()).collect();
    let centered_means = banks
        .iter()
        .map(|b| mean(&b.iter().map(|r| (r.n as f64).powf(2.0 / 3.0) * (r.lambda2() - 2.0)).collect::<Vec<_>>()))
        .collect();
    Ok(EdgeScan {
        rows,
        lambda2: ScalingFit::from_groups(&sizes, &top, std_dev)?,
        lambda_n: ScalingFit::from_groups(&sizes, &bottom, std_dev)?,
        centered_means,
    })
}

/// Samples `samples_per_size` graphs at each size and fits the edge fluctuation scale.
pub fn edge_fluctuation_scan(sizes: &[usize], samples_per_size: usize, d: usize, seed: u64) -> Result<EdgeScan, NumericError> {
    check_sizes(sizes)?;
    let banks = sizes
        .iter()
        .map(|&n| spectra(n, d, samples_per_size, seed))
        .collect::<Result<Vec<_>, _>>()?;
    edge_scan_from(&banks)
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityScan {
    pub profiles: Vec<Vec<RigidityProfile>>,
    /// Scaling of the median over samples of `max_i r_i`.
    pub fit: ScalingFit,
}

pub fn rigidity_scan_from(banks: &[Vec<SpectrumRecord>]) -> Result<RigidityScan, NumericError> {
    let sizes: Vec<usize> = banks.iter().map(|b| b.first().map_or(0, |r| r.n)).collect();
    check_sizes(&sizes)?;
    let profiles = banks
        .iter()
        .map(|bank| {
            let Some(first) = bank.first() else { return Ok(Vec::new()) };
            let gammas = classical_locations(first.n, first.d);
            bank.iter().map(|r| rigidity_profile_with(&r.eigenvalues, &gammas)).collect()
        })
        .collect::<Result<Vec<Vec<_>>, NumericError>>()?;
    let maxima: Vec<Vec<f64>> = profiles.iter().map(|p| p.iter().map(|x| x.max_r).collect()).collect();
    let fit = ScalingFit::from_groups(&sizes, &maxima, median)?;
    Ok(RigidityScan { profiles, fit })
}

/// One row of `stieltjes.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StieltjesRow {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub e: f64,
    pub eta: f64,
    pub abs_m_minus_md: f64,
}

/// Per-point summary of `|m - m_d|` against the concentration envelope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StieltjesSummary {
    pub e: f64,
    pub eta: f64,
    pub q90: f64,
    pub envelope: f64,
    /// `q90 / envelope`.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StieltjesScan {
    pub rows: Vec<StieltjesRow>,
    pub summary: Vec<StieltjesSummary>,
}

/// `1/(N eta)` inside `[-2, 2]`; `(kappa+eta)^{-1/2} (N^{-1} eta^{-1/2} + (N eta)^{-2})` outside.
pub fn concentration_envelope(z: SpectralPoint, n: usize) -> f64 {
    let nf = n as f64;
    let n_eta = nf * z.eta();
    if z.e().abs() <= 2.0 {
        1.0 / n_eta
    } else {
        (z.kappa() + z.eta()).powf(-0.5) * (1.0 / (nf * z.eta().sqrt()) + n_eta.powi(-2))
    }
}

pub fn stieltjes_scan_from(
    bank: &[SpectrumRecord],
    z_grid: &[SpectralPoint],
    params: &LawParams,
) -> Result<StieltjesScan, NumericError> {
    let Some(first) = bank.first() else {
        return Ok(StieltjesScan { rows: Vec::new(), summary: Vec::new() });
    };
    let (n, d) = (first.n, first.d);
    if let Some(z) = z_grid.iter().find(|&&z| !in_spectral_domain(z, n, params)) {
        return Err(NumericError::Domain(format!("z = {z} lies outside the spectral domain for n={n}")));
    }
    let mut rows = Vec::with_capacity(bank.len() * z_grid.len());
    let mut summary = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        let target = m_d(z, d);
        let devs: Vec<f64> = bank.iter().map(|r| (r.stieltjes(z) - target).norm()).collect();
        rows.extend(bank.iter().zip(&devs).map(|(r, &dev)| StieltjesRow {
            n: r.n,
            d: r.d,
            seed: r.seed,
            e: z.e(),
            eta: z.eta(),
            abs_m_minus_md: dev,
        }));
        let q90 = quantile(&devs, 0.9);
        let envelope = concentration_envelope(z, n);
        summary.push(StieltjesSummary { e: z.e(), eta: z.eta(), q90, envelope, ratio: q90 / envelope });
    }
    Ok(StieltjesScan { rows, summary })
}

pub fn stieltjes_concentration_scan(
    n: usize,
    d: usize,
    z_grid: &[SpectralPoint],
    samples: usize,
    seed: u64,
    params: &LawParams,
) -> Result<StieltjesScan, NumericError> {
    if let Some(z) = z_grid.iter().find(|&&z| !in_spectral_domain(z, n, params)) {
        return Err(NumericError::Domain(format!("z = {z} lies outside the spectral domain for n={n}")));
    }
    stieltjes_scan_from(&spectra(n, d, samples, seed)?, z_grid, params)
}

/// The window `[2 + kappa - eta, 2 + kappa + eta]` with `kappa = N^{-2/3+0.2}` and
/// `eta = N^{0.15} / (N sqrt(kappa))`, which should contain no eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EdgeWindow {
    pub kappa: f64,
    pub eta: f64,
    pub lo: f64,
    pub hi: f64,
}

impl EdgeWindow {
    pub fn for_size(n: usize) -> Self {
        let nf = n as f64;
        let kappa = nf.powf(-2.0 / 3.0 + 0.2);
        let eta = nf.powf(0.15) / (nf * kappa.sqrt());
        Self { kappa, eta, lo: 2.0 + kappa - eta, hi: 2.0 + kappa + eta }
    }

    /// Whether no nontrivial eigenvalue falls in the window.
    pub fn is_clear(&self, rec: &SpectrumRecord) -> bool {
        !rec.eigenvalues[1..].iter().any(|&x| (self.lo..=self.hi).contains(&x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EdgeWindowReport {
    pub window: EdgeWindow,
    pub samples: usize,
    pub clear: usize,
    pub clear_fraction: f64,
}

pub fn edge_window_test(bank: &[SpectrumRecord]) -> EdgeWindowReport {
    let n = bank.first().map_or(0, |r| r.n);
    let window = EdgeWindow::for_size(n.max(1));
    let clear = bank.iter().filter(|r| window.is_clear(r)).count();
    EdgeWindowReport {
        window,
        samples: bank.len(),
        clear,
        clear_fraction: if bank.is_empty() { 0.0 } else { clear as f64 / bank.len() as f64 },
    }
}

/// Kolmogorov-Smirnov distance between the nontrivial eigenvalues and the
/// Kesten-McKay law.
pub fn esd_vs_km(rec: &SpectrumRecord) -> f64 {
    crate::stats::ks_distance(&rec.eigenvalues[1..], |x| km_cdf(rec.d, x))
}

/// Per-sample self-consistent quantities for the moment estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentSample {
    pub seed: u64,
    /// `|Q - Y_l(Q)|`.
    pub abs_q_minus_y: f64,
    /// `(Im m + |sqrt((1 - Y_l'(Q)) Im m)|)/(N eta) + |Q - m_sc|^2`.
    pub comparator: f64,
    pub abs_m_minus_x: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub n: usize,
    pub d: usize,
    pub ell: usize,
    pub p: u32,
    pub e: f64,
    pub eta: f64,
    /// `E |Q - Y_l(Q)|^{2p}`.
    pub lhs: f64,
    /// `E comparator^{2p}`.
    pub rhs: f64,
    pub ratio: f64,
    pub samples: Vec<MomentSample>,
}

/// Self-consistent quantities of one graph at `z`.
pub fn moment_sample(g: &RegularGraph, seed: u64, z: SpectralPoint, ell: usize) -> Result<MomentSample, NumericError> {
    let sys = Eigensystem::new(g, g.d())?;
    let res = sc_residuals(g, &sys.resolvent(z), g.d(), ell, 0.0);
    let im_m = res.m.im;
    let slope = y_ell_derivative(res.q, z, ell);
    let root = ((1.0 - slope) * im_m).sqrt().norm();
    let n_eta = g.n() as f64 * z.eta();
    Ok(MomentSample {
        seed,
        abs_q_minus_y: res.q_minus_y.norm(),
        comparator: (im_m + root) / n_eta + (res.q - m_sc(z)).norm_sqr(),
        abs_m_minus_x: res.m_minus_x.norm(),
    })
}

pub fn moments_from(samples: Vec<MomentSample>, n: usize, d: usize, ell: usize, z: SpectralPoint, p: u32) -> MomentReport {
    let pow = 2 * p as i32;
    let lhs = mean(&samples.iter().map(|s| s.abs_q_minus_y.powi(pow)).collect::<Vec<_>>());
    let rhs = mean(&samples.iter().map(|s| s.comparator.powi(pow)).collect::<Vec<_>>());
    MomentReport { n, d, ell, p, e: z.e(), eta: z.eta(), lhs, rhs, ratio: lhs / rhs, samples }
}

/// Empirical `E|Q - Y_l(Q)|^{2p}` against its comparator.
pub fn sc_moment_estimate(
    n: usize,
    d: usize,
    ell: usize,
    z: SpectralPoint,
    p: u32,
    samples: usize,
    seed: u64,
) -> Result<MomentReport, NumericError> {
    if !(1..=2).contains(&p) {
        return Err(NumericError::Domain(format!("moment order p={p} must be 1 or 2")));
    }
    let rows = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let s = sample_seed(seed, k);
            let g = sample_uniform(n, d, s).map_err(numeric)?;
            moment_sample(&g, s, z, ell)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(moments_from(rows, n, d, ell, z, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k4_and_petersen_spectra() {
        let s2 = 2f64.sqrt();
        let k4 = spectrum(&RegularGraph::complete(4), 0).unwrap();
        let expected = [3.0 / s2, -1.0 / s2, -1.0 / s2, -1.0 / s2];
        assert!(k4.eigenvalues.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12));
        let p = spectrum(&RegularGraph::petersen(), 0).unwrap();
        let mut expected = vec![3.0 / s2];
        expected.extend([1.0 / s2; 5]);
        expected.extend([-s2; 4]);
        assert!(p.eigenvalues.iter().zip(&expected).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(p.eigenvalues.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn rigidity_of_classical_locations_is_zero() {
        let n = 50;
        let gammas = classical_locations(n, 3);
        let mut ev = vec![3.0 / 2f64.sqrt()];
        ev.extend(&gammas);
        let prof = rigidity_profile_with(&ev, &gammas).unwrap();
        assert_eq!(prof.max_r, 0.0);
        assert_eq!(prof.r.len(), n - 1);
        assert!(rigidity_profile_with(&ev[..10], &gammas).is_err());
    }

    #[test]
    fn rigidity_weights() {
        let gammas = vec![0.0; 4];
        let ev = [2.0, 1.0, 0.0, 0.0, 0.0];
        let prof = rigidity_profile_with(&ev, &gammas).unwrap();
        // i = 2, min(2, 4) = 2
        let expected = 5f64.powf(2.0 / 3.0) * 2f64.cbrt();
        assert!((prof.r[0] - expected).abs() < 1e-12);
        assert_eq!(prof.argmax_i, 2);
    }

    #[test]
    fn sample_seeds_are_reproducible() {
        let a = spectra(40, 3, 3, 9).unwrap();
        let b = spectra(40, 3, 3, 9).unwrap();
        assert_eq!(a, b);
        let g = sample_uniform(40, 3, a[1].seed).unwrap();
        assert_eq!(spectrum(&g, a[1].seed).unwrap(), a[1]);
    }

    #[test]
    fn single_size_scan_is_rejected() {
        assert!(matches!(
            edge_fluctuation_scan(&[100], 3, 3, 1),
            Err(NumericError::InsufficientSizes { .. })
        ));
    }

    #[test]
    fn stieltjes_matches_greens_module() {
        let g = sample_uniform(120, 3, 4).unwrap();
        let rec = spectrum(&g, 4).unwrap();
        let z = SpectralPoint::new(0.4, 0.05).unwrap();
        let gm = Eigensystem::new(&g, 3).unwrap().greens(z);
        assert!((rec.stieltjes(z) - gm.m()).norm() < 1e-10);
    }

    #[test]
    fn stieltjes_decays_at_large_eta() {
        let bank = spectra(60, 3, 2, 1).unwrap();
        let z = SpectralPoint::new(0.0, 1e6).unwrap();
        assert!((bank[0].stieltjes(z) - m_d(z, 3)).norm() < 1e-12);
    }

    #[test]
    fn domain_is_enforced() {
        let params = LawParams::new(3, 0.3, 0.1, 2).unwrap();
        let z = SpectralPoint::new(10.0, 1.0).unwrap();
        assert!(stieltjes_concentration_scan(100, 3, &[z], 2, 1, &params).is_err());
    }

    #[test]
    fn ks_distance_small_for_large_graph() {
        let g = sample_uniform(1000, 3, 2).unwrap();
        let rec = spectrum(&g, 2).unwrap();
        assert!(esd_vs_km(&rec) < 0.05);
        let k4 = spectrum(&RegularGraph::complete(4), 0).unwrap();
        assert!(esd_vs_km(&k4) > 0.3);
    }

    #[test]
    fn repeated_graph_moment_equals_single_value() {
        let g = sample_uniform(80, 3, 1).unwrap();
        let z = SpectralPoint::new(0.5, 0.5).unwrap();
        let s = moment_sample(&g, 1, z, 2).unwrap();
        let rep = moments_from(vec![s; 5], 80, 3, 2, z, 1);
        assert!((rep.lhs - s.abs_q_minus_y.powi(2)).abs() < 1e-15 * rep.lhs.max(1.0));
    }

    #[test]
    fn edge_window_shape() {
        let w = EdgeWindow::for_size(2000);
        assert!(w.lo > 2.0 && w.hi > w.lo);
    }
}

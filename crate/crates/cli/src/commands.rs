//! Subcommand bodies. Each validates its config before doing any work and returns
//! the artifacts to persist plus a one-line summary.

use std::path::PathBuf;

use rayon::prelude::*;
use regraph::config::{Format, RunConfig};
use regraph::experiments::{
    edge_scan_from, edge_window_test, esd_vs_km, rigidity_profile_with, rigidity_scan_from, sc_moment_estimate,
    spectra, stieltjes_scan_from, EdgeWindowReport, MomentReport, SpectrumRecord, StieltjesSummary,
};
use regraph::format::{parse_regraph, write_regraph};
use regraph::graph::{omega_bar_census, sample_uniform, RegularGraph};
use regraph::greens::{sc_residuals, ward_check, Eigensystem};
use regraph::km::{classical_locations, error_params, in_spectral_domain, m_d, LawParams, SpectralPoint};
use regraph::report::{
    build_report, criteria_table, gnuplot_script, parse_report_csv, Bands, Check, EDGE_SCAN_COLUMNS, GAMMA_COLUMNS,
    RIGIDITY_COLUMNS, SPECTRUM_COLUMNS, STIELTJES_COLUMNS,
};
use regraph::resampling::{
    apply_switch, default_radius, exchangeability_test, resolvent_identity_residual, run_trial, woodbury_delta,
    PartnerSampler, Statistic, SwitchDelta, TrialConfig,
};
use regraph::stats::{linear_fit, median};
use regraph::GraphError;
use serde::Serialize;
use serde_json::json;

use crate::error::{invalid, runtime, CliError};
use crate::output::{json_document, Csv, Target};

/// Keep-size of the aligned negative-control sampler when none is given.
pub const DEFAULT_ALIGNED_KEEP: usize = 80;

pub struct Outcome {
    pub artifacts: Vec<(Target, Vec<u8>)>,
    pub summary: String,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.subcommand.as_str() {
        "sample" => sample(cfg),
        "spectrum" => spectrum(cfg),
        "gamma" => gamma(cfg),
        "greens" => greens(cfg),
        "rigidity" => rigidity(cfg),
        "edge-scan" => edge_scan(cfg),
        "stieltjes-scan" => stieltjes_scan(cfg),
        "resample" => resample(cfg),
        "woodbury-check" => woodbury_check(cfg),
        "moments" => moments(cfg),
        "report" => report(cfg),
        other => Err(invalid(format!("unknown subcommand {other:?}"))),
    }
}

fn check_graph_params(n: usize, d: usize) -> Result<(), CliError> {
    if n.checked_mul(d).is_none_or(|nd| nd % 2 != 0) {
        return Err(invalid(GraphError::Parity { n, d }));
    }
    if d < 3 || d >= n {
        return Err(invalid(GraphError::DegreeRange { n, d, min: 3 }));
    }
    Ok(())
}

fn check_sizes(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.sizes.len() < 2 {
        return Err(invalid("sizes needs at least two entries for a scaling fit"));
    }
    if cfg.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("sizes must be strictly ascending"));
    }
    cfg.sizes.iter().try_for_each(|&n| check_graph_params(n, cfg.d))
}

fn check_samples(cfg: &RunConfig, min: usize) -> Result<(), CliError> {
    if cfg.samples < min {
        return Err(invalid(format!("samples must be at least {min}")));
    }
    Ok(())
}

fn law(cfg: &RunConfig) -> Result<LawParams, CliError> {
    LawParams::new(cfg.d, cfg.a, cfg.c, cfg.ell).map_err(invalid)
}

fn first_point(cfg: &RunConfig) -> Result<SpectralPoint, CliError> {
    cfg.z.first().copied().ok_or_else(|| invalid("z must name at least one spectral parameter"))
}

fn parse_sampler(text: &str) -> Result<PartnerSampler, CliError> {
    match text.split_once(':') {
        None if text == "uniform" => Ok(PartnerSampler::Uniform),
        None if text == "aligned" => Ok(PartnerSampler::Aligned { keep: DEFAULT_ALIGNED_KEEP }),
        Some(("aligned", keep)) => match keep.parse::<usize>() {
            Ok(keep) if keep > 0 => Ok(PartnerSampler::Aligned { keep }),
            _ => Err(invalid(format!("sampler keep-size {keep:?} must be a positive integer"))),
        },
        _ => Err(invalid(format!("unknown sampler {text:?} (uniform, aligned, aligned:KEEP)"))),
    }
}

fn radius(cfg: &RunConfig, n: usize) -> usize {
    cfg.radius.unwrap_or_else(|| default_radius(n, cfg.d, cfg.c))
}

fn csv_or_json(cfg: &RunConfig, csv: Csv, default_csv: &str, summary: &impl Serialize, default_json: &str) -> Result<Vec<(Target, Vec<u8>)>, CliError> {
    Ok(match cfg.format {
        Format::Csv => vec![(Target::resolve(cfg, default_csv), csv.into_bytes())],
        Format::Json => vec![(Target::resolve(cfg, default_json), json_document(cfg, summary)?)],
    })
}

fn sample(cfg: &RunConfig) -> Result<Outcome, CliError> {
    check_graph_params(cfg.n, cfg.d)?;
    let g = sample_uniform(cfg.n, cfg.d, cfg.seed).map_err(runtime)?;
    let census = omega_bar_census(&g, cfg.c, cfg.omega_d);
    let target = Target::resolve(cfg, "graph.regraph");
    let mut artifacts = vec![(target.clone(), write_regraph(&g).into_bytes())];
    // The graph format has no comment syntax, so the config goes to a sidecar
    // that is itself a loadable config file.
    if let Target::File(path) = &target {
        let mut side = path.clone().into_os_string();
        side.push(".cfg");
        artifacts.push((Target::File(PathBuf::from(side)), cfg.header("").into_bytes()));
    }
    Ok(Outcome {
        artifacts,
        summary: format!(
            "sample: n={} d={} seed={} triangles={} tangled_vertices={} (radius {})",
            cfg.n,
            cfg.d,
            cfg.seed,
            g.triangle_count(),
            census.bad_vertex_count,
            census.radius
        ),
    })
}

fn spectrum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    check_graph_params(cfg.n, cfg.d)?;
    check_samples(cfg, 1)?;
    let bank = spectra(cfg.n, cfg.d, cfg.samples, cfg.seed).map_err(runtime)?;
    let ks: Vec<f64> = bank.iter().map(esd_vs_km).collect();
    let mut csv = Csv::new(cfg, SPECTRUM_COLUMNS);
    for r in &bank {
        for (k, x) in r.eigenvalues.iter().enumerate() {
            csv.row(&[&r.n, &r.d, &r.seed, &(k + 1), x]);
        }
    }
    #[derive(Serialize)]
    struct Body<'a> {
        records: &'a [SpectrumRecord],
        ks_distance: &'a [f64],
    }
    let lambda2: Vec<f64> = bank.iter().map(SpectrumRecord::lambda2).collect();
    Ok(Outcome {
        artifacts: csv_or_json(cfg, csv, "spectrum.csv", &Body { records: &bank, ks_distance: &ks }, "spectrum.json")?,
        summary: format!(
            "spectrum: n={} d={} samples={} median lambda2={} median KS distance to Kesten-McKay={}",
            cfg.n,
            cfg.d,
            cfg.samples,
            median(&lambda2),
            median(&ks)
        ),
    })
}

fn gamma(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.n < 3 || cfg.d < 3 {
        return Err(invalid(format!("gamma needs n >= 3 and d >= 3 (n={}, d={})", cfg.n, cfg.d)));
    }
    let gammas = classical_locations(cfg.n, cfg.d);
    let mut csv = Csv::new(cfg, GAMMA_COLUMNS);
    for (k, x) in gammas.iter().enumerate() {
        csv.row(&[&(k + 2), x]);
    }
    let body = json!({ "gamma": gammas.iter().enumerate().map(|(k, x)| json!({ "i": k + 2, "gamma_i": x })).collect::<Vec<_>>() });
    Ok(Outcome {
        artifacts: csv_or_json(cfg, csv, "gamma.csv", &body, "gamma.json")?,
        summary: format!(
            "gamma: n={} d={} rows={} range [{}, {}]",
            cfg.n,
            cfg.d,
            gammas.len(),
            gammas.last().copied().unwrap_or(f64::NAN),
            gammas.first().copied().unwrap_or(f64::NAN)
        ),
    })
}

fn load_or_sample(cfg: &RunConfig) -> Result<RegularGraph, CliError> {
    match cfg.inputs.as_slice() {
        [] => {
            check_graph_params(cfg.n, cfg.d)?;
            sample_uniform(cfg.n, cfg.d, cfg.seed).map_err(runtime)
        }
        [path] => {
            let bytes = std::fs::read(path).map_err(|e| runtime(format!("reading {path}: {e}")))?;
            let g = parse_regraph(&bytes).map_err(|e| invalid(format!("{path}: {e}")))?;
            if g.d() < 3 {
                return Err(invalid(format!("{path}: degree {} < 3", g.d())));
            }
            Ok(g)
        }
        _ => Err(invalid("greens takes at most one input graph")),
    }
}

fn greens(cfg: &RunConfig) -> Result<Outcome, CliError> {
    law(cfg)?;
    first_point(cfg)?;
    let g = load_or_sample(cfg)?;
    let (n, d) = (g.n(), g.d());
    let sys = Eigensystem::new(&g, d).map_err(runtime)?;
    let mut points = Vec::with_capacity(cfg.z.len());
    let mut worst_ward: f64 = 0.0;
    for &z in &cfg.z {
        let gm = sys.greens(z);
        let res = sc_residuals(&g, &gm, d, cfg.ell, cfg.c);
        let ward = ward_check(&gm);
        worst_ward = worst_ward.max(ward.max());
        let md = m_d(z, d);
        points.push(json!({
            "z": [z.e(), z.eta()],
            "m": res.m,
            "m_d": md,
            "q": res.q,
            "y_of_q": res.y_of_q,
            "x_of_q": res.x_of_q,
            "ward_dev": ward.max(),
            "residuals": {
                "q_minus_y": res.q_minus_y,
                "m_minus_x": res.m_minus_x,
                "abs_m_minus_md": (res.m - md).norm(),
                "defining": gm.defining_residual(&g, d),
                "asymmetry": gm.asymmetry(),
                "phi": res.phi,
            },
            "error_params": error_params(z, cfg.r_frac, n, d, cfg.log_power),
        }));
    }
    let checks = vec![Check {
        criterion: 1,
        name: "ward identity".into(),
        pass: worst_ward < 1e-10,
        detail: format!("max deviation {worst_ward:e} vs < 1e-10"),
    }];
    let body = json!({ "n": n, "d": d, "points": points, "checks": checks });
    Ok(Outcome {
        artifacts: vec![(Target::resolve(cfg, "greens.json"), json_document(cfg, &body)?)],
        summary: format!("greens: n={n} d={d} points={} max ward deviation={worst_ward:e}", cfg.z.len()),
    })
}

fn banks(cfg: &RunConfig) -> Result<Vec<Vec<SpectrumRecord>>, CliError> {
    cfg.sizes.iter().map(|&n| spectra(n, cfg.d, cfg.samples, cfg.seed).map_err(runtime)).collect()
}

fn rigidity(cfg: &RunConfig) -> Result<Outcome, CliError> {
    check_sizes(cfg)?;
    let bands = Bands::default();
    let mut csv = Csv::new(cfg, RIGIDITY_COLUMNS);
    if cfg.self_test {
        // Feeding gamma in as the spectrum must give r_i = 0 exactly.
        let mut worst: f64 = 0.0;
        for &n in &cfg.sizes {
            let gammas = classical_locations(n, cfg.d);
            let mut eigs = vec![cfg.d as f64 / ((cfg.d - 1) as f64).sqrt()];
            eigs.extend(&gammas);
            let profile = rigidity_profile_with(&eigs, &gammas).map_err(runtime)?;
            worst = worst.max(profile.max_r);
            for (k, r) in profile.r.iter().enumerate() {
                csv.row(&[&n, &cfg.d, &cfg.seed, &(k + 2), &eigs[k + 1], &gammas[k], r]);
            }
        }
        let body = json!({ "self_test": true, "max_r": worst });
        return Ok(Outcome {
            artifacts: csv_or_json(cfg, csv, "rigidity.csv", &body, "rigidity.json")?,
            summary: format!("rigidity self-test: sizes={:?} max_r={worst}", cfg.sizes),
        });
    }
    check_samples(cfg, 1)?;
    let banks = banks(cfg)?;
    let scan = rigidity_scan_from(&banks).map_err(runtime)?;
    for (bank, profiles) in banks.iter().zip(&scan.profiles) {
        let Some(first) = bank.first() else { continue };
        let gammas = classical_locations(first.n, first.d);
        for (rec, profile) in bank.iter().zip(profiles) {
            for (k, r) in profile.r.iter().enumerate() {
                csv.row(&[&rec.n, &rec.d, &rec.seed, &(k + 2), &rec.eigenvalues[k + 1], &gammas[k], r]);
            }
        }
    }
    let fit = &scan.fit;
    let pass = fit.loglog_slope < bands.rigidity_slope_max && fit.slope_stderr < bands.rigidity_stderr_max;
    let checks = vec![Check {
        criterion: 7,
        name: "rigidity scaling".into(),
        pass,
        detail: format!(
            "growth exponent {} (stderr {}) vs < {} (stderr < {})",
            fit.loglog_slope, fit.slope_stderr, bands.rigidity_slope_max, bands.rigidity_stderr_max
        ),
    }];
    let body = json!({ "fit": fit, "checks": checks });
    Ok(Outcome {
        artifacts: csv_or_json(cfg, csv, "rigidity.csv", &body, "rigidity.json")?,
        summary: format!(
            "rigidity: sizes={:?} samples={} median max_r={:?} growth exponent={} stderr={}",
            cfg.sizes, cfg.samples, fit.values, fit.loglog_slope, fit.slope_stderr
        ),
    })
}

fn edge_scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    check_sizes(cfg)?;
    check_samples(cfg, 2)?;
    let scan = edge_scan_from(&banks(cfg)?).map_err(runtime)?;
    let mut csv = Csv::new(cfg, EDGE_SCAN_COLUMNS);
    for r in &scan.rows {
        csv.row(&[&r.n, &r.d, &r.seed, &r.lambda2, &r.lambda_n]);
    }
    let (lo, hi) = Bands::default().edge_slope;
    let checks = vec![Check {
        criterion: 8,
        name: "edge fluctuation exponent".into(),
        pass: scan.lambda2.slope_within(lo, hi),
        detail: format!("slope {} vs [{lo}, {hi}]", scan.lambda2.loglog_slope),
    }];
    let body = json!({
        "lambda2": scan.lambda2,
        "lambda_n": scan.lambda_n,
        "centered_means": scan.centered_means,
        "checks": checks,
    });
    Ok(Outcome {
        artifacts: csv_or_json(cfg, csv, "edge_scan.csv", &body, "edge_scan.json")?,
        summary: format!(
            "edge-scan: sizes={:?} samples={} std(lambda2-2) slope={} std(|lambdaN|-2) slope={}",
            cfg.sizes, cfg.samples, scan.lambda2.loglog_slope, scan.lambda_n.loglog_slope
        ),
    })
}

fn stieltjes_scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    check_sizes(cfg)?;
    check_samples(cfg, 1)?;
    let params = law(cfg)?;
    first_point(cfg)?;
    for &n in &cfg.sizes {
        if let Some(z) = cfg.z.iter().find(|&&z| !in_spectral_domain(z, n, &params)) {
            return Err(invalid(format!("z = {z} lies outside the spectral domain for n={n}")));
        }
    }
    let banks = banks(cfg)?;
    let mut csv = Csv::new(cfg, STIELTJES_COLUMNS);
    #[derive(Serialize)]
    struct PerSize {
        n: usize,
        summary: Vec<StieltjesSummary>,
        edge_window: EdgeWindowReport,
    }
    let mut per_size = Vec::new();
    for bank in &banks {
        let scan = stieltjes_scan_from(bank, &cfg.z, &params).map_err(runtime)?;
        for r in &scan.rows {
            csv.row(&[&r.n, &r.d, &r.seed, &r.e, &r.eta, &r.abs_m_minus_md]);
        }
        per_size.push(PerSize { n: bank[0].n, summary: scan.summary, edge_window: edge_window_test(bank) });
    }
    // q90 * N * eta per bulk point with eta = 1, compared across sizes.
    let mut spread: Option<f64> = None;
    for (k, z) in cfg.z.iter().enumerate() {
        if z.eta() == 1.0 && z.e().abs() < 2.0 {
            let normalized: Vec<f64> = per_size.iter().map(|p| p.summary[k].q90 * p.n as f64 * z.eta()).collect();
            let hi = normalized.iter().copied().fold(f64::MIN, f64::max);
            let lo = normalized.iter().copied().fold(f64::MAX, f64::min);
            spread = Some(spread.unwrap_or(0.0).max(hi / lo));
        }
    }
    let largest = per_size.last().map(|p| p.edge_window).expect("at least two sizes");
    let mut checks = vec![Check {
        criterion: 9,
        name: "edge window".into(),
        pass: largest.clear_fraction >= 0.99,
        detail: format!("n={} clear in {} of {} samples", cfg.sizes[cfg.sizes.len() - 1], largest.clear, largest.samples),
    }];
    let max = Bands::default().stieltjes_spread_max;
    if let Some(s) = spread {
        checks.push(Check {
            criterion: 9,
            name: "stieltjes concentration".into(),
            pass: s < max,
            detail: format!("max/min of q90*N*eta across sizes {s} vs < {max}"),
        });
    }
    let body = json!({ "sizes": per_size, "checks": checks });
    Ok(Outcome {
        artifacts: csv_or_json(cfg, csv, "stieltjes.csv", &body, "stieltjes.json")?,
        summary: format!(
            "stieltjes-scan: sizes={:?} samples={} points={} bulk spread={} edge window clear={}",
            cfg.sizes,
            cfg.samples,
            cfg.z.len(),
            spread.map_or_else(|| "n/a".into(), |s| s.to_string()),
            largest.clear_fraction
        ),
    })
}

fn trial_config(cfg: &RunConfig) -> Result<TrialConfig, CliError> {
    check_graph_params(cfg.n, cfg.d)?;
    if cfg.ell == 0 {
        return Err(invalid("ell must be at least 1"));
    }
    if cfg.trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    Ok(TrialConfig { n: cfg.n, d: cfg.d, ell: cfg.ell, radius: radius(cfg, cfg.n), sampler: parse_sampler(&cfg.sampler)? })
}

/// Woodbury truncation errors of one trial at each spectral parameter, or `None`
/// when no switch was applied.
struct WoodburyTrial {
    errors: Vec<Vec<f64>>,
    identity_residual: Vec<f64>,
}

fn woodbury_trial(tc: &TrialConfig, cfg: &RunConfig, t: u64) -> Result<Option<WoodburyTrial>, CliError> {
    let trial = run_trial(tc, cfg.seed, t).map_err(runtime)?;
    if trial.outcome.applied.indices.is_empty() {
        return Ok(None);
    }
    let before = Eigensystem::new(&trial.graph, tc.d).map_err(runtime)?;
    let after = Eigensystem::new(&trial.outcome.graph, tc.d).map_err(runtime)?;
    let delta = SwitchDelta::new(&trial.data, &trial.outcome.applied, tc.d);
    let mut errors = Vec::with_capacity(cfg.z.len());
    let mut identity_residual = Vec::with_capacity(cfg.z.len());
    for &z in &cfg.z {
        let gm = before.greens(z);
        let gt = after.greens(z);
        let diff = gt.entries() - gm.entries();
        identity_residual.push(resolvent_identity_residual(&gm, &gt, &delta, &diff));
        let exp = woodbury_delta(&gm, &trial.graph, &trial.data, &trial.outcome.applied, tc.d, cfg.k_max, &diff)
            .map_err(runtime)?;
        errors.push(exp.errors);
    }
    Ok(Some(WoodburyTrial { errors, identity_residual }))
}

#[derive(Serialize)]
struct WoodburyPoint {
    z: [f64; 2],
    trials: usize,
    strictly_decreasing: usize,
    decreasing_fraction: f64,
    /// Median over trials of `(err_K / err_0)^(1/K)`.
    median_decay_ratio: f64,
    /// `(K, median error)` for `K = 0..=k_max`.
    table: Vec<(usize, f64)>,
    max_identity_residual: f64,
}

fn woodbury_points(cfg: &RunConfig, results: &[WoodburyTrial]) -> Vec<WoodburyPoint> {
    cfg.z
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let errs: Vec<&Vec<f64>> = results.iter().map(|r| &r.errors[k]).collect();
            let decreasing = errs.iter().filter(|e| e.windows(2).all(|w| w[1] < w[0])).count();
            let ratios: Vec<f64> = errs
                .iter()
                .map(|e| (e[e.len() - 1] / e[0]).powf(1.0 / (e.len() - 1).max(1) as f64))
                .collect();
            let table = (0..=cfg.k_max).map(|order| (order, median(&errs.iter().map(|e| e[order]).collect::<Vec<_>>()))).collect();
            WoodburyPoint {
                z: [z.e(), z.eta()],
                trials: errs.len(),
                strictly_decreasing: decreasing,
                decreasing_fraction: if errs.is_empty() { 0.0 } else { decreasing as f64 / errs.len() as f64 },
                median_decay_ratio: median(&ratios),
                table,
                max_identity_residual: results.iter().map(|r| r.identity_residual[k]).fold(0.0, f64::max),
            }
        })
        .collect()
}

fn run_woodbury(cfg: &RunConfig, tc: &TrialConfig, trials: usize) -> Result<(Vec<WoodburyTrial>, usize), CliError> {
    let results: Vec<Result<Option<WoodburyTrial>, CliError>> =
        (0..trials as u64).into_par_iter().map(|t| woodbury_trial(tc, cfg, t)).collect();
    let results: Vec<Option<WoodburyTrial>> = results.into_iter().collect::<Result<_, _>>()?;
    let skipped = results.iter().filter(|r| r.is_none()).count();
    Ok((results.into_iter().flatten().collect(), skipped))
}

/// Trials whose Woodbury table is attached to the resample report.
const RESAMPLE_WOODBURY_TRIALS: usize = 20;

fn resample(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let tc = trial_config(cfg)?;
    let statistic: Statistic = cfg.statistic.parse().map_err(invalid)?;
    first_point(cfg)?;
    let rows: Vec<Result<(bool, bool, usize, usize), CliError>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let trial = run_trial(&tc, cfg.seed, t).map_err(runtime)?;
            let back = apply_switch(&trial.outcome.graph, &trial.outcome.reverse, tc.radius).map_err(runtime)?;
            let delta = SwitchDelta::new(&trial.data, &trial.outcome.applied, tc.d);
            Ok((
                back.graph == trial.graph,
                delta.sums_to_difference(&trial.graph, &trial.outcome.graph),
                trial.outcome.indicated.indices.len(),
                trial.outcome.applied.indices.len(),
            ))
        })
        .collect();
    let rows: Vec<(bool, bool, usize, usize)> = rows.into_iter().collect::<Result<_, _>>()?;
    let recovered = rows.iter().filter(|r| r.0).count();
    let exact_sums = rows.iter().filter(|r| r.1).count();
    let exch = exchangeability_test(statistic, &tc, cfg.trials, cfg.seed).map_err(runtime)?;
    let (wood, _) = run_woodbury(cfg, &tc, cfg.trials.min(RESAMPLE_WOODBURY_TRIALS))?;
    let woodbury = woodbury_points(cfg, &wood);
    let reversal_rate = recovered as f64 / cfg.trials as f64;
    let negative_control = matches!(tc.sampler, PartnerSampler::Aligned { .. });
    let p = exch.sign.p_value;
    let checks = vec![
        Check {
            criterion: 4,
            name: "switching correctness".into(),
            pass: reversal_rate >= 0.95 && exact_sums == cfg.trials,
            detail: format!("reversed {recovered}/{} trials; xi sums exact on {exact_sums}", cfg.trials),
        },
        Check {
            criterion: 5,
            name: if negative_control { "exchangeability negative control" } else { "exchangeability" }.into(),
            pass: if negative_control { p < 0.001 } else { p > 0.01 },
            detail: format!("sign test p={p} vs {}", if negative_control { "< 0.001" } else { "> 0.01" }),
        },
    ];
    let body = json!({
        "radius": tc.radius,
        "admissibility": {
            "mean_mu": exch.mean_mu,
            "indicated": rows.iter().map(|r| r.2).sum::<usize>(),
            "applied": rows.iter().map(|r| r.3).sum::<usize>(),
            "admissible_rate": exch.admissible_rate,
            "collisions": exch.collisions,
        },
        "reversibility": { "trials": cfg.trials, "recovered": recovered, "rate": reversal_rate, "exact_xi_sums": exact_sums },
        "exchangeability": exch,
        "woodbury": woodbury,
        "checks": checks,
    });
    Ok(Outcome {
        artifacts: vec![(Target::resolve(cfg, "resample.json"), json_document(cfg, &body)?)],
        summary: format!(
            "resample: n={} d={} ell={} trials={} admissible rate={} collisions={} reversed={recovered} sign-test p={p}",
            cfg.n, cfg.d, cfg.ell, cfg.trials, exch.admissible_rate, exch.collisions
        ),
    })
}

fn woodbury_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let tc = trial_config(cfg)?;
    first_point(cfg)?;
    if cfg.k_max == 0 {
        return Err(invalid("k_max must be at least 1"));
    }
    let (results, skipped) = run_woodbury(cfg, &tc, cfg.trials)?;
    let points = woodbury_points(cfg, &results);
    let mut checks = Vec::new();
    for p in &points {
        if p.z[1] >= 0.5 {
            checks.push(Check {
                criterion: 6,
                name: format!("woodbury decay at {}+{}i", p.z[0], p.z[1]),
                pass: p.decreasing_fraction >= 0.99 && p.median_decay_ratio < 0.5,
                detail: format!(
                    "{}/{} strictly decreasing, median decay ratio {}",
                    p.strictly_decreasing, p.trials, p.median_decay_ratio
                ),
            });
        }
        checks.push(Check {
            criterion: 4,
            name: "resolvent identity".into(),
            pass: p.max_identity_residual < 1e-9,
            detail: format!("max residual {:e} vs < 1e-9", p.max_identity_residual),
        });
    }
    let body = json!({ "radius": tc.radius, "skipped_without_switch": skipped, "points": points, "checks": checks });
    let first = &points[0];
    Ok(Outcome {
        artifacts: vec![(Target::resolve(cfg, "woodbury.json"), json_document(cfg, &body)?)],
        summary: format!(
            "woodbury-check: n={} trials={} (skipped {skipped}) decreasing={}/{} median decay ratio={}",
            cfg.n, cfg.trials, first.strictly_decreasing, first.trials, first.median_decay_ratio
        ),
    })
}

fn moments(cfg: &RunConfig) -> Result<Outcome, CliError> {
    check_sizes(cfg)?;
    check_samples(cfg, 1)?;
    law(cfg)?;
    if !(1..=2).contains(&cfg.p) {
        return Err(invalid(format!("moment order p={} must be 1 or 2", cfg.p)));
    }
    let z = first_point(cfg)?;
    let reports: Vec<MomentReport> = cfg
        .sizes
        .iter()
        .map(|&n| sc_moment_estimate(n, cfg.d, cfg.ell, z, cfg.p, cfg.samples, cfg.seed).map_err(runtime))
        .collect::<Result<_, _>>()?;
    let xs: Vec<f64> = cfg.sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.ratio.ln()).collect();
    let fit = linear_fit(&xs, &ys).map_err(runtime)?;
    let checks = vec![Check {
        criterion: 10,
        name: "self-consistent moment ratio".into(),
        pass: fit.slope.abs() <= 0.2,
        detail: format!("log-ratio slope {} vs within +-0.2", fit.slope),
    }];
    #[derive(Serialize)]
    struct Row {
        n: usize,
        lhs: f64,
        rhs: f64,
        ratio: f64,
        mean_abs_m_minus_x: f64,
    }
    let rows: Vec<Row> = reports
        .iter()
        .map(|r| Row {
            n: r.n,
            lhs: r.lhs,
            rhs: r.rhs,
            ratio: r.ratio,
            mean_abs_m_minus_x: r.samples.iter().map(|s| s.abs_m_minus_x).sum::<f64>() / r.samples.len() as f64,
        })
        .collect();
    let body = json!({ "z": [z.e(), z.eta()], "p": cfg.p, "sizes": rows, "fit": fit, "checks": checks });
    Ok(Outcome {
        artifacts: vec![(Target::resolve(cfg, "moments.json"), json_document(cfg, &body)?)],
        summary: format!(
            "moments: sizes={:?} samples={} z={z} p={} ratios={:?} log-ratio slope={}",
            cfg.sizes,
            cfg.samples,
            cfg.p,
            reports.iter().map(|r| r.ratio).collect::<Vec<_>>(),
            fit.slope
        ),
    })
}

fn report(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut files = Vec::new();
    let mut checks: Vec<Check> = Vec::new();
    for path in &cfg.inputs {
        let bytes = std::fs::read(path).map_err(|e| runtime(format!("reading {path}: {e}")))?;
        if path.ends_with(".json") {
            let doc: serde_json::Value =
                serde_json::from_slice(&bytes).map_err(|e| invalid(format!("{path}: {e}")))?;
            if let Some(list) = doc.get("checks") {
                let parsed: Vec<Check> =
                    serde_json::from_value(list.clone()).map_err(|e| invalid(format!("{path}: checks: {e}")))?;
                checks.extend(parsed);
            }
        } else {
            files.push(parse_report_csv(&bytes).map_err(|e| invalid(format!("{path}: {e}")))?);
        }
    }
    let rep = build_report(&files, &checks, &Bands::default());
    let body = json!({
        "inputs": cfg.inputs,
        "bands": Bands::default(),
        "criteria": rep.criteria,
        "fits": rep.fits,
        "max_rigidity": rep.max_rigidity,
        "plots": rep.plots.iter().map(|p| p.file_name()).collect::<Vec<_>>(),
    });
    let json_bytes = json_document(cfg, &body)?;
    let mut artifacts = Vec::new();
    match Target::resolve(cfg, "report") {
        Target::Stdout => artifacts.push((Target::Stdout, json_bytes)),
        Target::File(dir) => {
            std::fs::create_dir_all(&dir).map_err(|e| runtime(format!("creating {}: {e}", dir.display())))?;
            artifacts.push((Target::File(dir.join("report.json")), json_bytes));
            for p in &rep.plots {
                artifacts.push((Target::File(dir.join(p.file_name())), p.to_text().into_bytes()));
            }
            if !rep.plots.is_empty() {
                artifacts.push((Target::File(dir.join("plot.gp")), gnuplot_script(&rep.plots).into_bytes()));
            }
        }
    }
    let table = criteria_table(&rep);
    let passed = rep.criteria.iter().filter(|c| c.pass).count();
    let mut summary = format!(
        "report: inputs={} criteria={} passed={passed} max_r={}",
        cfg.inputs.len(),
        rep.criteria.len(),
        rep.max_rigidity.map_or_else(|| "n/a".into(), |m| m.to_string())
    );
    if !table.is_empty() {
        summary.push('\n');
        summary.push_str(table.trim_end());
    }
    Ok(Outcome { artifacts, summary })
}

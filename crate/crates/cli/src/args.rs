//! Command-line surface. Every flag is kept as text and funnelled through
//! `RunConfig::apply`, so flags and config files share one validation path.

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "regraph", version, about = "Spectral experiments on random regular graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a uniform d-regular graph and write it in regraph v1 format.
    Sample(Opts),
    /// Eigenvalues of sampled graphs, one row per eigenvalue.
    Spectrum(Opts),
    /// Kesten-McKay classical locations gamma_2..gamma_n.
    Gamma(Opts),
    /// Green's function diagnostics of one graph at each spectral parameter.
    Greens(Opts),
    /// Normalized eigenvalue deviations across sizes.
    Rigidity(Opts),
    /// Extreme nontrivial eigenvalues across sizes.
    EdgeScan(Opts),
    /// Deviation of the Stieltjes transform from the Kesten-McKay transform.
    StieltjesScan(Opts),
    /// Local resampling trials: admissibility, reversibility and exchangeability.
    Resample(Opts),
    /// Truncation error of the Woodbury expansion of the switched resolvent.
    WoodburyCheck(Opts),
    /// Moments of the self-consistent equation residual across sizes.
    Moments(Opts),
    /// Aggregate CSV and JSON outputs into fits, plot data and a pass/fail table.
    Report(Opts),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Spectrum(_) => "spectrum",
            Command::Gamma(_) => "gamma",
            Command::Greens(_) => "greens",
            Command::Rigidity(_) => "rigidity",
            Command::EdgeScan(_) => "edge-scan",
            Command::StieltjesScan(_) => "stieltjes-scan",
            Command::Resample(_) => "resample",
            Command::WoodburyCheck(_) => "woodbury-check",
            Command::Moments(_) => "moments",
            Command::Report(_) => "report",
        }
    }

    pub fn opts(&self) -> &Opts {
        match self {
            Command::Sample(o)
            | Command::Spectrum(o)
            | Command::Gamma(o)
            | Command::Greens(o)
            | Command::Rigidity(o)
            | Command::EdgeScan(o)
            | Command::StieltjesScan(o)
            | Command::Resample(o)
            | Command::WoodburyCheck(o)
            | Command::Moments(o)
            | Command::Report(o) => o,
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct Opts {
    /// Flat key=value config file; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<String>,
    /// Number of vertices.
    #[arg(long)]
    pub n: Option<String>,
    /// Degree.
    #[arg(long)]
    pub d: Option<String>,
    /// Ball radius for resampling and tree depth for the self-consistent equation.
    #[arg(long)]
    pub ell: Option<String>,
    /// Small exponent controlling radii and the control parameter.
    #[arg(long)]
    pub c: Option<String>,
    /// Spectral-domain exponent.
    #[arg(long)]
    pub a: Option<String>,
    /// Excess cap for the neighbourhood census.
    #[arg(long)]
    pub omega_d: Option<String>,
    /// Indicator radius, or "auto".
    #[arg(long)]
    pub radius: Option<String>,
    /// Spectral parameters as E:eta[,E:eta...].
    #[arg(long)]
    pub z: Option<String>,
    /// Evenly spaced spectral parameters as e_min:e_max:count:eta.
    #[arg(long)]
    pub grid: Option<String>,
    /// Graphs per size.
    #[arg(long)]
    pub samples: Option<String>,
    /// Resampling trials.
    #[arg(long)]
    pub trials: Option<String>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<String>,
    /// Ascending sizes, comma separated.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Moment order (1 or 2).
    #[arg(long)]
    pub p: Option<String>,
    /// Highest Woodbury order.
    #[arg(long)]
    pub k_max: Option<String>,
    /// Exchangeability statistic: lambda2, triangles, m_i or constant.
    #[arg(long)]
    pub statistic: Option<String>,
    /// Partner sampler: uniform, aligned or aligned:KEEP.
    #[arg(long)]
    pub sampler: Option<String>,
    /// Power of log N in the error parameters.
    #[arg(long)]
    pub log_power: Option<String>,
    /// Exponent r in the error parameters.
    #[arg(long)]
    pub r_frac: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub threads: Option<String>,
    /// Run the rigidity pipeline with gamma in place of the eigenvalues.
    #[arg(long)]
    pub self_test: bool,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Output path; "-" writes to stdout.
    #[arg(long, short)]
    pub output: Option<String>,
    /// Input files.
    #[arg(value_name = "INPUT")]
    pub inputs: Vec<String>,
}

impl Opts {
    /// Explicitly given flags as config pairs.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let text = [
            ("n", &self.n),
            ("d", &self.d),
            ("ell", &self.ell),
            ("c", &self.c),
            ("a", &self.a),
            ("omega_d", &self.omega_d),
            ("radius", &self.radius),
            ("z", &self.z),
            ("grid", &self.grid),
            ("samples", &self.samples),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("sizes", &self.sizes),
            ("p", &self.p),
            ("k_max", &self.k_max),
            ("statistic", &self.statistic),
            ("sampler", &self.sampler),
            ("log_power", &self.log_power),
            ("r_frac", &self.r_frac),
            ("threads", &self.threads),
            ("format", &self.format),
            ("output", &self.output),
        ];
        let mut out: Vec<(&'static str, String)> =
            text.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k, v))).collect();
        if self.self_test {
            out.push(("self_test", "true".into()));
        }
        if !self.inputs.is_empty() {
            out.push(("inputs", self.inputs.join(",")));
        }
        out
    }
}

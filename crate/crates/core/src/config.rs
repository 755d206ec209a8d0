//! Run configuration: a flat `key=value` text format, defaults, and the header
//! serialization written at the top of every output file.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::km::SpectralPoint;

/// Largest config file the parser accepts, in bytes.
pub const MAX_CONFIG_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("config exceeds {MAX_CONFIG_BYTES} bytes")]
    TooLarge,
    #[error("config is not valid UTF-8")]
    Utf8,
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("line {line}: invalid key {key:?}")]
    Key { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("unknown key {0:?}")]
    Unknown(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
}

/// Raw `key=value` pairs. Blank lines and lines starting with `#` are skipped;
/// whitespace around keys and values is trimmed.
pub fn parse_pairs(input: &[u8]) -> Result<BTreeMap<String, String>, ConfigError> {
    if input.len() > MAX_CONFIG_BYTES {
        return Err(ConfigError::TooLarge);
    }
    let text = std::str::from_utf8(input).map_err(|_| ConfigError::Utf8)?;
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        let valid = !key.is_empty()
            && key.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
        if !valid {
            return Err(ConfigError::Key { line, key: key.to_string() });
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(ConfigError::Duplicate { line, key: key.to_string() });
        }
    }
    Ok(out)
}

/// Output encoding for tabular subcommands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every parameter a run can depend on. Precedence is flags > file > defaults.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub n: usize,
    pub d: usize,
    pub ell: usize,
    /// Small constant controlling radii and the control parameter.
    pub c: f64,
    /// Spectral-domain constant.
    pub a: f64,
    /// Excess cap of the typical-neighbourhood census.
    pub omega_d: usize,
    /// Indicator radius; derived from `(n, d, c)` when absent.
    pub radius: Option<usize>,
    pub z: Vec<SpectralPoint>,
    pub samples: usize,
    pub trials: usize,
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub p: u32,
    pub k_max: usize,
    pub statistic: String,
    pub sampler: String,
    pub log_power: f64,
    pub r_frac: f64,
    pub threads: usize,
    pub self_test: bool,
    pub format: Format,
    pub output: Option<String>,
    pub inputs: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: String::new(),
            n: 1000,
            d: 3,
            ell: 1,
            c: 0.1,
            a: 0.3,
            omega_d: 1,
            radius: None,
            z: vec![SpectralPoint::new(0.5, 1.0).expect("valid default")],
            samples: 100,
            trials: 1000,
            seed: 0,
            sizes: vec![500, 1000, 2000],
            p: 1,
            k_max: 4,
            statistic: "lambda2".into(),
            sampler: "uniform".into(),
            log_power: 1.0,
            r_frac: 0.5,
            threads: 0,
            self_test: false,
            format: Format::Csv,
            output: None,
            inputs: Vec::new(),
        }
    }
}

/// Keys understood by [`RunConfig::apply`], in header order.
pub const KEYS: &[&str] = &[
    "subcommand", "n", "d", "ell", "c", "a", "omega_d", "radius", "z", "grid", "samples", "trials",
    "seed", "sizes", "p", "k_max", "statistic", "sampler", "log_power", "r_frac", "threads",
    "self_test", "format", "output", "inputs",
];

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.into(), value: value.into(), reason: reason.into() }
}

fn int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| bad(key, value, "expected a non-negative integer"))
}

fn real(key: &str, value: &str) -> Result<f64, ConfigError> {
    let x: f64 = value.parse().map_err(|_| bad(key, value, "expected a number"))?;
    if !x.is_finite() {
        return Err(bad(key, value, "must be finite"));
    }
    Ok(x)
}

fn list<T>(key: &str, value: &str, item: impl Fn(&str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|s| item(s.trim())).collect::<Result<_, _>>().map_err(|e| match e {
        ConfigError::Value { reason, .. } => bad(key, value, reason),
        other => other,
    })
}

fn point(key: &str, value: &str) -> Result<SpectralPoint, ConfigError> {
    let (e, eta) = value.split_once(':').ok_or_else(|| bad(key, value, "expected E:eta"))?;
    SpectralPoint::new(real(key, e)?, real(key, eta)?).map_err(|e| bad(key, value, e.to_string()))
}

/// `e_min:e_max:count:eta`, `count` evenly spaced energies.
fn grid(key: &str, value: &str) -> Result<Vec<SpectralPoint>, ConfigError> {
    let parts: Vec<&str> = value.split(':').collect();
    let [lo, hi, count, eta] = parts[..] else {
        return Err(bad(key, value, "expected e_min:e_max:count:eta"));
    };
    let (lo, hi, eta) = (real(key, lo)?, real(key, hi)?, real(key, eta)?);
    let count: usize = int(key, count)?;
    if count == 0 || count > 100_000 || hi < lo {
        return Err(bad(key, value, "need 1 <= count <= 100000 and e_min <= e_max"));
    }
    (0..count)
        .map(|k| {
            let e = if count == 1 { lo } else { lo + (hi - lo) * k as f64 / (count - 1) as f64 };
            SpectralPoint::new(e, eta).map_err(|err| bad(key, value, err.to_string()))
        })
        .collect()
}

fn format_point(z: &SpectralPoint) -> String {
    format!("{}:{}", z.e(), z.eta())
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "subcommand" => self.subcommand = value.to_string(),
            "n" => self.n = int(key, value)?,
            "d" => self.d = int(key, value)?,
            "ell" => self.ell = int(key, value)?,
            "c" => self.c = real(key, value)?,
            "a" => self.a = real(key, value)?,
            "omega_d" => self.omega_d = int(key, value)?,
            "radius" => {
                self.radius = if value.is_empty() || value == "auto" { None } else { Some(int(key, value)?) }
            }
            "z" => self.z = list(key, value, |s| point(key, s))?,
            "grid" => self.z = grid(key, value)?,
            "samples" => self.samples = int(key, value)?,
            "trials" => self.trials = int(key, value)?,
            "seed" => self.seed = int(key, value)?,
            "sizes" => self.sizes = list(key, value, |s| int(key, s))?,
            "p" => self.p = int(key, value)?,
            "k_max" => self.k_max = int(key, value)?,
            "statistic" => self.statistic = value.to_string(),
            "sampler" => self.sampler = value.to_string(),
            "log_power" => self.log_power = real(key, value)?,
            "r_frac" => self.r_frac = real(key, value)?,
            "threads" => self.threads = int(key, value)?,
            "self_test" => {
                self.self_test = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad(key, value, "expected true or false")),
                }
            }
            "format" => {
                self.format = match value {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return Err(bad(key, value, "expected csv or json")),
                }
            }
            "output" => self.output = (!value.is_empty()).then(|| value.to_string()),
            "inputs" => self.inputs = list(key, value, |s| Ok(s.to_string()))?,
            other => return Err(ConfigError::Unknown(other.to_string())),
        }
        Ok(())
    }

    pub fn apply_all<'a, I>(&mut self, pairs: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        pairs.into_iter().try_for_each(|(k, v)| self.apply(k, v))
    }

    /// Defaults overlaid with a parsed config file.
    pub fn from_text(input: &[u8]) -> Result<Self, ConfigError> {
        let pairs = parse_pairs(input)?;
        let mut cfg = Self::default();
        cfg.apply_all(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        Ok(cfg)
    }

    /// Every key in canonical text form. Floats print in shortest round-trip form.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("subcommand", self.subcommand.clone()),
            ("n", self.n.to_string()),
            ("d", self.d.to_string()),
            ("ell", self.ell.to_string()),
            ("c", self.c.to_string()),
            ("a", self.a.to_string()),
            ("omega_d", self.omega_d.to_string()),
            ("radius", self.radius.map_or_else(|| "auto".into(), |r| r.to_string())),
            ("z", join(&self.z, format_point)),
            ("samples", self.samples.to_string()),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            ("sizes", join(&self.sizes, |s| s.to_string())),
            ("p", self.p.to_string()),
            ("k_max", self.k_max.to_string()),
            ("statistic", self.statistic.clone()),
            ("sampler", self.sampler.clone()),
            ("log_power", self.log_power.to_string()),
            ("r_frac", self.r_frac.to_string()),
            ("threads", self.threads.to_string()),
            ("self_test", self.self_test.to_string()),
            ("format", match self.format { Format::Csv => "csv", Format::Json => "json" }.into()),
            ("output", self.output.clone().unwrap_or_default()),
            ("inputs", self.inputs.join(",")),
        ]
    }

    /// Config as `key=value` lines, each prefixed with `prefix`.
    pub fn header(&self, prefix: &str) -> String {
        let mut out = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(out, "{prefix}{k}={v}");
        }
        out
    }

    /// Config as a JSON object of strings, in header order.
    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .to_pairs()
            .into_iter()
            .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
            .collect();
        serde_json::Value::Object(map)
    }
}

//! Output assembly and atomic persistence.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use regraph::config::RunConfig;
use serde::Serialize;

use crate::error::CliError;

/// Where an artifact goes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Stdout,
    File(PathBuf),
}

impl Target {
    /// `output` from the config, else `default`.
    pub fn resolve(cfg: &RunConfig, default: &str) -> Self {
        match cfg.output.as_deref() {
            Some("-") => Target::Stdout,
            Some(path) => Target::File(PathBuf::from(path)),
            None => Target::File(PathBuf::from(default)),
        }
    }
}

/// Writes `contents` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Runtime(format!("writing {}: {e}", path.display()));
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn emit(target: &Target, contents: &[u8]) -> Result<(), CliError> {
    match target {
        Target::Stdout => std::io::stdout()
            .write_all(contents)
            .map_err(|e| CliError::Runtime(format!("writing stdout: {e}"))),
        Target::File(path) => write_atomic(path, contents),
    }
}

/// CSV text with the config as `# key=value` lines ahead of the column header.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(cfg: &RunConfig, columns: &[&str]) -> Self {
        let mut text = cfg.header("# ");
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    /// Appends one row. `Display` of `f64` is the shortest round-trip form.
    pub fn row(&mut self, fields: &[&dyn Display]) {
        let cells: Vec<String> = fields.iter().map(|f| f.to_string()).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Pretty JSON with the config under `"config"` and `body` merged at top level.
pub fn json_document<T: Serialize>(cfg: &RunConfig, body: &T) -> Result<Vec<u8>, CliError> {
    let mut doc = serde_json::Map::new();
    doc.insert("config".into(), cfg.to_json());
    let value = serde_json::to_value(body).map_err(|e| CliError::Runtime(format!("serializing output: {e}")))?;
    match value {
        serde_json::Value::Object(map) => doc.extend(map),
        other => {
            doc.insert("result".into(), other);
        }
    }
    let mut bytes = serde_json::to_vec_pretty(&serde_json::Value::Object(doc))
        .map_err(|e| CliError::Runtime(format!("serializing output: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn csv_carries_config_header() {
        let cfg = RunConfig::default();
        let mut csv = Csv::new(&cfg, &["i", "gamma_i"]);
        csv.row(&[&2, &0.1_f64]);
        let text = String::from_utf8(csv.into_bytes()).unwrap();
        assert!(text.starts_with("# subcommand="));
        assert!(text.ends_with("i,gamma_i\n2,0.1\n"));
        let parsed = regraph::report::parse_report_csv(text.as_bytes()).unwrap();
        assert_eq!(parsed.config.len(), cfg.to_pairs().len());
    }
}

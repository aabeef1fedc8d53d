//! Batch experiments behind the command line: a registry of named experiments,
//! a declarative config, deterministic tables and run manifests.

mod commands;
mod table;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::disorder::DisorderLaw;
use crate::lattice::{DisorderKind, DriftMeasure};
use crate::noise::ProfileSpec;

pub use table::{Cell, Table};

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Invalid or inconsistent configuration (exit code 2).
    #[error("config error: {0}")]
    Config(String),
    /// A computation failed after validation.
    #[error("{0}")]
    Run(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ExperimentError {
    pub fn config(e: impl std::fmt::Display) -> Self {
        Self::Config(e.to_string())
    }

    pub fn run(e: impl std::fmt::Display) -> Self {
        Self::Run(e.to_string())
    }

    /// 2 for configuration and I/O problems, 1 for a failed computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Run(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(format!("unknown format {s:?} (expected csv or json)")),
        }
    }
}

/// Everything an experiment reads; unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: String,
    #[serde(default)]
    pub seed: u64,
    pub replicas: Option<usize>,
    pub trials: Option<usize>,
    pub law: Option<DisorderLaw>,
    pub kind: Option<DisorderKind>,
    pub d: Option<usize>,
    pub n: Option<Vec<usize>>,
    pub r: Option<usize>,
    pub beta: Option<Vec<f64>>,
    /// `(beta1, beta2)` pairs for comparisons between two temperatures.
    pub beta_pairs: Option<Vec<[f64; 2]>>,
    pub beta_minus: Option<f64>,
    pub beta_plus: Option<f64>,
    pub alpha: Option<DriftMeasure>,
    pub alpha_prime: Option<DriftMeasure>,
    pub lambda: Option<Vec<f64>>,
    pub rho: Option<ProfileSpec>,
    /// Directions `x` for point-to-point and rate-function runs.
    pub x: Option<Vec<Vec<f64>>>,
    pub functions: Option<Vec<String>>,
    pub tilts: Option<Vec<f64>>,
    pub thetas: Option<Vec<f64>>,
    pub tails: Option<Vec<f64>>,
    pub grid: Option<usize>,
    pub factor: Option<usize>,
    pub tolerance: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub dump_env: Option<PathBuf>,
    pub load_env: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(ExperimentError::config)
        } else {
            toml::from_str(text).map_err(ExperimentError::config)
        }
    }

    pub fn load(path: &Path) -> Result<toml::Table> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.into(), source })?;
        if text.trim_start().starts_with('{') {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(ExperimentError::config)?;
            toml::Table::try_from(v).map_err(ExperimentError::config)
        } else {
            text.parse::<toml::Table>().map_err(ExperimentError::config)
        }
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        table.try_into().map_err(ExperimentError::config)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn law(&self) -> Result<DisorderLaw> {
        match &self.law {
            Some(l) => Ok(l.clone()),
            None => DisorderLaw::two_point(0.0, 1.0, 0.5).map_err(ExperimentError::config),
        }
    }

    pub fn kind(&self) -> DisorderKind {
        self.kind.unwrap_or(DisorderKind::Bond)
    }

    pub fn dim(&self) -> Result<usize> {
        let d = self.d.unwrap_or(1);
        if !(1..=crate::lattice::MAX_DIM).contains(&d) {
            return Err(ExperimentError::Config(format!("d = {d} is outside 1..={}", crate::lattice::MAX_DIM)));
        }
        Ok(d)
    }

    pub fn ns(&self) -> Result<Vec<usize>> {
        match &self.n {
            Some(v) if !v.is_empty() => Ok(v.clone()),
            _ => Err(ExperimentError::Config("missing n".into())),
        }
    }

    pub fn betas(&self) -> Result<Vec<f64>> {
        match &self.beta {
            Some(v) if !v.is_empty() => {
                if let Some(b) = v.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
                    return Err(ExperimentError::Config(format!("beta = {b} must be finite and nonnegative")));
                }
                Ok(v.clone())
            }
            _ => Err(ExperimentError::Config("missing beta".into())),
        }
    }

    pub fn replicas(&self, default: usize) -> usize {
        self.replicas.unwrap_or(default)
    }

    pub fn alpha(&self, dim: usize) -> Result<DriftMeasure> {
        match &self.alpha {
            Some(a) if a.dim() != dim => {
                Err(ExperimentError::Config(format!("alpha has dimension {}, d = {dim}", a.dim())))
            }
            Some(a) => Ok(a.clone()),
            None => Ok(DriftMeasure::uniform(dim)),
        }
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }
}

/// Result of one experiment: a table plus the verdict of its built-in assertions.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub passed: bool,
    pub notes: Vec<String>,
}

/// A named batch experiment.
pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    /// Columns of the result table after the leading `seed` and `n`.
    fn columns(&self) -> &'static [&'static str];
    /// Checks the config against the experiment's preconditions without computing anything.
    fn validate(&self, config: &ExperimentConfig) -> Result<()>;
    fn run(&self, config: &ExperimentConfig) -> Result<Outcome>;
}

/// Experiments selectable by name.
#[derive(Default)]
pub struct Registry {
    entries: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl Registry {
    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.entries.insert(e.name(), e);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Experiment> {
        self.entries.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Experiment> {
        self.entries.values().map(|b| b.as_ref())
    }
}

/// The built-in experiments.
pub fn registry() -> Registry {
    let mut r = Registry::default();
    commands::register_all(&mut r);
    r
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub passed: bool,
    pub rows: usize,
    pub notes: Vec<String>,
    pub wall_time_ms: u128,
    pub config: ExperimentConfig,
}

/// Validates, runs and (when `out` is set) writes results and `<out>.manifest.json`.
pub fn run(config: &ExperimentConfig) -> Result<(Outcome, Manifest)> {
    let reg = registry();
    let exp = reg
        .get(&config.command)
        .ok_or_else(|| ExperimentError::Config(format!("unknown command {:?}", config.command)))?;
    exp.validate(config)?;
    let start = Instant::now();
    let outcome = exp.run(config)?;
    let manifest = Manifest {
        command: config.command.clone(),
        config_hash: config.hash(),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        passed: outcome.passed,
        rows: outcome.table.len(),
        notes: outcome.notes.clone(),
        wall_time_ms: start.elapsed().as_millis(),
        config: config.clone(),
    };
    if let Some(out) = &config.out {
        write_output(out, &outcome.table, config.format())?;
        let path = manifest_path(out);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json + "\n").map_err(|source| ExperimentError::Io { path, source })?;
    }
    Ok((outcome, manifest))
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn write_output(path: &Path, table: &Table, format: Format) -> Result<()> {
    let bytes = match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| ExperimentError::Io { path: dir.into(), source })?;
    }
    fs::write(path, bytes).map_err(|source| ExperimentError::Io { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse("command = \"rho0\"\nbogus = 1\n").is_err());
        let c = ExperimentConfig::parse("command = \"rho0\"\nbeta = [0.5]\n").unwrap();
        assert_eq!(c.betas().unwrap(), vec![0.5]);
    }

    #[test]
    fn json_and_toml_agree() {
        let a = ExperimentConfig::parse("command = \"lorenz\"\nseed = 3\nbeta = [1.0]\n").unwrap();
        let b = ExperimentConfig::parse(r#"{"command": "lorenz", "seed": 3, "beta": [1.0]}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn registry_has_every_command() {
        let names: Vec<_> = registry().names().collect();
        for c in [
            "env-gen",
            "partition",
            "rho0",
            "lorenz",
            "noise-check",
            "coupling-check",
            "cx-compare",
            "drift-scan",
            "clt",
            "free-energy",
            "rate-function",
            "cauchy",
        ] {
            assert!(names.contains(&c), "{c}");
        }
    }
}

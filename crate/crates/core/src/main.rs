use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgMatches, Args, Command, FromArgMatches};
use polymer_lab::experiments::{self, Experiment, ExperimentConfig, ExperimentError, Format};

/// Flags shared by every subcommand; each one overrides the matching key of `--config`.
#[derive(Debug, Args)]
struct Common {
    /// TOML or JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Result file; without it the table goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    /// Lattice dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Horizons, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Ball radius of a sampled field.
    #[arg(long)]
    r: Option<usize>,
    /// Inverse temperatures, comma separated.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    beta_plus: Option<f64>,
    /// `site` or `bond`.
    #[arg(long)]
    kind: Option<String>,
    /// Disorder law as an inline TOML table or JSON object.
    #[arg(long)]
    law: Option<String>,
    /// Drift as a list of 2d weights or a table keyed by `+e1`, `-e1`, ...
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    alpha_prime: Option<String>,
    /// Retention probability: a number, or `{per_direction = {...}}`.
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    dump_env: Option<PathBuf>,
    #[arg(long)]
    load_env: Option<PathBuf>,
    /// Any other config key, as `key=value` with a TOML value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn cli() -> Command {
    let reg = experiments::registry();
    let mut cmd = Command::new("polymer-lab")
        .about("Numerical lab for directed polymers in random environment")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .after_help("Exit codes: 0 when every built-in assertion passes, 1 when one fails, 2 on config or I/O errors.");
    for e in reg.iter() {
        cmd = cmd.subcommand(Common::augment_args(Command::new(e.name())).about(e.about()).after_help(columns_help(e)));
    }
    cmd
}

fn columns_help(e: &dyn Experiment) -> String {
    format!("Output columns: seed, n, {}", e.columns().join(", "))
}

/// Parses a TOML value; a bare word becomes a string.
fn parse_value(s: &str) -> toml::Value {
    if let Ok(mut t) = toml::from_str::<toml::Table>(&format!("v = {s}")) {
        return t.remove("v").unwrap();
    }
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(s) {
        if let Ok(v) = toml::Value::try_from(v) {
            return v;
        }
    }
    toml::Value::String(s.to_string())
}

/// A value that may also be written as a bare comma-separated list of numbers.
fn parse_list(s: &str) -> toml::Value {
    match parse_value(s) {
        toml::Value::String(_) => toml::Value::Array(s.split(',').map(|p| parse_value(p.trim())).collect()),
        v => v,
    }
}

fn merge(name: &str, c: Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut t = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => toml::Table::new(),
    };
    match t.get("command").and_then(|v| v.as_str()) {
        Some(other) if other != name => {
            return Err(ExperimentError::Config(format!("config is for {other:?}, not {name:?}")));
        }
        _ => {}
    }
    t.insert("command".into(), name.into());
    let mut set = |k: &str, v: Option<toml::Value>| {
        if let Some(v) = v {
            t.insert(k.into(), v);
        }
    };
    let int = |x: u64| toml::Value::Integer(x as i64);
    let path = |p: &PathBuf| toml::Value::String(p.display().to_string());
    set("seed", c.seed.map(int));
    set("replicas", c.replicas.map(|x| int(x as u64)));
    set("trials", c.trials.map(|x| int(x as u64)));
    set("out", c.out.as_ref().map(path));
    set("format", c.format.map(|f| toml::Value::String(if f == Format::Json { "json" } else { "csv" }.into())));
    set("d", c.d.map(|x| int(x as u64)));
    set("n", c.n.map(|v| toml::Value::Array(v.into_iter().map(|x| int(x as u64)).collect())));
    set("r", c.r.map(|x| int(x as u64)));
    set("beta", c.beta.map(|v| toml::Value::Array(v.into_iter().map(toml::Value::Float).collect())));
    set("beta_plus", c.beta_plus.map(toml::Value::Float));
    set("kind", c.kind.map(toml::Value::String));
    set("law", c.law.as_deref().map(parse_value));
    set("alpha", c.alpha.as_deref().map(parse_list));
    set("alpha_prime", c.alpha_prime.as_deref().map(parse_list));
    set(
        "rho",
        c.rho.as_deref().map(|s| match parse_value(s) {
            v @ (toml::Value::Float(_) | toml::Value::Integer(_)) => {
                let mut m = toml::Table::new();
                m.insert(
                    "scalar".into(),
                    toml::Value::Float(v.as_float().or(v.as_integer().map(|i| i as f64)).unwrap()),
                );
                toml::Value::Table(m)
            }
            v => v,
        }),
    );
    set("tolerance", c.tolerance.map(toml::Value::Float));
    set("dump_env", c.dump_env.as_ref().map(path));
    set("load_env", c.load_env.as_ref().map(path));
    match (c.beta1, c.beta2) {
        (Some(a), Some(b)) => {
            set("beta_pairs", Some(toml::Value::Array(vec![toml::Value::Array(vec![a.into(), b.into()])])));
        }
        (None, None) => {}
        _ => return Err(ExperimentError::Config("--beta1 and --beta2 go together".into())),
    }
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ExperimentError::Config(format!("--set expects key=value, got {kv:?}")))?;
        t.insert(k.trim().into(), parse_value(v.trim()));
    }
    ExperimentConfig::from_table(t)
}

fn render(table: &experiments::Table, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    }
}

/// The Lorenz curves of both temperatures of every pair, written next to a rho0 run.
fn lorenz_companion(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let mut betas: Vec<f64> = Vec::new();
    for p in cfg.beta_pairs.iter().flatten() {
        betas.extend(p);
    }
    if betas.is_empty() {
        betas = cfg.beta.clone().unwrap_or_default();
    }
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let lc = ExperimentConfig {
        command: "lorenz".into(),
        seed: cfg.seed,
        law: cfg.law.clone(),
        beta: Some(betas),
        grid: cfg.grid,
        format: cfg.format,
        out: cfg.out.as_ref().map(|o| {
            let mut s = o.as_os_str().to_owned();
            s.push(".lorenz");
            PathBuf::from(s)
        }),
        ..Default::default()
    };
    let (outcome, _) = experiments::run(&lc)?;
    if lc.out.is_none() {
        let mut stdout = std::io::stdout().lock();
        let _ = stdout.write_all(b"\n");
        let _ = stdout.write_all(&render(&outcome.table, lc.format()));
    }
    Ok(())
}

fn execute(name: &str, m: &ArgMatches) -> Result<bool, ExperimentError> {
    let common = Common::from_arg_matches(m).map_err(ExperimentError::config)?;
    let cfg = merge(name, common)?;
    eprintln!("# config {}", cfg.hash());
    for line in toml::to_string(&cfg).map_err(ExperimentError::config)?.lines() {
        eprintln!("#   {line}");
    }
    let (outcome, manifest) = experiments::run(&cfg)?;
    if cfg.out.is_none() {
        let _ = std::io::stdout().lock().write_all(&render(&outcome.table, cfg.format()));
    }
    if name == "rho0" {
        lorenz_companion(&cfg)?;
    }
    for note in &outcome.notes {
        eprintln!("# note: {note}");
    }
    eprintln!(
        "# {} rows, {} ms, {}",
        manifest.rows,
        manifest.wall_time_ms,
        if outcome.passed { "PASS" } else { "FAIL" }
    );
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand required");
    match execute(name, sub) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use crate::asymptotics::{self, CltOptions, McSetup};
use crate::convex_order::{self, CxSetup};
use crate::coupling::{self, BondEnv, DriftScanSetup};
use crate::disorder::{DisorderLaw, LawKind};
use crate::lattice::{self, io, DisorderKind, DriftMeasure, Environment, EnvironmentField, LazyEnvironment};
use crate::noise::{self, ResampleProfile};
use crate::polymer::{self, forward_dp, Boltzmann, DpOptions};
use crate::rng::{replica_seed, stream, CounterRng, SeqRng};

use super::{Cell, Experiment, ExperimentConfig, ExperimentError, Outcome, Registry, Result, Table};

pub(super) fn register_all(r: &mut Registry) {
    r.register(Box::new(EnvGen));
    r.register(Box::new(Partition));
    r.register(Box::new(Rho0));
    r.register(Box::new(Lorenz));
    r.register(Box::new(NoiseCheck));
    r.register(Box::new(CouplingCheck));
    r.register(Box::new(CxCompare));
    r.register(Box::new(DriftScan));
    r.register(Box::new(Clt));
    r.register(Box::new(FreeEnergy));
    r.register(Box::new(RateFunction));
    r.register(Box::new(Cauchy));
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";")
}

fn join_i(v: &[i32]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Seed of an auxiliary generator derived from the master seed.
fn aux_seed(seed: u64, index: u64) -> u64 {
    CounterRng::new(seed, stream::AUX).bits(index)
}

fn random_drift(rng: &mut SeqRng, dim: usize) -> DriftMeasure {
    let w: Vec<f64> = (0..lattice::num_directions(dim)).map(|_| rng.range(0.05, 1.0)).collect();
    DriftMeasure::normalized(dim, w).expect("positive weights")
}

fn min_replicas(n: usize, min: usize) -> Result<usize> {
    if n < min {
        return Err(ExperimentError::Config(format!("replicas = {n} is below the minimum {min}")));
    }
    Ok(n)
}

fn pairs(cfg: &ExperimentConfig) -> Result<Vec<(f64, f64)>> {
    let v: Vec<(f64, f64)> = match (&cfg.beta_pairs, &cfg.beta) {
        (Some(p), _) => p.iter().map(|p| (p[0], p[1])).collect(),
        (None, Some(b)) if b.len() == 2 => vec![(b[0], b[1])],
        _ => return Err(ExperimentError::Config("need beta_pairs or a beta list of length 2".into())),
    };
    if let Some((a, b)) = v.iter().find(|(a, b)| !(*a > 0.0 && a <= b && b.is_finite())) {
        return Err(ExperimentError::Config(format!("need 0 < beta1 <= beta2, got ({a}, {b})")));
    }
    if v.is_empty() {
        return Err(ExperimentError::Config("empty beta_pairs".into()));
    }
    Ok(v)
}

fn check_mgf(law: &DisorderLaw, betas: &[f64]) -> Result<()> {
    for &b in betas {
        law.log_mgf(b).map_err(ExperimentError::config)?;
    }
    Ok(())
}

/// Either the stored field named by `load_env` or the lazy environment of `seed`.
enum Env {
    Stored(EnvironmentField),
    Lazy(LazyEnvironment),
}

impl Env {
    fn open(cfg: &ExperimentConfig, law: &DisorderLaw, kind: DisorderKind, dim: usize, seed: u64) -> Result<Self> {
        match &cfg.load_env {
            Some(path) => {
                let f = io::load(path).map_err(ExperimentError::config)?;
                if f.kind() != kind || f.dim() != dim {
                    return Err(ExperimentError::Config(format!(
                        "stored environment is {} in d = {}, config asks for {} in d = {dim}",
                        f.kind().as_str(),
                        f.dim(),
                        kind.as_str()
                    )));
                }
                Ok(Self::Stored(f))
            }
            None => Ok(Self::Lazy(LazyEnvironment::new(law.clone(), kind, dim, seed))),
        }
    }

    fn get(&self) -> &dyn Environment {
        match self {
            Env::Stored(f) => f,
            Env::Lazy(l) => l,
        }
    }

    fn check_horizon(&self, n: usize) -> Result<()> {
        match self {
            Env::Stored(f) => polymer::check_window(f, n).map_err(ExperimentError::config),
            Env::Lazy(_) => Ok(()),
        }
    }
}

struct EnvGen;

impl Experiment for EnvGen {
    fn name(&self) -> &'static str {
        "env-gen"
    }

    fn about(&self) -> &'static str {
        "sample an environment field, report its moments and optionally dump it"
    }

    fn columns(&self) -> &'static [&'static str] {
        &["d", "r", "kind", "law", "coordinates", "mean", "variance", "law_mean", "law_variance", "z"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        cfg.law()?;
        cfg.dim()?;
        cfg.ns()?;
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome> {
        let law = cfg.law()?;
        let (dim, kind) = (cfg.dim()?, cfg.kind());
        let n = *cfg.ns()?.iter().max().unwrap();
        let r = cfg.r.unwrap_or(n);
        let field = EnvironmentField::sample(&law, kind, n, r, dim, cfg.seed).map_err(ExperimentError::config)?;
        if let Some(path) = &cfg.dump_env {
            io::save(&field, path).map_err(ExperimentError::run)?;
        }
        let v = field.values();
        let count = v.len() as f64;
        let mean = crate::stats::pairwise_sum(v) / count;
        let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = crate::stats::pairwise_sum(&dev) / (count - 1.0);
        let (lm, lv) = (law.mean(), law.variance());
        let z = (mean - lm) / (lv / count).sqrt();
        let mut t = Table::new(cfg.seed, self.columns());
        t.push(
            Some(n),
            vec![
                dim.into(),
                r.into(),
                kind.as_str().into(),
                law.label().into(),
                v.len().into(),
                mean.into(),
                var.into(),
                lm.into(),
                lv.into(),
                z.into(),
            ],
        );
        Ok(Outcome { table: t, passed: z.abs() <= 5.0 || !lv.is_finite(), notes: Vec::new() })
    }
}

struct Partition;

impl Experiment for Partition {
    fn name(&self) -> &'static str {
        "partition"
    }

    fn about(&self) -> &'static str {
        "exact log Z_n, log W_n and endpoint moments by the transfer-matrix recursion"
    }

    fn columns(&self) -> &'static [&'static str] {
        &["replica", "env_seed", "beta", "log_z", "log_w", "endpoint_mean_e1", "endpoint_var_e1"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        let law = cfg.law()?;
        let dim = cfg.dim()?;
        cfg.ns()?;
        check_mgf(&law, &cfg.betas()?)?;
        cfg.alpha(dim)?;
        if cfg.load_env.is_some() && cfg.replicas(1) != 1 {
            return Err(ExperimentError::Config("a stored environment allows a single replica".into()));
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome> {
        let law = cfg.law()?;
        let (dim, kind) = (cfg.dim()?, cfg.kind());
        let alpha = cfg.alpha(dim)?;
        let mut ns = cfg.ns()?;
        ns.sort_unstable();
        ns.dedup();
        let top = *ns.last().unwrap();
        let mut t = Table::new(cfg.seed, self.columns());
        let mut passed = true;
        for i in 0..cfg.replicas(1) {
            let env_seed = if i == 0 { cfg.seed } else { replica_seed(cfg.seed, i as u64) };
            let env = Env::open(cfg, &law, kind, dim, env_seed)?;
            env.check_horizon(top)?;
            for &beta in &cfg.betas()? {
                let h = Boltzmann::new(env.get(), &law, beta).map_err(ExperimentError::run)?;
                let lambda = h.lambda();
                let mut rows = Vec::new();
                forward_dp(&h, kind, &alpha, top, &DpOptions::default(), |st| {
                    if ns.binary_search(&st.t).is_ok() {
                        let law_n = st.endpoint_law();
                        let (off, m) = law_n.marginal(0);
                        let mean: f64 = m.iter().enumerate().map(|(k, p)| p * (k as i64 - off) as f64).sum();
                        let second: f64 =
                            m.iter().enumerate().map(|(k, p)| p * ((k as i64 - off) as f64).powi(2)).sum();
                        rows.push((st.t, st.log_mass(), mean, second - mean * mean));
                    }
                });
                for (n, log_w, mean, var) in rows {
                    passed &= log_w.is_finite() && (beta != 0.0 || log_w == 0.0);
                    let log_z = log_w + n as f64 * lambda;
                    t.push(
                        Some(n),
                        vec![
                            i.into(),
                            env_seed.to_string().into(),
                            beta.into(),
                            log_z.into(),
                            log_w.into(),
                            mean.into(),
                            var.into(),
                        ],
                    );
                }
            }
        }
        Ok(Outcome { table: t, passed, notes: Vec::new() })
    }
}

/// `rho_0` of a two-point law from the Bernoulli closed form, after shifting and rescaling to `{0, 1}`.
fn two_point_closed_form(law: &DisorderLaw, b1: f64, b2: f64) -> Option<f64> {
    match law.kind() {
        LawKind::TwoPoint { a, b, p } => {
            let (span, q) = if b > a { (b - a, *p) } else { (a - b, 1.0 - p) };
            convex_order::rho_bernoulli(q, b1 * span, b2 * span).ok()
        }
        _ => None,
    }
}

struct Rho0;

impl Experiment for Rho0 {
    fn name(&self) -> &'static str {
        "rho0"
    }

    fn about(&self) -> &'static str {
        "minimal retention probability rho_0(beta1, beta2) with the location of the infimum"
    }

    fn columns(&self) -> &'static [&'static str] {
        &[
            "law",
            "beta1",
            "beta2",
            "rho0",
            "inf_ratio",
            "argmin",
            "location",
            "lower_limit",
            "upper_limit",
            "closed_form",
            "abs_diff",
        ]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        let law = cfg.law()?;
        let p = pairs(cfg)?;
        check_mgf(&law, &p.iter().map(|p| p.1).collect::<Vec<_>>())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome> {
        let law = cfg.law()?;
        let tol = cfg.tolerance.unwrap_or(1e-8);
        let mut t = Table::new(cfg.seed, self.columns());
        let mut passed = true;
        for (b1, b2) in pairs(cfg)? {
            let r = convex_order::rho0(&law, b1, b2).map_err(ExperimentError::run)?;
            let closed = two_point_closed_form(&law, b1, b2);
            let diff = closed.map(|c| (c - r.rho0).abs());
            passed &= (0.0..=1.0).contains(&r.rho0) && diff.is_none_or(|d| d <= tol);
            let loc = serde_json::to_value(r.location).unwrap().as_str().unwrap().to_string();
            t.push(
                None,
                vec![
                    law.label().into(),
                    b1.into(),
                    b2.into(),
                    r.rho0.into(),
                    r.inf_ratio.into(),
                    r.argmin.into(),
                    loc.into(),
                    r.lower_limit.into(),
                    r.upper_limit.into(),
                    closed.into(),
                    diff.into(),
                ],
            );
        }
        Ok(Outcome { table: t, passed, notes: Vec::new() })
    }
}

struct Lorenz;

impl Experiment for Lorenz {
    fn name(&self) -> &'static str {
        "lorenz"
    }

    fn about(&self) -> &'static str {
        "Lorenz curve of exp(beta omega) on a uniform grid"
    }

    fn columns(&self) -> &'static [&'static str] {
        &["law", "beta", "x", "lorenz"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        check_mgf(&cfg.law()?, &cfg.betas()?)?;
        if cfg.grid.is_some_and(|g| g < 2) {
            return Err(ExperimentError::Config("grid needs at least 2 cells".into()));
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome> {
        let law = cfg.law()?;
        let g = cfg.grid.unwrap_or(100);
        let xs: Vec<f64> = (0..=g).map(|k| k as f64 / g as f64).collect();
        let mut t = Table::new(cfg.seed, self.columns());
        let mut passed = true;
        for beta in cfg.betas()? {
            let curve = convex_order::lorenz_curve(&law, beta, &xs).map_err(ExperimentError::run)?;
            let l: Vec<f64> = curve.iter().map(|c| c.1).collect();
            passed &= l[0].abs() <= 1e-12 && (l[g] - 1.0).abs() <= 1e-12;
            passed &= l.windows(2).all(|w| w[1] >= w[0] - 1e-12);
            passed &= l.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-10);
            for (x, y) in curve {
                t.push(None, vec![law.label().into(), beta.into(), x.into(), y.into()]);
            }
        }
        Ok(Outcome { table: t, passed, notes: Vec::new() })
    }
}

struct NoiseCheck;

impl Experiment for NoiseCheck {
    fn name(&self) -> &'static str {
        "noise-check"
    }

    fn about(&self) -> &'static str {
        "exact T_rho W_n against Monte Carlo resampling of one environment"
    }

    fn columns(&self) -> &'static [&'static str] {
        &["beta", "w", "exact", "mc_mean", "mc_se", "z", "replicas"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        let law = cfg.law()?;
        let dim = cfg.dim()?;
        cfg.ns()?;
        check_mgf(&law, &cfg.betas()?)?;
        cfg.alpha(dim)?;
        let spec = cfg.rho.as_ref().ok_or_else(|| ExperimentError::Config("missing rho".into()))?;
        ResampleProfile::from_spec(spec, dim).map_err(ExperimentError::config)?;
        min_replicas(cfg.replicas(1000), 2)?;
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome> {
        let law = cfg.law()?;
        let (dim, kind) = (cfg.dim()?, cfg.kind());
        let alpha = cfg.alpha(dim)?;
        let profile = ResampleProfile::from_spec(cfg.rho.as_ref().unwrap(), dim).map_err(ExperimentError::config)?;
        let replicas = cfg.replicas(1000);
        let env = Env::open(cfg, &law, kind, dim, cfg.seed)?;
        let mut t = Table::new(cfg.seed, self.columns());
        let mut passed = true;
        for n in cfg.ns()? {
            env.check_horizon(n)?;
            for beta in cfg.betas()? {
                let e = env.get();
                let w = polymer::log_martingale(
                    &Boltzmann::new(e, &law, beta).map_err(ExperimentError::run)?,
                    kind,
                    &alpha,
                    n,
                )
                .exp();
                let exact =
                    noise::noised_martingale_exact(e, &law, beta, &alpha, n, &profile).map_err(ExperimentError::run)?;
                let mc = noise::noised_martingale_mc(
                    e,
                    &law,
                    beta,
                    &alpha,
                    n,
                    &profile,
                    replicas,
                    aux_seed(cfg.seed, n as u64),
                )
                .map_err(ExperimentError::run)?;
                let z = if mc.se > 0.0 { (mc.mean - exact) / mc.se } else { 0.0 };
                passed &= mc.within(exact, 4.0) || (mc.se == 0.0 && (mc.mean - exact).abs() <= 1e-12 * exact);
                t.push(
                    Some(n),
                    vec![beta.into(), w.into(), exact.into(), mc.mean.into(), mc.se.into(), z.into(), replicas.into()],
                );
            }
        }
        Ok(Outcome { table: t, passed, notes: Vec::new() })
    }
}

struct CouplingCheck;

impl CouplingCheck {
    fn drifts(cfg: &ExperimentConfig, dim: usize, trial: usize) -> Result<(DriftMeasure, DriftMeasure)> {
        let mut rng = SeqRng::new(aux_seed(cfg.seed, trial as u64));
        let a = match &cfg.alpha {
            Some(a) => a.clone(),
            None => random_drift(&mut rng, dim),
        };
        let b = match &cfg.alpha_prime {
            Some(b) => b.clone(),
            None => random_drift(&mut rng, dim),
        };
        if a.dim() != dim || b.dim() != dim {
            return Err(ExperimentError::Config("drift dimension differs from d".into()));
        }
        Ok((a, b))
    }
}

impl Experiment for CouplingCheck {
    fn name(&self) -> &'static str {
        "coupling-check"
    }

    fn about(&self) -> &'static str {
        "both sides of the lazy-walk coupling identity by exhaustive enumeration"
    }

    fn columns(&self) -> &'static [&'static str] {
        &[
            "d",
            "trial",
            "env_seed",
            "beta",
            "alpha",
            "alpha_prime",
            "m",
            "lhs",
            "rhs",
            "abs_error",
            "rel_error",
            "terms",
        ]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        let law = cfg.law()?;
        let dim = cfg.dim()?;
        cfg.ns()?;
        check_mgf(&law, &cfg.betas()?)?;
        if cfg.kind() != DisorderKind::Bond {
            return Err(ExperimentError::Config("the coupling needs bond disorder".into()));
        }
        let (a, b) = Self::drifts(cfg, dim, 0)?;
        coupling::build_coupling_spec(&a, &b).map_err(ExperimentError::config)?;
        let top = *cfg.ns()?.iter().max().unwrap();
        let count = ((2 * dim + 1) as f64).powi(top as i32);
        if count > lattice::DEFAULT_ENUMERATION_CAP as f64 {
            return Err(ExperimentError::Config(format!("{count} lazy paths exceed the enumeration cap")));
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome> {
        let law = cfg.law()?;
        let dim = cfg.dim()?;
        let tol = cfg.tolerance.unwrap_or(1e-11);
        let trials = cfg.trials.unwrap_or(1);
        let mut t = Table::new(cfg.seed, self.columns());
        let mut passed = true;
        for trial in 0..trials {
            let env_seed = if trial == 0 { cfg.seed } else { replica_seed(cfg.seed, trial as u64) };
            let (a, b) = Self::drifts(cfg, dim, trial)?;
            let spec = coupling::build_coupling_spec(&a, &b).map_err(ExperimentError::run)?;
            let env = Env::open(cfg, &law, DisorderKind::Bond, dim, env_seed)?;
            let bond = BondEnv::new(env.get()).map_err(ExperimentError::config)?;
            for n in cfg.ns()? {
                env.check_horizon(2 * n)?;
                for beta in cfg.betas()? {
                    let c =
                        coupling::coupling_identity_check(bond, &law, beta, &spec, n).map_err(ExperimentError::run)?;
                    passed &= c.rel_error <= tol;
                    t.push(
                        Some(n),
                        vec![
                            dim.into(),
                            trial.into(),
                            env_seed.to_string().into(),
                            beta.into(),
                            join(a.weights()).into(),
                            join(b.weights()).into(),
                            spec.m.into(),
                            c.lhs.into(),
                            c.rhs.into(),
                            c.abs_error.into(),
                            c.rel_error.into(),
                            c.terms.into(),
                        ],
                    );
                }
            }
        }
        Ok(Outcome { table: t, passed, notes: Vec::new() })
    }
}

struct CxCompare;

impl Experiment for CxCompare {
    fn name(&self) -> &'static str {
        "cx-compare"
    }

    fn about(&self) -> &'static str {
        "E f(W_n^beta1) against E f(T_rho W_n^beta2) for convex f on common environments"
    }

    fn columns(&self) -> &'static [&'static str] {
        &[
            "beta1",
            "beta2",
            "rho",
            "function",
            "lhs_mean",
            "lhs_se",
            "rhs_mean",
            "rhs_se",
            "diff_mean",
            "diff_se",
            "passed",
        ]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        let law = cfg.law()?;
        let dim = cfg.dim()?;
        cfg.ns()?;
        cfg.alpha(dim)?;
        let p = pairs(cfg)?;
        check_mgf(&law, &p.iter().map(|p| p.1).collect::<Vec<_>>())?;
        min_replicas(cfg.replicas(10_000), 100)?;
        let names = self.function_names(cfg);
        convex_order::test_functions(&names.iter().map(String::as_str).collect::<Vec<_>>())
            .map_err(ExperimentError::config)?;
        match &cfg.rho {
            None => Ok(()),
            Some(noise::ProfileSpec::Scalar(r)) if (0.0..=1.0).contains(r) => Ok(()),
            Some(_) => Err(ExperimentError::Config("cx-compare takes a scalar rho in [0, 1]".into())),
        }
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome> {
        let law = cfg.law()?;
        let dim = cfg.dim()?;
        let alpha = cfg.alpha(dim)?;
        let names = self.function_names(cfg);
        let funcs = convex_order::test_functions(&names.iter().map(String::as_str).collect::<Vec<_>>())
            .map_err(ExperimentError::config)?;
        let mut t = Table::new(cfg.seed, self.columns());
        let mut passed = true;
        for n in cfg.ns()? {
            let setup = CxSetup {
                law: &law,
                kind: cfg.kind(),
                alpha: &alpha,
                n,
                replicas: cfg.replicas(10_000),
                seed: cfg.seed,
            };
            let mut cache: Vec<(f64, Vec<f64>)> = Vec::new();
            for (b1, b2) in pairs(cfg)? {
                let rho = match &cfg.rho {
                    Some(noise::ProfileSpec::Scalar(r)) => *r,
                    _ => convex_order::rho0(&law, b1, b2).map_err(ExperimentError::run)?.rho0,
                };
                if !cache.iter().any(|(b, _)| *b == b1) {
                    let s = convex_order::martingale_samples(&setup, b1).map_err(ExperimentError::run)?;
                    cache.push((b1, s));
                }
                let lhs = &cache.iter().find(|(b, _)| *b == b1).unwrap().1;
                let rhs = convex_order::noised_samples(&setup, b2, rho).map_err(ExperimentError::run)?;
                let samples: Vec<(f64, f64)> = lhs.iter().copied().zip(rhs).collect();
                let report = convex_order::summarize(b1, b2, rho, &setup, &samples, &funcs);
                for row in &report.rows {
                    passed &= row.passed;
                    t.push(
                        Some(n),
                        vec![
                            b1.into(),
                            b2.into(),
                            rho.into(),
                            row.function.clone().into(),
                            row.lhs.mean.into(),
                            row.lhs.se.into(),
                            row.rhs.mean.into(),
                            row.rhs.se.into(),
                            row.diff.mean.into(),
                            row.diff.se.into(),
                            row.passed.into(),
                        ],
                    );
                }
            }
        }
        Ok(Outcome { table: t, passed, notes: Vec::new() })
    }
}

impl CxCompare {
    fn function_names(&self, cfg: &ExperimentConfig) -> Vec<String> {
        match &cfg.functions {
            Some(f) => f.clone(),
            None => convex_order::DEFAULT_TEST_FUNCTIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

struct DriftScan;

impl Experiment for DriftScan {
    fn name(&self) -> &'static str {
        "drift-scan"
    }

    fn about(&self) -> &'static str {
        "convex-order check over drifts within distance rho_0 of a reference drift"
    }

    fn columns(&self) -> &'static [&'static str] {
        &[
            "beta",
            "beta_plus",
            "rho0",
            "drift",
            "d_distance",
            "lhs_mean",
            "lhs_se",
            "rhs_coupling_mean",
            "rhs_coupling_se",
            "rhs_rho0_mean",
            "rhs_rho0_se",
            "passed",
        ]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        let law = cfg.law()?;
        if !law.is_bounded() {
            return Err(ExperimentError::Config("drift-scan needs a bounded law".into()));
        }
        let dim = cfg.dim()?;
        cfg.ns()?;
        cfg.alpha(dim)?;
        let beta = *cfg.betas()?.first().unwrap();
        let bp = cfg.beta_plus.ok_or_else(|| ExperimentError::Config("missing beta_plus".into()))?;
        if !(beta > 0.0 && beta <= bp) {
            return Err(ExperimentError::Config(format!("need 0 < beta <= beta_plus, got {beta} and {bp}")));
        }
        if cfg.kind() != DisorderKind::Bond {
            return Err(ExperimentError::Config("the drift scan uses bond disorder".into()));
        }
        min_replicas(cfg.replicas(1000), 2)?;
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome> {
        let law = cfg.law()?;
        let dim = cfg.dim()?;
        let alpha_plus = cfg.alpha(dim)?;
        let tilts = cfg.tilts.clone().unwrap_or_else(|| vec![0.05, 0.1, 0.2, 0.4]);
        let ns = cfg.ns()?;
        let beta = cfg.betas()?[0];
        let setup = DriftScanSetup {
            law: &law,
            beta,
            beta_plus: cfg.beta_plus.unwrap(),
            alpha_plus: &alpha_plus,
            tilts: &tilts,
            ns: &ns,
            replicas: cfg.replicas(1000),
            seed: cfg.seed,
        };
        let r = coupling::drift_stability_scan(&setup).map_err(ExperimentError::run)?;
        let mut t = Table::new(cfg.seed, self.columns());
        for row in &r.rows {
            t.push(
                Some(row.n),
                vec![
                    r.beta.into(),
                    r.beta_plus.into(),
                    r.rho0.into(),
                    join(&row.drift).into(),
                    row.d.into(),
                    row.lhs.mean.into(),
                    row.lhs.se.into(),
                    row.rhs_coupling.mean.into(),
                    row.rhs_coupling.se.into(),
                    row.rhs_rho0.mean.into(),
                    row.rhs_rho0.se.into(),
                    row.passed.into(),
                ],
            );
        }
        let mut notes = Vec::new();
        if r.rejected > 0 {
            notes.push(format!("{} grid drifts lie farther than rho_0 from the reference", r.rejected));
        }
        Ok(Outcome { table: t, passed: r.passed(), notes })
    }
}

fn mc_setup<'a>(cfg: &ExperimentConfig, law: &'a DisorderLaw, beta: f64, replicas: usize) -> Result<McSetup<'a>> {
    Ok(McSetup { law, beta, kind: cfg.kind(), dim: cfg.dim()?, replicas, seed: cfg.seed })
}

fn validate_mc(cfg: &ExperimentConfig, default_replicas: usize, min: usize) -> Result<()> {
    let law = cfg.law()?;
    let dim = cfg.dim()?;
    cfg.ns()?;
    check_mgf(&law, &cfg.betas()?)?;
    cfg.alpha(dim)?;
    min_replicas(cfg.replicas(default_replicas), min)?;
    Ok(())
}

struct Clt;

impl Experiment for Clt {
    fn name(&self) -> &'static str {
        "clt"
    }

    fn about(&self) -> &'static str {
        "Kolmogorov distance of the rescaled endpoint marginal, mgf ratio and tail statistics"
    }

    fn columns(&self) -> &'static [&'static str] {
        &["beta", "statistic", "parameter", "value", "se"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        validate_mc(cfg, 200, 2)
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome> {
        let law = cfg.law()?;
        let defaults = CltOptions::default();
        let opts = CltOptions {
            ns: cfg.ns()?,
            thetas: cfg.thetas.clone().unwrap_or(defaults.thetas),
            tails: cfg.tails.clone().unwrap_or(defaults.tails),
        };
        let tol = cfg.tolerance.unwrap_or(1e-10);
        let mut t = Table::new(cfg.seed, self.columns());
        let mut passed = true;
        for beta in cfg.betas()? {
            let setup = mc_setup(cfg, &law, beta, cfg.replicas(200))?;
            let r = asymptotics::clt_diagnostics(&setup, &opts).map_err(ExperimentError::run)?;
            passed &= r.ks_decreasing && r.mgf_residual <= tol;
            for row in &r.rows {
                let n = Some(row.n);
                t.push(n, vec![beta.into(), "median_ks".into(), Cell::Empty, row.median_ks.into(), Cell::Empty]);
                t.push(n, vec![beta.into(), "mean_ks".into(), Cell::Empty, row.ks.mean.into(), row.ks.se.into()]);
                for s in &row.ratios {
                    t.push(
                        n,
                        vec![beta.into(), "ratio_mean".into(), s.theta.into(), s.mean.mean.into(), s.mean.se.into()],
                    );
                    t.push(
                        n,
                        vec![
                            beta.into(),
                            "ratio_median_deviation".into(),
                            s.theta.into(),
                            s.median_deviation.into(),
                            Cell::Empty,
                        ],
                    );
                }
                for s in &row.tails {
                    t.push(n, vec![beta.into(), "tail_mean".into(), s.k.into(), s.mean.mean.into(), s.mean.se.into()]);
                    t.push(n, vec![beta.into(), "tail_bound".into(), s.k.into(), s.bound.into(), Cell::Empty]);
                }
            }
            t.push(
                Some(opts.ns.iter().copied().min().unwrap()),
                vec![beta.into(), "mgf_residual".into(), Cell::Empty, r.mgf_residual.into(), Cell::Empty],
            );
        }
        Ok(Outcome { table: t, passed, notes: Vec::new() })
    }
}

struct FreeEnergy;

impl Experiment for FreeEnergy {
    fn name(&self) -> &'static str {
        "free-energy"
    }

    fn about(&self) -> &'static str {
        "point-to-plane (and, with x, point-to-point) free energy estimates per n"
    }

    fn columns(&self) -> &'static [&'static str] {
        &["beta", "target", "estimator", "mean", "se"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        validate_mc(cfg, 100, 10)?;
        for x in cfg.x.iter().flatten() {
            if x.len() != cfg.dim()? || x.iter().map(|v| v.abs()).sum::<f64>() > 1.0 + 1e-12 {
                return Err(ExperimentError::Config(format!("invalid direction {x:?}")));
            }
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome> {
        let law = cfg.law()?;
        let alpha = cfg.alpha(cfg.dim()?)?;
        let ns = cfg.ns()?;
        let mut t = Table::new(cfg.seed, self.columns());
        let mut passed = true;
        for beta in cfg.betas()? {
            let setup = mc_setup(cfg, &law, beta, cfg.replicas(100))?;
            let mut runs = vec![("plane".to_string(), asymptotics::free_energy(&setup, &alpha, &ns))];
            for x in cfg.x.iter().flatten() {
                runs.push((format!("x={}", join(x)), asymptotics::point_to_point_free_energy(&setup, x, &ns)));
            }
            for (target, est) in runs {
                let est = est.map_err(ExperimentError::run)?;
                if target == "plane" {
                    passed &= est.jensen_ok;
                    if beta == 0.0 {
                        passed &= est.per_n.iter().all(|p| p.value.mean == 0.0);
                    }
                }
                for p in &est.per_n {
                    t.push(
                        Some(p.n),
                        vec![
                            beta.into(),
                            target.clone().into(),
                            "per_n".into(),
                            p.value.mean.into(),
                            p.value.se.into(),
                        ],
                    );
                }
                let top = est.per_n.last().unwrap().n;
                t.push(
                    Some(top),
                    vec![
                        beta.into(),
                        target.into(),
                        "richardson".into(),
                        est.richardson.mean.into(),
                        est.richardson.se.into(),
                    ],
                );
            }
        }
        Ok(Outcome { table: t, passed, notes: Vec::new() })
    }
}

struct RateFunction;

impl Experiment for RateFunction {
    fn name(&self) -> &'static str {
        "rate-function"
    }

    fn about(&self) -> &'static str {
        "finite-n rate function J of the endpoint next to the simple random walk rate function"
    }

    fn columns(&self) -> &'static [&'static str] {
        &["beta", "x", "endpoint", "j_mean", "j_se", "i_srw"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        validate_mc(cfg, 100, 10)
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome> {
        let law = cfg.law()?;
        let dim = cfg.dim()?;
        let n = *cfg.ns()?.iter().max().unwrap();
        let xs = cfg.x.clone().unwrap_or_else(|| {
            (0..=10)
                .map(|k| {
                    let mut x = vec![0.0; dim];
                    x[0] = k as f64 / 10.0;
                    x
                })
                .collect()
        });
        let mut t = Table::new(cfg.seed, self.columns());
        let mut passed = true;
        for beta in cfg.betas()? {
            let setup = mc_setup(cfg, &law, beta, cfg.replicas(100))?;
            for row in asymptotics::rate_function_j(&setup, &xs, n).map_err(ExperimentError::run)? {
                passed &= row.j.mean >= -4.0 * row.j.se || row.j.mean >= 0.0;
                t.push(
                    Some(n),
                    vec![
                        beta.into(),
                        join(&row.x).into(),
                        join_i(&row.endpoint).into(),
                        row.j.mean.into(),
                        row.j.se.into(),
                        row.i_srw.into(),
                    ],
                );
            }
        }
        Ok(Outcome { table: t, passed, notes: Vec::new() })
    }
}

struct Cauchy;

impl Experiment for Cauchy {
    fn name(&self) -> &'static str {
        "cauchy"
    }

    fn about(&self) -> &'static str {
        "oscillation of the martingale trajectory over windows [N, factor N]"
    }

    fn columns(&self) -> &'static [&'static str] {
        &["beta", "horizon", "oscillation_mean", "oscillation_se", "median_ratio", "mean_log_w_n", "mean_log_w_horizon"]
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        validate_mc(cfg, 100, 2)?;
        if cfg.factor == Some(0) {
            return Err(ExperimentError::Config("factor must be positive".into()));
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Outcome> {
        let law = cfg.law()?;
        let alpha = cfg.alpha(cfg.dim()?)?;
        let factor = cfg.factor.unwrap_or(2);
        let mut t = Table::new(cfg.seed, self.columns());
        let mut passed = true;
        for beta in cfg.betas()? {
            let setup = mc_setup(cfg, &law, beta, cfg.replicas(100))?;
            let rows = asymptotics::martingale_cauchy_diagnostic(&setup, &alpha, &cfg.ns()?, factor)
                .map_err(ExperimentError::run)?;
            for r in rows {
                passed &= beta != 0.0 || r.oscillation.mean == 0.0;
                t.push(
                    Some(r.n),
                    vec![
                        beta.into(),
                        r.horizon.into(),
                        r.oscillation.mean.into(),
                        r.oscillation.se.into(),
                        r.median_ratio.into(),
                        r.mean_log_w_n.mean.into(),
                        r.mean_log_w_horizon.mean.into(),
                    ],
                );
            }
        }
        Ok(Outcome { table: t, passed, notes: Vec::new() })
    }
}

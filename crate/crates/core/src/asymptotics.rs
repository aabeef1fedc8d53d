//! Finite-`n` probes of free energies, the endpoint large deviation rate
//! function, the central limit theorem and martingale convergence.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::disorder::{DisorderError, DisorderLaw};
use crate::lattice::{Ball, DisorderKind, DriftMeasure};
use crate::polymer::{self, forward_dp, CoordinateWeights, DpOptions, LazyBoltzmann, PolymerError};
use crate::rng::replica_seed;
use crate::stats::{ks_lattice_vs_normal, median, MeanSe};

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Polymer(#[from] PolymerError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, AsymptoticsError>;

/// Shared Monte Carlo setup: replica `i` uses the lazy environment with seed `replica_seed(seed, i)`.
#[derive(Debug, Clone)]
pub struct McSetup<'a> {
    pub law: &'a DisorderLaw,
    pub beta: f64,
    pub kind: DisorderKind,
    pub dim: usize,
    pub replicas: usize,
    pub seed: u64,
}

impl McSetup<'_> {
    fn weights(&self, i: usize) -> Result<LazyBoltzmann> {
        Ok(LazyBoltzmann::new(self.law, self.beta, replica_seed(self.seed, i as u64))?)
    }

    fn check(&self, min_replicas: usize) -> Result<()> {
        if self.replicas < min_replicas {
            return Err(AsymptoticsError::Invalid(format!("at least {min_replicas} replicas are needed")));
        }
        self.law.log_mgf(self.beta)?;
        Ok(())
    }

    /// Runs `f` on every replica in parallel; results keep replica order.
    fn map<T: Send>(&self, f: impl Fn(usize, &LazyBoltzmann) -> T + Sync + Send) -> Result<Vec<T>> {
        let out: Vec<Result<T>> = (0..self.replicas).into_par_iter().map(|i| Ok(f(i, &self.weights(i)?))).collect();
        out.into_iter().collect()
    }
}

fn sorted_ns(ns: &[usize]) -> Result<Vec<usize>> {
    let mut v = ns.to_vec();
    v.sort_unstable();
    v.dedup();
    if v.is_empty() || v[0] == 0 {
        return Err(AsymptoticsError::Invalid("n list must be nonempty and positive".into()));
    }
    Ok(v)
}

#[derive(Debug, Clone, Serialize)]
pub struct PerN {
    pub n: usize,
    /// `(1/n) log` of the martingale or point-to-point weight, averaged over replicas.
    pub value: MeanSe,
}

#[derive(Debug, Clone, Serialize)]
pub struct FreeEnergyEstimate {
    pub beta: f64,
    pub per_n: Vec<PerN>,
    /// Value at the largest `n`.
    pub last: MeanSe,
    /// `(log W_{n2} - log W_{n1}) / (n2 - n1)` for the two largest `n`, removing a `c / n` correction.
    pub richardson: MeanSe,
    /// Whether the per-`n` means are monotone in `n`.
    pub monotone: bool,
    /// Every per-`n` mean is at most `4 SE` above zero.
    pub jensen_ok: bool,
}

fn summarize_free_energy(beta: f64, ns: &[usize], logs: &[Vec<f64>]) -> FreeEnergyEstimate {
    let per_n: Vec<PerN> = ns
        .iter()
        .enumerate()
        .map(|(j, &n)| PerN { n, value: MeanSe::of(&logs.iter().map(|r| r[j] / n as f64).collect::<Vec<_>>()) })
        .collect();
    let last = per_n.last().unwrap().value;
    let richardson = if ns.len() >= 2 {
        let (a, b) = (ns.len() - 2, ns.len() - 1);
        let span = (ns[b] - ns[a]) as f64;
        MeanSe::of(&logs.iter().map(|r| (r[b] - r[a]) / span).collect::<Vec<_>>())
    } else {
        last
    };
    let means: Vec<f64> = per_n.iter().map(|p| p.value.mean).collect();
    let monotone = means.windows(2).all(|w| w[1] <= w[0]) || means.windows(2).all(|w| w[1] >= w[0]);
    let jensen_ok = per_n.iter().all(|p| p.value.mean <= 4.0 * p.value.se || p.value.mean <= 0.0);
    FreeEnergyEstimate { beta, per_n, last, richardson, monotone, jensen_ok }
}

/// Point-to-plane free energy `(1/n) E log W_n^{beta, alpha}` for each `n`, from one recursion per replica.
pub fn free_energy(setup: &McSetup, alpha: &DriftMeasure, ns: &[usize]) -> Result<FreeEnergyEstimate> {
    setup.check(10)?;
    let ns = sorted_ns(ns)?;
    let top = *ns.last().unwrap();
    let logs = setup.map(|_, w| {
        let path = polymer::log_martingale_path(w, setup.kind, alpha, top);
        ns.iter().map(|&n| path[n]).collect::<Vec<f64>>()
    })?;
    Ok(summarize_free_energy(setup.beta, &ns, &logs))
}

/// Point-to-point free energy at direction `x`, using the parity-corrected endpoint nearest to `n x`.
pub fn point_to_point_free_energy(setup: &McSetup, x: &[f64], ns: &[usize]) -> Result<FreeEnergyEstimate> {
    setup.check(10)?;
    if x.len() != setup.dim {
        return Err(AsymptoticsError::Invalid("direction has the wrong dimension".into()));
    }
    if x.iter().map(|v| v.abs()).sum::<f64>() > 1.0 + 1e-12 {
        return Err(AsymptoticsError::Invalid("direction must satisfy |x|_1 <= 1".into()));
    }
    let ns = sorted_ns(ns)?;
    let top = *ns.last().unwrap();
    let ball = Ball::shared(setup.dim, top);
    let targets: Vec<usize> = ns
        .iter()
        .map(|&n| {
            let p = polymer::parity_corrected_endpoint(x, n);
            ball.index(&p).ok_or_else(|| AsymptoticsError::Invalid(format!("unreachable endpoint {p:?}")))
        })
        .collect::<Result<_>>()?;
    let srw = DriftMeasure::uniform(setup.dim);
    let logs = setup.map(|_, w| {
        let mut out = vec![0.0; ns.len()];
        forward_dp(w, setup.kind, &srw, top, &DpOptions::default(), |st| {
            if let Ok(j) = ns.binary_search(&st.t) {
                out[j] = st.weights[targets[j]].ln() + st.log_offset;
            }
        });
        out
    })?;
    Ok(summarize_free_energy(setup.beta, &ns, &logs))
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub x: Vec<f64>,
    pub endpoint: Vec<i32>,
    /// `(1/n)(log W_n - log W_n(X_n = x_n))` over replicas.
    pub j: MeanSe,
    pub i_srw: f64,
}

/// `J^beta(x) = p(beta) - p(beta, x)` at finite `n` on common environments.
///
/// Both free energies come from one recursion: the difference is `-(1/n) log mu_n(X_n = x_n)`.
pub fn rate_function_j(setup: &McSetup, xs: &[Vec<f64>], n: usize) -> Result<Vec<RateRow>> {
    setup.check(10)?;
    if n == 0 {
        return Err(AsymptoticsError::Invalid("n must be positive".into()));
    }
    let ball = Ball::shared(setup.dim, n);
    let mut endpoints = Vec::with_capacity(xs.len());
    for x in xs {
        if x.len() != setup.dim || x.iter().map(|v| v.abs()).sum::<f64>() > 1.0 + 1e-12 {
            return Err(AsymptoticsError::Invalid(format!("invalid direction {x:?}")));
        }
        let p = polymer::parity_corrected_endpoint(x, n);
        let idx = ball.index(&p).ok_or_else(|| AsymptoticsError::Invalid(format!("unreachable endpoint {p:?}")))?;
        endpoints.push((p, idx));
    }
    let srw = DriftMeasure::uniform(setup.dim);
    let per_replica = setup.map(|_, w| {
        let mut out = Vec::new();
        forward_dp(w, setup.kind, &srw, n, &DpOptions::default(), |st| {
            if st.t == n {
                let total: f64 = st.weights.iter().sum();
                out = endpoints.iter().map(|(_, i)| (total.ln() - st.weights[*i].ln()) / n as f64).collect();
            }
        });
        out
    })?;
    Ok(xs
        .iter()
        .zip(&endpoints)
        .enumerate()
        .map(|(k, (x, (p, _)))| RateRow {
            x: x.clone(),
            endpoint: p.clone(),
            j: MeanSe::of(&per_replica.iter().map(|r| r[k]).collect::<Vec<_>>()),
            i_srw: srw_rate_function(x),
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct Legendre {
    pub value: f64,
    /// Maximizer `lambda*`; empty on the boundary and outside the ball.
    pub lambda: Vec<f64>,
    /// `max_i |x_i - d/dlambda_i log mgf(lambda*)|`.
    pub gradient_residual: f64,
    pub iterations: usize,
}

/// `log E^{SRW}[exp(lambda . X_1)]`, its gradient and Hessian.
pub fn srw_log_mgf(lambda: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let d = lambda.len();
    let m = lambda.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..d {
        plus[i] = (lambda[i] - m).exp();
        minus[i] = (-lambda[i] - m).exp();
        total += plus[i] + minus[i];
    }
    let value = m + (total / (2 * d) as f64).ln();
    let mean = DVector::from_fn(d, |i, _| (plus[i] - minus[i]) / total);
    let mut hess = DMatrix::from_fn(d, d, |i, j| -mean[i] * mean[j]);
    for i in 0..d {
        hess[(i, i)] += (plus[i] + minus[i]) / total;
    }
    (value, mean, hess)
}

/// Legendre transform `sup_lambda (lambda . x - log((1/d) sum_i cosh lambda_i))` by damped Newton.
pub fn srw_legendre(x: &[f64]) -> Legendre {
    let d = x.len();
    let norm: f64 = x.iter().map(|v| v.abs()).sum();
    if norm > 1.0 + 1e-12 {
        return Legendre { value: f64::INFINITY, lambda: Vec::new(), gradient_residual: 0.0, iterations: 0 };
    }
    if norm >= 1.0 - 1e-14 {
        let ent: f64 = x.iter().filter(|v| **v != 0.0).map(|v| v.abs() * v.abs().ln()).sum();
        return Legendre {
            value: ((2 * d) as f64).ln() + ent,
            lambda: Vec::new(),
            gradient_residual: 0.0,
            iterations: 0,
        };
    }
    let xv = DVector::from_column_slice(x);
    let objective = |l: &DVector<f64>| l.dot(&xv) - srw_log_mgf(l.as_slice()).0;
    let mut lambda = DVector::zeros(d);
    let mut value = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < 500 {
        let (_, mean, hess) = srw_log_mgf(lambda.as_slice());
        let grad = &xv - &mean;
        residual = grad.amax();
        if residual <= 1e-12 {
            break;
        }
        iterations += 1;
        let step = match hess.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => grad.clone(),
        };
        let mut t = 1.0;
        loop {
            let cand = &lambda + &step * t;
            let v = objective(&cand);
            // the slack absorbs rounding once the objective is flat to machine precision
            if v >= value + 1e-4 * t * grad.dot(&step) - 1e-15 * value.abs().max(1.0) || t < 1e-12 {
                lambda = cand;
                value = v;
                break;
            }
            t *= 0.5;
        }
    }
    Legendre { value: value.max(0.0), lambda: lambda.as_slice().to_vec(), gradient_residual: residual, iterations }
}

/// Rate function of the simple random walk endpoint; `+inf` outside the unit `l1` ball.
pub fn srw_rate_function(x: &[f64]) -> f64 {
    srw_legendre(x).value
}

#[derive(Debug, Clone, Serialize)]
pub struct CltOptions {
    pub ns: Vec<usize>,
    /// Tilts `theta` along `e_1`; the ratio statistic uses `alpha(theta / sqrt(n) e_1)`.
    pub thetas: Vec<f64>,
    /// Thresholds `K` of the tail statistic `mu(X_n . e_1 >= K sqrt(n))`.
    pub tails: Vec<f64>,
}

impl Default for CltOptions {
    fn default() -> Self {
        Self { ns: vec![16, 32, 64, 128], thetas: vec![0.0, 0.5, 1.0], tails: vec![1.0, 1.5, 2.0] }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioStat {
    pub theta: f64,
    pub mean: MeanSe,
    /// Median of `|ratio - 1|` across replicas.
    pub median_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailStat {
    pub k: f64,
    pub mean: MeanSe,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CltRow {
    pub n: usize,
    pub median_ks: f64,
    pub ks: MeanSe,
    pub ratios: Vec<RatioStat>,
    pub tails: Vec<TailStat>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub beta: f64,
    pub dim: usize,
    pub rows: Vec<CltRow>,
    /// Largest relative residual of the tilted-drift mgf identity, checked at the smallest `n`.
    pub mgf_residual: f64,
    pub ks_decreasing: bool,
}

struct CltSample {
    ks: Vec<f64>,
    ratios: Vec<Vec<f64>>,
    tails: Vec<Vec<f64>>,
    mgf_residual: f64,
}

fn clt_sample<W: CoordinateWeights + ?Sized>(w: &W, setup: &McSetup, opts: &CltOptions) -> CltSample {
    let d = setup.dim;
    let top = *opts.ns.last().unwrap();
    let srw = DriftMeasure::uniform(d);
    let span = if d == 1 { 2 } else { 1 };
    let mut out = CltSample { ks: Vec::new(), ratios: Vec::new(), tails: Vec::new(), mgf_residual: 0.0 };
    forward_dp(w, setup.kind, &srw, top, &DpOptions::default(), |st| {
        if opts.ns.binary_search(&st.t).is_err() {
            return;
        }
        let n = st.t;
        let law = st.endpoint_law();
        let (offset, marginal) = law.marginal(0);
        out.ks.push(ks_lattice_vs_normal(offset, &marginal, (n as f64 / d as f64).sqrt(), span));
        let sq = (n as f64).sqrt();
        out.ratios.push(
            opts.thetas
                .iter()
                .map(|&th| {
                    let mut l = vec![0.0; d];
                    l[0] = th / sq;
                    law_mgf_marginal(offset, &marginal, l[0]) / polymer::srw_mgf(&l, n)
                })
                .collect(),
        );
        out.tails.push(
            opts.tails
                .iter()
                .map(|&k| {
                    marginal
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| (*i as i64 - offset) as f64 >= k * sq)
                        .map(|(_, p)| p)
                        .sum()
                })
                .collect(),
        );
    });
    let n0 = opts.ns[0];
    for &th in &opts.thetas {
        let mut l = vec![0.0; d];
        l[0] = th / (n0 as f64).sqrt();
        let id = polymer::mgf_ratio_identity(w, setup.kind, d, n0, &l);
        out.mgf_residual = out.mgf_residual.max(id.relative_error());
    }
    out
}

fn law_mgf_marginal(offset: i64, probs: &[f64], theta: f64) -> f64 {
    probs.iter().enumerate().map(|(i, p)| p * ((i as i64 - offset) as f64 * theta).exp()).sum()
}

/// Kolmogorov distance of the rescaled `e_1`-marginal, ratio and tail statistics per replica and `n`.
pub fn clt_diagnostics(setup: &McSetup, opts: &CltOptions) -> Result<CltReport> {
    setup.check(2)?;
    let mut opts = opts.clone();
    opts.ns = sorted_ns(&opts.ns)?;
    let samples = if setup.beta == 0.0 {
        // every replica sees the same unit weights
        let s = clt_sample(&setup.weights(0)?, setup, &opts);
        (0..setup.replicas)
            .map(|_| CltSample {
                ks: s.ks.clone(),
                ratios: s.ratios.clone(),
                tails: s.tails.clone(),
                mgf_residual: s.mgf_residual,
            })
            .collect()
    } else {
        setup.map(|_, w| clt_sample(w, setup, &opts))?
    };
    let rows: Vec<CltRow> = opts
        .ns
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let ks: Vec<f64> = samples.iter().map(|s| s.ks[j]).collect();
            let ratios = opts
                .thetas
                .iter()
                .enumerate()
                .map(|(k, &theta)| {
                    let r: Vec<f64> = samples.iter().map(|s| s.ratios[j][k]).collect();
                    let dev: Vec<f64> = r.iter().map(|v| (v - 1.0).abs()).collect();
                    RatioStat { theta, mean: MeanSe::of(&r), median_deviation: median(&dev) }
                })
                .collect();
            let tails = opts
                .tails
                .iter()
                .enumerate()
                .map(|(k, &kk)| TailStat {
                    k: kk,
                    mean: MeanSe::of(&samples.iter().map(|s| s.tails[j][k]).collect::<Vec<_>>()),
                    bound: 2.0 * (-kk * kk / 2.0).exp(),
                })
                .collect();
            CltRow { n, median_ks: median(&ks), ks: MeanSe::of(&ks), ratios, tails }
        })
        .collect();
    let mgf_residual = samples.iter().map(|s| s.mgf_residual).fold(0.0, f64::max);
    let ks_decreasing = rows.windows(2).all(|w| w[1].median_ks < w[0].median_ks);
    Ok(CltReport { beta: setup.beta, dim: setup.dim, rows, mgf_residual, ks_decreasing })
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyRow {
    pub n: usize,
    pub horizon: usize,
    /// `sup_{n <= a, b <= horizon} |W_a - W_b|`.
    pub oscillation: MeanSe,
    /// Median of `W_horizon / W_n`.
    pub median_ratio: f64,
    pub mean_log_w_n: MeanSe,
    pub mean_log_w_horizon: MeanSe,
}

/// Windowed oscillation of the martingale trajectory over `[N, factor N]` for each `N`.
pub fn martingale_cauchy_diagnostic(
    setup: &McSetup,
    alpha: &DriftMeasure,
    starts: &[usize],
    factor: usize,
) -> Result<Vec<CauchyRow>> {
    setup.check(2)?;
    if factor < 1 {
        return Err(AsymptoticsError::Invalid("horizon factor must be at least 1".into()));
    }
    let starts = sorted_ns(starts)?;
    let top = starts.last().unwrap() * factor;
    let paths = setup.map(|_, w| polymer::log_martingale_path(w, setup.kind, alpha, top))?;
    Ok(starts
        .iter()
        .map(|&n| {
            let m = n * factor;
            let osc: Vec<f64> = paths
                .iter()
                .map(|p| {
                    let (lo, hi) = p[n..=m]
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(l.exp()), b.max(l.exp())));
                    hi - lo
                })
                .collect();
            let ratio: Vec<f64> = paths.iter().map(|p| (p[m] - p[n]).exp()).collect();
            CauchyRow {
                n,
                horizon: m,
                oscillation: MeanSe::of(&osc),
                median_ratio: median(&ratio),
                mean_log_w_n: MeanSe::of(&paths.iter().map(|p| p[n]).collect::<Vec<_>>()),
                mean_log_w_horizon: MeanSe::of(&paths.iter().map(|p| p[m]).collect::<Vec<_>>()),
            }
        })
        .collect())
}

//! Convex-order tools: integrated quantiles, Lorenz curves, the minimal
//! retention probability `rho_0(beta1, beta2)` and Monte Carlo comparisons of
//! `E f(W)` for convex `f`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::disorder::{DisorderError, DisorderLaw};
use crate::lattice::{DisorderKind, DriftMeasure};
use crate::noise::{NoisedWeights, ResampleProfile};
use crate::polymer::{self, LazyBoltzmann, PolymerError};
use crate::quadrature::{self, QuadratureError};
use crate::rng::replica_seed;
use crate::stats::MeanSe;

#[derive(Debug, Error)]
pub enum ConvexOrderError {
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Polymer(#[from] PolymerError),
    #[error("need 0 < beta1 <= beta2, got beta1 = {0}, beta2 = {1}")]
    BetaOrder(f64, f64),
    #[error("closed form failed its defining equations (residual {0:e})")]
    Verification(f64),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConvexOrderError>;

#[derive(Debug, Clone, Copy)]
pub struct QuantileOptions {
    /// Upper-unbounded laws are replaced by their conditional law below the `1 - truncation` quantile.
    pub truncation: f64,
    /// Number of cells of the cumulative table for continuous laws.
    pub cells: usize,
    /// Relative tolerance of each adaptive integral.
    pub tolerance: f64,
}

impl Default for QuantileOptions {
    fn default() -> Self {
        Self { truncation: 1e-10, cells: 1024, tolerance: 1e-10 }
    }
}

enum Shape {
    /// Atom weights `e^{beta v_j}` with cumulative levels and partial sums of `p_j e^{beta v_j}`.
    Discrete {
        cum: Vec<f64>,
        w: Vec<f64>,
        head: Vec<f64>,
        tail: Vec<f64>,
    },
    Continuous {
        q: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        head: Vec<f64>,
        tail: Vec<f64>,
        tol: f64,
    },
}

/// `x -> int_0^x F^{-1}_{e^{beta omega}}(u) du` together with its complement `int_x^1`.
pub struct IntegratedQuantile {
    shape: Shape,
    total: f64,
}

impl IntegratedQuantile {
    pub fn new(law: &DisorderLaw, beta: f64, opts: &QuantileOptions) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(DisorderError::InvalidBeta(beta).into());
        }
        if let Some(a) = law.atoms() {
            let w: Vec<f64> = a.values.iter().map(|v| (beta * v).exp()).collect();
            let m = w.len();
            let mut head = vec![0.0; m + 1];
            for j in 0..m {
                head[j + 1] = head[j] + a.probs[j] * w[j];
            }
            let mut tail = vec![0.0; m + 1];
            for j in (0..m).rev() {
                tail[j] = tail[j + 1] + a.probs[j] * w[j];
            }
            let total = head[m];
            return Ok(Self { shape: Shape::Discrete { cum: a.cumulative.clone(), w, head, tail }, total });
        }
        let scale = if law.is_upper_bounded() { 1.0 } else { 1.0 - opts.truncation };
        let l = law.clone();
        let q: Arc<dyn Fn(f64) -> f64 + Send + Sync> =
            Arc::new(move |u: f64| (beta * l.quantile_unit(scale * u)).exp());
        let n = opts.cells;
        let mut cells = Vec::with_capacity(n);
        for k in 0..n {
            let (a, b) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
            cells.push(cell_integral(&*q, a, b, opts.tolerance)?);
        }
        let mut head = vec![0.0; n + 1];
        for k in 0..n {
            head[k + 1] = head[k] + cells[k];
        }
        let mut tail = vec![0.0; n + 1];
        for k in (0..n).rev() {
            tail[k] = tail[k + 1] + cells[k];
        }
        let total = head[n];
        Ok(Self { shape: Shape::Continuous { q, head, tail, tol: opts.tolerance }, total })
    }

    /// `E[e^{beta omega}]` of the (possibly truncated) law.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// `int_0^x`.
    pub fn head(&self, x: f64) -> Result<f64> {
        let x = x.clamp(0.0, 1.0);
        match &self.shape {
            Shape::Discrete { cum, w, head, .. } => {
                let j = cum.partition_point(|&c| c <= x).min(w.len() - 1);
                let start = if j == 0 { 0.0 } else { cum[j - 1] };
                Ok(head[j] + (x - start).max(0.0) * w[j])
            }
            Shape::Continuous { q, head, tol, .. } => {
                let n = head.len() - 1;
                let k = ((x * n as f64).floor() as usize).min(n - 1);
                let a = k as f64 / n as f64;
                Ok(head[k] + cell_integral(&**q, a, x, *tol)?)
            }
        }
    }

    /// `int_x^1`.
    pub fn tail(&self, x: f64) -> Result<f64> {
        let x = x.clamp(0.0, 1.0);
        match &self.shape {
            Shape::Discrete { cum, w, tail, .. } => {
                let j = cum.partition_point(|&c| c <= x).min(w.len() - 1);
                Ok(tail[j + 1] + (cum[j] - x).max(0.0) * w[j])
            }
            Shape::Continuous { q, tail, tol, .. } => {
                let n = tail.len() - 1;
                let k = ((x * n as f64).ceil() as usize).clamp(1, n);
                let b = k as f64 / n as f64;
                Ok(tail[k] + cell_integral(&**q, x, b, *tol)?)
            }
        }
    }

    /// Right limit of the quantile at 0 and left limit at 1.
    pub fn end_values(&self) -> (f64, f64) {
        match &self.shape {
            Shape::Discrete { w, .. } => (w[0], w[w.len() - 1]),
            Shape::Continuous { q, .. } => (q(0.0), q(1.0)),
        }
    }

    /// Breakpoints of a discrete law inside `(0, 1)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Discrete { cum, .. } => cum[..cum.len() - 1].to_vec(),
            Shape::Continuous { .. } => Vec::new(),
        }
    }
}

fn cell_integral(q: &(dyn Fn(f64) -> f64 + Send + Sync), a: f64, b: f64, rel: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    // the integrand is increasing, so (b - a) q(mid) sets the scale of the result
    let scale = (b - a) * q(0.5 * (a + b)).max(q(a)).max(1e-300);
    Ok(quadrature::integrate(q, a, b, rel * scale)?)
}

/// `int_0^x F^{-1}_{e^{beta omega}}(u) du`.
pub fn integrated_quantile(law: &DisorderLaw, beta: f64, x: f64) -> Result<f64> {
    let iq = IntegratedQuantile::new(law, beta, &QuantileOptions::default())?;
    if x >= 1.0 {
        return Ok(iq.total());
    }
    iq.head(x)
}

/// Lorenz curve `L(x) = int_0^x F^{-1} / E` of `e^{beta omega}` on a grid of levels.
pub fn lorenz_curve(law: &DisorderLaw, beta: f64, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let iq = IntegratedQuantile::new(law, beta, &QuantileOptions::default())?;
    grid.iter()
        .map(|&x| {
            let v = if x >= 1.0 { 1.0 } else { iq.head(x)? / iq.total() };
            Ok((x, v))
        })
        .collect()
}

/// Numerator and denominator of the ratio whose infimum defines `rho_0`.
pub struct RatioTerms {
    pub iq1: IntegratedQuantile,
    pub iq2: IntegratedQuantile,
}

impl RatioTerms {
    pub fn new(law: &DisorderLaw, beta1: f64, beta2: f64, opts: &QuantileOptions) -> Result<Self> {
        Ok(Self { iq1: IntegratedQuantile::new(law, beta1, opts)?, iq2: IntegratedQuantile::new(law, beta2, opts)? })
    }

    /// `(f, g)` at `x`, from head integrals below 1/2 and tail integrals above.
    pub fn fg(&self, x: f64) -> Result<(f64, f64)> {
        let (e1, e2) = (self.iq1.total(), self.iq2.total());
        if x <= 0.5 {
            let (i1, i2) = (self.iq1.head(x)?, self.iq2.head(x)?);
            Ok((e2 * i1 - e1 * i2, e1 * (x * e2 - i2)))
        } else {
            let (t1, t2) = (self.iq1.tail(x)?, self.iq2.tail(x)?);
            Ok((e1 * t2 - e2 * t1, e1 * (t2 - (1.0 - x) * e2)))
        }
    }

    pub fn ratio(&self, x: f64) -> Result<f64> {
        let (f, g) = self.fg(x)?;
        Ok(if g > 0.0 { f / g } else { f64::INFINITY })
    }

    /// One-sided limits of `f / g` at 0 and 1 from the endpoint values of the quantiles.
    pub fn endpoint_limits(&self) -> (f64, f64) {
        let (e1, e2) = (self.iq1.total(), self.iq2.total());
        let (lo1, hi1) = self.iq1.end_values();
        let (lo2, hi2) = self.iq2.end_values();
        let lower = (e2 * lo1 - e1 * lo2) / (e1 * (e2 - lo2));
        let upper = if hi2.is_finite() { (e1 * hi2 - e2 * hi1) / (e1 * (hi2 - e2)) } else { 1.0 };
        (lower, upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfimumLocation {
    Interior,
    LowerEndpoint,
    UpperEndpoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct Rho0Report {
    pub beta1: f64,
    pub beta2: f64,
    pub rho0: f64,
    pub inf_ratio: f64,
    pub argmin: f64,
    pub location: InfimumLocation,
    pub lower_limit: f64,
    pub upper_limit: f64,
    pub lower_extrapolated: f64,
    pub upper_extrapolated: f64,
}

const GRID_POINTS: usize = 10_000;

/// Richardson extrapolation of `r(h) -> r(0)` from `h = 1e-3, 1e-4, 1e-5`.
fn richardson(r: [f64; 3]) -> f64 {
    let a = (10.0 * r[1] - r[0]) / 9.0;
    let b = (10.0 * r[2] - r[1]) / 9.0;
    (100.0 * b - a) / 99.0
}

/// `rho_0(beta1, beta2) = 1 - inf_{x in (0, 1)} f / g`.
pub fn rho0(law: &DisorderLaw, beta1: f64, beta2: f64) -> Result<Rho0Report> {
    rho0_with(law, beta1, beta2, &QuantileOptions::default())
}

pub fn rho0_with(law: &DisorderLaw, beta1: f64, beta2: f64, opts: &QuantileOptions) -> Result<Rho0Report> {
    if !(beta1 > 0.0 && beta1 <= beta2 && beta2.is_finite()) {
        return Err(ConvexOrderError::BetaOrder(beta1, beta2));
    }
    if beta1 == beta2 {
        return Ok(Rho0Report {
            beta1,
            beta2,
            rho0: 1.0,
            inf_ratio: 0.0,
            argmin: f64::NAN,
            location: InfimumLocation::Interior,
            lower_limit: 0.0,
            upper_limit: 0.0,
            lower_extrapolated: 0.0,
            upper_extrapolated: 0.0,
        });
    }
    let terms = RatioTerms::new(law, beta1, beta2, opts)?;
    let mut best = (f64::INFINITY, f64::NAN, InfimumLocation::Interior);
    fn consider(best: &mut (f64, f64, InfimumLocation), r: f64, x: f64, loc: InfimumLocation) {
        if r < best.0 {
            *best = (r, x, loc);
        }
    }

    let mut xs: Vec<f64> = (1..GRID_POINTS).map(|k| k as f64 / GRID_POINTS as f64).collect();
    for c in terms.iq1.breakpoints() {
        xs.extend([c - 1e-12, c, c + 1e-12].into_iter().filter(|&x| x > 0.0 && x < 1.0));
    }
    for &x in &xs {
        consider(&mut best, terms.ratio(x)?, x, InfimumLocation::Interior);
    }
    // golden-section refinement around the best grid point
    if best.1.is_finite() {
        let h = 1.0 / GRID_POINTS as f64;
        let (mut a, mut b) = ((best.1 - h).max(1e-15), (best.1 + h).min(1.0 - 1e-15));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            let (rc, rd) = (terms.ratio(c)?, terms.ratio(d)?);
            consider(&mut best, rc, c, InfimumLocation::Interior);
            consider(&mut best, rd, d, InfimumLocation::Interior);
            if rc < rd {
                b = d;
            } else {
                a = c;
            }
        }
    }
    // endpoint behaviour: probes, Richardson extrapolation and the analytic one-sided limits
    for e in 3..=12 {
        let h = 10f64.powi(-e);
        consider(&mut best, terms.ratio(h)?, h, InfimumLocation::LowerEndpoint);
        consider(&mut best, terms.ratio(1.0 - h)?, 1.0 - h, InfimumLocation::UpperEndpoint);
    }
    let lo = [terms.ratio(1e-3)?, terms.ratio(1e-4)?, terms.ratio(1e-5)?];
    let hi = [terms.ratio(1.0 - 1e-3)?, terms.ratio(1.0 - 1e-4)?, terms.ratio(1.0 - 1e-5)?];
    let (lower_extrapolated, upper_extrapolated) = (richardson(lo).max(0.0), richardson(hi).max(0.0));
    consider(&mut best, lower_extrapolated, 0.0, InfimumLocation::LowerEndpoint);
    consider(&mut best, upper_extrapolated, 1.0, InfimumLocation::UpperEndpoint);
    let (lower_limit, upper_limit) = terms.endpoint_limits();
    consider(&mut best, lower_limit.max(0.0), 0.0, InfimumLocation::LowerEndpoint);
    consider(&mut best, upper_limit.max(0.0), 1.0, InfimumLocation::UpperEndpoint);

    let inf_ratio = best.0.max(0.0);
    Ok(Rho0Report {
        beta1,
        beta2,
        rho0: (1.0 - inf_ratio).clamp(0.0, 1.0),
        inf_ratio,
        argmin: best.1,
        location: best.2,
        lower_limit,
        upper_limit,
        lower_extrapolated,
        upper_extrapolated,
    })
}

/// Closed form for the `{0, 1}`-valued law with `P(omega = 1) = p`, after checking
/// `e^{beta1 w - lambda1} = rho e^{beta2 w - lambda2} + 1 - rho` at `w = 0` and `w = 1`.
pub fn rho_bernoulli(p: f64, beta1: f64, beta2: f64) -> Result<f64> {
    if !(beta1 > 0.0 && beta1 <= beta2 && beta2.is_finite()) {
        return Err(ConvexOrderError::BetaOrder(beta1, beta2));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(ConvexOrderError::Invalid(format!("p = {p} must lie in (0, 1)")));
    }
    if beta1 == beta2 {
        return Ok(1.0);
    }
    let law = DisorderLaw::two_point(0.0, 1.0, p)?;
    let (l1, l2) = (law.log_mgf(beta1)?, law.log_mgf(beta2)?);
    let rho = (l2 - l1).exp() * beta1.exp_m1() / beta2.exp_m1();
    let mut residual: f64 = 0.0;
    for w in [0.0, 1.0] {
        let lhs = (beta1 * w - l1).exp();
        let rhs = rho * (beta2 * w - l2).exp() + (1.0 - rho);
        residual = residual.max((lhs - rhs).abs() / lhs);
    }
    if residual > 1e-12 {
        return Err(ConvexOrderError::Verification(residual));
    }
    Ok(rho)
}

#[derive(Debug, Clone, Serialize)]
pub struct UpperBoundReport {
    pub beta_minus: f64,
    pub beta_plus: f64,
    /// Largest `C` with `rho_0 <= 1 - C (beta2 / beta1 - 1)` over the grid.
    pub c: f64,
    pub pairs: Vec<(f64, f64, f64)>,
    pub passed: bool,
}

/// Fits the constant of `rho_0 <= 1 - C (beta2/beta1 - 1)` on a `points x points` grid of `[beta_minus, beta_plus]`.
pub fn rho_upper_bound_check(
    law: &DisorderLaw,
    beta_minus: f64,
    beta_plus: f64,
    points: usize,
) -> Result<UpperBoundReport> {
    if !(beta_minus > 0.0 && beta_minus < beta_plus) || points < 2 {
        return Err(ConvexOrderError::BetaOrder(beta_minus, beta_plus));
    }
    let grid: Vec<f64> =
        (0..points).map(|i| beta_minus + (beta_plus - beta_minus) * i as f64 / (points - 1) as f64).collect();
    let cells: Vec<(f64, f64)> =
        grid.iter().flat_map(|&b1| grid.iter().filter(move |&&b2| b2 > b1).map(move |&b2| (b1, b2))).collect();
    let results: Vec<Result<(f64, f64, f64)>> =
        cells.par_iter().map(|&(b1, b2)| Ok((b1, b2, rho0(law, b1, b2)?.rho0))).collect();
    let pairs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let c = pairs.iter().map(|&(b1, b2, r)| (1.0 - r) / (b2 / b1 - 1.0)).fold(f64::INFINITY, f64::min);
    Ok(UpperBoundReport { beta_minus, beta_plus, c, pairs, passed: c > 0.0 })
}

/// A test function for the convex-order comparison.
pub trait TestFunction: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, x: f64) -> f64;
    /// Affine functions must give equal means on both sides.
    fn is_affine(&self) -> bool {
        false
    }
}

struct Named<F> {
    name: &'static str,
    f: F,
    affine: bool,
}

impl<F: Fn(f64) -> f64 + Send + Sync> TestFunction for Named<F> {
    fn name(&self) -> &str {
        self.name
    }

    fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn is_affine(&self) -> bool {
        self.affine
    }
}

/// Built-in convex test functions, selectable by name.
pub fn test_function_registry() -> BTreeMap<&'static str, Arc<dyn TestFunction>> {
    let mut m: BTreeMap<&'static str, Arc<dyn TestFunction>> = BTreeMap::new();
    let mut add = |name: &'static str, f: fn(f64) -> f64, affine: bool| {
        m.insert(name, Arc::new(Named { name, f, affine }));
    };
    add("square", |x| (x - 1.0) * (x - 1.0), false);
    add("abs", |x| (x - 1.0).abs(), false);
    add("positive_part", |x| (x - 1.0).max(0.0), false);
    add("exp_quarter", |x| (x / 4.0).exp(), false);
    add("linear", |x| x - 1.0, true);
    m
}

pub const DEFAULT_TEST_FUNCTIONS: [&str; 4] = ["square", "abs", "positive_part", "exp_quarter"];

pub fn test_functions(names: &[&str]) -> Result<Vec<Arc<dyn TestFunction>>> {
    let reg = test_function_registry();
    names
        .iter()
        .map(|n| reg.get(n).cloned().ok_or_else(|| ConvexOrderError::Invalid(format!("unknown test function {n:?}"))))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CxRow {
    pub function: String,
    /// `E f(W_n^{beta1})`.
    pub lhs: MeanSe,
    /// `E f(T_rho W_n^{beta2})`.
    pub rhs: MeanSe,
    /// Paired difference `rhs - lhs`.
    pub diff: MeanSe,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CxReport {
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    pub n: usize,
    pub replicas: usize,
    pub rows: Vec<CxRow>,
}

impl CxReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

#[derive(Debug, Clone)]
pub struct CxSetup<'a> {
    pub law: &'a DisorderLaw,
    pub kind: DisorderKind,
    pub alpha: &'a DriftMeasure,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
}

/// `W_n^{beta}(omega_i)` for the replica environments of `setup`.
pub fn martingale_samples(setup: &CxSetup, beta: f64) -> Result<Vec<f64>> {
    noised_samples(setup, beta, 1.0)
}

/// `(T_rho W_n^{beta})(omega_i)` for the replica environments of `setup`.
pub fn noised_samples(setup: &CxSetup, beta: f64, rho: f64) -> Result<Vec<f64>> {
    let profile = ResampleProfile::scalar(rho)?;
    setup.law.log_mgf(beta)?;
    let out: Vec<Result<f64>> = (0..setup.replicas as u64)
        .into_par_iter()
        .map(|i| {
            let h = LazyBoltzmann::new(setup.law, beta, replica_seed(setup.seed, i))?;
            let w = NoisedWeights::new(h, &profile);
            Ok(polymer::log_martingale(&w, setup.kind, setup.alpha, setup.n).exp())
        })
        .collect();
    out.into_iter().collect()
}

/// Samples `(W_n^{beta1}(omega_i), (T_rho W_n^{beta2})(omega_i))` on common environments.
pub fn paired_samples(setup: &CxSetup, beta1: f64, beta2: f64, rho: f64) -> Result<Vec<(f64, f64)>> {
    let lhs = martingale_samples(setup, beta1)?;
    let rhs = noised_samples(setup, beta2, rho)?;
    Ok(lhs.into_iter().zip(rhs).collect())
}

/// Compares `E f(W_n^{beta1})` with `E f(T_rho W_n^{beta2})` over common environments.
pub fn cx_compare_empirical(
    setup: &CxSetup,
    beta1: f64,
    beta2: f64,
    rho: f64,
    functions: &[Arc<dyn TestFunction>],
) -> Result<CxReport> {
    if setup.replicas < 100 {
        return Err(ConvexOrderError::Invalid("at least 100 replicas are needed".into()));
    }
    if beta1 > beta2 {
        return Err(ConvexOrderError::BetaOrder(beta1, beta2));
    }
    if setup.law.is_bounded() && beta1 > 0.0 && beta1 < beta2 {
        let r0 = rho0(setup.law, beta1, beta2)?.rho0;
        if rho < r0 - 1e-12 {
            return Err(ConvexOrderError::Invalid(format!("rho = {rho} is below rho_0 = {r0}")));
        }
    }
    let samples = paired_samples(setup, beta1, beta2, rho)?;
    Ok(summarize(beta1, beta2, rho, setup, &samples, functions))
}

const ROUNDING_FLOOR: f64 = 1e-12;

/// Per-function verdicts: `E f(rhs) - E f(lhs) >= -4 SE`, or `|.| <= 4 SE` for affine `f`.
pub fn summarize(
    beta1: f64,
    beta2: f64,
    rho: f64,
    setup: &CxSetup,
    samples: &[(f64, f64)],
    functions: &[Arc<dyn TestFunction>],
) -> CxReport {
    let rows = functions
        .iter()
        .map(|f| {
            let l: Vec<f64> = samples.iter().map(|s| f.eval(s.0)).collect();
            let r: Vec<f64> = samples.iter().map(|s| f.eval(s.1)).collect();
            let d: Vec<f64> = l.iter().zip(&r).map(|(a, b)| b - a).collect();
            let diff = MeanSe::of(&d);
            let lhs = MeanSe::of(&l);
            // differences at rounding level count as ties
            let slack = 4.0 * diff.se + ROUNDING_FLOOR * lhs.mean.abs().max(1.0);
            let passed = if f.is_affine() { diff.mean.abs() <= slack } else { diff.mean >= -slack };
            CxRow { function: f.name().to_string(), lhs, rhs: MeanSe::of(&r), diff, passed }
        })
        .collect();
    CxReport { beta1, beta2, rho, n: setup.n, replicas: samples.len(), rows }
}

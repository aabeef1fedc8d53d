//! Transfer-matrix evaluation of polymer partition functions.
//!
//! The forward recursion pushes mass along directed edges:
//! `z_{t+1}(x + u) += z_t(x) * alpha_u * w`, where `w` is the weight of the
//! bond `((t, x), u)` for bond disorder, or of the arrival site `(t + 1, x + u)`
//! for site disorder. With `w = h^beta` the total mass is `W_n`.

use std::sync::Arc;

use crate::disorder::{DisorderError, DisorderLaw};
use crate::lattice::{
    direction_axis, num_directions, Ball, DisorderKind, DriftMeasure, Environment, EnvironmentField, LatticeError,
    LatticePath, LazyEnvironment,
};
use crate::rng::{coordinate_counter, stream, CounterRng};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolymerError {
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("path leaves the stored window at time {0}")]
    OutOfWindow(usize),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, PolymerError>;

/// Per-coordinate multiplicative weights read by the DP.
///
/// `site` indexes the parity class of `t`; `dir` is `0` for site disorder.
pub trait CoordinateWeights: Sync {
    fn weight(&self, t: usize, site: usize, dir: usize) -> f64;

    /// Weights of all bonds leaving `site` at time `t`.
    #[inline]
    fn bond_row(&self, t: usize, site: usize, out: &mut [f64]) {
        for (k, w) in out.iter_mut().enumerate() {
            *w = self.weight(t, site, k);
        }
    }

    /// True when every weight is exactly one; the DP then reports a total mass of exactly one.
    fn is_unit(&self) -> bool {
        false
    }
}

impl<W: CoordinateWeights + ?Sized> CoordinateWeights for &W {
    fn weight(&self, t: usize, site: usize, dir: usize) -> f64 {
        (**self).weight(t, site, dir)
    }

    #[inline]
    fn bond_row(&self, t: usize, site: usize, out: &mut [f64]) {
        (**self).bond_row(t, site, out)
    }

    fn is_unit(&self) -> bool {
        (**self).is_unit()
    }
}

pub struct UnitWeights;

impl CoordinateWeights for UnitWeights {
    fn weight(&self, _: usize, _: usize, _: usize) -> f64 {
        1.0
    }

    fn is_unit(&self) -> bool {
        true
    }
}

/// Weights given by a closure.
pub struct FnWeights<F>(pub F);

impl<F: Fn(usize, usize, usize) -> f64 + Sync> CoordinateWeights for FnWeights<F> {
    fn weight(&self, t: usize, site: usize, dir: usize) -> f64 {
        (self.0)(t, site, dir)
    }
}

/// `h^beta(omega) = exp(beta * omega - lambda(beta))` read from an environment.
pub struct Boltzmann<'a, E: Environment + ?Sized> {
    env: &'a E,
    beta: f64,
    lambda: f64,
}

impl<'a, E: Environment + ?Sized> Boltzmann<'a, E> {
    pub fn new(env: &'a E, law: &DisorderLaw, beta: f64) -> Result<Self> {
        Ok(Self { env, beta, lambda: law.log_mgf(beta)? })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl<E: Environment + ?Sized> CoordinateWeights for Boltzmann<'_, E> {
    #[inline]
    fn weight(&self, t: usize, site: usize, dir: usize) -> f64 {
        (self.beta * self.env.value(t, site, dir) - self.lambda).exp()
    }

    fn is_unit(&self) -> bool {
        self.beta == 0.0
    }
}

/// Boltzmann weights of a lazily generated environment, with the weight of every atom precomputed.
///
/// Produces exactly the same numbers as `Boltzmann` over the same `LazyEnvironment`.
#[derive(Debug, Clone)]
enum AtomTable {
    /// Two atoms: the first below `cut`, the second at or above it.
    Two {
        cut: f64,
        h: [f64; 2],
    },
    Many {
        cumulative: Vec<f64>,
        h: Vec<f64>,
    },
    Continuous,
}

/// Boltzmann weights of a lazily generated environment, with the weight of every atom precomputed.
///
/// Produces exactly the same numbers as `Boltzmann` over the same `LazyEnvironment`.
#[derive(Debug, Clone)]
pub struct LazyBoltzmann {
    rng: CounterRng,
    beta: f64,
    lambda: f64,
    law: DisorderLaw,
    table: AtomTable,
}

impl LazyBoltzmann {
    pub fn new(law: &DisorderLaw, beta: f64, seed: u64) -> Result<Self> {
        let lambda = law.log_mgf(beta)?;
        let table = match law.atoms() {
            Some(a) => {
                let h: Vec<f64> = a.values.iter().map(|v| (beta * v - lambda).exp()).collect();
                if h.len() == 2 {
                    AtomTable::Two { cut: a.cumulative[0], h: [h[0], h[1]] }
                } else {
                    AtomTable::Many { cumulative: a.cumulative.clone(), h }
                }
            }
            None => AtomTable::Continuous,
        };
        Ok(Self { rng: CounterRng::new(seed, stream::ENVIRONMENT), beta, lambda, law: law.clone(), table })
    }

    pub fn of(env: &LazyEnvironment, beta: f64) -> Result<Self> {
        Self::new(env.law(), beta, env.seed())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Weight attached to the uniform variable `u` of a coordinate.
    #[inline]
    pub fn weight_of_uniform(&self, u: f64) -> f64 {
        match &self.table {
            AtomTable::Two { cut, h } => h[usize::from(u >= *cut)],
            AtomTable::Many { cumulative, h } => {
                let mut j = 0;
                while j + 1 < h.len() && cumulative[j] <= u {
                    j += 1;
                }
                h[j]
            }
            AtomTable::Continuous => (self.beta * self.law.quantile_unit(u) - self.lambda).exp(),
        }
    }

    #[inline]
    pub fn uniform(&self, t: usize, site: usize, dir: usize) -> f64 {
        self.rng.uniform(coordinate_counter(t, site, dir))
    }
}

impl CoordinateWeights for LazyBoltzmann {
    #[inline]
    fn weight(&self, t: usize, site: usize, dir: usize) -> f64 {
        self.weight_of_uniform(self.uniform(t, site, dir))
    }

    #[inline]
    fn bond_row(&self, t: usize, site: usize, out: &mut [f64]) {
        let base = coordinate_counter(t, site, 0);
        match &self.table {
            AtomTable::Two { cut, h } => {
                for (k, w) in out.iter_mut().enumerate() {
                    *w = h[usize::from(self.rng.uniform(base | k as u64) >= *cut)];
                }
            }
            _ => {
                for (k, w) in out.iter_mut().enumerate() {
                    *w = self.weight_of_uniform(self.rng.uniform(base | k as u64));
                }
            }
        }
    }

    fn is_unit(&self) -> bool {
        self.beta == 0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DpOptions {
    /// A slice whose maximum leaves `[rescale_below, rescale_above]` is renormalized.
    pub rescale_above: f64,
    pub rescale_below: f64,
}

impl Default for DpOptions {
    fn default() -> Self {
        Self { rescale_above: 1e280, rescale_below: 1e-280 }
    }
}

/// One time slice of the recursion: `z_t = exp(log_offset) * weights`.
pub struct DpState<'a> {
    pub t: usize,
    pub log_offset: f64,
    pub weights: &'a [f64],
    pub ball: &'a Arc<Ball>,
    unit: bool,
}

impl DpState<'_> {
    /// `log sum_x z_t(x)`; exactly zero for unit weights.
    pub fn log_mass(&self) -> f64 {
        if self.unit {
            return 0.0;
        }
        self.weights.iter().sum::<f64>().ln() + self.log_offset
    }

    pub fn mass(&self) -> f64 {
        self.log_mass().exp()
    }

    pub fn parity(&self) -> usize {
        self.t % 2
    }

    pub fn coord(&self, i: usize) -> &[i32] {
        self.ball.coord(self.t % 2, i)
    }

    pub fn endpoint_law(&self) -> EndpointLaw {
        let total: f64 = self.weights.iter().sum();
        EndpointLaw { n: self.t, ball: Arc::clone(self.ball), probs: self.weights.iter().map(|w| w / total).collect() }
    }
}

/// Distribution of the endpoint `X_t` under the polymer measure.
#[derive(Debug, Clone)]
pub struct EndpointLaw {
    n: usize,
    ball: Arc<Ball>,
    probs: Vec<f64>,
}

impl EndpointLaw {
    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.ball.dim()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[i32], f64)> + '_ {
        self.probs.iter().enumerate().map(move |(i, &p)| (self.ball.coord(self.n % 2, i), p))
    }

    pub fn prob(&self, x: &[i32]) -> f64 {
        let s = crate::lattice::l1_norm(x) as usize;
        if s > self.n || s % 2 != self.n % 2 {
            return 0.0;
        }
        self.probs[self.ball.index(x).unwrap()]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `E[exp(lambda . X)]`.
    pub fn mgf(&self, lambda: &[f64]) -> f64 {
        self.iter().map(|(x, p)| p * x.iter().zip(lambda).map(|(&xi, l)| xi as f64 * l).sum::<f64>().exp()).sum()
    }

    /// Law of `X . e_{axis+1}` as `(offset, probs)` with `probs[k]` the mass at `k - offset`.
    pub fn marginal(&self, axis: usize) -> (i64, Vec<f64>) {
        let n = self.n as i64;
        let mut out = vec![0.0; 2 * self.n + 1];
        for (x, p) in self.iter() {
            out[(x[axis] as i64 + n) as usize] += p;
        }
        (n, out)
    }
}

/// Result of a polymer computation.
#[derive(Debug, Clone)]
pub struct PolymerResult {
    pub n: usize,
    /// `log Z_n`.
    pub log_z: f64,
    /// `log W_n = log Z_n - n lambda(beta)`.
    pub log_w: f64,
    pub endpoint: EndpointLaw,
}

impl PolymerResult {
    pub fn w(&self) -> f64 {
        self.log_w.exp()
    }

    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }
}

/// Runs the recursion for `n` steps, calling `observer` on every slice `t = 0..=n`.
///
/// Returns `log` of the total mass at time `n`.
pub fn forward_dp<W: CoordinateWeights + ?Sized>(
    weights: &W,
    kind: DisorderKind,
    alpha: &DriftMeasure,
    n: usize,
    opts: &DpOptions,
    mut observer: impl FnMut(&DpState),
) -> f64 {
    let dim = alpha.dim();
    let nd = num_directions(dim);
    let ball = Ball::shared(dim, n.max(1));
    let unit = weights.is_unit();
    let a = alpha.weights();
    let cap = ball.class_count(0, n).max(ball.class_count(1, n));
    let mut cur = vec![0.0f64; cap];
    let mut next = vec![0.0f64; cap];
    cur[0] = 1.0;
    let mut log_offset = 0.0;
    let mut len = 1;
    observer(&DpState { t: 0, log_offset, weights: &cur[..len], ball: &ball, unit });
    for t in 0..n {
        let p = t % 2;
        let nbr = ball.neighbors(p);
        let next_len = ball.class_count(1 - p, t + 1);
        next[..next_len].fill(0.0);
        match kind {
            DisorderKind::Bond => {
                let mut w = [0.0f64; 2 * crate::lattice::MAX_DIM];
                let w = &mut w[..nd];
                for i in 0..len {
                    let zi = cur[i];
                    if zi == 0.0 {
                        continue;
                    }
                    weights.bond_row(t, i, w);
                    let row = &nbr[i * nd..(i + 1) * nd];
                    for k in 0..nd {
                        next[row[k] as usize] += zi * a[k] * w[k];
                    }
                }
            }
            DisorderKind::Site => {
                for i in 0..len {
                    let zi = cur[i];
                    if zi == 0.0 {
                        continue;
                    }
                    let row = &nbr[i * nd..(i + 1) * nd];
                    for k in 0..nd {
                        next[row[k] as usize] += zi * a[k];
                    }
                }
                if !unit {
                    for (j, z) in next[..next_len].iter_mut().enumerate() {
                        *z *= weights.weight(t + 1, j, 0);
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        len = next_len;
        let max = cur[..len].iter().cloned().fold(0.0, f64::max);
        if max > opts.rescale_above || (max < opts.rescale_below && max > 0.0) {
            let inv = 1.0 / max;
            cur[..len].iter_mut().for_each(|z| *z *= inv);
            log_offset += max.ln();
        }
        observer(&DpState { t: t + 1, log_offset, weights: &cur[..len], ball: &ball, unit });
    }
    if unit {
        0.0
    } else {
        cur[..len].iter().sum::<f64>().ln() + log_offset
    }
}

/// `log W_n` together with the endpoint law at time `n`.
pub fn run_weights<W: CoordinateWeights + ?Sized>(
    weights: &W,
    kind: DisorderKind,
    alpha: &DriftMeasure,
    n: usize,
) -> (f64, EndpointLaw) {
    let mut law = None;
    let log_w = forward_dp(weights, kind, alpha, n, &DpOptions::default(), |s| {
        if s.t == n {
            law = Some(s.endpoint_law());
        }
    });
    (log_w, law.unwrap())
}

/// `log W_n` only.
pub fn log_martingale<W: CoordinateWeights + ?Sized>(
    weights: &W,
    kind: DisorderKind,
    alpha: &DriftMeasure,
    n: usize,
) -> f64 {
    forward_dp(weights, kind, alpha, n, &DpOptions::default(), |_| {})
}

/// `log W_t` for every `t = 0..=n` from a single pass.
pub fn log_martingale_path<W: CoordinateWeights + ?Sized>(
    weights: &W,
    kind: DisorderKind,
    alpha: &DriftMeasure,
    n: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    forward_dp(weights, kind, alpha, n, &DpOptions::default(), |s| out.push(s.log_mass()));
    out
}

/// Partition function, martingale and endpoint law of the polymer in `env`.
pub fn polymer<E: Environment + ?Sized>(
    env: &E,
    law: &DisorderLaw,
    beta: f64,
    alpha: &DriftMeasure,
    n: usize,
) -> Result<PolymerResult> {
    check_dims(env.dim(), alpha)?;
    let w = Boltzmann::new(env, law, beta)?;
    let (log_w, endpoint) = run_weights(&w, env.kind(), alpha, n);
    Ok(PolymerResult { n, log_z: log_w + n as f64 * w.lambda(), log_w, endpoint })
}

/// Same as [`polymer`] with a bounds check against a stored window.
pub fn polymer_in(
    env: &EnvironmentField,
    law: &DisorderLaw,
    beta: f64,
    alpha: &DriftMeasure,
    n: usize,
) -> Result<PolymerResult> {
    check_window(env, n)?;
    polymer(env, law, beta, alpha, n)
}

pub fn endpoint_law<E: Environment + ?Sized>(
    env: &E,
    law: &DisorderLaw,
    beta: f64,
    alpha: &DriftMeasure,
    n: usize,
) -> Result<EndpointLaw> {
    Ok(polymer(env, law, beta, alpha, n)?.endpoint)
}

fn check_dims(dim: usize, alpha: &DriftMeasure) -> Result<()> {
    if dim != alpha.dim() {
        return Err(LatticeError::DimensionMismatch(dim, alpha.dim()).into());
    }
    Ok(())
}

pub fn check_window(env: &EnvironmentField, n: usize) -> Result<()> {
    if env.horizon() < n || env.radius() < n {
        return Err(LatticeError::WindowTooSmall(format!(
            "field has horizon {} and radius {}, need {n}",
            env.horizon(),
            env.radius()
        ))
        .into());
    }
    Ok(())
}

/// `H_n(omega, pi)`: sum of the environment along a strict path.
pub fn energy(env: &EnvironmentField, path: &LatticePath) -> Result<f64> {
    if path.is_lazy() && (0..path.len()).any(|i| path.is_stay(i)) {
        return Err(PolymerError::Invalid("energy is defined for strict paths".into()));
    }
    let pos = path.positions();
    let mut h = 0.0;
    for (i, &step) in path.steps().iter().enumerate() {
        let v = match env.kind() {
            DisorderKind::Site => env.get(i + 1, &pos[i + 1], 0),
            DisorderKind::Bond => env.get(i, &pos[i], step as usize),
        };
        h += v.ok_or(PolymerError::OutOfWindow(i))?;
    }
    Ok(h)
}

/// Point-to-point weight `E^SRW[exp(beta H_n - n lambda) 1{X_n = x}]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointToPoint {
    pub log_value: f64,
    /// False when `x` has the wrong parity or lies beyond distance `n`.
    pub reachable: bool,
}

impl PointToPoint {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

pub fn point_to_point_weight<W: CoordinateWeights + ?Sized>(
    weights: &W,
    kind: DisorderKind,
    dim: usize,
    n: usize,
    x: &[i32],
) -> PointToPoint {
    let s = crate::lattice::l1_norm(x) as usize;
    if s > n || s % 2 != n % 2 {
        return PointToPoint { log_value: f64::NEG_INFINITY, reachable: false };
    }
    let srw = DriftMeasure::uniform(dim);
    let mut out = f64::NEG_INFINITY;
    let target = Ball::shared(dim, n.max(1)).index(x).unwrap();
    forward_dp(weights, kind, &srw, n, &DpOptions::default(), |st| {
        if st.t == n {
            out = st.weights[target].ln() + st.log_offset;
        }
    });
    PointToPoint { log_value: out, reachable: true }
}

/// Nearest lattice point to `n * x` whose norm has the parity of `n` and is at most `n`.
pub fn parity_corrected_endpoint(x: &[f64], n: usize) -> Vec<i32> {
    let mut p: Vec<i32> = x.iter().map(|v| (v * n as f64).round() as i32).collect();
    let norm = |p: &[i32]| crate::lattice::l1_norm(p) as usize;
    while norm(&p) > n {
        let i = (0..p.len()).max_by_key(|&i| p[i].abs()).unwrap();
        p[i] -= p[i].signum();
    }
    if norm(&p) % 2 != n % 2 {
        // move the coordinate with the largest rounding residual one step toward n * x
        let mut best: Option<(usize, i32, f64)> = None;
        for i in 0..p.len() {
            let target = x[i] * n as f64;
            for step in [-1, 1] {
                let mut q = p.clone();
                q[i] += step;
                if norm(&q) > n {
                    continue;
                }
                let dist = (q[i] as f64 - target).abs();
                if best.is_none_or(|(_, _, d)| dist < d - 1e-12) {
                    best = Some((i, step, dist));
                }
            }
        }
        let (i, step, _) = best.expect("a parity fix always exists for n >= 1");
        p[i] += step;
    }
    p
}

/// `((1/d) sum_i cosh lambda_i)^n`, the SRW moment generating function of `X_n`.
pub fn srw_mgf(lambda: &[f64], n: usize) -> f64 {
    let c = lambda.iter().map(|l| l.cosh()).sum::<f64>() / lambda.len() as f64;
    c.powi(n as i32)
}

/// Both sides of the tilted-drift identity for the endpoint mgf.
#[derive(Debug, Clone, Copy)]
pub struct MgfIdentity {
    pub lhs: f64,
    pub rhs: f64,
}

impl MgfIdentity {
    pub fn relative_error(&self) -> f64 {
        if self.lhs == self.rhs {
            0.0
        } else {
            (self.lhs - self.rhs).abs() / self.rhs.abs()
        }
    }
}

/// `mu_n[exp(lambda . X_n)]` against `(W^{alpha(lambda)} / W) * SRW mgf`.
pub fn mgf_ratio_identity<W: CoordinateWeights + ?Sized>(
    weights: &W,
    kind: DisorderKind,
    dim: usize,
    n: usize,
    lambda: &[f64],
) -> MgfIdentity {
    let srw = DriftMeasure::uniform(dim);
    let (log_w, law) = run_weights(weights, kind, &srw, n);
    let tilted = crate::lattice::alpha_of_lambda(lambda);
    let log_w_tilted = log_martingale(weights, kind, &tilted, n);
    let lhs = law.mgf(lambda);
    let rhs = (log_w_tilted - log_w).exp() * srw_mgf(lambda, n);
    MgfIdentity { lhs, rhs }
}

/// Moves a point by direction `k`.
pub fn step(x: &mut [i32], k: usize) {
    if k < num_directions(x.len()) {
        let (axis, sign) = direction_axis(k);
        x[axis] += sign;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> DisorderLaw {
        DisorderLaw::two_point(0.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn beta_zero_gives_exactly_one() {
        for d in 1..=3 {
            let env = LazyEnvironment::new(two_point(), DisorderKind::Bond, d, 3);
            for n in [0, 1, 7, 64] {
                let r = polymer(&env, &two_point(), 0.0, &DriftMeasure::uniform(d), n).unwrap();
                assert_eq!(r.log_w, 0.0);
                assert!((r.endpoint.total() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_environment_closed_form() {
        let law = two_point();
        let beta = 0.7;
        let lambda = law.log_mgf(beta).unwrap();
        for kind in [DisorderKind::Site, DisorderKind::Bond] {
            let env = EnvironmentField::constant(kind, 2, 9, 9, 1.0).unwrap();
            let alpha = DriftMeasure::new(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
            let r = polymer_in(&env, &law, beta, &alpha, 9).unwrap();
            let expect = 9.0 * (beta - lambda);
            assert!((r.log_w - expect).abs() < 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn srw_endpoint_is_binomial() {
        let env = LazyEnvironment::new(two_point(), DisorderKind::Site, 1, 0);
        let law = endpoint_law(&env, &two_point(), 0.0, &DriftMeasure::uniform(1), 6).unwrap();
        for k in 0..=6i32 {
            let x = 2 * k - 6;
            let binom = (0..k).fold(1.0, |acc, j| acc * (6 - j) as f64 / (j + 1) as f64) / 64.0;
            assert!((law.prob(&[x]) - binom).abs() < 1e-15);
        }
        let one = endpoint_law(&env, &two_point(), 0.0, &DriftMeasure::uniform(1), 1).unwrap();
        assert_eq!(one.prob(&[1]), 0.5);
        assert_eq!(one.prob(&[-1]), 0.5);
    }

    #[test]
    fn lazy_boltzmann_matches_generic() {
        for law in [two_point(), DisorderLaw::uniform(-1.0, 1.0).unwrap()] {
            let env = LazyEnvironment::new(law.clone(), DisorderKind::Bond, 2, 41);
            let fast = LazyBoltzmann::of(&env, 0.8).unwrap();
            let slow = Boltzmann::new(&env, &law, 0.8).unwrap();
            let alpha = DriftMeasure::uniform(2);
            let a = log_martingale(&fast, DisorderKind::Bond, &alpha, 10);
            let b = log_martingale(&slow, DisorderKind::Bond, &alpha, 10);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rescaling_preserves_ratios() {
        let law = two_point();
        let env = LazyEnvironment::new(law.clone(), DisorderKind::Bond, 2, 5);
        let w = LazyBoltzmann::of(&env, 1.0).unwrap();
        let alpha = DriftMeasure::uniform(2);
        let aggressive = DpOptions { rescale_above: 1.0 + 1e-9, rescale_below: 1.0 - 1e-9 };
        let mut plain = Vec::new();
        let mut rescaled = Vec::new();
        forward_dp(&w, DisorderKind::Bond, &alpha, 15, &DpOptions::default(), |s| plain.push(s.log_mass()));
        forward_dp(&w, DisorderKind::Bond, &alpha, 15, &aggressive, |s| rescaled.push(s.log_mass()));
        for (a, b) in plain.iter().zip(&rescaled) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn parity_correction() {
        assert_eq!(parity_corrected_endpoint(&[1.0, 0.0], 7), vec![7, 0]);
        assert_eq!(parity_corrected_endpoint(&[0.0, 0.0], 7).iter().map(|v| v.abs()).sum::<i32>(), 1);
        let p = parity_corrected_endpoint(&[0.3, -0.2], 10);
        assert_eq!(crate::lattice::l1_norm(&p) % 2, 0);
        // (3, -2) has odd norm; every fix is one unit away from it
        assert_eq!((p[0] - 3).abs() + (p[1] + 2).abs(), 1);
    }
}

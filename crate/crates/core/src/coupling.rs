//! Coupling of `T_rho W_n^{beta, alpha}` with a lazy-walk mixture of
//! `W^{beta, alpha'}` on deformed bond environments.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::convex_order::{self, ConvexOrderError};
use crate::disorder::{DisorderError, DisorderLaw};
use crate::lattice::{
    self, d_distance, direction_axis, enumerate_paths, m_ratio, num_directions, Ball, DisorderKind, DriftMeasure,
    Environment, EnvironmentField, LatticeError, LatticePath, LazyDriftMeasure, DEFAULT_ENUMERATION_CAP,
};
use crate::noise::{self, NoisedWeights, ResampleProfile};
use crate::polymer::{self, Boltzmann, LazyBoltzmann, PolymerError};
use crate::rng::replica_seed;
use crate::stats::{pairwise_sum, MeanSe};

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Polymer(#[from] PolymerError),
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    ConvexOrder(#[from] ConvexOrderError),
    #[error("the coupling needs bond disorder")]
    SiteDisorder,
    #[error("drift weights must be strictly positive")]
    ZeroWeight,
    #[error("negative coupling weight eta_{direction} = {value:e}")]
    NegativeEta { direction: usize, value: f64 },
    #[error("source window exhausted: needs time {time} and radius {radius}, have horizon {have_time} and radius {have_radius}")]
    WindowExhausted { time: usize, radius: usize, have_time: usize, have_radius: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, CouplingError>;

/// A bond environment; site environments cannot be wrapped.
pub struct BondEnv<'a, E: Environment + ?Sized>(&'a E);

impl<E: Environment + ?Sized> Clone for BondEnv<'_, E> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<E: Environment + ?Sized> Copy for BondEnv<'_, E> {}

impl<'a, E: Environment + ?Sized> BondEnv<'a, E> {
    pub fn new(env: &'a E) -> Result<Self> {
        match env.kind() {
            DisorderKind::Bond => Ok(Self(env)),
            DisorderKind::Site => Err(CouplingError::SiteDisorder),
        }
    }

    pub fn get(&self) -> &'a E {
        self.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingSpec {
    pub alpha: DriftMeasure,
    pub alpha_prime: DriftMeasure,
    /// `eta_u = alpha_u - alpha'_u m`, followed by `eta_0 = m` at index `2d`.
    pub eta: Vec<f64>,
    /// `rho_u = (alpha'_u / alpha_u) m`.
    pub rho: Vec<f64>,
    pub m: f64,
}

impl CouplingSpec {
    pub fn lazy_measure(&self) -> LazyDriftMeasure {
        LazyDriftMeasure::new(self.alpha.dim(), self.eta.clone()).expect("validated at construction")
    }

    pub fn profile(&self) -> ResampleProfile {
        ResampleProfile::PerDirection(self.rho.clone())
    }

    /// `P^eta(pi)`.
    pub fn path_probability(&self, path: &LatticePath) -> f64 {
        path.steps().iter().map(|&s| self.eta[s as usize]).product()
    }
}

pub fn build_coupling_spec(alpha: &DriftMeasure, alpha_prime: &DriftMeasure) -> Result<CouplingSpec> {
    if alpha.dim() != alpha_prime.dim() {
        return Err(LatticeError::DimensionMismatch(alpha.dim(), alpha_prime.dim()).into());
    }
    if alpha.weights().iter().chain(alpha_prime.weights()).any(|&w| w <= 0.0) {
        return Err(CouplingError::ZeroWeight);
    }
    let m = m_ratio(alpha, alpha_prime)?;
    let k = num_directions(alpha.dim());
    let mut eta = Vec::with_capacity(k + 1);
    let mut rho = Vec::with_capacity(k);
    for u in 0..k {
        let (a, b) = (alpha.weight(u), alpha_prime.weight(u));
        let e = a - b * m;
        if e < -1e-14 {
            return Err(CouplingError::NegativeEta { direction: u, value: e });
        }
        eta.push(e.max(0.0));
        rho.push((b / a * m).min(1.0));
    }
    eta.push(m);
    Ok(CouplingSpec { alpha: alpha.clone(), alpha_prime: alpha_prime.clone(), eta, rho, m })
}

/// `N_n(pi) = {i < n : pi_i = pi_{i+1}}`.
pub fn non_jump_times(path: &LatticePath, n: usize) -> Result<Vec<usize>> {
    if path.len() < n {
        return Err(CouplingError::Invalid(format!("path of length {} is shorter than n = {n}", path.len())));
    }
    Ok((0..n).filter(|&i| path.is_stay(i)).collect())
}

/// Non-jump times and path positions there, with the path extended by zero steps after its end.
fn relabeling(path: &LatticePath, slices: usize) -> (Vec<usize>, Vec<Vec<i32>>) {
    let pos = path.positions();
    let mut times = Vec::with_capacity(slices);
    let mut shifts = Vec::with_capacity(slices);
    for i in 0..path.len() {
        if times.len() == slices {
            break;
        }
        if path.is_stay(i) {
            times.push(i);
            shifts.push(pos[i].clone());
        }
    }
    let end = pos[path.len()].clone();
    let mut t = path.len();
    while times.len() < slices {
        times.push(t);
        shifts.push(end.clone());
        t += 1;
    }
    (times, shifts)
}

/// `omega(pi)` read lazily: slice `j` at `y` is the source slice at the `j`-th non-jump time `t_j`, at `y + pi_{t_j}`.
pub struct DeformedView<'a, E: Environment + ?Sized> {
    source: &'a E,
    times: Vec<usize>,
    shifts: Vec<Vec<i32>>,
    ball: Arc<Ball>,
    source_ball: Arc<Ball>,
    source_radius: usize,
}

impl<'a, E: Environment + ?Sized> DeformedView<'a, E> {
    /// View with `slices` abstract time slices on the ball of radius `radius`.
    pub fn new(source: BondEnv<'a, E>, path: &LatticePath, slices: usize, radius: usize) -> Result<Self> {
        let source = source.get();
        if path.dim() != source.dim() || !path.is_lazy() {
            return Err(CouplingError::Invalid("deformation needs a lazy path of the environment's dimension".into()));
        }
        let (times, shifts) = relabeling(path, slices);
        let reach = shifts.iter().map(|s| lattice::l1_norm(s) as usize).max().unwrap_or(0);
        Ok(Self {
            source,
            times,
            shifts,
            ball: Ball::shared(source.dim(), radius),
            source_ball: Ball::shared(source.dim(), radius + reach),
            source_radius: radius + reach,
        })
    }

    /// Source time slice read by abstract slice `j`.
    pub fn source_time(&self, j: usize) -> usize {
        self.times[j]
    }

    /// Source coordinate read by `(j, y, u)`.
    pub fn source_point(&self, j: usize, y: &[i32]) -> Vec<i32> {
        y.iter().zip(&self.shifts[j]).map(|(a, b)| a + b).collect()
    }

    /// Largest source time and radius that can be read.
    pub fn required_window(&self) -> (usize, usize) {
        let t = self.times.iter().max().map_or(0, |t| t + 1);
        (t, self.source_radius)
    }
}

impl<E: Environment + ?Sized> Environment for DeformedView<'_, E> {
    fn kind(&self) -> DisorderKind {
        DisorderKind::Bond
    }

    fn dim(&self) -> usize {
        self.source.dim()
    }

    fn value(&self, t: usize, site: usize, dir: usize) -> f64 {
        let y = self.ball.coord(t % 2, site);
        let mut x = [0i32; 16];
        let x = &mut x[..y.len()];
        for (k, v) in x.iter_mut().enumerate() {
            *v = y[k] + self.shifts[t][k];
        }
        let s = self.source_ball.index(x).expect("source radius covers every shift");
        self.source.value(self.times[t], s, dir)
    }
}

/// Materialized `omega(pi)` on `n` slices of the ball of radius `r`.
pub fn deform_environment(env: &EnvironmentField, path: &LatticePath, n: usize, r: usize) -> Result<EnvironmentField> {
    let view = DeformedView::new(BondEnv::new(env)?, path, n, r)?;
    let (time, radius) = view.required_window();
    if time > env.horizon() || radius > env.radius() {
        return Err(CouplingError::WindowExhausted {
            time,
            radius,
            have_time: env.horizon(),
            have_radius: env.radius(),
        });
    }
    Ok(EnvironmentField::materialize(&view, n, r)?.with_provenance(env.seed(), env.label()))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub terms: usize,
}

/// Evaluates both sides of `sum_pi P^eta(pi) W_{|N_n(pi)|}^{beta, alpha'}(omega(pi)) = (T_rho W_n^{beta, alpha})(omega)`.
///
/// The left side enumerates all lazy paths of length `n` with positive `P^eta` weight.
pub fn coupling_identity_check<E: Environment + ?Sized>(
    env: BondEnv<E>,
    law: &DisorderLaw,
    beta: f64,
    spec: &CouplingSpec,
    n: usize,
) -> Result<IdentityCheck> {
    let dim = env.get().dim();
    if spec.alpha.dim() != dim {
        return Err(LatticeError::DimensionMismatch(spec.alpha.dim(), dim).into());
    }
    law.log_mgf(beta)?;
    let paths: Vec<LatticePath> =
        enumerate_paths(n, dim, true, DEFAULT_ENUMERATION_CAP)?.filter(|p| spec.path_probability(p) > 0.0).collect();
    let terms: Vec<Result<f64>> = paths
        .par_iter()
        .map(|p| {
            let slices = non_jump_times(p, n)?.len();
            let view = DeformedView::new(env, p, slices, slices)?;
            let h = Boltzmann::new(&view, law, beta)?;
            let w = polymer::log_martingale(&h, DisorderKind::Bond, &spec.alpha_prime, slices).exp();
            Ok(spec.path_probability(p) * w)
        })
        .collect();
    let terms = terms.into_iter().collect::<Result<Vec<f64>>>()?;
    let lhs = pairwise_sum(&terms);
    let rhs = noise::noised_martingale_exact(env.get(), law, beta, &spec.alpha, n, &spec.profile())?;
    let abs_error = (lhs - rhs).abs();
    Ok(IdentityCheck { lhs, rhs, abs_error, rel_error: abs_error / rhs.abs(), terms: terms.len() })
}

/// Drifts obtained by tilting `alpha_plus` along each axis with strengths `tilts`.
pub fn tilted_drifts(alpha_plus: &DriftMeasure, tilts: &[f64]) -> Vec<DriftMeasure> {
    let dim = alpha_plus.dim();
    let mut out = vec![alpha_plus.clone()];
    for axis in 0..dim {
        for &s in tilts {
            let w: Vec<f64> = (0..num_directions(dim))
                .map(|k| {
                    let (a, sign) = direction_axis(k);
                    let e = if a == axis { s * sign as f64 } else { 0.0 };
                    alpha_plus.weight(k) * e.exp()
                })
                .collect();
            out.push(DriftMeasure::normalized(dim, w).expect("positive weights"));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftRow {
    pub drift: Vec<f64>,
    pub d: f64,
    pub n: usize,
    /// `E (W_n^{beta, alpha} - 1)^+`.
    pub lhs: MeanSe,
    /// `E (T_rho W_n^{beta_plus, alpha} - 1)^+` with `rho = rho(alpha -> alpha_plus)`.
    pub rhs_coupling: MeanSe,
    /// The same with the scalar retention `rho_0`.
    pub rhs_rho0: MeanSe,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftScanReport {
    pub beta: f64,
    pub beta_plus: f64,
    pub rho0: f64,
    pub rows: Vec<DriftRow>,
    /// Grid drifts rejected because `d(alpha, alpha_plus) < rho_0`.
    pub rejected: usize,
}

impl DriftScanReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

#[derive(Debug, Clone)]
pub struct DriftScanSetup<'a> {
    pub law: &'a DisorderLaw,
    pub beta: f64,
    pub beta_plus: f64,
    pub alpha_plus: &'a DriftMeasure,
    pub tilts: &'a [f64],
    pub ns: &'a [usize],
    pub replicas: usize,
    pub seed: u64,
}

/// Checks `E f(W_n^{beta, alpha}) <= E f(T_rho W_n^{beta_plus, alpha})`, `f(x) = (x - 1)^+`,
/// for every grid drift with `d(alpha, alpha_plus) >= rho_0(beta, beta_plus)`.
pub fn drift_stability_scan(setup: &DriftScanSetup) -> Result<DriftScanReport> {
    let law = setup.law;
    if !law.is_bounded() {
        return Err(CouplingError::Invalid("the drift scan needs a bounded law".into()));
    }
    if !(setup.beta > 0.0 && setup.beta <= setup.beta_plus) {
        return Err(ConvexOrderError::BetaOrder(setup.beta, setup.beta_plus).into());
    }
    if setup.replicas < 2 {
        return Err(CouplingError::Invalid("at least two replicas are needed".into()));
    }
    let rho0 = convex_order::rho0(law, setup.beta, setup.beta_plus)?.rho0;
    let mut rows = Vec::new();
    let mut rejected = 0;
    let scalar = ResampleProfile::scalar(rho0)?;
    for alpha in tilted_drifts(setup.alpha_plus, setup.tilts) {
        let d = d_distance(&alpha, setup.alpha_plus)?;
        if d < rho0 {
            rejected += 1;
            continue;
        }
        let profile = build_coupling_spec(&alpha, setup.alpha_plus)?.profile();
        for &n in setup.ns {
            let samples: Vec<Result<[f64; 3]>> = (0..setup.replicas as u64)
                .into_par_iter()
                .map(|i| {
                    let seed = replica_seed(setup.seed, i);
                    let f = |w: f64| (w - 1.0).max(0.0);
                    let h = LazyBoltzmann::new(law, setup.beta, seed)?;
                    let lhs = polymer::log_martingale(&h, DisorderKind::Bond, &alpha, n).exp();
                    let hp = LazyBoltzmann::new(law, setup.beta_plus, seed)?;
                    let a = polymer::log_martingale(&NoisedWeights::new(&hp, &profile), DisorderKind::Bond, &alpha, n);
                    let b = polymer::log_martingale(&NoisedWeights::new(&hp, &scalar), DisorderKind::Bond, &alpha, n);
                    Ok([f(lhs), f(a.exp()), f(b.exp())])
                })
                .collect();
            let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
            let col = |k: usize| samples.iter().map(|s| s[k]).collect::<Vec<f64>>();
            let (l, a, b) = (col(0), col(1), col(2));
            let diff = |x: &[f64]| MeanSe::of(&x.iter().zip(&l).map(|(x, y)| x - y).collect::<Vec<_>>());
            let ok = |m: MeanSe| m.mean >= -4.0 * m.se || (m.se == 0.0 && m.mean >= -1e-15);
            let passed = ok(diff(&a)) && ok(diff(&b));
            rows.push(DriftRow {
                drift: alpha.weights().to_vec(),
                d,
                n,
                lhs: MeanSe::of(&l),
                rhs_coupling: MeanSe::of(&a),
                rhs_rho0: MeanSe::of(&b),
                passed,
            });
        }
    }
    Ok(DriftScanReport { beta: setup.beta, beta_plus: setup.beta_plus, rho0, rows, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LazyEnvironment;

    #[test]
    fn one_dimensional_hand_example() {
        let a = DriftMeasure::new(1, vec![0.6, 0.4]).unwrap();
        let b = DriftMeasure::uniform(1);
        let s = build_coupling_spec(&a, &b).unwrap();
        assert!((s.m - 0.8).abs() < 1e-15);
        let expect_eta = [0.2, 0.0, 0.8];
        for (x, y) in s.eta.iter().zip(expect_eta) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((s.rho[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.rho[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equal_drifts_collapse() {
        let a = DriftMeasure::normalized(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = build_coupling_spec(&a, &a).unwrap();
        assert_eq!(s.eta, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.rho, vec![1.0; 4]);
        let law = DisorderLaw::two_point(0.0, 1.0, 0.5).unwrap();
        let env = LazyEnvironment::new(law.clone(), DisorderKind::Bond, 2, 5);
        let c = coupling_identity_check(BondEnv::new(&env).unwrap(), &law, 0.5, &s, 5).unwrap();
        assert_eq!(c.terms, 1);
        assert_eq!(c.abs_error, 0.0);
    }

    #[test]
    fn site_disorder_is_rejected() {
        let law = DisorderLaw::two_point(0.0, 1.0, 0.5).unwrap();
        let env = LazyEnvironment::new(law, DisorderKind::Site, 1, 5);
        assert!(matches!(BondEnv::new(&env), Err(CouplingError::SiteDisorder)));
    }

    #[test]
    fn non_jump_time_examples() {
        let strict = LatticePath::new(1, true, vec![0, 1, 0]).unwrap();
        assert!(non_jump_times(&strict, 3).unwrap().is_empty());
        let stay = LatticePath::new(1, true, vec![2, 2, 2]).unwrap();
        assert_eq!(non_jump_times(&stay, 3).unwrap(), vec![0, 1, 2]);
        let mixed = LatticePath::new(1, true, vec![2, 0, 2]).unwrap();
        assert_eq!(non_jump_times(&mixed, 3).unwrap(), vec![0, 2]);
    }

    #[test]
    fn small_identity() {
        let law = DisorderLaw::two_point(-1.0, 2.0, 0.3).unwrap();
        let env = LazyEnvironment::new(law.clone(), DisorderKind::Bond, 1, 11);
        let a = DriftMeasure::new(1, vec![0.7, 0.3]).unwrap();
        let b = DriftMeasure::new(1, vec![0.45, 0.55]).unwrap();
        let s = build_coupling_spec(&a, &b).unwrap();
        let c = coupling_identity_check(BondEnv::new(&env).unwrap(), &law, 0.8, &s, 5).unwrap();
        assert!(c.rel_error < 1e-12, "{c:?}");
    }
}

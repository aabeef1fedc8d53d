//! Noise operators: resampling of environments and the exact conditional expectation `T_rho W_n`.
//!
//! Since every path visits each coordinate at most once and `E[h] = 1`,
//! `T_rho W_n` is the polymer sum with each weight `h` replaced by
//! `rho h + 1 - rho`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderLaw;
use crate::lattice::{
    direction_label, num_directions, parse_direction, DisorderKind, DriftMeasure, Environment, EnvironmentField,
    LatticeError,
};
use crate::polymer::{self, Boltzmann, CoordinateWeights, PolymerError};
use crate::rng::{coordinate_counter, replica_seed, stream, CounterRng};
use crate::stats::MeanSe;

/// Retention probabilities of the (inhomogeneous) noise operator.
#[derive(Debug, Clone)]
pub enum ResampleProfile {
    Scalar(f64),
    /// `rho_e` depends only on the direction of the bond `e`.
    PerDirection(Vec<f64>),
    /// One probability per coordinate, laid out like the environment.
    Table(Arc<EnvironmentField>),
}

impl PartialEq for ResampleProfile {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Scalar(a), Self::Scalar(b)) => a == b,
            (Self::PerDirection(a), Self::PerDirection(b)) => a == b,
            (Self::Table(a), Self::Table(b)) => a.kind() == b.kind() && a.values() == b.values(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Scalar(f64),
    PerDirection(BTreeMap<String, f64>),
}

impl ResampleProfile {
    pub fn scalar(rho: f64) -> Result<Self, PolymerError> {
        check_prob(rho)?;
        Ok(Self::Scalar(rho))
    }

    pub fn per_direction(rho: Vec<f64>) -> Result<Self, PolymerError> {
        if rho.is_empty() || !rho.len().is_multiple_of(2) {
            return Err(PolymerError::Invalid("per-direction profile needs 2d entries".into()));
        }
        for &r in &rho {
            check_prob(r)?;
        }
        Ok(Self::PerDirection(rho))
    }

    pub fn table(rho: EnvironmentField) -> Result<Self, PolymerError> {
        for &r in rho.values() {
            check_prob(r)?;
        }
        Ok(Self::Table(Arc::new(rho)))
    }

    pub fn from_spec(spec: &ProfileSpec, dim: usize) -> Result<Self, PolymerError> {
        match spec {
            ProfileSpec::Scalar(r) => Self::scalar(*r),
            ProfileSpec::PerDirection(map) => {
                let mut rho = vec![f64::NAN; num_directions(dim)];
                for (key, &v) in map {
                    let k = parse_direction(dim, key)
                        .filter(|&k| k < rho.len())
                        .ok_or_else(|| PolymerError::Invalid(format!("bad direction {key:?} for d = {dim}")))?;
                    rho[k] = v;
                }
                if let Some(k) = rho.iter().position(|r| r.is_nan()) {
                    return Err(PolymerError::Invalid(format!("missing direction {}", direction_label(dim, k))));
                }
                Self::per_direction(rho)
            }
        }
    }

    /// Checks the profile against an environment kind and dimension.
    pub fn validate(&self, kind: DisorderKind, dim: usize) -> Result<(), PolymerError> {
        match self {
            Self::Scalar(_) => Ok(()),
            Self::PerDirection(r) if kind == DisorderKind::Bond && r.len() == num_directions(dim) => Ok(()),
            Self::PerDirection(_) => {
                Err(PolymerError::Invalid("per-direction profiles need bond disorder with 2d entries".into()))
            }
            Self::Table(f) if f.kind() == kind && f.dim() == dim => Ok(()),
            Self::Table(_) => Err(LatticeError::DimensionMismatch(dim, 0).into()),
        }
    }

    #[inline]
    pub fn rho(&self, t: usize, site: usize, dir: usize) -> f64 {
        match self {
            Self::Scalar(r) => *r,
            Self::PerDirection(r) => r[dir],
            Self::Table(f) => f.value(t, site, dir),
        }
    }

    fn all_equal(&self, v: f64) -> bool {
        match self {
            Self::Scalar(r) => *r == v,
            Self::PerDirection(r) => r.iter().all(|&x| x == v),
            Self::Table(f) => f.values().iter().all(|&x| x == v),
        }
    }
}

fn check_prob(r: f64) -> Result<(), PolymerError> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(PolymerError::Invalid(format!("retention probability {r} outside [0, 1]")))
    }
}

/// Weights `rho h + 1 - rho`.
pub struct NoisedWeights<'a, W: CoordinateWeights> {
    inner: W,
    profile: &'a ResampleProfile,
}

impl<'a, W: CoordinateWeights> NoisedWeights<'a, W> {
    pub fn new(inner: W, profile: &'a ResampleProfile) -> Self {
        Self { inner, profile }
    }
}

impl<W: CoordinateWeights> CoordinateWeights for NoisedWeights<'_, W> {
    #[inline]
    fn weight(&self, t: usize, site: usize, dir: usize) -> f64 {
        let rho = self.profile.rho(t, site, dir);
        if rho == 1.0 {
            self.inner.weight(t, site, dir)
        } else if rho == 0.0 {
            1.0
        } else {
            rho * self.inner.weight(t, site, dir) + (1.0 - rho)
        }
    }

    #[inline]
    fn bond_row(&self, t: usize, site: usize, out: &mut [f64]) {
        self.inner.bond_row(t, site, out);
        for (k, w) in out.iter_mut().enumerate() {
            let rho = self.profile.rho(t, site, k);
            if rho == 0.0 {
                *w = 1.0;
            } else if rho != 1.0 {
                *w = rho * *w + (1.0 - rho);
            }
        }
    }

    fn is_unit(&self) -> bool {
        self.inner.is_unit() || self.profile.all_equal(0.0)
    }
}

/// `omega_rho`: each coordinate kept with probability `rho`, else redrawn from `law`.
pub struct Resampled<'a, E: Environment + ?Sized> {
    env: &'a E,
    law: &'a DisorderLaw,
    profile: &'a ResampleProfile,
    retain: CounterRng,
    fresh: CounterRng,
}

impl<'a, E: Environment + ?Sized> Resampled<'a, E> {
    pub fn new(env: &'a E, law: &'a DisorderLaw, profile: &'a ResampleProfile, fresh_seed: u64) -> Self {
        Self {
            env,
            law,
            profile,
            retain: CounterRng::new(fresh_seed, stream::RETAIN),
            fresh: CounterRng::new(fresh_seed, stream::FRESH),
        }
    }

    #[inline]
    pub fn retained(&self, t: usize, site: usize, dir: usize) -> bool {
        self.retain.uniform(coordinate_counter(t, site, dir)) <= self.profile.rho(t, site, dir)
    }
}

impl<E: Environment + ?Sized> Environment for Resampled<'_, E> {
    fn kind(&self) -> DisorderKind {
        self.env.kind()
    }

    fn dim(&self) -> usize {
        self.env.dim()
    }

    #[inline]
    fn value(&self, t: usize, site: usize, dir: usize) -> f64 {
        if self.retained(t, site, dir) {
            self.env.value(t, site, dir)
        } else {
            self.law.quantile_unit(self.fresh.uniform(coordinate_counter(t, site, dir)))
        }
    }
}

/// Materialized resampling of a stored field.
pub fn resample(
    env: &EnvironmentField,
    law: &DisorderLaw,
    profile: &ResampleProfile,
    fresh_seed: u64,
) -> Result<EnvironmentField, PolymerError> {
    profile.validate(env.kind(), env.dim())?;
    if let ResampleProfile::Table(f) = profile {
        if f.len() != env.len() {
            return Err(PolymerError::Invalid("profile table shape differs from the environment".into()));
        }
    }
    let view = Resampled::new(env, law, profile, fresh_seed);
    Ok(env.map(|t, i, k, _| view.value(t, i, k)).with_provenance(fresh_seed, env.label()))
}

/// `(T_rho W_n^{beta, alpha})(omega)`.
pub fn noised_martingale_exact<E: Environment + ?Sized>(
    env: &E,
    law: &DisorderLaw,
    beta: f64,
    alpha: &DriftMeasure,
    n: usize,
    profile: &ResampleProfile,
) -> Result<f64, PolymerError> {
    Ok(noised_log_martingale(env, law, beta, alpha, n, profile)?.exp())
}

pub fn noised_log_martingale<E: Environment + ?Sized>(
    env: &E,
    law: &DisorderLaw,
    beta: f64,
    alpha: &DriftMeasure,
    n: usize,
    profile: &ResampleProfile,
) -> Result<f64, PolymerError> {
    profile.validate(env.kind(), env.dim())?;
    let h = Boltzmann::new(env, law, beta)?;
    let w = NoisedWeights::new(h, profile);
    Ok(polymer::log_martingale(&w, env.kind(), alpha, n))
}

/// Monte Carlo average of `W_n(omega_rho)` over independent resamplings.
#[allow(clippy::too_many_arguments)]
pub fn noised_martingale_mc<E: Environment + ?Sized>(
    env: &E,
    law: &DisorderLaw,
    beta: f64,
    alpha: &DriftMeasure,
    n: usize,
    profile: &ResampleProfile,
    replicas: usize,
    seed: u64,
) -> Result<MeanSe, PolymerError> {
    if replicas < 2 {
        return Err(PolymerError::Invalid("at least two replicas are needed".into()));
    }
    profile.validate(env.kind(), env.dim())?;
    law.log_mgf(beta)?;
    let samples: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let view = Resampled::new(env, law, profile, replica_seed(seed, i));
            let h = Boltzmann::new(&view, law, beta).expect("mgf checked above");
            polymer::log_martingale(&h, env.kind(), alpha, n).exp()
        })
        .collect();
    Ok(MeanSe::of(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LazyEnvironment;

    fn law() -> DisorderLaw {
        DisorderLaw::two_point(0.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn full_retention_is_identity() {
        let env = EnvironmentField::sample(&law(), DisorderKind::Bond, 4, 4, 2, 3).unwrap();
        let out = resample(&env, &law(), &ResampleProfile::Scalar(1.0), 99).unwrap();
        assert_eq!(out.values(), env.values());
        let alpha = DriftMeasure::uniform(2);
        let w = polymer::polymer(&env, &law(), 0.6, &alpha, 4).unwrap().w();
        let t1 = noised_martingale_exact(&env, &law(), 0.6, &alpha, 4, &ResampleProfile::Scalar(1.0)).unwrap();
        assert_eq!(w, t1);
    }

    #[test]
    fn zero_retention_gives_one() {
        let env = LazyEnvironment::new(law(), DisorderKind::Site, 3, 1);
        let v = noised_martingale_exact(&env, &law(), 1.0, &DriftMeasure::uniform(3), 9, &ResampleProfile::Scalar(0.0))
            .unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn zero_retention_decorrelates() {
        let u = DisorderLaw::uniform(0.0, 1.0).unwrap();
        let env = EnvironmentField::sample(&u, DisorderKind::Site, 25, 25, 2, 8).unwrap();
        let out = resample(&env, &u, &ResampleProfile::Scalar(0.0), 17).unwrap();
        let n = env.len() as f64;
        assert!(n >= 1e4);
        let (mx, my) = (0.5, 0.5);
        let cov: f64 = env.values().iter().zip(out.values()).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
        let corr = cov / (1.0 / 12.0);
        assert!(corr.abs() < 4.0 / n.sqrt(), "corr {corr}");
    }

    #[test]
    fn half_retention_fraction() {
        let u = DisorderLaw::uniform(0.0, 1.0).unwrap();
        let env = EnvironmentField::sample(&u, DisorderKind::Bond, 12, 12, 2, 2).unwrap();
        let out = resample(&env, &u, &ResampleProfile::Scalar(0.5), 5).unwrap();
        let n = env.len() as f64;
        let kept = env.values().iter().zip(out.values()).filter(|(a, b)| a == b).count() as f64;
        assert!((kept / n - 0.5).abs() < 4.0 * (0.25 / n).sqrt());
    }

    #[test]
    fn constant_field_closed_form_and_monotone() {
        let l = law();
        let beta = 0.8;
        let lambda = l.log_mgf(beta).unwrap();
        let n = 7;
        let env = EnvironmentField::constant(DisorderKind::Bond, 2, n, n, 1.0).unwrap();
        let alpha = DriftMeasure::uniform(2);
        let mut prev = f64::INFINITY;
        for i in (0..=10).rev() {
            let rho = i as f64 / 10.0;
            let v = noised_martingale_exact(&env, &l, beta, &alpha, n, &ResampleProfile::Scalar(rho)).unwrap();
            let expect = (rho * (beta - lambda).exp() + 1.0 - rho).powi(n as i32);
            assert!((v - expect).abs() < 1e-12 * expect);
            assert!(v <= prev && v >= 1.0);
            prev = v;
        }
    }

    #[test]
    fn profile_config_forms() {
        let s: ProfileSpec = serde_json::from_str(r#"{"scalar":0.3}"#).unwrap();
        assert_eq!(ResampleProfile::from_spec(&s, 1).unwrap(), ResampleProfile::Scalar(0.3));
        let p: ProfileSpec = serde_json::from_str(r#"{"per_direction":{"+e1":0.5,"-e1":1.0}}"#).unwrap();
        assert_eq!(ResampleProfile::from_spec(&p, 1).unwrap(), ResampleProfile::PerDirection(vec![0.5, 1.0]));
        assert!(ResampleProfile::scalar(1.5).is_err());
        let missing: ProfileSpec = serde_json::from_str(r#"{"per_direction":{"+e1":0.5}}"#).unwrap();
        assert!(ResampleProfile::from_spec(&missing, 1).is_err());
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{direction_label, num_directions, parse_direction, LatticeError, Result};

const SUM_TOL: f64 = 1e-12;

/// Increment law `alpha` of a nearest-neighbour walk; every direction has positive mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DriftSpec", into = "DriftSpec")]
pub struct DriftMeasure {
    dim: usize,
    weights: Vec<f64>,
}

/// Config form: either `{"+e1": 0.6, "-e1": 0.4}` or a list of `2d` weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriftSpec {
    Named(BTreeMap<String, f64>),
    List(Vec<f64>),
}

impl DriftMeasure {
    pub fn new(dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > super::MAX_DIM || weights.len() != num_directions(dim) {
            return Err(LatticeError::InvalidDrift(format!(
                "expected {} weights for d = {dim}, got {}",
                num_directions(dim),
                weights.len()
            )));
        }
        if let Some(k) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(LatticeError::InvalidDrift(format!(
                "weight of {} must be positive, got {}",
                direction_label(dim, k),
                weights[k]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(LatticeError::InvalidDrift(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { dim, weights })
    }

    /// Normalizes positive weights before validating.
    pub fn normalized(dim: usize, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        Self::new(dim, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(dim: usize) -> Self {
        let k = num_directions(dim);
        Self { dim, weights: vec![1.0 / k as f64; k] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / num_directions(self.dim) as f64;
        self.weights.iter().all(|&w| w == u)
    }

    pub fn to_named(&self) -> BTreeMap<String, f64> {
        self.weights.iter().enumerate().map(|(k, &w)| (direction_label(self.dim, k), w)).collect()
    }
}

impl TryFrom<DriftSpec> for DriftMeasure {
    type Error = LatticeError;

    fn try_from(spec: DriftSpec) -> Result<Self> {
        match spec {
            DriftSpec::List(w) => {
                if w.len() % 2 != 0 {
                    return Err(LatticeError::InvalidDrift("odd number of weights".into()));
                }
                DriftMeasure::new(w.len() / 2, w)
            }
            DriftSpec::Named(map) => {
                let mut dim = 0;
                for key in map.keys() {
                    let axis: usize = key
                        .trim_start_matches(['+', '-'])
                        .strip_prefix('e')
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| LatticeError::InvalidDrift(format!("bad direction {key:?}")))?;
                    dim = dim.max(axis);
                }
                let mut w = vec![f64::NAN; num_directions(dim)];
                for (key, v) in map {
                    let k = parse_direction(dim, &key)
                        .filter(|&k| k < num_directions(dim))
                        .ok_or_else(|| LatticeError::InvalidDrift(format!("bad direction {key:?}")))?;
                    w[k] = v;
                }
                DriftMeasure::new(dim, w)
            }
        }
    }
}

impl From<DriftMeasure> for DriftSpec {
    fn from(a: DriftMeasure) -> Self {
        DriftSpec::Named(a.to_named())
    }
}

/// Increment law of a lazy walk on `U` plus the zero step (index `2d`); zero masses allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct LazyDriftMeasure {
    dim: usize,
    weights: Vec<f64>,
}

impl LazyDriftMeasure {
    pub fn new(dim: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != num_directions(dim) + 1 {
            return Err(LatticeError::InvalidDrift(format!(
                "lazy measure needs {} weights, got {}",
                num_directions(dim) + 1,
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(LatticeError::InvalidDrift("lazy weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(LatticeError::InvalidDrift(format!("lazy weights sum to {total}, not 1")));
        }
        Ok(Self { dim, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn stay(&self) -> f64 {
        self.weights[num_directions(self.dim)]
    }
}

/// Normalized exponentials over the `2d` directions.
pub fn softmax_directions(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Exponentially tilted drift: `alpha(lambda)_u` proportional to `exp(lambda . u)`.
pub fn alpha_of_lambda(lambda: &[f64]) -> DriftMeasure {
    let dim = lambda.len();
    let logits: Vec<f64> = lambda.iter().flat_map(|&l| [l, -l]).collect();
    let weights = softmax_directions(&logits);
    DriftMeasure { dim, weights }
}

/// `m(alpha | alpha') = min_u alpha_u / alpha'_u`.
pub fn m_ratio(alpha: &DriftMeasure, alpha_prime: &DriftMeasure) -> Result<f64> {
    if alpha.dim != alpha_prime.dim {
        return Err(LatticeError::DimensionMismatch(alpha.dim, alpha_prime.dim));
    }
    if alpha == alpha_prime {
        return Ok(1.0);
    }
    let m = alpha.weights.iter().zip(&alpha_prime.weights).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min);
    // both measures sum to one, so the minimum ratio cannot exceed 1
    Ok(m.min(1.0))
}

/// Symmetrized `d(alpha, alpha') = m(alpha | alpha') m(alpha' | alpha)`.
pub fn d_distance(alpha: &DriftMeasure, alpha_prime: &DriftMeasure) -> Result<f64> {
    Ok(m_ratio(alpha, alpha_prime)? * m_ratio(alpha_prime, alpha)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeqRng;

    fn random_drift(rng: &mut SeqRng, dim: usize) -> DriftMeasure {
        let w: Vec<f64> = (0..2 * dim).map(|_| rng.range(0.05, 1.0)).collect();
        DriftMeasure::normalized(dim, w).unwrap()
    }

    #[test]
    fn alpha_of_lambda_examples() {
        let a = alpha_of_lambda(&[0.0, 0.0, 0.0]);
        assert!(a.weights().iter().all(|&w| (w - 1.0 / 6.0).abs() < 1e-16));
        let b = alpha_of_lambda(&[2f64.ln()]);
        assert!((b.weight(0) - 0.8).abs() < 1e-15);
        assert!((b.weight(1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn alpha_of_lambda_normalizes() {
        let mut rng = SeqRng::new(3);
        for _ in 0..100 {
            let d = 1 + rng.below(3);
            let l: Vec<f64> = (0..d).map(|_| rng.range(-3.0, 3.0)).collect();
            let a = alpha_of_lambda(&l);
            assert!((a.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(DriftMeasure::new(d, a.weights().to_vec()).is_ok());
        }
    }

    #[test]
    fn softmax_is_invariant_under_common_shift() {
        let mut rng = SeqRng::new(4);
        for _ in 0..100 {
            let logits: Vec<f64> = (0..6).map(|_| rng.range(-2.0, 2.0)).collect();
            let c = rng.range(-5.0, 5.0);
            let shifted: Vec<f64> = logits.iter().map(|l| l + c).collect();
            let (a, b) = (softmax_directions(&logits), softmax_directions(&shifted));
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-14));
        }
    }

    #[test]
    fn m_and_d_examples() {
        let a = DriftMeasure::new(1, vec![0.6, 0.4]).unwrap();
        let b = DriftMeasure::uniform(1);
        assert!((m_ratio(&a, &b).unwrap() - 0.8).abs() < 1e-15);
        assert!((d_distance(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m_ratio(&a, &a).unwrap(), 1.0);
        assert_eq!(d_distance(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn m_ratio_bounds_on_random_pairs() {
        let mut rng = SeqRng::new(5);
        for _ in 0..1000 {
            let d = 1 + rng.below(3);
            let a = random_drift(&mut rng, d);
            let b = random_drift(&mut rng, d);
            let mab = m_ratio(&a, &b).unwrap();
            let mba = m_ratio(&b, &a).unwrap();
            assert!(mab * mba <= 1.0);
            assert!(mab < 1.0 && mba < 1.0);
            for k in 0..2 * d {
                assert!(mab <= a.weight(k) / b.weight(k));
            }
            let dab = d_distance(&a, &b).unwrap();
            assert_eq!(dab, d_distance(&b, &a).unwrap());
            assert!((0.0..=1.0).contains(&dab));
        }
    }

    #[test]
    fn zero_weight_rejected() {
        assert!(DriftMeasure::new(1, vec![1.0, 0.0]).is_err());
        assert!(DriftMeasure::new(1, vec![0.7, 0.4]).is_err());
        assert!(DriftMeasure::new(2, vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn named_config_form() {
        let a: DriftMeasure = serde_json::from_str(r#"{"+e1":0.6,"-e1":0.4}"#).unwrap();
        assert_eq!(a, DriftMeasure::new(1, vec![0.6, 0.4]).unwrap());
        let b: DriftMeasure = serde_json::from_str("[0.25,0.25,0.25,0.25]").unwrap();
        assert_eq!(b, DriftMeasure::uniform(2));
        assert!(serde_json::from_str::<DriftMeasure>(r#"{"+e1":0.6,"-e2":0.4}"#).is_err());
    }

    #[test]
    fn lazy_measure_validation() {
        assert!(LazyDriftMeasure::new(1, vec![0.2, 0.0, 0.8]).is_ok());
        assert!(LazyDriftMeasure::new(1, vec![0.2, -0.1, 0.9]).is_err());
        assert!(LazyDriftMeasure::new(1, vec![0.2, 0.8]).is_err());
    }
}

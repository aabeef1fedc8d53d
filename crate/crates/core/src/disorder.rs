//! One-site environment marginals and their scalar functionals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisorderError {
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("exponential moment diverges at beta = {beta} (rate {rate})")]
    DivergentMgf { beta: f64, rate: f64 },
    #[error("quantile level {0} outside [0, 1]")]
    LevelOutOfRange(f64),
    #[error("quantile at level 1 is infinite for an upper-unbounded law")]
    UnboundedQuantile,
    #[error("inverse temperature must be finite and nonnegative, got {0}")]
    InvalidBeta(f64),
    #[error("invalid beta pair: {0}")]
    InvalidBetaPair(String),
}

pub type Result<T> = std::result::Result<T, DisorderError>;

/// Wire form of a law, as it appears in config files: `{type = "two_point", a = 0, b = 1, p = 0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    /// `P(omega = b) = p`, `P(omega = a) = 1 - p`.
    TwoPoint {
        a: f64,
        b: f64,
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    DiscreteFinite {
        values: Vec<f64>,
        probs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    UniformInterval {
        lo: f64,
        hi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Exponential {
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    /// `omega = -X` with `X ~ Exp(rate)`: bounded above, unbounded below.
    ReflectedExponential {
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LawKind {
    TwoPoint { a: f64, b: f64, p: f64 },
    DiscreteFinite { values: Vec<f64>, probs: Vec<f64> },
    UniformInterval { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    ReflectedExponential { rate: f64 },
}

/// Finite support: atoms in increasing order with their masses and cumulative masses.
#[derive(Debug, Clone, PartialEq)]
pub struct Atoms {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
    /// `cumulative[i] = probs[0] + ... + probs[i]`, last entry forced to 1.
    pub cumulative: Vec<f64>,
}

impl Atoms {
    /// Index of the atom selected at level `u` by the right-continuous inverse CDF.
    #[inline]
    pub fn index_at(&self, u: f64) -> usize {
        let last = self.values.len() - 1;
        // first i with cumulative[i] > u
        self.cumulative.partition_point(|&c| c <= u).min(last)
    }
}

/// The law `P_0` of a single environment coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpec", into = "LawSpec")]
pub struct DisorderLaw {
    kind: LawKind,
    label: String,
    atoms: Option<Atoms>,
}

const PROB_SUM_TOL: f64 = 1e-12;

impl DisorderLaw {
    pub fn two_point(a: f64, b: f64, p: f64) -> Result<Self> {
        Self::from_kind(LawKind::TwoPoint { a, b, p }, None)
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        Self::from_kind(LawKind::DiscreteFinite { values, probs }, None)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::from_kind(LawKind::UniformInterval { lo, hi }, None)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::from_kind(LawKind::Exponential { rate }, None)
    }

    pub fn reflected_exponential(rate: f64) -> Result<Self> {
        Self::from_kind(LawKind::ReflectedExponential { rate }, None)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn from_kind(kind: LawKind, label: Option<String>) -> Result<Self> {
        let bad = |m: String| Err(DisorderError::InvalidLaw(m));
        let atoms = match &kind {
            LawKind::TwoPoint { a, b, p } => {
                if !(a.is_finite() && b.is_finite()) || a >= b {
                    return bad(format!("two-point atoms must satisfy a < b, got a={a}, b={b}"));
                }
                if !(*p > 0.0 && *p < 1.0) {
                    return bad(format!("two-point law needs 0 < p < 1 (else constant), got {p}"));
                }
                Some(atoms_from(vec![*a, *b], vec![1.0 - p, *p]))
            }
            LawKind::DiscreteFinite { values, probs } => {
                if values.len() != probs.len() || values.is_empty() {
                    return bad("values and probs must be nonempty and of equal length".into());
                }
                if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("values must be finite and strictly increasing".into());
                }
                if probs.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
                    return bad("probabilities must lie in [0, 1]".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return bad(format!("probabilities sum to {total}, not 1"));
                }
                if probs.iter().filter(|&&q| q > 0.0).count() < 2 {
                    return bad("law is almost surely constant; need two atoms with positive mass".into());
                }
                Some(atoms_from(values.clone(), probs.clone()))
            }
            LawKind::UniformInterval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                    return bad(format!("uniform interval needs lo < hi, got [{lo}, {hi}]"));
                }
                None
            }
            LawKind::Exponential { rate } | LawKind::ReflectedExponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("rate must be positive, got {rate}"));
                }
                None
            }
        };
        let label = label.unwrap_or_else(|| default_label(&kind));
        Ok(Self { kind, label, atoms })
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn atoms(&self) -> Option<&Atoms> {
        self.atoms.as_ref()
    }

    pub fn ess_inf(&self) -> f64 {
        match &self.kind {
            LawKind::UniformInterval { lo, .. } => *lo,
            LawKind::Exponential { .. } => 0.0,
            LawKind::ReflectedExponential { .. } => f64::NEG_INFINITY,
            _ => {
                let a = self.atoms.as_ref().unwrap();
                a.values[a.probs.iter().position(|&q| q > 0.0).unwrap()]
            }
        }
    }

    pub fn ess_sup(&self) -> f64 {
        match &self.kind {
            LawKind::UniformInterval { hi, .. } => *hi,
            LawKind::Exponential { .. } => f64::INFINITY,
            LawKind::ReflectedExponential { .. } => 0.0,
            _ => {
                let a = self.atoms.as_ref().unwrap();
                a.values[a.probs.iter().rposition(|&q| q > 0.0).unwrap()]
            }
        }
    }

    pub fn is_upper_bounded(&self) -> bool {
        self.ess_sup().is_finite()
    }

    pub fn is_lower_bounded(&self) -> bool {
        self.ess_inf().is_finite()
    }

    pub fn is_bounded(&self) -> bool {
        self.is_upper_bounded() && self.is_lower_bounded()
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            LawKind::UniformInterval { lo, hi } => 0.5 * (lo + hi),
            LawKind::Exponential { rate } => 1.0 / rate,
            LawKind::ReflectedExponential { rate } => -1.0 / rate,
            _ => {
                let a = self.atoms.as_ref().unwrap();
                a.values.iter().zip(&a.probs).map(|(v, q)| v * q).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.kind {
            LawKind::UniformInterval { lo, hi } => (hi - lo).powi(2) / 12.0,
            LawKind::Exponential { rate } | LawKind::ReflectedExponential { rate } => 1.0 / (rate * rate),
            _ => {
                let m = self.mean();
                let a = self.atoms.as_ref().unwrap();
                a.values.iter().zip(&a.probs).map(|(v, q)| q * (v - m).powi(2)).sum()
            }
        }
    }

    /// Whether `E[exp(beta * omega)]` is finite.
    pub fn mgf_finite(&self, beta: f64) -> bool {
        match &self.kind {
            LawKind::Exponential { rate } => beta < *rate,
            _ => true,
        }
    }

    /// `lambda(beta) = log E[exp(beta * omega)]`.
    pub fn log_mgf(&self, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        if beta == 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            LawKind::UniformInterval { lo, hi } => {
                let w = beta * (hi - lo);
                Ok(beta * lo + (w.exp_m1() / w).ln())
            }
            LawKind::Exponential { rate } => {
                if beta >= *rate {
                    Err(DisorderError::DivergentMgf { beta, rate: *rate })
                } else {
                    Ok((rate / (rate - beta)).ln())
                }
            }
            LawKind::ReflectedExponential { rate } => Ok((rate / (rate + beta)).ln()),
            _ => {
                let a = self.atoms.as_ref().unwrap();
                let m = a
                    .values
                    .iter()
                    .zip(&a.probs)
                    .filter(|(_, &q)| q > 0.0)
                    .map(|(v, _)| beta * v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = a.values.iter().zip(&a.probs).map(|(v, q)| q * (beta * v - m).exp()).sum();
                Ok(m + s.ln())
            }
        }
    }

    /// Right-continuous generalized inverse of the CDF.
    ///
    /// Level 1 maps to the essential supremum when it is finite.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(DisorderError::LevelOutOfRange(u));
        }
        if u == 1.0 {
            let s = self.ess_sup();
            return if s.is_finite() { Ok(s) } else { Err(DisorderError::UnboundedQuantile) };
        }
        Ok(self.quantile_unit(u))
    }

    /// Quantile for `u` in `[0, 1)`; no range check.
    #[inline]
    pub fn quantile_unit(&self, u: f64) -> f64 {
        match &self.kind {
            LawKind::UniformInterval { lo, hi } => lo + u * (hi - lo),
            LawKind::Exponential { rate } => -(-u).ln_1p() / rate,
            LawKind::ReflectedExponential { rate } => u.ln() / rate,
            _ => {
                let a = self.atoms.as_ref().unwrap();
                a.values[a.index_at(u)]
            }
        }
    }

    /// Boltzmann weight `h^beta(omega) = exp(beta * omega - lambda(beta))`; mean one under the law.
    pub fn h_weight(&self, beta: f64, omega: f64) -> Result<f64> {
        let lambda = self.log_mgf(beta)?;
        Ok((beta * omega - lambda).exp())
    }

    /// Quantile of `exp(beta * omega)` at level `u`.
    pub fn weight_quantile(&self, beta: f64, u: f64) -> Result<f64> {
        check_beta(beta)?;
        Ok((beta * self.quantile(u)?).exp())
    }

    /// Lower-precision helper used by hot loops: `exp(beta * q(u))` for `u` in `[0, 1)`.
    #[inline]
    pub fn weight_quantile_unit(&self, beta: f64, u: f64) -> f64 {
        (beta * self.quantile_unit(u)).exp()
    }
}

fn atoms_from(values: Vec<f64>, probs: Vec<f64>) -> Atoms {
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for q in &probs {
        acc += q;
        cumulative.push(acc);
    }
    *cumulative.last_mut().unwrap() = 1.0;
    Atoms { values, probs, cumulative }
}

fn default_label(kind: &LawKind) -> String {
    match kind {
        LawKind::TwoPoint { a, b, p } => format!("two_point(a={a},b={b},p={p})"),
        LawKind::DiscreteFinite { values, .. } => format!("discrete({} atoms)", values.len()),
        LawKind::UniformInterval { lo, hi } => format!("uniform({lo},{hi})"),
        LawKind::Exponential { rate } => format!("exponential({rate})"),
        LawKind::ReflectedExponential { rate } => format!("reflected_exponential({rate})"),
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(DisorderError::InvalidBeta(beta))
    }
}

impl TryFrom<LawSpec> for DisorderLaw {
    type Error = DisorderError;

    fn try_from(spec: LawSpec) -> Result<Self> {
        let (kind, label) = match spec {
            LawSpec::TwoPoint { a, b, p, label } => (LawKind::TwoPoint { a, b, p }, label),
            LawSpec::DiscreteFinite { values, probs, label } => (LawKind::DiscreteFinite { values, probs }, label),
            LawSpec::UniformInterval { lo, hi, label } => (LawKind::UniformInterval { lo, hi }, label),
            LawSpec::Exponential { rate, label } => (LawKind::Exponential { rate }, label),
            LawSpec::ReflectedExponential { rate, label } => (LawKind::ReflectedExponential { rate }, label),
        };
        DisorderLaw::from_kind(kind, label)
    }
}

impl From<DisorderLaw> for LawSpec {
    fn from(law: DisorderLaw) -> Self {
        let label = Some(law.label);
        match law.kind {
            LawKind::TwoPoint { a, b, p } => LawSpec::TwoPoint { a, b, p, label },
            LawKind::DiscreteFinite { values, probs } => LawSpec::DiscreteFinite { values, probs, label },
            LawKind::UniformInterval { lo, hi } => LawSpec::UniformInterval { lo, hi, label },
            LawKind::Exponential { rate } => LawSpec::Exponential { rate, label },
            LawKind::ReflectedExponential { rate } => LawSpec::ReflectedExponential { rate, label },
        }
    }
}

/// Ordered inverse temperatures `beta_minus <= beta1 <= beta2 <= beta_plus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPair {
    pub beta1: f64,
    pub beta2: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
}

impl BetaPair {
    pub fn new(beta1: f64, beta2: f64, beta_minus: f64, beta_plus: f64) -> Result<Self> {
        let ok =
            beta_minus > 0.0 && beta_minus <= beta1 && beta1 <= beta2 && beta2 <= beta_plus && beta_plus.is_finite();
        if !ok {
            return Err(DisorderError::InvalidBetaPair(format!(
                "need 0 < beta_minus <= beta1 <= beta2 <= beta_plus < inf, got {beta_minus}, {beta1}, {beta2}, {beta_plus}"
            )));
        }
        Ok(Self { beta1, beta2, beta_minus, beta_plus })
    }

    /// Pair spanning exactly `[beta1, beta2]`.
    pub fn tight(beta1: f64, beta2: f64) -> Result<Self> {
        Self::new(beta1, beta2, beta1, beta2)
    }
}

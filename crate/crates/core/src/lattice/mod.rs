//! Lattice geometry: directions, drift measures, paths, site indexing and
//! environment fields on a finite space-time window of `N x Z^d`.
//!
//! Directions are indexed `2i` for `+e_{i+1}` and `2i + 1` for `-e_{i+1}`;
//! the lazy (zero) step of a walk is index `2d`.

mod ball;
mod drift;
mod field;
pub mod io;
mod path;

pub use ball::{Ball, LatticeIndexer};
pub use drift::{alpha_of_lambda, d_distance, m_ratio, softmax_directions, DriftMeasure, LazyDriftMeasure};
pub use field::{DisorderKind, Environment, EnvironmentField, LazyEnvironment};
pub use path::{enumerate_paths, LatticePath, PathIter, DEFAULT_ENUMERATION_CAP};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("invalid drift measure: {0}")]
    InvalidDrift(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("enumeration of {count} paths exceeds the cap of {cap}")]
    CapExceeded { count: f64, cap: u64 },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("environment format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LatticeError>;

/// Number of unit directions `|U| = 2d`.
/// Largest supported dimension; direction indices must fit in four bits.
pub const MAX_DIM: usize = 7;

#[inline]
pub fn num_directions(dim: usize) -> usize {
    2 * dim
}

/// The unit vector for direction `k < 2d`, as `(axis, sign)`.
#[inline]
pub fn direction_axis(k: usize) -> (usize, i32) {
    (k / 2, if k.is_multiple_of(2) { 1 } else { -1 })
}

/// Direction label such as `+e1` or `-e3`; the lazy step is `0`.
pub fn direction_label(dim: usize, k: usize) -> String {
    if k == 2 * dim {
        return "0".into();
    }
    let (axis, sign) = direction_axis(k);
    format!("{}e{}", if sign > 0 { '+' } else { '-' }, axis + 1)
}

pub fn parse_direction(dim: usize, label: &str) -> Option<usize> {
    let label = label.trim();
    if label == "0" {
        return Some(2 * dim);
    }
    let (sign, rest) = match label.as_bytes().first()? {
        b'+' => (0, &label[1..]),
        b'-' => (1, &label[1..]),
        _ => (0, label),
    };
    let axis: usize = rest.strip_prefix('e')?.parse().ok()?;
    if axis == 0 || axis > dim {
        return None;
    }
    Some(2 * (axis - 1) + sign)
}

pub fn l1_norm(x: &[i32]) -> u32 {
    x.iter().map(|v| v.unsigned_abs()).sum()
}

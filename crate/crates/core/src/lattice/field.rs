use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ball::Ball;
use super::{l1_norm, num_directions, LatticeError, Result};
use crate::disorder::DisorderLaw;
use crate::rng::{coordinate_counter, stream, CounterRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisorderKind {
    /// One variable per space-time site `(t, x)`, `t >= 1`.
    Site,
    /// One variable per directed edge `((t, x), (t + 1, x + u))`, `t >= 0`.
    Bond,
}

impl DisorderKind {
    /// Number of variables per site of a slice.
    pub fn per_site(self, dim: usize) -> usize {
        match self {
            DisorderKind::Site => 1,
            DisorderKind::Bond => num_directions(dim),
        }
    }

    /// Times that carry variables for a horizon `n`.
    pub fn times(self, n: usize) -> std::ops::Range<usize> {
        match self {
            DisorderKind::Site => 1..n + 1,
            DisorderKind::Bond => 0..n,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DisorderKind::Site => "site",
            DisorderKind::Bond => "bond",
        }
    }
}

impl std::str::FromStr for DisorderKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "site" => Ok(DisorderKind::Site),
            "bond" => Ok(DisorderKind::Bond),
            other => Err(format!("unknown disorder kind {other:?} (expected site or bond)")),
        }
    }
}

/// Read access to an environment.
///
/// Coordinates are `(t, site, dir)` where `site` is the index of a point of
/// parity `t % 2` in the ball ordering and `dir` is `0` for site disorder.
pub trait Environment: Sync {
    fn kind(&self) -> DisorderKind;
    fn dim(&self) -> usize;
    fn value(&self, t: usize, site: usize, dir: usize) -> f64;

    /// Value at a lattice point, which must have the parity of `t`.
    fn value_at(&self, t: usize, x: &[i32], dir: usize) -> f64 {
        debug_assert_eq!(l1_norm(x) as usize % 2, t % 2);
        let ball = Ball::shared(self.dim(), l1_norm(x) as usize);
        self.value(t, ball.index(x).unwrap(), dir)
    }
}

/// A realized environment on the window `{(t, x) : ||x||_1 <= r}` up to horizon `n`.
#[derive(Debug, Clone)]
pub struct EnvironmentField {
    kind: DisorderKind,
    dim: usize,
    n: usize,
    r: usize,
    seed: u64,
    label: String,
    ball: Arc<Ball>,
    per_site: usize,
    first_time: usize,
    /// `offsets[t - first_time]` is where slice `t` starts in `values`.
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl EnvironmentField {
    fn layout(kind: DisorderKind, dim: usize, n: usize, r: usize) -> (Arc<Ball>, Vec<usize>) {
        let ball = Ball::shared(dim, r);
        let per_site = kind.per_site(dim);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for t in kind.times(n) {
            offsets.push(acc);
            acc += ball.class_count(t % 2, r) * per_site;
        }
        offsets.push(acc);
        (ball, offsets)
    }

    fn check_window(n: usize, r: usize) -> Result<()> {
        if r < n {
            return Err(LatticeError::WindowTooSmall(format!("radius {r} is smaller than the horizon {n}")));
        }
        Ok(())
    }

    /// Builds a field whose value at `(t, x, dir)` is `f(t, x, dir)`.
    pub fn from_fn(
        kind: DisorderKind,
        dim: usize,
        n: usize,
        r: usize,
        mut f: impl FnMut(usize, &[i32], usize) -> f64,
    ) -> Result<Self> {
        Self::check_window(n, r)?;
        let (ball, offsets) = Self::layout(kind, dim, n, r);
        let per_site = kind.per_site(dim);
        let mut values = Vec::with_capacity(*offsets.last().unwrap());
        for t in kind.times(n) {
            for i in 0..ball.class_count(t % 2, r) {
                let x = ball.coord(t % 2, i);
                for k in 0..per_site {
                    values.push(f(t, x, k));
                }
            }
        }
        Ok(Self {
            kind,
            dim,
            n,
            r,
            seed: 0,
            label: String::new(),
            ball,
            per_site,
            first_time: kind.times(n).start,
            offsets,
            values,
        })
    }

    /// I.i.d. coordinates from `law`, keyed by `(seed, t, site, dir)`.
    pub fn sample(law: &DisorderLaw, kind: DisorderKind, n: usize, r: usize, dim: usize, seed: u64) -> Result<Self> {
        let lazy = LazyEnvironment::new(law.clone(), kind, dim, seed);
        Ok(Self::materialize(&lazy, n, r)?.with_provenance(seed, law.label()))
    }

    /// Dense copy of any environment on the window of horizon `n` and radius `r`.
    pub fn materialize<E: Environment + ?Sized>(env: &E, n: usize, r: usize) -> Result<Self> {
        Self::check_window(n, r)?;
        let (kind, dim) = (env.kind(), env.dim());
        let (ball, offsets) = Self::layout(kind, dim, n, r);
        let per_site = kind.per_site(dim);
        let mut values = Vec::with_capacity(*offsets.last().unwrap());
        for t in kind.times(n) {
            for i in 0..ball.class_count(t % 2, r) {
                for k in 0..per_site {
                    values.push(env.value(t, i, k));
                }
            }
        }
        Ok(Self {
            kind,
            dim,
            n,
            r,
            seed: 0,
            label: String::new(),
            ball,
            per_site,
            first_time: kind.times(n).start,
            offsets,
            values,
        })
    }

    pub fn constant(kind: DisorderKind, dim: usize, n: usize, r: usize, c: f64) -> Result<Self> {
        Self::from_fn(kind, dim, n, r, |_, _, _| c)
    }

    /// Raw constructor used by the binary reader.
    pub(crate) fn from_parts(
        kind: DisorderKind,
        dim: usize,
        n: usize,
        r: usize,
        seed: u64,
        label: String,
        values: Vec<f64>,
    ) -> Result<Self> {
        Self::check_window(n, r)?;
        let (ball, offsets) = Self::layout(kind, dim, n, r);
        if values.len() != *offsets.last().unwrap() {
            return Err(LatticeError::Format(format!(
                "payload holds {} values, the window needs {}",
                values.len(),
                offsets.last().unwrap()
            )));
        }
        Ok(Self {
            kind,
            dim,
            n,
            r,
            seed,
            label,
            ball,
            per_site: kind.per_site(dim),
            first_time: kind.times(n).start,
            offsets,
            values,
        })
    }

    pub fn with_provenance(mut self, seed: u64, label: impl Into<String>) -> Self {
        self.seed = seed;
        self.label = label.into();
        self
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> usize {
        self.r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ball(&self) -> &Arc<Ball> {
        &self.ball
    }

    /// Number of stored sites in slice `t`.
    pub fn slice_sites(&self, t: usize) -> usize {
        self.ball.class_count(t % 2, self.r)
    }

    /// Position of `(t, site, dir)` in the flat value table, if stored.
    pub fn flat_index(&self, t: usize, site: usize, dir: usize) -> Option<usize> {
        if t < self.first_time || t >= self.first_time + self.offsets.len() - 1 || dir >= self.per_site {
            return None;
        }
        let s = t - self.first_time;
        let i = self.offsets[s] + site * self.per_site + dir;
        (i < self.offsets[s + 1]).then_some(i)
    }

    /// Checked lookup by lattice point.
    pub fn get(&self, t: usize, x: &[i32], dir: usize) -> Option<f64> {
        if x.len() != self.dim || l1_norm(x) as usize > self.r || l1_norm(x) as usize % 2 != t % 2 {
            return None;
        }
        let site = self.ball.index(x)?;
        self.flat_index(t, site, dir).map(|i| self.values[i])
    }

    /// Visits every coordinate in storage order as `(t, x, dir, value)`.
    pub fn for_each(&self, mut f: impl FnMut(usize, &[i32], usize, f64)) {
        let mut idx = 0;
        for t in self.kind.times(self.n) {
            for i in 0..self.slice_sites(t) {
                let x = self.ball.coord(t % 2, i);
                for k in 0..self.per_site {
                    f(t, x, k, self.values[idx]);
                    idx += 1;
                }
            }
        }
    }

    /// Same layout, values transformed coordinatewise.
    pub fn map(&self, mut f: impl FnMut(usize, usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        let mut idx = 0;
        for t in self.kind.times(self.n) {
            for i in 0..self.slice_sites(t) {
                for k in 0..self.per_site {
                    out.values[idx] = f(t, i, k, self.values[idx]);
                    idx += 1;
                }
            }
        }
        out
    }
}

impl Environment for EnvironmentField {
    fn kind(&self) -> DisorderKind {
        self.kind
    }

    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn value(&self, t: usize, site: usize, dir: usize) -> f64 {
        let s = t - self.first_time;
        self.values[self.offsets[s] + site * self.per_site + dir]
    }
}

/// An i.i.d. environment on all of `N x Z^d`, generated on demand.
#[derive(Debug, Clone)]
pub struct LazyEnvironment {
    law: DisorderLaw,
    kind: DisorderKind,
    dim: usize,
    seed: u64,
    rng: CounterRng,
}

impl LazyEnvironment {
    pub fn new(law: DisorderLaw, kind: DisorderKind, dim: usize, seed: u64) -> Self {
        Self { law, kind, dim, seed, rng: CounterRng::new(seed, stream::ENVIRONMENT) }
    }

    pub fn law(&self) -> &DisorderLaw {
        &self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The uniform variable behind coordinate `(t, site, dir)`.
    #[inline]
    pub fn uniform(&self, t: usize, site: usize, dir: usize) -> f64 {
        self.rng.uniform(coordinate_counter(t, site, dir))
    }
}

impl Environment for LazyEnvironment {
    fn kind(&self) -> DisorderKind {
        self.kind
    }

    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn value(&self, t: usize, site: usize, dir: usize) -> f64 {
        self.law.quantile_unit(self.uniform(t, site, dir))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> DisorderLaw {
        DisorderLaw::two_point(0.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = EnvironmentField::sample(&law(), DisorderKind::Bond, 4, 6, 2, 11).unwrap();
        let b = EnvironmentField::sample(&law(), DisorderKind::Bond, 4, 6, 2, 11).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn different_seeds_differ() {
        let u = DisorderLaw::uniform(0.0, 1.0).unwrap();
        let a = EnvironmentField::sample(&u, DisorderKind::Site, 25, 25, 2, 1).unwrap();
        let b = EnvironmentField::sample(&u, DisorderKind::Site, 25, 25, 2, 2).unwrap();
        assert!(a.len() >= 10_000);
        assert!(a.values().iter().zip(b.values()).any(|(x, y)| x != y));
    }

    #[test]
    fn empirical_mean_within_four_sigma() {
        let l = law();
        let f = EnvironmentField::sample(&l, DisorderKind::Bond, 12, 12, 2, 5).unwrap();
        let m = f.values().iter().sum::<f64>() / f.len() as f64;
        let se = (l.variance() / f.len() as f64).sqrt();
        assert!((m - l.mean()).abs() < 4.0 * se, "mean {m}");
    }

    #[test]
    fn dense_matches_lazy() {
        let lazy = LazyEnvironment::new(law(), DisorderKind::Bond, 3, 9);
        let dense = EnvironmentField::materialize(&lazy, 5, 7).unwrap();
        dense.for_each(|t, x, k, v| assert_eq!(v, lazy.value_at(t, x, k)));
    }

    #[test]
    fn lookup_by_point() {
        let f =
            EnvironmentField::from_fn(DisorderKind::Site, 1, 3, 3, |t, x, _| (10 * t) as f64 + x[0] as f64).unwrap();
        assert_eq!(f.get(2, &[-2], 0), Some(18.0));
        assert_eq!(f.get(3, &[1], 0), Some(31.0));
        assert_eq!(f.get(0, &[0], 0), None);
        assert_eq!(f.get(2, &[1], 0), None);
        assert_eq!(f.get(1, &[5], 0), None);
    }

    #[test]
    fn window_must_cover_horizon() {
        assert!(EnvironmentField::sample(&law(), DisorderKind::Site, 5, 4, 1, 0).is_err());
    }
}

use super::{direction_axis, num_directions, LatticeError, Result};

pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// A nearest-neighbour path started at the origin, stored as direction indices.
///
/// Strict paths use indices `< 2d`; lazy paths may also use the zero step `2d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticePath {
    dim: usize,
    lazy: bool,
    steps: Vec<u8>,
}

impl LatticePath {
    pub fn new(dim: usize, lazy: bool, steps: Vec<u8>) -> Result<Self> {
        let max = num_directions(dim) + usize::from(lazy);
        if let Some(s) = steps.iter().find(|&&s| s as usize >= max) {
            return Err(LatticeError::InvalidPath(format!("step index {s} invalid for d = {dim}, lazy = {lazy}")));
        }
        Ok(Self { dim, lazy, steps })
    }

    pub fn empty(dim: usize, lazy: bool) -> Self {
        Self { dim, lazy, steps: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_lazy(&self) -> bool {
        self.lazy
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[u8] {
        &self.steps
    }

    pub fn is_stay(&self, i: usize) -> bool {
        self.steps[i] as usize == num_directions(self.dim)
    }

    /// Positions `pi_0 = 0, pi_1, ..., pi_n`.
    pub fn positions(&self) -> Vec<Vec<i32>> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut x = vec![0i32; self.dim];
        out.push(x.clone());
        for &s in &self.steps {
            if (s as usize) < num_directions(self.dim) {
                let (axis, sign) = direction_axis(s as usize);
                x[axis] += sign;
            }
            out.push(x.clone());
        }
        out
    }

    pub fn endpoint(&self) -> Vec<i32> {
        self.positions().pop().unwrap()
    }
}

/// Exhaustive enumeration of all paths of length `n` (odometer order).
pub fn enumerate_paths(n: usize, dim: usize, lazy: bool, cap: u64) -> Result<PathIter> {
    let base = num_directions(dim) + usize::from(lazy);
    let count = (base as f64).powi(n as i32);
    if count > cap as f64 {
        return Err(LatticeError::CapExceeded { count, cap });
    }
    Ok(PathIter { dim, lazy, base: base as u8, digits: vec![0; n], done: false })
}

pub struct PathIter {
    dim: usize,
    lazy: bool,
    base: u8,
    digits: Vec<u8>,
    done: bool,
}

impl Iterator for PathIter {
    type Item = LatticePath;

    fn next(&mut self) -> Option<LatticePath> {
        if self.done {
            return None;
        }
        let out = LatticePath { dim: self.dim, lazy: self.lazy, steps: self.digits.clone() };
        // advance the odometer; the last digit varies fastest
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.base {
                break;
            }
            self.digits[i] = 0;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn small_counts() {
        let empty: Vec<_> = enumerate_paths(0, 2, false, DEFAULT_ENUMERATION_CAP).unwrap().collect();
        assert_eq!(empty.len(), 1);
        assert!(empty[0].is_empty());
        assert_eq!(enumerate_paths(2, 1, false, DEFAULT_ENUMERATION_CAP).unwrap().count(), 4);
        assert_eq!(enumerate_paths(3, 2, true, DEFAULT_ENUMERATION_CAP).unwrap().count(), 125);
    }

    #[test]
    fn counts_match_powers_and_are_distinct() {
        for d in 1..=3usize {
            for n in 0..=8usize {
                for lazy in [false, true] {
                    let base = 2 * d + usize::from(lazy);
                    let expect = base.pow(n as u32);
                    if expect > 300_000 {
                        continue;
                    }
                    let paths: HashSet<_> = enumerate_paths(n, d, lazy, DEFAULT_ENUMERATION_CAP).unwrap().collect();
                    assert_eq!(paths.len(), expect, "d={d} n={n} lazy={lazy}");
                }
                // counting alone for the larger cases
                let expect = (2 * d + 1).pow(n as u32);
                if expect <= 6_000_000 {
                    assert_eq!(enumerate_paths(n, d, true, DEFAULT_ENUMERATION_CAP).unwrap().count(), expect);
                }
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            enumerate_paths(20, 3, false, DEFAULT_ENUMERATION_CAP),
            Err(LatticeError::CapExceeded { .. })
        ));
    }

    #[test]
    fn strict_paths_reject_zero_steps() {
        assert!(LatticePath::new(1, false, vec![0, 2]).is_err());
        let p = LatticePath::new(1, true, vec![2, 0, 2]).unwrap();
        assert_eq!(p.positions(), vec![vec![0], vec![0], vec![1], vec![1]]);
    }
}

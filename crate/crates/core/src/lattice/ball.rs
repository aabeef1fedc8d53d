//! Parity-aware dense indexing of L1 balls in `Z^d`.
//!
//! Points are split by the parity of their L1 norm. Within a parity class they
//! are ordered by norm, then lexicographically. The index of a point therefore
//! does not depend on the ball radius, and the points of norm `<= t` form a
//! prefix of their class. At time `t` a walk from the origin sits in class
//! `t % 2`, so a time slice is a contiguous prefix of one class.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::{direction_axis, l1_norm, num_directions};

/// Rank/unrank arithmetic for the parity-class ordering, valid up to `max_radius`.
#[derive(Debug, Clone)]
pub struct LatticeIndexer {
    dim: usize,
    max_radius: usize,
    /// `sphere[k][s]`: points of `Z^k` with norm exactly `s`.
    sphere: Vec<Vec<u64>>,
    /// `ball[k][s]`: points of `Z^k` with norm at most `s`.
    ball: Vec<Vec<u64>>,
    /// Offset of shell `s` inside its parity class.
    shell_offset: Vec<u64>,
}

impl LatticeIndexer {
    pub fn new(dim: usize, max_radius: usize) -> Self {
        assert!((1..=super::MAX_DIM).contains(&dim), "dimension must lie in 1..={}", super::MAX_DIM);
        let len = max_radius + 2;
        let mut sphere = vec![vec![0u64; len]; dim + 1];
        sphere[0][0] = 1;
        for k in 1..=dim {
            for s in 0..len {
                let mut c = sphere[k - 1][s];
                for j in 1..=s {
                    c += 2 * sphere[k - 1][s - j];
                }
                sphere[k][s] = c;
            }
        }
        let ball = sphere
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0u64, |acc, &v| {
                        *acc += v;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        let mut shell_offset = vec![0u64; len + 2];
        for s in 2..len + 2 {
            shell_offset[s] = shell_offset[s - 2] + sphere[dim][s - 2];
        }
        Self { dim, max_radius, sphere, ball, shell_offset }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_radius(&self) -> usize {
        self.max_radius
    }

    pub fn sphere_size(&self, s: usize) -> u64 {
        self.sphere[self.dim][s]
    }

    #[inline]
    fn ball_count(&self, k: usize, m: i64) -> u64 {
        if m < 0 {
            0
        } else {
            self.ball[k][m as usize]
        }
    }

    /// Number of points of norm at most `radius` whose norm has the given parity.
    pub fn class_count(&self, parity: usize, radius: usize) -> usize {
        if radius < parity {
            return 0;
        }
        let top = radius - (radius - parity) % 2;
        (self.shell_offset[top] + self.sphere[self.dim][top]) as usize
    }

    /// Index of `x` within the parity class of its norm; `None` past `max_radius`.
    #[inline]
    pub fn index(&self, x: &[i32]) -> Option<usize> {
        debug_assert_eq!(x.len(), self.dim);
        let s = l1_norm(x) as usize;
        if s > self.max_radius + 1 {
            return None;
        }
        let mut rank = self.shell_offset[s];
        let mut rem = s as i64;
        for (i, &v) in x.iter().enumerate() {
            let k1 = self.dim - i - 1;
            let v = v as i64;
            rank += if v <= 0 {
                self.ball_count(k1, rem + v - 1)
            } else {
                self.ball_count(k1, rem - 1) + self.ball_count(k1, rem) - self.ball_count(k1, rem - v)
            };
            rem -= v.abs();
        }
        Some(rank as usize)
    }
}

/// Cached geometry of a ball of radius `R`: coordinates and neighbour tables per parity class.
#[derive(Debug)]
pub struct Ball {
    indexer: LatticeIndexer,
    radius: usize,
    coords: [Vec<i32>; 2],
    /// `neighbors[p][i * 2d + k]`: index (in class `1 - p`) of point `i` of class `p` moved by direction `k`.
    neighbors: [Vec<u32>; 2],
}

pub const NO_NEIGHBOR: u32 = u32::MAX;

impl Ball {
    fn build(dim: usize, radius: usize) -> Self {
        let indexer = LatticeIndexer::new(dim, radius + 1);
        let mut coords = [Vec::new(), Vec::new()];
        for s in 0..=radius {
            let class = &mut coords[s % 2];
            let mut point = vec![0i32; dim];
            push_sphere(&mut point, 0, s as i32, class);
        }
        let nd = num_directions(dim);
        let mut neighbors = [Vec::new(), Vec::new()];
        for p in 0..2 {
            let n = coords[p].len() / dim;
            let mut table = vec![NO_NEIGHBOR; n * nd];
            let mut y = vec![0i32; dim];
            for i in 0..n {
                let x = &coords[p][i * dim..(i + 1) * dim];
                for k in 0..nd {
                    y.copy_from_slice(x);
                    let (axis, sign) = direction_axis(k);
                    y[axis] += sign;
                    if l1_norm(&y) as usize <= radius {
                        table[i * nd + k] = indexer.index(&y).unwrap() as u32;
                    }
                }
            }
            neighbors[p] = table;
        }
        Self { indexer, radius, coords, neighbors }
    }

    /// Shared ball of at least the requested radius for dimension `dim`.
    pub fn shared(dim: usize, radius: usize) -> Arc<Ball> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Ball>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().unwrap();
        if let Some(b) = guard.get(&dim) {
            if b.radius >= radius {
                return Arc::clone(b);
            }
        }
        let b = Arc::new(Ball::build(dim, radius));
        guard.insert(dim, Arc::clone(&b));
        b
    }

    pub fn dim(&self) -> usize {
        self.indexer.dim
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn indexer(&self) -> &LatticeIndexer {
        &self.indexer
    }

    pub fn class_count(&self, parity: usize, radius: usize) -> usize {
        debug_assert!(radius <= self.radius + 1);
        self.indexer.class_count(parity, radius)
    }

    #[inline]
    pub fn index(&self, x: &[i32]) -> Option<usize> {
        self.indexer.index(x)
    }

    #[inline]
    pub fn coord(&self, parity: usize, i: usize) -> &[i32] {
        let d = self.dim();
        &self.coords[parity][i * d..(i + 1) * d]
    }

    #[inline]
    pub fn neighbors(&self, parity: usize) -> &[u32] {
        &self.neighbors[parity]
    }
}

fn push_sphere(point: &mut [i32], axis: usize, rem: i32, out: &mut Vec<i32>) {
    let d = point.len();
    if axis + 1 == d {
        if rem == 0 {
            point[axis] = 0;
            out.extend_from_slice(point);
        } else {
            point[axis] = -rem;
            out.extend_from_slice(point);
            point[axis] = rem;
            out.extend_from_slice(point);
        }
        return;
    }
    for v in -rem..=rem {
        point[axis] = v;
        push_sphere(point, axis + 1, rem - v.abs(), out);
    }
}

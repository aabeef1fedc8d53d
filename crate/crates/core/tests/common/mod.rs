#![allow(dead_code)]

use polymer_lab::disorder::DisorderLaw;
use polymer_lab::lattice::{DisorderKind, DriftMeasure, Environment, EnvironmentField};
use polymer_lab::rng::SeqRng;

pub fn two_point() -> DisorderLaw {
    DisorderLaw::two_point(0.0, 1.0, 0.5).unwrap()
}

pub fn random_drift(rng: &mut SeqRng, dim: usize) -> DriftMeasure {
    let w: Vec<f64> = (0..2 * dim).map(|_| rng.range(0.05, 1.0)).collect();
    DriftMeasure::normalized(dim, w).unwrap()
}

fn walk(x: &mut [i32], k: usize, sign: i32) {
    x[k / 2] += if k.is_multiple_of(2) { sign } else { -sign };
}

/// `W_n` as an explicit sum over all `(2d)^n` paths.
pub fn brute_force_w(env: &EnvironmentField, law: &DisorderLaw, beta: f64, alpha: &DriftMeasure, n: usize) -> f64 {
    let lambda = law.log_mgf(beta).unwrap();
    let dim = alpha.dim();
    let mut terms = Vec::new();
    let mut x = vec![0i32; dim];
    fn rec(
        env: &EnvironmentField,
        alpha: &DriftMeasure,
        beta: f64,
        lambda: f64,
        t: usize,
        n: usize,
        x: &mut [i32],
        log_w: f64,
        terms: &mut Vec<f64>,
    ) {
        if t == n {
            terms.push(log_w.exp());
            return;
        }
        for k in 0..2 * x.len() {
            let bond = env.get(t, x, k);
            walk(x, k, 1);
            let omega = match env.kind() {
                DisorderKind::Bond => bond.unwrap(),
                DisorderKind::Site => env.get(t + 1, x, 0).unwrap(),
            };
            let step = alpha.weight(k).ln() + beta * omega - lambda;
            rec(env, alpha, beta, lambda, t + 1, n, x, log_w + step, terms);
            walk(x, k, -1);
        }
    }
    rec(env, alpha, beta, lambda, 0, n, &mut x, 0.0, &mut terms);
    polymer_lab::stats::pairwise_sum(&terms)
}

/// Coordinates `(t, site, dir)` some path of length `n` can use.
pub fn reachable(env: &EnvironmentField) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut slice_t = usize::MAX;
    let mut site = 0;
    env.for_each(|t, x, dir, _| {
        if t != slice_t {
            slice_t = t;
            site = 0;
        } else if dir == 0 {
            site += 1;
        }
        let r = x.iter().map(|v| v.unsigned_abs() as usize).sum::<usize>();
        if r <= t {
            out.push((t, site, dir));
        }
    });
    out
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

/// Average of `W_n` over every resampling of the coordinates in `subset` under a two-point law.
pub fn exhaustive_noised_w(
    env: &EnvironmentField,
    (a, b, p): (f64, f64, f64),
    beta: f64,
    alpha: &DriftMeasure,
    n: usize,
    subset: &[(usize, usize, usize)],
    rho: f64,
) -> f64 {
    let law = DisorderLaw::two_point(a, b, p).unwrap();
    let index: std::collections::HashMap<_, _> = subset.iter().enumerate().map(|(j, c)| (*c, j)).collect();
    let mut current = vec![0.0; subset.len()];
    let _ = env.map(|t, i, k, v| {
        if let Some(&j) = index.get(&(t, i, k)) {
            current[j] = v;
        }
        v
    });
    let mut terms = Vec::with_capacity(1 << subset.len());
    for mask in 0u64..1 << subset.len() {
        let mut prob = 1.0;
        for (j, &w) in current.iter().enumerate() {
            let pick_b = mask >> j & 1 == 1;
            let (value, fresh) = if pick_b { (b, p) } else { (a, 1.0 - p) };
            prob *= rho * f64::from(u8::from(w == value)) + (1.0 - rho) * fresh;
        }
        if prob == 0.0 {
            continue;
        }
        let field = env.map(|t, i, k, v| match index.get(&(t, i, k)) {
            Some(&j) if mask >> j & 1 == 1 => b,
            Some(_) => a,
            None => v,
        });
        let w = polymer_lab::polymer::polymer(&field, &law, beta, alpha, n).unwrap().w();
        terms.push(prob * w);
    }
    polymer_lab::stats::pairwise_sum(&terms)
}

/// Table of retention probabilities: `rho` on `subset`, 1 elsewhere.
pub fn subset_profile(env: &EnvironmentField, subset: &[(usize, usize, usize)], rho: f64) -> EnvironmentField {
    let set: std::collections::HashSet<_> = subset.iter().copied().collect();
    env.map(|t, i, k, _| if set.contains(&(t, i, k)) { rho } else { 1.0 })
}

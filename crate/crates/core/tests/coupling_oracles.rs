mod common;

use std::collections::HashSet;

use common::{random_drift, rel_err, two_point};
use polymer_lab::coupling::{
    build_coupling_spec, coupling_identity_check, deform_environment, non_jump_times, BondEnv, DeformedView,
};
use polymer_lab::lattice::{enumerate_paths, DisorderKind, DriftMeasure, Environment, EnvironmentField, LatticePath};
use polymer_lab::rng::SeqRng;
use proptest::prelude::*;

/// Field whose value encodes its own coordinate.
fn labelled(n: usize, r: usize) -> EnvironmentField {
    EnvironmentField::from_fn(DisorderKind::Bond, 1, n, r, |t, x, k| (1000 * t) as f64 + 10.0 * x[0] as f64 + k as f64)
        .unwrap()
}

#[test]
fn relabeling_by_hand_in_one_dimension() {
    // steps: stay, +e1, stay; the path sits at 0, 0, 1, 1
    let path = LatticePath::new(1, true, vec![2, 0, 2]).unwrap();
    assert_eq!(non_jump_times(&path, 3).unwrap(), vec![0, 2]);
    let env = labelled(6, 6);
    let deformed = deform_environment(&env, &path, 3, 3).unwrap();
    // slice j reads source time t_j at y + pi_{t_j}: (0, 0), (2, +1), then the stay extension (3, +1)
    let table = [(0usize, 0usize, 0i32), (1, 2, 1), (2, 3, 1)];
    for (j, t, shift) in table {
        for y in -(j as i32)..=j as i32 {
            if (y - j as i32) % 2 != 0 {
                continue;
            }
            for k in 0..2 {
                let got = deformed.get(j, &[y], k).unwrap();
                assert_eq!(got, env.get(t, &[y + shift], k).unwrap(), "j={j} y={y} k={k}");
            }
        }
    }
}

#[test]
fn one_step_identity_by_hand() {
    let law = two_point();
    let env = labelled(2, 2).map(|_, _, k, _| if k == 0 { 1.0 } else { 0.0 });
    let alpha = DriftMeasure::new(1, vec![0.7, 0.3]).unwrap();
    let alpha_p = DriftMeasure::new(1, vec![0.4, 0.6]).unwrap();
    let spec = build_coupling_spec(&alpha, &alpha_p).unwrap();
    // m = min(0.7 / 0.4, 0.3 / 0.6) = 0.5
    assert!((spec.m - 0.5).abs() < 1e-15);
    let beta = 0.8;
    let lambda = law.log_mgf(beta).unwrap();
    let h = [(beta - lambda).exp(), (-lambda).exp()];
    let eta = [0.7 - 0.4 * 0.5, 0.3 - 0.6 * 0.5];
    let lhs = eta[0] + eta[1] + 0.5 * (0.4 * h[0] + 0.6 * h[1]);
    let c = coupling_identity_check(BondEnv::new(&env).unwrap(), &law, beta, &spec, 1).unwrap();
    assert!(rel_err(c.lhs, lhs) < 1e-15, "{} vs {lhs}", c.lhs);
    assert!(rel_err(c.rhs, lhs) < 1e-15);
}

#[test]
fn deformation_reads_distinct_coordinates() {
    let mut rng = SeqRng::new(4);
    for dim in 1..=2 {
        let n = 5;
        let env = EnvironmentField::sample(&two_point(), DisorderKind::Bond, 2 * n, 2 * n, dim, 1).unwrap();
        for path in enumerate_paths(n, dim, true, 1_000_000).unwrap() {
            if rng.uniform() > 0.2 {
                continue;
            }
            let slices = non_jump_times(&path, n).unwrap().len() + 2;
            let view = DeformedView::new(BondEnv::new(&env).unwrap(), &path, slices, slices).unwrap();
            let mut seen = HashSet::new();
            for j in 0..slices {
                let t = view.source_time(j);
                let field = EnvironmentField::constant(DisorderKind::Bond, dim, slices, slices, 0.0).unwrap();
                field.for_each(|s, y, k, _| {
                    if s == j {
                        assert!(seen.insert((t, view.source_point(j, y), k)), "collision at slice {j}");
                    }
                });
            }
        }
    }
}

#[test]
fn site_disorder_is_rejected() {
    let env = EnvironmentField::sample(&two_point(), DisorderKind::Site, 3, 3, 1, 0).unwrap();
    assert!(BondEnv::new(&env).is_err());
}

#[test]
fn deformed_values_keep_their_law() {
    // a fixed path reads a fresh set of i.i.d. coordinates, so the slice means match the law
    let law = two_point();
    let path = LatticePath::new(2, true, vec![0, 4, 3, 4, 1, 4, 4, 2]).unwrap();
    let mut total = 0.0;
    let mut count = 0.0;
    for seed in 0..200 {
        let env = EnvironmentField::sample(&law, DisorderKind::Bond, 12, 12, 2, seed).unwrap();
        let view = DeformedView::new(BondEnv::new(&env).unwrap(), &path, 4, 4).unwrap();
        let f = EnvironmentField::materialize(&view, 4, 4).unwrap();
        total += f.values().iter().sum::<f64>();
        count += f.len() as f64;
        assert_eq!(view.kind(), DisorderKind::Bond);
    }
    let mean = total / count;
    let se = (0.25 / count).sqrt();
    assert!((mean - 0.5).abs() < 4.0 * se, "{mean}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity_holds_for_random_drifts(seed in any::<u64>(), dim in 1usize..=3, n in 1usize..=4, beta in 0.05f64..1.5) {
        let n = if dim == 3 { n.min(3) } else { n };
        let law = two_point();
        let env = EnvironmentField::sample(&law, DisorderKind::Bond, 2 * n, 2 * n, dim, seed).unwrap();
        let mut rng = SeqRng::new(seed ^ 3);
        let spec = build_coupling_spec(&random_drift(&mut rng, dim), &random_drift(&mut rng, dim)).unwrap();
        let c = coupling_identity_check(BondEnv::new(&env).unwrap(), &law, beta, &spec, n).unwrap();
        prop_assert!(c.rel_error <= 1e-11, "{:?}", c);
        prop_assert!(spec.eta.iter().all(|&e| e >= 0.0) && spec.rho.iter().all(|&r| (0.0..=1.0).contains(&r)));
        prop_assert!((spec.eta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

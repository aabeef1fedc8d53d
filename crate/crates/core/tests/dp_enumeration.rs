mod common;

use common::{brute_force_w, random_drift, rel_err, two_point};
use polymer_lab::lattice::{DisorderKind, DriftMeasure, EnvironmentField};
use polymer_lab::polymer::{self, endpoint_law};
use polymer_lab::rng::SeqRng;
use proptest::prelude::*;

#[test]
fn one_step_by_hand() {
    let law = two_point();
    let env =
        EnvironmentField::from_fn(DisorderKind::Site, 1, 1, 1, |_, x, _| if x[0] > 0 { 1.0 } else { 0.0 }).unwrap();
    let alpha = DriftMeasure::new(1, vec![0.6, 0.4]).unwrap();
    let e = std::f64::consts::E;
    let expected = (0.6 * e + 0.4) * 2.0 / (1.0 + e);
    let r = polymer::polymer(&env, &law, 1.0, &alpha, 1).unwrap();
    assert!(rel_err(r.w(), expected) < 1e-15);
    assert!(rel_err(r.endpoint.prob(&[1]), 0.6 * e / (0.6 * e + 0.4)) < 1e-15);
}

#[test]
fn two_bond_steps_by_hand() {
    // omega = 1 only on the bond ((0, 0), (1, 1)) and on ((1, 1), (2, 2))
    let law = two_point();
    let env = EnvironmentField::from_fn(DisorderKind::Bond, 1, 2, 2, |t, x, k| {
        f64::from(u8::from(k == 0 && x[0] == t as i32))
    })
    .unwrap();
    let alpha = DriftMeasure::uniform(1);
    let e = std::f64::consts::E;
    let z = (e * e + e + 1.0 + 1.0) / 4.0;
    let lambda = ((1.0 + e) / 2.0).ln();
    let r = polymer::polymer(&env, &law, 1.0, &alpha, 2).unwrap();
    assert!(rel_err(r.z(), z) < 1e-15);
    assert!(rel_err(r.w(), z * (-2.0 * lambda).exp()) < 1e-15);
    assert!(rel_err(r.endpoint.prob(&[2]), e * e / 4.0 / z) < 1e-15);
}

#[test]
fn beta_zero_gives_one() {
    let law = two_point();
    for d in 1..=3 {
        let env = EnvironmentField::sample(&law, DisorderKind::Bond, 4, 4, d, 9).unwrap();
        let w = polymer::polymer(&env, &law, 0.0, &DriftMeasure::uniform(d), 4).unwrap().w();
        assert_eq!(w, 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dp_matches_path_sum(seed in any::<u64>(), d in 1usize..=3, n in 0usize..=5, site in any::<bool>(), beta in 0.0f64..2.0) {
        let n = if d == 3 { n.min(4) } else { n };
        let kind = if site { DisorderKind::Site } else { DisorderKind::Bond };
        let law = two_point();
        let env = EnvironmentField::sample(&law, kind, n, n, d, seed).unwrap();
        let alpha = random_drift(&mut SeqRng::new(seed ^ 1), d);
        let dp = polymer::polymer(&env, &law, beta, &alpha, n).unwrap();
        let bf = brute_force_w(&env, &law, beta, &alpha, n);
        prop_assert!(rel_err(dp.w(), bf) <= 1e-12, "dp {} brute {}", dp.w(), bf);
    }

    #[test]
    fn endpoint_law_is_a_probability(seed in any::<u64>(), d in 1usize..=3, n in 1usize..=8, beta in 0.0f64..3.0) {
        let law = two_point();
        let env = EnvironmentField::sample(&law, DisorderKind::Bond, n, n, d, seed).unwrap();
        let mu = endpoint_law(&env, &law, beta, &DriftMeasure::uniform(d), n).unwrap();
        prop_assert!((mu.total() - 1.0).abs() < 1e-12);
        for (x, p) in mu.iter() {
            prop_assert!(p >= 0.0);
            let norm: i32 = x.iter().map(|v| v.abs()).sum();
            prop_assert!(norm as usize <= n && (n - norm as usize).is_multiple_of(2));
        }
    }
}

mod common;

use common::two_point;
use polymer_lab::asymptotics::{
    free_energy, martingale_cauchy_diagnostic, rate_function_j, srw_legendre, srw_log_mgf, srw_rate_function, McSetup,
};
use polymer_lab::lattice::{DisorderKind, DriftMeasure};
use proptest::prelude::*;

fn one_dimensional_rate(x: f64) -> f64 {
    let term = |v: f64| if v > 0.0 { v * v.ln() } else { 0.0 };
    0.5 * (term(1.0 + x) + term(1.0 - x))
}

#[test]
fn one_dimensional_closed_form() {
    for x in [0.0, 0.1, -0.3, 0.5, 0.9, 0.999, 1.0, -1.0] {
        let i = srw_rate_function(&[x]);
        assert!((i - one_dimensional_rate(x)).abs() < 1e-10, "{x}: {i}");
    }
}

#[test]
fn corners_equal_log_2d() {
    for d in 1..=4 {
        let mut e1 = vec![0.0; d];
        e1[0] = 1.0;
        let i = srw_rate_function(&e1);
        assert!((i - ((2 * d) as f64).ln()).abs() <= 1e-9);
        e1[0] = 1.0 - 1e-9;
        assert!((srw_rate_function(&e1) - ((2 * d) as f64).ln()).abs() < 1e-6);
    }
    assert!(srw_rate_function(&[0.7, 0.4]).is_infinite());
}

#[test]
fn gradient_of_log_mgf_matches_finite_differences() {
    let l = [0.3, -0.7, 1.1];
    let (_, mean, hess) = srw_log_mgf(&l);
    let h = 1e-6;
    for i in 0..3 {
        let mut p = l;
        let mut m = l;
        p[i] += h;
        m[i] -= h;
        let fd = (srw_log_mgf(&p).0 - srw_log_mgf(&m).0) / (2.0 * h);
        assert!((fd - mean[i]).abs() < 1e-8);
        let (_, mp, _) = srw_log_mgf(&p);
        let (_, mm, _) = srw_log_mgf(&m);
        for j in 0..3 {
            assert!(((mp[j] - mm[j]) / (2.0 * h) - hess[(j, i)]).abs() < 1e-7);
        }
    }
}

#[test]
fn legendre_maximizer_is_stationary() {
    let x = [0.2, -0.35, 0.1];
    let leg = srw_legendre(&x);
    assert!(leg.gradient_residual <= 1e-12);
    let (v, mean, _) = srw_log_mgf(&leg.lambda);
    for i in 0..3 {
        assert!((mean[i] - x[i]).abs() < 1e-12);
    }
    let direct: f64 = leg.lambda.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - v;
    assert!((direct - leg.value).abs() < 1e-14);
}

#[test]
fn beta_zero_rate_matches_the_binomial() {
    let law = two_point();
    let setup = McSetup { law: &law, beta: 0.0, kind: DisorderKind::Bond, dim: 1, replicas: 10, seed: 1 };
    let n = 20;
    let rows = rate_function_j(&setup, &[vec![0.5], vec![0.0]], n).unwrap();
    let log_choose = |n: u64, k: u64| (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum::<f64>();
    for (row, k) in rows.iter().zip([15u64, 10]) {
        let exact = -(log_choose(n as u64, k) - n as f64 * 2f64.ln()) / n as f64;
        assert!((row.j.mean - exact).abs() < 1e-12, "{} vs {exact}", row.j.mean);
        assert!(row.j.se < 1e-15);
    }
}

#[test]
fn beta_zero_free_energy_and_cauchy_vanish() {
    let law = two_point();
    let setup = McSetup { law: &law, beta: 0.0, kind: DisorderKind::Site, dim: 2, replicas: 10, seed: 2 };
    let fe = free_energy(&setup, &DriftMeasure::uniform(2), &[4, 8]).unwrap();
    assert!(fe.per_n.iter().all(|p| p.value.mean == 0.0));
    for row in martingale_cauchy_diagnostic(&setup, &DriftMeasure::uniform(2), &[4, 8], 2).unwrap() {
        assert_eq!(row.oscillation.mean, 0.0);
    }
}

#[test]
fn jensen_bound_holds() {
    let law = two_point();
    let setup = McSetup { law: &law, beta: 1.0, kind: DisorderKind::Bond, dim: 1, replicas: 200, seed: 3 };
    let fe = free_energy(&setup, &DriftMeasure::uniform(1), &[8, 16]).unwrap();
    assert!(fe.jensen_ok);
    assert!(fe.per_n.iter().all(|p| p.value.mean < 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rate_function_is_convex_and_symmetric(a in prop::collection::vec(-0.45f64..0.45, 2), b in prop::collection::vec(-0.45f64..0.45, 2)) {
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let (ia, ib, im) = (srw_rate_function(&a), srw_rate_function(&b), srw_rate_function(&mid));
        prop_assert!(im <= 0.5 * (ia + ib) + 1e-12);
        prop_assert!(ia >= 0.0);
        let swapped = [-a[1], a[0]];
        prop_assert!((srw_rate_function(&swapped) - ia).abs() < 1e-10);
    }
}

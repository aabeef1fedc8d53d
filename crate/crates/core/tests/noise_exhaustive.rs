mod common;

use common::{exhaustive_noised_w, random_drift, reachable, rel_err, subset_profile, two_point};
use polymer_lab::lattice::{DisorderKind, DriftMeasure, EnvironmentField};
use polymer_lab::noise::{noised_martingale_exact, noised_martingale_mc, ResampleProfile};
use polymer_lab::polymer;
use polymer_lab::rng::SeqRng;
use proptest::prelude::*;

fn pick(all: &[(usize, usize, usize)], k: usize, rng: &mut SeqRng) -> Vec<(usize, usize, usize)> {
    let mut v = all.to_vec();
    for i in 0..v.len().min(k) {
        let j = i + rng.below(v.len() - i);
        v.swap(i, j);
    }
    v.truncate(k);
    v
}

#[test]
fn full_enumeration_on_the_smallest_instances() {
    let law = two_point();
    for (kind, n) in [(DisorderKind::Site, 3), (DisorderKind::Bond, 2), (DisorderKind::Site, 2)] {
        let env = EnvironmentField::sample(&law, kind, n, n, 1, 5).unwrap();
        let all = reachable(&env);
        assert!(all.len() <= 14);
        let alpha = DriftMeasure::new(1, vec![0.3, 0.7]).unwrap();
        for rho in [0.0, 0.35, 1.0] {
            let profile = ResampleProfile::table(subset_profile(&env, &all, rho)).unwrap();
            let exact = noised_martingale_exact(&env, &law, 0.9, &alpha, n, &profile).unwrap();
            let oracle = exhaustive_noised_w(&env, (0.0, 1.0, 0.5), 0.9, &alpha, n, &all, rho);
            assert!(rel_err(exact, oracle) <= 1e-12, "{kind:?} n={n} rho={rho}: {exact} vs {oracle}");
        }
    }
}

#[test]
fn zero_retention_averages_out_the_environment() {
    let law = two_point();
    let env = EnvironmentField::sample(&law, DisorderKind::Bond, 5, 5, 2, 3).unwrap();
    let w =
        noised_martingale_exact(&env, &law, 1.2, &DriftMeasure::uniform(2), 5, &ResampleProfile::scalar(0.0).unwrap());
    assert_eq!(w.unwrap(), 1.0);
}

#[test]
fn monte_carlo_agrees_on_a_small_window() {
    let law = DisorderLaw::uniform(-1.0, 1.0).unwrap();
    let env = EnvironmentField::sample(&law, DisorderKind::Bond, 6, 6, 2, 17).unwrap();
    let alpha = DriftMeasure::uniform(2);
    let profile = ResampleProfile::scalar(0.5).unwrap();
    let exact = noised_martingale_exact(&env, &law, 1.0, &alpha, 6, &profile).unwrap();
    let mc = noised_martingale_mc(&env, &law, 1.0, &alpha, 6, &profile, 4000, 23).unwrap();
    assert!(mc.within(exact, 4.0), "{exact} vs {mc:?}");
    assert_ne!(exact, polymer::polymer(&env, &law, 1.0, &alpha, 6).unwrap().w());
}

use polymer_lab::disorder::DisorderLaw;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exact_matches_exhaustive_resampling(
        seed in any::<u64>(),
        d in 1usize..=2,
        n in 1usize..=4,
        site in any::<bool>(),
        rho in 0.0f64..1.0,
        p in 0.1f64..0.9,
    ) {
        let kind = if site { DisorderKind::Site } else { DisorderKind::Bond };
        let law = DisorderLaw::two_point(-0.5, 1.0, p).unwrap();
        let env = EnvironmentField::sample(&law, kind, n, n, d, seed).unwrap();
        let mut rng = SeqRng::new(seed ^ 7);
        let subset = pick(&reachable(&env), 10, &mut rng);
        let alpha = random_drift(&mut rng, d);
        let profile = ResampleProfile::table(subset_profile(&env, &subset, rho)).unwrap();
        let exact = noised_martingale_exact(&env, &law, 0.8, &alpha, n, &profile).unwrap();
        let oracle = exhaustive_noised_w(&env, (-0.5, 1.0, p), 0.8, &alpha, n, &subset, rho);
        prop_assert!(rel_err(exact, oracle) <= 1e-12, "{} vs {}", exact, oracle);
    }
}

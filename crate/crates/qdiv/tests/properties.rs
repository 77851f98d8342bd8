use proptest::prelude::*;
use qdiv::channels::random_channel;
use qdiv::divergences::{classical_state, fidelity, petz_renyi, purified_distance, relative_entropy, sandwiched_renyi};
use qdiv::oracle;
use qdiv::random;
use qdiv::BlockAlgebra;

fn distribution(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, k).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn data_processing_under_random_channels(seed in any::<u64>(), d_in in 2usize..4, d_out in 2usize..4, alpha in 0.5f64..3.0) {
        let mut rng = random::rng(seed);
        let alg = BlockAlgebra::full(d_in);
        let (rho, sigma) = (random::state(&alg, None, &mut rng), random::state(&alg, None, &mut rng));
        let phi = random_channel(d_in, d_out, 2, seed ^ 1).unwrap();
        let (a, b) = (phi.apply(&rho).unwrap(), phi.apply(&sigma).unwrap());
        prop_assert!(relative_entropy(&a, &b).unwrap().value <= relative_entropy(&rho, &sigma).unwrap().value + 1e-9);
        prop_assert!(sandwiched_renyi(&a, &b, alpha).unwrap().value <= sandwiched_renyi(&rho, &sigma, alpha).unwrap().value + 1e-9);
    }

    #[test]
    fn sandwiched_is_below_petz(seed in any::<u64>(), alpha in 1.01f64..2.0) {
        let mut rng = random::rng(seed);
        let alg = BlockAlgebra::full(3);
        let (rho, sigma) = (random::state(&alg, None, &mut rng), random::state(&alg, None, &mut rng));
        prop_assert!(sandwiched_renyi(&rho, &sigma, alpha).unwrap().value <= petz_renyi(&rho, &sigma, alpha).unwrap().value + 1e-9);
    }

    #[test]
    fn commuting_pairs_match_the_oracle(p in distribution(4), q in distribution(4), alpha in prop_oneof![0.5f64..0.95, 1.05f64..2.0]) {
        let (rho, sigma) = (classical_state(&p).unwrap(), classical_state(&q).unwrap());
        let want = oracle::renyi(&p, &q, alpha);
        prop_assert!((sandwiched_renyi(&rho, &sigma, alpha).unwrap().value - want).abs() < 1e-9);
        prop_assert!((petz_renyi(&rho, &sigma, alpha).unwrap().value - want).abs() < 1e-9);
        prop_assert!((fidelity(&rho, &sigma).unwrap() - oracle::fidelity(&p, &q)).abs() < 1e-9);
    }

    #[test]
    fn purified_distance_is_a_symmetric_bounded_metric(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let alg = BlockAlgebra::full(3);
        let (rho, sigma) = (random::state(&alg, None, &mut rng), random::state(&alg, None, &mut rng));
        let (ab, ba) = (purified_distance(&rho, &sigma).unwrap(), purified_distance(&sigma, &rho).unwrap());
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(purified_distance(&rho, &rho).unwrap() < 1e-6);
    }
}

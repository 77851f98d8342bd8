use qdiv::divergences::{classical_state, d_max, petz_renyi, relative_entropy, sandwiched_renyi};
use qdiv::linalg::{c64, CMat};
use qdiv::oracle::{self, Distribution};
use qdiv::smoothing::{hypothesis_testing, smooth_dmax};
use qdiv::symmetric;
use qdiv::{BlockAlgebra, BlockOperator, PositiveFunctional};

fn qubit_pair() -> (PositiveFunctional, PositiveFunctional) {
    let alg = BlockAlgebra::full(2);
    let rho = CMat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => c64::new(0.7, 0.0),
        (1, 1) => c64::new(0.3, 0.0),
        (0, 1) => c64::new(0.2, -0.1),
        _ => c64::new(0.2, 0.1),
    });
    let rho = PositiveFunctional::new(BlockOperator::new(&alg, vec![rho]).unwrap()).unwrap();
    let sigma = PositiveFunctional::new(BlockOperator::from_diag(&alg, &[0.4, 0.6]).unwrap()).unwrap();
    (rho, sigma)
}

// mpmath at 40 digits
#[test]
fn qubit_pair_matches_high_precision_values() {
    let (rho, sigma) = qubit_pair();
    let cases = [
        (relative_entropy(&rho, &sigma).unwrap().value, 0.42451124978365303),
        (sandwiched_renyi(&rho, &sigma, 2.0).unwrap().value, 0.65912459530835783),
        (petz_renyi(&rho, &sigma, 0.5).unwrap().value, 0.23216364331761777),
        (d_max(&rho, &sigma).unwrap().value, 0.9251821541444482),
    ];
    for (got, want) in cases {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn diagonal_pair_agrees_with_classical_oracle() {
    let (p, q) = ([0.5, 0.5], [0.25, 0.75]);
    let (rho, sigma) = (classical_state(&p).unwrap(), classical_state(&q).unwrap());
    assert!((relative_entropy(&rho, &sigma).unwrap().value - (1.0 - 0.5 * 3f64.log2())).abs() < 1e-14);
    assert!((d_max(&rho, &sigma).unwrap().value - 1.0).abs() < 1e-14);
    let (pd, qd) = (Distribution::new(p.to_vec()).unwrap(), Distribution::new(q.to_vec()).unwrap());
    let dh = hypothesis_testing(&rho, &sigma, 0.2).unwrap().0.value;
    assert!((dh - oracle::classical_dh(&pd, &qd, 0.2).unwrap()).abs() < 1e-8);
    let sm = smooth_dmax(&rho, &sigma, 0.2).unwrap().0.value;
    let classical = oracle::classical_smooth_dmax(&pd, &qd, 0.2, 1e-10).unwrap();
    assert!((sm - classical).abs() < 1e-4, "{sm} vs {classical}");
}

#[test]
fn symmetric_powers_reproduce_dense_tensor_powers() {
    let (rho, sigma) = qubit_pair();
    for n in 2..=4 {
        let dense = (rho.tensor_power(n), sigma.tensor_power(n));
        let sym = (symmetric::qubit_state_power(&rho, n).unwrap(), symmetric::qubit_state_power(&sigma, n).unwrap());
        let a = relative_entropy(&dense.0, &dense.1).unwrap().value;
        let b = relative_entropy(&sym.0, &sym.1).unwrap().value;
        assert!((a - n as f64 * 0.42451124978365303).abs() < 1e-10);
        assert!((a - b).abs() < 1e-10);
        let a = hypothesis_testing(&dense.0, &dense.1, 0.25).unwrap().0.value;
        let b = hypothesis_testing(&sym.0, &sym.1, 0.25).unwrap().0.value;
        assert!((a - b).abs() < 1e-6, "n={n}: {a} vs {b}");
    }
}

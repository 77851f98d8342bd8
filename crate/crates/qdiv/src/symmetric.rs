//! Permutation-invariant representation of qubit tensor powers.
//!
//! For a 2×2 matrix X, X^{⊗n} decomposes under Schur–Weyl duality as
//! ⊕_k det(X)^k Sym^{n−2k}(X) ⊗ 1_{m_k} with multiplicity
//! m_k = C(n,k) − C(n,k−1). The multiplicities become trace weights of a
//! block algebra, so ρ^{⊗n} and σ^{⊗n} live on blocks of size n−2k+1 instead
//! of one block of size 2^n. Every unitarily invariant convex problem whose
//! data commute with the permutation action (divergences, hypothesis tests,
//! smoothing) has the same value in either picture.

use crate::algebra::{BlockAlgebra, BlockOperator, PositiveFunctional};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Blocks (n−2k+1, m_k) for k = 0..=n/2.
pub fn symmetric_algebra(n: usize) -> Result<BlockAlgebra> {
    if n == 0 {
        return Err(Error::Domain("tensor power must be at least 1".into()));
    }
    let blocks: Vec<(usize, f64)> = (0..=n / 2)
        .map(|k| {
            let mult = binomial(n, k) - if k > 0 { binomial(n, k - 1) } else { 0.0 };
            (n - 2 * k + 1, mult)
        })
        .collect();
    BlockAlgebra::new(&blocks)
}

fn complex_pow(z: c64, k: usize) -> c64 {
    (0..k).fold(c64::new(1.0, 0.0), |acc, _| acc * z)
}

/// Sym^m(X) in the orthonormal Dicke basis, indexed by the number of ones.
pub fn symmetric_power(x: &CMat, m: usize) -> CMat {
    let (x00, x01, x10, x11) = (x[(0, 0)], x[(0, 1)], x[(1, 0)], x[(1, 1)]);
    CMat::from_fn(m + 1, m + 1, |a, b| {
        let mut c = c64::new(0.0, 0.0);
        let lo = a.saturating_sub(b);
        let hi = a.min(m - b);
        for r in lo..=hi {
            let coeff = binomial(m - b, r) * binomial(b, a - r);
            c += complex_pow(x10, r) * complex_pow(x00, m - b - r) * complex_pow(x11, a - r) * complex_pow(x01, b + r - a) * coeff;
        }
        c * (binomial(m, b) / binomial(m, a)).sqrt()
    })
}

/// X^{⊗n} on the symmetric block algebra.
pub fn qubit_power(x: &BlockOperator, n: usize) -> Result<BlockOperator> {
    let alg = x.algebra();
    if alg.num_blocks() != 1 || alg.blocks()[0].dim != 2 || alg.blocks()[0].weight != 1.0 {
        return Err(Error::Domain("symmetric powers need a single qubit block of unit weight".into()));
    }
    let m = x.block(0);
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let target = symmetric_algebra(n)?;
    let blocks = (0..=n / 2).map(|k| symmetric_power(m, n - 2 * k) * faer::Scale(complex_pow(det, k))).collect();
    let out = BlockOperator::new(&target, blocks)?;
    Ok(if x.is_hermitian() { out.hermitized() } else { out })
}

/// ρ^{⊗n} for a qubit functional, on the symmetric block algebra.
pub fn qubit_state_power(rho: &PositiveFunctional, n: usize) -> Result<PositiveFunctional> {
    PositiveFunctional::from_nearly_positive(&qubit_power(rho.operator(), n)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::{relative_entropy, sandwiched_renyi};
    use crate::random;
    use crate::smoothing::hypothesis_testing;

    #[test]
    fn multiplicities_count_the_dimension() {
        for n in 1..=10 {
            let alg = symmetric_algebra(n).unwrap();
            let total: f64 = alg.blocks().iter().map(|b| b.dim as f64 * b.weight).sum();
            assert_eq!(total, 2f64.powi(n as i32));
        }
    }

    #[test]
    fn symmetric_power_is_a_representation() {
        let mut rng = random::rng(4);
        let a = random::ginibre(2, 2, &mut rng);
        let b = random::ginibre(2, 2, &mut rng);
        let ab = &a * &b;
        for m in 0..6 {
            let lhs = symmetric_power(&ab, m);
            let rhs = symmetric_power(&a, m) * symmetric_power(&b, m);
            assert!(crate::linalg::frobenius((&lhs - &rhs).as_ref()) < 1e-10);
        }
        let u = random::unitary(2, &mut rng);
        let su = symmetric_power(&u, 3);
        let p = su.adjoint() * &su;
        assert!(crate::linalg::frobenius((&p - crate::linalg::identity(4)).as_ref()) < 1e-12);
    }

    #[test]
    fn spectra_match_dense_powers() {
        let mut rng = random::rng(8);
        let alg = BlockAlgebra::full(2);
        let rho = random::state(&alg, None, &mut rng);
        let sigma = random::state(&alg, None, &mut rng);
        for n in 1..=5 {
            let (rs, ss) = (qubit_state_power(&rho, n).unwrap(), qubit_state_power(&sigma, n).unwrap());
            let (rd, sd) = (rho.tensor_power(n), sigma.tensor_power(n));
            assert!((rs.normalization() - 1.0).abs() < 1e-12, "{n} {}", rs.normalization());
            let a = relative_entropy(&rs, &ss).unwrap().value;
            let b = relative_entropy(&rd, &sd).unwrap().value;
            assert!((a - b).abs() < 1e-9, "{n}: {a} {b}");
            let a = sandwiched_renyi(&rs, &ss, 1.5).unwrap().value;
            let b = sandwiched_renyi(&rd, &sd, 1.5).unwrap().value;
            assert!((a - b).abs() < 1e-9);
            let a = hypothesis_testing(&rs, &ss, 0.25).unwrap().0.value;
            let b = hypothesis_testing(&rd, &sd, 0.25).unwrap().0.value;
            assert!((a - b).abs() < 1e-7);
        }
    }
}

//! Second-order expansions, finite-n bounds and the tensor-power sweeps that
//! compare them with exactly computed smoothed divergences.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::algebra::{support_dominated, BlockAlgebra, PositiveFunctional};
use crate::channels::Channel;
use crate::divergences::{d_max, moments, petz_renyi, sandwiched_renyi};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::oracle::{self, Distribution};
use crate::smoothing::{hypothesis_testing, smooth_dmax_with, Ball};
use crate::splitting::SolverConfig;
use crate::symmetric;

/// Largest dense dimension of a quantum tensor power.
pub const DIMENSION_BUDGET: usize = 1024;

/// Φ(a) = P(Z ≤ a) for a standard normal Z.
pub fn gaussian_cdf(a: f64) -> f64 {
    0.5 * libm::erfc(-a / std::f64::consts::SQRT_2)
}

/// Φ⁻¹(ε), polished by Newton steps on Φ.
pub fn gaussian_quantile(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("quantile level {eps} outside (0,1)")));
    }
    // evaluate in the lower tail and reflect, so that both tails get full relative accuracy
    let (p, sign) = if eps <= 0.5 { (eps, 1.0) } else { (1.0 - eps, -1.0) };
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..3 {
        let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if density == 0.0 {
            break;
        }
        let step = (gaussian_cdf(x) - p) / density;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(sign * x)
}

/// Which smoothed divergence an expansion or sweep refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothed {
    /// (1/n) D_H^ε, expanded as D + √(V/n) Φ⁻¹(ε).
    HypothesisTesting,
    /// (1/n) D_max^{√ε}, expanded as D − √(V/n) Φ⁻¹(ε).
    MaxRelative,
}

/// Centered V = τ(ρ(L − D)²) or raw τ(ρL²).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    #[default]
    Centered,
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderExpansion {
    pub d: f64,
    pub v: f64,
    pub n: usize,
    pub epsilon: f64,
    pub predicted: f64,
}

impl SecondOrderExpansion {
    pub fn evaluate(d: f64, v: f64, n: usize, epsilon: f64, which: Smoothed) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("n must be positive".into()));
        }
        if !(v >= 0.0) || !d.is_finite() || !v.is_finite() {
            return Err(Error::Domain(format!("expansion needs finite D and V >= 0, got D = {d}, V = {v}")));
        }
        let term = (v / n as f64).sqrt() * gaussian_quantile(epsilon)?;
        let predicted = match which {
            Smoothed::HypothesisTesting => d + term,
            Smoothed::MaxRelative => d - term,
        };
        Ok(SecondOrderExpansion { d, v, n, epsilon, predicted })
    }
}

pub fn second_order_target(
    rho: &PositiveFunctional,
    sigma: &PositiveFunctional,
    n: usize,
    eps: f64,
    which: Smoothed,
) -> Result<SecondOrderExpansion> {
    second_order_target_with(rho, sigma, n, eps, which, Variance::Centered)
}

pub fn second_order_target_with(
    rho: &PositiveFunctional,
    sigma: &PositiveFunctional,
    n: usize,
    eps: f64,
    which: Smoothed,
    variance: Variance,
) -> Result<SecondOrderExpansion> {
    if !support_dominated(rho, sigma) {
        return Err(Error::Precondition("supp ρ is not contained in supp σ".into()));
    }
    let m = moments(rho, sigma)?;
    let v = match variance {
        Variance::Centered => m.v_centered,
        Variance::Raw => m.v_raw,
    };
    SecondOrderExpansion::evaluate(m.relative_entropy, v.max(0.0), n, eps, which)
}

/// g(ε) = log₂(2/ε²).
pub fn g_epsilon(eps: f64) -> f64 {
    (2.0 / (eps * eps)).log2()
}

/// μ = √(2^{D̃_{3/2}}) + √(2^{−D̃_{1/2}}) + 1 with Petz divergences.
pub fn finite_n_mu(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<f64> {
    let upper = petz_renyi(rho, sigma, 1.5)?.value;
    let lower = petz_renyi(rho, sigma, 0.5)?.value;
    Ok((0.5 * upper).exp2() + (-0.5 * lower).exp2() + 1.0)
}

/// D + 4 log₂(μ) √g(ε) / √n, an upper bound on (1/n) D_max^ε(ρ^{⊗n}‖σ^{⊗n}) once n ≥ 2g(ε).
pub fn finite_n_dmax_bound(rho: &PositiveFunctional, sigma: &PositiveFunctional, n: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("epsilon {eps} outside (0,1]")));
    }
    let g = g_epsilon(eps);
    if (n as f64) < 2.0 * g {
        return Err(Error::Precondition(format!("n = {n} is below 2g(ε) = {:.4}", 2.0 * g)));
    }
    if !support_dominated(rho, sigma) {
        return Err(Error::Precondition("supp ρ is not contained in supp σ".into()));
    }
    let d = crate::divergences::relative_entropy(rho, sigma)?.value;
    let mu = finite_n_mu(rho, sigma)?;
    Ok(d + 4.0 * mu.log2() * g.sqrt() / (n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteNCheck {
    pub n: usize,
    pub measured_rate: f64,
    pub bound: f64,
}

/// Measured (1/n) D_max^ε(ρ^{⊗n}‖σ^{⊗n}) next to the finite-n bound.
pub fn finite_n_check(
    rho: &PositiveFunctional,
    sigma: &PositiveFunctional,
    n: usize,
    eps: f64,
    config: &SolverConfig,
) -> Result<FiniteNCheck> {
    let bound = finite_n_dmax_bound(rho, sigma, n, eps)?;
    let (rn, sn) = tensor_powers(rho, sigma, n)?;
    let measured = smooth_dmax_with(&rn, &sn, eps, Ball::Substates, config)?.0.value;
    Ok(FiniteNCheck { n, measured_rate: measured / n as f64, bound })
}

/// −(1/(α−1)) log₂(1 − √(1−ε²)).
pub fn renyi_correction(alpha: f64, eps: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::Domain(format!("alpha {alpha} must exceed 1")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("epsilon {eps} outside (0,1)")));
    }
    Ok(-(1.0 - (1.0 - eps * eps).sqrt()).log2() / (alpha - 1.0))
}

/// D_α(ρ‖σ) plus the Rényi correction, an upper bound on D_max^ε(ρ‖σ).
pub fn dmax_via_renyi_bound(rho: &PositiveFunctional, sigma: &PositiveFunctional, alpha: f64, eps: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::Domain(format!("alpha {alpha} outside (1,2]")));
    }
    let correction = renyi_correction(alpha, eps)?;
    Ok(sandwiched_renyi(rho, sigma, alpha)?.value + correction)
}

/// Bounds (log₂3 + D_max)² on raw V and (log₂(D_max + √D_max + 6))³ on raw T.
pub fn vt_from_dmax(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<(f64, f64)> {
    let dm = d_max(rho, sigma)?.value;
    if !dm.is_finite() {
        return Err(Error::Precondition("D_max is infinite".into()));
    }
    let v_bound = (3f64.log2() + dm).powi(2);
    let t_bound = (dm + dm.max(0.0).sqrt() + 6.0).log2().powi(3);
    Ok((v_bound, t_bound))
}

/// (log₂(λ + 2√λ + 6))³ with λ = 2^{D_max}, the third-moment bound in terms of
/// the ratio λ rather than its logarithm.
pub fn t_bound_via_ratio(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<f64> {
    let dm = d_max(rho, sigma)?.value;
    if !dm.is_finite() {
        return Err(Error::Precondition("D_max is infinite".into()));
    }
    let lambda = dm.exp2();
    Ok((lambda + 2.0 * lambda.sqrt() + 6.0).log2().powi(3))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EatBound {
    pub per_step_values: Vec<f64>,
    pub alpha: f64,
    pub epsilon: f64,
    pub total: f64,
}

pub fn eat_bound(steps: &[f64], alpha: f64, eps: f64) -> Result<EatBound> {
    let correction = renyi_correction(alpha, eps)?;
    let total = steps.iter().sum::<f64>() + correction;
    Ok(EatBound { per_step_values: steps.to_vec(), alpha, epsilon: eps, total })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EatCheck {
    pub smoothed: f64,
    pub bound: EatBound,
}

/// Factor `k` of a product space replaced by `state`, identity elsewhere.
fn embedded_replacer(dims: &[usize], k: usize, state: &PositiveFunctional) -> Result<Channel> {
    let factor = BlockAlgebra::full(dims[k]);
    let local = Channel::replacer(&factor, state)?;
    let left: usize = dims[..k].iter().product();
    let right: usize = dims[k + 1..].iter().product();
    let total = left * dims[k] * right;
    let mats: Vec<CMat> = local
        .kraus()
        .iter()
        .map(|op| linalg::kron(linalg::kron(linalg::identity(left).as_ref(), op.matrix.as_ref()).as_ref(), linalg::identity(right).as_ref()))
        .collect();
    let full = BlockAlgebra::full(total);
    Channel::from_dense_kraus(&full, &full, &mats, "embedded replacer")
}

/// Runs the chains Φ_k = id ⊗ R_{ρ_k} ⊗ id and Ψ_k = id ⊗ R_{σ_k} ⊗ id on
/// `input` and compares D_max^ε of the outputs with the accumulated bound,
/// whose per-step values are the sandwiched D_α(ρ_k‖σ_k).
pub fn eat_replacer_chain(
    pairs: &[(PositiveFunctional, PositiveFunctional)],
    input: &PositiveFunctional,
    alpha: f64,
    eps: f64,
    config: &SolverConfig,
) -> Result<EatCheck> {
    let mut dims = Vec::with_capacity(pairs.len());
    for (r, s) in pairs {
        r.check_same_algebra(s)?;
        let alg = r.algebra();
        if alg.num_blocks() != 1 || alg.blocks()[0].weight != 1.0 {
            return Err(Error::Domain("chain steps need full matrix algebras".into()));
        }
        dims.push(alg.total_dim());
    }
    let total: usize = dims.iter().product();
    if total > DIMENSION_BUDGET {
        return Err(Error::Budget(format!("chain dimension {total}")));
    }
    if input.algebra().total_dim() != total || input.algebra().num_blocks() != 1 {
        return Err(Error::AlgebraMismatch);
    }
    let mut out_phi = input.clone();
    let mut out_psi = input.clone();
    let mut steps = Vec::with_capacity(pairs.len());
    for (k, (r, s)) in pairs.iter().enumerate() {
        out_phi = embedded_replacer(&dims, k, r)?.apply(&out_phi)?;
        out_psi = embedded_replacer(&dims, k, s)?.apply(&out_psi)?;
        steps.push(sandwiched_renyi(r, s, alpha)?.value);
    }
    let bound = eat_bound(&steps, alpha, eps)?;
    let smoothed = smooth_dmax_with(&out_phi, &out_psi, eps, Ball::Substates, config)?.0.value;
    Ok(EatCheck { smoothed, bound })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRuleCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// D_α(Φρ‖Ψσ) ≤ D_α(ρ‖σ) + reg_upper with sandwiched D_α (α = ∞ gives D_max).
pub fn chain_rule_check(
    rho: &PositiveFunctional,
    sigma: &PositiveFunctional,
    phi: &Channel,
    psi: &Channel,
    alpha: f64,
    reg_upper: f64,
) -> Result<ChainRuleCheck> {
    let lhs = sandwiched_renyi(&phi.apply(rho)?, &psi.apply(sigma)?, alpha)?.value;
    let rhs = sandwiched_renyi(rho, sigma, alpha)?.value + reg_upper;
    let holds = lhs == f64::NEG_INFINITY || rhs == f64::INFINITY || lhs <= rhs + 1e-6;
    Ok(ChainRuleCheck { lhs, rhs, holds })
}

/// ρ^{⊗n} and σ^{⊗n}, in the symmetric picture for qubits and densely otherwise.
pub fn tensor_powers(rho: &PositiveFunctional, sigma: &PositiveFunctional, n: usize) -> Result<(PositiveFunctional, PositiveFunctional)> {
    rho.check_same_algebra(sigma)?;
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let alg = rho.algebra();
    let dense = (alg.total_dim() as f64).powi(n as i32);
    if dense > DIMENSION_BUDGET as f64 {
        return Err(Error::Budget(format!("dimension {}^{n} exceeds {DIMENSION_BUDGET}", alg.total_dim())));
    }
    let qubit = alg.num_blocks() == 1 && alg.blocks()[0].dim == 2 && alg.blocks()[0].weight == 1.0;
    if qubit && n > 1 {
        Ok((symmetric::qubit_state_power(rho, n)?, symmetric::qubit_state_power(sigma, n)?))
    } else {
        Ok((rho.tensor_power(n), sigma.tensor_power(n)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub epsilon: f64,
    pub exact: f64,
    pub predicted: f64,
    pub residual: f64,
    /// residual·n/log₂n; undefined at n = 1.
    pub normalized_residual: f64,
    pub predicted_raw: f64,
    pub residual_raw: f64,
}

impl SweepRow {
    fn new(n: usize, epsilon: f64, exact: f64, predicted: f64, predicted_raw: f64) -> Self {
        let residual = exact - predicted;
        let normalized_residual = if n > 1 { residual * n as f64 / (n as f64).log2() } else { f64::NAN };
        SweepRow { n, epsilon, exact, predicted, residual, normalized_residual, predicted_raw, residual_raw: exact - predicted_raw }
    }
}

/// Exact per-copy rates of ρ^{⊗n} vs σ^{⊗n} against the second-order
/// expansion. D_H is smoothed at ε and D_max at √ε.
pub fn aep_sweep(
    rho: &PositiveFunctional,
    sigma: &PositiveFunctional,
    eps: f64,
    ns: &[usize],
    which: Smoothed,
    config: &SolverConfig,
) -> Result<Vec<SweepRow>> {
    ns.par_iter()
        .map(|&n| {
            let centered = second_order_target_with(rho, sigma, n, eps, which, Variance::Centered)?;
            let raw = second_order_target_with(rho, sigma, n, eps, which, Variance::Raw)?;
            let (rn, sn) = tensor_powers(rho, sigma, n)?;
            let value = match which {
                Smoothed::HypothesisTesting => hypothesis_testing(&rn, &sn, eps)?.0.value,
                Smoothed::MaxRelative => smooth_dmax_with(&rn, &sn, eps.sqrt(), Ball::Substates, config)?.0.value,
            };
            Ok(SweepRow::new(n, eps, value / n as f64, centered.predicted, raw.predicted))
        })
        .collect()
}

/// D_H sweep for i.i.d. distributions through type classes.
pub fn classical_aep_sweep(p: &Distribution, q: &Distribution, eps: f64, ns: &[usize]) -> Result<Vec<SweepRow>> {
    let (pw, qw) = (p.weights(), q.weights());
    let d = oracle::relative_entropy(pw, qw);
    let raw = oracle::log_ratio_moment(pw, qw, 2);
    let centered = raw - d * d;
    ns.par_iter()
        .map(|&n| {
            let c = SecondOrderExpansion::evaluate(d, centered.max(0.0), n, eps, Smoothed::HypothesisTesting)?;
            let r = SecondOrderExpansion::evaluate(d, raw.max(0.0), n, eps, Smoothed::HypothesisTesting)?;
            let exact = oracle::iid_type_class_dh(p, q, n, eps)? / n as f64;
            Ok(SweepRow::new(n, eps, exact, c.predicted, r.predicted))
        })
        .collect()
}

/// Least-squares slope of y against x.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    num / den
}

/// Writes a `#`-prefixed metadata line followed by the rows.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], metadata: &[(&str, String)], out: W) -> std::io::Result<()> {
    let mut out = out;
    let meta: Vec<String> = metadata.iter().map(|(k, v)| format!("{k}={v}")).collect();
    writeln!(out, "# {}", meta.join(" "))?;
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::classical_state;
    use crate::random;

    #[test]
    fn gaussian_pair_is_consistent() {
        assert_eq!(gaussian_quantile(0.5).unwrap(), 0.0);
        assert_eq!(gaussian_cdf(0.0), 0.5);
        // mpmath, 50 digits
        let q = gaussian_quantile(0.975).unwrap();
        assert!((q - 1.959963984540054).abs() < 1e-12, "{q:e}");
        assert!((gaussian_quantile(0.25).unwrap() + 0.6744897501960817).abs() < 1e-12);
        for &e in &[1e-12, 1e-6, 0.01, 0.1, 0.3, 0.5, 0.77, 0.999] {
            let e = 1.0 - (1.0 - e);
            let x = gaussian_quantile(e).unwrap();
            assert!((gaussian_cdf(x) - e).abs() <= 1e-10);
            assert!((gaussian_quantile(1.0 - e).unwrap() + x).abs() <= 1e-10 * x.abs().max(1.0));
        }
        assert!(gaussian_quantile(0.0).is_err());
        assert!(gaussian_quantile(1.0).is_err());
    }

    #[test]
    fn expansion_examples() {
        let rho = classical_state(&[0.3, 0.7]).unwrap();
        let e = second_order_target(&rho, &rho, 10, 0.1, Smoothed::HypothesisTesting).unwrap();
        assert_eq!(e.predicted, 0.0);
        let sigma = classical_state(&[0.5, 0.5]).unwrap();
        let e = second_order_target(&rho, &sigma, 7, 0.5, Smoothed::MaxRelative).unwrap();
        assert!((e.predicted - e.d).abs() < 1e-15);
        let (p, q) = (0.11f64, 0.5f64);
        let l = |a: f64, b: f64| (a / b).log2();
        let d = p * l(p, q) + (1.0 - p) * l(1.0 - p, 1.0 - q);
        let v = p * l(p, q).powi(2) + (1.0 - p) * l(1.0 - p, 1.0 - q).powi(2) - d * d;
        let rho = classical_state(&[p, 1.0 - p]).unwrap();
        let sigma = classical_state(&[q, 1.0 - q]).unwrap();
        let e = second_order_target(&rho, &sigma, 100, 0.25, Smoothed::HypothesisTesting).unwrap();
        assert!((e.predicted - (d + (v / 100.0).sqrt() * -0.6744897501960817)).abs() < 1e-12);
    }

    #[test]
    fn finite_n_examples() {
        let rho = classical_state(&[0.3, 0.7]).unwrap();
        assert!((finite_n_mu(&rho, &rho).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(g_epsilon(1.0), 1.0);
        let eps = 0.9;
        let b = finite_n_dmax_bound(&rho, &rho, 4, eps).unwrap();
        assert!((b - 4.0 * 3f64.log2() * g_epsilon(eps).sqrt() / 2.0).abs() < 1e-9);
        assert!(matches!(finite_n_dmax_bound(&rho, &rho, 2, 0.5), Err(Error::Precondition(_))));
    }

    #[test]
    fn renyi_correction_examples() {
        assert!((renyi_correction(2.0, 0.6).unwrap() - 5f64.log2()).abs() < 1e-12);
        assert!(renyi_correction(1.5, 1.0 - 1e-12).unwrap() < 1e-4);
        let rho = classical_state(&[0.3, 0.7]).unwrap();
        assert!((dmax_via_renyi_bound(&rho, &rho, 2.0, 0.6).unwrap() - 5f64.log2()).abs() < 1e-12);
        assert!(dmax_via_renyi_bound(&rho, &rho, 2.5, 0.6).is_err());
    }

    #[test]
    fn vt_bounds_on_the_bernoulli_pair() {
        let rho = classical_state(&[0.5, 0.5]).unwrap();
        let sigma = classical_state(&[0.25, 0.75]).unwrap();
        let (v, _) = vt_from_dmax(&rho, &sigma).unwrap();
        assert!((v - (3f64.log2() + 1.0).powi(2)).abs() < 1e-12);
        let m = moments(&rho, &sigma).unwrap();
        assert!(m.v_raw <= v);
    }

    #[test]
    fn third_moment_bounds_on_a_peaked_pair() {
        // p = (1, 0) against q with q_0 = 2^-10: T = 1000
        let q0 = 2f64.powi(-10);
        let rho = classical_state(&[1.0, 0.0]).unwrap();
        let sigma = classical_state(&[q0, 1.0 - q0]).unwrap();
        let t = moments(&rho, &sigma).unwrap().t_raw;
        assert!((t - 1000.0).abs() < 1e-9);
        let (_, literal) = vt_from_dmax(&rho, &sigma).unwrap();
        assert!(literal < t);
        assert!(t <= t_bound_via_ratio(&rho, &sigma).unwrap());
    }

    #[test]
    fn eat_chain_of_identical_steps_is_the_correction() {
        let b = eat_bound(&[0.0; 5], 1.5, 0.3).unwrap();
        assert_eq!(b.total, renyi_correction(1.5, 0.3).unwrap());
        let mut rng = random::rng(3);
        let alg = BlockAlgebra::full(2);
        let pairs: Vec<_> = (0..3).map(|_| (random::state(&alg, None, &mut rng), random::state(&alg, None, &mut rng))).collect();
        let input = random::state(&BlockAlgebra::full(8), None, &mut rng);
        let check = eat_replacer_chain(&pairs, &input, 1.5, 0.3, &SolverConfig::default()).unwrap();
        assert!(check.smoothed <= check.bound.total + 1e-6);
        let product = pairs[0].0.tensor(&pairs[1].0).tensor(&pairs[2].0);
        let composed = pairs.iter().enumerate().try_fold(input.clone(), |acc, (k, (r, _))| embedded_replacer(&[2, 2, 2], k, r)?.apply(&acc)).unwrap();
        assert!(composed.distance(&product) < 1e-12);
    }

    #[test]
    fn chain_rule_reduces_to_data_processing() {
        let mut rng = random::rng(5);
        let alg = BlockAlgebra::full(2);
        let rho = random::state(&alg, None, &mut rng);
        let sigma = random::state(&alg, None, &mut rng);
        let phi = crate::channels::random_channel(2, 2, 2, 9).unwrap();
        for &a in &[1.25, 1.5, 2.0, f64::INFINITY] {
            assert!(chain_rule_check(&rho, &sigma, &phi, &phi, a, 0.0).unwrap().holds);
        }
    }

    #[test]
    fn classical_sweep_matches_the_expansion_asymptotically() {
        let p = Distribution::new(vec![0.11, 0.89]).unwrap();
        let q = Distribution::new(vec![0.5, 0.5]).unwrap();
        let rows = classical_aep_sweep(&p, &q, 0.25, &[10, 100, 1000]).unwrap();
        assert!(rows[2].residual.abs() < rows[0].residual.abs());
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &[("seed", "0".into())], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# seed=0\nn,epsilon,exact,predicted,residual,normalized_residual"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn identical_states_sweep() {
        let alg = BlockAlgebra::full(2);
        let rho = random::state(&alg, None, &mut random::rng(2));
        let rows = aep_sweep(&rho, &rho, 0.25, &[1, 2, 3], Smoothed::HypothesisTesting, &SolverConfig::default()).unwrap();
        for r in rows {
            // D_H^ε(ρ‖ρ) = −log₂(1−ε)
            assert!((r.exact - (-(0.75f64).log2() / r.n as f64)).abs() < 1e-7, "{r:?}");
            assert_eq!(r.predicted, 0.0);
        }
    }
}

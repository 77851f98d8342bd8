//! Unsmoothed divergences of positive functionals on a block algebra.
//!
//! All logarithms are base 2. Generalized inverses and logarithms act on the
//! support only (see [`crate::algebra::SUPPORT_TOL`]).

use crate::algebra::{pinch, support_violation, distinct_spectrum_count, BlockAlgebra, BlockOperator, PositiveFunctional, Projection};
use crate::channels::Channel;
use crate::error::{Error, Result};
use crate::linalg;
use crate::oracle;
use crate::random;

/// Extended-real divergence value. Infinite values carry the projection on
/// which ρ has weight outside the support of σ.
#[derive(Clone, Debug)]
pub struct DivergenceValue {
    pub value: f64,
    pub witness: Option<Projection>,
}

impl DivergenceValue {
    pub fn finite(value: f64) -> Self {
        DivergenceValue { value, witness: None }
    }

    pub fn infinite(witness: Projection) -> Self {
        DivergenceValue { value: f64::INFINITY, witness: Some(witness) }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

fn check_pair(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<()> {
    rho.check_same_algebra(sigma)
}

/// Support of σ complemented: the witness used for +∞ values that do not
/// come from a strict support violation (e.g. orthogonal supports at α < 1).
fn outside_support(sigma: &PositiveFunctional) -> Projection {
    sigma.support().complement()
}

/// D(ρ‖σ) = τ(ρ log ρ) − τ(ρ log σ).
pub fn relative_entropy(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<DivergenceValue> {
    check_pair(rho, sigma)?;
    if let Some(w) = support_violation(rho, sigma) {
        return Ok(DivergenceValue::infinite(w));
    }
    let sr = rho.spectrum()?;
    let cut = sr.support_cut();
    let neg_entropy = sr.weighted_sum(|x| if x > cut { x * x.log2() } else { 0.0 });
    let log_sigma = sigma.spectrum()?.map_on_support(f64::log2);
    Ok(DivergenceValue::finite(neg_entropy - rho.pair(&log_sigma)))
}

/// log ρ − log σ with both logarithms on their supports.
fn log_ratio(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<BlockOperator> {
    let lr = rho.spectrum()?.map_on_support(f64::log2);
    let ls = sigma.spectrum()?.map_on_support(f64::log2);
    Ok(lr.sub(&ls))
}

/// Raw and centered second and third moments of log ρ − log σ under ρ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub relative_entropy: f64,
    pub v_raw: f64,
    pub t_raw: f64,
    pub v_centered: f64,
    pub t_centered: f64,
}

/// τ(ρ L^k) for k = 2, 3, raw and with L shifted by D.
pub fn moments(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<Moments> {
    check_pair(rho, sigma)?;
    let d = relative_entropy(rho, sigma)?.value;
    if !d.is_finite() {
        let inf = f64::INFINITY;
        return Ok(Moments { relative_entropy: inf, v_raw: inf, t_raw: inf, v_centered: inf, t_centered: inf });
    }
    let l = log_ratio(rho, sigma)?;
    let lc = l.sub(&BlockOperator::identity(rho.algebra()).scale(d));
    let second = |x: &BlockOperator| rho.pair(&x.mul(x));
    let third = |x: &BlockOperator| rho.pair(&x.mul(x).mul(x));
    Ok(Moments { relative_entropy: d, v_raw: second(&l), t_raw: third(&l), v_centered: second(&lc), t_centered: third(&lc) })
}

pub fn variance_v(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<(f64, f64)> {
    let m = moments(rho, sigma)?;
    Ok((m.v_raw, m.v_centered))
}

pub fn third_moment_t(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<(f64, f64)> {
    let m = moments(rho, sigma)?;
    Ok((m.t_raw, m.t_centered))
}

fn check_alpha(alpha: f64, lo: f64, hi: f64, hi_closed: bool, what: &str) -> Result<()> {
    let ok = alpha >= lo && alpha != 1.0 && (alpha < hi || (hi_closed && alpha == hi));
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha = {alpha} outside the domain of the {what} divergence")))
    }
}

fn from_trace_functional(q: f64, alpha: f64, sigma: &PositiveFunctional) -> DivergenceValue {
    if !(q > 0.0) {
        return DivergenceValue::infinite(outside_support(sigma));
    }
    DivergenceValue::finite(q.log2() / (alpha - 1.0))
}

/// D_α(ρ‖σ) = (1/(α−1)) log τ((σ^{(1−α)/2α} ρ σ^{(1−α)/2α})^α), α ∈ [1/2, 1) ∪ (1, ∞].
pub fn sandwiched_renyi(rho: &PositiveFunctional, sigma: &PositiveFunctional, alpha: f64) -> Result<DivergenceValue> {
    check_pair(rho, sigma)?;
    if alpha.is_infinite() && alpha > 0.0 {
        return d_max(rho, sigma);
    }
    check_alpha(alpha, 0.5, f64::INFINITY, false, "sandwiched Rényi")?;
    if alpha > 1.0 {
        if let Some(w) = support_violation(rho, sigma) {
            return Ok(DivergenceValue::infinite(w));
        }
    }
    let gamma = (1.0 - alpha) / (2.0 * alpha);
    let s = sigma.spectrum()?.map_on_support(|x| x.powf(gamma));
    let spec = rho.conjugate_by(&s).spectrum()?;
    let top = spec.max();
    if !(top > 0.0) {
        return Ok(DivergenceValue::infinite(outside_support(sigma)));
    }
    // factor out the largest eigenvalue so that t^α stays finite for large α
    let rest = spec.weighted_sum(|t| (t.max(0.0) / top).powf(alpha));
    Ok(DivergenceValue::finite((alpha * top.log2() + rest.log2()) / (alpha - 1.0)))
}

/// Petz–Rényi (1/(α−1)) log τ(ρ^α σ^{1−α}), α ∈ (0,1) ∪ (1,2].
pub fn petz_renyi(rho: &PositiveFunctional, sigma: &PositiveFunctional, alpha: f64) -> Result<DivergenceValue> {
    check_pair(rho, sigma)?;
    check_alpha(alpha, f64::MIN_POSITIVE, 2.0, true, "Petz Rényi")?;
    if alpha > 1.0 {
        if let Some(w) = support_violation(rho, sigma) {
            return Ok(DivergenceValue::infinite(w));
        }
    }
    let ra = rho.spectrum()?.map_on_support(|x| x.powf(alpha));
    let sb = sigma.spectrum()?.map_on_support(|x| x.powf(1.0 - alpha));
    Ok(from_trace_functional(ra.pair(&sb), alpha, sigma))
}

/// Geometric Rényi (1/(α−1)) log τ(σ^{1/2}(σ^{−1/2}ρσ^{−1/2})^α σ^{1/2}), α ∈ (0,1) ∪ (1,2].
pub fn geometric_renyi(rho: &PositiveFunctional, sigma: &PositiveFunctional, alpha: f64) -> Result<DivergenceValue> {
    check_pair(rho, sigma)?;
    check_alpha(alpha, f64::MIN_POSITIVE, 2.0, true, "geometric Rényi")?;
    if alpha > 1.0 {
        if let Some(w) = support_violation(rho, sigma) {
            return Ok(DivergenceValue::infinite(w));
        }
    }
    let ss = sigma.spectrum()?;
    let half = ss.map_on_support(f64::sqrt);
    let inv_half = ss.map_on_support(|x| 1.0 / x.sqrt());
    let y = rho.conjugate_by(&inv_half);
    let ya = y.spectrum()?.map(|t| t.max(0.0).powf(alpha));
    let q = ya.conjugate_by(&half).weighted_trace().re;
    Ok(from_trace_functional(q, alpha, sigma))
}

/// log₂ of the largest eigenvalue of σ^{−1/2}ρσ^{−1/2} on supp σ.
pub fn d_max(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<DivergenceValue> {
    check_pair(rho, sigma)?;
    if let Some(w) = support_violation(rho, sigma) {
        return Ok(DivergenceValue::infinite(w));
    }
    let inv_half = sigma.spectrum()?.map_on_support(|x| 1.0 / x.sqrt());
    let top = rho.conjugate_by(&inv_half).max_eig()?;
    Ok(DivergenceValue::finite(if top > 0.0 { top.log2() } else { f64::NEG_INFINITY }))
}

/// Information spectrum value; `at_jump` marks a supremum sitting at a
/// discontinuity of λ ↦ τ(ρ{ρ ≤ λσ}).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfoSpectrum {
    pub value: f64,
    pub at_jump: bool,
}

/// τ(ρ P) with P the support projection of (λσ − ρ)_+.
fn spectrum_mass(rho: &PositiveFunctional, sigma: &PositiveFunctional, lambda: f64) -> Result<f64> {
    let x = sigma.lincomb(lambda, rho, -1.0);
    let spec = x.spectrum()?;
    let cut = 1e-12 * spec.max_abs();
    Ok(rho.pair(&spec.map(|v| if v > cut { 1.0 } else { 0.0 })))
}

/// sup{log₂ λ : τ(ρ{ρ ≤ λσ}) ≤ ε}, located by a grid scan in log λ followed
/// by bisection of the last crossing.
pub fn info_spectrum(rho: &PositiveFunctional, sigma: &PositiveFunctional, eps: f64) -> Result<InfoSpectrum> {
    check_pair(rho, sigma)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("epsilon {eps} outside (0,1)")));
    }
    let h = |t: f64| spectrum_mass(rho, sigma, t.exp2());
    let dm = d_max(rho, sigma)?.value;
    let top = if dm.is_finite() { dm + 1.0 } else { 64.0 };
    if h(top)? <= eps {
        return Ok(InfoSpectrum { value: f64::INFINITY, at_jump: false });
    }
    let bottom = top - 80.0;
    let step = 0.25;
    let mut last_ok: Option<f64> = None;
    let mut t = bottom;
    while t < top {
        if h(t)? <= eps {
            last_ok = Some(t);
        }
        t += step;
    }
    let Some(lo0) = last_ok else {
        return Ok(InfoSpectrum { value: f64::NEG_INFINITY, at_jump: false });
    };
    let (mut lo, mut hi) = (lo0, (lo0 + step).min(top));
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if h(mid)? <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let jump = h(hi)? - h(lo)? > 1e-6;
    Ok(InfoSpectrum { value: 0.5 * (lo + hi), at_jump: jump })
}

/// Generalized fidelity τ|√ρ√σ| + √((1−τρ)(1−τσ)).
pub fn fidelity(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<f64> {
    check_pair(rho, sigma)?;
    let a = rho.spectrum()?.map(|x| x.max(0.0).sqrt());
    let b = sigma.spectrum()?.map(|x| x.max(0.0).sqrt());
    let overlap = a.mul(&b).trace_norm();
    let extra = ((1.0 - rho.normalization()).max(0.0) * (1.0 - sigma.normalization()).max(0.0)).sqrt();
    Ok((overlap + extra).clamp(0.0, 1.0))
}

pub fn purified_distance(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<f64> {
    let f = fidelity(rho, sigma)?;
    Ok((1.0 - f * f).max(0.0).sqrt())
}

/// Selects one of the unsmoothed divergences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Divergence {
    Relative,
    Sandwiched(f64),
    Petz(f64),
    Geometric(f64),
    Max,
}

impl Divergence {
    pub fn eval(&self, rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<DivergenceValue> {
        match *self {
            Divergence::Relative => relative_entropy(rho, sigma),
            Divergence::Sandwiched(a) => sandwiched_renyi(rho, sigma, a),
            Divergence::Petz(a) => petz_renyi(rho, sigma, a),
            Divergence::Geometric(a) => geometric_renyi(rho, sigma, a),
            Divergence::Max => d_max(rho, sigma),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Divergence::Relative => "D".into(),
            Divergence::Sandwiched(a) => format!("sandwiched[{a}]"),
            Divergence::Petz(a) => format!("petz[{a}]"),
            Divergence::Geometric(a) => format!("geometric[{a}]"),
            Divergence::Max => "D_max".into(),
        }
    }
}

/// Diagonal of a commuting operator in the global basis, weighted so that the
/// classical values reproduce τ-based ones: p_i = w_b · ρ_b[i,i].
pub fn measurement_distribution(rho: &BlockOperator, basis: &[linalg::CMat]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rho.algebra().total_dim());
    for ((m, u), b) in rho.blocks().iter().zip(basis).zip(rho.algebra().blocks()) {
        let y = u.adjoint() * m * u;
        for i in 0..b.dim {
            out.push((y[(i, i)].re * b.weight).max(0.0));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasuredBounds {
    /// Best achievable measured value found (pinched value or search).
    pub lower: f64,
    /// Sandwiched divergence, which dominates every measured value.
    pub upper: f64,
    pub pinched: f64,
    pub searched: Option<f64>,
}

/// Bracket for the measured Rényi divergence at α > 1. The lower end is the
/// value of the joint-eigenbasis measurement after pinching; with `restarts`
/// a multistart local search over projective measurements may raise it.
pub fn measured_renyi_bounds(
    rho: &PositiveFunctional,
    sigma: &PositiveFunctional,
    alpha: f64,
    restarts: usize,
    seed: u64,
) -> Result<MeasuredBounds> {
    check_pair(rho, sigma)?;
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha = {alpha} outside (1, ∞)")));
    }
    if support_violation(rho, sigma).is_some() {
        let inf = f64::INFINITY;
        return Ok(MeasuredBounds { lower: inf, upper: inf, pinched: inf, searched: None });
    }
    let pinched_rho = PositiveFunctional::from_nearly_positive(&pinch(sigma, rho)?)?;
    let pinched = sandwiched_renyi(&pinched_rho, sigma, alpha)?.value;
    let upper = sandwiched_renyi(rho, sigma, alpha)?.value;
    let searched = if restarts > 0 { Some(measured_search(rho, sigma, alpha, restarts, seed)) } else { None };
    let lower = searched.map_or(pinched, |s| s.max(pinched)).min(upper);
    Ok(MeasuredBounds { lower, upper, pinched, searched })
}

fn basis_value(rho: &BlockOperator, sigma: &BlockOperator, basis: &[linalg::CMat], alpha: f64) -> f64 {
    let p = measurement_distribution(rho, basis);
    let q = measurement_distribution(sigma, basis);
    oracle::renyi(&p, &q, alpha)
}

fn rotate(basis: &[linalg::CMat], gens: &[f64], dims: &[usize]) -> Vec<linalg::CMat> {
    let mut k = 0;
    basis
        .iter()
        .zip(dims)
        .map(|(u, &d)| {
            let mut h = linalg::zeros(d, d);
            for i in 0..d {
                h[(i, i)] = linalg::c64::new(gens[k], 0.0);
                k += 1;
                for j in i + 1..d {
                    let z = linalg::c64::new(gens[k], gens[k + 1]);
                    k += 2;
                    h[(i, j)] = z;
                    h[(j, i)] = z.conj();
                }
            }
            let e = linalg::eigh(h.as_ref());
            let mut phase = linalg::zeros(d, d);
            for (j, &l) in e.values.iter().enumerate() {
                phase[(j, j)] = linalg::c64::new(l.cos(), l.sin());
            }
            u * (&e.vectors * phase * e.vectors.adjoint())
        })
        .collect()
}

/// Multistart coordinate-free ascent over orthonormal bases per block.
fn measured_search(rho: &PositiveFunctional, sigma: &PositiveFunctional, alpha: f64, restarts: usize, seed: u64) -> f64 {
    use rayon::prelude::*;
    let dims: Vec<usize> = rho.algebra().blocks().iter().map(|b| b.dim).collect();
    let nparams: usize = dims.iter().map(|d| d * d).sum();
    let results: Vec<f64> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = random::substream(seed, r as u64);
            let mut basis: Vec<linalg::CMat> = dims.iter().map(|&d| random::unitary(d, &mut rng)).collect();
            let mut val = basis_value(rho, sigma, &basis, alpha);
            let mut step = 0.3;
            for _ in 0..200 {
                let h = 1e-6;
                let grad: Vec<f64> = (0..nparams)
                    .map(|i| {
                        let mut g = vec![0.0; nparams];
                        g[i] = h;
                        let up = basis_value(rho, sigma, &rotate(&basis, &g, &dims), alpha);
                        g[i] = -h;
                        let dn = basis_value(rho, sigma, &rotate(&basis, &g, &dims), alpha);
                        (up - dn) / (2.0 * h)
                    })
                    .collect();
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if !(norm > 1e-10) {
                    break;
                }
                let mut improved = false;
                while step > 1e-8 {
                    let g: Vec<f64> = grad.iter().map(|x| x * step / norm).collect();
                    let cand = rotate(&basis, &g, &dims);
                    let v = basis_value(rho, sigma, &cand, alpha);
                    if v > val {
                        basis = cand;
                        val = v;
                        improved = true;
                        step *= 1.5;
                        break;
                    }
                    step *= 0.5;
                }
                if !improved {
                    break;
                }
            }
            val
        })
        .collect();
    results.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Classical-to-quantum preparation reproducing (ρ, σ) from distributions
/// whose classical Rényi divergence is the geometric one.
#[derive(Clone, Debug)]
pub struct Preparation {
    pub channel: Channel,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub states: Vec<PositiveFunctional>,
}

/// With σ^{−1/2}ρσ^{−1/2} = Σ μ_i F_i on supp σ, sends point i to
/// σ^{1/2}F_iσ^{1/2}/τ(σF_i), p_i = μ_i τ(σF_i), q_i = τ(σF_i).
pub fn matsumoto_preparation(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Result<Preparation> {
    check_pair(rho, sigma)?;
    if support_violation(rho, sigma).is_some() {
        return Err(Error::Precondition("ρ is not supported inside the support of σ".into()));
    }
    let ss = sigma.spectrum()?;
    let half = ss.map_on_support(f64::sqrt);
    let inv_half = ss.map_on_support(|x| 1.0 / x.sqrt());
    let s_supp = ss.map_on_support(|_| 1.0);
    let y = rho.conjugate_by(&inv_half);
    let mut p = Vec::new();
    let mut q = Vec::new();
    let mut states = Vec::new();
    for (mu, f) in y.eig_h()? {
        // restrict each spectral projection to supp σ; the kernel part carries no σ-mass
        let fs = f.op.mul(&s_supp).hermitized();
        let qi = sigma.pair(&fs);
        if qi <= 1e-14 {
            continue;
        }
        let omega = fs.conjugate_by(&half).scale(1.0 / qi);
        states.push(PositiveFunctional::from_nearly_positive(&omega)?);
        p.push(mu.max(0.0) * qi);
        q.push(qi);
    }
    let channel = Channel::preparation(&states)?.with_name("matsumoto");
    Ok(Preparation { channel, p, q, states })
}

/// Diagonal state on the commutative algebra with the given weights.
pub fn classical_state(p: &[f64]) -> Result<PositiveFunctional> {
    PositiveFunctional::new(BlockOperator::from_diag(&BlockAlgebra::classical(p.len()), p)?)
}

/// k = |spec σ| used by the pinching inequality.
pub fn pinching_constant(sigma: &PositiveFunctional) -> usize {
    distinct_spectrum_count(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;
    use linalg::c64;

    fn diag(d: &[f64]) -> PositiveFunctional {
        PositiveFunctional::new(BlockOperator::from_diag(&BlockAlgebra::full(d.len()), d).unwrap()).unwrap()
    }

    fn pure(v: [c64; 2]) -> PositiveFunctional {
        let m = Mat::from_fn(2, 2, |i, j| v[i] * v[j].conj());
        PositiveFunctional::new(BlockOperator::new(&BlockAlgebra::full(2), vec![m]).unwrap()).unwrap()
    }

    fn plus() -> PositiveFunctional {
        let h = c64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        pure([h, h])
    }

    #[test]
    fn relative_entropy_examples() {
        let p = [0.5, 0.5];
        let q = [0.25, 0.75];
        assert!(relative_entropy(&diag(&p), &diag(&p)).unwrap().value.abs() < 1e-15);
        let v = relative_entropy(&diag(&p), &diag(&q)).unwrap().value;
        assert!((v - oracle::relative_entropy(&p, &q)).abs() < 1e-14);
        let inf = relative_entropy(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0])).unwrap();
        assert!(!inf.is_finite());
        assert!(inf.witness.unwrap().distance(&diag(&[1.0, 0.0])) < 1e-15);
    }

    #[test]
    fn moments_examples() {
        let (p, q) = ([0.5, 0.5], [0.25, 0.75]);
        let m = moments(&diag(&p), &diag(&q)).unwrap();
        assert!((m.v_raw - oracle::log_ratio_moment(&p, &q, 2)).abs() < 1e-14);
        assert!((m.t_raw - oracle::log_ratio_moment(&p, &q, 3)).abs() < 1e-14);
        assert!((m.v_raw - m.v_centered - m.relative_entropy.powi(2)).abs() < 1e-14);
        let z = moments(&diag(&p), &diag(&p)).unwrap();
        assert!(z.v_raw.abs() < 1e-15 && z.t_centered.abs() < 1e-15);
    }

    #[test]
    fn renyi_examples() {
        let (p, q) = ([0.5, 0.5], [0.25, 0.75]);
        let s2 = sandwiched_renyi(&diag(&p), &diag(&q), 2.0).unwrap().value;
        assert!((s2 - (4.0f64 / 3.0).log2()).abs() < 1e-14);
        for a in [0.5, 0.8, 1.5, 2.0] {
            let c = oracle::renyi(&p, &q, a);
            assert!((petz_renyi(&diag(&p), &diag(&q), a).unwrap().value - c).abs() < 1e-12);
            assert!((geometric_renyi(&diag(&p), &diag(&q), a).unwrap().value - c).abs() < 1e-12);
            assert!((sandwiched_renyi(&diag(&p), &diag(&q), a).unwrap().value - c).abs() < 1e-12);
        }
        assert!(sandwiched_renyi(&diag(&p), &diag(&q), 1.0).is_err());
        assert!(sandwiched_renyi(&diag(&p), &diag(&q), 0.3).is_err());
    }

    #[test]
    fn large_alpha_approaches_dmax() {
        let mut rng = random::rng(4);
        let alg = BlockAlgebra::full(3);
        let rho = random::state(&alg, None, &mut rng);
        let sigma = random::state(&alg, None, &mut rng);
        let dm = d_max(&rho, &sigma).unwrap().value;
        let big = sandwiched_renyi(&rho, &sigma, 1e3).unwrap().value;
        assert!(dm - big < 5e-3 && big <= dm + 1e-9, "{dm} {big}");
        assert_eq!(sandwiched_renyi(&rho, &sigma, f64::INFINITY).unwrap().value, dm);
    }

    #[test]
    fn dmax_examples() {
        assert!((d_max(&diag(&[0.5, 0.5]), &diag(&[0.25, 0.75])).unwrap().value - 1.0).abs() < 1e-14);
        assert!((d_max(&plus(), &diag(&[0.5, 0.5])).unwrap().value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn petz_half_direct() {
        let mut rng = random::rng(8);
        let alg = BlockAlgebra::full(2);
        let rho = random::state(&alg, None, &mut rng);
        let sigma = random::state(&alg, None, &mut rng);
        let a = rho.func_calc(f64::sqrt, false).unwrap();
        let b = sigma.func_calc(f64::sqrt, false).unwrap();
        let direct = -2.0 * a.pair(&b).log2();
        assert!((petz_renyi(&rho, &sigma, 0.5).unwrap().value - direct).abs() < 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let zero = pure([c64::new(1.0, 0.0), c64::new(0.0, 0.0)]);
        assert!((fidelity(&zero, &plus()).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((fidelity(&plus(), &plus()).unwrap() - 1.0).abs() < 1e-12);
        assert!(purified_distance(&plus(), &plus()).unwrap() < 1e-6);
        let half = PositiveFunctional::new(zero.scale(0.5)).unwrap();
        assert!((fidelity(&half, &half).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn info_spectrum_examples() {
        let r = diag(&[0.3, 0.7]);
        let v = info_spectrum(&r, &r, 0.5).unwrap();
        assert!(v.value.abs() < 1e-9 && v.at_jump);
        let (p, q) = ([0.5, 0.2, 0.3], [0.25, 0.35, 0.4]);
        for e in [0.1, 0.4, 0.9] {
            let quantum = info_spectrum(&diag(&p), &diag(&q), e).unwrap().value;
            assert!((quantum - oracle::classical_info_spectrum(&p, &q, e)).abs() < 1e-8);
        }
        let near_one = info_spectrum(&diag(&p), &diag(&q), 0.999).unwrap().value;
        assert!((near_one - oracle::d_max(&p, &q)).abs() < 1e-8);
    }

    #[test]
    fn measured_bracket() {
        let sigma = diag(&[0.25, 0.75]);
        let b = measured_renyi_bounds(&plus(), &sigma, 2.0, 0, 0).unwrap();
        assert!((b.lower - oracle::renyi(&[0.5, 0.5], &[0.25, 0.75], 2.0)).abs() < 1e-12);
        assert!(b.lower <= b.upper && b.upper - b.lower <= 2.0 * 1.0 + 1e-12);
        let c = measured_renyi_bounds(&diag(&[0.5, 0.5]), &sigma, 2.0, 0, 0).unwrap();
        assert!((c.lower - c.upper).abs() < 1e-12);
        let s = measured_renyi_bounds(&plus(), &sigma, 2.0, 4, 1).unwrap();
        assert!(s.lower >= b.lower - 1e-12 && s.lower <= s.upper + 1e-12);
    }

    #[test]
    fn matsumoto_examples() {
        let r = diag(&[0.3, 0.7]);
        let same = matsumoto_preparation(&r, &r).unwrap();
        assert_eq!(same.p.len(), 1);
        assert!((same.p[0] - 1.0).abs() < 1e-12 && (same.q[0] - 1.0).abs() < 1e-12);
        let mut rng = random::rng(12);
        let alg = BlockAlgebra::full(2);
        let rho = random::state(&alg, None, &mut rng);
        let sigma = random::state(&alg, None, &mut rng);
        let prep = matsumoto_preparation(&rho, &sigma).unwrap();
        let rp = prep.channel.apply(&classical_state(&prep.p).unwrap()).unwrap();
        let rq = prep.channel.apply(&classical_state(&prep.q).unwrap()).unwrap();
        assert!(rp.sub(&rho).trace_norm() < 1e-9 && rq.sub(&sigma).trace_norm() < 1e-9);
        for a in [0.5, 1.5, 2.0] {
            let g = geometric_renyi(&rho, &sigma, a).unwrap().value;
            assert!((oracle::renyi(&prep.p, &prep.q, a) - g).abs() < 1e-7);
        }
    }
}

//! One-shot optimization quantities: the hypothesis-testing divergence and
//! the smooth max divergence over a purified-distance ball, together with
//! explicit smoothing constructions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{support_violation, BlockOperator, PositiveFunctional};
use crate::divergences::{d_max, fidelity, DivergenceValue};
use crate::error::{Error, Result};
use crate::splitting::{self, ConvexSet, Ellipsoid, EigenvalueBox, Halfspace, Residuals, SolverConfig, SpectralBall, Status};

/// A test 0 ≤ Q ≤ 1 with its two error probabilities.
#[derive(Clone, Debug)]
pub struct TestOperator {
    pub q: BlockOperator,
    /// 1 − τ(ρQ)
    pub type1: f64,
    /// τ(σQ)
    pub type2: f64,
}

impl TestOperator {
    fn new(q: BlockOperator, rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Self {
        let type1 = rho.normalization() - rho.pair(&q);
        let type2 = sigma.pair(&q);
        TestOperator { q, type1, type2 }
    }
}

/// Witness for a smooth max divergence value: ρ′ ⪯ λσ inside the ball.
#[derive(Clone, Debug)]
pub struct SmoothingCertificate {
    pub smoothed: PositiveFunctional,
    pub lambda: f64,
    pub fidelity_achieved: f64,
    pub purified_distance_achieved: f64,
    pub solver_residuals: Residuals,
    /// Bisection steps the solver could not decide; they were counted as
    /// infeasible, which can only raise the reported value.
    pub undecided_steps: usize,
}

impl SmoothingCertificate {
    /// Re-checks ρ′ ⪰ 0, λσ − ρ′ ⪰ 0, trace and distance spectrally.
    pub fn verify(&self, rho: &PositiveFunctional, sigma: &PositiveFunctional, eps: f64) -> Result<()> {
        let gap = sigma.lincomb(self.lambda, &self.smoothed, -1.0).min_eig()?;
        let scale = self.lambda * sigma.max_eig()?.max(1e-300);
        if gap < -1e-8 * scale.max(1.0) {
            return Err(Error::Solver(format!("λσ − ρ′ has eigenvalue {gap:.3e}")));
        }
        if self.smoothed.min_eig()? < -1e-10 {
            return Err(Error::Solver("smoothed functional is not positive".into()));
        }
        if self.smoothed.normalization() > 1.0 + 1e-8 {
            return Err(Error::Solver(format!("smoothed trace {} exceeds 1", self.smoothed.normalization())));
        }
        let pd = crate::divergences::purified_distance(rho, &self.smoothed)?;
        if pd > eps + 1e-6 {
            return Err(Error::Solver(format!("purified distance {pd} exceeds {eps}")));
        }
        Ok(())
    }
}

/// Which functionals the smoothing ball ranges over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ball {
    /// τ(ρ′) ≤ 1 with the generalized fidelity.
    #[default]
    Substates,
    /// τ(ρ′) = 1.
    States,
}

fn check_eps_open(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon {eps} outside (0,1)")))
    }
}

/// Masses τ(ρP₊) and τ(ρP₀) for the spectral projections of μρ − σ.
struct NeymanPearson {
    plus: BlockOperator,
    zero: BlockOperator,
    mass_plus: f64,
    mass_zero: f64,
}

fn neyman_pearson(rho: &PositiveFunctional, sigma: &PositiveFunctional, mu: f64) -> Result<NeymanPearson> {
    let spec = rho.lincomb(mu, sigma, -1.0).spectrum()?;
    let tol = 1e-12 * (mu * rho.max_abs() + sigma.max_abs());
    let plus = spec.map(|v| if v > tol { 1.0 } else { 0.0 });
    let zero = spec.map(|v| if v.abs() <= tol { 1.0 } else { 0.0 });
    let mass_plus = rho.pair(&plus);
    let mass_zero = rho.pair(&zero);
    Ok(NeymanPearson { plus, zero, mass_plus, mass_zero })
}

/// Lagrange dual value μ(1−ε) − τ((μρ − σ)₊), a lower bound on β for every μ ≥ 0.
fn np_dual(rho: &PositiveFunctional, sigma: &PositiveFunctional, mu: f64, target: f64) -> Result<f64> {
    let pos = rho.lincomb(mu, sigma, -1.0).spectrum()?.weighted_sum(|v| v.max(0.0));
    Ok(mu * target - pos)
}

pub fn hypothesis_testing(rho: &PositiveFunctional, sigma: &PositiveFunctional, eps: f64) -> Result<(DivergenceValue, TestOperator)> {
    hypothesis_testing_with(rho, sigma, eps, &SolverConfig::default())
}

/// D_H^ε(ρ‖σ) = −log₂ min{τ(Qσ) : 0 ≤ Q ≤ 1, τ(Qρ) ≥ 1−ε} by a Neyman–Pearson
/// sweep over μ, falling back to the splitting solver when the sweep cannot
/// close its duality gap.
pub fn hypothesis_testing_with(
    rho: &PositiveFunctional,
    sigma: &PositiveFunctional,
    eps: f64,
    config: &SolverConfig,
) -> Result<(DivergenceValue, TestOperator)> {
    rho.check_same_algebra(sigma)?;
    check_eps_open(eps)?;
    let target = rho.normalization() - eps;
    if target <= 0.0 {
        let q = BlockOperator::zeros(rho.algebra());
        return Ok((DivergenceValue::finite(f64::INFINITY), TestOperator::new(q, rho, sigma)));
    }
    if let Some(outside) = support_violation(rho, sigma) {
        let w = rho.pair(&outside);
        if w >= target {
            let q = outside.scale(target / w);
            return Ok((DivergenceValue::infinite(outside), TestOperator::new(q, rho, sigma)));
        }
    }

    let classify = |mu: f64| -> Result<(NeymanPearson, i32)> {
        let np = neyman_pearson(rho, sigma, mu)?;
        let side = if np.mass_plus > target {
            1
        } else if np.mass_plus + np.mass_zero < target {
            -1
        } else {
            0
        };
        Ok((np, side))
    };

    let (mut lo, mut hi) = (-128.0f64, 128.0f64);
    let mut exact: Option<(f64, NeymanPearson)> = None;
    let mut lo_np: Option<NeymanPearson> = None;
    let mut hi_np: Option<NeymanPearson> = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (np, side) = classify(mid.exp2())?;
        match side {
            0 => {
                exact = Some((mid.exp2(), np));
                break;
            }
            1 => {
                hi = mid;
                hi_np = Some(np);
            }
            _ => {
                lo = mid;
                lo_np = Some(np);
            }
        }
        if hi - lo < 1e-13 {
            break;
        }
    }

    let (q, mus) = match exact {
        Some((mu, np)) => {
            let p = if np.mass_zero > 0.0 { ((target - np.mass_plus) / np.mass_zero).clamp(0.0, 1.0) } else { 0.0 };
            // zero-space directions invisible to σ cost nothing: include them fully
            let p = if sigma.pair(&np.zero) <= 1e-14 * sigma.normalization() { 1.0 } else { p };
            (np.plus.lincomb(1.0, &np.zero, p), vec![mu])
        }
        None => {
            let lo_np = match lo_np {
                Some(np) => np,
                None => neyman_pearson(rho, sigma, lo.exp2())?,
            };
            let hi_np = match hi_np {
                Some(np) => np,
                None => neyman_pearson(rho, sigma, hi.exp2())?,
            };
            let q_lo = lo_np.plus.add(&lo_np.zero);
            let a_lo = lo_np.mass_plus + lo_np.mass_zero;
            let a_hi = hi_np.mass_plus;
            let t = if a_hi > a_lo { ((a_hi - target) / (a_hi - a_lo)).clamp(0.0, 1.0) } else { 0.0 };
            (q_lo.lincomb(t, &hi_np.plus, 1.0 - t), vec![lo.exp2(), hi.exp2()])
        }
    };
    let test = TestOperator::new(q.hermitized(), rho, sigma);
    let mut dual = f64::NEG_INFINITY;
    for mu in mus {
        dual = dual.max(np_dual(rho, sigma, mu, target)?);
    }
    if test.type2 - dual <= config.np_gap && test.type1 <= eps + 1e-8 {
        return Ok((DivergenceValue::finite(-test.type2.log2()), test));
    }
    let (value, fallback, _) = hypothesis_testing_convex(rho, sigma, eps, config)?;
    if fallback.type2 < test.type2 {
        Ok((value, fallback))
    } else {
        Ok((DivergenceValue::finite(-test.type2.log2()), test))
    }
}

/// Best dual bound max_μ μ(1−ε) − τ((μρ−σ)₊) by golden-section search in log μ.
fn np_dual_search(rho: &PositiveFunctional, sigma: &PositiveFunctional, target: f64) -> Result<(f64, f64)> {
    let g = |s: f64| np_dual(rho, sigma, s.exp2(), target);
    let (mut a, mut b) = (-128.0f64, 128.0f64);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c)?, g(d)?);
    for _ in 0..120 {
        if gc < gd {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d)?;
        } else {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c)?;
        }
    }
    let s = 0.5 * (a + b);
    Ok((s.exp2(), g(s)?.max(gc).max(gd).max(0.0)))
}

/// D_H^ε through the splitting solver: maximize −τ(σQ) over the eigenvalue
/// box [0,1] intersected with the half-space τ(ρQ) ≥ 1−ε.
pub fn hypothesis_testing_convex(
    rho: &PositiveFunctional,
    sigma: &PositiveFunctional,
    eps: f64,
    config: &SolverConfig,
) -> Result<(DivergenceValue, TestOperator, Status)> {
    rho.check_same_algebra(sigma)?;
    check_eps_open(eps)?;
    let target = rho.normalization() - eps;
    let alg = rho.algebra();
    let boxed = EigenvalueBox { lower: 0.0, upper: 1.0 };
    let half = Halfspace { normal: rho.operator().clone(), offset: target };
    let objective = sigma.scale(-1.0);
    let one = BlockOperator::identity(alg);
    let (_, dual) = np_dual_search(rho, sigma, target)?;
    let mut best: Option<TestOperator> = None;
    let repair = |q: &BlockOperator| -> BlockOperator {
        let q = boxed.project(q);
        let have = rho.pair(&q);
        if have >= target {
            return q;
        }
        let room = rho.normalization() - have;
        let s = if room > 0.0 { ((target - have) / room).clamp(0.0, 1.0) } else { 1.0 };
        q.lincomb(1.0 - s, &one, s)
    };
    let start = one.scale(1.0 - eps);
    let out = splitting::solve_feasibility(&boxed, &half, Some(&objective), &start, config, |_, z| {
        let q = repair(z);
        let t = TestOperator::new(q, rho, sigma);
        let gap = t.type2 - dual;
        if best.as_ref().is_none_or(|b| t.type2 < b.type2) {
            best = Some(t);
        }
        if gap <= config.np_gap {
            Some(Status::Feasible)
        } else {
            None
        }
    });
    let test = best.unwrap_or_else(|| TestOperator::new(repair(&out.point), rho, sigma));
    let value = if test.type2 > 0.0 { -test.type2.log2() } else { f64::INFINITY };
    Ok((DivergenceValue::finite(value), test, out.status))
}

/// Certified answer to "is F_max(λ) ≥ f?", where F_max(λ) is the largest
/// fidelity with ρ over {0 ≤ ρ′ ≤ λσ, τ(ρ′) ≤ 1}.
#[derive(Clone, Debug)]
pub struct FidelityCheck {
    pub status: Status,
    /// A feasible ρ′ achieving `lower`, when one was found.
    pub smoothed: Option<BlockOperator>,
    pub lower: f64,
    pub upper: f64,
    pub residuals: Residuals,
    state: Option<BlockOperator>,
}

struct FidelityProblem {
    sqrt_rho: BlockOperator,
    root: BlockOperator,
    coupling: BlockOperator,
    ellipsoid: Ellipsoid,
}

impl FidelityProblem {
    fn new(rho: &PositiveFunctional, sigma: &PositiveFunctional, lambda: f64) -> Result<Self> {
        let sqrt_rho = rho.spectrum()?.map(|v| v.max(0.0).sqrt());
        let scaled = sigma.scale(lambda);
        let root = scaled.spectrum()?.map(|v| v.max(0.0).sqrt());
        let coupling = sqrt_rho.mul(&root);
        let ellipsoid = Ellipsoid::new(&scaled);
        Ok(FidelityProblem { sqrt_rho, root, coupling, ellipsoid })
    }

    /// Moves a candidate into the feasible set: contraction, then τ(ρ′) ≤ 1.
    fn feasible(&self, k: &BlockOperator) -> BlockOperator {
        let k = SpectralBall.project(k);
        let level = self.ellipsoid.level(&k);
        if level > 1.0 {
            k.scale(1.0 / level.sqrt())
        } else {
            k
        }
    }

    /// Re τ(√ρ A K), a lower bound on F(ρ, A K K* A).
    fn objective(&self, k: &BlockOperator) -> f64 {
        self.coupling.adjoint().inner(k)
    }

    /// Upper bound ‖(√ρ − μK*A)A‖₁ + μ‖AK‖₂ on F_max, minimized over μ ≥ 0.
    fn dual_bound(&self, k: &BlockOperator, mu_hint: f64) -> (f64, f64) {
        let ka = k.adjoint().mul(&self.root);
        let ak_norm = ka.hs_norm();
        let bound = |mu: f64| self.sqrt_rho.lincomb(1.0, &ka, -mu).mul(&self.root).trace_norm() + mu * ak_norm;
        let mut hi = (4.0 * mu_hint).max(1.0);
        let mut prev = bound(hi);
        for _ in 0..60 {
            let next = bound(2.0 * hi);
            if next >= prev {
                break;
            }
            hi *= 2.0;
            prev = next;
        }
        hi *= 2.0;
        let (mut a, mut b) = (0.0, hi);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (bound(c), bound(d));
        for _ in 0..48 {
            if fc > fd {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = bound(d);
            } else {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = bound(c);
            }
        }
        let best = fc.min(fd).min(bound(0.0));
        (best, 0.5 * (a + b))
    }

    fn smoothed(&self, k: &BlockOperator) -> BlockOperator {
        let g = self.root.mul(k);
        g.mul(&g.adjoint()).hermitized()
    }
}

/// Decides F_max(λ) ≥ f with a primal witness or a dual bound.
pub fn fidelity_feasibility(
    rho: &PositiveFunctional,
    sigma: &PositiveFunctional,
    lambda: f64,
    f: f64,
    config: &SolverConfig,
) -> Result<FidelityCheck> {
    fidelity_feasibility_from(rho, sigma, lambda, f, config, None)
}

fn fidelity_feasibility_from(
    rho: &PositiveFunctional,
    sigma: &PositiveFunctional,
    lambda: f64,
    f: f64,
    config: &SolverConfig,
    warm: Option<&BlockOperator>,
) -> Result<FidelityCheck> {
    rho.check_same_algebra(sigma)?;
    let alg = rho.algebra();
    let one = BlockOperator::identity(alg);
    // with room to spare in the trace, ρ′ = λσ is the largest candidate
    if lambda * sigma.normalization() <= 1.0 {
        let cand = sigma.scale(lambda);
        let fid = fidelity(rho, &PositiveFunctional::from_nearly_positive(&cand)?)?;
        let status = if fid >= f { Status::Feasible } else { Status::Infeasible };
        return Ok(FidelityCheck {
            status,
            smoothed: Some(cand),
            lower: fid,
            upper: fid,
            residuals: Residuals::default(),
            state: None,
        });
    }
    if sigma.lincomb(lambda, rho, -1.0).min_eig()? >= 0.0 {
        return Ok(FidelityCheck {
            status: if f <= 1.0 { Status::Feasible } else { Status::Infeasible },
            smoothed: Some(rho.operator().clone()),
            lower: 1.0,
            upper: 1.0,
            residuals: Residuals::default(),
            state: warm.cloned(),
        });
    }
    let problem = FidelityProblem::new(rho, sigma, lambda)?;
    let objective = problem.coupling.adjoint();
    let start = match warm {
        Some(w) => w.clone(),
        None => one.scale(1.0 / (lambda * sigma.normalization()).sqrt()),
    };
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut witness: Option<BlockOperator> = None;
    let mut mu = 1.0;
    let out = splitting::solve_feasibility(&SpectralBall, &problem.ellipsoid, Some(&objective), &start, config, |_, z| {
        let k = problem.feasible(z);
        let val = problem.objective(&k);
        if val > lower {
            lower = val;
            witness = Some(k.clone());
        }
        if lower >= f {
            return Some(Status::Feasible);
        }
        let (ub, m) = problem.dual_bound(&k, mu);
        mu = m;
        upper = upper.min(ub);
        if upper < f {
            return Some(Status::Infeasible);
        }
        if upper - lower <= 1e-12 {
            return Some(if lower >= f { Status::Feasible } else { Status::Infeasible });
        }
        None
    });
    Ok(FidelityCheck {
        status: out.status,
        smoothed: witness.as_ref().map(|k| problem.smoothed(k)),
        lower,
        upper,
        residuals: out.residuals,
        state: Some(out.state),
    })
}

pub fn smooth_dmax(rho: &PositiveFunctional, sigma: &PositiveFunctional, eps: f64) -> Result<(DivergenceValue, SmoothingCertificate)> {
    smooth_dmax_with(rho, sigma, eps, Ball::Substates, &SolverConfig::default())
}

/// D_max^ε(ρ‖σ) = inf over the ε purified-distance ball of D_max(ρ′‖σ), by
/// bisection in log₂λ on certified fidelity feasibility.
pub fn smooth_dmax_with(
    rho: &PositiveFunctional,
    sigma: &PositiveFunctional,
    eps: f64,
    ball: Ball,
    config: &SolverConfig,
) -> Result<(DivergenceValue, SmoothingCertificate)> {
    rho.check_same_algebra(sigma)?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!("epsilon {eps} outside [0,1)")));
    }
    if !rho.is_state() {
        return Err(Error::Precondition("smooth D_max expects ρ to be a state".into()));
    }
    if !(sigma.normalization() > 0.0) {
        return Err(Error::Domain("σ must be nonzero".into()));
    }
    let dm = d_max(rho, sigma)?;
    let certify = |smoothed: BlockOperator, lambda: f64, residuals: Residuals, undecided: usize| -> Result<SmoothingCertificate> {
        let smoothed = PositiveFunctional::from_nearly_positive(&smoothed)?;
        let fid = fidelity(rho, &smoothed)?;
        Ok(SmoothingCertificate {
            smoothed,
            lambda,
            fidelity_achieved: fid,
            purified_distance_achieved: (1.0 - fid * fid).max(0.0).sqrt(),
            solver_residuals: residuals,
            undecided_steps: undecided,
        })
    };
    if eps == 0.0 {
        if !dm.is_finite() {
            return Err(Error::Precondition("ρ is not dominated by σ and the ball is a point".into()));
        }
        let cert = certify(rho.operator().clone(), dm.value.exp2(), Residuals::default(), 0)?;
        return Ok((dm, cert));
    }
    let f = (1.0 - eps * eps).sqrt();
    let mass = sigma.normalization();
    let base = fidelity(rho, &PositiveFunctional::from_nearly_positive(&sigma.scale(1.0 / mass))?)?;

    // below λ = 1/τ(σ) the optimum is ρ′ = λσ and F grows like √λ
    let closed = f * f / (base * base * mass);
    if base > 0.0 && closed * mass <= 1.0 + 1e-15 {
        let lambda = closed;
        return match ball {
            Ball::Substates => {
                let cert = certify(sigma.scale(lambda), lambda, Residuals::default(), 0)?;
                Ok((DivergenceValue::finite(lambda.log2()), cert))
            }
            Ball::States => {
                let lambda = 1.0 / mass;
                let cert = certify(sigma.scale(lambda), lambda, Residuals::default(), 0)?;
                Ok((DivergenceValue::finite(lambda.log2()), cert))
            }
        };
    }

    let mut lo = -mass.log2();
    let (mut hi, mut best) = if dm.is_finite() {
        (dm.value, (rho.operator().clone(), Residuals::default()))
    } else {
        let mut t = lo + 1.0;
        let mut found = None;
        while t < lo + 256.0 {
            let chk = fidelity_feasibility(rho, sigma, t.exp2(), f, config)?;
            if chk.status == Status::Feasible {
                found = Some((t, chk.smoothed.expect("feasible checks carry a witness"), chk.residuals));
                break;
            }
            lo = t;
            t = lo + 2.0 * (t - lo + 1.0);
        }
        match found {
            Some((t, s, r)) => (t, (s, r)),
            None => return Ok((DivergenceValue::infinite(sigma.support().complement()), certify(rho.operator().clone(), f64::INFINITY, Residuals::default(), 0)?)),
        }
    };
    if hi <= lo {
        hi = lo;
    }
    let mut undecided = 0;
    let mut warm: Option<BlockOperator> = None;
    while hi - lo > config.bisection_tolerance {
        let mid = 0.5 * (lo + hi);
        let chk = fidelity_feasibility_from(rho, sigma, mid.exp2(), f, config, warm.as_ref())?;
        warm = chk.state.clone();
        match chk.status {
            Status::Feasible => {
                hi = mid;
                best = (chk.smoothed.expect("feasible checks carry a witness"), chk.residuals);
            }
            Status::Infeasible => lo = mid,
            Status::Undecided => {
                undecided += 1;
                lo = mid;
            }
        }
    }
    let (mut smoothed, residuals) = best;
    let lambda = hi.exp2();
    if ball == Ball::States {
        let short = 1.0 - smoothed.weighted_trace().re;
        let room = lambda * mass - smoothed.weighted_trace().re;
        if short > 0.0 && room > 0.0 {
            smoothed = smoothed.lincomb(1.0, &sigma.lincomb(lambda, &smoothed, -1.0), (short / room).min(1.0));
        }
    }
    let cert = certify(smoothed, lambda, residuals, undecided)?;
    Ok((DivergenceValue::finite(hi), cert))
}

/// Evaluates many smooth D_max instances in parallel.
pub fn smooth_dmax_batch(
    jobs: &[(PositiveFunctional, PositiveFunctional, f64)],
    config: &SolverConfig,
) -> Vec<Result<(DivergenceValue, SmoothingCertificate)>> {
    jobs.par_iter().map(|(r, s, e)| smooth_dmax_with(r, s, *e, Ball::Substates, config)).collect()
}

/// Contraction c with c(σ+ψ)c = σ and 0 ≤ c ≤ 1.
fn contraction(sigma: &BlockOperator, psi: &BlockOperator) -> Result<BlockOperator> {
    let total = sigma.add(psi);
    let spec = total.spectrum()?;
    let half = spec.map_on_support(f64::sqrt);
    let inv_half = spec.map_on_support(|x| 1.0 / x.sqrt());
    let middle = sigma.conjugate_by(&half).spectrum()?.map(|v| v.max(0.0).sqrt());
    let c = middle.conjugate_by(&inv_half);
    let residual = c.mul(&total).mul(&c).sub(sigma).max_abs();
    if residual > 1e-8 * sigma.max_abs().max(1.0) {
        return Err(Error::Solver(format!("conjugation residual {residual:.3e}")));
    }
    Ok(c)
}

/// From ρ ⪯ σ + ψ with ψ(1) < 1, the state ρ̃(x) = ρ(cxc)/ρ(c²) satisfies
/// ρ̃ ⪯ (1−ψ(1))⁻¹σ and F(ρ, ρ̃) ≥ 1 − ψ(1). Returns ρ̃ and 1 − ψ(1).
pub fn dominated_smoothing(
    rho: &PositiveFunctional,
    sigma: &PositiveFunctional,
    psi: &PositiveFunctional,
) -> Result<(PositiveFunctional, f64)> {
    rho.check_same_algebra(sigma)?;
    rho.check_same_algebra(psi)?;
    let leak = psi.normalization();
    if leak >= 1.0 {
        return Err(Error::Domain(format!("ψ(1) = {leak} must be below 1")));
    }
    let slack = sigma.add(psi).sub(rho).min_eig()?;
    if slack < -1e-9 {
        return Err(Error::Precondition(format!("ρ ⪯ σ + ψ fails by {slack:.3e}")));
    }
    let c = contraction(sigma, psi)?;
    let cc = c.mul(&c).hermitized();
    let norm = rho.pair(&cc);
    let tilde = PositiveFunctional::from_nearly_positive(&rho.conjugate_by(&c).scale(1.0 / norm))?;
    let lb = 1.0 - leak;
    let room = sigma.scale(1.0 / lb).sub(&tilde).min_eig()?;
    if room < -1e-8 {
        return Err(Error::Solver(format!("ρ̃ ⪯ σ/(1−ψ(1)) fails by {room:.3e}")));
    }
    if fidelity(rho, &tilde)? < lb - 1e-9 {
        return Err(Error::Solver("fidelity guarantee fails".into()));
    }
    Ok((tilde, lb))
}

/// Smoothing by cutting off φ_λ = (ρ − λσ)₊.
#[derive(Clone, Debug)]
pub struct Cutoff {
    pub epsilon: f64,
    pub bound: f64,
    /// ρ′(x) = ρ(cxc) with ρ′ ⪯ λσ.
    pub witness: PositiveFunctional,
}

pub fn smooth_by_cutoff(rho: &PositiveFunctional, sigma: &PositiveFunctional, lambda: f64) -> Result<Cutoff> {
    rho.check_same_algebra(sigma)?;
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("λ = {lambda} must be positive")));
    }
    let scaled = sigma.scale(lambda);
    let phi = rho.sub(&scaled).positive_part()?;
    let mass = phi.weighted_trace().re.max(0.0);
    let epsilon = (mass * (2.0 - mass)).max(0.0).sqrt();
    let witness = if mass <= 1e-15 {
        rho.clone()
    } else {
        let c = contraction(&scaled, &phi)?;
        PositiveFunctional::from_nearly_positive(&rho.conjugate_by(&c))?
    };
    Ok(Cutoff { epsilon, bound: lambda.log2(), witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::BlockAlgebra;
    use crate::{oracle, random};

    fn diag(d: &[f64]) -> PositiveFunctional {
        PositiveFunctional::new(BlockOperator::from_diag(&BlockAlgebra::full(d.len()), d).unwrap()).unwrap()
    }

    #[test]
    fn dh_examples() {
        let r = diag(&[0.3, 0.7]);
        for e in [0.1, 0.5, 0.9] {
            let (v, t) = hypothesis_testing(&r, &r, e).unwrap();
            assert!((v.value + (1.0 - e).log2()).abs() < 1e-8, "{} {}", v.value, e);
            assert!(t.type1 <= e + 1e-8);
        }
        let (v, _) = hypothesis_testing(&r, &r, 1e-9).unwrap();
        assert!(v.value.abs() < 1e-7);
        let (p, q) = ([0.5, 0.5], [0.25, 0.75]);
        for e in [0.05, 0.3, 0.6] {
            let (v, _) = hypothesis_testing(&diag(&p), &diag(&q), e).unwrap();
            let beta = oracle::classical_beta(&p, &q, e).unwrap();
            assert!((v.value.exp2().recip() - beta).abs() < 1e-8);
        }
    }

    #[test]
    fn dh_sweep_matches_convex_solver() {
        let mut rng = random::rng(21);
        for d in [2, 3] {
            let alg = BlockAlgebra::full(d);
            let rho = random::state(&alg, None, &mut rng);
            let sigma = random::state(&alg, None, &mut rng);
            let (a, t) = hypothesis_testing(&rho, &sigma, 0.2).unwrap();
            let (b, _, _) = hypothesis_testing_convex(&rho, &sigma, 0.2, &SolverConfig::default()).unwrap();
            assert!((a.value - b.value).abs() < 1e-6, "{} {}", a.value, b.value);
            assert!(t.q.min_eig().unwrap() >= -1e-9 && t.q.max_eig().unwrap() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn smooth_dmax_examples() {
        let mut rng = random::rng(3);
        let alg = BlockAlgebra::full(2);
        let rho = random::state(&alg, None, &mut rng);
        let sigma = random::state(&alg, None, &mut rng);
        let (v0, c0) = smooth_dmax(&rho, &sigma, 0.0).unwrap();
        assert_eq!(v0.value, d_max(&rho, &sigma).unwrap().value);
        assert!(c0.smoothed.distance(&rho) < 1e-15);
        let mut prev = f64::INFINITY;
        for e in [0.05, 0.2, 0.5] {
            let (v, c) = smooth_dmax(&rho, &sigma, e).unwrap();
            c.verify(&rho, &sigma, e).unwrap();
            assert!(v.value <= prev + 1e-8);
            prev = v.value;
        }
    }

    #[test]
    fn smooth_dmax_classical_grid() {
        let rho = diag(&[1.0, 0.0]);
        let sigma = diag(&[0.5, 0.5]);
        for e in [0.1, 0.3, 0.6] {
            let (v, c) = smooth_dmax(&rho, &sigma, e).unwrap();
            c.verify(&rho, &sigma, e).unwrap();
            let g = oracle::classical_smooth_dmax_grid([1.0, 0.0], [0.5, 0.5], e, 2001);
            assert!((v.value - g).abs() < 1e-4, "{} {}", v.value, g);
        }
    }

    #[test]
    fn fidelity_feasibility_examples() {
        let mut rng = random::rng(9);
        let alg = BlockAlgebra::full(2);
        let pure = random::state(&alg, Some(1), &mut rng);
        let chk = fidelity_feasibility(&pure, &pure, 0.5, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(chk.status, Status::Infeasible);
        let sigma = random::state(&alg, None, &mut rng);
        let rho = PositiveFunctional::new(sigma.scale(1.0)).unwrap();
        let chk = fidelity_feasibility(&rho, &sigma, 2.0, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(chk.status, Status::Feasible);
    }

    #[test]
    fn states_ball_not_below_substates() {
        let mut rng = random::rng(14);
        let alg = BlockAlgebra::full(2);
        let rho = random::state(&alg, None, &mut rng);
        let sigma = random::state(&alg, None, &mut rng);
        for e in [0.1, 0.4, 0.8] {
            let (a, _) = smooth_dmax_with(&rho, &sigma, e, Ball::Substates, &SolverConfig::default()).unwrap();
            let (b, cb) = smooth_dmax_with(&rho, &sigma, e, Ball::States, &SolverConfig::default()).unwrap();
            assert!(b.value >= a.value - 1e-9);
            assert!((cb.smoothed.normalization() - 1.0).abs() < 1e-8);
            if a.value >= 0.0 {
                assert!((a.value - b.value).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn dominated_smoothing_examples() {
        let rho = diag(&[0.5, 0.5]);
        let (t, lb) = dominated_smoothing(&rho, &diag(&[0.4, 0.4]), &diag(&[0.1, 0.1])).unwrap();
        assert!((lb - 0.8).abs() < 1e-12);
        assert!(diag(&[0.5, 0.5]).sub(&t).max_abs() < 1e-12);
        let zero = PositiveFunctional::new(BlockOperator::zeros(&BlockAlgebra::full(2))).unwrap();
        let (t, lb) = dominated_smoothing(&rho, &rho, &zero).unwrap();
        assert!(lb == 1.0 && t.distance(&rho) < 1e-12);
        assert!(dominated_smoothing(&rho, &rho, &diag(&[0.6, 0.6])).is_err());
    }

    #[test]
    fn cutoff_examples() {
        let c = smooth_by_cutoff(&diag(&[0.5, 0.5]), &diag(&[0.25, 0.75]), 1.0).unwrap();
        assert!((c.epsilon - (0.25f64 * 1.75).sqrt()).abs() < 1e-12);
        let c = smooth_by_cutoff(&diag(&[0.5, 0.5]), &diag(&[0.25, 0.75]), 2.0).unwrap();
        assert_eq!(c.epsilon, 0.0);
        let mut rng = random::rng(17);
        let alg = BlockAlgebra::full(3);
        let rho = random::state(&alg, None, &mut rng);
        let sigma = random::state(&alg, None, &mut rng);
        let c = smooth_by_cutoff(&rho, &sigma, 1.0).unwrap();
        assert!(sigma.sub(&c.witness).min_eig().unwrap() >= -1e-10);
        let pd = crate::divergences::purified_distance(&rho, &c.witness).unwrap();
        assert!(pd <= c.epsilon + 1e-9);
        let (v, _) = smooth_dmax(&rho, &sigma, c.epsilon.min(0.999)).unwrap();
        assert!(v.value <= c.bound + 1e-6);
    }

    #[test]
    fn block_algebra_smoothing() {
        let mut rng = random::rng(31);
        let alg = BlockAlgebra::new(&[(2, 1.0), (1, 3.0)]).unwrap();
        let rho = random::state(&alg, None, &mut rng);
        let sigma = random::state(&alg, None, &mut rng);
        let (v, c) = smooth_dmax(&rho, &sigma, 0.3).unwrap();
        c.verify(&rho, &sigma, 0.3).unwrap();
        assert!(v.value <= d_max(&rho, &sigma).unwrap().value + 1e-12);
    }
}

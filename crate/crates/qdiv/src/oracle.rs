//! Classical (commutative) reference implementations on probability vectors.
//!
//! Everything here is computed from closed formulas or exact sorting
//! arguments, so the quantum routines can be checked on diagonal inputs.

use crate::error::{Error, Result};

/// Nonnegative weights with total mass at most 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("distribution entries must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("distribution mass {total} exceeds 1")));
        }
        Ok(Distribution { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn product(&self, other: &Distribution) -> Distribution {
        let weights = self.weights.iter().flat_map(|&a| other.weights.iter().map(move |&b| a * b)).collect();
        Distribution { weights }
    }

    pub fn power(&self, n: usize) -> Distribution {
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.product(self);
        }
        acc
    }
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Domain(format!("length mismatch {} vs {}", p.len(), q.len())));
    }
    Ok(())
}

fn violates_support(p: &[f64], q: &[f64]) -> bool {
    p.iter().zip(q).any(|(&a, &b)| a > 0.0 && b <= 0.0)
}

/// Σ p log₂(p/q).
pub fn relative_entropy(p: &[f64], q: &[f64]) -> f64 {
    if violates_support(p, q) {
        return f64::INFINITY;
    }
    p.iter().zip(q).filter(|(&a, _)| a > 0.0).map(|(&a, &b)| a * (a / b).log2()).sum()
}

/// Raw k-th moment Σ p (log₂ p/q)^k of the log-likelihood ratio.
pub fn log_ratio_moment(p: &[f64], q: &[f64], k: i32) -> f64 {
    if violates_support(p, q) {
        return f64::INFINITY;
    }
    p.iter().zip(q).filter(|(&a, _)| a > 0.0).map(|(&a, &b)| a * (a / b).log2().powi(k)).sum()
}

pub fn d_max(p: &[f64], q: &[f64]) -> f64 {
    if violates_support(p, q) {
        return f64::INFINITY;
    }
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a / b)
        .fold(0.0, f64::max)
        .log2()
}

/// −log₂ Σ_{p > 0} q.
pub fn d_min(p: &[f64], q: &[f64]) -> f64 {
    let s: f64 = p.iter().zip(q).filter(|(&a, _)| a > 0.0).map(|(_, &b)| b).sum();
    -s.log2()
}

/// Rényi divergence (1/(α−1)) log₂ Σ p^α q^{1−α}; α = ∞ gives D_max.
pub fn renyi(p: &[f64], q: &[f64], alpha: f64) -> f64 {
    if alpha.is_infinite() {
        return d_max(p, q);
    }
    if alpha > 1.0 && violates_support(p, q) {
        return f64::INFINITY;
    }
    let s: f64 = p
        .iter()
        .zip(q)
        .filter(|(&a, &b)| a > 0.0 && b > 0.0)
        .map(|(&a, &b)| a.powf(alpha) * b.powf(1.0 - alpha))
        .sum();
    if s <= 0.0 {
        return f64::INFINITY;
    }
    s.log2() / (alpha - 1.0)
}

pub fn fidelity(p: &[f64], q: &[f64]) -> f64 {
    let overlap: f64 = p.iter().zip(q).map(|(&a, &b)| (a * b).sqrt()).sum();
    let tp: f64 = p.iter().sum();
    let tq: f64 = q.iter().sum();
    (overlap + ((1.0 - tp).max(0.0) * (1.0 - tq).max(0.0)).sqrt()).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalValues {
    pub relative_entropy: f64,
    pub renyi: f64,
    pub d_max: f64,
    pub d_min: f64,
    pub variance: f64,
    pub third_moment: f64,
}

/// All unsmoothed divergences of a pair; V and T are the raw moments.
pub fn classical_divergences(p: &Distribution, q: &Distribution, alpha: f64) -> Result<ClassicalValues> {
    let (p, q) = (p.weights(), q.weights());
    check_pair(p, q)?;
    Ok(ClassicalValues {
        relative_entropy: relative_entropy(p, q),
        renyi: renyi(p, q, alpha),
        d_max: d_max(p, q),
        d_min: d_min(p, q),
        variance: log_ratio_moment(p, q, 2),
        third_moment: log_ratio_moment(p, q, 3),
    })
}

/// Groups (P-mass, Q-mass) by likelihood ratio q/p, ascending, merging ties.
fn ratio_groups(p: &[f64], q: &[f64]) -> Vec<(f64, f64)> {
    let mut items: Vec<(f64, f64, f64)> =
        p.iter().zip(q).filter(|(&a, _)| a > 0.0).map(|(&a, &b)| (b / a, a, b)).collect();
    items.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    for (r, a, b) in items {
        match groups.last_mut() {
            Some(g) if (r - g.0).abs() <= 1e-12 * r.max(g.0) => {
                g.1 += a;
                g.2 += b;
            }
            _ => groups.push((r, a, b)),
        }
    }
    groups.into_iter().map(|(_, a, b)| (a, b)).collect()
}

/// Minimal type-II error β = min{Σ t q : 0 ≤ t ≤ 1, Σ t p ≥ 1 − ε}.
pub fn classical_beta(p: &[f64], q: &[f64], eps: f64) -> Result<f64> {
    check_pair(p, q)?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!("epsilon {eps} outside [0,1)")));
    }
    let mut need = 1.0 - eps;
    let mut beta = 0.0;
    for (pm, qm) in ratio_groups(p, q) {
        if need <= 0.0 {
            break;
        }
        if pm <= need {
            beta += qm;
            need -= pm;
        } else {
            beta += qm * need / pm;
            need = 0.0;
        }
    }
    if need > 1e-12 {
        return Err(Error::Domain("type-I constraint cannot be met: P has too little mass".into()));
    }
    Ok(beta)
}

/// Hypothesis-testing divergence −log₂ β by exact Neyman–Pearson sorting.
pub fn classical_dh(p: &Distribution, q: &Distribution, eps: f64) -> Result<f64> {
    let beta = classical_beta(p.weights(), q.weights(), eps)?;
    Ok(if beta > 0.0 { -beta.log2() } else { f64::INFINITY })
}

/// sup{log₂ λ : Σ_{p ≤ λq} p ≤ ε}.
pub fn classical_info_spectrum(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let mut items: Vec<(f64, f64)> =
        p.iter().zip(q).filter(|(&a, &b)| a > 0.0 && b > 0.0).map(|(&a, &b)| (a / b, a)).collect();
    items.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut acc = 0.0;
    let mut k = 0;
    while k < items.len() {
        let r = items[k].0;
        while k < items.len() && (items[k].0 - r).abs() <= 1e-12 * r {
            acc += items[k].1;
            k += 1;
        }
        if acc > eps {
            return r.log2();
        }
    }
    f64::INFINITY
}

/// Largest fidelity Σ √(p r) over 0 ≤ r ≤ λq with Σ r ≤ 1.
///
/// The optimizer is r = min(c·p, λq) with c set by the mass constraint.
pub fn max_fidelity_below(p: &[f64], q: &[f64], lambda: f64) -> f64 {
    let caps: Vec<(f64, f64)> = p.iter().zip(q).filter(|(&a, _)| a > 0.0).map(|(&a, &b)| (a, lambda * b)).collect();
    let full: f64 = caps.iter().map(|c| c.1).sum();
    let r: Vec<f64> = if full <= 1.0 {
        caps.iter().map(|c| c.1).collect()
    } else {
        // mass(c) = Σ min(c p, cap) is piecewise linear and increasing in c
        let mut brk: Vec<(f64, f64, f64)> = caps.iter().map(|&(a, cap)| (cap / a, a, cap)).collect();
        brk.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut free_p: f64 = brk.iter().map(|b| b.1).sum();
        let mut capped = 0.0;
        let mut c = 0.0;
        for &(ci, a, cap) in &brk {
            if capped + ci * free_p >= 1.0 {
                c = (1.0 - capped) / free_p;
                break;
            }
            capped += cap;
            free_p -= a;
            c = ci;
        }
        caps.iter().map(|&(a, cap)| (c * a).min(cap)).collect()
    };
    caps.iter().zip(&r).map(|(&(a, _), &ri)| (a * ri).sqrt()).sum::<f64>().min(1.0)
}

/// Smooth max divergence over the purified-distance ball of subnormalized
/// vectors, by bisection in log₂λ on the exact max-fidelity test.
pub fn classical_smooth_dmax(p: &Distribution, q: &Distribution, eps: f64, tol: f64) -> Result<f64> {
    let (pw, qw) = (p.weights(), q.weights());
    check_pair(pw, qw)?;
    if pw.iter().filter(|&&x| x > 0.0).count() > 4 {
        return Err(Error::Domain("oracle smoothing is limited to supports of size 4".into()));
    }
    if (p.mass() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain("smoothing needs a normalized P".into()));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!("epsilon {eps} outside [0,1)")));
    }
    let hi0 = d_max(pw, qw);
    if eps == 0.0 {
        return Ok(hi0);
    }
    let target = (1.0 - eps * eps).sqrt();
    let feasible = |t: f64| max_fidelity_below(pw, qw, t.exp2()) >= target;
    let mut hi = if hi0.is_finite() { hi0 } else { 1.0 };
    while !feasible(hi) {
        if hi > 1e4 {
            return Ok(f64::INFINITY);
        }
        hi += 1.0 + hi.abs();
    }
    let mut lo = hi - 1.0;
    while feasible(lo) {
        lo -= 1.0 + (hi - lo);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Brute-force smoothing for two outcomes: scan r₀ on a uniform grid with
/// the smallest r₁ meeting the fidelity target, then polish by golden section.
pub fn classical_smooth_dmax_grid(p: [f64; 2], q: [f64; 2], eps: f64, points: usize) -> f64 {
    let f = (1.0 - eps * eps).sqrt();
    let objective = |r0: f64| -> f64 {
        let rest = (f - (p[0] * r0).sqrt()).max(0.0);
        let r1 = if rest == 0.0 {
            0.0
        } else if p[1] > 0.0 {
            rest * rest / p[1]
        } else {
            return f64::INFINITY;
        };
        if r0 + r1 > 1.0 + 1e-15 {
            return f64::INFINITY;
        }
        let a = if r0 > 0.0 { r0 / q[0] } else { 0.0 };
        let b = if r1 > 0.0 { r1 / q[1] } else { 0.0 };
        a.max(b)
    };
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=points {
        let r0 = i as f64 / points as f64;
        let v = objective(r0);
        if v < best.0 {
            best = (v, r0);
        }
    }
    let h = 1.0 / points as f64;
    let (mut a, mut b) = ((best.1 - h).max(0.0), (best.1 + h).min(1.0));
    // the feasible r₀ form an interval; find its left end first
    if !objective(a).is_finite() {
        let mut inside = best.1;
        for _ in 0..200 {
            let mid = 0.5 * (a + inside);
            if objective(mid).is_finite() {
                inside = mid;
            } else {
                a = mid;
            }
        }
        a = inside;
        let v = objective(a);
        if v < best.0 {
            best = (v, a);
        }
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if objective(c) <= objective(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.0.min(objective(0.5 * (a + b))).log2()
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let mut acc = Compensated::default();
    for &x in xs {
        acc.add((x - m).exp());
    }
    m + acc.value().ln()
}

fn compositions(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(left: usize, slot: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if slot + 1 == cur.len() {
            cur[slot] = left;
            f(cur);
            return;
        }
        for c in 0..=left {
            cur[slot] = c;
            rec(left - c, slot + 1, cur, f);
        }
    }
    let mut cur = vec![0; k];
    rec(n, 0, &mut cur, f);
}

const MAX_TYPES: f64 = 5e6;

/// Exact D_H^ε(P^{⊗n} ‖ Q^{⊗n}) by grouping strings into type classes, with
/// multinomial weights kept in log space.
pub fn iid_type_class_dh(p: &Distribution, q: &Distribution, n: usize, eps: f64) -> Result<f64> {
    let (pw, qw) = (p.weights(), q.weights());
    check_pair(pw, qw)?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!("epsilon {eps} outside [0,1)")));
    }
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let k = pw.len();
    let mut count = 1.0;
    for i in 1..k {
        count *= (n + i) as f64 / i as f64;
    }
    if count > MAX_TYPES {
        return Err(Error::Budget(format!("{count:.0} type classes for alphabet {k} and n = {n}")));
    }
    let mut log_fact = vec![0.0; n + 1];
    let mut acc = Compensated::default();
    for i in 1..=n {
        acc.add((i as f64).ln());
        log_fact[i] = acc.value();
    }
    let lp: Vec<f64> = pw.iter().map(|x| x.ln()).collect();
    let lq: Vec<f64> = qw.iter().map(|x| x.ln()).collect();
    // (log likelihood ratio per string, log P-mass of class, log Q-mass of class)
    let mut classes: Vec<(f64, f64, f64)> = Vec::new();
    compositions(n, k, &mut |t| {
        let mut mult = log_fact[n];
        let mut sp = 0.0;
        let mut sq = 0.0;
        for i in 0..k {
            if t[i] > 0 {
                mult -= log_fact[t[i]];
                sp += t[i] as f64 * lp[i];
                sq += t[i] as f64 * lq[i];
            }
        }
        if sp > f64::NEG_INFINITY {
            classes.push((sq - sp, mult + sp, mult + sq));
        }
    });
    classes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut need = 1.0 - eps;
    let mut taken: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < classes.len() && need > 0.0 {
        let r = classes[i].0;
        let mut j = i;
        while j < classes.len() && (classes[j].0 - r).abs() <= 1e-12 * r.abs().max(1.0) {
            j += 1;
        }
        let group = &classes[i..j];
        let pm: f64 = group.iter().map(|c| c.1.exp()).sum();
        let lqm = log_sum_exp(&group.iter().map(|c| c.2).collect::<Vec<_>>());
        if pm <= need {
            taken.push(lqm);
            need -= pm;
        } else {
            taken.push(lqm + (need / pm).ln());
            need = 0.0;
        }
        i = j;
    }
    if need > 1e-9 {
        return Err(Error::Domain("type-I constraint cannot be met".into()));
    }
    let log_beta = log_sum_exp(&taken);
    Ok(-log_beta / std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(w: &[f64]) -> Distribution {
        Distribution::new(w.to_vec()).unwrap()
    }

    #[test]
    fn equal_pair_is_zero() {
        let p = dist(&[0.2, 0.3, 0.5]);
        let v = classical_divergences(&p, &p, 2.0).unwrap();
        assert_eq!(v.relative_entropy, 0.0);
        assert!(v.renyi.abs() < 1e-15 && v.d_max.abs() < 1e-15 && v.d_min.abs() < 1e-15);
        assert_eq!(v.variance, 0.0);
    }

    #[test]
    fn entropy_against_constant_function() {
        let p = [0.25; 4];
        let one = [1.0; 4];
        assert!((relative_entropy(&p, &one) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn max_ratio() {
        assert!((d_max(&[0.5, 0.5], &[0.25, 0.75]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dh_basics() {
        let p = dist(&[0.5, 0.5]);
        assert!((classical_dh(&p, &p, 0.3).unwrap() + (0.7f64).log2()).abs() < 1e-15);
        assert!(classical_dh(&p, &dist(&[0.25, 0.75]), 0.0).unwrap().abs() < 1e-15);
        // include the outcome with ratio 1/2 fully, then 0.3/0.5 of the other
        let v = classical_dh(&p, &dist(&[0.25, 0.75]), 0.2).unwrap();
        assert!((v + (0.25 + 0.75 * 0.6f64).log2()).abs() < 1e-15);
    }

    #[test]
    fn smoothing_endpoints() {
        let p = dist(&[1.0, 0.0]);
        let q = dist(&[0.5, 0.5]);
        assert!((classical_smooth_dmax(&p, &q, 0.0, 1e-12).unwrap() - 1.0).abs() < 1e-15);
        let mut last = 1.0;
        for e in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let v = classical_smooth_dmax(&p, &q, e, 1e-12).unwrap();
            let g = classical_smooth_dmax_grid([1.0, 0.0], [0.5, 0.5], e, 100_000);
            assert!(v <= last + 1e-12);
            assert!((v - g).abs() < 1e-6, "{e}: {v} vs {g}");
            last = v;
        }
    }

    #[test]
    fn type_classes_match_dense_product() {
        let p = dist(&[0.3, 0.7]);
        let q = dist(&[0.6, 0.4]);
        for n in 1..=10 {
            let dense = classical_dh(&p.power(n), &q.power(n), 0.25).unwrap();
            let types = iid_type_class_dh(&p, &q, n, 0.25).unwrap();
            assert!((dense - types).abs() < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn type_classes_handle_large_n() {
        let p = dist(&[0.11, 0.89]);
        let q = dist(&[0.5, 0.5]);
        let v = iid_type_class_dh(&p, &q, 10_000, 0.3).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!((iid_type_class_dh(&p, &p, 500, 0.3).unwrap() + (0.7f64).log2()).abs() < 1e-9);
    }

    #[test]
    fn info_spectrum_steps() {
        let p = [0.5, 0.5];
        let q = [0.25, 0.75];
        // ratios 2/3 and 2; mass 0.5 enters at 2/3
        assert!((classical_info_spectrum(&p, &q, 0.3) - (2.0f64 / 3.0).log2()).abs() < 1e-15);
        assert!((classical_info_spectrum(&p, &q, 0.6) - 1.0).abs() < 1e-15);
    }
}

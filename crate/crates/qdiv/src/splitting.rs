//! Douglas–Rachford operator splitting over block operators.
//!
//! Every constraint set exposes a Euclidean projection (in the weighted
//! Hilbert–Schmidt metric); projections onto semidefinite constraints are
//! eigenvalue clippings. The engine either looks for a point in the
//! intersection of two sets or maximizes a linear functional over it, and
//! hands each iterate to a caller-supplied monitor that may certify a
//! decision early.

use std::collections::VecDeque;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::algebra::BlockOperator;
use crate::linalg::{self, c64, CMat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub relaxation: f64,
    pub penalty: f64,
    /// Iterations between step-size adaptations (0 disables them).
    pub rescale_every: usize,
    /// Number of past iterates used for Anderson extrapolation (0 disables it).
    pub anderson_memory: usize,
    pub max_iterations: usize,
    /// Iterations between monitor calls.
    pub check_every: usize,
    pub primal_tolerance: f64,
    pub constraint_tolerance: f64,
    /// Bisection tolerance on log₂λ for smooth D_max.
    pub bisection_tolerance: f64,
    /// Largest admissible gap between the Neyman–Pearson test and its dual bound.
    pub np_gap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            relaxation: 1.6,
            penalty: 1.0,
            rescale_every: 100,
            anderson_memory: 8,
            max_iterations: 50_000,
            check_every: 25,
            primal_tolerance: 1e-7,
            constraint_tolerance: 1e-8,
            bisection_tolerance: 1e-6,
            np_gap: 1e-7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Feasible,
    Infeasible,
    Undecided,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    /// Last point of the second set visited; feasible up to the residuals.
    pub point: BlockOperator,
    /// Governing sequence, reusable as a warm start.
    pub state: BlockOperator,
    pub iterations: usize,
    pub residuals: Residuals,
}

pub trait ConvexSet {
    fn project(&self, x: &BlockOperator) -> BlockOperator;

    /// Distance-like measure of how far `x` is from the set.
    fn violation(&self, x: &BlockOperator) -> f64 {
        x.sub(&self.project(x)).hs_norm()
    }
}

/// {X Hermitian : lower ≤ eig(X) ≤ upper}.
pub struct EigenvalueBox {
    pub lower: f64,
    pub upper: f64,
}

impl ConvexSet for EigenvalueBox {
    fn project(&self, x: &BlockOperator) -> BlockOperator {
        x.hermitized()
            .spectrum()
            .expect("hermitized operators have a spectrum")
            .map(|v| v.clamp(self.lower, self.upper))
    }
}

/// {X Hermitian : X ≤ bound}.
pub struct BelowOperator {
    pub bound: BlockOperator,
}

impl ConvexSet for BelowOperator {
    fn project(&self, x: &BlockOperator) -> BlockOperator {
        let excess = x.hermitized().sub(&self.bound).positive_part().expect("Hermitian difference");
        x.hermitized().sub(&excess)
    }
}

/// {X : Re τ(N* X) ≥ offset}.
pub struct Halfspace {
    pub normal: BlockOperator,
    pub offset: f64,
}

impl ConvexSet for Halfspace {
    fn project(&self, x: &BlockOperator) -> BlockOperator {
        let short = self.offset - self.normal.inner(x);
        if short <= 0.0 {
            return x.clone();
        }
        x.lincomb(1.0, &self.normal, short / self.normal.inner(&self.normal))
    }

    fn violation(&self, x: &BlockOperator) -> f64 {
        (self.offset - self.normal.inner(x)).max(0.0)
    }
}

pub struct Point {
    pub at: BlockOperator,
}

impl ConvexSet for Point {
    fn project(&self, _x: &BlockOperator) -> BlockOperator {
        self.at.clone()
    }
}

/// Operator-norm unit ball {K : ‖K_b‖∞ ≤ 1 for every block}.
pub struct SpectralBall;

impl ConvexSet for SpectralBall {
    fn project(&self, x: &BlockOperator) -> BlockOperator {
        x.map_blocks(|_, m| clip_singular_values(m), false)
    }
}

fn clip_singular_values(m: &CMat) -> CMat {
    let (u, s, v) = linalg::svd(m.as_ref());
    if s.iter().all(|&x| x <= 1.0) {
        return m.clone();
    }
    let mut us = u;
    for (j, &sj) in s.iter().enumerate() {
        let f = sj.min(1.0);
        for i in 0..us.nrows() {
            us[(i, j)] *= f;
        }
    }
    &us * v.adjoint()
}

/// {K : τ(K* W K) ≤ 1} for a positive semidefinite weight W, stored through
/// its eigendecomposition.
pub struct Ellipsoid {
    eigvecs: Vec<CMat>,
    eigvals: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl Ellipsoid {
    pub fn new(w: &BlockOperator) -> Self {
        let spec = w.spectrum().expect("ellipsoid weight must be Hermitian");
        Ellipsoid {
            eigvecs: spec.blocks.iter().map(|e| e.vectors.clone()).collect(),
            eigvals: spec.blocks.iter().map(|e| e.values.iter().map(|v| v.max(0.0)).collect()).collect(),
            weights: w.algebra().blocks().iter().map(|b| b.weight).collect(),
        }
    }

    /// τ(K* W K).
    pub fn level(&self, k: &BlockOperator) -> f64 {
        let rows = self.rotated_row_norms(k);
        self.weighted(&rows, 0.0)
    }

    fn rotated_row_norms(&self, k: &BlockOperator) -> Vec<(CMat, Vec<f64>)> {
        k.blocks()
            .iter()
            .zip(&self.eigvecs)
            .map(|(m, v)| {
                let y = v.adjoint() * m;
                let norms = (0..y.nrows()).map(|i| (0..y.ncols()).map(|j| y[(i, j)].norm_sqr()).sum()).collect();
                (y, norms)
            })
            .collect()
    }

    fn weighted(&self, rows: &[(CMat, Vec<f64>)], nu: f64) -> f64 {
        rows.iter()
            .zip(&self.eigvals)
            .zip(&self.weights)
            .map(|(((_, r), ev), w)| w * r.iter().zip(ev).map(|(r, e)| e * r / (1.0 + nu * e).powi(2)).sum::<f64>())
            .sum()
    }
}

impl ConvexSet for Ellipsoid {
    fn project(&self, x: &BlockOperator) -> BlockOperator {
        let rows = self.rotated_row_norms(x);
        if self.weighted(&rows, 0.0) <= 1.0 {
            return x.clone();
        }
        let mut hi = 1.0;
        while self.weighted(&rows, hi) > 1.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.weighted(&rows, mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let nu = hi;
        let blocks: Vec<CMat> = rows
            .iter()
            .zip(&self.eigvecs)
            .zip(&self.eigvals)
            .map(|(((y, _), v), ev)| {
                let mut y = y.clone();
                for (i, e) in ev.iter().enumerate() {
                    let f = c64::new(1.0 / (1.0 + nu * e), 0.0);
                    for j in 0..y.ncols() {
                        y[(i, j)] *= f;
                    }
                }
                v * y
            })
            .collect();
        BlockOperator::new(x.algebra(), blocks).expect("shapes are preserved")
    }

    fn violation(&self, x: &BlockOperator) -> f64 {
        (self.level(x) - 1.0).max(0.0)
    }
}

/// Monitor verdict for an iterate: `Some(status)` stops the iteration.
pub type Verdict = Option<Status>;

/// Douglas–Rachford iteration for `first ∩ second`, maximizing Re τ(G* X)
/// when an objective `G` is given.
///
/// Without a monitor verdict the run ends as feasible once the two
/// projections agree to the primal tolerance and both sets are met to the
/// constraint tolerance, as infeasible once the gap between the projections
/// settles at a nonzero displacement, and as undecided at the iteration cap.
pub fn solve_feasibility(
    first: &dyn ConvexSet,
    second: &dyn ConvexSet,
    objective: Option<&BlockOperator>,
    start: &BlockOperator,
    config: &SolverConfig,
    mut monitor: impl FnMut(&BlockOperator, &BlockOperator) -> Verdict,
) -> Outcome {
    let mut gamma = config.penalty;
    if let Some(g) = objective {
        // measure the objective against the unit scale of the iterates
        let gn = g.hs_norm();
        if gn > 0.0 {
            gamma /= gn;
        }
    }
    let gamma_start = gamma;
    let mut x = start.clone();
    let mut last_gap = f64::INFINITY;
    let mut stalled_since = 0usize;
    let mut window_gap = f64::INFINITY;
    let mut residuals = Residuals::default();
    let mut z = second.project(&x);
    if objective.is_none()
        && first.violation(&z) < config.constraint_tolerance
        && second.violation(&z) < config.constraint_tolerance
    {
        return Outcome { status: Status::Feasible, point: z, state: x, iterations: 0, residuals };
    }
    let memory = if objective.is_some() { config.anderson_memory } else { 0 };
    let mut history: VecDeque<(BlockOperator, BlockOperator)> = VecDeque::new();
    // plain successor of the last accepted point and its residual, kept while
    // an extrapolated point is on trial
    let mut trial: Option<(BlockOperator, f64)> = None;
    let half_step = |x: &BlockOperator, gamma: f64| -> (BlockOperator, BlockOperator) {
        let shifted = match objective {
            Some(g) => x.lincomb(1.0, g, gamma),
            None => x.clone(),
        };
        let y = first.project(&shifted);
        let z = second.project(&y.lincomb(2.0, x, -1.0));
        (y, z)
    };
    for it in 1..=config.max_iterations {
        let (mut y, mut zz) = half_step(&x, gamma);
        let mut step = zz.sub(&y);
        if let Some((fallback, previous)) = trial.take() {
            if step.hs_norm() > ANDERSON_SAFEGUARD * previous {
                x = fallback;
                history.clear();
                (y, zz) = half_step(&x, gamma);
                step = zz.sub(&y);
            }
        }
        z = zz;
        let gap = step.hs_norm();
        residuals = Residuals { primal: gap, dual: config.relaxation * gap / gamma.max(1e-300) };

        if it % config.check_every == 0 || it == 1 {
            if let Some(status) = monitor(&y, &z) {
                return Outcome { status, point: z, state: x, iterations: it, residuals };
            }
        }
        let update = step.scale(config.relaxation);
        let plain = x.add(&update);
        if objective.is_none() {
            if gap < config.primal_tolerance
                && first.violation(&z) < config.constraint_tolerance
                && second.violation(&z) < config.constraint_tolerance
            {
                return Outcome { status: Status::Feasible, point: z, state: x, iterations: it, residuals };
            }
            // the difference of the projections converges to the displacement
            // vector, which is nonzero exactly when the sets do not meet
            if (gap - last_gap).abs() <= 1e-10 * gap.max(1e-300) && gap > 1e-6 {
                stalled_since += 1;
                if stalled_since >= 200 {
                    return Outcome { status: Status::Infeasible, point: z, state: x, iterations: it, residuals };
                }
            } else {
                stalled_since = 0;
            }
            last_gap = gap;
            x = plain;
            continue;
        }
        if config.rescale_every > 0 && it % config.rescale_every == 0 {
            // grow the step on the objective when progress stalls
            if gap > 0.5 * window_gap && gamma < 16.0 * gamma_start {
                let g = objective.expect("objective mode");
                let y_now = first.project(&plain.lincomb(1.0, g, gamma));
                let dual_part = plain.sub(&y_now);
                gamma *= 2.0;
                x = y_now.lincomb(1.0, &dual_part, 2.0);
                history.clear();
                window_gap = gap;
                continue;
            }
            window_gap = gap;
        }
        if memory == 0 {
            x = plain;
            continue;
        }
        history.push_back((x, update));
        if history.len() > memory + 1 {
            history.pop_front();
        }
        match anderson_point(&history) {
            Some(extrapolated) => {
                trial = Some((plain, gap));
                x = extrapolated;
            }
            None => x = plain,
        }
    }
    Outcome { status: Status::Undecided, point: z, state: x, iterations: config.max_iterations, residuals }
}

/// Largest growth of the fixed-point residual tolerated after an
/// extrapolated step before falling back to the plain iteration.
const ANDERSON_SAFEGUARD: f64 = 1.0;

/// Type-II Anderson extrapolation from points xᵢ and residuals gᵢ = T(xᵢ) − xᵢ:
/// x + g − (ΔX + ΔG)c with c minimizing ‖g − ΔG c‖.
fn anderson_point(history: &VecDeque<(BlockOperator, BlockOperator)>) -> Option<BlockOperator> {
    let m = history.len().checked_sub(1).filter(|&m| m > 0)?;
    let (xk, gk) = history.back()?;
    let dx: Vec<BlockOperator> = (0..m).map(|j| history[j + 1].0.sub(&history[j].0)).collect();
    let dg: Vec<BlockOperator> = (0..m).map(|j| history[j + 1].1.sub(&history[j].1)).collect();
    let mut gram = Mat::<f64>::from_fn(m, m, |i, j| dg[i].inner(&dg[j]));
    let scale = (0..m).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    for i in 0..m {
        gram[(i, i)] += 1e-10 * scale;
    }
    let rhs = Mat::<f64>::from_fn(m, 1, |i, _| dg[i].inner(gk));
    let coeffs = gram.partial_piv_lu().solve(&rhs);
    if (0..m).any(|i| !coeffs[(i, 0)].is_finite()) {
        return None;
    }
    let mut out = xk.add(gk);
    for j in 0..m {
        out = out.lincomb(1.0, &dx[j].add(&dg[j]), -coeffs[(j, 0)]);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{BlockAlgebra, PositiveFunctional};
    use crate::random;

    #[test]
    fn projections_land_in_sets() {
        let mut rng = random::rng(2);
        let alg = BlockAlgebra::new(&[(3, 1.0), (2, 0.5)]).unwrap();
        let h = random::hermitian(&alg, &mut rng);
        let b = EigenvalueBox { lower: 0.0, upper: 1.0 }.project(&h);
        let ev = b.eigenvalues().unwrap();
        assert!(ev.iter().flatten().all(|&v| v >= -1e-12 && v <= 1.0 + 1e-12));
        let sigma = random::state(&alg, None, &mut rng);
        let below = BelowOperator { bound: sigma.operator().clone() }.project(&h);
        assert!(sigma.sub(&below).min_eig().unwrap() >= -1e-12);
        let hs = Halfspace { normal: sigma.operator().clone(), offset: 3.0 };
        assert!(hs.violation(&hs.project(&h)) < 1e-12);
        let k = random::ginibre(3, 3, &mut rng);
        let kk = BlockOperator::new(&alg, vec![linalg::scaled(&k, 3.0), linalg::identity(2)]).unwrap();
        let ball = SpectralBall.project(&kk);
        assert!(ball.blocks().iter().all(|m| linalg::singular_values(m.as_ref())[0] <= 1.0 + 1e-12));
        let ell = Ellipsoid::new(sigma.operator());
        let p = ell.project(&kk);
        assert!((ell.level(&p) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn feasible_immediately() {
        let mut rng = random::rng(5);
        let alg = BlockAlgebra::full(3);
        let sigma = random::state(&alg, None, &mut rng);
        let rho = PositiveFunctional::new(sigma.scale(0.5)).unwrap();
        let below = BelowOperator { bound: sigma.scale(2.0) };
        let point = Point { at: rho.operator().clone() };
        let out = solve_feasibility(&below, &point, None, &BlockOperator::zeros(&alg), &SolverConfig::default(), |_, _| None);
        assert_eq!(out.status, Status::Feasible);
        assert!(out.iterations <= 2);
    }

    #[test]
    fn disjoint_sets_are_infeasible() {
        let mut rng = random::rng(6);
        let alg = BlockAlgebra::full(2);
        let rho = random::state(&alg, Some(1), &mut rng);
        let below = BelowOperator { bound: rho.scale(0.5) };
        let point = Point { at: rho.operator().clone() };
        let out = solve_feasibility(&below, &point, None, &BlockOperator::zeros(&alg), &SolverConfig::default(), |_, _| None);
        assert_eq!(out.status, Status::Infeasible);
    }
}

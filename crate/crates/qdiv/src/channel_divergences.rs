//! Channel divergences: suprema of output divergences over input states,
//! with and without a reference system, and amortized gap samples.
//!
//! Finite-α suprema are searched by multistart ascent and reported as lower
//! bounds. D_max with a reference system is exact through Choi states.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{BlockAlgebra, BlockOperator, PositiveFunctional};
use crate::channels::Channel;
use crate::divergences::{d_max, Divergence};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};
use crate::random;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Exact,
    /// Best value found by a local search; the supremum may be larger.
    Lower,
}

#[derive(Clone, Debug)]
pub struct ChannelDivergence {
    pub value: f64,
    pub bound: Bound,
    /// Input state achieving `value` (on the reference-extended input for
    /// reference divergences).
    pub maximizer: PositiveFunctional,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AscentConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_steps: usize,
    /// Finite-difference step for the gradient.
    pub difference_step: f64,
    #[serde(skip)]
    pub warm_start: Option<PositiveFunctional>,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig { restarts: 32, seed: 0, max_steps: 200, difference_step: 1e-6, warm_start: None }
    }
}

fn check_pair(phi: &Channel, psi: &Channel) -> Result<()> {
    if phi.input() != psi.input() || phi.output() != psi.output() {
        return Err(Error::AlgebraMismatch);
    }
    Ok(())
}

/// Purification coordinates: per block a `d × r` complex matrix G_b,
/// flattened to reals; the state is G G* normalized in the weighted trace.
#[derive(Clone)]
struct Purification {
    algebra: BlockAlgebra,
    ranks: Vec<usize>,
}

impl Purification {
    fn len(&self) -> usize {
        self.algebra.blocks().iter().zip(&self.ranks).map(|(b, r)| 2 * b.dim * r).sum()
    }

    fn state(&self, x: &[f64]) -> PositiveFunctional {
        let mut k = 0;
        let blocks: Vec<CMat> = self
            .algebra
            .blocks()
            .iter()
            .zip(&self.ranks)
            .map(|(b, &r)| {
                let g = CMat::from_fn(b.dim, r, |i, j| {
                    let idx = k + 2 * (i * r + j);
                    c64::new(x[idx], x[idx + 1])
                });
                k += 2 * b.dim * r;
                &g * g.adjoint()
            })
            .collect();
        let op = BlockOperator::new(&self.algebra, blocks).expect("shapes match").hermitized();
        let mass = op.weighted_trace().re;
        PositiveFunctional::from_nearly_positive(&op.scale(1.0 / mass.max(1e-300))).expect("Gram matrices are positive")
    }

    fn random(&self, rng: &mut impl rand::Rng) -> Vec<f64> {
        (0..self.len()).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
    }

    /// Coordinates of a given state: G_b = ρ_b^{1/2}, padded or cut to the rank.
    fn coordinates(&self, rho: &PositiveFunctional) -> Result<Vec<f64>> {
        if rho.algebra() != &self.algebra {
            return Err(Error::AlgebraMismatch);
        }
        let spec = rho.spectrum()?;
        let mut x = Vec::with_capacity(self.len());
        for ((e, b), &r) in spec.blocks.iter().zip(self.algebra.blocks()).zip(&self.ranks) {
            // keep the r largest eigenvectors scaled by √λ
            let d = b.dim;
            for i in 0..d {
                for j in 0..r {
                    let v = match (d - 1).checked_sub(j) {
                        Some(col) => e.vectors[(i, col)] * e.values[col].max(0.0).sqrt(),
                        None => c64::new(0.0, 0.0),
                    };
                    x.push(v.re);
                    x.push(v.im);
                }
            }
        }
        Ok(x)
    }
}

/// Gradient ascent with central differences and backtracking on the step.
fn ascend(f: &(dyn Fn(&[f64]) -> f64 + Sync), mut x: Vec<f64>, config: &AscentConfig) -> (f64, Vec<f64>) {
    let mut val = f(&x);
    if val == f64::INFINITY {
        return (val, x);
    }
    let h = config.difference_step;
    let mut step = 0.5;
    for _ in 0..config.max_steps {
        let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let mut grad = vec![0.0; x.len()];
        let mut probe = x.clone();
        for i in 0..x.len() {
            let xi = x[i];
            probe[i] = xi + h * scale;
            let up = f(&probe);
            probe[i] = xi - h * scale;
            let down = f(&probe);
            probe[i] = xi;
            if up == f64::INFINITY || down == f64::INFINITY {
                probe[i] = if up == f64::INFINITY { xi + h * scale } else { xi - h * scale };
                return (f64::INFINITY, probe);
            }
            grad[i] = (up - down) / (2.0 * h * scale);
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !(gnorm > 1e-12) {
            break;
        }
        let mut improved = false;
        while step > 1e-10 {
            let cand: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a + step * scale * g / gnorm).collect();
            let cv = f(&cand);
            if cv > val {
                x = cand;
                val = cv;
                improved = true;
                step = (step * 2.0).min(1.0);
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (val, x)
}

/// Multistart search; restarts run in parallel with seeded substreams and
/// the winner is the lowest index among the best values.
fn multistart(param: &Purification, f: &(dyn Fn(&PositiveFunctional) -> f64 + Sync), config: &AscentConfig) -> Result<(f64, PositiveFunctional)> {
    let objective = |x: &[f64]| f(&param.state(x));
    let warm = match &config.warm_start {
        Some(w) => Some(param.coordinates(w)?),
        None => None,
    };
    let runs = config.restarts.max(1) + usize::from(warm.is_some());
    let results: Vec<(f64, Vec<f64>)> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let x0 = match (&warm, r) {
                (Some(w), 0) => w.clone(),
                _ => param.random(&mut random::substream(config.seed, r as u64)),
            };
            ascend(&objective, x0, config)
        })
        .collect();
    let mut best = 0;
    for (i, (v, _)) in results.iter().enumerate() {
        if *v > results[best].0 || results[best].0.is_nan() {
            best = i;
        }
    }
    let (value, x) = &results[best];
    Ok((*value, param.state(x)))
}

fn output_value(div: Divergence, phi: &Channel, psi: &Channel, rho: &PositiveFunctional) -> f64 {
    let pair = phi.apply(rho).and_then(|a| psi.apply(rho).map(|b| (a, b)));
    match pair.and_then(|(a, b)| div.eval(&a, &b)) {
        Ok(v) => v.value,
        Err(_) => f64::NEG_INFINITY,
    }
}

/// sup over input states ρ of 𝔻(Φ(ρ)‖Ψ(ρ)), as a lower bound from multistart ascent.
pub fn channel_divergence_plain(phi: &Channel, psi: &Channel, div: Divergence, config: &AscentConfig) -> Result<ChannelDivergence> {
    check_pair(phi, psi)?;
    let param = Purification { algebra: phi.input().clone(), ranks: phi.input().blocks().iter().map(|b| b.dim).collect() };
    let (value, maximizer) = multistart(&param, &|rho| output_value(div, phi, psi, rho), config)?;
    Ok(ChannelDivergence { value, bound: Bound::Lower, maximizer })
}

/// D_max((id ⊗ Φ)(Ω) ‖ (id ⊗ Ψ)(Ω)) for the maximally entangled Ω, which
/// equals the reference-stabilized max divergence.
pub fn d_max_ref(phi: &Channel, psi: &Channel) -> Result<ChannelDivergence> {
    check_pair(phi, psi)?;
    let (a, b) = (phi.choi(), psi.choi());
    let value = d_max(&a, &b)?.value;
    let maximizer = Channel::identity(phi.input()).choi();
    Ok(ChannelDivergence { value, bound: Bound::Exact, maximizer })
}

/// sup over states on R ⊗ input, R a full block of the input's total
/// dimension (or `reference_dim` when given). D_max is exact via Choi states;
/// other selectors search pure states per block and report a lower bound.
pub fn channel_divergence_ref(
    phi: &Channel,
    psi: &Channel,
    div: Divergence,
    reference_dim: Option<usize>,
    config: &AscentConfig,
) -> Result<ChannelDivergence> {
    check_pair(phi, psi)?;
    let dim = reference_dim.unwrap_or(phi.input().total_dim());
    if matches!(div, Divergence::Max) && dim == phi.input().total_dim() {
        return d_max_ref(phi, psi);
    }
    let reference = BlockAlgebra::full(dim);
    let (ephi, epsi) = (phi.extend(&reference), psi.extend(&reference));
    let param = Purification { algebra: ephi.input().clone(), ranks: vec![1; ephi.input().num_blocks()] };
    let (value, maximizer) = multistart(&param, &|rho| output_value(div, &ephi, &epsi, rho), config)?;
    Ok(ChannelDivergence { value, bound: Bound::Lower, maximizer })
}

/// Samples 𝔻((id⊗Φ)(ρ)‖(id⊗Ψ)(ω)) − 𝔻(ρ‖ω) over random full-rank pairs on
/// R ⊗ input; each is a lower bound on the amortized divergence.
pub fn amortized_gap_samples(phi: &Channel, psi: &Channel, div: Divergence, trials: usize, seed: u64) -> Result<Vec<f64>> {
    check_pair(phi, psi)?;
    if trials == 0 {
        return Err(Error::Domain("at least one trial is needed".into()));
    }
    let reference = BlockAlgebra::full(phi.input().total_dim());
    let (ephi, epsi) = (phi.extend(&reference), psi.extend(&reference));
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = random::substream(seed, t as u64);
            let rho = random::state(ephi.input(), None, &mut rng);
            let omega = random::state(ephi.input(), None, &mut rng);
            let out = div.eval(&ephi.apply(&rho)?, &epsi.apply(&omega)?)?.value;
            let inp = div.eval(&rho, &omega)?.value;
            Ok(out - inp)
        })
        .collect()
}

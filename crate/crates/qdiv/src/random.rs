//! Seeded random instances: states, unitaries, Hermitian operators.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::{BlockAlgebra, BlockOperator, PositiveFunctional};
use crate::linalg::{self, c64, CMat};

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream for `(seed, index)`, so parallel trials do not
/// depend on scheduling.
pub fn substream(seed: u64, index: u64) -> Rng64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index.wrapping_add(1));
    r
}

pub fn gaussian_c64(rng: &mut impl Rng) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre(r: usize, c: usize, rng: &mut impl Rng) -> CMat {
    Mat::from_fn(r, c, |_, _| gaussian_c64(rng))
}

/// Haar-distributed unitary.
pub fn unitary(d: usize, rng: &mut impl Rng) -> CMat {
    linalg::qr_unitary(ginibre(d, d, rng).as_ref())
}

/// Haar-distributed isometry C^cols → C^rows.
pub fn isometry(rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
    assert!(rows >= cols, "isometry needs rows >= cols");
    linalg::qr_unitary(ginibre(rows, cols, rng).as_ref())
}

pub fn hermitian(algebra: &BlockAlgebra, rng: &mut impl Rng) -> BlockOperator {
    let blocks = algebra
        .blocks()
        .iter()
        .map(|b| {
            let g = ginibre(b.dim, b.dim, rng);
            linalg::hermitize(g.as_ref())
        })
        .collect();
    BlockOperator::new(algebra, blocks).expect("shapes match the algebra")
}

/// Random state `G G* / τ(G G*)` with Ginibre blocks of the given rank
/// (`None` = full rank). Block mass is spread by the Ginibre draw itself.
pub fn state(algebra: &BlockAlgebra, rank: Option<usize>, rng: &mut impl Rng) -> PositiveFunctional {
    let blocks: Vec<CMat> = algebra
        .blocks()
        .iter()
        .map(|b| {
            let k = rank.unwrap_or(b.dim).clamp(1, b.dim);
            let g = ginibre(b.dim, k, rng);
            &g * g.adjoint()
        })
        .collect();
    let op = BlockOperator::new(algebra, blocks).expect("shapes match the algebra").hermitized();
    PositiveFunctional::new(op).expect("Gram matrices are positive").normalized().expect("nonzero draw")
}

/// Random probability vector on `k` points embedded diagonally, with
/// support size `support` (remaining points get zero mass).
pub fn diagonal_state(k: usize, support: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k)
        .map(|i| if i < support { -rng.random::<f64>().max(1e-300).ln() } else { 0.0 })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// State whose spectrum has at most `levels` distinct values.
pub fn state_with_levels(d: usize, levels: usize, rng: &mut impl Rng) -> PositiveFunctional {
    let vals: Vec<f64> = (0..levels).map(|_| 0.05 + rng.random::<f64>()).collect();
    let d_vals: Vec<f64> = (0..d).map(|i| vals[i % levels]).collect();
    let u = unitary(d, rng);
    let m = linalg::rebuild_with(&u, &d_vals);
    let op = BlockOperator::new(&BlockAlgebra::full(d), vec![m]).unwrap().hermitized();
    PositiveFunctional::new(op).unwrap().normalized().unwrap()
}

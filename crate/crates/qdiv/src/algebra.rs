//! Block (direct-sum) matrix algebras with weighted traces, their operators,
//! and the spectral toolbox the rest of the crate is built on.

use std::ops::Deref;
use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, Eigh};

/// Relative threshold (against the largest eigenvalue) below which an
/// eigenvalue counts as zero when taking supports and generalized inverses.
pub const SUPPORT_TOL: f64 = 1e-10;
/// Relative gap under which neighbouring eigenvalues are one spectral point.
pub const CLUSTER_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Block {
    pub dim: usize,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct BlockAlgebra {
    blocks: Vec<Block>,
    total_dim: usize,
    factors: Option<Arc<(BlockAlgebra, BlockAlgebra)>>,
}

impl PartialEq for BlockAlgebra {
    fn eq(&self, other: &Self) -> bool {
        self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| {
                a.dim == b.dim && (a.weight - b.weight).abs() <= 1e-14 * a.weight.max(b.weight)
            })
    }
}

impl BlockAlgebra {
    pub fn new(blocks: &[(usize, f64)]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidAlgebra("empty block list".into()));
        }
        for &(d, w) in blocks {
            if d == 0 {
                return Err(Error::InvalidAlgebra("block dimension must be positive".into()));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidAlgebra(format!("block weight {w} must be positive")));
            }
        }
        let blocks: Vec<Block> = blocks.iter().map(|&(dim, weight)| Block { dim, weight }).collect();
        let total_dim = blocks.iter().map(|b| b.dim).sum();
        Ok(BlockAlgebra { blocks, total_dim, factors: None })
    }

    /// Full matrix algebra B(C^d) with the ordinary trace.
    pub fn full(d: usize) -> Self {
        Self::new(&[(d, 1.0)]).expect("dimension must be positive")
    }

    /// Commutative algebra of functions on `k` points with counting measure.
    pub fn classical(k: usize) -> Self {
        Self::new(&vec![(1, 1.0); k]).expect("point count must be positive")
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn is_commutative(&self) -> bool {
        self.blocks.iter().all(|b| b.dim == 1)
    }

    pub fn factors(&self) -> Option<(&BlockAlgebra, &BlockAlgebra)> {
        self.factors.as_ref().map(|f| (&f.0, &f.1))
    }

    /// Offsets of every block inside the global basis.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len());
        let mut acc = 0;
        for b in &self.blocks {
            off.push(acc);
            acc += b.dim;
        }
        off
    }

    /// Block pair (i, j) lands at index `i * other.num_blocks() + j`.
    pub fn tensor(&self, other: &BlockAlgebra) -> BlockAlgebra {
        let mut blocks = Vec::with_capacity(self.blocks.len() * other.blocks.len());
        for a in &self.blocks {
            for b in &other.blocks {
                blocks.push(Block { dim: a.dim * b.dim, weight: a.weight * b.weight });
            }
        }
        let total_dim = self.total_dim * other.total_dim;
        BlockAlgebra { blocks, total_dim, factors: Some(Arc::new((self.clone(), other.clone()))) }
    }

    pub fn tensor_power(&self, n: usize) -> BlockAlgebra {
        assert!(n >= 1, "tensor power needs n >= 1");
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.tensor(self);
        }
        acc
    }

    pub fn unit_trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.weight * b.dim as f64).sum()
    }
}

#[derive(Clone, Debug)]
pub struct BlockOperator {
    algebra: BlockAlgebra,
    blocks: Vec<CMat>,
    hermitian: bool,
}

fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Per-block eigendecompositions of a Hermitian block operator.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub algebra: BlockAlgebra,
    pub blocks: Vec<Eigh>,
}

impl Spectrum {
    pub fn max(&self) -> f64 {
        self.blocks.iter().flat_map(|e| e.values.iter().copied()).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.blocks.iter().flat_map(|e| e.values.iter().copied()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().flat_map(|e| e.values.iter().map(|v| v.abs())).fold(0.0, f64::max)
    }

    /// Eigenvalues above this count as support.
    pub fn support_cut(&self) -> f64 {
        SUPPORT_TOL * self.max_abs()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> BlockOperator {
        let blocks = self.blocks.iter().map(|e| e.rebuild(&f)).collect();
        BlockOperator { algebra: self.algebra.clone(), blocks, hermitian: true }
    }

    /// Applies `f` on the support and maps everything else to zero.
    pub fn map_on_support(&self, f: impl Fn(f64) -> f64) -> BlockOperator {
        let cut = self.support_cut();
        self.map(|x| if x > cut { f(x) } else { 0.0 })
    }

    pub fn weighted_sum(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.algebra
            .blocks()
            .iter()
            .zip(&self.blocks)
            .map(|(b, e)| b.weight * e.values.iter().map(|&x| f(x)).sum::<f64>())
            .sum()
    }

    /// Global cluster label for each eigenvalue, plus the cluster means in
    /// ascending order.
    pub fn clusters(&self) -> (Vec<Vec<usize>>, Vec<f64>) {
        let mut all: Vec<(f64, usize, usize)> = Vec::new();
        for (b, e) in self.blocks.iter().enumerate() {
            for (i, &v) in e.values.iter().enumerate() {
                all.push((v, b, i));
            }
        }
        all.sort_by(|x, y| x.0.total_cmp(&y.0));
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut labels: Vec<Vec<usize>> = self.blocks.iter().map(|e| vec![0; e.values.len()]).collect();
        let mut sums: Vec<(f64, usize)> = Vec::new();
        let mut prev = f64::NEG_INFINITY;
        for &(v, b, i) in &all {
            if sums.is_empty() || v - prev > CLUSTER_TOL * scale {
                sums.push((0.0, 0));
            }
            let c = sums.len() - 1;
            sums[c].0 += v;
            sums[c].1 += 1;
            labels[b][i] = c;
            prev = v;
        }
        let means = sums.iter().map(|&(s, n)| s / n as f64).collect();
        (labels, means)
    }
}

impl BlockOperator {
    pub fn new(algebra: &BlockAlgebra, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return Err(Error::Malformed(format!(
                "expected {} blocks, got {}",
                algebra.num_blocks(),
                blocks.len()
            )));
        }
        for (k, (m, b)) in blocks.iter().zip(algebra.blocks()).enumerate() {
            if m.nrows() != b.dim || m.ncols() != b.dim {
                return Err(Error::Malformed(format!(
                    "block {k} is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    b.dim,
                    b.dim
                )));
            }
            if !m.as_ref().is_all_finite() {
                return Err(Error::Malformed(format!("block {k} has non-finite entries")));
            }
        }
        let hermitian = blocks.iter().all(|m| hermitian_deviation(m) <= 1e-12 * linalg::max_abs(m.as_ref()).max(1e-300));
        Ok(BlockOperator { algebra: algebra.clone(), blocks, hermitian })
    }

    pub(crate) fn from_parts(algebra: &BlockAlgebra, blocks: Vec<CMat>, hermitian: bool) -> Self {
        BlockOperator { algebra: algebra.clone(), blocks, hermitian }
    }

    pub fn zeros(algebra: &BlockAlgebra) -> Self {
        let blocks = algebra.blocks().iter().map(|b| linalg::zeros(b.dim, b.dim)).collect();
        Self::from_parts(algebra, blocks, true)
    }

    pub fn identity(algebra: &BlockAlgebra) -> Self {
        let blocks = algebra.blocks().iter().map(|b| linalg::identity(b.dim)).collect();
        Self::from_parts(algebra, blocks, true)
    }

    /// Diagonal operator from entries in the global basis.
    pub fn from_diag(algebra: &BlockAlgebra, d: &[f64]) -> Result<Self> {
        if d.len() != algebra.total_dim() {
            return Err(Error::Malformed(format!("expected {} diagonal entries", algebra.total_dim())));
        }
        let off = algebra.offsets();
        let blocks = algebra.blocks().iter().zip(off).map(|(b, o)| linalg::diag(&d[o..o + b.dim])).collect();
        Ok(Self::from_parts(algebra, blocks, true))
    }

    /// Restriction of a dense matrix to the block-diagonal pattern; entries
    /// outside the blocks must vanish.
    pub fn from_dense(algebra: &BlockAlgebra, m: &CMat) -> Result<Self> {
        let n = algebra.total_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Malformed(format!("expected a {n}x{n} matrix")));
        }
        let off = algebra.offsets();
        let mut owner = vec![0usize; n];
        for (k, (b, o)) in algebra.blocks().iter().zip(&off).enumerate() {
            for i in 0..b.dim {
                owner[o + i] = k;
            }
        }
        let scale = linalg::max_abs(m.as_ref()).max(1e-300);
        for i in 0..n {
            for j in 0..n {
                if owner[i] != owner[j] && m[(i, j)].norm() > 1e-12 * scale {
                    return Err(Error::Malformed(format!("entry ({i},{j}) lies outside the block pattern")));
                }
            }
        }
        let blocks = algebra
            .blocks()
            .iter()
            .zip(off)
            .map(|(b, o)| Mat::from_fn(b.dim, b.dim, |i, j| m[(o + i, o + j)]))
            .collect();
        Self::new(algebra, blocks)
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.algebra.total_dim();
        let mut out = linalg::zeros(n, n);
        for (m, o) in self.blocks.iter().zip(self.algebra.offsets()) {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out[(o + i, o + j)] = m[(i, j)];
                }
            }
        }
        out
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &CMat {
        &self.blocks[k]
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn check_same_algebra(&self, other: &BlockOperator) -> Result<()> {
        if self.algebra == other.algebra {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch)
        }
    }

    fn zip_with(&self, other: &BlockOperator, f: impl Fn(&CMat, &CMat) -> CMat) -> BlockOperator {
        assert!(self.algebra == other.algebra, "operands live on different algebras");
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect();
        BlockOperator { algebra: self.algebra.clone(), blocks, hermitian: self.hermitian && other.hermitian }
    }

    pub fn add(&self, other: &BlockOperator) -> BlockOperator {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &BlockOperator) -> BlockOperator {
        self.zip_with(other, |a, b| a - b)
    }

    /// `a·self + b·other`
    pub fn lincomb(&self, a: f64, other: &BlockOperator, b: f64) -> BlockOperator {
        self.zip_with(other, |x, y| linalg::scaled(x, a) + linalg::scaled(y, b))
    }

    pub fn scale(&self, s: f64) -> BlockOperator {
        let blocks = self.blocks.iter().map(|m| linalg::scaled(m, s)).collect();
        BlockOperator { algebra: self.algebra.clone(), blocks, hermitian: self.hermitian }
    }

    pub fn mul(&self, other: &BlockOperator) -> BlockOperator {
        let mut out = self.zip_with(other, |a, b| a * b);
        out.hermitian = false;
        out
    }

    pub fn adjoint(&self) -> BlockOperator {
        let blocks = self.blocks.iter().map(|m| m.adjoint().to_owned()).collect();
        BlockOperator { algebra: self.algebra.clone(), blocks, hermitian: self.hermitian }
    }

    /// `c x c*`
    pub fn conjugate_by(&self, c: &BlockOperator) -> BlockOperator {
        let blocks = self.blocks.iter().zip(&c.blocks).map(|(x, c)| c * x * c.adjoint()).collect();
        let out = BlockOperator { algebra: self.algebra.clone(), blocks, hermitian: self.hermitian };
        out.hermitized()
    }

    /// Replaces every block by its Hermitian part.
    pub fn hermitized(&self) -> BlockOperator {
        let blocks = self.blocks.iter().map(|m| linalg::hermitize(m.as_ref())).collect();
        BlockOperator { algebra: self.algebra.clone(), blocks, hermitian: true }
    }

    pub fn weighted_trace(&self) -> c64 {
        self.algebra
            .blocks()
            .iter()
            .zip(&self.blocks)
            .map(|(b, m)| linalg::trace(m.as_ref()) * b.weight)
            .fold(c64::new(0.0, 0.0), |a, b| a + b)
    }

    /// Real part of τ(self · other).
    pub fn pair(&self, other: &BlockOperator) -> f64 {
        self.algebra
            .blocks()
            .iter()
            .zip(self.blocks.iter().zip(&other.blocks))
            .map(|(b, (x, y))| b.weight * linalg::trace_product(x.as_ref(), y.as_ref()).re)
            .sum()
    }

    /// Real inner product Re τ(self* · other).
    pub fn inner(&self, other: &BlockOperator) -> f64 {
        let mut s = 0.0;
        for (b, (x, y)) in self.algebra.blocks().iter().zip(self.blocks.iter().zip(&other.blocks)) {
            let mut t = 0.0;
            for j in 0..x.ncols() {
                for i in 0..x.nrows() {
                    let (u, v) = (x[(i, j)], y[(i, j)]);
                    t += u.re * v.re + u.im * v.im;
                }
            }
            s += b.weight * t;
        }
        s
    }

    /// Applies `f` to every block; with `hermitian` the result is symmetrized.
    pub fn map_blocks(&self, f: impl Fn(usize, &CMat) -> CMat, hermitian: bool) -> BlockOperator {
        let blocks = self.blocks.iter().enumerate().map(|(k, m)| f(k, m)).collect();
        let out = BlockOperator { algebra: self.algebra.clone(), blocks, hermitian: false };
        if hermitian {
            out.hermitized()
        } else {
            out
        }
    }

    /// Weighted Hilbert-Schmidt norm τ(x* x)^{1/2}.
    pub fn hs_norm(&self) -> f64 {
        self.algebra
            .blocks()
            .iter()
            .zip(&self.blocks)
            .map(|(b, m)| b.weight * linalg::frobenius(m.as_ref()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entry modulus over all blocks.
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(|m| linalg::max_abs(m.as_ref())).fold(0.0, f64::max)
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        self.require_hermitian()?;
        Ok(Spectrum { algebra: self.algebra.clone(), blocks: self.blocks.iter().map(|m| linalg::eigh(m.as_ref())).collect() })
    }

    pub fn eigenvalues(&self) -> Result<Vec<Vec<f64>>> {
        self.require_hermitian()?;
        Ok(self.blocks.iter().map(|m| linalg::eigvalsh(m.as_ref())).collect())
    }

    pub fn min_eig(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().flatten().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn max_eig(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            return Ok(());
        }
        let dev = self.blocks.iter().map(hermitian_deviation).fold(0.0, f64::max);
        if dev <= 1e-12 * self.max_abs().max(1e-300) {
            Ok(())
        } else {
            Err(Error::NotHermitian(dev))
        }
    }

    /// Eigenvalues ascending with the spectral projections of each distinct
    /// spectral point (clustered across blocks).
    pub fn eig_h(&self) -> Result<Vec<(f64, Projection)>> {
        let spec = self.spectrum()?;
        let (labels, means) = spec.clusters();
        Ok(means
            .iter()
            .enumerate()
            .map(|(c, &mu)| {
                let blocks = spec
                    .blocks
                    .iter()
                    .zip(&labels)
                    .map(|(e, lab)| {
                        let d: Vec<f64> = lab.iter().map(|&l| if l == c { 1.0 } else { 0.0 }).collect();
                        linalg::rebuild_with(&e.vectors, &d)
                    })
                    .collect();
                (mu, Projection { op: BlockOperator::from_parts(&self.algebra, blocks, true) })
            })
            .collect())
    }

    /// Functional calculus `Σ f(λ) P_λ`. With `on_support_only`, eigenvalues at
    /// or below the support threshold map to zero without evaluating `f`.
    pub fn func_calc(&self, f: impl Fn(f64) -> f64, on_support_only: bool) -> Result<BlockOperator> {
        let spec = self.spectrum()?;
        let cut = spec.support_cut();
        for e in &spec.blocks {
            for &x in &e.values {
                if (!on_support_only || x > cut) && !f(x).is_finite() {
                    return Err(Error::Domain(format!("function undefined at eigenvalue {x:.3e}")));
                }
            }
        }
        Ok(if on_support_only { spec.map_on_support(f) } else { spec.map(f) })
    }

    /// Spectral positive part `(x)_+`.
    pub fn positive_part(&self) -> Result<BlockOperator> {
        Ok(self.spectrum()?.map(|x| x.max(0.0)))
    }

    pub fn tensor(&self, other: &BlockOperator) -> BlockOperator {
        let algebra = self.algebra.tensor(&other.algebra);
        let mut blocks = Vec::with_capacity(algebra.num_blocks());
        for a in &self.blocks {
            for b in &other.blocks {
                blocks.push(linalg::kron(a.as_ref(), b.as_ref()));
            }
        }
        BlockOperator { algebra, blocks, hermitian: self.hermitian && other.hermitian }
    }

    pub fn tensor_power(&self, n: usize) -> BlockOperator {
        assert!(n >= 1, "tensor power needs n >= 1");
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.tensor(self);
        }
        acc
    }

    /// Traces out one factor of an operator on a declared tensor product,
    /// weighting each discarded block by its trace weight.
    pub fn partial_trace(&self, keep: Factor) -> Result<BlockOperator> {
        let (a, b) = self.algebra.factors().ok_or(Error::NotTensorProduct)?;
        let nb = b.num_blocks();
        match keep {
            Factor::First => {
                let blocks = a
                    .blocks()
                    .iter()
                    .enumerate()
                    .map(|(i, ba)| {
                        let mut acc = linalg::zeros(ba.dim, ba.dim);
                        for (j, bb) in b.blocks().iter().enumerate() {
                            let x = &self.blocks[i * nb + j];
                            for r in 0..ba.dim {
                                for c in 0..ba.dim {
                                    let mut s = c64::new(0.0, 0.0);
                                    for k in 0..bb.dim {
                                        s += x[(r * bb.dim + k, c * bb.dim + k)];
                                    }
                                    acc[(r, c)] += s * bb.weight;
                                }
                            }
                        }
                        acc
                    })
                    .collect();
                Ok(BlockOperator { algebra: a.clone(), blocks, hermitian: self.hermitian })
            }
            Factor::Second => {
                let blocks = b
                    .blocks()
                    .iter()
                    .enumerate()
                    .map(|(j, bb)| {
                        let mut acc = linalg::zeros(bb.dim, bb.dim);
                        for (i, ba) in a.blocks().iter().enumerate() {
                            let x = &self.blocks[i * nb + j];
                            for r in 0..bb.dim {
                                for c in 0..bb.dim {
                                    let mut s = c64::new(0.0, 0.0);
                                    for k in 0..ba.dim {
                                        s += x[(k * bb.dim + r, k * bb.dim + c)];
                                    }
                                    acc[(r, c)] += s * ba.weight;
                                }
                            }
                        }
                        acc
                    })
                    .collect();
                Ok(BlockOperator { algebra: b.clone(), blocks, hermitian: self.hermitian })
            }
        }
    }

    /// Largest entrywise distance to another operator.
    pub fn distance(&self, other: &BlockOperator) -> f64 {
        self.sub(other).max_abs()
    }

    /// Weighted trace norm τ(|x|).
    pub fn trace_norm(&self) -> f64 {
        self.algebra
            .blocks()
            .iter()
            .zip(&self.blocks)
            .map(|(b, m)| b.weight * linalg::singular_values(m.as_ref()).iter().sum::<f64>())
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    First,
    Second,
}

/// Orthogonal projection in a block algebra.
#[derive(Clone, Debug)]
pub struct Projection {
    pub op: BlockOperator,
}

impl Projection {
    pub fn ranks(&self) -> Vec<usize> {
        self.op.blocks().iter().map(|m| linalg::trace(m.as_ref()).re.round() as usize).collect()
    }

    pub fn complement(&self) -> Projection {
        Projection { op: BlockOperator::identity(self.op.algebra()).sub(&self.op) }
    }
}

impl Deref for Projection {
    type Target = BlockOperator;
    fn deref(&self) -> &BlockOperator {
        &self.op
    }
}

/// Positive operator read as a (sub)normalized functional `x ↦ τ(ρx)`.
#[derive(Clone, Debug)]
pub struct PositiveFunctional {
    op: BlockOperator,
    normalization: f64,
}

impl PositiveFunctional {
    pub fn new(op: BlockOperator) -> Result<Self> {
        op.require_hermitian()?;
        let op = op.hermitized();
        let ev = op.eigenvalues()?;
        let max = ev.iter().flatten().copied().fold(0.0, f64::max);
        let min = ev.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-10 * max.max(1e-300) && min < -1e-300 {
            return Err(Error::NotPositive(format!("minimum eigenvalue {min:.3e} against maximum {max:.3e}")));
        }
        let normalization = op.weighted_trace().re;
        Ok(PositiveFunctional { op, normalization })
    }

    /// Positive functional with weighted trace 1.
    pub fn state(op: BlockOperator) -> Result<Self> {
        let p = Self::new(op)?;
        if (p.normalization - 1.0).abs() > 1e-10 {
            return Err(Error::NotPositive(format!("state normalization {} differs from 1", p.normalization)));
        }
        Ok(p)
    }

    /// Positive functional with weighted trace at most 1.
    pub fn substate(op: BlockOperator) -> Result<Self> {
        let p = Self::new(op)?;
        if p.normalization > 1.0 + 1e-10 {
            return Err(Error::NotPositive(format!("substate normalization {} exceeds 1", p.normalization)));
        }
        Ok(p)
    }

    /// Skips validation; callers guarantee positivity.
    pub(crate) fn trusted(op: BlockOperator) -> Self {
        let op = op.hermitized();
        let normalization = op.weighted_trace().re;
        PositiveFunctional { op, normalization }
    }

    /// Clips tiny negative eigenvalues produced by round-off.
    pub fn from_nearly_positive(op: &BlockOperator) -> Result<Self> {
        Ok(Self::trusted(op.hermitized().spectrum()?.map(|x| x.max(0.0))))
    }

    pub fn maximally_mixed(algebra: &BlockAlgebra) -> Self {
        let id = BlockOperator::identity(algebra);
        Self::trusted(id.scale(1.0 / algebra.unit_trace()))
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn is_state(&self) -> bool {
        (self.normalization - 1.0).abs() <= 1e-10
    }

    pub fn operator(&self) -> &BlockOperator {
        &self.op
    }

    pub fn into_operator(self) -> BlockOperator {
        self.op
    }

    pub fn normalized(&self) -> Result<Self> {
        if !(self.normalization > 0.0) {
            return Err(Error::Domain("cannot normalize the zero functional".into()));
        }
        Ok(Self::trusted(self.op.scale(1.0 / self.normalization)))
    }

    pub fn tensor(&self, other: &PositiveFunctional) -> PositiveFunctional {
        Self::trusted(self.op.tensor(&other.op))
    }

    pub fn tensor_power(&self, n: usize) -> PositiveFunctional {
        Self::trusted(self.op.tensor_power(n))
    }

    /// Support projection s(ρ).
    pub fn support(&self) -> Projection {
        let spec = self.op.spectrum().expect("positive functionals are Hermitian");
        Projection { op: spec.map_on_support(|_| 1.0) }
    }
}

impl Deref for PositiveFunctional {
    type Target = BlockOperator;
    fn deref(&self) -> &BlockOperator {
        &self.op
    }
}

pub fn support(x: &PositiveFunctional) -> Projection {
    x.support()
}

/// Whether τ(ρ(1 − s(σ))) ≤ 1e-10.
pub fn support_dominated(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> bool {
    support_violation(rho, sigma).is_none()
}

/// Projection onto the part of ρ outside s(σ), when that part carries weight.
pub fn support_violation(rho: &PositiveFunctional, sigma: &PositiveFunctional) -> Option<Projection> {
    let outside = sigma.support().complement();
    let weight = rho.pair(&outside);
    if weight > 1e-10 {
        Some(outside)
    } else {
        None
    }
}

/// Pinching by the spectral projections of σ: `Σ_i E_i x E_i`.
pub fn pinch(sigma: &PositiveFunctional, x: &BlockOperator) -> Result<BlockOperator> {
    sigma.check_same_algebra(x)?;
    let spec = sigma.spectrum()?;
    let (labels, _) = spec.clusters();
    let blocks = spec
        .blocks
        .iter()
        .zip(&labels)
        .zip(x.blocks())
        .map(|((e, lab), xb)| {
            let v = &e.vectors;
            let mut y = v.adjoint() * xb * v;
            let n = y.nrows();
            for i in 0..n {
                for j in 0..n {
                    if lab[i] != lab[j] {
                        y[(i, j)] = c64::new(0.0, 0.0);
                    }
                }
            }
            v * y * v.adjoint()
        })
        .collect();
    let out = BlockOperator::from_parts(x.algebra(), blocks, x.is_hermitian());
    Ok(if x.is_hermitian() { out.hermitized() } else { out })
}

pub fn distinct_spectrum_count(sigma: &PositiveFunctional) -> usize {
    sigma.spectrum().map(|s| s.clusters().1.len()).unwrap_or(0)
}

/// Step-function truncation of the spectrum of σ to at most `l` nonzero
/// levels `m·2^{θi/l}`, each eigenvalue rounded down to its level.
pub fn spectrum_truncate(sigma: &PositiveFunctional, l: usize) -> Result<PositiveFunctional> {
    if l == 0 {
        return Err(Error::Domain("truncation needs l >= 1".into()));
    }
    let spec = sigma.spectrum()?;
    let big = spec.max();
    if !(big > 0.0) {
        return Err(Error::Domain("cannot truncate the zero operator".into()));
    }
    let cut = spec.support_cut();
    let small = spec
        .blocks
        .iter()
        .flat_map(|e| e.values.iter().copied())
        .filter(|&x| x > cut)
        .fold(f64::INFINITY, f64::min);
    let theta = big.log2() - small.log2();
    if theta <= CLUSTER_TOL {
        return Ok(PositiveFunctional::trusted(spec.map_on_support(|x| x)));
    }
    let lf = l as f64;
    let level = |y: f64| {
        let t = lf * (y.log2() - small.log2()) / theta;
        let i = (t.ceil() - 1.0).clamp(0.0, lf - 1.0);
        (small * (theta * i / lf).exp2()).min(y)
    };
    Ok(PositiveFunctional::trusted(spec.map_on_support(level)))
}

/// The θ = log₂(λ_max / λ_min on support) used by [`spectrum_truncate`].
pub fn spectral_log_range(sigma: &PositiveFunctional) -> Result<f64> {
    let spec = sigma.spectrum()?;
    let cut = spec.support_cut();
    let small = spec
        .blocks
        .iter()
        .flat_map(|e| e.values.iter().copied())
        .filter(|&x| x > cut)
        .fold(f64::INFINITY, f64::min);
    Ok(spec.max().log2() - small.log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qubit(d: &[f64]) -> PositiveFunctional {
        PositiveFunctional::new(BlockOperator::from_diag(&BlockAlgebra::full(d.len()), d).unwrap()).unwrap()
    }

    fn plus() -> BlockOperator {
        let h = c64::new(0.5, 0.0);
        BlockOperator::new(&BlockAlgebra::full(2), vec![Mat::from_fn(2, 2, |_, _| h)]).unwrap()
    }

    #[test]
    fn algebra_construction() {
        assert_eq!(BlockAlgebra::new(&[(2, 1.0)]).unwrap().total_dim(), 2);
        assert!(BlockAlgebra::classical(3).is_commutative());
        assert_eq!(BlockAlgebra::new(&[(1, 0.5), (2, 1.0)]).unwrap().total_dim(), 3);
        assert!(BlockAlgebra::new(&[]).is_err());
        assert!(BlockAlgebra::new(&[(0, 1.0)]).is_err());
        assert!(BlockAlgebra::new(&[(1, -1.0)]).is_err());
    }

    #[test]
    fn weighted_traces() {
        assert_eq!(BlockOperator::identity(&BlockAlgebra::full(2)).weighted_trace().re, 2.0);
        let hybrid = BlockAlgebra::new(&[(1, 0.5), (2, 1.0)]).unwrap();
        assert_eq!(BlockOperator::identity(&hybrid).weighted_trace().re, 2.5);
        assert_eq!(qubit(&[0.5, 0.5]).weighted_trace().re, 1.0);
    }

    #[test]
    fn eig_h_of_plus_projector() {
        let e = plus().eig_h().unwrap();
        assert_eq!(e.len(), 2);
        assert!(e[0].0.abs() < 1e-15 && (e[1].0 - 1.0).abs() < 1e-15);
        assert!(e[1].1.distance(&plus()) < 1e-12);
    }

    #[test]
    fn func_calc_examples() {
        let s = qubit(&[0.25, 0.75]);
        let r = s.func_calc(|t| t.powf(-0.5), false).unwrap();
        assert!((r.block(0)[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((r.block(0)[(1, 1)].re - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        let h = qubit(&[0.5, 0.5]).func_calc(|t| t * t.log2(), false).unwrap();
        assert!((h.block(0)[(0, 0)].re + 0.5).abs() < 1e-12);
        assert!(qubit(&[1.0, 0.0]).func_calc(f64::log2, false).is_err());
        assert!(qubit(&[1.0, 0.0]).func_calc(f64::log2, true).is_ok());
    }

    #[test]
    fn supports() {
        let p = qubit(&[0.5, 0.5, 0.0]).support();
        assert_eq!(p.ranks(), vec![2]);
        assert_eq!(qubit(&[1.0, 1e-15]).support().ranks(), vec![1]);
        assert!(support_dominated(&qubit(&[0.5, 0.5]), &qubit(&[0.25, 0.75])));
        assert!(!support_dominated(&qubit(&[1.0, 0.0]), &qubit(&[0.0, 1.0])));
    }

    #[test]
    fn tensor_of_diagonals() {
        let t = qubit(&[0.5, 0.5]).tensor(&qubit(&[0.25, 0.75]));
        let expect = [0.125, 0.375, 0.125, 0.375];
        for (i, e) in expect.iter().enumerate() {
            assert!((t.block(0)[(i, i)].re - e).abs() < 1e-15);
        }
    }

    #[test]
    fn pinch_kills_coherence() {
        let s = qubit(&[0.25, 0.75]);
        let p = pinch(&s, &plus()).unwrap();
        assert!(p.distance(&qubit(&[0.5, 0.5])) < 1e-15);
        let gap = p.scale(2.0).sub(&plus()).min_eig().unwrap();
        assert!(gap >= -1e-10);
        let flat = qubit(&[0.5, 0.5]);
        assert!(pinch(&flat, &plus()).unwrap().distance(&plus()) < 1e-15);
    }

    #[test]
    fn spectrum_counting() {
        assert_eq!(distinct_spectrum_count(&qubit(&[0.5, 0.5])), 1);
        assert_eq!(distinct_spectrum_count(&qubit(&[0.25, 0.75])), 2);
        assert_eq!(distinct_spectrum_count(&qubit(&[0.3, 0.3 + 1e-12, 0.4])), 2);
    }

    #[test]
    fn truncation_sandwich() {
        let s = qubit(&[0.05, 0.1, 0.25, 0.6]);
        let theta = spectral_log_range(&s).unwrap();
        for l in 1..=8 {
            let f = spectrum_truncate(&s, l).unwrap();
            assert!(s.sub(&f).min_eig().unwrap() >= -1e-10);
            assert!(f.sub(&s.scale((-theta / l as f64).exp2())).min_eig().unwrap() >= -1e-10);
            assert!(distinct_spectrum_count(&f) <= l + 1);
        }
        let flat = qubit(&[0.5, 0.5]);
        assert!(spectrum_truncate(&flat, 3).unwrap().distance(&flat) < 1e-15);
    }

    #[test]
    fn partial_traces() {
        let a = qubit(&[0.3, 0.7]);
        let b = qubit(&[0.25, 0.75]);
        let ab = a.tensor(&b);
        assert!(ab.partial_trace(Factor::First).unwrap().distance(&a) < 1e-15);
        assert!(ab.partial_trace(Factor::Second).unwrap().distance(&b) < 1e-15);
        let h = c64::new(0.5, 0.0);
        let z = c64::new(0.0, 0.0);
        let bell = Mat::from_fn(4, 4, |i, j| if (i == 0 || i == 3) && (j == 0 || j == 3) { h } else { z });
        let q2 = BlockAlgebra::full(2).tensor(&BlockAlgebra::full(2));
        let bell = BlockOperator::new(&q2, vec![bell]).unwrap();
        assert!(bell.partial_trace(Factor::First).unwrap().distance(&qubit(&[0.5, 0.5])) < 1e-15);
        assert!(qubit(&[1.0]).partial_trace(Factor::First).is_err());
    }

    #[test]
    fn weighted_partial_trace_keeps_trace() {
        let a = BlockAlgebra::new(&[(1, 0.5), (2, 1.0)]).unwrap();
        let b = BlockAlgebra::new(&[(2, 2.0), (1, 0.25)]).unwrap();
        let x = BlockOperator::identity(&a).tensor(&BlockOperator::identity(&b));
        let t = x.weighted_trace().re;
        for keep in [Factor::First, Factor::Second] {
            assert!((x.partial_trace(keep).unwrap().weighted_trace().re - t).abs() < 1e-12);
        }
    }
}

//! Completely positive trace-preserving maps between block algebras.
//!
//! A Kraus operator maps one input block to one output block and acts on
//! "physical" coordinates: the density ρ of a state is first weighted block by
//! block, ρ̂_a = w_a ρ_a, so that τ(ρ) = tr(ρ̂). The output density of block b
//! is then (1/w_b) Σ K ρ̂_a K*.

use faer::Mat;
use rand::Rng;

use crate::algebra::{BlockAlgebra, BlockOperator, PositiveFunctional};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::random;

#[derive(Clone, Debug)]
pub struct KrausOp {
    pub out_block: usize,
    pub in_block: usize,
    pub matrix: CMat,
}

#[derive(Clone, Debug)]
pub struct Channel {
    input: BlockAlgebra,
    output: BlockAlgebra,
    kraus: Vec<KrausOp>,
    name: String,
    replaced: Option<PositiveFunctional>,
}

const TP_TOL: f64 = 1e-9;

impl Channel {
    pub fn from_kraus(input: &BlockAlgebra, output: &BlockAlgebra, kraus: Vec<KrausOp>, name: &str) -> Result<Self> {
        for (i, k) in kraus.iter().enumerate() {
            if k.in_block >= input.num_blocks() || k.out_block >= output.num_blocks() {
                return Err(Error::Malformed(format!("Kraus operator {i} refers to a missing block")));
            }
            let (r, c) = (output.blocks()[k.out_block].dim, input.blocks()[k.in_block].dim);
            if k.matrix.nrows() != r || k.matrix.ncols() != c {
                return Err(Error::Malformed(format!(
                    "Kraus operator {i} is {}x{}, expected {r}x{c}",
                    k.matrix.nrows(),
                    k.matrix.ncols()
                )));
            }
        }
        let ch = Channel { input: input.clone(), output: output.clone(), kraus, name: name.to_string(), replaced: None };
        let dev = ch.tp_deviation();
        if dev > TP_TOL {
            return Err(Error::Precondition(format!("Kraus operators are not trace preserving (deviation {dev:.3e})")));
        }
        Ok(ch)
    }

    /// Kraus operators given as full `total_out × total_in` matrices; entries
    /// are split along the block patterns of both algebras.
    pub fn from_dense_kraus(input: &BlockAlgebra, output: &BlockAlgebra, mats: &[CMat], name: &str) -> Result<Self> {
        let (din, dout) = (input.total_dim(), output.total_dim());
        let (oi, oo) = (input.offsets(), output.offsets());
        let mut ops = Vec::new();
        for (i, m) in mats.iter().enumerate() {
            if m.nrows() != dout || m.ncols() != din {
                return Err(Error::Malformed(format!("Kraus matrix {i} must be {dout}x{din}")));
            }
            for (a, ba) in input.blocks().iter().enumerate() {
                for (b, bb) in output.blocks().iter().enumerate() {
                    let part = Mat::from_fn(bb.dim, ba.dim, |r, c| m[(oo[b] + r, oi[a] + c)]);
                    if linalg::max_abs(part.as_ref()) > 0.0 {
                        ops.push(KrausOp { out_block: b, in_block: a, matrix: part });
                    }
                }
            }
        }
        Self::from_kraus(input, output, ops, name)
    }

    /// Rebuilds Kraus operators from a Choi state on `B(C^D) ⊗ output`,
    /// `D` the total input dimension, normalized as produced by [`Channel::choi`].
    pub fn from_choi(input: &BlockAlgebra, output: &BlockAlgebra, choi: &BlockOperator, name: &str) -> Result<Self> {
        let d = input.total_dim();
        let reference = BlockAlgebra::full(d);
        let expected = reference.tensor(output);
        if choi.algebra() != &expected {
            return Err(Error::AlgebraMismatch);
        }
        let oi = input.offsets();
        let mut ops = Vec::new();
        for (b, bb) in output.blocks().iter().enumerate() {
            let scaled = linalg::scaled(choi.block(b), d as f64 * bb.weight);
            let e = linalg::eigh(scaled.as_ref());
            let top = e.values.iter().copied().fold(0.0, f64::max);
            for (k, &lam) in e.values.iter().enumerate() {
                if lam <= 1e-12 * top.max(1e-300) {
                    if lam < -1e-9 * top.max(1.0) {
                        return Err(Error::NotPositive("Choi operator is not positive".into()));
                    }
                    continue;
                }
                let s = lam.sqrt();
                for (a, ba) in input.blocks().iter().enumerate() {
                    let part = Mat::from_fn(bb.dim, ba.dim, |r, c| e.vectors[((oi[a] + c) * bb.dim + r, k)] * s);
                    if linalg::max_abs(part.as_ref()) > 1e-15 {
                        ops.push(KrausOp { out_block: b, in_block: a, matrix: part });
                    }
                }
            }
        }
        Self::from_kraus(input, output, ops, name)
    }

    pub fn identity(algebra: &BlockAlgebra) -> Self {
        let kraus = algebra
            .blocks()
            .iter()
            .enumerate()
            .map(|(a, b)| KrausOp { out_block: a, in_block: a, matrix: linalg::identity(b.dim) })
            .collect();
        Channel { input: algebra.clone(), output: algebra.clone(), kraus, name: "identity".into(), replaced: None }
    }

    /// Ψ(ρ) = τ(ρ)·σ.
    pub fn replacer(input: &BlockAlgebra, sigma: &PositiveFunctional) -> Result<Self> {
        if !sigma.is_state() {
            return Err(Error::Precondition("replacer output must be a state".into()));
        }
        let output = sigma.algebra().clone();
        let mut kraus = Vec::new();
        for (b, bb) in output.blocks().iter().enumerate() {
            let e = linalg::eigh(sigma.block(b).as_ref());
            for (j, &s) in e.values.iter().enumerate() {
                if s <= 0.0 {
                    continue;
                }
                let amp = (s * bb.weight).sqrt();
                for (a, ba) in input.blocks().iter().enumerate() {
                    for k in 0..ba.dim {
                        let m = Mat::from_fn(bb.dim, ba.dim, |r, c| if c == k { e.vectors[(r, j)] * amp } else { c64::new(0.0, 0.0) });
                        kraus.push(KrausOp { out_block: b, in_block: a, matrix: m });
                    }
                }
            }
        }
        Ok(Channel { input: input.clone(), output, kraus, name: "replacer".into(), replaced: Some(sigma.clone()) })
    }

    /// ρ ↦ (1−p)ρ + p·I/d on B(C^d).
    pub fn depolarizing(d: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("depolarizing parameter {p} outside [0,1]")));
        }
        let alg = BlockAlgebra::full(d);
        let mut kraus = vec![KrausOp { out_block: 0, in_block: 0, matrix: linalg::scaled(&linalg::identity(d), (1.0 - p).sqrt()) }];
        let amp = (p / d as f64).sqrt();
        for j in 0..d {
            for k in 0..d {
                let m = Mat::from_fn(d, d, |r, c| if r == j && c == k { c64::new(amp, 0.0) } else { c64::new(0.0, 0.0) });
                kraus.push(KrausOp { out_block: 0, in_block: 0, matrix: m });
            }
        }
        let mut ch = Channel { input: alg.clone(), output: alg, kraus, name: "depolarizing".into(), replaced: None };
        ch.compress();
        Ok(ch)
    }

    /// Classical-to-quantum channel sending point i to `states[i]`.
    pub fn preparation(states: &[PositiveFunctional]) -> Result<Self> {
        let first = states.first().ok_or_else(|| Error::Domain("preparation needs at least one state".into()))?;
        let output = first.algebra().clone();
        let input = BlockAlgebra::classical(states.len());
        let mut kraus = Vec::new();
        for (i, st) in states.iter().enumerate() {
            if st.algebra() != &output {
                return Err(Error::AlgebraMismatch);
            }
            for (b, bb) in output.blocks().iter().enumerate() {
                let e = linalg::eigh(st.block(b).as_ref());
                for (j, &s) in e.values.iter().enumerate() {
                    if s <= 0.0 {
                        continue;
                    }
                    let amp = (s * bb.weight).sqrt();
                    let m = Mat::from_fn(bb.dim, 1, |r, _| e.vectors[(r, j)] * amp);
                    kraus.push(KrausOp { out_block: b, in_block: i, matrix: m });
                }
            }
        }
        Self::from_kraus(&input, &output, kraus, "preparation")
    }

    pub fn input(&self) -> &BlockAlgebra {
        &self.input
    }

    pub fn output(&self) -> &BlockAlgebra {
        &self.output
    }

    pub fn kraus(&self) -> &[KrausOp] {
        &self.kraus
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// Output state when this is a replacer channel.
    pub fn replaced_state(&self) -> Option<&PositiveFunctional> {
        self.replaced.as_ref()
    }

    /// Largest entry of Σ K*K − 1 over the input blocks.
    pub fn tp_deviation(&self) -> f64 {
        let mut acc: Vec<CMat> = self.input.blocks().iter().map(|b| linalg::zeros(b.dim, b.dim)).collect();
        for k in &self.kraus {
            acc[k.in_block] += k.matrix.adjoint() * &k.matrix;
        }
        acc.iter().map(|m| linalg::max_abs((m - linalg::identity(m.nrows())).as_ref())).fold(0.0, f64::max)
    }

    /// Applies the channel to any operator on the input algebra.
    pub fn apply_operator(&self, x: &BlockOperator) -> Result<BlockOperator> {
        if x.algebra() != &self.input {
            return Err(Error::AlgebraMismatch);
        }
        let mut out: Vec<CMat> = self.output.blocks().iter().map(|b| linalg::zeros(b.dim, b.dim)).collect();
        for k in &self.kraus {
            let w_in = self.input.blocks()[k.in_block].weight;
            let y = &k.matrix * x.block(k.in_block) * k.matrix.adjoint();
            out[k.out_block] += linalg::scaled(&y, w_in);
        }
        for (m, b) in out.iter_mut().zip(self.output.blocks()) {
            *m = linalg::scaled(m, 1.0 / b.weight);
        }
        let op = BlockOperator::new(&self.output, out)?;
        Ok(if x.is_hermitian() { op.hermitized() } else { op })
    }

    pub fn apply(&self, rho: &PositiveFunctional) -> Result<PositiveFunctional> {
        if let Some(s) = &self.replaced {
            if rho.algebra() != &self.input {
                return Err(Error::AlgebraMismatch);
            }
            return PositiveFunctional::from_nearly_positive(&s.scale(rho.normalization()));
        }
        PositiveFunctional::from_nearly_positive(&self.apply_operator(rho)?)
    }

    /// `second ∘ first`.
    pub fn compose(second: &Channel, first: &Channel) -> Result<Channel> {
        if first.output != second.input {
            return Err(Error::AlgebraMismatch);
        }
        let name = format!("{}∘{}", second.name, first.name);
        if let Some(s) = &second.replaced {
            let mut c = Channel::replacer(&first.input, s)?;
            c.name = name;
            return Ok(c);
        }
        let mut kraus = Vec::new();
        for k2 in &second.kraus {
            for k1 in &first.kraus {
                if k1.out_block == k2.in_block {
                    kraus.push(KrausOp { out_block: k2.out_block, in_block: k1.in_block, matrix: &k2.matrix * &k1.matrix });
                }
            }
        }
        let mut c = Channel { input: first.input.clone(), output: second.output.clone(), kraus, name, replaced: None };
        c.compress();
        Ok(c)
    }

    pub fn tensor(&self, other: &Channel) -> Channel {
        let input = self.input.tensor(&other.input);
        let output = self.output.tensor(&other.output);
        let name = format!("{}⊗{}", self.name, other.name);
        if let (Some(a), Some(b)) = (&self.replaced, &other.replaced) {
            let mut c = Channel::replacer(&input, &a.tensor(b)).expect("product of states is a state");
            c.name = name;
            return c;
        }
        let (ni, no) = (other.input.num_blocks(), other.output.num_blocks());
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(KrausOp {
                    out_block: a.out_block * no + b.out_block,
                    in_block: a.in_block * ni + b.in_block,
                    matrix: linalg::kron(a.matrix.as_ref(), b.matrix.as_ref()),
                });
            }
        }
        let mut c = Channel { input, output, kraus, name, replaced: None };
        c.compress();
        c
    }

    pub fn tensor_power(&self, n: usize) -> Channel {
        assert!(n >= 1, "tensor power needs n >= 1");
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.tensor(self);
        }
        acc
    }

    /// Re-derives a minimal Kraus set per (output block, input block) pair when
    /// the current one is larger than the Choi rank bound.
    fn compress(&mut self) {
        let ni = self.input.num_blocks();
        let no = self.output.num_blocks();
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); ni * no];
        for (i, k) in self.kraus.iter().enumerate() {
            groups[k.out_block * ni + k.in_block].push(i);
        }
        let mut kraus = Vec::new();
        for (g, idx) in groups.iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            let (b, a) = (g / ni, g % ni);
            let (db, da) = (self.output.blocks()[b].dim, self.input.blocks()[a].dim);
            if idx.len() <= da * db {
                kraus.extend(idx.iter().map(|&i| self.kraus[i].clone()));
                continue;
            }
            let n = da * db;
            let mut c = linalg::zeros(n, n);
            for &i in idx {
                let m = &self.kraus[i].matrix;
                let v = Mat::from_fn(n, 1, |k, _| m[(k % db, k / db)]);
                c += &v * v.adjoint();
            }
            let e = linalg::eigh(c.as_ref());
            let top = e.values.iter().copied().fold(0.0, f64::max);
            for (k, &lam) in e.values.iter().enumerate() {
                if lam > 1e-14 * top {
                    let s = lam.sqrt();
                    let m = Mat::from_fn(db, da, |r, col| e.vectors[(col * db + r, k)] * s);
                    kraus.push(KrausOp { out_block: b, in_block: a, matrix: m });
                }
            }
        }
        self.kraus = kraus;
    }

    /// Choi state (id ⊗ Φ)(Ω) on `B(C^D) ⊗ output` with Ω the normalized
    /// maximally entangled state over the whole input basis (pinched to the
    /// input blocks). Its reduced state on the reference is I/D.
    pub fn choi(&self) -> PositiveFunctional {
        let d = self.input.total_dim();
        let reference = BlockAlgebra::full(d);
        let algebra = reference.tensor(&self.output);
        let oi = self.input.offsets();
        let mut blocks: Vec<CMat> = self.output.blocks().iter().map(|b| linalg::zeros(d * b.dim, d * b.dim)).collect();
        for k in &self.kraus {
            let db = self.output.blocks()[k.out_block].dim;
            let da = self.input.blocks()[k.in_block].dim;
            let mut v = linalg::zeros(d * db, 1);
            for j in 0..da {
                for r in 0..db {
                    v[((oi[k.in_block] + j) * db + r, 0)] = k.matrix[(r, j)];
                }
            }
            blocks[k.out_block] += &v * v.adjoint();
        }
        for (m, b) in blocks.iter_mut().zip(self.output.blocks()) {
            *m = linalg::scaled(m, 1.0 / (d as f64 * b.weight));
        }
        let op = BlockOperator::new(&algebra, blocks).expect("shapes match").hermitized();
        PositiveFunctional::from_nearly_positive(&op).expect("Choi operator is Hermitian")
    }

    /// Identity on a reference algebra tensored with this channel.
    pub fn extend(&self, reference: &BlockAlgebra) -> Channel {
        Channel::identity(reference).tensor(self)
    }
}

/// Applies a channel through its Choi state: Φ(ρ)_phys = D·tr_R[(ρ̂ᵀ ⊗ 1) J_phys].
pub fn apply_via_choi(input: &BlockAlgebra, output: &BlockAlgebra, choi: &BlockOperator, rho: &BlockOperator) -> Result<BlockOperator> {
    if rho.algebra() != input {
        return Err(Error::AlgebraMismatch);
    }
    let d = input.total_dim();
    let mut x = linalg::zeros(d, d);
    for ((m, b), o) in rho.blocks().iter().zip(input.blocks()).zip(input.offsets()) {
        for i in 0..b.dim {
            for j in 0..b.dim {
                x[(o + i, o + j)] = m[(i, j)] * b.weight;
            }
        }
    }
    let blocks = output
        .blocks()
        .iter()
        .enumerate()
        .map(|(bi, bb)| {
            let j = choi.block(bi);
            let db = bb.dim;
            Mat::from_fn(db, db, |r, s| {
                let mut acc = c64::new(0.0, 0.0);
                for g in 0..d {
                    for h in 0..d {
                        if x[(g, h)] != c64::new(0.0, 0.0) {
                            acc += x[(g, h)] * j[(g * db + r, h * db + s)];
                        }
                    }
                }
                acc * d as f64
            })
        })
        .collect();
    BlockOperator::new(output, blocks)
}

/// Random channel between block algebras from a Haar isometry
/// C^{d_a} → C^{rank} ⊗ C^{D_out} for every input block.
pub fn random_channel_between(input: &BlockAlgebra, output: &BlockAlgebra, rank: usize, rng: &mut impl Rng) -> Result<Channel> {
    let dout = output.total_dim();
    if rank == 0 {
        return Err(Error::Domain("Kraus rank must be at least 1".into()));
    }
    let oo = output.offsets();
    let mut kraus = Vec::new();
    for (a, ba) in input.blocks().iter().enumerate() {
        if rank * dout < ba.dim {
            return Err(Error::Domain(format!("rank {rank} x output {dout} cannot host input block of dim {}", ba.dim)));
        }
        let v = random::isometry(rank * dout, ba.dim, rng);
        for i in 0..rank {
            for (b, bb) in output.blocks().iter().enumerate() {
                let m = Mat::from_fn(bb.dim, ba.dim, |r, c| v[(i * dout + oo[b] + r, c)]);
                kraus.push(KrausOp { out_block: b, in_block: a, matrix: m });
            }
        }
    }
    let mut c = Channel::from_kraus(input, output, kraus, "random")?;
    c.compress();
    Ok(c)
}

pub fn random_channel(d_in: usize, d_out: usize, rank: usize, seed: u64) -> Result<Channel> {
    let mut rng = random::rng(seed);
    random_channel_between(&BlockAlgebra::full(d_in), &BlockAlgebra::full(d_out), rank, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Factor;

    fn qubit(d: &[f64]) -> PositiveFunctional {
        PositiveFunctional::new(BlockOperator::from_diag(&BlockAlgebra::full(d.len()), d).unwrap()).unwrap()
    }

    #[test]
    fn identity_and_replacer() {
        let mut rng = random::rng(3);
        let rho = random::state(&BlockAlgebra::full(2), None, &mut rng);
        let id = Channel::identity(&BlockAlgebra::full(2));
        assert!(id.apply(&rho).unwrap().distance(&rho) < 1e-14);
        let sigma = qubit(&[0.25, 0.75]);
        let rep = Channel::replacer(&BlockAlgebra::full(2), &sigma).unwrap();
        assert!(rep.apply_operator(&rho).unwrap().distance(&sigma) < 1e-12);
        let dep = Channel::depolarizing(2, 1.0).unwrap();
        assert!(dep.apply(&rho).unwrap().distance(&qubit(&[0.5, 0.5])) < 1e-14);
    }

    #[test]
    fn choi_forms() {
        let id = Channel::identity(&BlockAlgebra::full(2));
        let j = id.choi();
        let h = c64::new(0.5, 0.0);
        let z = c64::new(0.0, 0.0);
        let bell = Mat::from_fn(4, 4, |i, k| if (i == 0 || i == 3) && (k == 0 || k == 3) { h } else { z });
        assert!(linalg::max_abs((j.block(0) - &bell).as_ref()) < 1e-15);
        let sigma = qubit(&[0.25, 0.75]);
        let rep = Channel::replacer(&BlockAlgebra::full(2), &sigma).unwrap();
        let expect = PositiveFunctional::maximally_mixed(&BlockAlgebra::full(2)).tensor(&sigma);
        assert!(rep.choi().distance(&expect) < 1e-14);
    }

    #[test]
    fn random_channels_are_cptp_and_reproducible() {
        let a = random_channel(2, 3, 2, 11).unwrap();
        let b = random_channel(2, 3, 2, 11).unwrap();
        assert!(a.tp_deviation() < 1e-10);
        assert!(a.choi().distance(&b.choi()) == 0.0);
        let j = a.choi();
        assert!(j.min_eig().unwrap() > -1e-10);
        let marg = j.partial_trace(Factor::First).unwrap();
        assert!(marg.distance(&PositiveFunctional::maximally_mixed(&BlockAlgebra::full(2))) < 1e-12);
        let u = random_channel(3, 3, 1, 5).unwrap();
        assert_eq!(u.kraus().len(), 1);
    }

    #[test]
    fn block_algebra_channels() {
        let mut rng = random::rng(21);
        let inp = BlockAlgebra::new(&[(1, 0.5), (2, 1.0)]).unwrap();
        let out = BlockAlgebra::new(&[(2, 2.0), (1, 1.0)]).unwrap();
        let ch = random_channel_between(&inp, &out, 2, &mut rng).unwrap();
        let rho = random::state(&inp, None, &mut rng);
        let y = ch.apply(&rho).unwrap();
        assert!((y.normalization() - 1.0).abs() < 1e-12);
        let via = apply_via_choi(&inp, &out, ch.choi().operator(), &rho).unwrap();
        assert!(via.distance(&y) < 1e-12);
        let rebuilt = Channel::from_choi(&inp, &out, ch.choi().operator(), "rebuilt").unwrap();
        assert!(rebuilt.apply(&rho).unwrap().distance(&y) < 1e-12);
    }

    #[test]
    fn composition_and_tensor() {
        let phi = random_channel(2, 2, 2, 1).unwrap();
        let id = Channel::identity(&BlockAlgebra::full(2));
        let c = Channel::compose(&id, &phi).unwrap();
        assert!(c.choi().distance(&phi.choi()) < 1e-12);
        let mut rng = random::rng(2);
        let rho = random::state(&BlockAlgebra::full(2), None, &mut rng);
        let two = phi.tensor_power(2);
        let lhs = two.apply(&rho.tensor(&rho)).unwrap();
        let one = phi.apply(&rho).unwrap();
        assert!(lhs.distance(&one.tensor(&one)) < 1e-12);
        let sigma = qubit(&[0.25, 0.75]);
        let rep = Channel::replacer(&BlockAlgebra::full(2), &sigma).unwrap();
        let rep2 = rep.tensor_power(2);
        let direct = Channel::replacer(&BlockAlgebra::full(2).tensor(&BlockAlgebra::full(2)), &sigma.tensor(&sigma)).unwrap();
        assert!(rep2.choi().distance(&direct.choi()) < 1e-14);
    }

    #[test]
    fn preparation_channel() {
        let a = qubit(&[1.0, 0.0]);
        let b = qubit(&[0.5, 0.5]);
        let prep = Channel::preparation(&[a.clone(), b.clone()]).unwrap();
        let p = PositiveFunctional::new(BlockOperator::from_diag(&BlockAlgebra::classical(2), &[0.25, 0.75]).unwrap()).unwrap();
        let out = prep.apply(&p).unwrap();
        assert!(out.distance(&a.scale(0.25).add(&b.scale(0.75))) < 1e-14);
    }
}

//! Dense complex matrix helpers on top of faer.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef, Side};

pub use faer::c64;

pub type CMat = Mat<c64>;

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Eigh {
    /// `V diag(f(λ)) V*`.
    pub fn rebuild(&self, f: impl Fn(f64) -> f64) -> CMat {
        let d: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        rebuild_with(&self.vectors, &d)
    }
}

pub fn rebuild_with(v: &CMat, d: &[f64]) -> CMat {
    let n = v.nrows();
    let mut scaled = v.clone();
    for (j, &dj) in d.iter().enumerate() {
        if dj == 0.0 {
            for i in 0..n {
                scaled[(i, j)] = c64::new(0.0, 0.0);
            }
        } else if dj != 1.0 {
            for i in 0..n {
                scaled[(i, j)] *= dj;
            }
        }
    }
    &scaled * v.adjoint()
}

pub fn scaled(a: &CMat, s: f64) -> CMat {
    a * faer::Scale(c64::new(s, 0.0))
}

pub fn hermitize(a: MatRef<'_, c64>) -> CMat {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn eigh(a: MatRef<'_, c64>) -> Eigh {
    let n = a.nrows();
    if n == 0 {
        return Eigh { values: vec![], vectors: Mat::zeros(0, 0) };
    }
    if n == 1 {
        return Eigh { values: vec![a[(0, 0)].re], vectors: Mat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0)) };
    }
    let h = hermitize(a);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .expect("self-adjoint eigendecomposition did not converge");
    let s = evd.S();
    let mut values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let mut vectors = evd.U().to_owned();
    // faer returns ascending order already; keep a guard for safety
    if values.windows(2).any(|w| w[0] > w[1]) {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let v0 = vectors.clone();
        vectors = Mat::from_fn(n, n, |i, j| v0[(i, idx[j])]);
        values = idx.iter().map(|&i| values[i]).collect();
    }
    Eigh { values, vectors }
}

pub fn eigvalsh(a: MatRef<'_, c64>) -> Vec<f64> {
    let n = a.nrows();
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![a[(0, 0)].re];
    }
    let h = hermitize(a);
    let mut v = h
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("self-adjoint eigenvalues did not converge");
    v.sort_by(f64::total_cmp);
    v
}

pub fn singular_values(a: MatRef<'_, c64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return vec![];
    }
    match a.singular_values() {
        Ok(v) => v,
        Err(_) => dilation_svd(a).1,
    }
}

/// SVD through the eigendecomposition of [[0, a], [a*, 0]], whose spectrum
/// is ±s with eigenvectors (u, ±v)/√2. Slower, but never fails to converge.
fn dilation_svd(a: MatRef<'_, c64>) -> (CMat, Vec<f64>, CMat) {
    let (r, c) = (a.nrows(), a.ncols());
    let k = r.min(c);
    let zero = c64::new(0.0, 0.0);
    let h = Mat::from_fn(r + c, r + c, |i, j| match (i < r, j < r) {
        (true, false) => a[(i, j - r)],
        (false, true) => a[(j, i - r)].conj(),
        _ => zero,
    });
    let e = eigh(h.as_ref());
    let root2 = std::f64::consts::SQRT_2;
    // the k largest eigenvalues, descending
    let cols: Vec<usize> = (0..k).map(|t| r + c - 1 - t).collect();
    let u = Mat::from_fn(r, k, |i, t| e.vectors[(i, cols[t])] * root2);
    let v = Mat::from_fn(c, k, |i, t| e.vectors[(r + i, cols[t])] * root2);
    let s = cols.iter().map(|&j| e.values[j].max(0.0)).collect();
    (u, s, v)
}

/// Thin SVD `a = U diag(s) V*`.
pub fn svd(a: MatRef<'_, c64>) -> (CMat, Vec<f64>, CMat) {
    let (r, c) = (a.nrows(), a.ncols());
    if r == 0 || c == 0 {
        return (Mat::zeros(r, 0), vec![], Mat::zeros(c, 0));
    }
    let dec = match a.thin_svd() {
        Ok(d) => d,
        Err(_) => return dilation_svd(a),
    };
    let s = dec.S();
    let values = (0..r.min(c)).map(|i| s[i].re).collect();
    (dec.U().to_owned(), values, dec.V().to_owned())
}

pub fn nuclear_norm(a: MatRef<'_, c64>) -> f64 {
    singular_values(a).iter().sum()
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn zeros(r: usize, c: usize) -> CMat {
    Mat::zeros(r, c)
}

pub fn diag(d: &[f64]) -> CMat {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(d[i], 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    a.kron(b)
}

pub fn trace(a: MatRef<'_, c64>) -> c64 {
    let mut t = c64::new(0.0, 0.0);
    for i in 0..a.nrows().min(a.ncols()) {
        t += a[(i, i)];
    }
    t
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut t = c64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            t += a[(i, k)] * b[(k, i)];
        }
    }
    t
}

pub fn frobenius(a: MatRef<'_, c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn inverse(a: MatRef<'_, c64>) -> CMat {
    a.partial_piv_lu().inverse()
}

/// Unitary factor of a QR decomposition with the phases of R's diagonal removed.
pub fn qr_unitary(a: MatRef<'_, c64>) -> CMat {
    let qr = a.qr();
    let mut q = qr.compute_thin_Q();
    let r = qr.thin_R();
    for j in 0..q.ncols() {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c64::new(1.0, 0.0) };
        for i in 0..q.nrows() {
            q[(i, j)] *= ph;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_reconstructs() {
        let a = Mat::from_fn(3, 3, |i, j| c64::new((i + j) as f64, i as f64 - j as f64));
        let e = eigh(a.as_ref());
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let r = e.rebuild(|x| x);
        assert!(frobenius((&r - &a).as_ref()) < 1e-12);
    }

    #[test]
    fn dilation_svd_reconstructs() {
        let a = Mat::from_fn(4, 3, |i, j| c64::new((i * 2 + j) as f64 % 3.0 - 1.0, (i + j) as f64 * 0.25));
        let (u, s, v) = dilation_svd(a.as_ref());
        let r = &u * diag(&s) * v.adjoint();
        assert!(frobenius((&r - &a).as_ref()) < 1e-12);
        let direct = singular_values(a.as_ref());
        for (x, y) in s.iter().zip(&direct) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn kron_of_identities() {
        let k = kron(identity(2).as_ref(), identity(3).as_ref());
        assert!(frobenius((&k - identity(6)).as_ref()) < 1e-15);
    }

    #[test]
    fn qr_gives_unitary() {
        let a = Mat::from_fn(4, 4, |i, j| c64::new((i * 3 + j) as f64 % 5.0, (i + 2 * j) as f64 % 3.0 - 1.0));
        let q = qr_unitary(a.as_ref());
        let p = q.adjoint() * &q;
        assert!(frobenius((&p - identity(4)).as_ref()) < 1e-12);
    }
}

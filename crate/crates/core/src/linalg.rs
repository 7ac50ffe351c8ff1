//! Dense complex linear algebra used throughout the crate.
//!
//! Tensor products follow the row-major Kronecker convention: for a system
//! ordered `S_0 ⊗ S_1 ⊗ … ⊗ S_k`, the last subsystem index varies fastest.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMat>) -> CMat {
    let mut out = identity(1);
    for f in factors {
        out = kron(&out, f);
    }
    out
}

/// Plain transpose (no conjugation) in the computational basis.
pub fn transpose(m: &CMat) -> CMat {
    m.transpose()
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn trace(m: &CMat) -> Complex64 {
    m.trace()
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Deviation from Hermiticity, `max |M - M†|`.
pub fn hermiticity_residual(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix (only the Hermitian part is
/// used). Eigenvalues are returned in ascending order with matching columns.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitian_part(m);
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    eigh(m).0
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &CMat) -> f64 {
    eigvalsh(m).last().copied().unwrap_or(0.0)
}

/// Spectral norm.
pub fn operator_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let g = m.adjoint() * m;
    max_eigenvalue(&g).max(0.0).sqrt()
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn spectral_map(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let s = f(v);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vecs.adjoint()
}

/// Principal square root of a PSD matrix; tiny negative eigenvalues clip to 0.
pub fn psd_sqrt(m: &CMat) -> CMat {
    spectral_map(m, |v| v.max(0.0).sqrt())
}

pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

/// Decompose a flat index into per-subsystem indices (row-major).
fn split_index(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
}

/// Partial trace of `op` over every subsystem not listed in `keep`.
///
/// `keep` must be strictly increasing; the result acts on the kept
/// subsystems in their original order.
pub fn partial_trace(op: &CMat, dims: &[usize], keep: &[usize]) -> CMat {
    let total: usize = dims.iter().product();
    assert_eq!(op.nrows(), total, "operator does not match subsystem dims");
    assert!(keep.windows(2).all(|w| w[0] < w[1]));
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let out_dim: usize = kept_dims.iter().product();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let mut out = CMat::zeros(out_dim, out_dim);
    let mut ri = vec![0; dims.len()];
    let mut ci = vec![0; dims.len()];
    for r in 0..total {
        split_index(r, dims, &mut ri);
        let rk = keep.iter().fold(0, |acc, &k| acc * dims[k] + ri[k]);
        for c in 0..total {
            split_index(c, dims, &mut ci);
            if traced.iter().any(|&k| ri[k] != ci[k]) {
                continue;
            }
            let ck = keep.iter().fold(0, |acc, &k| acc * dims[k] + ci[k]);
            out[(rk, ck)] += op[(r, c)];
        }
    }
    out
}

/// Embed an operator acting on the contiguous subsystem range
/// `first..first+span` into the full space.
pub fn embed(op: &CMat, dims: &[usize], first: usize, span: usize) -> CMat {
    let left: usize = dims[..first].iter().product();
    let mid: usize = dims[first..first + span].iter().product();
    let right: usize = dims[first + span..].iter().product();
    assert_eq!(op.nrows(), mid, "operator does not match embedded subsystems");
    kron(&kron(&identity(left), op), &identity(right))
}

/// Apply `op` (acting on subsystems `first..first+span`) to a state vector
/// without forming the full operator.
pub fn apply_local(state: &CVec, dims: &[usize], first: usize, span: usize, op: &CMat) -> CVec {
    let left: usize = dims[..first].iter().product();
    let mid: usize = dims[first..first + span].iter().product();
    let right: usize = dims[first + span..].iter().product();
    assert_eq!(state.len(), left * mid * right);
    assert_eq!(op.nrows(), mid);
    let mut out = CVec::zeros(state.len());
    for l in 0..left {
        for r in 0..right {
            for i in 0..mid {
                let mut acc = ZERO;
                for j in 0..mid {
                    let v = op[(i, j)];
                    if v != ZERO {
                        acc += v * state[(l * mid + j) * right + r];
                    }
                }
                out[(l * mid + i) * right + r] = acc;
            }
        }
    }
    out
}

/// Reduced state of the trailing subsystem of dimension `keep_dim` for the
/// pure (possibly unnormalised) vector `psi`: `Tr_rest |psi><psi|`.
pub fn reduce_to_last(psi: &CVec, keep_dim: usize) -> CMat {
    assert_eq!(psi.len() % keep_dim, 0);
    let rest = psi.len() / keep_dim;
    let mut out = CMat::zeros(keep_dim, keep_dim);
    for k in 0..rest {
        for i in 0..keep_dim {
            let a = psi[k * keep_dim + i];
            if a == ZERO {
                continue;
            }
            for j in 0..keep_dim {
                out[(i, j)] += a * psi[k * keep_dim + j].conj();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_y() -> CMat {
        CMat::from_row_slice(2, 2, &[ZERO, c64(0.0, -1.0), c64(0.0, 1.0), ZERO])
    }

    #[test]
    fn eigh_sorted_ascending() {
        let vals = eigvalsh(&pauli_y());
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = CMat::from_row_slice(2, 2, &[c64(0.3, 0.0), c64(0.1, 0.2), c64(0.1, -0.2), c64(0.7, 0.0)]);
        let b = CMat::from_row_slice(2, 2, &[c64(0.5, 0.0), c64(0.0, 0.5), c64(0.0, -0.5), c64(0.5, 0.0)]);
        let ab = kron(&a, &b);
        assert!(max_abs_diff(&partial_trace(&ab, &[2, 2], &[0]), &a) < 1e-14);
        assert!(max_abs_diff(&partial_trace(&ab, &[2, 2], &[1]), &b) < 1e-14);
    }

    #[test]
    fn apply_local_matches_embedding() {
        let dims = [2, 3, 2];
        let psi = CVec::from_fn(12, |i, _| c64(i as f64 * 0.1, 1.0 - i as f64 * 0.05));
        let op = CMat::from_fn(3, 3, |i, j| c64((i + 2 * j) as f64, (i as f64) - (j as f64)));
        let direct = embed(&op, &dims, 1, 1) * &psi;
        let local = apply_local(&psi, &dims, 1, 1, &op);
        assert!((direct - local).norm() < 1e-12);
    }

    #[test]
    fn reduce_to_last_matches_partial_trace() {
        let psi = CVec::from_fn(8, |i, _| c64((i as f64).sin(), (i as f64).cos()));
        let full = outer(&psi, &psi);
        let pt = partial_trace(&full, &[2, 2, 2], &[2]);
        assert!(max_abs_diff(&pt, &reduce_to_last(&psi, 2)) < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = CMat::from_row_slice(2, 2, &[c64(2.0, 0.0), c64(0.5, 0.5), c64(0.5, -0.5), c64(1.0, 0.0)]);
        let s = psd_sqrt(&m);
        assert!(max_abs_diff(&(&s * &s), &m) < 1e-12);
    }
}

//! Real symmetric embedding of complex Hermitian matrices.
//!
//! `X ↦ [[Re X, −Im X], [Im X, Re X]]`. The image of a Hermitian matrix is
//! symmetric with every eigenvalue of `X` appearing twice, so `X ⪰ 0` iff
//! the image is.

use nalgebra::DMatrix;

use crate::linalg::{c64, CMat};

pub fn realify(x: &CMat) -> DMatrix<f64> {
    let (r, c) = x.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = x[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + c)] = z.re;
            out[(i + r, j)] = z.im;
            out[(i, j + c)] = -z.im;
        }
    }
    out
}

/// Left inverse of [`realify`], averaging the two copies of each part.
pub fn derealify(m: &DMatrix<f64>) -> CMat {
    let r = m.nrows() / 2;
    let c = m.ncols() / 2;
    CMat::from_fn(r, c, |i, j| {
        let re = 0.5 * (m[(i, j)] + m[(i + r, j + c)]);
        let im = 0.5 * (m[(i + r, j)] - m[(i, j + c)]);
        c64(re, im)
    })
}

/// Positions and signs in the embedding of a complex entry `(p, q)` of an
/// `n × n` matrix: `(row, col, weight of Re, weight of Im)`.
pub fn embedded_positions(p: usize, q: usize, n: usize) -> [(usize, usize, f64, f64); 4] {
    [
        (p, q, 1.0, 0.0),
        (p + n, q + n, 1.0, 0.0),
        (p + n, q, 0.0, 1.0),
        (p, q + n, 0.0, -1.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, ZERO};

    fn sym_eigs(m: &DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn identity_maps_to_identity() {
        let r = realify(&linalg::identity(2));
        assert_eq!(r, DMatrix::identity(4, 4));
    }

    #[test]
    fn pauli_y_spectrum_doubles() {
        let y = CMat::from_row_slice(2, 2, &[ZERO, c64(0.0, -1.0), c64(0.0, 1.0), ZERO]);
        let e = sym_eigs(&realify(&y));
        for (got, want) in e.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn psd_spectrum_doubles() {
        let u = crate::generators::random_unitary(&mut crate::generators::rng(8), 2);
        let d = CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, c64(3.0, 0.0)]);
        let x = &u * d * u.adjoint();
        let e = sym_eigs(&realify(&x));
        for (got, want) in e.iter().zip([0.0, 0.0, 3.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip() {
        let h = crate::generators::random_hermitian(&mut crate::generators::rng(2), 3);
        let back = derealify(&realify(&h));
        assert!(linalg::max_abs_diff(&back, &h) < 1e-15);
        assert!(linalg::hermiticity_residual(&back) < 1e-15);
    }
}

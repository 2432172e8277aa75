//! Dense linear-algebra helpers shared by every module.

use nalgebra::{Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::{CMatrix, RMatrix};

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// ‖A − A†‖ in the max-entry norm.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut err: f64 = 0.0;
    for i in 0..n {
        for k in i..n {
            err = err.max((m[(i, k)] - m[(k, i)].conj()).norm());
        }
    }
    err
}

/// ‖U†U − I‖ in the max-entry norm.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &identity(u.nrows()))
}

/// (A + A†)/2
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.trace()
}

/// Hilbert–Schmidt inner product Tr(A†B) without forming the product.
pub fn hs(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn hs_norm_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Spectral decomposition of a Hermitian matrix with eigenvalues ascending.
///
/// Only the Hermitian part of the input is used.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &RMatrix) -> Vec<f64> {
    let sym = (m + m.transpose()).scale(0.5);
    let mut v: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Rebuilds `V diag(f(w)) V†` from a spectral decomposition.
pub fn spectral_apply<F>(values: &[f64], vectors: &CMatrix, f: F) -> CMatrix
where
    F: Fn(f64) -> Complex64,
{
    let mut scaled = vectors.clone();
    for (col, &w) in values.iter().enumerate() {
        let fw = f(w);
        for r in 0..scaled.nrows() {
            scaled[(r, col)] *= fw;
        }
    }
    scaled * vectors.adjoint()
}

/// exp(−i t H) for Hermitian `H`, through its eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let (w, v) = hermitian_eigen(h);
    spectral_apply(&w, &v, |x| Complex64::from_polar(1.0, -t * x))
}

/// Integer matrix power by repeated squaring.
pub fn mat_pow(m: &CMatrix, mut n: usize) -> CMatrix {
    let mut result = identity(m.nrows());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Eigenvalues of a (numerically) normal complex matrix via complex Schur form.
pub fn complex_eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    let schur = Schur::new(m.clone());
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Eigenphases in (−π, π] of a unitary matrix, sorted ascending.
pub fn unitary_eigenphases(u: &CMatrix) -> Vec<f64> {
    let mut phases: Vec<f64> = complex_eigenvalues(u).iter().map(|z| z.arg()).collect();
    phases.sort_by(f64::total_cmp);
    phases
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_pauli_x() {
        let x = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let t = 0.3_f64;
        let u = expm_hermitian(&x, t);
        // exp(-i t X) = cos t I - i sin t X
        let want = CMatrix::from_row_slice(
            2,
            2,
            &[c(t.cos(), 0.), c(0., -t.sin()), c(0., -t.sin()), c(t.cos(), 0.)],
        );
        assert!(max_abs_diff(&u, &want) < 1e-14);
        assert!(unitarity_error(&u) < 1e-14);
    }

    #[test]
    fn mat_pow_matches_repeated_product() {
        let m = CMatrix::from_fn(3, 3, |i, k| c((i + 2 * k) as f64 * 0.1, (i as f64) - 0.5 * k as f64));
        let mut direct = identity(3);
        for _ in 0..7 {
            direct = &direct * &m;
        }
        assert!(max_abs_diff(&mat_pow(&m, 7), &direct) < 1e-9);
        assert!(max_abs_diff(&mat_pow(&m, 0), &identity(3)) < 1e-15);
    }

    #[test]
    fn eigenphases_of_diagonal_unitary() {
        let phases = [0.3, -1.2, 2.9, 1.0];
        let u = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            4,
            phases.iter().map(|&p| Complex64::from_polar(1.0, p)),
        ));
        let got = unitary_eigenphases(&u);
        let mut want = phases.to_vec();
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

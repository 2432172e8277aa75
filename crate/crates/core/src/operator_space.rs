//! Spin algebra, the generalized Gell-Mann operator basis and Bloch-vector
//! coordinates.
//!
//! Every density matrix of a `d`-level system is written as
//! `ρ = I/d + Σ_α r_α E_α` over an orthonormal set of `d² − 1` traceless
//! Hermitian operators `E_α`. The basis ordering is fixed: the symmetric
//! off-diagonal block, then the antisymmetric block (both lexicographic in
//! `(i, k)`, `i < k`), then the `d − 1` diagonal elements.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, c};
use crate::{CMatrix, CVector, RVector};

/// Tolerance on Hermiticity for user-supplied operators.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Tolerance on unit trace when accepting density matrices.
pub const TRACE_TOL: f64 = 1e-10;

/// A spin of magnitude `j`, stored as `2j` so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinSystem {
    twice_j: u32,
}

impl SpinSystem {
    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !twice.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "spin j = {j} must be a positive half-integer"
            )));
        }
        Ok(SpinSystem {
            twice_j: twice.round() as u32,
        })
    }

    pub fn from_dim(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(format!("d = {d} < 2")));
        }
        Ok(SpinSystem {
            twice_j: (d - 1) as u32,
        })
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.twice_j as usize + 1
    }
}

/// A Hermitian matrix with a human-readable label.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
    label: String,
}

impl HermitianOperator {
    /// Validates Hermiticity (max-entry residual below 1e−12) and finiteness.
    pub fn new(matrix: CMatrix, label: impl Into<String>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("operator has non-finite entries".into()));
        }
        let err = linalg::hermiticity_error(&matrix);
        if err >= HERMITICITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "operator is not Hermitian (residual {err:e})"
            )));
        }
        Ok(HermitianOperator {
            matrix: linalg::hermitian_part(&matrix),
            label: label.into(),
        })
    }

    /// Keeps only the Hermitian part of `matrix`; used for numerically
    /// evolved operators whose residual is round-off.
    pub fn from_hermitian_part(matrix: &CMatrix, label: impl Into<String>) -> Self {
        HermitianOperator {
            matrix: linalg::hermitian_part(matrix),
            label: label.into(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Squared Hilbert–Schmidt norm Tr(A²).
    pub fn norm_sq(&self) -> f64 {
        linalg::hs_norm_sq(&self.matrix)
    }

    /// `A − Tr(A)/d · I`.
    pub fn traceless(&self) -> HermitianOperator {
        let d = self.dim();
        let shift = self.matrix.trace().re / d as f64;
        let mut m = self.matrix.clone();
        for i in 0..d {
            m[(i, i)] -= c(shift, 0.0);
        }
        HermitianOperator {
            matrix: m,
            label: self.label.clone(),
        }
    }

    /// Rescaled to unit Hilbert–Schmidt norm.
    pub fn normalized(&self) -> Result<HermitianOperator> {
        let n = self.norm_sq().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroOperator);
        }
        Ok(HermitianOperator {
            matrix: self.matrix.unscale(n),
            label: self.label.clone(),
        })
    }

    pub fn scaled(&self, s: f64) -> HermitianOperator {
        HermitianOperator {
            matrix: self.matrix.scale(s),
            label: self.label.clone(),
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }
}

/// Standard angular momentum matrices in the `J_z` eigenbasis ordered
/// `m = j, j−1, …, −j`.
pub fn angular_momentum(sys: SpinSystem) -> (HermitianOperator, HermitianOperator, HermitianOperator) {
    let d = sys.dim();
    let j = sys.j();
    let mut jp = CMatrix::zeros(d, d);
    for a in 1..d {
        let m = j - a as f64;
        jp[(a - 1, a)] = c((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm).scale(0.5);
    let jy = (&jp - &jm) * c(0.0, -0.5);
    let jz = CMatrix::from_fn(d, d, |r, col| {
        if r == col {
            c(j - r as f64, 0.0)
        } else {
            Complex64::ZERO
        }
    });
    (
        HermitianOperator::from_hermitian_part(&jx, "Jx"),
        HermitianOperator::from_hermitian_part(&jy, "Jy"),
        HermitianOperator::from_hermitian_part(&jz, "Jz"),
    )
}

/// Structural description of one generalized Gell-Mann element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GellMann {
    /// `(|i⟩⟨k| + |k⟩⟨i|)/√2`
    Symmetric(usize, usize),
    /// `−i(|i⟩⟨k| − |k⟩⟨i|)/√2`
    Antisymmetric(usize, usize),
    /// `(Σ_{a<l} |a⟩⟨a| − l|l⟩⟨l|)/√(l(l+1))`, `l = 1..d−1`
    Diagonal(usize),
}

impl GellMann {
    fn matrix(self, d: usize) -> CMatrix {
        let mut m = CMatrix::zeros(d, d);
        match self {
            GellMann::Symmetric(i, k) => {
                m[(i, k)] = c(FRAC_1_SQRT_2, 0.0);
                m[(k, i)] = c(FRAC_1_SQRT_2, 0.0);
            }
            GellMann::Antisymmetric(i, k) => {
                m[(i, k)] = c(0.0, -FRAC_1_SQRT_2);
                m[(k, i)] = c(0.0, FRAC_1_SQRT_2);
            }
            GellMann::Diagonal(l) => {
                let norm = ((l * (l + 1)) as f64).sqrt();
                for a in 0..l {
                    m[(a, a)] = c(1.0 / norm, 0.0);
                }
                m[(l, l)] = c(-(l as f64) / norm, 0.0);
            }
        }
        m
    }
}

fn gell_mann_layout(d: usize) -> Vec<GellMann> {
    let mut kinds = Vec::with_capacity(d * d - 1);
    for i in 0..d {
        for k in i + 1..d {
            kinds.push(GellMann::Symmetric(i, k));
        }
    }
    for i in 0..d {
        for k in i + 1..d {
            kinds.push(GellMann::Antisymmetric(i, k));
        }
    }
    for l in 1..d {
        kinds.push(GellMann::Diagonal(l));
    }
    kinds
}

/// Orthonormal traceless Hermitian basis of `d × d` operators.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    d: usize,
    kinds: Vec<GellMann>,
    elements: Vec<HermitianOperator>,
}

/// Builds the generalized Gell-Mann basis for dimension `d ≥ 2`.
pub fn hermitian_basis(d: usize) -> Result<OperatorBasis> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("d = {d} < 2")));
    }
    let kinds = gell_mann_layout(d);
    let elements = kinds
        .iter()
        .enumerate()
        .map(|(a, k)| HermitianOperator::from_hermitian_part(&k.matrix(d), format!("E{}", a + 1)))
        .collect();
    Ok(OperatorBasis { d, kinds, elements })
}

impl OperatorBasis {
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of elements, `d² − 1`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn kinds(&self) -> &[GellMann] {
        &self.kinds
    }

    /// Coordinates `Re Tr(A E_α)` of a square matrix.
    ///
    /// For Hermitian `A` these are exact; the identity component is dropped.
    pub fn coords(&self, a: &CMatrix) -> RVector {
        gell_mann_coords(a)
    }

    /// `Σ_α r_α E_α` (no identity part).
    pub fn combine(&self, r: &[f64]) -> CMatrix {
        gell_mann_combine(self.d, r)
    }
}

/// Gell-Mann coordinates of `a` computed from matrix entries directly.
pub(crate) fn gell_mann_coords(a: &CMatrix) -> RVector {
    let d = a.nrows();
    let mut out = RVector::zeros(d * d - 1);
    let mut idx = 0;
    for i in 0..d {
        for k in i + 1..d {
            out[idx] = (a[(k, i)] + a[(i, k)]).re * FRAC_1_SQRT_2;
            idx += 1;
        }
    }
    for i in 0..d {
        for k in i + 1..d {
            // Tr(A E) = i (A_ik − A_ki)/√2
            out[idx] = -(a[(i, k)] - a[(k, i)]).im * FRAC_1_SQRT_2;
            idx += 1;
        }
    }
    let mut prefix = 0.0;
    for l in 1..d {
        prefix += a[(l - 1, l - 1)].re;
        let norm = ((l * (l + 1)) as f64).sqrt();
        out[idx] = (prefix - l as f64 * a[(l, l)].re) / norm;
        idx += 1;
    }
    out
}

pub(crate) fn gell_mann_combine(d: usize, r: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    let mut idx = 0;
    for i in 0..d {
        for k in i + 1..d {
            let v = r[idx] * FRAC_1_SQRT_2;
            m[(i, k)] += c(v, 0.0);
            m[(k, i)] += c(v, 0.0);
            idx += 1;
        }
    }
    for i in 0..d {
        for k in i + 1..d {
            let v = r[idx] * FRAC_1_SQRT_2;
            m[(i, k)] += c(0.0, -v);
            m[(k, i)] += c(0.0, v);
            idx += 1;
        }
    }
    // Diagonal block: entry a receives Σ_{l>a} r_l/√(l(l+1)) − a·r_a/√(a(a+1)).
    let diag = &r[idx..];
    let mut suffix = 0.0;
    let mut entries = vec![0.0; d];
    for l in (1..d).rev() {
        let norm = ((l * (l + 1)) as f64).sqrt();
        entries[l] = suffix - l as f64 * diag[l - 1] / norm;
        suffix += diag[l - 1] / norm;
    }
    entries[0] = suffix;
    for (a, v) in entries.into_iter().enumerate() {
        m[(a, a)] += c(v, 0.0);
    }
    m
}

/// A density matrix together with its Bloch vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    rho: CMatrix,
    bloch: RVector,
    ket: Option<CVector>,
}

impl QuantumState {
    /// Accepts a Hermitian unit-trace matrix. Positivity is checked
    /// separately by [`QuantumState::min_eigenvalue`].
    pub fn from_density(rho: CMatrix) -> Result<Self> {
        let bloch = bloch_vector_unchecked(&rho)?;
        Ok(QuantumState {
            rho: linalg::hermitian_part(&rho),
            bloch,
            ket: None,
        })
    }

    /// `|ψ⟩⟨ψ|` for a normalized ket.
    pub fn pure(psi: CVector) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(norm));
        }
        let rho = &psi * psi.adjoint();
        let bloch = gell_mann_coords(&rho);
        Ok(QuantumState {
            rho,
            bloch,
            ket: Some(psi),
        })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        QuantumState {
            rho: CMatrix::identity(d, d).unscale(d as f64),
            bloch: RVector::zeros(d * d - 1),
            ket: None,
        }
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn bloch(&self) -> &RVector {
        &self.bloch
    }

    /// The state vector, when the state was built as pure.
    pub fn ket(&self) -> Option<&CVector> {
        self.ket.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn purity(&self) -> f64 {
        linalg::hs_norm_sq(&self.rho)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_eigenvalues(&self.rho)[0]
    }
}

fn bloch_vector_unchecked(rho: &CMatrix) -> Result<RVector> {
    if rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            found: rho.ncols(),
        });
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(Error::NonUnitTrace(tr.re));
    }
    let herm = linalg::hermiticity_error(rho);
    if herm > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "density matrix not Hermitian (residual {herm:e})"
        )));
    }
    Ok(gell_mann_coords(rho))
}

/// `r_α = Tr(ρ E_α)`.
pub fn bloch_decompose(rho: &CMatrix, basis: &OperatorBasis) -> Result<RVector> {
    if rho.nrows() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: rho.nrows(),
        });
    }
    bloch_vector_unchecked(rho)
}

/// `I/d + Σ_α r_α E_α`. Positivity is not guaranteed.
pub fn bloch_compose(r: &[f64], basis: &OperatorBasis) -> Result<CMatrix> {
    if r.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: r.len(),
        });
    }
    let d = basis.dim();
    let mut m = basis.combine(r);
    for i in 0..d {
        m[(i, i)] += c(1.0 / d as f64, 0.0);
    }
    Ok(m)
}

/// Hilbert–Schmidt inner product `Tr(A†B)`.
pub fn hs_inner(a: &HermitianOperator, b: &HermitianOperator) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(linalg::hs(a.matrix(), b.matrix()))
}

/// Haar-random ket: a normalized standard complex Gaussian vector.
pub fn random_ket<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(d, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let n = v.norm();
    v.unscale(n)
}

/// Haar-random pure state `|ψ⟩⟨ψ|`.
pub fn random_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> QuantumState {
    QuantumState::pure(random_ket(d, rng)).expect("normalized by construction")
}

/// Traceless GUE-like Hermitian operator with unit Hilbert–Schmidt norm.
pub fn random_observable<R: Rng + ?Sized>(d: usize, rng: &mut R) -> HermitianOperator {
    let a = CMatrix::from_fn(d, d, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    HermitianOperator::from_hermitian_part(&a, "random-hermitian")
        .traceless()
        .normalized()
        .expect("Gaussian matrix is nonzero almost surely")
}

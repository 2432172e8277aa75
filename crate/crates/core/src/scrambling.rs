//! Scrambling diagnostics: out-of-time-ordered commutators, echoes and
//! Krylov-space operator spreading under a Floquet map.

use crate::dynamics::{heisenberg_at, FloquetUnitary};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg;
use crate::operator_space::{HermitianOperator, QuantumState, SpinSystem};
use crate::rmt::haar_unitary;
use crate::seed::task_rng;
use crate::{CMatrix, CVector, Complex64};

/// Relative residual below which a Krylov candidate counts as dependent.
pub const DEFAULT_DROP_TOL: f64 = 1e-10;

fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `Tr(ρ [W(n), V]† [W(n), V])` with `W(n) = U†ⁿ W Uⁿ`; `ρ = I/d` when `None`.
pub fn otoc(
    w: &HermitianOperator,
    v: &HermitianOperator,
    u: &FloquetUnitary,
    n: usize,
    rho: Option<&QuantumState>,
) -> Result<f64> {
    same_dim(u.dim(), w.dim())?;
    same_dim(u.dim(), v.dim())?;
    if let Some(r) = rho {
        same_dim(u.dim(), r.dim())?;
    }
    let wn = heisenberg_at(w.matrix(), u.matrix(), n);
    Ok(otoc_of(&wn, v.matrix(), rho))
}

fn otoc_of(wn: &CMatrix, v: &CMatrix, rho: Option<&QuantumState>) -> f64 {
    let c = commutator(wn, v);
    let cc = c.adjoint() * &c;
    match rho {
        Some(r) => linalg::hs(r.rho(), &cc).re,
        None => cc.trace().re / wn.nrows() as f64,
    }
}

/// OTOC at `ρ = I/d` for `n = 0..=n_max`.
pub fn otoc_curve(
    w: &HermitianOperator,
    v: &HermitianOperator,
    u: &FloquetUnitary,
    n_max: usize,
) -> Result<Vec<f64>> {
    same_dim(u.dim(), w.dim())?;
    same_dim(u.dim(), v.dim())?;
    let ud = u.matrix().adjoint();
    let mut wn = w.matrix().clone();
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            wn = linalg::hermitian_part(&(&ud * &wn * u.matrix()));
        }
        out.push(otoc_of(&wn, v.matrix(), None));
    }
    Ok(out)
}

/// `(2/d)[Tr(W(n)² V²) − Tr(W(n) V W(n) V)]`, equal to [`otoc`] at `ρ = I/d`
/// for Hermitian `W`, `V`.
pub fn otoc_expansion(
    w: &HermitianOperator,
    v: &HermitianOperator,
    u: &FloquetUnitary,
    n: usize,
) -> Result<f64> {
    same_dim(u.dim(), w.dim())?;
    same_dim(u.dim(), v.dim())?;
    let wn = heisenberg_at(w.matrix(), u.matrix(), n);
    let vm = v.matrix();
    let a = (&wn * &wn * vm * vm).trace().re;
    let b = (&wn * vm * &wn * vm).trace().re;
    Ok(2.0 / u.dim() as f64 * (a - b))
}

/// Operator Schmidt coefficients `λ_j` of a bipartite operator, nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    pub coefficients: Vec<f64>,
    pub dims: (usize, usize),
}

impl SchmidtSpectrum {
    /// `Σ λ_j²`.
    pub fn sum_sq(&self) -> f64 {
        self.coefficients.iter().map(|l| l * l).sum()
    }

    /// `1 − Σλ_j²/d²`, the Haar average of the local-unitary OTOC.
    pub fn linear_entanglement(&self) -> f64 {
        let d = (self.dims.0 * self.dims.1) as f64;
        1.0 - self.sum_sq() / (d * d)
    }
}

/// Regroups `U_{(a b),(a′ b′)}` into `R_{(a a′),(b b′)}`.
pub fn realign(u: &CMatrix, da: usize, db: usize) -> Result<CMatrix> {
    let d = u.nrows();
    if da == 0 || db == 0 || da * db != d || u.ncols() != d {
        return Err(Error::NonFactorizable { d, da, db });
    }
    Ok(CMatrix::from_fn(da * da, db * db, |r, c| {
        let (a, ap) = (r / da, r % da);
        let (b, bp) = (c / db, c % db);
        u[(a * db + b, ap * db + bp)]
    }))
}

/// Squared singular values of the realigned operator.
pub fn operator_schmidt(u: &CMatrix, da: usize, db: usize) -> Result<SchmidtSpectrum> {
    let r = realign(u, da, db)?;
    let mut coefficients: Vec<f64> = r.singular_values().iter().map(|s| s * s).collect();
    coefficients.sort_by(|a, b| b.total_cmp(a));
    Ok(SchmidtSpectrum {
        coefficients,
        dims: (da, db),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageOtoc {
    pub analytic: f64,
    pub monte_carlo: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// `1 − Re Tr(W(1)† V† W(1) V)/d` for `W = u ⊗ I`, `V = I ⊗ v`.
pub fn local_unitary_otoc(u: &CMatrix, ua: &CMatrix, vb: &CMatrix) -> Result<f64> {
    let (da, db) = (ua.nrows(), vb.nrows());
    same_dim(u.nrows(), da * db)?;
    let w = linalg::kron(ua, &linalg::identity(db));
    let v = linalg::kron(&linalg::identity(da), vb);
    let w1 = u.adjoint() * w * u;
    let t = (w1.adjoint() * v.adjoint() * &w1 * &v).trace().re;
    Ok(1.0 - t / u.nrows() as f64)
}

/// Haar average over local unitaries, both from the Schmidt spectrum and by
/// Monte Carlo. Sample `i` draws from `task_rng(master_seed, i)`.
pub fn average_otoc(
    u: &CMatrix,
    da: usize,
    db: usize,
    mc_samples: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<AverageOtoc> {
    if mc_samples < 2 {
        return Err(Error::InvalidArgument("need at least two Monte Carlo samples".into()));
    }
    let analytic = operator_schmidt(u, da, db)?.linear_entanglement();
    let vals: Vec<f64> = exec
        .map(mc_samples, |i| {
            let mut rng = task_rng(master_seed, i as u64);
            let ua = haar_unitary(da, &mut rng);
            let vb = haar_unitary(db, &mut rng);
            local_unitary_otoc(u, &ua, &vb)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(AverageOtoc {
        analytic,
        monte_carlo: mean,
        stderr: (var / m).sqrt(),
        samples: mc_samples,
    })
}

fn check_normalized(psi: &CVector) -> Result<()> {
    let nrm = psi.norm_squared();
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(nrm));
    }
    Ok(())
}

/// `|⟨ψ0| (U′†)ⁿ Uⁿ |ψ0⟩|²`.
pub fn loschmidt_echo(psi0: &CVector, u: &FloquetUnitary, u_pert: &FloquetUnitary, n: usize) -> Result<f64> {
    Ok(loschmidt_echo_curve(psi0, u, u_pert, n)?[n])
}

/// Loschmidt echo for `n = 0..=n_max`.
pub fn loschmidt_echo_curve(
    psi0: &CVector,
    u: &FloquetUnitary,
    u_pert: &FloquetUnitary,
    n_max: usize,
) -> Result<Vec<f64>> {
    same_dim(u.dim(), psi0.len())?;
    same_dim(u.dim(), u_pert.dim())?;
    check_normalized(psi0)?;
    let mut a = psi0.clone();
    let mut b = psi0.clone();
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            a = u.matrix() * a;
            b = u_pert.matrix() * b;
        }
        out.push(b.dotc(&a).norm_sqr());
    }
    Ok(out)
}

/// `Tr(O_n O′_n) / Tr(O²)` with `O_n` evolved by `U` and `O′_n` by `U′`.
pub fn operator_echo(o: &HermitianOperator, u: &FloquetUnitary, u_pert: &FloquetUnitary, n: usize) -> Result<f64> {
    Ok(operator_echo_curve(o, u, u_pert, n)?[n])
}

pub fn operator_echo_curve(
    o: &HermitianOperator,
    u: &FloquetUnitary,
    u_pert: &FloquetUnitary,
    n_max: usize,
) -> Result<Vec<f64>> {
    same_dim(u.dim(), o.dim())?;
    same_dim(u.dim(), u_pert.dim())?;
    let norm = o.norm_sq();
    if norm == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let (ud, upd) = (u.matrix().adjoint(), u_pert.matrix().adjoint());
    let mut a = o.matrix().clone();
    let mut b = o.matrix().clone();
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            a = &ud * a * u.matrix();
            b = &upd * b * u_pert.matrix();
        }
        out.push(linalg::hs(&a, &b).re / norm);
    }
    Ok(out)
}

/// `Tr(A†A)/(2j⁴)` with `A = [O, 𝒰_n† O 𝒰_n]` and `𝒰_n = (U′)ⁿ(U†)ⁿ`.
pub fn error_otoc(
    o: &HermitianOperator,
    u: &FloquetUnitary,
    u_pert: &FloquetUnitary,
    n: usize,
    sys: SpinSystem,
) -> Result<f64> {
    Ok(error_otoc_curve(o, u, u_pert, n, sys)?[n])
}

pub fn error_otoc_curve(
    o: &HermitianOperator,
    u: &FloquetUnitary,
    u_pert: &FloquetUnitary,
    n_max: usize,
    sys: SpinSystem,
) -> Result<Vec<f64>> {
    same_dim(u.dim(), o.dim())?;
    same_dim(u.dim(), u_pert.dim())?;
    same_dim(sys.dim(), u.dim())?;
    let scale = 1.0 / (2.0 * sys.j().powi(4));
    let d = u.dim();
    let mut un = linalg::identity(d);
    let mut upn = linalg::identity(d);
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            un = u.matrix() * un;
            upn = u_pert.matrix() * upn;
        }
        let err = &upn * un.adjoint();
        let conj = err.adjoint() * o.matrix() * &err;
        let a = commutator(o.matrix(), &conj);
        out.push(scale * linalg::hs_norm_sq(&a));
    }
    Ok(out)
}

/// Orthonormal basis of the span of the conjugation orbit `{O_n}`.
#[derive(Debug, Clone)]
pub struct KrylovBasis {
    pub elements: Vec<CMatrix>,
    /// Residual norm of each retained candidate before normalization.
    pub residual_norms: Vec<f64>,
    /// Number of orbit elements examined.
    pub candidates: usize,
}

impl KrylovBasis {
    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    /// `(K_i|A)` for every basis element.
    pub fn coordinates(&self, a: &CMatrix) -> Vec<Complex64> {
        self.elements.iter().map(|k| linalg::hs(k, a)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Defaults to `d²`.
    pub max_dim: Option<usize>,
    pub drop_tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            max_dim: None,
            drop_tol: DEFAULT_DROP_TOL,
        }
    }
}

/// Orthonormal basis of `span{O_0, O_1, …}` by modified Gram–Schmidt with one
/// reorthogonalization pass over the raw orbit.
///
/// A candidate whose residual falls below `drop_tol·‖O‖` is dropped;
/// construction ends after `d²` consecutive drops or at `max_dim`. The orbit
/// itself, not `U† K U`, supplies the candidates: Arnoldi-style candidates
/// are better conditioned but lose the invariant subspace once rounding is
/// renormalized.
pub fn krylov_basis(o: &HermitianOperator, u: &FloquetUnitary, opts: &KrylovOptions) -> Result<KrylovBasis> {
    same_dim(u.dim(), o.dim())?;
    if opts.drop_tol.is_nan() || opts.drop_tol <= 0.0 {
        return Err(Error::InvalidArgument("drop tolerance must be positive".into()));
    }
    let norm = o.norm_sq().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let d2 = u.dim() * u.dim();
    let max_dim = opts.max_dim.unwrap_or(d2).min(d2);
    let ud = u.matrix().adjoint();
    let step = |a: &CMatrix| linalg::hermitian_part(&(&ud * a * u.matrix()));
    let mut elements: Vec<CMatrix> = Vec::new();
    let mut residual_norms = Vec::new();
    let mut cur = o.matrix().clone();
    let mut drops = 0;
    let mut candidates = 0;
    while elements.len() < max_dim && drops < d2 {
        candidates += 1;
        let mut r = cur.clone();
        for _ in 0..2 {
            for k in &elements {
                let p = linalg::hs(k, &r);
                r -= k * p;
            }
        }
        let rn = linalg::hs_norm_sq(&r).sqrt();
        if rn < opts.drop_tol * norm {
            drops += 1;
        } else {
            drops = 0;
            residual_norms.push(rn);
            elements.push(r.unscale(rn));
        }
        cur = step(&cur);
    }
    Ok(KrylovBasis {
        elements,
        residual_norms,
        candidates,
    })
}

/// `|(K_i|O_n)|²` for every basis element.
pub fn krylov_probabilities(
    o: &HermitianOperator,
    u: &FloquetUnitary,
    basis: &KrylovBasis,
    n: usize,
) -> Result<Vec<f64>> {
    same_dim(u.dim(), o.dim())?;
    let Some(first) = basis.elements.first() else {
        return Err(Error::InvalidArgument("empty Krylov basis".into()));
    };
    same_dim(first.nrows(), o.dim())?;
    let nrm = o.norm_sq();
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "Krylov complexity needs a unit-norm observable, got ‖O‖² = {nrm}"
        )));
    }
    if (linalg::hs(first, o.matrix()).norm() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument("basis was not built from this observable".into()));
    }
    let on = heisenberg_at(o.matrix(), u.matrix(), n);
    Ok(basis.coordinates(&on).iter().map(|z| z.norm_sqr()).collect())
}

/// `K_c(n) = Σ_i (i−1)|(K_i|O_n)|²` with `K_1 ∝ O`.
pub fn krylov_complexity(o: &HermitianOperator, u: &FloquetUnitary, basis: &KrylovBasis, n: usize) -> Result<f64> {
    let weights: Vec<f64> = (0..basis.dim()).map(|i| i as f64).collect();
    krylov_complexity_weighted(o, u, basis, n, &weights)
}

/// `Σ_i w_i |(K_i|O_n)|²` for caller-supplied weights.
pub fn krylov_complexity_weighted(
    o: &HermitianOperator,
    u: &FloquetUnitary,
    basis: &KrylovBasis,
    n: usize,
    weights: &[f64],
) -> Result<f64> {
    same_dim(basis.dim(), weights.len())?;
    let p = krylov_probabilities(o, u, basis, n)?;
    Ok(p.iter().zip(weights).map(|(p, w)| p * w).sum())
}

//! Kicked-top Floquet unitaries, Heisenberg orbits and effective error
//! unitaries. Time is the integer kick count; ħ = 1 and the kick period is 1.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator_space::{angular_momentum, HermitianOperator, SpinSystem};
use crate::CMatrix;

/// Rotation angle used when a configuration does not set one.
pub const DEFAULT_ALPHA: f64 = 1.4;
/// Kick strength of the built-in chaotic preset.
pub const CHAOTIC_LAMBDA: f64 = 7.0;
/// Kick strength of the built-in regular preset.
pub const REGULAR_LAMBDA: f64 = 0.5;
/// Default kick-strength perturbation for echo studies.
pub const DEFAULT_DELTA_LAMBDA: f64 = 0.01;

pub const UNITARITY_TOL: f64 = 1e-11;

/// One-period propagator with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetUnitary {
    matrix: CMatrix,
    params: BTreeMap<String, f64>,
}

impl FloquetUnitary {
    /// Wraps a user-supplied unitary; rejects `‖U†U − I‖_max ≥ 1e−11`.
    pub fn custom(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let err = linalg::unitarity_error(&matrix);
        if err >= UNITARITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix is not unitary (residual {err:e})"
            )));
        }
        Ok(FloquetUnitary {
            matrix,
            params: BTreeMap::new(),
        })
    }

    pub fn identity(d: usize) -> Self {
        FloquetUnitary {
            matrix: linalg::identity(d),
            params: BTreeMap::new(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn power(&self, n: usize) -> CMatrix {
        linalg::mat_pow(&self.matrix, n)
    }
}

/// `U = exp(−i(λ/2j) J_z²) · exp(−iα J_x)`.
pub fn kicked_top_unitary(sys: SpinSystem, lambda: f64, alpha: f64) -> Result<FloquetUnitary> {
    if !lambda.is_finite() || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "non-finite kicked-top parameters lambda={lambda}, alpha={alpha}"
        )));
    }
    let d = sys.dim();
    let j = sys.j();
    let (jx, _, _) = angular_momentum(sys);
    // J_z² is diagonal in the working basis, so its eigendecomposition is trivial.
    let twist = CMatrix::from_fn(d, d, |r, col| {
        if r == col {
            let m = j - r as f64;
            Complex64::from_polar(1.0, -lambda * m * m / (2.0 * j))
        } else {
            Complex64::ZERO
        }
    });
    let rotation = linalg::expm_hermitian(jx.matrix(), alpha);
    let mut params = BTreeMap::new();
    params.insert("j".to_string(), j);
    params.insert("lambda".to_string(), lambda);
    params.insert("alpha".to_string(), alpha);
    Ok(FloquetUnitary {
        matrix: twist * rotation,
        params,
    })
}

/// Which kicked-top parameter to shift, and by how much.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub parameter: String,
    pub delta: f64,
}

impl PerturbationSpec {
    pub fn new(parameter: impl Into<String>, delta: f64) -> Self {
        PerturbationSpec {
            parameter: parameter.into(),
            delta,
        }
    }

    /// `δλ = 0.01`.
    pub fn default_lambda() -> Self {
        Self::new("lambda", DEFAULT_DELTA_LAMBDA)
    }
}

/// Rebuilds a kicked-top unitary with one parameter shifted by `δ`.
pub fn perturb(u: &FloquetUnitary, spec: &PerturbationSpec) -> Result<FloquetUnitary> {
    if !spec.delta.is_finite() {
        return Err(Error::InvalidArgument("perturbation must be finite".into()));
    }
    let get = |k: &str| u.param(k).ok_or_else(|| Error::UnknownParameter(k.to_string()));
    let (j, mut lambda, mut alpha) = (get("j")?, get("lambda")?, get("alpha")?);
    match spec.parameter.as_str() {
        "lambda" => lambda += spec.delta,
        "alpha" => alpha += spec.delta,
        other => return Err(Error::UnknownParameter(other.to_string())),
    }
    kicked_top_unitary(SpinSystem::new(j)?, lambda, alpha)
}

/// `O_0 = O`, `O_n = U† O_{n−1} U` for `n = 1..=n_max`.
pub fn heisenberg_sequence(
    o: &HermitianOperator,
    u: &FloquetUnitary,
    n_max: usize,
) -> Result<Vec<HermitianOperator>> {
    if o.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: o.dim(),
        });
    }
    let ud = u.matrix().adjoint();
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(o.clone());
    let mut cur = o.matrix().clone();
    for n in 1..=n_max {
        cur = &ud * &cur * u.matrix();
        let op = HermitianOperator::from_hermitian_part(&cur, format!("{}({n})", o.label()));
        cur = op.matrix().clone();
        out.push(op);
    }
    Ok(out)
}

/// Heisenberg-evolved operator after `n` kicks without keeping the orbit.
pub fn heisenberg_at(o: &CMatrix, u: &CMatrix, n: usize) -> CMatrix {
    let un = linalg::mat_pow(u, n);
    un.adjoint() * o * un
}

/// `𝒰_n = (U′)ⁿ (U†)ⁿ`.
pub fn effective_error_unitary(
    u: &FloquetUnitary,
    u_pert: &FloquetUnitary,
    n: usize,
) -> Result<CMatrix> {
    if u.dim() != u_pert.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: u_pert.dim(),
        });
    }
    Ok(u_pert.power(n) * u.power(n).adjoint())
}

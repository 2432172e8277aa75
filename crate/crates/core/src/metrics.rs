//! Information gain of a measurement record and quality of a reconstruction.
//!
//! Spectral quantities read the regularized `C⁻¹`, except the effective rank,
//! which counts the raw spectrum so that it reflects the dynamics rather than
//! the regularizer. Logarithms are natural.

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator_space::QuantumState;
use crate::tomography::InverseCovariance;
use crate::{CMatrix, CVector};

/// Relative eigenvalue cutoff of [`effective_rank`].
pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-10;

/// `⟨ψ0|ρ̄|ψ0⟩`.
pub fn fidelity(psi0: &CVector, rho_bar: &CMatrix) -> Result<f64> {
    if psi0.len() != rho_bar.nrows() {
        return Err(Error::DimensionMismatch {
            expected: rho_bar.nrows(),
            found: psi0.len(),
        });
    }
    let norm = psi0.norm_squared();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    Ok(psi0.dotc(&(rho_bar * psi0)).re)
}

fn positive_spectrum(cinv: &InverseCovariance) -> Result<Vec<f64>> {
    let mu = cinv.regularized_eigenvalues();
    if mu.first().is_none_or(|&m| m <= 0.0) {
        return Err(Error::Singular);
    }
    Ok(mu)
}

/// `−Σ λ_i ln λ_i` over the normalized spectrum of the regularized `C⁻¹`.
pub fn shannon_entropy(cinv: &InverseCovariance) -> Result<f64> {
    let mu: Vec<f64> = cinv.regularized_eigenvalues().into_iter().map(|x| x.max(0.0)).collect();
    let total: f64 = mu.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroOperator);
    }
    Ok(mu
        .iter()
        .map(|&x| x / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

/// `1 / Tr C = 1 / Σ 1/μ_i`.
pub fn fisher_information(cinv: &InverseCovariance) -> Result<f64> {
    let mu = positive_spectrum(cinv)?;
    Ok(1.0 / mu.iter().map(|m| 1.0 / m).sum::<f64>())
}

/// `½ Σ ln μ_i = −½ ln det C`.
pub fn mutual_information(cinv: &InverseCovariance) -> Result<f64> {
    let mu = positive_spectrum(cinv)?;
    Ok(0.5 * mu.iter().map(|m| m.ln()).sum::<f64>())
}

/// Number of raw eigenvalues above `threshold` times the largest.
pub fn effective_rank(cinv: &InverseCovariance, threshold: f64) -> usize {
    let ev = cinv.raw_eigenvalues();
    let top = ev.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    ev.iter().filter(|&&x| x > threshold * top).count()
}

/// `Tr[(ρ0 − ρ̄)²]`.
pub fn hs_distance(rho0: &CMatrix, rho_bar: &CMatrix) -> f64 {
    linalg::hs_norm_sq(&(rho0 - rho_bar))
}

/// `1 − Tr ρ̄² − 2F`, the alternative closed form that is reported next to
/// [`hs_distance`]. For pure `ρ0` the direct expansion is `1 + Tr ρ̄² − 2F`,
/// so the two disagree by `2 Tr ρ̄²`.
pub fn hs_distance_alternate(purity_bar: f64, fidelity: f64) -> f64 {
    1.0 - purity_bar - 2.0 * fidelity
}

/// Metrics that depend only on `C⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMetrics {
    pub shannon_entropy: f64,
    pub fisher: f64,
    pub mutual_info: f64,
    pub rank: usize,
    pub trace_cinv: f64,
}

impl SpectralMetrics {
    pub fn new(cinv: &InverseCovariance, rank_threshold: f64) -> Result<Self> {
        Ok(SpectralMetrics {
            shannon_entropy: shannon_entropy(cinv)?,
            fisher: fisher_information(cinv)?,
            mutual_info: mutual_information(cinv)?,
            rank: effective_rank(cinv, rank_threshold),
            trace_cinv: cinv.trace(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub fidelity: f64,
    pub shannon_entropy: f64,
    pub fisher: f64,
    pub mutual_info: f64,
    pub rank: usize,
    pub trace_cinv: f64,
    pub hs_distance: f64,
    pub hs_distance_alternate: f64,
    pub purity: f64,
}

/// Full report for a reconstruction of `rho0`. For mixed `rho0` the fidelity
/// column holds `Tr(ρ0 ρ̄)`.
pub fn report(rho0: &QuantumState, rho_bar: &CMatrix, spectral: &SpectralMetrics) -> Result<MetricReport> {
    let fid = match rho0.ket() {
        Some(psi) => fidelity(psi, rho_bar)?,
        None => linalg::hs(rho0.rho(), rho_bar).re,
    };
    let purity = linalg::hs_norm_sq(rho_bar);
    Ok(MetricReport {
        fidelity: fid,
        shannon_entropy: spectral.shannon_entropy,
        fisher: spectral.fisher,
        mutual_info: spectral.mutual_info,
        rank: spectral.rank,
        trace_cinv: spectral.trace_cinv,
        hs_distance: hs_distance(rho0.rho(), rho_bar),
        hs_distance_alternate: hs_distance_alternate(purity, fid),
        purity,
    })
}

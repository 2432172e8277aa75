//! Random-matrix ensembles and spectral statistics.
//!
//! Gaussian ensembles use the convention `Var(H_ii) = 1`, `Var(Re H_ik) =
//! Var(Im H_ik) = 1/2` (GUE) or `Var(H_ik) = 1/2` (GOE), which matches the
//! joint eigenvalue weight `exp(−½ Σ λ²) ∏ |λ_j − λ_k|^β`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::linalg::QR;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{self, c};
use crate::seed::task_rng;
use crate::{CMatrix, RMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    Goe,
    Gue,
    Gse,
    Cue,
    Coe,
}

impl EnsembleKind {
    /// Dyson index; COE is 1 and CUE is 2.
    pub fn beta(self) -> u32 {
        match self {
            EnsembleKind::Goe | EnsembleKind::Coe => 1,
            EnsembleKind::Gue | EnsembleKind::Cue => 2,
            EnsembleKind::Gse => 4,
        }
    }

    pub fn is_gaussian(self) -> bool {
        matches!(self, EnsembleKind::Goe | EnsembleKind::Gue | EnsembleKind::Gse)
    }

    pub fn is_circular(self) -> bool {
        !self.is_gaussian()
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EnsembleKind::Goe => "GOE",
            EnsembleKind::Gue => "GUE",
            EnsembleKind::Gse => "GSE",
            EnsembleKind::Cue => "CUE",
            EnsembleKind::Coe => "COE",
        };
        f.write_str(s)
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GOE" => Ok(EnsembleKind::Goe),
            "GUE" => Ok(EnsembleKind::Gue),
            "GSE" => Ok(EnsembleKind::Gse),
            "CUE" => Ok(EnsembleKind::Cue),
            "COE" => Ok(EnsembleKind::Coe),
            _ => Err(Error::InvalidArgument(format!("unknown ensemble `{s}`"))),
        }
    }
}

/// Ensemble kind and matrix dimension. For GSE `d` is the dimension of the
/// complex (Kramers-doubled) representation and must be even.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub d: usize,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, d: usize) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidDimension("d must be positive".into()));
        }
        if kind == EnsembleKind::Gse && !d.is_multiple_of(2) {
            return Err(Error::InvalidDimension(format!("GSE needs even d, got {d}")));
        }
        Ok(EnsembleSpec { kind, d })
    }

    pub fn beta(&self) -> u32 {
        self.kind.beta()
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn goe_real<R: Rng + ?Sized>(d: usize, rng: &mut R) -> RMatrix {
    let a = RMatrix::from_fn(d, d, |_, _| normal(rng));
    (&a + a.transpose()).scale(0.5)
}

fn gue<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let a = CMatrix::from_fn(d, d, |_, _| c(normal(rng), normal(rng)));
    linalg::hermitian_part(&a)
}

fn gse<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let h = d / 2;
    let a = gue(h, rng);
    let g = CMatrix::from_fn(h, h, |_, _| c(normal(rng), normal(rng)));
    // Complex antisymmetric off-diagonal block.
    let b = (&g - g.transpose()).scale(0.5);
    let mut m = CMatrix::zeros(d, d);
    for i in 0..h {
        for k in 0..h {
            m[(i, k)] = a[(i, k)];
            m[(i, k + h)] = b[(i, k)];
            m[(i + h, k)] = -b[(i, k)].conj();
            m[(i + h, k + h)] = a[(i, k)].conj();
        }
    }
    m
}

/// Draws one Hermitian matrix from a Gaussian ensemble.
pub fn sample_gaussian<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<CMatrix> {
    match spec.kind {
        EnsembleKind::Goe => Ok(goe_real(spec.d, rng).map(|x| c(x, 0.0))),
        EnsembleKind::Gue => Ok(gue(spec.d, rng)),
        EnsembleKind::Gse => Ok(gse(spec.d, rng)),
        k => Err(Error::WrongEnsembleKind(k.to_string())),
    }
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `diag(R)` absorbed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let z = CMatrix::from_fn(d, d, |_, _| c(normal(rng), normal(rng)));
    let qr = QR::new(z);
    let (mut q, r) = (qr.q(), qr.r());
    for col in 0..d {
        let rd = r[(col, col)];
        let phase = if rd.norm() > 0.0 { rd / rd.norm() } else { Complex64::ONE };
        for row in 0..d {
            q[(row, col)] *= phase;
        }
    }
    q
}

/// Draws one unitary from a circular ensemble (CUE: Haar; COE: `uᵀu`).
pub fn sample_circular<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<CMatrix> {
    match spec.kind {
        EnsembleKind::Cue => Ok(haar_unitary(spec.d, rng)),
        EnsembleKind::Coe => {
            let u = haar_unitary(spec.d, rng);
            Ok(u.transpose() * u)
        }
        k => Err(Error::WrongEnsembleKind(k.to_string())),
    }
}

/// Spectrum of one ensemble draw: eigenvalues (ascending) for Gaussian kinds
/// with GSE Kramers pairs counted once, eigenphases for circular kinds.
pub fn ensemble_levels<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<Vec<f64>> {
    match spec.kind {
        EnsembleKind::Goe => Ok(linalg::symmetric_eigenvalues(&goe_real(spec.d, rng))),
        EnsembleKind::Gue => Ok(linalg::hermitian_eigenvalues(&gue(spec.d, rng))),
        EnsembleKind::Gse => {
            let ev = linalg::hermitian_eigenvalues(&gse(spec.d, rng));
            Ok(kramers_reduce(&ev))
        }
        EnsembleKind::Cue | EnsembleKind::Coe => {
            Ok(linalg::unitary_eigenphases(&sample_circular(spec, rng)?))
        }
    }
}

/// Keeps one level of each (adjacent) Kramers pair of a sorted spectrum.
pub fn kramers_reduce(sorted: &[f64]) -> Vec<f64> {
    sorted.chunks(2).map(|p| p.iter().sum::<f64>() / p.len() as f64).collect()
}

/// Spectra of `samples` independent draws. Sample `i` uses the stream
/// derived from `(master_seed, i)`, so the result is policy-independent.
pub fn sample_levels(
    spec: &EnsembleSpec,
    samples: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    exec.map(samples, |i| ensemble_levels(spec, &mut task_rng(master_seed, i as u64)))
        .into_iter()
        .collect()
}

/// Nearest-neighbour spacings normalized to unit mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacingSample {
    pub spacings: Vec<f64>,
}

impl SpacingSample {
    pub fn mean(&self) -> f64 {
        self.spacings.iter().sum::<f64>() / self.spacings.len() as f64
    }

    pub fn len(&self) -> usize {
        self.spacings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spacings.is_empty()
    }

    /// Concatenates several samples (each already unit-mean).
    pub fn pooled(samples: &[SpacingSample]) -> SpacingSample {
        SpacingSample {
            spacings: samples.iter().flat_map(|s| s.spacings.iter().copied()).collect(),
        }
    }
}

/// Minimum number of levels accepted by [`level_spacings`].
pub const MIN_LEVELS: usize = 10;

/// Unit-mean nearest-neighbour spacings.
///
/// Circular input: sorted phase gaps including the wrap-around gap. Gaussian
/// input: only the central half of the sorted spectrum is kept before
/// differencing, a crude substitute for unfolding by the local density.
pub fn level_spacings(levels: &[f64], circular: bool) -> Result<SpacingSample> {
    if levels.len() < MIN_LEVELS {
        return Err(Error::TooFewLevels {
            need: MIN_LEVELS,
            got: levels.len(),
        });
    }
    let mut raw = if circular {
        let mut p: Vec<f64> = levels.iter().map(|x| x.rem_euclid(TAU)).collect();
        p.sort_by(f64::total_cmp);
        let mut gaps: Vec<f64> = p.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.push(TAU - p[p.len() - 1] + p[0]);
        gaps
    } else {
        let mut s = levels.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let lo = n / 4;
        let hi = n - n / 4;
        s[lo..hi].windows(2).map(|w| w[1] - w[0]).collect()
    };
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    if mean <= 0.0 {
        return Err(Error::InvalidArgument("all levels coincide".into()));
    }
    raw.iter_mut().for_each(|x| *x /= mean);
    Ok(SpacingSample { spacings: raw })
}

fn check_beta(beta: u32) -> Result<()> {
    if matches!(beta, 1 | 2 | 4) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("Dyson index must be 1, 2 or 4, got {beta}")))
    }
}

/// `A_β = [Γ((β+2)/2) / Γ((β+1)/2)]²`.
pub fn surmise_a(beta: u32) -> f64 {
    let b = beta as f64;
    (ln_gamma((b + 2.0) / 2.0) - ln_gamma((b + 1.0) / 2.0)).exp().powi(2)
}

/// Wigner surmise `P(s) = C_β s^β exp(−A_β s²)` with unit norm and unit mean.
pub fn surmise_pdf(s: f64, beta: u32) -> Result<f64> {
    check_beta(beta)?;
    if s < 0.0 {
        return Err(Error::Negative(s));
    }
    let b = beta as f64;
    let a = surmise_a(beta);
    // C_β = 2 A^{(β+1)/2} / Γ((β+1)/2)
    let log_c = std::f64::consts::LN_2 + 0.5 * (b + 1.0) * a.ln() - ln_gamma((b + 1.0) / 2.0);
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok((log_c + b * s.ln() - a * s * s).exp())
}

/// Cumulative distribution of the Wigner surmise (regularized lower
/// incomplete gamma `P((β+1)/2, A_β s²)`).
pub fn surmise_cdf(s: f64, beta: u32) -> Result<f64> {
    check_beta(beta)?;
    if s <= 0.0 {
        return Ok(0.0);
    }
    Ok(gamma_lr((beta as f64 + 1.0) / 2.0, surmise_a(beta) * s * s))
}

/// Poisson spacing law `P(s) = e^{−s}`.
pub fn poisson_pdf(s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::Negative(s));
    }
    Ok((-s).exp())
}

pub fn poisson_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        1.0 - (-s).exp()
    }
}

/// i.i.d. unit-rate exponential spacings.
pub fn sample_poisson_spacings<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect()
}

/// i.i.d. uniform phases on `[−π, π)`, the integrable Floquet control.
pub fn uniform_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-PI..PI)).collect()
}

/// `ln N_β = (d/2) ln 2π + Σ_{j=1}^{d} [ln Γ(1 + jβ/2) − ln Γ(1 + β/2)]`.
pub fn ln_joint_normalization(d: usize, beta: u32) -> f64 {
    let b = beta as f64;
    let base = ln_gamma(1.0 + b / 2.0);
    0.5 * d as f64 * TAU.ln()
        + (1..=d).map(|j| ln_gamma(1.0 + j as f64 * b / 2.0) - base).sum::<f64>()
}

/// Natural log of `exp(−½Σλ²) ∏_{j<k} |λ_j − λ_k|^β`, optionally minus
/// `ln N_β`. Ties give `−∞`.
///
/// `N_β` normalizes the density over all of ℝ^d; restricted to the
/// descending chamber the normalized density integrates to `1/d!`.
pub fn ln_joint_eigen_density(lambdas: &[f64], beta: u32, normalized: bool) -> Result<f64> {
    check_beta(beta)?;
    if lambdas.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::NotDescending);
    }
    let b = beta as f64;
    let mut acc = -0.5 * lambdas.iter().map(|x| x * x).sum::<f64>();
    for j in 0..lambdas.len() {
        for k in j + 1..lambdas.len() {
            acc += b * (lambdas[j] - lambdas[k]).abs().ln();
        }
    }
    if normalized {
        acc -= ln_joint_normalization(lambdas.len(), beta);
    }
    Ok(acc)
}

/// Joint eigenvalue density for eigenvalues in descending order.
pub fn joint_eigen_density(lambdas: &[f64], beta: u32, normalized: bool) -> Result<f64> {
    ln_joint_eigen_density(lambdas, beta, normalized).map(f64::exp)
}

/// `|Σ_k e^{−i λ_k t}|²` for one spectrum (eigenvalues or eigenphases).
pub fn trace_modulus_sq(levels: &[f64], t: f64) -> f64 {
    let z: Complex64 = levels.iter().map(|&x| Complex64::from_polar(1.0, -x * t)).sum();
    z.norm_sqr()
}

/// Ensemble average `⟨|Tr e^{−iHt}|²⟩` over Hermitian samples, unnormalized.
pub fn spectral_form_factor(samples: &[CMatrix], t: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument("t must be finite".into()));
    }
    let spectra: Vec<Vec<f64>> = samples.iter().map(linalg::hermitian_eigenvalues).collect();
    spectral_form_factor_levels(&spectra, t)
}

/// Same as [`spectral_form_factor`] from precomputed spectra. For circular
/// ensembles pass eigenphases; the value is then `⟨|Tr u^t|²⟩` at integer t.
pub fn spectral_form_factor_levels(spectra: &[Vec<f64>], t: f64) -> Result<f64> {
    if spectra.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    Ok(spectra.iter().map(|s| trace_modulus_sq(s, t)).sum::<f64>() / spectra.len() as f64)
}

/// Consecutive-spacing ratios `min(s_n, s_{n+1}) / max(s_n, s_{n+1})`.
pub fn spacing_ratios(levels: &[f64]) -> Result<Vec<f64>> {
    if levels.len() < 3 {
        return Err(Error::TooFewLevels {
            need: 3,
            got: levels.len(),
        });
    }
    let mut s = levels.to_vec();
    s.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(gaps
        .windows(2)
        .map(|g| {
            let (lo, hi) = if g[0] < g[1] { (g[0], g[1]) } else { (g[1], g[0]) };
            // two vanishing gaps count as equal spacings
            if hi == 0.0 {
                1.0
            } else {
                lo / hi
            }
        })
        .collect())
}

/// Kolmogorov–Smirnov distance between an empirical sample and a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Normalized histogram (`Σ density·width = 1`) on `[0, max]` with `bins`
/// equal bins; entries above `max` are dropped from counts but not from the
/// normalization.
pub fn spacing_histogram(spacings: &[f64], bins: usize, max: f64) -> Vec<(f64, f64)> {
    let width = max / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in spacings {
        if s >= 0.0 && s < max {
            counts[((s / width) as usize).min(bins - 1)] += 1;
        }
    }
    let n = spacings.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(b, &k)| ((b as f64 + 0.5) * width, k as f64 / (n * width)))
        .collect()
}

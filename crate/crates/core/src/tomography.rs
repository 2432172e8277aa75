//! Continuous weak-measurement tomography.
//!
//! A collectively evolved ensemble is probed with a fixed observable `O`. The
//! record `M_n = Tr[O_n ρ0] + W_n` is linear in the Bloch vector of `ρ0`, so
//! the maximum-likelihood estimate is a least-squares inversion through the
//! design matrix `Õ_{nα} = Tr[O_n E_α]`. Noise can push the estimate outside
//! the state space; [`positivity_projection`] pulls it back by minimizing the
//! `C⁻¹`-weighted distance over density matrices.

use std::collections::BTreeMap;

use nalgebra::SVD;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::FloquetUnitary;
use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::{self, MetricReport};
use crate::operator_space::{gell_mann_coords, HermitianOperator, OperatorBasis, QuantumState};
use crate::{CMatrix, RMatrix, RVector};

/// Record noise for unit-norm observables when none is configured.
pub const DEFAULT_NOISE_SPREAD: f64 = 0.01;
/// Relative singular-value cutoff of the pseudoinverse.
pub const DEFAULT_PINV_TOL: f64 = 1e-10;
/// Tikhonov constant relative to `Tr(ÕᵀÕ)/(d²−1)`.
pub const DEFAULT_RELATIVE_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementModel {
    /// Standard deviation `σ/N_s` of the white noise on each record entry.
    pub noise_spread: f64,
    pub n_steps: usize,
}

impl MeasurementModel {
    pub fn new(noise_spread: f64, n_steps: usize) -> Result<Self> {
        if !(noise_spread >= 0.0 && noise_spread.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise spread must be finite and nonnegative, got {noise_spread}"
            )));
        }
        if n_steps < 1 {
            return Err(Error::InvalidArgument("need at least one measurement step".into()));
        }
        Ok(MeasurementModel {
            noise_spread,
            n_steps,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub values: Vec<f64>,
    pub model: MeasurementModel,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, f64>,
}

impl MeasurementRecord {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `M_n = Tr[O_n ρ0] + W_n`, `n = 1..=n_steps`, with `W_n ~ N(0, noise_spread²)`.
pub fn simulate_record<R: Rng + ?Sized>(
    rho0: &QuantumState,
    o: &HermitianOperator,
    u: &FloquetUnitary,
    model: &MeasurementModel,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    check_dims(u.dim(), o.dim())?;
    check_dims(u.dim(), rho0.dim())?;
    let ud = u.matrix().adjoint();
    let mut cur = o.matrix().clone();
    let mut values = Vec::with_capacity(model.n_steps);
    for _ in 0..model.n_steps {
        cur = &ud * &cur * u.matrix();
        let expect = linalg::hs(&cur, rho0.rho()).re;
        let noise: f64 = rng.sample(StandardNormal);
        values.push(expect + model.noise_spread * noise);
    }
    let mut params = u.params().clone();
    params.insert("noise_spread".into(), model.noise_spread);
    params.insert("n_steps".into(), model.n_steps as f64);
    Ok(MeasurementRecord {
        values,
        model: *model,
        seed: None,
        params,
    })
}

/// Stacked Bloch rows of the evolved (traceless part of the) observable.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: RMatrix,
    /// `Tr(O)/d`, the part of every record entry that carries no state information.
    offset: f64,
    /// `‖O‖² = Σ_α Tr(O E_α)²`.
    observable_norm_sq: f64,
}

/// Row `k` holds the Bloch coordinates of `O_k`, `k = 1..=n`. The identity
/// component of `O` is removed first.
pub fn design_matrix(
    o: &HermitianOperator,
    u: &FloquetUnitary,
    n: usize,
    basis: &OperatorBasis,
) -> Result<DesignMatrix> {
    check_dims(u.dim(), o.dim())?;
    check_dims(basis.dim(), o.dim())?;
    if n < 1 {
        return Err(Error::InvalidArgument("design matrix needs n ≥ 1".into()));
    }
    let d = o.dim();
    let offset = o.matrix().trace().re / d as f64;
    let traceless = o.traceless();
    let m = basis.len();
    let ud = u.matrix().adjoint();
    let mut rows = RMatrix::zeros(n, m);
    let mut cur: CMatrix = traceless.matrix().clone();
    for k in 0..n {
        cur = &ud * &cur * u.matrix();
        cur = linalg::hermitian_part(&cur);
        rows.row_mut(k).copy_from(&basis.coords(&cur).transpose());
    }
    Ok(DesignMatrix {
        rows,
        offset,
        observable_norm_sq: gell_mann_coords(traceless.matrix()).norm_squared(),
    })
}

impl DesignMatrix {
    /// Wraps explicit rows (offset 0); the observable norm is taken from row 0.
    pub fn from_rows(rows: RMatrix) -> Self {
        let observable_norm_sq = if rows.nrows() > 0 { rows.row(0).norm_squared() } else { 0.0 };
        DesignMatrix {
            rows,
            offset: 0.0,
            observable_norm_sq,
        }
    }

    pub fn rows(&self) -> &RMatrix {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.rows.ncols()
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn observable_norm_sq(&self) -> f64 {
        self.observable_norm_sq
    }

    /// First `k` rows.
    pub fn prefix(&self, k: usize) -> DesignMatrix {
        DesignMatrix {
            rows: self.rows.rows(0, k).into_owned(),
            offset: self.offset,
            observable_norm_sq: self.observable_norm_sq,
        }
    }

    /// Noiseless record `offset + Õ r`.
    pub fn predict(&self, r: &RVector) -> RVector {
        (&self.rows * r).add_scalar(self.offset)
    }
}

/// `C⁻¹ = ÕᵀÕ` with its Tikhonov constant and cached spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseCovariance {
    gram: RMatrix,
    epsilon: f64,
    raw_eigenvalues: Vec<f64>,
}

/// `ε = 1e−8 · Tr(ÕᵀÕ)/(d²−1)`.
pub fn default_epsilon(design: &DesignMatrix) -> f64 {
    DEFAULT_RELATIVE_EPSILON * design.rows.norm_squared() / design.n_params() as f64
}

pub fn inverse_covariance(design: &DesignMatrix, epsilon: f64) -> Result<InverseCovariance> {
    InverseCovariance::from_matrix(design.rows.transpose() * &design.rows, epsilon)
}

impl InverseCovariance {
    /// Wraps an explicit symmetric PSD matrix.
    pub fn from_matrix(gram: RMatrix, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be ≥ 0, got {epsilon}")));
        }
        if gram.nrows() != gram.ncols() {
            return Err(Error::DimensionMismatch {
                expected: gram.nrows(),
                found: gram.ncols(),
            });
        }
        let gram = (&gram + gram.transpose()).scale(0.5);
        let raw_eigenvalues = linalg::symmetric_eigenvalues(&gram);
        Ok(InverseCovariance {
            gram,
            epsilon,
            raw_eigenvalues,
        })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `ÕᵀÕ` before regularization.
    pub fn raw(&self) -> &RMatrix {
        &self.gram
    }

    /// `ÕᵀÕ + εI`.
    pub fn regularized(&self) -> RMatrix {
        let mut m = self.gram.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += self.epsilon;
        }
        m
    }

    /// Ascending spectrum of `ÕᵀÕ`.
    pub fn raw_eigenvalues(&self) -> &[f64] {
        &self.raw_eigenvalues
    }

    /// Ascending spectrum of `ÕᵀÕ + εI`.
    pub fn regularized_eigenvalues(&self) -> Vec<f64> {
        self.raw_eigenvalues.iter().map(|x| x + self.epsilon).collect()
    }

    /// `Tr(ÕᵀÕ)` (unregularized).
    pub fn trace(&self) -> f64 {
        self.gram.trace()
    }
}

/// Truncated-SVD pseudoinverse of a design matrix, reusable across records.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pinv: RMatrix,
    offset: f64,
    rank: usize,
}

impl PseudoInverse {
    /// Singular values below `tol · σ_max` are discarded.
    pub fn new(design: &DesignMatrix, tol: f64) -> Result<Self> {
        let svd = SVD::new(design.rows.clone(), true, true);
        let smax = svd.singular_values.max();
        if smax <= 0.0 {
            return Err(Error::Singular);
        }
        let u = svd.u.as_ref().expect("requested U");
        let vt = svd.v_t.as_ref().expect("requested Vᵀ");
        let m = design.n_params();
        let n = design.n_rows();
        let mut pinv = RMatrix::zeros(m, n);
        let mut rank = 0;
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s > tol * smax {
                rank += 1;
                pinv += (vt.row(i).transpose() * u.column(i).transpose()).unscale(s);
            }
        }
        Ok(PseudoInverse {
            pinv,
            offset: design.offset,
            rank,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn apply(&self, record: &[f64]) -> Result<RVector> {
        check_dims(self.pinv.ncols(), record.len())?;
        let centered = RVector::from_iterator(record.len(), record.iter().map(|x| x - self.offset));
        Ok(&self.pinv * centered)
    }
}

/// Least-squares Bloch vector `Õ⁺ M` with relative singular-value cutoff `tol`.
pub fn ml_estimate(record: &MeasurementRecord, design: &DesignMatrix, tol: f64) -> Result<RVector> {
    check_dims(design.n_rows(), record.len())?;
    PseudoInverse::new(design, tol)?.apply(&record.values)
}

/// Euclidean projection of a real vector onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - 1.0) / (i as f64 + 1.0);
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Frobenius-nearest density matrix to `I/d + Σ r_α E_α`, returned in Bloch
/// coordinates together with the matrix.
pub fn project_to_states(r: &RVector, d: usize) -> (RVector, CMatrix) {
    let mut m = crate::operator_space::gell_mann_combine(d, r.as_slice());
    for i in 0..d {
        m[(i, i)].re += 1.0 / d as f64;
    }
    let (w, v) = linalg::hermitian_eigen(&m);
    let p = project_to_simplex(&w);
    let rho = linalg::spectral_apply(&p, &v, |x| linalg::c(x, 0.0));
    let rho = linalg::hermitian_part(&rho);
    (gell_mann_coords(&rho), rho)
}

#[derive(Debug, Clone)]
pub struct ProjectionOptions {
    pub max_iterations: usize,
    /// Stop once a step lowers the objective by less than this fraction of
    /// its value at the starting point.
    pub relative_tolerance: f64,
    /// Starting point; defaults to the projection of `r_ML`.
    pub warm_start: Option<RVector>,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            max_iterations: 10_000,
            relative_tolerance: 1e-10,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub r_bar: RVector,
    pub rho_bar: CMatrix,
    pub objective: f64,
    pub iterations: usize,
}

/// `(x − r)ᵀ Q (x − r)`.
pub fn weighted_objective(q: &RMatrix, r_ml: &RVector, x: &RVector) -> f64 {
    let diff = x - r_ml;
    diff.dot(&(q * &diff))
}

/// Minimizes `(r_ML − r̄)ᵀ C⁻¹ (r_ML − r̄)` subject to `I/d + Σ r̄_α E_α ⪰ 0`
/// using the regularized `C⁻¹`.
pub fn positivity_projection(
    r_ml: &RVector,
    cinv: &InverseCovariance,
    basis: &OperatorBasis,
) -> Result<Projection> {
    positivity_projection_with(r_ml, cinv, basis, &ProjectionOptions::default())
}

/// Accelerated projected gradient (FISTA with function-value restart). The
/// step is `1/L` with `L` the largest eigenvalue of the regularized `C⁻¹`;
/// each step ends with the eigenvalue-simplex projection onto density
/// matrices.
pub fn positivity_projection_with(
    r_ml: &RVector,
    cinv: &InverseCovariance,
    basis: &OperatorBasis,
    opts: &ProjectionOptions,
) -> Result<Projection> {
    check_dims(basis.len(), r_ml.len())?;
    check_dims(basis.len(), cinv.dim())?;
    let d = basis.dim();
    let q = cinv.regularized();
    let lipschitz = cinv.regularized_eigenvalues().last().copied().unwrap_or(0.0);
    let start = opts.warm_start.as_ref().unwrap_or(r_ml);
    let (mut x, mut rho) = project_to_states(start, d);
    if lipschitz <= 0.0 {
        // Zero weight: every feasible point is optimal.
        return Ok(Projection {
            r_bar: x,
            rho_bar: rho,
            objective: 0.0,
            iterations: 0,
        });
    }
    let mut fx = weighted_objective(&q, r_ml, &x);
    // Decreases are measured against the objective of the starting point, so
    // the ε-weighted directions of a rank-deficient C⁻¹ cannot stall the stop
    // test once the optimum value is negligible on that scale.
    let f_start = fx;
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut restarted = false;
    for it in 1..=opts.max_iterations {
        let grad = &q * (&y - r_ml);
        let (x_new, rho_new) = project_to_states(&(&y - grad.unscale(lipschitz)), d);
        let f_new = weighted_objective(&q, r_ml, &x_new);
        if f_new > fx {
            if restarted {
                // A plain projected-gradient step cannot increase the
                // objective; an increase here is rounding at the optimum.
                return Ok(Projection {
                    r_bar: x,
                    rho_bar: rho,
                    objective: fx,
                    iterations: it,
                });
            }
            // Momentum overshot: restart from the last iterate.
            y = x.clone();
            t = 1.0;
            restarted = true;
            continue;
        }
        restarted = false;
        let decrease = fx - f_new;
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_new + (&x_new - &x).scale((t - 1.0) / t_new);
        t = t_new;
        x = x_new;
        rho = rho_new;
        fx = f_new;
        if decrease <= opts.relative_tolerance * f_start {
            return Ok(Projection {
                r_bar: x,
                rho_bar: rho,
                objective: fx,
                iterations: it,
            });
        }
    }
    let grad_norm = (&q * (&x - r_ml)).norm() * 2.0;
    Err(Error::ProjectionNotConverged {
        iterations: opts.max_iterations,
        objective: fx,
        grad_norm,
    })
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub record: MeasurementRecord,
    pub r_ml: RVector,
    pub r_bar: RVector,
    pub rho_bar: CMatrix,
    pub projection_iterations: usize,
    pub diagnostics: MetricReport,
}

/// Regularization and inversion settings of a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionSettings {
    /// Tikhonov constant; `None` selects [`default_epsilon`].
    pub epsilon: Option<f64>,
    pub pinv_tol: f64,
    /// Relative eigenvalue threshold of the effective rank.
    pub rank_threshold: f64,
}

impl Default for InversionSettings {
    fn default() -> Self {
        InversionSettings {
            epsilon: None,
            pinv_tol: DEFAULT_PINV_TOL,
            rank_threshold: metrics::DEFAULT_RANK_THRESHOLD,
        }
    }
}

/// Everything about a reconstruction that does not depend on the state:
/// inverse covariance, pseudoinverse and state-independent metrics.
#[derive(Debug, Clone)]
pub struct InversionPlan {
    pub design: DesignMatrix,
    pub cinv: InverseCovariance,
    pub pinv: PseudoInverse,
    pub spectral: metrics::SpectralMetrics,
}

impl InversionPlan {
    pub fn new(design: DesignMatrix, settings: &InversionSettings) -> Result<Self> {
        let eps = settings.epsilon.unwrap_or_else(|| default_epsilon(&design));
        let cinv = inverse_covariance(&design, eps)?;
        let pinv = PseudoInverse::new(&design, settings.pinv_tol)?;
        let spectral = metrics::SpectralMetrics::new(&cinv, settings.rank_threshold)?;
        Ok(InversionPlan {
            design,
            cinv,
            pinv,
            spectral,
        })
    }

    /// Reconstructs from a record whose length matches the plan.
    pub fn invert(
        &self,
        record: &[f64],
        basis: &OperatorBasis,
        opts: &ProjectionOptions,
    ) -> Result<(RVector, Projection)> {
        let r_ml = self.pinv.apply(record)?;
        let proj = positivity_projection_with(&r_ml, &self.cinv, basis, opts)?;
        Ok((r_ml, proj))
    }
}

/// simulate → design → inverse covariance → ML estimate → positivity
/// correction, with metrics against `rho0`.
///
/// The observable is made traceless before use.
pub fn reconstruct<R: Rng + ?Sized>(
    rho0: &QuantumState,
    o: &HermitianOperator,
    u: &FloquetUnitary,
    model: &MeasurementModel,
    settings: &InversionSettings,
    basis: &OperatorBasis,
    rng: &mut R,
) -> Result<ReconstructionResult> {
    let o = o.traceless();
    let record = simulate_record(rho0, &o, u, model, rng)?;
    let design = design_matrix(&o, u, model.n_steps, basis)?;
    let plan = InversionPlan::new(design, settings)?;
    let (r_ml, proj) = plan.invert(&record.values, basis, &ProjectionOptions::default())?;
    let diagnostics = metrics::report(rho0, &proj.rho_bar, &plan.spectral)?;
    Ok(ReconstructionResult {
        record,
        r_ml,
        r_bar: proj.r_bar,
        rho_bar: proj.rho_bar,
        projection_iterations: proj.iterations,
        diagnostics,
    })
}

/// Reconstructions of many random pure states, each from its own record,
/// evaluated at a list of record prefixes.
///
/// State `i` draws its initial state and then its noise from
/// `rng_from_seed(seeds[i])`. The state-independent part of every prefix is
/// computed once and shared across states.
#[derive(Debug, Clone)]
pub struct EnsemblePlan {
    observable: HermitianOperator,
    unitary: FloquetUnitary,
    model: MeasurementModel,
    basis: OperatorBasis,
    steps: Vec<usize>,
    plans: Vec<InversionPlan>,
}

/// Per-state outcome: the record and one report per evaluated prefix.
#[derive(Debug, Clone)]
pub struct StateRun {
    pub seed: u64,
    pub record: Vec<f64>,
    pub reports: Vec<MetricReport>,
}

impl EnsemblePlan {
    /// `steps` are prefix lengths in `1..=model.n_steps`; the observable is
    /// made traceless.
    pub fn new(
        o: &HermitianOperator,
        u: &FloquetUnitary,
        model: MeasurementModel,
        settings: &InversionSettings,
        steps: &[usize],
        exec: crate::Execution,
    ) -> Result<Self> {
        if steps.iter().any(|&k| k == 0 || k > model.n_steps) {
            return Err(Error::InvalidArgument(format!(
                "evaluation steps must lie in 1..={}",
                model.n_steps
            )));
        }
        let basis = crate::operator_space::hermitian_basis(u.dim())?;
        let observable = o.traceless();
        let design = design_matrix(&observable, u, model.n_steps, &basis)?;
        let plans = exec
            .map_slice(steps, |&k| InversionPlan::new(design.prefix(k), settings))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(EnsemblePlan {
            observable,
            unitary: u.clone(),
            model,
            basis,
            steps: steps.to_vec(),
            plans,
        })
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn plans(&self) -> &[InversionPlan] {
        &self.plans
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    /// Runs one state from its seed.
    pub fn run_state(&self, seed: u64) -> Result<StateRun> {
        let mut rng = crate::seed::rng_from_seed(seed);
        let rho0 = crate::operator_space::random_pure_state(self.unitary.dim(), &mut rng);
        let record = simulate_record(&rho0, &self.observable, &self.unitary, &self.model, &mut rng)?;
        let mut reports = Vec::with_capacity(self.steps.len());
        for (plan, &k) in self.plans.iter().zip(&self.steps) {
            let (_, proj) = plan.invert(&record.values[..k], &self.basis, &ProjectionOptions::default())?;
            reports.push(metrics::report(&rho0, &proj.rho_bar, &plan.spectral)?);
        }
        Ok(StateRun {
            seed,
            record: record.values,
            reports,
        })
    }

    /// Runs every seed; results follow the seed order under either policy.
    pub fn run(&self, seeds: &[u64], exec: crate::Execution) -> Result<Vec<StateRun>> {
        exec.map_slice(seeds, |&s| self.run_state(s)).into_iter().collect()
    }
}

/// Component-wise mean of reports; the rank is taken from the first report
/// since it does not depend on the state.
pub fn mean_report(reports: &[MetricReport]) -> Option<MetricReport> {
    let first = reports.first()?;
    let m = reports.len() as f64;
    let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / m;
    Some(MetricReport {
        fidelity: avg(|r| r.fidelity),
        shannon_entropy: avg(|r| r.shannon_entropy),
        fisher: avg(|r| r.fisher),
        mutual_info: avg(|r| r.mutual_info),
        rank: first.rank,
        trace_cinv: avg(|r| r.trace_cinv),
        hs_distance: avg(|r| r.hs_distance),
        hs_distance_alternate: avg(|r| r.hs_distance_alternate),
        purity: avg(|r| r.purity),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{kicked_top_unitary, CHAOTIC_LAMBDA, DEFAULT_ALPHA};
    use crate::operator_space::{
        angular_momentum, bloch_compose, hermitian_basis, random_observable, random_pure_state, SpinSystem,
    };
    use crate::seed::rng_from_seed;

    fn spin_one() -> (SpinSystem, OperatorBasis) {
        (SpinSystem::new(1.0).unwrap(), hermitian_basis(3).unwrap())
    }

    fn jz_unit(sys: SpinSystem) -> HermitianOperator {
        angular_momentum(sys).2.normalized().unwrap()
    }

    #[test]
    fn noiseless_record_is_exact_expectation() {
        let (sys, _) = spin_one();
        let u = kicked_top_unitary(sys, 3.0, 1.4).unwrap();
        let o = jz_unit(sys);
        let mut psi = crate::CVector::zeros(3);
        psi[0] = linalg::c(1.0, 0.0);
        let rho0 = QuantumState::pure(psi).unwrap();
        let model = MeasurementModel::new(0.0, 3).unwrap();
        let rec = simulate_record(&rho0, &o, &u, &model, &mut rng_from_seed(0)).unwrap();
        // independent per-step oracle: (Uⁿ)† O Uⁿ, ⟨1,1| · |1,1⟩
        let mut un = linalg::identity(3);
        for n in 0..3 {
            un = &un * u.matrix();
            let on = un.adjoint() * o.matrix() * &un;
            assert!((rec.values[n] - on[(0, 0)].re).abs() < 1e-14);
        }
    }

    #[test]
    fn static_observable_gives_constant_record() {
        let (sys, _) = spin_one();
        let rho0 = random_pure_state(3, &mut rng_from_seed(1));
        let model = MeasurementModel::new(0.0, 6).unwrap();
        let rec = simulate_record(&rho0, &jz_unit(sys), &FloquetUnitary::identity(3), &model, &mut rng_from_seed(2))
            .unwrap();
        assert!(rec.values.iter().all(|&m| m == rec.values[0]));
        assert!(simulate_record(&rho0, &jz_unit(SpinSystem::new(2.0).unwrap()), &FloquetUnitary::identity(3), &model, &mut rng_from_seed(2)).is_err());
        assert!(MeasurementModel::new(-1.0, 3).is_err());
        assert!(MeasurementModel::new(0.1, 0).is_err());
    }

    #[test]
    fn design_rows_identical_for_identity_dynamics() {
        let (sys, basis) = spin_one();
        let dm = design_matrix(&jz_unit(sys), &FloquetUnitary::identity(3), 4, &basis).unwrap();
        for k in 1..4 {
            assert_eq!(dm.rows().row(k), dm.rows().row(0));
        }
    }

    #[test]
    fn design_rows_have_observable_norm() {
        let mut rng = rng_from_seed(3);
        for j in [1.0, 2.5, 5.0] {
            let sys = SpinSystem::new(j).unwrap();
            let basis = hermitian_basis(sys.dim()).unwrap();
            let u = kicked_top_unitary(sys, 7.0, 1.4).unwrap();
            let o = random_observable(sys.dim(), &mut rng).scaled(1.7);
            let dm = design_matrix(&o, &u, 40, &basis).unwrap();
            for row in dm.rows().row_iter() {
                assert!((row.norm_squared() - o.norm_sq()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn design_rows_match_trace_table() {
        let (sys, basis) = spin_one();
        let u = kicked_top_unitary(sys, 7.0, 1.4).unwrap();
        let (jx, _, _) = angular_momentum(sys);
        let dm = design_matrix(&jx, &u, 2, &basis).unwrap();
        let mut un = linalg::identity(3);
        for k in 0..2 {
            un = &un * u.matrix();
            let ok = un.adjoint() * jx.matrix() * &un;
            for (a, e) in basis.elements().iter().enumerate() {
                let want = (&ok * e.matrix()).trace().re;
                assert!((dm.rows()[(k, a)] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn orthonormal_rows_give_identity_gram() {
        let cinv = inverse_covariance(&DesignMatrix::from_rows(RMatrix::identity(8, 8)), 0.0).unwrap();
        assert!((cinv.raw() - RMatrix::identity(8, 8)).amax() < 1e-15);
    }

    #[test]
    fn gram_trace_identity_and_spectrum() {
        let (sys, basis) = spin_one();
        let u = kicked_top_unitary(sys, 7.0, 1.4).unwrap();
        let o = jz_unit(sys);
        let dm = design_matrix(&o, &u, 5, &basis).unwrap();
        let cinv = inverse_covariance(&dm, 0.0).unwrap();
        assert!((cinv.trace() - 5.0 * dm.observable_norm_sq()).abs() < 1e-8);
        // independent oracle: squared singular values of Õ
        let mut sv: Vec<f64> = SVD::new(dm.rows().clone(), false, false)
            .singular_values
            .iter()
            .map(|s| s * s)
            .collect();
        sv.resize(8, 0.0);
        sv.sort_by(f64::total_cmp);
        for (a, b) in cinv.raw_eigenvalues().iter().zip(&sv) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gram_spectrum_grows_with_steps() {
        let sys = SpinSystem::new(2.0).unwrap();
        let basis = hermitian_basis(5).unwrap();
        let u = kicked_top_unitary(sys, 7.0, 1.4).unwrap();
        let o = random_observable(5, &mut rng_from_seed(4));
        let full = design_matrix(&o, &u, 30, &basis).unwrap();
        let mut prev = vec![0.0; 24];
        for n in [1, 5, 10, 20, 30] {
            let ev = inverse_covariance(&full.prefix(n), 0.0).unwrap().raw_eigenvalues().to_vec();
            for (a, b) in ev.iter().zip(&prev) {
                assert!(*a >= b - 1e-9);
            }
            prev = ev;
        }
    }

    #[test]
    fn ml_estimate_recovers_noiseless_full_rank() {
        // A random observable under the chaotic top spans d²−d+1 = 7 of the 8
        // directions at d = 3, so use an explicitly full-rank design instead.
        let mut rng = rng_from_seed(5);
        let rows = RMatrix::from_fn(20, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let dm = DesignMatrix::from_rows(rows);
        let r = random_pure_state(3, &mut rng).bloch().clone();
        let m = dm.predict(&r);
        let rec = MeasurementRecord {
            values: m.iter().copied().collect(),
            model: MeasurementModel::new(0.0, 20).unwrap(),
            seed: None,
            params: BTreeMap::new(),
        };
        let est = ml_estimate(&rec, &dm, DEFAULT_PINV_TOL).unwrap();
        assert!((est - r).amax() < 1e-8);
    }

    #[test]
    fn ml_estimate_rank_deficient_is_projection() {
        let (sys, basis) = spin_one();
        let o = jz_unit(sys);
        let dm = design_matrix(&o, &FloquetUnitary::identity(3), 10, &basis).unwrap();
        let rho0 = random_pure_state(3, &mut rng_from_seed(6));
        let model = MeasurementModel::new(0.0, 10).unwrap();
        let rec = simulate_record(&rho0, &o, &FloquetUnitary::identity(3), &model, &mut rng_from_seed(7)).unwrap();
        let est = ml_estimate(&rec, &dm, DEFAULT_PINV_TOL).unwrap();
        let dir = basis.coords(o.matrix());
        let dir = &dir / dir.norm();
        let want = &dir * dir.dot(rho0.bloch());
        assert!((est - want).amax() < 1e-10);
    }

    #[test]
    fn ml_estimate_is_least_squares() {
        let (sys, basis) = spin_one();
        let u = kicked_top_unitary(sys, 7.0, 1.4).unwrap();
        let o = random_observable(3, &mut rng_from_seed(8));
        let dm = design_matrix(&o, &u, 30, &basis).unwrap();
        let rho0 = random_pure_state(3, &mut rng_from_seed(9));
        let model = MeasurementModel::new(0.05, 30).unwrap();
        let rec = simulate_record(&rho0, &o, &u, &model, &mut rng_from_seed(10)).unwrap();
        let est = ml_estimate(&rec, &dm, DEFAULT_PINV_TOL).unwrap();
        let m = RVector::from_vec(rec.values.clone());
        let resid = |v: &RVector| (&m - dm.predict(v)).norm();
        let best = resid(&est);
        let mut rng = rng_from_seed(11);
        for _ in 0..100 {
            let v = RVector::from_fn(8, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.3);
            assert!(best <= resid(&v) + 1e-12);
        }
        let zero = DesignMatrix::from_rows(RMatrix::zeros(4, 8));
        assert!(matches!(PseudoInverse::new(&zero, 1e-10), Err(Error::Singular)));
    }

    #[test]
    fn simplex_projection_basics() {
        let p = project_to_simplex(&[0.2, 0.3, 0.5]);
        assert!(p.iter().zip([0.2, 0.3, 0.5]).all(|(a, b)| (a - b).abs() < 1e-15));
        let p = project_to_simplex(&[1.5, -0.2, -0.3]);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] == 0.0 && p[2] == 0.0);
        let p = project_to_simplex(&[0.6, 0.6, -0.2]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15 && p[2] == 0.0);
    }

    #[test]
    fn physical_estimate_is_fixed_point() {
        let basis = hermitian_basis(3).unwrap();
        let mut rng = rng_from_seed(12);
        let r = random_pure_state(3, &mut rng).bloch().scale(0.6);
        let rows = RMatrix::from_fn(12, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cinv = inverse_covariance(&DesignMatrix::from_rows(rows), 1e-6).unwrap();
        let p = positivity_projection(&r, &cinv, &basis).unwrap();
        assert!((&p.r_bar - &r).amax() < 1e-8);
    }

    #[test]
    fn identity_weight_projection_equals_spectral_simplex() {
        let basis = hermitian_basis(3).unwrap();
        let cinv = InverseCovariance::from_matrix(RMatrix::identity(8, 8), 0.0).unwrap();
        let mut rng = rng_from_seed(13);
        for _ in 0..20 {
            let r = RVector::from_fn(8, |_, _| rng.sample::<f64, _>(StandardNormal));
            let p = positivity_projection(&r, &cinv, &basis).unwrap();
            // independent route: clip the spectrum of the composed matrix onto the simplex
            let m = bloch_compose(r.as_slice(), &basis).unwrap();
            let (w, v) = linalg::hermitian_eigen(&m);
            let want = linalg::spectral_apply(&project_to_simplex(&w), &v, |x| linalg::c(x, 0.0));
            assert!(linalg::max_abs_diff(&p.rho_bar, &want) < 1e-8);
            let ev = linalg::hermitian_eigenvalues(&p.rho_bar);
            assert!(ev[0] >= -1e-9);
            assert!((p.rho_bar.trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn weighted_projection_beats_feasible_probes() {
        let basis = hermitian_basis(3).unwrap();
        let mut rng = rng_from_seed(14);
        let a = RMatrix::from_fn(8, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cinv = InverseCovariance::from_matrix(a.transpose() * &a, 1e-3).unwrap();
        let q = cinv.regularized();
        let r = RVector::from_fn(8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let p = positivity_projection(&r, &cinv, &basis).unwrap();
        // eigenvalue clipping is feasible but ignores the weighting
        let (clipped, _) = project_to_states(&r, 3);
        assert!(p.objective <= weighted_objective(&q, &r, &clipped) + 1e-12);
        for _ in 0..1000 {
            let probe = random_pure_state(3, &mut rng);
            let mix: f64 = rng.random();
            let x = probe.bloch().scale(mix);
            assert!(p.objective <= weighted_objective(&q, &r, &x) + 1e-12);
        }
    }

    #[test]
    fn noiseless_chaotic_reconstruction_reproduces_record() {
        // One Floquet-invariant Bloch direction stays unmeasured, so ρ̄ is
        // only pinned down up to that direction; it must still fit the data.
        let (sys, basis) = spin_one();
        let u = kicked_top_unitary(sys, CHAOTIC_LAMBDA, DEFAULT_ALPHA).unwrap();
        let o = random_observable(3, &mut rng_from_seed(15));
        let model = MeasurementModel::new(0.0, 20).unwrap();
        let dm = design_matrix(&o, &u, 20, &basis).unwrap();
        let mut rng = rng_from_seed(16);
        for _ in 0..10 {
            let rho0 = random_pure_state(3, &mut rng);
            let res = reconstruct(&rho0, &o, &u, &model, &InversionSettings::default(), &basis, &mut rng).unwrap();
            let fit = dm.predict(&res.r_bar);
            for (a, b) in fit.iter().zip(&res.record.values) {
                assert!((a - b).abs() < 1e-4, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn jz_orbit_is_confined_to_parity_odd_sector() {
        // exp(−iπJx) commutes with the kicked top and flips Jz, so the Jz
        // record only sees 2·d_even·d_odd = 4 Bloch directions at j = 1.
        let (sys, basis) = spin_one();
        let u = kicked_top_unitary(sys, CHAOTIC_LAMBDA, DEFAULT_ALPHA).unwrap();
        let dm = design_matrix(&jz_unit(sys), &u, 200, &basis).unwrap();
        let plan = InversionPlan::new(dm, &InversionSettings::default()).unwrap();
        assert_eq!(plan.spectral.rank, 4);
        assert_eq!(plan.pinv.rank(), 4);
    }

    #[test]
    fn chaos_beats_static_dynamics_on_average() {
        let (sys, basis) = spin_one();
        let o = jz_unit(sys);
        let chaotic = kicked_top_unitary(sys, CHAOTIC_LAMBDA, DEFAULT_ALPHA).unwrap();
        let model = MeasurementModel::new(0.0, 20).unwrap();
        let mean_fid = |u: &FloquetUnitary| {
            let mut rng = rng_from_seed(17);
            (0..20)
                .map(|_| {
                    let rho0 = random_pure_state(3, &mut rng);
                    reconstruct(&rho0, &o, u, &model, &InversionSettings::default(), &basis, &mut rng)
                        .unwrap()
                        .diagnostics
                        .fidelity
                })
                .sum::<f64>()
                / 20.0
        };
        let f_chaos = mean_fid(&chaotic);
        let f_static = mean_fid(&FloquetUnitary::identity(3));
        assert!(f_static < f_chaos, "{f_static} vs {f_chaos}");
    }

    #[test]
    fn ensemble_prefix_matches_standalone_plan() {
        let sys = SpinSystem::new(1.5).unwrap();
        let u = kicked_top_unitary(sys, 7.0, 1.4).unwrap();
        let o = jz_unit(sys);
        let model = MeasurementModel::new(0.01, 12).unwrap();
        let steps = [3, 8, 12];
        let plan = EnsemblePlan::new(&o, &u, model, &InversionSettings::default(), &steps, crate::Execution::Sequential)
            .unwrap();
        let seeds = [11, 12, 13];
        let par = plan.run(&seeds, crate::Execution::Parallel).unwrap();
        let seq = plan.run(&seeds, crate::Execution::Sequential).unwrap();
        for (a, b) in par.iter().zip(&seq) {
            assert_eq!(a.record, b.record);
            assert_eq!(a.reports, b.reports);
        }
        // prefix k of the ensemble equals a fresh plan on the first k rows
        let basis = hermitian_basis(4).unwrap();
        let mut rng = rng_from_seed(12);
        let rho0 = random_pure_state(4, &mut rng);
        let rec = simulate_record(&rho0, &o, &u, &model, &mut rng).unwrap();
        assert_eq!(rec.values, par[1].record);
        let dm = design_matrix(&o, &u, 8, &basis).unwrap();
        let p = InversionPlan::new(dm, &InversionSettings::default()).unwrap();
        let (_, proj) = p.invert(&rec.values[..8], &basis, &ProjectionOptions::default()).unwrap();
        let f = metrics::fidelity(rho0.ket().unwrap(), &proj.rho_bar).unwrap();
        assert!((f - par[1].reports[1].fidelity).abs() < 1e-12);
        let mean = mean_report(&par.iter().map(|r| r.reports[2]).collect::<Vec<_>>()).unwrap();
        let want = par.iter().map(|r| r.reports[2].fidelity).sum::<f64>() / 3.0;
        assert!((mean.fidelity - want).abs() < 1e-15);
        assert!(EnsemblePlan::new(&o, &u, model, &InversionSettings::default(), &[13], crate::Execution::Sequential).is_err());
    }

    #[test]
    fn reconstruction_is_deterministic() {
        let sys = SpinSystem::new(2.0).unwrap();
        let basis = hermitian_basis(5).unwrap();
        let u = kicked_top_unitary(sys, 7.0, 1.4).unwrap();
        let o = jz_unit(sys);
        let model = MeasurementModel::new(0.01, 25).unwrap();
        let run = || {
            let mut rng = rng_from_seed(18);
            let rho0 = random_pure_state(5, &mut rng);
            reconstruct(&rho0, &o, &u, &model, &InversionSettings::default(), &basis, &mut rng).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.record.values, b.record.values);
        assert!(linalg::max_abs_diff(&a.rho_bar, &b.rho_bar) < 1e-12);
    }
}

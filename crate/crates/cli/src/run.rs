//! Subcommand pipelines, seed bookkeeping and the run manifest.

use std::io;

use serde_json::{json, Map, Value};
use thiserror::Error;
use tomochaos_core::dynamics::{kicked_top_unitary, perturb, FloquetUnitary, PerturbationSpec};
use tomochaos_core::metrics::MetricReport;
use tomochaos_core::operator_space::{
    angular_momentum, random_ket, random_observable, HermitianOperator, SpinSystem,
};
use tomochaos_core::rmt::{self, EnsembleSpec};
use tomochaos_core::scrambling::{self, KrylovOptions};
use tomochaos_core::seed::{derive_seed, rng_from_seed};
use tomochaos_core::tomography::{self, EnsemblePlan, InversionSettings, MeasurementModel};
use tomochaos_core::{metrics, Execution};

use crate::config::{ExperimentConfig, ObservableKind, Subcommand};
use crate::output::{fmt_f64, num, OutputDir};

/// Stream indices reserved next to the per-λ task indices.
pub const OBSERVABLE_STREAM: u64 = u64::MAX;
pub const STATE_STREAM: u64 = u64::MAX - 1;
pub const RMT_STREAM: u64 = u64::MAX - 2;

/// Largest spacing shown in the histogram, in units of the mean.
const HISTOGRAM_MAX: f64 = 4.0;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error("output error: {0}")]
    Io(#[from] io::Error),
    #[error("numerical setup failed: {0}")]
    Setup(#[from] tomochaos_core::Error),
}

/// Summary of a finished run.
#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: Value,
    pub summary: Value,
    pub failed_tasks: usize,
}

/// Derived seeds of the random pure states shared by every λ.
pub fn state_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    let base = derive_seed(cfg.seed, STATE_STREAM);
    (0..cfg.n_states as u64).map(|i| derive_seed(base, i)).collect()
}

/// Observable in its dynamical normalization: `J_a` itself, or a random
/// traceless Hermitian matrix rescaled to the Hilbert–Schmidt norm of `Jz`.
pub fn base_observable(cfg: &ExperimentConfig, sys: SpinSystem) -> tomochaos_core::Result<HermitianOperator> {
    let (jx, jy, jz) = angular_momentum(sys);
    Ok(match cfg.observable {
        ObservableKind::Jx => jx,
        ObservableKind::Jy => jy,
        ObservableKind::Jz => jz,
        ObservableKind::RandomHermitian => {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, OBSERVABLE_STREAM));
            random_observable(sys.dim(), &mut rng).normalized()?.scaled(jz.norm_sq().sqrt())
        }
    })
}

/// Steps at which tomography metrics are evaluated.
pub fn evaluation_steps(cfg: &ExperimentConfig) -> Vec<usize> {
    let mut steps: Vec<usize> = (1..=cfg.n_steps).filter(|k| k % cfg.stride == 0).collect();
    if steps.last() != Some(&cfg.n_steps) {
        steps.push(cfg.n_steps);
    }
    steps
}

fn lambda_tag(lambda: f64) -> String {
    format!("lambda_{lambda}")
}

fn parameters(cfg: &ExperimentConfig, lambda: f64) -> String {
    format!(
        "j={};lambda={};alpha={};observable={}",
        cfg.j,
        lambda,
        cfg.alpha,
        cfg.observable.name()
    )
}

fn report_json(r: &MetricReport) -> Value {
    json!({
        "fidelity": num(r.fidelity),
        "shannon_entropy": num(r.shannon_entropy),
        "fisher": num(r.fisher),
        "mutual_info": num(r.mutual_info),
        "rank": r.rank,
        "trace_Cinv": num(r.trace_cinv),
        "hs_distance": num(r.hs_distance),
        "hs_distance_alternate": num(r.hs_distance_alternate),
        "purity": num(r.purity),
    })
}

/// File name, header and rows of one CSV table.
type Table = (String, Vec<&'static str>, Vec<Vec<String>>);

/// CSV tables and JSON results of one task, written only if the task succeeds.
#[derive(Debug, Default)]
struct TaskOutput {
    tables: Vec<Table>,
    result: Value,
}

struct Task {
    name: String,
    lambda: Option<f64>,
    seed: u64,
    state_seeds: Vec<u64>,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    sys: SpinSystem,
    base: HermitianOperator,
    states: Vec<u64>,
    exec: Execution,
}

type TaskResult = tomochaos_core::Result<TaskOutput>;

impl Context<'_> {
    fn unitary(&self, lambda: f64) -> tomochaos_core::Result<FloquetUnitary> {
        kicked_top_unitary(self.sys, lambda, self.cfg.alpha)
    }

    fn settings(&self) -> InversionSettings {
        InversionSettings {
            epsilon: self.cfg.epsilon,
            ..InversionSettings::default()
        }
    }

    fn tomography_plan(&self, u: &FloquetUnitary, steps: &[usize]) -> tomochaos_core::Result<EnsemblePlan> {
        let o = self.base.traceless().normalized()?;
        let model = MeasurementModel::new(self.cfg.noise_spread, self.cfg.n_steps)?;
        EnsemblePlan::new(&o, u, model, &self.settings(), steps, self.exec)
    }

    fn tomography(&self, lambda: f64) -> TaskResult {
        let u = self.unitary(lambda)?;
        let steps = evaluation_steps(self.cfg);
        let plan = self.tomography_plan(&u, &steps)?;
        let runs = plan.run(&self.states, self.exec)?;
        let m = runs.len() as f64;
        let mut rows = Vec::with_capacity(steps.len());
        let mut final_report = None;
        for (idx, &k) in steps.iter().enumerate() {
            let mean_m = runs.iter().map(|r| r.record[k - 1]).sum::<f64>() / m;
            let per_state: Vec<MetricReport> = runs.iter().map(|r| r.reports[idx]).collect();
            let avg = tomography::mean_report(&per_state).expect("at least one state");
            rows.push(vec![
                k.to_string(),
                fmt_f64(mean_m),
                fmt_f64(avg.fidelity),
                fmt_f64(avg.shannon_entropy),
                fmt_f64(avg.fisher),
                fmt_f64(avg.mutual_info),
                avg.rank.to_string(),
                fmt_f64(avg.trace_cinv),
            ]);
            final_report = Some(avg);
        }
        let last = steps.len() - 1;
        let state_rows = runs
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let rep = &r.reports[last];
                vec![
                    i.to_string(),
                    r.seed.to_string(),
                    fmt_f64(rep.fidelity),
                    fmt_f64(rep.hs_distance),
                    fmt_f64(rep.hs_distance_alternate),
                    fmt_f64(rep.purity),
                ]
            })
            .collect();
        let tag = lambda_tag(lambda);
        Ok(TaskOutput {
            tables: vec![
                (
                    format!("tomography_{tag}.csv"),
                    vec!["step", "M_n", "fidelity", "shannon_entropy", "fisher", "mutual_info", "rank", "trace_Cinv"],
                    rows,
                ),
                (
                    format!("tomography_states_{tag}.csv"),
                    vec!["state", "seed", "fidelity", "hs_distance", "hs_distance_alternate", "purity"],
                    state_rows,
                ),
            ],
            result: json!({
                "lambda": num(lambda),
                "final_step": self.cfg.n_steps,
                "final": report_json(&final_report.expect("nonempty steps")),
            }),
        })
    }

    fn curve_rows(&self, lambda: f64, seed: u64, values: &[f64]) -> Vec<Vec<String>> {
        let params = parameters(self.cfg, lambda);
        values
            .iter()
            .enumerate()
            .map(|(n, v)| vec![n.to_string(), fmt_f64(*v), params.clone(), seed.to_string()])
            .collect()
    }

    /// `W = V = O/j`.
    fn otoc_operator(&self) -> HermitianOperator {
        self.base.scaled(1.0 / self.sys.j())
    }

    fn otoc(&self, lambda: f64, seed: u64) -> TaskResult {
        let u = self.unitary(lambda)?;
        let w = self.otoc_operator();
        let curve = scrambling::otoc_curve(&w, &w, &u, self.cfg.n_steps)?;
        Ok(TaskOutput {
            result: json!({ "lambda": num(lambda), "final": num(curve[self.cfg.n_steps]) }),
            tables: vec![(
                format!("otoc_{}.csv", lambda_tag(lambda)),
                vec!["n", "value", "parameters", "seed"],
                self.curve_rows(lambda, seed, &curve),
            )],
        })
    }

    fn loschmidt_mean(&self, u: &FloquetUnitary, up: &FloquetUnitary) -> tomochaos_core::Result<Vec<f64>> {
        let curves = self
            .exec
            .map_slice(&self.states, |&s| {
                let psi = random_ket(u.dim(), &mut rng_from_seed(s));
                scrambling::loschmidt_echo_curve(&psi, u, up, self.cfg.n_steps)
            })
            .into_iter()
            .collect::<tomochaos_core::Result<Vec<_>>>()?;
        let m = curves.len() as f64;
        Ok((0..=self.cfg.n_steps)
            .map(|n| curves.iter().map(|c| c[n]).sum::<f64>() / m)
            .collect())
    }

    fn perturbed(&self, u: &FloquetUnitary) -> tomochaos_core::Result<FloquetUnitary> {
        perturb(u, &PerturbationSpec::new("lambda", self.cfg.delta))
    }

    fn echo(&self, lambda: f64, seed: u64) -> TaskResult {
        let u = self.unitary(lambda)?;
        let up = self.perturbed(&u)?;
        let n = self.cfg.n_steps;
        let los = self.loschmidt_mean(&u, &up)?;
        let op = scrambling::operator_echo_curve(&self.base, &u, &up, n)?;
        let err = scrambling::error_otoc_curve(&self.base, &u, &up, n, self.sys)?;
        let tag = lambda_tag(lambda);
        let header = vec!["n", "value", "parameters", "seed"];
        Ok(TaskOutput {
            tables: vec![
                (format!("echo_loschmidt_{tag}.csv"), header.clone(), self.curve_rows(lambda, seed, &los)),
                (format!("echo_operator_{tag}.csv"), header.clone(), self.curve_rows(lambda, seed, &op)),
                (format!("echo_error_otoc_{tag}.csv"), header, self.curve_rows(lambda, seed, &err)),
            ],
            result: json!({
                "lambda": num(lambda),
                "delta_lambda": num(self.cfg.delta),
                "final": {
                    "loschmidt_echo": num(los[n]),
                    "operator_echo": num(op[n]),
                    "error_otoc": num(err[n]),
                },
            }),
        })
    }

    fn krylov(&self, lambda: f64, seed: u64) -> TaskResult {
        let u = self.unitary(lambda)?;
        let o = self.base.traceless().normalized()?;
        let basis = scrambling::krylov_basis(&o, &u, &KrylovOptions::default())?;
        let probs_weights: Vec<f64> = (0..basis.dim()).map(|i| i as f64).collect();
        let ud = u.matrix().adjoint();
        let mut on = o.matrix().clone();
        let mut curve = Vec::with_capacity(self.cfg.n_steps + 1);
        for n in 0..=self.cfg.n_steps {
            if n > 0 {
                on = &ud * &on * u.matrix();
            }
            let kc: f64 = basis
                .coordinates(&on)
                .iter()
                .zip(&probs_weights)
                .map(|(z, w)| z.norm_sqr() * w)
                .sum();
            curve.push(kc);
        }
        let hilbert = tomochaos_core::operator_space::hermitian_basis(self.sys.dim())?;
        let design = tomography::design_matrix(&o, &u, self.cfg.n_steps, &hilbert)?;
        let cinv = tomography::inverse_covariance(&design, 0.0)?;
        let d = self.sys.dim();
        Ok(TaskOutput {
            result: json!({
                "lambda": num(lambda),
                "krylov_dim": basis.dim(),
                "candidates": basis.candidates,
                "orbit_rank": metrics::effective_rank(&cinv, metrics::DEFAULT_RANK_THRESHOLD),
                "d2_minus_d_plus_1": d * d - d + 1,
                "final": num(curve[self.cfg.n_steps]),
            }),
            tables: vec![(
                format!("krylov_{}.csv", lambda_tag(lambda)),
                vec!["n", "value", "parameters", "seed"],
                self.curve_rows(lambda, seed, &curve),
            )],
        })
    }

    fn sweep_row(&self, lambda: f64) -> tomochaos_core::Result<(Vec<String>, Value)> {
        let u = self.unitary(lambda)?;
        let n = self.cfg.n_steps;
        let plan = self.tomography_plan(&u, &[n])?;
        let runs = plan.run(&self.states, self.exec)?;
        let per_state: Vec<MetricReport> = runs.iter().map(|r| r.reports[0]).collect();
        let avg = tomography::mean_report(&per_state).expect("at least one state");
        let o = self.base.traceless().normalized()?;
        let kdim = scrambling::krylov_basis(&o, &u, &KrylovOptions::default())?.dim();
        let w = self.otoc_operator();
        let otoc = scrambling::otoc(&w, &w, &u, n, None)?;
        let echo = self.loschmidt_mean(&u, &self.perturbed(&u)?)?[n];
        let row = vec![
            lambda.to_string(),
            fmt_f64(avg.fidelity),
            fmt_f64(avg.shannon_entropy),
            fmt_f64(avg.fisher),
            fmt_f64(avg.mutual_info),
            avg.rank.to_string(),
            kdim.to_string(),
            fmt_f64(otoc),
            fmt_f64(echo),
        ];
        let value = json!({
            "lambda": num(lambda),
            "tomography": report_json(&avg),
            "krylov_dim": kdim,
            "otoc": num(otoc),
            "loschmidt_echo": num(echo),
        });
        Ok((row, value))
    }

    fn rmt(&self, seed: u64) -> TaskResult {
        let cfg = self.cfg;
        let spec = EnsembleSpec::new(cfg.ensemble, cfg.dim)?;
        let circular = cfg.ensemble.is_circular();
        let beta = spec.beta();
        let levels = rmt::sample_levels(&spec, cfg.samples, seed, self.exec)?;
        let spacings = levels
            .iter()
            .map(|l| rmt::level_spacings(l, circular))
            .collect::<tomochaos_core::Result<Vec<_>>>()?;
        let pooled = rmt::SpacingSample::pooled(&spacings).spacings;
        let ks_surmise = rmt::ks_distance(&pooled, |s| rmt::surmise_cdf(s, beta).unwrap_or(f64::NAN));
        let ks_poisson = rmt::ks_distance(&pooled, rmt::poisson_cdf);
        let mut ratios = Vec::new();
        for l in &levels {
            ratios.extend(rmt::spacing_ratios(l)?);
        }
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let width = HISTOGRAM_MAX / cfg.bins as f64;
        let hist = rmt::spacing_histogram(&pooled, cfg.bins, HISTOGRAM_MAX)
            .into_iter()
            .map(|(center, density)| {
                Ok(vec![
                    fmt_f64(center - 0.5 * width),
                    fmt_f64(center + 0.5 * width),
                    fmt_f64(density),
                    fmt_f64(rmt::surmise_pdf(center, beta)?),
                    fmt_f64(rmt::poisson_pdf(center)?),
                ])
            })
            .collect::<tomochaos_core::Result<Vec<_>>>()?;
        // integer powers for circular ensembles, a 0.1 grid for Gaussian ones
        let dt = if circular { 1.0 } else { 0.1 };
        let sff = (0..=2 * cfg.dim)
            .map(|k| {
                let t = k as f64 * dt;
                Ok(vec![fmt_f64(t), fmt_f64(rmt::spectral_form_factor_levels(&levels, t)?)])
            })
            .collect::<tomochaos_core::Result<Vec<_>>>()?;
        Ok(TaskOutput {
            tables: vec![
                (
                    "rmt_histogram.csv".into(),
                    vec!["s_lo", "s_hi", "density", "surmise", "poisson"],
                    hist,
                ),
                ("rmt_sff.csv".into(), vec!["t", "sff"], sff),
            ],
            result: json!({
                "ensemble": cfg.ensemble.to_string(),
                "beta": beta,
                "dim": cfg.dim,
                "samples": cfg.samples,
                "spacings": pooled.len(),
                "ks_surmise": num(ks_surmise),
                "ks_poisson": num(ks_poisson),
                "mean_spacing_ratio": num(mean_ratio),
            }),
        })
    }
}

fn config_json(cfg: &ExperimentConfig) -> Value {
    let mut m = Map::new();
    for (k, v) in cfg.echo() {
        m.insert(k.to_string(), Value::String(v));
    }
    Value::Object(m)
}

/// Runs the configured subcommand and writes its outputs, `summary.json` and
/// `manifest.json` into the output directory.
///
/// A failing task is recorded in the manifest and the others still run.
pub fn run(cfg: &ExperimentConfig, exec: Execution) -> Result<RunOutcome, RunError> {
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let sys = SpinSystem::new(cfg.j)?;
    let ctx = Context {
        cfg,
        sys,
        base: base_observable(cfg, sys)?,
        states: state_seeds(cfg),
        exec,
    };
    let uses_states = matches!(cfg.subcommand, Subcommand::Tomography | Subcommand::Echo | Subcommand::Sweep);
    let mut tasks = Vec::new();
    let mut outcomes: Vec<Result<TaskOutput, String>> = Vec::new();

    match cfg.subcommand {
        Subcommand::Rmt => {
            let seed = derive_seed(cfg.seed, RMT_STREAM);
            tasks.push(Task {
                name: format!("rmt_{}", cfg.ensemble),
                lambda: None,
                seed,
                state_seeds: (0..cfg.samples as u64).map(|i| derive_seed(seed, i)).collect(),
            });
            outcomes.push(ctx.rmt(seed).map_err(|e| e.to_string()));
        }
        Subcommand::Sweep => {
            let mut rows = Vec::new();
            let mut values = Vec::new();
            for (t, &lambda) in cfg.lambda.iter().enumerate() {
                let seed = derive_seed(cfg.seed, t as u64);
                tasks.push(Task {
                    name: format!("sweep_{}", lambda_tag(lambda)),
                    lambda: Some(lambda),
                    seed,
                    state_seeds: ctx.states.clone(),
                });
                match ctx.sweep_row(lambda) {
                    Ok((row, value)) => {
                        rows.push(row);
                        values.push(value);
                        outcomes.push(Ok(TaskOutput::default()));
                    }
                    Err(e) => outcomes.push(Err(e.to_string())),
                }
            }
            let header = vec![
                "lambda",
                "fidelity",
                "shannon_entropy",
                "fisher",
                "mutual_info",
                "rank",
                "krylov_dim",
                "otoc",
                "loschmidt_echo",
            ];
            if let Some(first) = outcomes.iter_mut().find(|o| o.is_ok()) {
                *first = Ok(TaskOutput {
                    tables: vec![("sweep.csv".into(), header, rows)],
                    result: Value::Array(values),
                });
            }
        }
        sub => {
            for (t, &lambda) in cfg.lambda.iter().enumerate() {
                let seed = derive_seed(cfg.seed, t as u64);
                tasks.push(Task {
                    name: format!("{}_{}", sub.name(), lambda_tag(lambda)),
                    lambda: Some(lambda),
                    seed,
                    state_seeds: if uses_states { ctx.states.clone() } else { Vec::new() },
                });
                let res = match sub {
                    Subcommand::Tomography => ctx.tomography(lambda),
                    Subcommand::Otoc => ctx.otoc(lambda, seed),
                    Subcommand::Echo => ctx.echo(lambda, seed),
                    Subcommand::Krylov => ctx.krylov(lambda, seed),
                    Subcommand::Rmt | Subcommand::Sweep => unreachable!("handled above"),
                };
                outcomes.push(res.map_err(|e| e.to_string()));
            }
        }
    }

    let mut results = Vec::new();
    let mut task_entries = Vec::new();
    let mut failed = 0;
    for (task, outcome) in tasks.iter().zip(outcomes) {
        let mut entry = json!({
            "name": task.name,
            "lambda": task.lambda.map_or(Value::Null, num),
            "seed": task.seed,
            "state_seeds": task.state_seeds,
        });
        match outcome {
            Ok(o) => {
                for (name, header, rows) in &o.tables {
                    out.write_csv(name, header, rows)?;
                }
                if !o.result.is_null() {
                    match o.result {
                        Value::Array(items) => results.extend(items),
                        v => results.push(v),
                    }
                }
                entry["status"] = json!("ok");
            }
            Err(msg) => {
                failed += 1;
                entry["status"] = json!("failed");
                entry["error"] = json!(msg);
            }
        }
        task_entries.push(entry);
    }

    let config = config_json(cfg);
    let summary = json!({
        "tool": "tomochaos",
        "version": VERSION,
        "config": config,
        "observable_seed": (cfg.observable == ObservableKind::RandomHermitian)
            .then(|| derive_seed(cfg.seed, OBSERVABLE_STREAM)),
        "results": results,
        "digests": out.digests(),
    });
    out.write_json("summary.json", &summary)?;
    let outputs: Vec<Value> = out
        .files()
        .iter()
        .map(|f| json!({ "file": f.name, "sha256": f.sha256 }))
        .collect();
    let manifest = json!({
        "tool": "tomochaos",
        "version": VERSION,
        "config": config,
        "tasks": task_entries,
        "outputs": outputs,
    });
    out.write_json("manifest.json", &manifest)?;
    Ok(RunOutcome {
        manifest,
        summary,
        failed_tasks: failed,
    })
}

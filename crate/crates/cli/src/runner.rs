//! Experiment execution: dispatches a validated config to its task, runs
//! seeded trials (in parallel, aggregated in trial order), and writes one
//! JSONL record stream plus one CSV summary per run.
//!
//! Per-trial numerical failures become error records and a failure count;
//! they never abort the run. Setup problems (unreadable inputs, impossible
//! sweeps) abort with a typed error that maps onto the process exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sketchspec_core::amm::{
    amm_error_against, sample_size, AmmBaseline, Regime, SampleSizeQuery,
};
use sketchspec_core::chernoff::{
    deviation_curve, rank_cap_satisfied, rudelson_norm_rate_unchecked, subspace_jl_failure_rate,
    subspace_jl_failure_rate_orthonormal,
};
use sketchspec_core::generate::{generate, Spectrum};
use sketchspec_core::io::read_matrix_file;
use sketchspec_core::linalg::{check_rayleigh_sandwich, spectral_norm, stable_rank, svd_default};
use sketchspec_core::lowrank::{
    lowrank_run, lowrank_sweep, lowrank_with_sketch, tail_precondition_holds, LowRankContext,
    LowRankMethod,
};
use sketchspec_core::regression::{
    regression_report, solve_exact, solve_sketched, solve_with_sketch, RegressionSolution,
};
use sketchspec_core::rng::derive;
use sketchspec_core::sketch::{amm_row_distribution, apply_sketch, identity_sketch, SketchOp};
use sketchspec_core::{DenseMatrix, Error as CoreError};

use crate::calibrate::{run_calibration, Calibration};
use crate::config::{ExperimentConfig, Task};
use crate::support::{ceil_at_least_one, gaussian_threshold, median, row_sample_pair, synth_rhs};

/// Environment variable capping the rayon pool used for trial loops.
pub const THREADS_ENV: &str = "SKETCHSPEC_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// Bad configuration or inputs that fail validation at setup time.
    #[error("config error: {0}")]
    Config(String),
    /// Filesystem problems reading inputs or writing outputs.
    #[error("i/o error: {0}")]
    Io(String),
    /// Unexpected numerical failure during setup.
    #[error("internal error: {0}")]
    Internal(String),
}

fn internal(e: CoreError) -> RunError {
    RunError::Internal(e.to_string())
}

fn matrix_err(e: CoreError) -> RunError {
    match e {
        CoreError::Io(m) => RunError::Io(m),
        other => RunError::Config(other.to_string()),
    }
}

/// Everything a run produces, before any file is written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub jsonl_lines: Vec<String>,
    pub csv_header: String,
    pub csv_rows: Vec<String>,
    /// Count of trials that raised a numerical error (recorded, not fatal).
    pub failures: usize,
    pub warnings: Vec<String>,
    /// Present when the task was calibrate.
    pub calibration: Option<Calibration>,
}

impl RunOutput {
    fn new(header: &str) -> Self {
        RunOutput {
            jsonl_lines: Vec::new(),
            csv_header: header.to_string(),
            csv_rows: Vec::new(),
            failures: 0,
            warnings: Vec::new(),
            calibration: None,
        }
    }
}

/// Paths and counts reported after a run has been written to disk.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub jsonl_path: PathBuf,
    pub csv_path: PathBuf,
    pub calibration_path: Option<PathBuf>,
    pub records: usize,
    pub failures: usize,
}

#[derive(Serialize)]
struct AmmRecord {
    task: &'static str,
    regime: Regime,
    n: usize,
    m: usize,
    p: usize,
    eps: f64,
    t: usize,
    trial: usize,
    seed: u64,
    achieved_error: f64,
    bound: f64,
    relative_eps: f64,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    sandwich_holds: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sandwich_worst_ratio: Option<f64>,
}

#[derive(Serialize)]
struct RegressionRecord {
    task: &'static str,
    n: usize,
    m: usize,
    eps: f64,
    t: usize,
    trial: usize,
    seed: u64,
    residual_ratio: f64,
    solution_distance: f64,
    bound_rhs: f64,
    passed_approx: bool,
    passed_distance: bool,
}

#[derive(Serialize)]
struct LowRankRecord {
    task: &'static str,
    method: LowRankMethod,
    n: usize,
    m: usize,
    eps: f64,
    k: usize,
    t: usize,
    trial: usize,
    seed: u64,
    ratio: f64,
    threshold: f64,
    passed: bool,
    rank_condition: bool,
}

#[derive(Serialize)]
struct JlRecord {
    task: &'static str,
    k: usize,
    d: usize,
    t: usize,
    eps: f64,
    trials: usize,
    violations: usize,
    failure_rate: f64,
    seed_base: u64,
}

#[derive(Serialize)]
struct ChernoffRecord {
    task: &'static str,
    ensemble: String,
    n: usize,
    r: usize,
    gamma: f64,
    t: usize,
    trials: usize,
    median: f64,
    q90: f64,
    q99: f64,
    seed_base: u64,
}

#[derive(Serialize)]
struct RudelsonRecord {
    task: &'static str,
    t: usize,
    trials: usize,
    exceed_count: usize,
    exceed_rate: f64,
    norm_a: f64,
    stable_rank: f64,
    seed_base: u64,
}

#[derive(Serialize)]
struct CalibrationRecord {
    task: &'static str,
    regime: String,
    constant: f64,
    pass_rate: f64,
    saturated: bool,
    eps: f64,
    trials: usize,
    seed_base: u64,
}

#[derive(Serialize)]
struct TrialErrorRecord {
    task: &'static str,
    n: usize,
    eps: f64,
    t: usize,
    trial: usize,
    seed: u64,
    error: String,
    passed: bool,
}

fn to_line<T: Serialize>(rec: &T) -> String {
    serde_json::to_string(rec).expect("records serialize")
}

/// Runs the config inside a rayon pool sized by `SKETCHSPEC_THREADS`
/// (default: all cores). Outputs are byte-identical regardless of the pool
/// size.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    cfg.validate().map_err(RunError::Config)?;
    let pool = build_pool()?;
    pool.install(|| execute_inner(cfg))
}

fn build_pool() -> Result<rayon::ThreadPool, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| {
            RunError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))
        })?;
        if n == 0 {
            return Err(RunError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got 0"
            )));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| RunError::Internal(format!("thread pool: {e}")))
}

fn execute_inner(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    match cfg.task {
        Task::AmmProject => run_amm(cfg, true),
        Task::AmmRowSample => run_amm(cfg, false),
        Task::Regression => run_regression(cfg),
        Task::LowrankSign => run_lowrank_sweep_task(cfg, LowRankMethod::SignProj, "lowrank-sign"),
        Task::LowrankLeverage => {
            run_lowrank_sweep_task(cfg, LowRankMethod::LeverageSample, "lowrank-leverage")
        }
        Task::LowrankGaussian => run_lowrank_gaussian(cfg),
        Task::LowrankTail => run_lowrank_tail(cfg),
        Task::JlLab => run_jl(cfg),
        Task::ChernoffLab => run_chernoff(cfg),
        Task::RudelsonLab => run_rudelson(cfg),
        Task::Calibrate => run_calibrate(cfg),
    }
}

/// Executes and writes `<prefix>.jsonl`, `<prefix>.csv`, and for the
/// calibrate task `<prefix>.calibration.json`.
pub fn execute_to_files(cfg: &ExperimentConfig) -> Result<(RunOutput, RunSummary), RunError> {
    let out = execute(cfg)?;
    let jsonl_path = PathBuf::from(format!("{}.jsonl", cfg.output_path));
    let csv_path = PathBuf::from(format!("{}.csv", cfg.output_path));
    if let Some(parent) = jsonl_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| RunError::Io(format!("create {}: {e}", parent.display())))?;
        }
    }
    let mut jsonl = out.jsonl_lines.join("\n");
    if !jsonl.is_empty() {
        jsonl.push('\n');
    }
    fs::write(&jsonl_path, jsonl)
        .map_err(|e| RunError::Io(format!("write {}: {e}", jsonl_path.display())))?;
    let mut csv = out.csv_header.clone();
    csv.push('\n');
    for row in &out.csv_rows {
        csv.push_str(row);
        csv.push('\n');
    }
    fs::write(&csv_path, csv)
        .map_err(|e| RunError::Io(format!("write {}: {e}", csv_path.display())))?;
    let calibration_path = if let Some(cal) = &out.calibration {
        let p = PathBuf::from(format!("{}.calibration.json", cfg.output_path));
        cal.save(&p).map_err(RunError::Io)?;
        Some(p)
    } else {
        None
    };
    let summary = RunSummary {
        jsonl_path,
        csv_path,
        calibration_path,
        records: out.jsonl_lines.len(),
        failures: out.failures,
    };
    Ok((out, summary))
}

/// Resolution order for a regime constant: config override, then the
/// calibration file named by the config, then the built-in defaults.
fn resolve_constant(cfg: &ExperimentConfig, cal: &Calibration, key: &str) -> Result<f64, RunError> {
    if let Some(&v) = cfg.constant_overrides.get(key) {
        return Ok(v);
    }
    cal.constant(key).ok_or_else(|| {
        RunError::Config(format!("calibration has no constant for regime {key}"))
    })
}

fn load_calibration(cfg: &ExperimentConfig) -> Result<Calibration, RunError> {
    match &cfg.calibration_path {
        Some(p) => Calibration::load(Path::new(p)).map_err(RunError::Config),
        None => Ok(Calibration::defaults()),
    }
}

fn load_matrix_a(cfg: &ExperimentConfig, n_over: Option<usize>) -> Result<DenseMatrix, RunError> {
    if let Some(g) = &cfg.generator {
        let mut spec = g.clone();
        if let Some(n) = n_over {
            if matches!(spec.spectrum, Spectrum::GraphIncidence { .. }) {
                return Err(RunError::Config(
                    "sweep.n does not apply to graph-incidence generators".into(),
                ));
            }
            spec.shape.0 = n;
        }
        spec.validate().map_err(matrix_err)?;
        generate(&spec).map_err(matrix_err)
    } else if let Some(p) = &cfg.matrix_path {
        if n_over.is_some() {
            return Err(RunError::Config(
                "sweep.n needs a generator, not a matrix file".into(),
            ));
        }
        read_matrix_file(Path::new(p)).map_err(matrix_err)
    } else {
        Err(RunError::Config("no input matrix configured".into()))
    }
}

fn load_matrix_b(
    cfg: &ExperimentConfig,
    a: &DenseMatrix,
    n_over: Option<usize>,
) -> Result<DenseMatrix, RunError> {
    let b = if let Some(p) = &cfg.matrix_b_path {
        read_matrix_file(Path::new(p)).map_err(matrix_err)?
    } else {
        let mut spec = match (&cfg.generator_b, &cfg.generator) {
            (Some(g), _) => g.clone(),
            (None, Some(g)) => {
                let mut derived = g.clone();
                derived.seed = derive(g.seed, 0xB);
                derived
            }
            (None, None) => {
                return Err(RunError::Config("no second input matrix configured".into()))
            }
        };
        if let Some(n) = n_over {
            spec.shape.0 = n;
        }
        spec.validate().map_err(matrix_err)?;
        generate(&spec).map_err(matrix_err)?
    };
    if b.rows() != a.rows() {
        return Err(RunError::Config(format!(
            "second matrix has {} rows, first has {}",
            b.rows(),
            a.rows()
        )));
    }
    Ok(b)
}

fn eps_list(cfg: &ExperimentConfig, default: f64) -> Vec<f64> {
    if cfg.sweep.eps.is_empty() {
        vec![default]
    } else {
        cfg.sweep.eps.clone()
    }
}

fn n_points(cfg: &ExperimentConfig) -> Vec<Option<usize>> {
    if cfg.sweep.n.is_empty() {
        vec![None]
    } else {
        cfg.sweep.n.iter().map(|&n| Some(n)).collect()
    }
}

fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    cfg.seed_base.wrapping_add(trial as u64)
}

fn fmt_rate(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

const AMM_CSV: &str = "task,regime,n,eps,t,trials,pass_rate,median_error,median_relative_eps";

fn regime_label(regime: Regime) -> String {
    serde_json::to_value(regime)
        .expect("regime serializes")
        .as_str()
        .expect("regime is a string")
        .to_string()
}

fn run_amm(cfg: &ExperimentConfig, project: bool) -> Result<RunOutput, RunError> {
    let cal = load_calibration(cfg)?;
    let (task, regime, key) = if project {
        (Task::AmmProject.label(), Regime::ProjRank, "amm-proj-rank")
    } else {
        (
            Task::AmmRowSample.label(),
            Regime::RowSampleStableRank,
            "amm-row-sample",
        )
    };
    let constant = resolve_constant(cfg, &cal, key)?;
    let mut out = RunOutput::new(AMM_CSV);

    for n_over in n_points(cfg) {
        let a = load_matrix_a(cfg, n_over)?;
        let b = load_matrix_b(cfg, &a, n_over)?;
        let n = a.rows();
        let baseline = AmmBaseline::new(&a, &b).map_err(internal)?;
        let rank_param = if project {
            let ra = svd_default(&a).map_err(internal)?.rank();
            let rb = svd_default(&b).map_err(internal)?.rank();
            ra.max(rb) as f64
        } else {
            stable_rank(&a)
                .map_err(internal)?
                .max(stable_rank(&b).map_err(internal)?)
        };
        let dist = if project {
            None
        } else {
            Some(amm_row_distribution(&a, &b).map_err(internal)?)
        };

        for &eps in &eps_list(cfg, 0.25) {
            let t_list: Vec<usize> = if cfg.identity_hook {
                vec![n]
            } else if !cfg.sweep.t.is_empty() {
                cfg.sweep.t.clone()
            } else {
                let q = SampleSizeQuery::new(regime, rank_param, eps, constant);
                vec![sample_size(&q).map_err(|e| RunError::Config(e.to_string()))?]
            };
            for &t in &t_list {
                let results: Vec<Result<AmmRecord, String>> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|trial| {
                        let seed = trial_seed(cfg, trial);
                        let run = || -> sketchspec_core::Result<AmmRecord> {
                            let (atil, btil) = if cfg.identity_hook {
                                let id = identity_sketch(n, n)?;
                                (id.mul(&a)?, id.mul(&b)?)
                            } else if project {
                                let op = SketchOp::sign(t, n, seed);
                                (apply_sketch(&op, &a)?, apply_sketch(&op, &b)?)
                            } else {
                                row_sample_pair(&a, &b, dist.as_ref().expect("dist built"), t, seed)?
                            };
                            let report = amm_error_against(&baseline, &atil, &btil, eps)?;
                            let (sandwich_holds, sandwich_worst_ratio) =
                                if project && cfg.record_sandwich {
                                    let v = check_rayleigh_sandwich(&a, &atil, eps)?;
                                    (Some(v.holds), Some(v.worst_ratio))
                                } else {
                                    (None, None)
                                };
                            Ok(AmmRecord {
                                task,
                                regime,
                                n,
                                m: a.cols(),
                                p: b.cols(),
                                eps,
                                t,
                                trial,
                                seed,
                                achieved_error: report.achieved_error,
                                bound: report.bound,
                                relative_eps: report.relative_eps,
                                passed: report.passed,
                                sandwich_holds,
                                sandwich_worst_ratio,
                            })
                        };
                        run().map_err(|e| e.to_string())
                    })
                    .collect();

                let mut errors = Vec::new();
                let mut rel = Vec::new();
                let mut passes = 0usize;
                for (trial, res) in results.into_iter().enumerate() {
                    match res {
                        Ok(rec) => {
                            if rec.passed {
                                passes += 1;
                            }
                            errors.push(rec.achieved_error);
                            rel.push(rec.relative_eps);
                            out.jsonl_lines.push(to_line(&rec));
                        }
                        Err(msg) => {
                            out.failures += 1;
                            out.jsonl_lines.push(to_line(&TrialErrorRecord {
                                task,
                                n,
                                eps,
                                t,
                                trial,
                                seed: trial_seed(cfg, trial),
                                error: msg,
                                passed: false,
                            }));
                        }
                    }
                }
                let med_err = if errors.is_empty() { f64::NAN } else { median(&errors) };
                let med_rel = if rel.is_empty() { f64::NAN } else { median(&rel) };
                out.csv_rows.push(format!(
                    "{task},{},{n},{eps},{t},{},{},{med_err},{med_rel}",
                    regime_label(regime),
                    cfg.trials,
                    fmt_rate(passes, cfg.trials),
                ));
            }
        }
    }
    Ok(out)
}

const REGRESSION_CSV: &str =
    "task,n,eps,t,trials,approx_rate,distance_rate,median_residual_ratio,median_distance";

fn run_regression(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let cal = load_calibration(cfg)?;
    let c_res = resolve_constant(cfg, &cal, "regression-residual")?;
    let c_dist = resolve_constant(cfg, &cal, "regression-distance")?;
    let task = Task::Regression.label();
    let mut out = RunOutput::new(REGRESSION_CSV);

    for n_over in n_points(cfg) {
        let a = load_matrix_a(cfg, n_over)?;
        let n = a.rows();
        let b: Vec<f64> = if let Some(p) = &cfg.matrix_b_path {
            let m = read_matrix_file(Path::new(p)).map_err(matrix_err)?;
            if m.cols() != 1 || m.rows() != n {
                return Err(RunError::Config(format!(
                    "right-hand side must be {n} x 1, got {} x {}",
                    m.rows(),
                    m.cols()
                )));
            }
            m.entries().to_vec()
        } else {
            synth_rhs(&a, derive(cfg.instance_seed(), 0xB0), cfg.residual_scale)
                .map_err(internal)?
        };
        let exact = solve_exact(&a, &b).map_err(internal)?;
        let rank = svd_default(&a).map_err(internal)?.rank() as f64;

        for &eps in &eps_list(cfg, 0.1) {
            let t_list: Vec<usize> = if cfg.identity_hook {
                vec![n]
            } else if !cfg.sweep.t.is_empty() {
                cfg.sweep.t.clone()
            } else {
                let t_res = ceil_at_least_one(c_res * rank / eps);
                let t_dist = ceil_at_least_one(c_dist * rank / (eps * eps));
                let mut ts = vec![t_res, t_dist];
                ts.sort_unstable();
                ts.dedup();
                ts
            };
            for &t in &t_list {
                let results: Vec<Result<RegressionRecord, String>> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|trial| {
                        let seed = trial_seed(cfg, trial);
                        let run = || -> sketchspec_core::Result<RegressionRecord> {
                            let sk: RegressionSolution = if cfg.identity_hook {
                                let id = identity_sketch(n, n)?;
                                solve_with_sketch(&a, &b, &id)?
                            } else {
                                solve_sketched(&a, &b, t, seed)?
                            };
                            let report = regression_report(&a, &b, &exact, &sk, eps)?;
                            Ok(RegressionRecord {
                                task,
                                n,
                                m: a.cols(),
                                eps,
                                t,
                                trial,
                                seed,
                                residual_ratio: report.residual_ratio,
                                solution_distance: report.solution_distance,
                                bound_rhs: report.bound_rhs,
                                passed_approx: report.passed_approx,
                                passed_distance: report.passed_distance,
                            })
                        };
                        run().map_err(|e| e.to_string())
                    })
                    .collect();

                let mut ratios = Vec::new();
                let mut dists = Vec::new();
                let mut approx_hits = 0usize;
                let mut dist_hits = 0usize;
                for (trial, res) in results.into_iter().enumerate() {
                    match res {
                        Ok(rec) => {
                            if rec.passed_approx {
                                approx_hits += 1;
                            }
                            if rec.passed_distance {
                                dist_hits += 1;
                            }
                            ratios.push(rec.residual_ratio);
                            dists.push(rec.solution_distance);
                            out.jsonl_lines.push(to_line(&rec));
                        }
                        Err(msg) => {
                            out.failures += 1;
                            out.jsonl_lines.push(to_line(&TrialErrorRecord {
                                task,
                                n,
                                eps,
                                t,
                                trial,
                                seed: trial_seed(cfg, trial),
                                error: msg,
                                passed: false,
                            }));
                        }
                    }
                }
                let med_ratio = if ratios.is_empty() { f64::NAN } else { median(&ratios) };
                let med_dist = if dists.is_empty() { f64::NAN } else { median(&dists) };
                out.csv_rows.push(format!(
                    "{task},{n},{eps},{t},{},{},{},{med_ratio},{med_dist}",
                    cfg.trials,
                    fmt_rate(approx_hits, cfg.trials),
                    fmt_rate(dist_hits, cfg.trials),
                ));
            }
        }
    }
    Ok(out)
}

const LOWRANK_CSV: &str = "task,method,n,eps,t,k,trials,pass_rate,median_ratio";

fn method_label(method: LowRankMethod) -> String {
    serde_json::to_value(method)
        .expect("method serializes")
        .as_str()
        .expect("method is a string")
        .to_string()
}

struct LowRankPoint {
    records: Vec<LowRankRecord>,
    error: Option<String>,
}

/// Shared-sketch tasks: one sketch per trial, every k read off the same
/// draw. The k = 0 summary row reports the per-trial conjunction over all
/// swept k.
fn run_lowrank_sweep_task(
    cfg: &ExperimentConfig,
    method: LowRankMethod,
    key: &str,
) -> Result<RunOutput, RunError> {
    let cal = load_calibration(cfg)?;
    let constant = resolve_constant(cfg, &cal, key)?;
    let task = if method == LowRankMethod::SignProj {
        Task::LowrankSign.label()
    } else {
        Task::LowrankLeverage.label()
    };
    let mut out = RunOutput::new(LOWRANK_CSV);

    for n_over in n_points(cfg) {
        let a = load_matrix_a(cfg, n_over)?;
        let n = a.rows();
        let ctx = LowRankContext::new(&a).map_err(internal)?;
        let r = ctx.rank();
        let ks: Vec<usize> = if cfg.sweep.k.is_empty() {
            (1..=r).collect()
        } else {
            cfg.sweep.k.clone()
        };
        let k_max = *ks.iter().max().expect("ks nonempty");
        if k_max > a.rows().min(a.cols()) {
            return Err(RunError::Config(format!(
                "sweep.k max {k_max} exceeds the smaller matrix dimension {}",
                a.rows().min(a.cols())
            )));
        }

        for &eps in &eps_list(cfg, 0.25) {
            let t = if cfg.identity_hook {
                n
            } else if let Some(&t) = cfg.sweep.t.first() {
                t
            } else {
                let regime = if method == LowRankMethod::SignProj {
                    Regime::ProjRank
                } else {
                    Regime::RowSampleStableRank
                };
                let q = SampleSizeQuery::new(regime, r as f64, eps, constant);
                sample_size(&q).map_err(|e| RunError::Config(e.to_string()))?
            };
            if t < k_max {
                return Err(RunError::Config(format!(
                    "sketch size t = {t} is below the largest swept k = {k_max}"
                )));
            }
            let threshold = 1.0 + eps;

            let points: Vec<LowRankPoint> = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let seed = trial_seed(cfg, trial);
                    let run = || -> sketchspec_core::Result<Vec<LowRankRecord>> {
                        let per_k: Vec<(f64, bool)> = if cfg.identity_hook {
                            let id = identity_sketch(n, n)?;
                            ks.iter()
                                .map(|&k| {
                                    lowrank_with_sketch(&a, &id, k, method)
                                        .map(|res| (res.ratio, res.rank_condition))
                                })
                                .collect::<sketchspec_core::Result<_>>()?
                        } else {
                            let sweep = lowrank_sweep(&ctx, method, t, seed, k_max)?;
                            ks.iter()
                                .map(|&k| (sweep.ratios[k - 1], sweep.rank_condition[k - 1]))
                                .collect()
                        };
                        Ok(ks
                            .iter()
                            .zip(per_k)
                            .map(|(&k, (ratio, rank_condition))| LowRankRecord {
                                task,
                                method,
                                n,
                                m: a.cols(),
                                eps,
                                k,
                                t,
                                trial,
                                seed,
                                ratio,
                                threshold,
                                passed: ratio <= threshold,
                                rank_condition,
                            })
                            .collect())
                    };
                    match run() {
                        Ok(records) => LowRankPoint {
                            records,
                            error: None,
                        },
                        Err(e) => LowRankPoint {
                            records: Vec::new(),
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect();

            let mut per_k_ratios: Vec<Vec<f64>> = vec![Vec::new(); ks.len()];
            let mut per_k_passes = vec![0usize; ks.len()];
            let mut joint_passes = 0usize;
            let mut worst_ratios = Vec::new();
            for (trial, point) in points.into_iter().enumerate() {
                if let Some(msg) = point.error {
                    out.failures += 1;
                    out.jsonl_lines.push(to_line(&TrialErrorRecord {
                        task,
                        n,
                        eps,
                        t,
                        trial,
                        seed: trial_seed(cfg, trial),
                        error: msg,
                        passed: false,
                    }));
                    continue;
                }
                let mut all = true;
                let mut worst = f64::NEG_INFINITY;
                for (idx, rec) in point.records.iter().enumerate() {
                    if rec.passed {
                        per_k_passes[idx] += 1;
                    } else {
                        all = false;
                    }
                    per_k_ratios[idx].push(rec.ratio);
                    worst = worst.max(rec.ratio);
                }
                if all {
                    joint_passes += 1;
                }
                worst_ratios.push(worst);
                for rec in &point.records {
                    out.jsonl_lines.push(to_line(rec));
                }
            }
            let label = method_label(method);
            for (idx, &k) in ks.iter().enumerate() {
                let med = if per_k_ratios[idx].is_empty() {
                    f64::NAN
                } else {
                    median(&per_k_ratios[idx])
                };
                out.csv_rows.push(format!(
                    "{task},{label},{n},{eps},{t},{k},{},{},{med}",
                    cfg.trials,
                    fmt_rate(per_k_passes[idx], cfg.trials),
                ));
            }
            let med_worst = if worst_ratios.is_empty() {
                f64::NAN
            } else {
                median(&worst_ratios)
            };
            out.csv_rows.push(format!(
                "{task},{label},{n},{eps},{t},0,{},{},{med_worst}",
                cfg.trials,
                fmt_rate(joint_passes, cfg.trials),
            ));
        }
    }
    Ok(out)
}

/// Per-k sketch sizes: each target rank gets its own trial loop and
/// threshold `2 + eps * sqrt((r - k) / k)`.
fn run_lowrank_gaussian(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let cal = load_calibration(cfg)?;
    let constant = resolve_constant(cfg, &cal, "lowrank-gaussian")?;
    let task = Task::LowrankGaussian.label();
    let mut out = RunOutput::new(LOWRANK_CSV);

    for n_over in n_points(cfg) {
        let a = load_matrix_a(cfg, n_over)?;
        let n = a.rows();
        let ctx = LowRankContext::new(&a).map_err(internal)?;
        let r = ctx.rank();
        let ks: Vec<usize> = if cfg.sweep.k.is_empty() {
            let mut ks: Vec<usize> = [1usize, 2, 5, 10, 20, 40]
                .into_iter()
                .filter(|&k| k <= r)
                .collect();
            if !ks.contains(&r) {
                ks.push(r);
            }
            ks
        } else {
            cfg.sweep.k.clone()
        };
        if let Some(&bad) = ks.iter().find(|&&k| k > a.rows().min(a.cols())) {
            return Err(RunError::Config(format!(
                "sweep.k value {bad} exceeds the smaller matrix dimension {}",
                a.rows().min(a.cols())
            )));
        }

        for &eps in &eps_list(cfg, 0.25) {
            for &k in &ks {
                let t = if cfg.identity_hook {
                    n
                } else if let Some(&t) = cfg.sweep.t.first() {
                    t
                } else {
                    let q = SampleSizeQuery::new(Regime::ProjRank, k as f64, eps, constant);
                    sample_size(&q).map_err(|e| RunError::Config(e.to_string()))?
                };
                if t < k {
                    return Err(RunError::Config(format!(
                        "sketch size t = {t} is below the target rank k = {k}"
                    )));
                }
                let threshold = gaussian_threshold(r, k, eps);
                let results: Vec<Result<LowRankRecord, String>> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|trial| {
                        let seed = trial_seed(cfg, trial);
                        let run = || -> sketchspec_core::Result<LowRankRecord> {
                            let res = if cfg.identity_hook {
                                let id = identity_sketch(n, n)?;
                                lowrank_with_sketch(&a, &id, k, LowRankMethod::GaussianProj)?
                            } else {
                                lowrank_run(&ctx, LowRankMethod::GaussianProj, k, t, seed)?
                            };
                            Ok(LowRankRecord {
                                task,
                                method: LowRankMethod::GaussianProj,
                                n,
                                m: a.cols(),
                                eps,
                                k,
                                t,
                                trial,
                                seed,
                                ratio: res.ratio,
                                threshold,
                                passed: res.ratio <= threshold,
                                rank_condition: res.rank_condition,
                            })
                        };
                        run().map_err(|e| e.to_string())
                    })
                    .collect();
                collect_lowrank_rows(
                    cfg,
                    &mut out,
                    task,
                    LowRankMethod::GaussianProj,
                    n,
                    eps,
                    t,
                    k,
                    results,
                );
            }
        }
    }
    Ok(out)
}

/// Tail-projection task: a single k, both the rank-k and full-projection
/// variants, each with its own calibrated constant.
fn run_lowrank_tail(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let cal = load_calibration(cfg)?;
    let task = Task::LowrankTail.label();
    let mut out = RunOutput::new(LOWRANK_CSV);

    for n_over in n_points(cfg) {
        let a = load_matrix_a(cfg, n_over)?;
        let n = a.rows();
        let ctx = LowRankContext::new(&a).map_err(internal)?;
        let r = ctx.rank();
        let k = cfg
            .sweep
            .k
            .first()
            .copied()
            .unwrap_or_else(|| 10.min(r.saturating_sub(1)).max(1));
        if k > a.rows().min(a.cols()) {
            return Err(RunError::Config(format!(
                "sweep.k value {k} exceeds the smaller matrix dimension {}",
                a.rows().min(a.cols())
            )));
        }
        if !tail_precondition_holds(&a, k).map_err(internal)? {
            out.warnings.push(format!(
                "tail assumption fails at k = {k}: the residual stable rank exceeds k; \
                 ratios may exceed their thresholds"
            ));
        }

        for &eps in &eps_list(cfg, 0.25) {
            if eps >= 1.0 / 3.0 {
                out.warnings.push(format!(
                    "tail guarantee assumes eps < 1/3; eps = {eps} is exploratory"
                ));
            }
            for (method, key, threshold) in [
                (
                    LowRankMethod::TailSignProj,
                    "lowrank-tail-rank-k",
                    2.0 + eps,
                ),
                (LowRankMethod::TailFullProj, "lowrank-tail-full", 1.0 + eps),
            ] {
                let constant = resolve_constant(cfg, &cal, key)?;
                let t = if cfg.identity_hook {
                    n
                } else if let Some(&t) = cfg.sweep.t.first() {
                    t
                } else {
                    let q =
                        SampleSizeQuery::new(Regime::ProjStableRank, k as f64, eps, constant);
                    sample_size(&q).map_err(|e| RunError::Config(e.to_string()))?
                };
                if t < k {
                    return Err(RunError::Config(format!(
                        "sketch size t = {t} is below the target rank k = {k}"
                    )));
                }
                let results: Vec<Result<LowRankRecord, String>> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|trial| {
                        let seed = trial_seed(cfg, trial);
                        let run = || -> sketchspec_core::Result<LowRankRecord> {
                            let res = if cfg.identity_hook {
                                let id = identity_sketch(n, n)?;
                                lowrank_with_sketch(&a, &id, k, method)?
                            } else {
                                lowrank_run(&ctx, method, k, t, seed)?
                            };
                            Ok(LowRankRecord {
                                task,
                                method,
                                n,
                                m: a.cols(),
                                eps,
                                k,
                                t,
                                trial,
                                seed,
                                ratio: res.ratio,
                                threshold,
                                passed: res.ratio <= threshold,
                                rank_condition: res.rank_condition,
                            })
                        };
                        run().map_err(|e| e.to_string())
                    })
                    .collect();
                collect_lowrank_rows(cfg, &mut out, task, method, n, eps, t, k, results);
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn collect_lowrank_rows(
    cfg: &ExperimentConfig,
    out: &mut RunOutput,
    task: &'static str,
    method: LowRankMethod,
    n: usize,
    eps: f64,
    t: usize,
    k: usize,
    results: Vec<Result<LowRankRecord, String>>,
) {
    let mut ratios = Vec::new();
    let mut passes = 0usize;
    for (trial, res) in results.into_iter().enumerate() {
        match res {
            Ok(rec) => {
                if rec.passed {
                    passes += 1;
                }
                ratios.push(rec.ratio);
                out.jsonl_lines.push(to_line(&rec));
            }
            Err(msg) => {
                out.failures += 1;
                out.jsonl_lines.push(to_line(&TrialErrorRecord {
                    task,
                    n,
                    eps,
                    t,
                    trial,
                    seed: trial_seed(cfg, trial),
                    error: msg,
                    passed: false,
                }));
            }
        }
    }
    let med = if ratios.is_empty() { f64::NAN } else { median(&ratios) };
    out.csv_rows.push(format!(
        "{task},{},{n},{eps},{t},{k},{},{},{med}",
        method_label(method),
        cfg.trials,
        fmt_rate(passes, cfg.trials),
    ));
}

const JL_CSV: &str = "task,k,d,t,eps,trials,violations,failure_rate";

fn run_jl(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let task = Task::JlLab.label();
    let mut out = RunOutput::new(JL_CSV);
    let ks = if cfg.sweep.k.is_empty() {
        vec![4]
    } else {
        cfg.sweep.k.clone()
    };
    let ds = if cfg.sweep.n.is_empty() {
        vec![64]
    } else {
        cfg.sweep.n.clone()
    };
    let eps = eps_list(cfg, 0.5);

    let mut combos = Vec::new();
    for &k in &ks {
        for &d in &ds {
            if k > d {
                return Err(RunError::Config(format!(
                    "jl-lab needs k <= d, got k = {k}, d = {d}"
                )));
            }
            for &e in &eps {
                for &t in &cfg.sweep.t {
                    combos.push((k, d, e, t));
                }
            }
        }
    }

    let results: Vec<Result<JlRecord, String>> = combos
        .into_par_iter()
        .map(|(k, d, e, t)| {
            let run = || -> sketchspec_core::Result<JlRecord> {
                let (t_used, rate) = if cfg.identity_hook {
                    (
                        d,
                        subspace_jl_failure_rate_orthonormal(k, d, d, e, cfg.trials, cfg.seed_base)?,
                    )
                } else {
                    (
                        t,
                        subspace_jl_failure_rate(k, d, t, e, cfg.trials, cfg.seed_base)?,
                    )
                };
                Ok(JlRecord {
                    task,
                    k,
                    d,
                    t: t_used,
                    eps: e,
                    trials: cfg.trials,
                    violations: (rate * cfg.trials as f64).round() as usize,
                    failure_rate: rate,
                    seed_base: cfg.seed_base,
                })
            };
            run().map_err(|e| e.to_string())
        })
        .collect();

    for res in results {
        match res {
            Ok(rec) => {
                out.csv_rows.push(format!(
                    "{task},{},{},{},{},{},{},{}",
                    rec.k, rec.d, rec.t, rec.eps, rec.trials, rec.violations, rec.failure_rate
                ));
                out.jsonl_lines.push(to_line(&rec));
            }
            Err(msg) => {
                return Err(RunError::Config(format!("jl-lab point failed: {msg}")));
            }
        }
    }
    Ok(out)
}

fn run_chernoff(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let task = Task::ChernoffLab.label();
    let ens = cfg
        .ensemble
        .as_ref()
        .expect("validated chernoff config has an ensemble")
        .build()
        .map_err(RunError::Config)?;
    let mut out = RunOutput::new("");
    if !rank_cap_satisfied(&ens, &cfg.sweep.t) {
        out.warnings.push(format!(
            "some sketch sizes are below the frame rank {}; those deviations cannot shrink",
            ens.r
        ));
    }
    let curve =
        deviation_curve(&ens, &cfg.sweep.t, cfg.trials, cfg.seed_base).map_err(internal)?;
    let csv = curve.to_csv();
    let mut lines = csv.lines();
    out.csv_header = lines.next().unwrap_or_default().to_string();
    out.csv_rows = lines.map(|l| l.to_string()).collect();
    for q in &curve.quantiles {
        out.jsonl_lines.push(to_line(&ChernoffRecord {
            task,
            ensemble: ens.kind.label().to_string(),
            n: ens.n,
            r: ens.r,
            gamma: ens.gamma,
            t: q.t,
            trials: cfg.trials,
            median: q.median,
            q90: q.q90,
            q99: q.q99,
            seed_base: cfg.seed_base,
        }));
    }
    Ok(out)
}

const RUDELSON_CSV: &str = "task,t,trials,exceed_count,exceed_rate,norm_a,stable_rank";

fn run_rudelson(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let task = Task::RudelsonLab.label();
    let mut out = RunOutput::new(RUDELSON_CSV);
    let a = load_matrix_a(cfg, None)?;
    let sr = stable_rank(&a).map_err(internal)?;
    let norm_a = spectral_norm(&a).map_err(internal)?;

    for &t in &cfg.sweep.t {
        if (t as f64) < sr * (1.0 - 1e-12) {
            if !cfg.allow_below_stable_rank {
                return Err(RunError::Config(format!(
                    "sketch size t = {t} is below the stable rank {sr:.6}; \
                     set allow_below_stable_rank to explore that regime"
                )));
            }
            out.warnings.push(format!(
                "t = {t} is below the stable rank {sr:.6}; the tail guarantee does not apply"
            ));
        }
        let rate = rudelson_norm_rate_unchecked(&a, t, cfg.trials, cfg.seed_base)
            .map_err(internal)?;
        let count = (rate * cfg.trials as f64).round() as usize;
        out.jsonl_lines.push(to_line(&RudelsonRecord {
            task,
            t,
            trials: cfg.trials,
            exceed_count: count,
            exceed_rate: rate,
            norm_a,
            stable_rank: sr,
            seed_base: cfg.seed_base,
        }));
        out.csv_rows.push(format!(
            "{task},{t},{},{count},{rate},{norm_a},{sr}",
            cfg.trials
        ));
    }
    Ok(out)
}

const CALIBRATE_CSV: &str = "regime,constant,pass_rate,saturated";

fn run_calibrate(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let task = Task::Calibrate.label();
    let (cal, outcomes) =
        run_calibration(cfg.trials, cfg.seed_base).map_err(RunError::Internal)?;
    let mut out = RunOutput::new(CALIBRATE_CSV);
    out.warnings = cal.warnings.clone();
    for o in &outcomes {
        out.jsonl_lines.push(to_line(&CalibrationRecord {
            task,
            regime: o.key.to_string(),
            constant: o.constant,
            pass_rate: o.pass_rate,
            saturated: o.saturated,
            eps: cal.eps,
            trials: cfg.trials,
            seed_base: cfg.seed_base,
        }));
        out.csv_rows.push(format!(
            "{},{},{},{}",
            o.key, o.constant, o.pass_rate, o.saturated
        ));
    }
    out.calibration = Some(cal);
    Ok(out)
}

//! Experiment sweeps over regularization weights, block sizes, solvers and
//! seeds, with per-run CSV traces and a summary of epochs to accuracy targets.
//!
//! Output directory layout:
//!
//! - `spec.json`: the experiment spec as run
//! - `runs.csv`: one line per run, pointing at its trace file
//! - `run0000.csv`, ...: per-iteration traces
//! - `summary.csv`: aggregated epochs/seconds to each accuracy target
//!
//! The summary is a pure function of `spec.json`, `runs.csv` and the traces;
//! [`reaggregate`] recomputes it from disk.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::run_solver_with_observer;
use crate::classify::{ClassificationProblem, Formulation};
use crate::data::{fmt_f64, read_libsvm_file, training_accuracy, Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::problem::BlockPartition;
use crate::solver::{IterationRecord, SolverConfig, SolverKind, USchedule};

pub const TRACE_HEADER: [&str; 13] = [
    "k",
    "solver",
    "block",
    "beta",
    "doublings",
    "phi",
    "ref",
    "dx_norm",
    "stationarity",
    "inner_iters",
    "epochs",
    "seconds",
    "accuracy",
];

const RUNS_HEADER: [&str; 10] =
    ["run", "solver", "lambda", "block_size", "u", "seed", "phi0", "accuracy0", "outcome", "trace_file"];

const SUMMARY_HEADER: [&str; 11] = [
    "solver",
    "lambda",
    "block_size",
    "u",
    "target",
    "runs",
    "reached_runs",
    "epochs_mean",
    "epochs_std",
    "seconds_mean",
    "seconds_std",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Libsvm {
        path: PathBuf,
        #[serde(default)]
        n_features: Option<usize>,
        /// Append a constant feature.
        #[serde(default)]
        intercept: bool,
    },
    Synthetic(SyntheticSpec),
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Libsvm { path, n_features, intercept } => {
                let ds = read_libsvm_file(path, *n_features)?;
                Ok(if *intercept { ds.with_intercept() } else { ds })
            }
            DatasetSource::Synthetic(spec) => spec.generate(),
        }
    }
}

fn default_u() -> Vec<f64> {
    vec![crate::solver::DEFAULT_U]
}
fn default_repeats() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_every() -> usize {
    1
}

/// A sweep, read from JSON.
///
/// Every `(solver, λ, block size, u)` cell runs `repeats` times with seeds
/// `base_seed, base_seed + 1, ...`, shared across solvers so runs are paired.
/// `u` only applies to the nonmonotone solver. Full Gauss–Newton ignores the
/// block-size grid and runs once per `λ` with a single block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: DatasetSource,
    pub formulation: Formulation,
    pub lambdas: Vec<f64>,
    pub block_sizes: Vec<usize>,
    pub solvers: Vec<SolverKind>,
    #[serde(default = "default_u")]
    pub u: Vec<f64>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Training-accuracy levels in `(0, 1]`.
    #[serde(default)]
    pub accuracy_targets: Vec<f64>,
    /// End a run once every accuracy target is reached.
    #[serde(default = "default_true")]
    pub stop_at_targets: bool,
    /// Evaluate training accuracy every this many iterations.
    #[serde(default = "default_every")]
    pub accuracy_every: usize,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub max_epochs: Option<f64>,
    #[serde(default)]
    pub time_budget: Option<f64>,
    /// Stationarity target; unset runs to the budget.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub beta_min: Option<f64>,
    #[serde(default)]
    pub inner_tol: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Record elapsed seconds; turn off for byte-reproducible output.
    #[serde(default = "default_true")]
    pub wall_clock: bool,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("experiment spec: {m}")));
        if self.lambdas.is_empty() || self.block_sizes.is_empty() || self.solvers.is_empty() {
            return bad("lambdas, block_sizes and solvers must be nonempty");
        }
        if self.solvers.contains(&SolverKind::LibcodNonmonotone) && self.u.is_empty() {
            return bad("u grid must be nonempty for the nonmonotone solver");
        }
        if self.repeats == 0 {
            return bad("repeats must be >= 1");
        }
        if self.accuracy_every == 0 {
            return bad("accuracy_every must be >= 1");
        }
        if self.lambdas.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return bad("lambdas must be finite and >= 0");
        }
        if self.block_sizes.contains(&0) {
            return bad("block sizes must be >= 1");
        }
        if self.u.iter().any(|&u| !(u > 0.0 && u <= 1.0)) {
            return bad("u values must lie in (0, 1]");
        }
        if self.accuracy_targets.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return bad("accuracy targets must lie in (0, 1]");
        }
        Ok(())
    }

    fn solver_config(&self, seed: u64, u: Option<f64>) -> SolverConfig {
        let mut config = SolverConfig::benchmark();
        config.seed = seed;
        config.record_time = self.wall_clock;
        config.beta_min = self.beta_min;
        if let Some(n) = self.max_iters {
            config.max_outer_iters = n;
        }
        if let Some(e) = self.max_epochs {
            config.max_epochs = e;
        }
        config.max_seconds = self.time_budget;
        config.target_stationarity = self.eps.unwrap_or(f64::INFINITY);
        if let Some(tol) = self.inner_tol {
            config.inner_tol = tol;
        }
        if let Some(u) = u {
            config.u = USchedule::Constant(u);
        }
        config
    }
}

/// One trace row: the solver record plus training accuracy when evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub record: IterationRecord,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub solver: SolverKind,
    pub lambda: f64,
    pub block_size: usize,
    pub u: Option<f64>,
    pub seed: u64,
    pub phi0: f64,
    pub accuracy0: f64,
    /// Termination reason, or `error: ...` when the solver failed.
    pub outcome: String,
    pub rows: Vec<TraceRow>,
}

impl RunResult {
    /// `(epochs, seconds)` at the first point with accuracy `≥ target`.
    pub fn time_to_accuracy(&self, target: f64) -> Option<(f64, f64)> {
        if self.accuracy0 >= target {
            return Some((0.0, 0.0));
        }
        self.rows
            .iter()
            .find(|r| r.accuracy.is_some_and(|a| a >= target))
            .map(|r| (r.record.epochs, r.record.seconds))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub solver: SolverKind,
    pub lambda: f64,
    pub block_size: usize,
    pub u: Option<f64>,
    pub target: f64,
    pub runs: usize,
    pub reached_runs: usize,
    /// `(mean, std)` of epochs to target; `None` unless every run reached it.
    pub epochs: Option<(f64, f64)>,
    pub seconds: Option<(f64, f64)>,
}

impl SummaryRow {
    pub fn reached(&self) -> bool {
        self.epochs.is_some()
    }
}

/// Mean and sample standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<RunResult>,
    pub summary: Vec<SummaryRow>,
}

struct Cell {
    solver: SolverKind,
    lambda: f64,
    block_size: usize,
    u: Option<f64>,
    seed: u64,
}

fn cells(spec: &ExperimentSpec, n: usize) -> Vec<Cell> {
    let mut out = Vec::new();
    for &solver in &spec.solvers {
        for &lambda in &spec.lambdas {
            let sizes: Vec<usize> = match solver {
                SolverKind::FullGaussNewton => vec![n],
                _ => spec.block_sizes.iter().map(|&b| b.min(n)).collect(),
            };
            let us: Vec<Option<f64>> = match solver {
                SolverKind::LibcodNonmonotone => spec.u.iter().copied().map(Some).collect(),
                _ => vec![None],
            };
            for &block_size in &sizes {
                for &u in &us {
                    for r in 0..spec.repeats {
                        out.push(Cell { solver, lambda, block_size, u, seed: spec.base_seed + r as u64 });
                    }
                }
            }
        }
    }
    out
}

fn run_cell(spec: &ExperimentSpec, data: &Arc<Dataset>, id: usize, cell: &Cell) -> Result<RunResult> {
    let n = data.num_features();
    let partition = BlockPartition::uniform(n, cell.block_size)?;
    let problem = ClassificationProblem::new(data.clone(), spec.formulation, cell.lambda, partition)?;
    let config = spec.solver_config(cell.seed, cell.u);
    let x0 = DVector::zeros(n);
    let phi0 = crate::problem::eval_phi(&problem, &x0)?;
    let accuracy0 = training_accuracy(data, &x0);
    let top_target = spec.accuracy_targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut reached_top = spec.stop_at_targets && !spec.accuracy_targets.is_empty() && accuracy0 >= top_target;

    let mut rows = Vec::new();
    let outcome = if reached_top {
        "targets-reached".to_string()
    } else {
        let result = run_solver_with_observer(cell.solver, &problem, &config, &x0, |record, x| {
            let accuracy = ((record.k + 1) % spec.accuracy_every == 0).then(|| training_accuracy(data, x));
            rows.push(TraceRow { record: record.clone(), accuracy });
            if spec.stop_at_targets && accuracy.is_some_and(|a| a >= top_target) {
                reached_top = true;
                return false;
            }
            true
        });
        match result {
            Ok(_) if reached_top => "targets-reached".to_string(),
            Ok(out) => out.reason.to_string(),
            Err(e) => format!("error: {e}"),
        }
    };
    Ok(RunResult {
        run: id,
        solver: cell.solver,
        lambda: cell.lambda,
        block_size: cell.block_size,
        u: cell.u,
        seed: cell.seed,
        phi0,
        accuracy0,
        outcome,
        rows,
    })
}

/// Runs every cell (in parallel), aggregates, and writes outputs when
/// `spec.output_dir` is set. Solver failures are recorded per run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let data = Arc::new(spec.dataset.load()?);
    let cells = cells(spec, data.num_features());
    let runs = cells
        .par_iter()
        .enumerate()
        .map(|(id, cell)| run_cell(spec, &data, id, cell))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&runs, &spec.accuracy_targets);
    let result = ExperimentResult { runs, summary };
    if let Some(dir) = &spec.output_dir {
        write_outputs(spec, &result, dir)?;
    }
    Ok(result)
}

/// Groups runs by `(solver, λ, block size, u)` in first-appearance order.
pub fn summarize(runs: &[RunResult], targets: &[f64]) -> Vec<SummaryRow> {
    type Key = (SolverKind, f64, usize, Option<f64>);
    let mut groups: Vec<(Key, Vec<&RunResult>)> = Vec::new();
    for run in runs {
        let key = (run.solver, run.lambda, run.block_size, run.u);
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(run),
            None => groups.push((key, vec![run])),
        }
    }
    let mut rows = Vec::new();
    for ((solver, lambda, block_size, u), members) in groups {
        for &target in targets {
            let hits: Vec<(f64, f64)> = members.iter().filter_map(|r| r.time_to_accuracy(target)).collect();
            let all = hits.len() == members.len();
            let epochs: Vec<f64> = hits.iter().map(|h| h.0).collect();
            let seconds: Vec<f64> = hits.iter().map(|h| h.1).collect();
            rows.push(SummaryRow {
                solver,
                lambda,
                block_size,
                u,
                target,
                runs: members.len(),
                reached_runs: hits.len(),
                epochs: all.then(|| mean_std(&epochs)),
                seconds: all.then(|| mean_std(&seconds)),
            });
        }
    }
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn trace_file_name(run: usize) -> String {
    format!("run{run:04}.csv")
}

/// Writes a trace in the fixed CSV schema.
pub fn write_trace<W: Write>(out: W, solver: SolverKind, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for row in rows {
        let r = &row.record;
        w.write_record([
            r.k.to_string(),
            solver.to_string(),
            r.block.to_string(),
            fmt_f64(r.beta),
            r.doublings.to_string(),
            fmt_f64(r.phi),
            fmt_f64(r.reference),
            fmt_f64(r.dx_norm),
            opt(r.stationarity),
            r.inner_iters.to_string(),
            fmt_f64(r.epochs),
            fmt_f64(r.seconds),
            opt(row.accuracy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace(path: impl AsRef<Path>) -> Result<(Vec<TraceRow>, Option<SolverKind>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_HEADER {
        return Err(Error::Config(format!("unexpected trace header {header:?}")));
    }
    let mut rows = Vec::new();
    let mut solver = None;
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |field: &str| Error::Parse { line: line + 2, message: format!("bad {field}") };
        let num = |i: usize, name: &str| rec[i].parse::<f64>().map_err(|_| bad(name));
        let int = |i: usize, name: &str| rec[i].parse::<usize>().map_err(|_| bad(name));
        let opt_num = |i: usize, name: &str| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i, name).map(Some)
            }
        };
        solver = Some(rec[1].parse()?);
        rows.push(TraceRow {
            record: IterationRecord {
                k: int(0, "k")?,
                block: int(2, "block")?,
                beta: num(3, "beta")?,
                doublings: int(4, "doublings")?,
                phi: num(5, "phi")?,
                reference: num(6, "ref")?,
                dx_norm: num(7, "dx_norm")?,
                stationarity: opt_num(8, "stationarity")?,
                stationarity_surrogate: false,
                inner_iters: int(9, "inner_iters")?,
                epochs: num(10, "epochs")?,
                seconds: num(11, "seconds")?,
            },
            accuracy: opt_num(12, "accuracy")?,
        });
    }
    Ok((rows, solver))
}

fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    let pair = |p: Option<(f64, f64)>| match p {
        Some((m, s)) => (fmt_f64(m), fmt_f64(s)),
        None => ("-".to_string(), "-".to_string()),
    };
    for r in rows {
        let (em, es) = pair(r.epochs);
        let (sm, ss) = pair(r.seconds);
        w.write_record([
            r.solver.to_string(),
            fmt_f64(r.lambda),
            r.block_size.to_string(),
            opt(r.u),
            fmt_f64(r.target),
            r.runs.to_string(),
            r.reached_runs.to_string(),
            em,
            es,
            sm,
            ss,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary CSV as a string.
pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_summary(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn write_outputs(spec: &ExperimentSpec, result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("spec.json"), serde_json::to_string_pretty(spec)?)?;
    let mut runs = csv::Writer::from_path(dir.join("runs.csv"))?;
    runs.write_record(RUNS_HEADER)?;
    for run in &result.runs {
        let file = trace_file_name(run.run);
        write_trace(fs::File::create(dir.join(&file))?, run.solver, &run.rows)?;
        runs.write_record([
            run.run.to_string(),
            run.solver.to_string(),
            fmt_f64(run.lambda),
            run.block_size.to_string(),
            opt(run.u),
            run.seed.to_string(),
            fmt_f64(run.phi0),
            fmt_f64(run.accuracy0),
            run.outcome.clone(),
            file,
        ])?;
    }
    runs.flush()?;
    write_summary(fs::File::create(dir.join("summary.csv"))?, &result.summary)?;
    Ok(())
}

/// Loads the runs of an output directory.
pub fn load_runs(dir: &Path) -> Result<Vec<RunResult>> {
    let mut reader = csv::Reader::from_path(dir.join("runs.csv"))?;
    let mut runs = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |field: &str| Error::Parse { line: line + 2, message: format!("runs.csv: bad {field}") };
        let (rows, _) = read_trace(dir.join(&rec[9]))?;
        runs.push(RunResult {
            run: rec[0].parse().map_err(|_| bad("run"))?,
            solver: rec[1].parse()?,
            lambda: rec[2].parse().map_err(|_| bad("lambda"))?,
            block_size: rec[3].parse().map_err(|_| bad("block_size"))?,
            u: if rec[4].is_empty() { None } else { Some(rec[4].parse().map_err(|_| bad("u"))?) },
            seed: rec[5].parse().map_err(|_| bad("seed"))?,
            phi0: rec[6].parse().map_err(|_| bad("phi0"))?,
            accuracy0: rec[7].parse().map_err(|_| bad("accuracy0"))?,
            outcome: rec[8].to_string(),
            rows,
        });
    }
    Ok(runs)
}

/// Recomputes the summary of an output directory from its files alone.
pub fn reaggregate(dir: &Path) -> Result<Vec<SummaryRow>> {
    let spec: ExperimentSpec = serde_json::from_str(&fs::read_to_string(dir.join("spec.json"))?)?;
    Ok(summarize(&load_runs(dir)?, &spec.accuracy_targets))
}

//! The `libcod` command line.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
//! solver or check fails.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::run_solver_with_observer;
use crate::bench::{run_experiment, summary_csv, write_trace, ExperimentSpec, TraceRow};
use crate::classify::{ClassificationProblem, Formulation};
use crate::data::{read_libsvm_file, training_accuracy, Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::penalty::{run_penalty_ladder, CircleProblem};
use crate::problem::{fd_check_jacobian, fd_check_outer_gradient, BlockPartition, CompositeProblem};
use crate::solver::{SolverConfig, SolverKind, USchedule, Variant};

#[derive(Debug, Parser)]
#[command(name = "libcod", version, about = "Linearized block coordinate descent for composite problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one sparse classification problem and write its trace.
    Solve(SolveArgs),
    /// Run an experiment sweep described by a JSON spec.
    Sweep(SweepArgs),
    /// Finite-difference and prox checks on a classification problem.
    Check(CheckArgs),
    /// Quadratic-penalty runs on the unit-circle toy problem.
    Penalty(PenaltyArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// LIBSVM file.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    data: Option<PathBuf>,
    /// Synthetic data, e.g. `m=200,n=100[,sparsity=0.1,noise=0.1,seed=0]`.
    #[arg(long)]
    synthetic: Option<String>,
    /// Feature count override for LIBSVM files.
    #[arg(long)]
    n_features: Option<usize>,
    /// Append a constant feature.
    #[arg(long)]
    intercept: bool,
    #[arg(long, default_value = "sqlog")]
    formulation: String,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    /// Number of contiguous feature blocks.
    #[arg(long, conflicts_with = "block_size")]
    blocks: Option<usize>,
    /// Coordinates per block (last block takes the remainder).
    #[arg(long)]
    block_size: Option<usize>,
}

impl DataArgs {
    fn dataset(&self) -> Result<Dataset> {
        let ds = match (&self.data, &self.synthetic) {
            (Some(path), _) => read_libsvm_file(path, self.n_features)?,
            (None, Some(kv)) => SyntheticSpec::parse_kv(kv)?.generate()?,
            (None, None) => return Err(Error::Config("one of --data or --synthetic is required".into())),
        };
        Ok(if self.intercept { ds.with_intercept() } else { ds })
    }

    fn problem(&self) -> Result<ClassificationProblem> {
        let ds = Arc::new(self.dataset()?);
        let n = ds.num_features();
        let partition = match (self.blocks, self.block_size) {
            (Some(k), _) => BlockPartition::even(n, k)?,
            (None, Some(bs)) => BlockPartition::uniform(n, bs)?,
            (None, None) => BlockPartition::even(n, n.min(10))?,
        };
        ClassificationProblem::new(ds, self.formulation.parse::<Formulation>()?, self.lambda, partition)
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "libcod-monotone")]
    solver: String,
    /// Reference weight of the nonmonotone variant.
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long)]
    beta_seed: Option<f64>,
    #[arg(long)]
    inner_tol: Option<f64>,
    /// Stationarity target; omitted means run to the budget.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long)]
    max_epochs: Option<f64>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    /// Iterations between stationarity checks (default: number of blocks).
    #[arg(long)]
    check_every: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace CSV destination.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Leave the seconds column at zero (byte-reproducible traces).
    #[arg(long)]
    no_wall_clock: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// JSON experiment spec.
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the spec's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Random points per check.
    #[arg(long, default_value_t = 20)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct PenaltyArgs {
    #[arg(long, conflicts_with = "rho_ladder", required_unless_present = "rho_ladder")]
    rho: Option<f64>,
    /// Comma-separated penalty values, run independently.
    #[arg(long, value_delimiter = ',')]
    rho_ladder: Option<Vec<f64>>,
    /// Center `c` of `½‖x − c‖²`, as `c1,c2`.
    #[arg(long, value_delimiter = ',', default_values_t = [1.5, 0.5])]
    center: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value = "monotone")]
    variant: String,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Runs the command line with `argv` (including the program name) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Sweep(args) => sweep(args),
        Command::Check(args) => check(args),
        Command::Penalty(args) => penalty(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}

fn solve(args: SolveArgs) -> Result<i32> {
    let problem = args.data.problem()?;
    let kind: SolverKind = args.solver.parse()?;
    let mut config = SolverConfig {
        beta_min: args.beta_min,
        beta_seed: args.beta_seed,
        max_outer_iters: args.max_iters,
        max_epochs: args.max_epochs.unwrap_or(f64::INFINITY),
        max_seconds: args.time_budget,
        target_stationarity: args.eps.unwrap_or(f64::INFINITY),
        check_every: args.check_every,
        seed: args.seed,
        record_time: !args.no_wall_clock,
        ..SolverConfig::benchmark()
    };
    if let Some(tol) = args.inner_tol {
        config.inner_tol = tol;
    }
    if let Some(u) = args.u {
        config.u = USchedule::Constant(u);
    }
    let data = problem.dataset();
    let x0 = DVector::zeros(problem.dim());
    let mut rows = Vec::new();
    let result = run_solver_with_observer(kind, &problem, &config, &x0, |record, x| {
        rows.push(TraceRow { record: record.clone(), accuracy: Some(training_accuracy(data, x)) });
        true
    });
    if let Some(path) = &args.trace_out {
        write_trace(BufWriter::new(File::create(path)?), kind, &rows)?;
    }
    let out = result?;
    println!("solver        {kind}");
    println!("problem       {} samples, {} features, {} blocks", data.num_samples(), data.num_features(), problem.partition().num_blocks());
    println!("termination   {}", out.reason);
    println!("iterations    {}", out.trace.len());
    println!("epochs        {:.4} (+{} in stationarity checks)", out.trace.last().map_or(0.0, |r| r.epochs), out.check_epochs);
    println!("phi           {:.6e} -> {:.6e}", out.phi0, out.final_phi());
    match out.last_stationarity() {
        Some(s) => println!("stationarity  {s:.3e}"),
        None => println!("stationarity  (not checked)"),
    }
    println!("accuracy      {:.4}", training_accuracy(data, &out.x));
    if let Some(path) = &args.trace_out {
        println!("trace         {}", path.display());
    }
    Ok(0)
}

fn sweep(args: SweepArgs) -> Result<i32> {
    let mut spec = ExperimentSpec::from_file(&args.spec)?;
    if args.output_dir.is_some() {
        spec.output_dir = args.output_dir;
    }
    let result = run_experiment(&spec)?;
    let failed = result.runs.iter().filter(|r| r.outcome.starts_with("error")).count();
    print!("{}", summary_csv(&result.summary)?);
    eprintln!("{} runs, {failed} failed", result.runs.len());
    if let Some(dir) = &spec.output_dir {
        eprintln!("outputs in {}", dir.display());
    }
    Ok(0)
}

fn check(args: CheckArgs) -> Result<i32> {
    let problem = args.data.problem()?;
    let n = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut jac_err: f64 = 0.0;
    let mut grad_err: f64 = 0.0;
    let mut prox_err: f64 = 0.0;
    let lambda = problem.lambda();
    let reg = problem.regularizer();
    for _ in 0..args.points {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        for b in 0..problem.partition().num_blocks() {
            jac_err = jac_err.max(fd_check_jacobian(&problem, &x, b, 1e-6)?);
        }
        grad_err = grad_err.max(fd_check_outer_gradient(problem.outer(), &problem.eval_map(&x), 1e-6)?);
        // prox optimality: (v − s)/t must be a subgradient of g at s
        let t = rng.random_range(0.1..2.0);
        let v = DVector::from_fn(n, |_, _| rng.random_range(-3.0 * lambda * t..3.0 * lambda * t));
        let s = reg.prox(0..n, &v, t);
        prox_err = prox_err.max(reg.subdiff_dist(&((&s - &v) / t), &s)?);
    }
    println!("jacobian fd error       {jac_err:.3e}");
    println!("outer gradient fd error {grad_err:.3e}");
    println!("prox optimality error   {prox_err:.3e}");
    let worst = jac_err.max(grad_err).max(prox_err);
    if worst <= args.tolerance {
        println!("ok (tolerance {:.1e})", args.tolerance);
        Ok(0)
    } else {
        println!("FAILED (tolerance {:.1e})", args.tolerance);
        Ok(2)
    }
}

fn penalty(args: PenaltyArgs) -> Result<i32> {
    let [c1, c2] = args.center[..] else {
        return Err(Error::Config(format!("--center needs two values, got {}", args.center.len())));
    };
    let problem = CircleProblem::new([c1, c2], args.lambda)?;
    let variant: Variant = args.variant.parse()?;
    let rhos = match (args.rho, args.rho_ladder) {
        (Some(r), _) => vec![r],
        (None, Some(l)) => l,
        (None, None) => return Err(Error::Config("one of --rho or --rho-ladder is required".into())),
    };
    let config = SolverConfig {
        beta_min: args.beta_min,
        target_stationarity: args.eps,
        max_outer_iters: args.max_iters,
        seed: args.seed,
        ..SolverConfig::default()
    };
    let outcomes = run_penalty_ladder(&problem, &rhos, &config, &DVector::zeros(2), variant)?;
    println!("rho,iterations,termination,x1,x2,feasibility,stationarity,multiplier");
    for o in &outcomes {
        println!(
            "{},{},{},{:.10},{:.10},{:.3e},{:.3e},{:.6}",
            o.report.rho,
            o.run.trace.len(),
            o.run.reason,
            o.run.x[0],
            o.run.x[1],
            o.report.feasibility,
            o.report.stationarity,
            o.report.multiplier[0]
        );
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(cli_main(["libcod", "frobnicate"]), 1);
        assert_eq!(cli_main(["libcod", "solve", "--bogus"]), 1);
        assert_eq!(cli_main(["libcod", "solve"]), 1);
        assert_eq!(cli_main(["libcod", "--help"]), 0);
    }

    #[test]
    fn config_errors_exit_one() {
        assert_eq!(cli_main(["libcod", "solve", "--synthetic", "m=10,n=5", "--solver", "nope"]), 1);
        assert_eq!(cli_main(["libcod", "solve", "--synthetic", "m=10,n=5", "--lambda", "-1"]), 1);
        assert_eq!(cli_main(["libcod", "solve", "--data", "/nonexistent/file.svm"]), 1);
        assert_eq!(cli_main(["libcod", "penalty", "--rho", "0"]), 1);
    }

    #[test]
    fn solve_writes_trace() {
        let dir = tempfile::tempdir().unwrap();
        let trace = dir.path().join("t.csv");
        let code = cli_main([
            "libcod",
            "solve",
            "--synthetic",
            "m=40,n=20",
            "--blocks",
            "4",
            "--max-iters",
            "25",
            "--trace-out",
            trace.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(&trace).unwrap();
        assert_eq!(text.lines().count(), 26);
        assert!(text.starts_with("k,solver,block,beta,doublings,phi,ref,dx_norm,stationarity,inner_iters,epochs,seconds,accuracy\n"));
    }

    #[test]
    fn check_passes_on_logistic() {
        let code = cli_main([
            "libcod",
            "check",
            "--synthetic",
            "m=30,n=12",
            "--formulation",
            "logistic",
            "--blocks",
            "3",
            "--points",
            "3",
        ]);
        assert_eq!(code, 0);
    }
}

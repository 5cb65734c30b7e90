//! A small experiment sweep: two solvers, two block sizes, three paired
//! seeds, with epochs to each accuracy target summarized as mean and sample
//! standard deviation. Traces and the summary are written as CSV.
//!
//! The same sweep can be run from the command line with a JSON spec:
//!
//! ```not_rust
//! cargo run --release --example benchmark_sweep
//! cargo run --release -- sweep --spec crates/core/examples/specs/synthetic_sweep.json
//! ```

use libcod::bench::{reaggregate, run_experiment, summary_csv, DatasetSource, ExperimentSpec};
use libcod::classify::Formulation;
use libcod::data::SyntheticSpec;
use libcod::solver::SolverKind;

fn main() -> libcod::Result<()> {
    let out_dir = std::env::temp_dir().join("libcod_sweep");
    let spec = ExperimentSpec {
        dataset: DatasetSource::Synthetic(SyntheticSpec { m: 300, n: 100, sparsity: 0.1, noise: 0.1, seed: 2 }),
        formulation: Formulation::SquaredLog,
        lambdas: vec![1e-3],
        block_sizes: vec![5, 20],
        solvers: vec![SolverKind::LibcodMonotone, SolverKind::ProxCd],
        u: vec![0.5],
        repeats: 3,
        base_seed: 0,
        accuracy_targets: vec![0.85, 0.9, 0.95],
        stop_at_targets: true,
        accuracy_every: 1,
        max_iters: None,
        max_epochs: Some(50.0),
        time_budget: None,
        eps: None,
        beta_min: None,
        inner_tol: None,
        output_dir: Some(out_dir.clone()),
        wall_clock: true,
    };
    let result = run_experiment(&spec)?;
    print!("{}", summary_csv(&result.summary)?);
    assert_eq!(reaggregate(&out_dir)?.len(), result.summary.len());
    println!("{} runs written to {}", result.runs.len(), out_dir.display());
    Ok(())
}

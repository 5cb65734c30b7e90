//! Quadratic penalty on `min ½‖x − c‖² + λ‖x‖₁ s.t. ‖x‖² = 1`.
//!
//! Larger `ρ` pushes the constraint residual down roughly like `1/ρ`, and
//! `ρF(x)` approaches the Lagrange multiplier.
//!
//! ```not_rust
//! cargo run --release --example penalty_circle
//! ```

use libcod::penalty::{run_penalty_ladder, CircleProblem};
use libcod::solver::{SolverConfig, Variant};
use nalgebra::DVector;

fn main() -> libcod::Result<()> {
    let problem = CircleProblem::new([1.5, 0.5], 0.1)?;
    let config = SolverConfig { target_stationarity: 1e-8, max_outer_iters: 5_000, ..Default::default() };
    let ladder = [1e1, 1e2, 1e3, 1e4, 1e5];
    let outcomes = run_penalty_ladder(&problem, &ladder, &config, &DVector::zeros(2), Variant::Monotone)?;

    println!("{:>8} {:>6} {:>22} {:>10} {:>10} {:>10}", "rho", "iters", "x", "‖F(x)‖", "stat", "λ");
    for o in outcomes {
        println!(
            "{:>8.0e} {:>6} ({:>9.6}, {:>9.6}) {:>10.2e} {:>10.2e} {:>10.6}",
            o.report.rho,
            o.run.trace.len(),
            o.run.x[0],
            o.run.x[1],
            o.report.feasibility,
            o.report.stationarity,
            o.report.multiplier[0]
        );
    }
    Ok(())
}

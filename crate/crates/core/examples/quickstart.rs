//! Least squares `½‖Ax − b‖²` solved block by block.
//!
//! With a linear map the Gauss–Newton block model is exact, so each accepted
//! step minimizes the objective over its block plus a proximal term. The
//! result is compared against the normal-equations solution.
//!
//! ```not_rust
//! cargo run --release --example quickstart
//! ```

use libcod::problem::{BlockPartition, LinearProblem};
use libcod::prox::SeparableReg;
use libcod::solver::{run, SolverConfig, Variant};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> libcod::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (m, n) = (60, 20);
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
    let exact = a.tr_mul(&a).cholesky().expect("full column rank").solve(&a.tr_mul(&b));

    let problem = LinearProblem::new(a, b, SeparableReg::Zero, BlockPartition::uniform(n, 5)?)?;
    let config = SolverConfig { target_stationarity: 1e-7, max_outer_iters: 10_000, seed: 1, ..Default::default() };
    let out = run(&problem, &config, &DVector::zeros(n), Variant::Monotone)?;

    println!("termination      {}", out.reason);
    println!("iterations       {}", out.trace.len());
    println!("epochs           {:.1}", out.trace.last().map_or(0.0, |r| r.epochs));
    println!("phi              {:.6e} -> {:.12e}", out.phi0, out.final_phi());
    println!("stationarity     {:.2e}", out.last_stationarity().unwrap_or(f64::NAN));
    println!("error vs normal  {:.2e}", (&out.x - &exact).norm());
    Ok(())
}

//! Defining a problem from scratch: chained Rosenbrock residuals under a
//! Huber outer loss, with the Jacobian verified by finite differences before
//! solving.
//!
//! ```not_rust
//! cargo run --release --example custom_problem
//! ```

use std::ops::Range;

use libcod::problem::{fd_check_jacobian, fd_check_outer_gradient, BlockPartition, CompositeProblem, OuterLoss};
use libcod::prox::{Regularizer, SeparableReg};
use libcod::solver::{run, SolverConfig, Variant};
use nalgebra::{DMatrix, DVector};

/// `Σ huber_δ(u_i)`: quadratic near zero, linear in the tails.
struct Huber {
    delta: f64,
}

impl OuterLoss for Huber {
    fn value(&self, u: &DVector<f64>) -> f64 {
        let d = self.delta;
        u.iter().map(|&v| if v.abs() <= d { 0.5 * v * v } else { d * (v.abs() - 0.5 * d) }).sum()
    }

    fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        u.map(|v| v.clamp(-self.delta, self.delta))
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// Residuals `10(x_{j+1} − x_j²)` and `1 − x_j` for `j = 0..n−1`.
struct ChainedRosenbrock {
    partition: BlockPartition,
    outer: Huber,
    reg: SeparableReg,
}

impl CompositeProblem for ChainedRosenbrock {
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn map_dim(&self) -> usize {
        2 * (self.partition.dim() - 1)
    }

    fn eval_map(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = x.len();
        let mut f = DVector::zeros(2 * (n - 1));
        for j in 0..n - 1 {
            f[2 * j] = 10.0 * (x[j + 1] - x[j] * x[j]);
            f[2 * j + 1] = 1.0 - x[j];
        }
        f
    }

    fn map_jacobian(&self, x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64> {
        let n = x.len();
        let mut jac = DMatrix::zeros(2 * (n - 1), cols.len());
        for (c, j) in cols.enumerate() {
            if j + 1 < n {
                jac[(2 * j, c)] = -20.0 * x[j];
                jac[(2 * j + 1, c)] = -1.0;
            }
            if j > 0 {
                jac[(2 * (j - 1), c)] = 10.0;
            }
        }
        jac
    }

    fn outer(&self) -> &dyn OuterLoss {
        &self.outer
    }

    fn regularizer(&self) -> &dyn Regularizer {
        &self.reg
    }
}

fn main() -> libcod::Result<()> {
    let n = 12;
    let problem = ChainedRosenbrock {
        partition: BlockPartition::uniform(n, 3)?,
        outer: Huber { delta: 5.0 },
        reg: SeparableReg::Zero,
    };
    let x0 = DVector::from_fn(n, |j, _| if j % 2 == 0 { -1.2 } else { 1.0 });

    let worst = (0..problem.partition().num_blocks())
        .map(|b| fd_check_jacobian(&problem, &x0, b, 1e-6))
        .collect::<libcod::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let outer_err = fd_check_outer_gradient(&problem.outer, &problem.eval_map(&x0), 1e-6)?;
    println!("jacobian fd error {worst:.2e}, outer gradient fd error {outer_err:.2e}");

    let config = SolverConfig { target_stationarity: 1e-8, max_outer_iters: 50_000, ..Default::default() };
    let out = run(&problem, &config, &x0, Variant::Nonmonotone)?;
    println!("termination {} after {} iterations", out.reason, out.trace.len());
    println!("phi {:.4e} -> {:.4e}", out.phi0, out.final_phi());
    let x: Vec<String> = out.x.iter().map(|v| format!("{v:.6}")).collect();
    println!("x = [{}]", x.join(", "));
    Ok(())
}

//! The nonmonotone variant for several reference weights `u`, on a
//! sum-of-exponentials fit `y(t) ≈ Σ_j a_j exp(−k_j t)`.
//!
//! Each block holds one `(a_j, k_j)` pair. Small `u` lets the objective rise
//! temporarily while staying below the slowly moving reference, so fewer
//! trial steps are rejected; `u = 1` behaves like the monotone method.
//!
//! ```not_rust
//! cargo run --release --example nonmonotone_sweep
//! ```

use std::ops::Range;

use libcod::problem::{BlockPartition, CompositeProblem, HalfSquaredNorm, OuterLoss};
use libcod::prox::{Regularizer, SeparableReg};
use libcod::solver::{run, SolverConfig, USchedule, Variant};
use nalgebra::{DMatrix, DVector};

struct ExpFit {
    t: Vec<f64>,
    y: Vec<f64>,
    partition: BlockPartition,
    outer: HalfSquaredNorm,
}

impl CompositeProblem for ExpFit {
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn map_dim(&self) -> usize {
        self.t.len()
    }

    fn eval_map(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.t.len(), |i, _| {
            let model: f64 = (0..x.len() / 2).map(|j| x[2 * j] * (-x[2 * j + 1] * self.t[i]).exp()).sum();
            model - self.y[i]
        })
    }

    fn map_jacobian(&self, x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.t.len(), cols.len());
        for (c, col) in cols.enumerate() {
            let j = col / 2;
            for (i, &t) in self.t.iter().enumerate() {
                let e = (-x[2 * j + 1] * t).exp();
                jac[(i, c)] = if col % 2 == 0 { e } else { -x[2 * j] * t * e };
            }
        }
        jac
    }

    fn outer(&self) -> &dyn OuterLoss {
        &self.outer
    }

    fn regularizer(&self) -> &dyn Regularizer {
        &SeparableReg::Zero
    }
}

fn main() -> libcod::Result<()> {
    let t: Vec<f64> = (0..60).map(|i| i as f64 * 0.1).collect();
    let y = t.iter().map(|&s| 2.0 * (-0.5 * s).exp() + 1.0 * (-2.0 * s).exp() + 0.5 * (-5.0 * s).exp()).collect();
    let problem = ExpFit { t, y, partition: BlockPartition::uniform(6, 2)?, outer: HalfSquaredNorm::default() };
    let x0 = DVector::zeros(6);

    for (variant, u) in [(Variant::Monotone, 1.0), (Variant::Nonmonotone, 1.0), (Variant::Nonmonotone, 0.5), (Variant::Nonmonotone, 0.1)] {
        let config = SolverConfig {
            u: USchedule::Constant(u),
            max_outer_iters: 3000,
            target_stationarity: f64::INFINITY,
            seed: 4,
            ..Default::default()
        };
        let out = run(&problem, &config, &x0, variant)?;
        // increases beyond floating-point noise
        let increases = out.trace.windows(2).filter(|w| w[1].phi > w[0].phi + 1e-12 * (1.0 + w[0].phi.abs())).count();
        let rejected: usize = out.trace.iter().map(|r| r.doublings - 1).sum();
        println!(
            "{:<11} u = {u:<4} final phi {:.4e}  phi increases {increases:>4}  rejected trials {rejected:>5}  stationarity {:.2e}",
            format!("{variant:?}"),
            out.final_phi(),
            out.last_stationarity().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

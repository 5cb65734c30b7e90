//! Sparse classification with the squared-log residual loss: LiBCoD against
//! proximal coordinate descent on the same block draws.
//!
//! Both solvers run for the same epoch budget; the epochs each needs to reach
//! 85%, 90% and 95% training accuracy are printed.
//!
//! ```not_rust
//! cargo run --release --example sparse_classification
//! ```

use std::sync::Arc;

use libcod::baselines::run_solver_with_observer;
use libcod::classify::build_sqlog_problem;
use libcod::data::{gen_synthetic, training_accuracy};
use libcod::problem::BlockPartition;
use libcod::solver::{SolverConfig, SolverKind};
use nalgebra::DVector;

fn main() -> libcod::Result<()> {
    let data = Arc::new(gen_synthetic(3, 400, 200, 0.1, 0.1)?);
    let problem = build_sqlog_problem(data.clone(), 1e-3, BlockPartition::uniform(200, 20)?)?;
    let config = SolverConfig { max_epochs: 40.0, max_outer_iters: usize::MAX, seed: 11, ..SolverConfig::benchmark() };
    let targets = [0.85, 0.90, 0.95];

    for kind in [SolverKind::LibcodMonotone, SolverKind::ProxCd] {
        let mut hit = [None; 3];
        let out = run_solver_with_observer(kind, &problem, &config, &DVector::zeros(200), |rec, x| {
            let acc = training_accuracy(&data, x);
            for (slot, &t) in hit.iter_mut().zip(&targets) {
                if slot.is_none() && acc >= t {
                    *slot = Some(rec.epochs);
                }
            }
            true
        })?;
        let cells: Vec<String> =
            hit.iter().map(|h| h.map_or("-".to_string(), |e| format!("{e:.1}"))).collect();
        println!(
            "{kind:<16} final phi {:.4e}  accuracy {:.3}  epochs to 85/90/95%: {}",
            out.final_phi(),
            training_accuracy(&data, &out.x),
            cells.join(" / ")
        );
    }
    Ok(())
}

//! Comparison methods sharing the LiBCoD driver.

use nalgebra::DVector;

use crate::error::Result;
use crate::problem::{BlockPartition, CompositeProblem, Repartitioned};
use crate::solver::{drive, IterationRecord, RunOutput, SolverConfig, SolverKind, StepModel, Variant};

/// Runs any of the four methods by name.
pub fn run_solver<P: CompositeProblem + ?Sized>(
    kind: SolverKind,
    problem: &P,
    config: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<RunOutput> {
    run_solver_with_observer(kind, problem, config, x0, |_, _| true)
}

pub fn run_solver_with_observer<P, O>(
    kind: SolverKind,
    problem: &P,
    config: &SolverConfig,
    x0: &DVector<f64>,
    observer: O,
) -> Result<RunOutput>
where
    P: CompositeProblem + ?Sized,
    O: FnMut(&IterationRecord, &DVector<f64>) -> bool,
{
    match kind {
        SolverKind::LibcodMonotone => drive(problem, config, x0, Variant::Monotone, StepModel::GaussNewton, observer),
        SolverKind::LibcodNonmonotone => {
            drive(problem, config, x0, Variant::Nonmonotone, StepModel::GaussNewton, observer)
        }
        SolverKind::ProxCd => run_prox_cd_with_observer(problem, config, x0, observer),
        SolverKind::FullGaussNewton => run_full_gauss_newton_with_observer(problem, config, x0, observer),
    }
}

/// Proximal block coordinate descent.
///
/// Per iteration the whole smooth part `f + h∘F` is linearized along the
/// sampled block: `s = prox_{g_i, 1/β}(x^i − ∇_i ℓ(x)/β)`. The acceptance
/// test, β doubling/reset schedule, and block sampling stream are the ones
/// used by monotone LiBCoD, so paired runs draw identical blocks.
pub fn run_prox_cd<P: CompositeProblem + ?Sized>(problem: &P, config: &SolverConfig, x0: &DVector<f64>) -> Result<RunOutput> {
    run_prox_cd_with_observer(problem, config, x0, |_, _| true)
}

pub fn run_prox_cd_with_observer<P, O>(problem: &P, config: &SolverConfig, x0: &DVector<f64>, observer: O) -> Result<RunOutput>
where
    P: CompositeProblem + ?Sized,
    O: FnMut(&IterationRecord, &DVector<f64>) -> bool,
{
    drive(problem, config, x0, Variant::Monotone, StepModel::Linearized, observer)
}

/// Full Gauss–Newton: monotone LiBCoD on a single block covering all coordinates.
pub fn run_full_gauss_newton<P: CompositeProblem + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    x0: &DVector<f64>,
) -> Result<RunOutput> {
    run_full_gauss_newton_with_observer(problem, config, x0, |_, _| true)
}

pub fn run_full_gauss_newton_with_observer<P, O>(
    problem: &P,
    config: &SolverConfig,
    x0: &DVector<f64>,
    observer: O,
) -> Result<RunOutput>
where
    P: CompositeProblem + ?Sized,
    O: FnMut(&IterationRecord, &DVector<f64>) -> bool,
{
    let whole = Repartitioned::new(problem, BlockPartition::single(problem.dim())?)?;
    let config = SolverConfig { probs: None, ..config.clone() };
    drive(&whole, &config, x0, Variant::Monotone, StepModel::GaussNewton, observer)
}

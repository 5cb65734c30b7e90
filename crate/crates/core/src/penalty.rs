//! Quadratic penalty for equality-constrained problems.
//!
//! `min f(x) + Σ g_i(x^i)  s.t.  F(x) = 0` is replaced by
//! `φ_ρ(x) = f(x) + (ρ/2)‖F(x)‖² + Σ g_i(x^i)`, which is a composite problem
//! with `h = (ρ/2)‖·‖²` and `L_h = ρ`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{BlockPartition, CompositeProblem, HalfSquaredNorm, OuterLoss};
use crate::prox::{Regularizer, SeparableReg};
use crate::solver::{run, stationarity_measure, RunOutput, SolverConfig, Variant};

pub trait ConstrainedProblem: Send + Sync {
    fn partition(&self) -> &BlockPartition;

    /// Number of equality constraints.
    fn constraint_dim(&self) -> usize;

    fn eval_f(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn grad_f(&self, _x: &DVector<f64>, cols: Range<usize>) -> DVector<f64> {
        DVector::zeros(cols.len())
    }

    /// Constraint values `F(x)`.
    fn eval_constraints(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `∇_{cols} F(x)`.
    fn constraint_jacobian(&self, x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64>;

    fn regularizer(&self) -> &dyn Regularizer;
}

impl<C: ConstrainedProblem + ?Sized> ConstrainedProblem for &C {
    fn partition(&self) -> &BlockPartition {
        (**self).partition()
    }
    fn constraint_dim(&self) -> usize {
        (**self).constraint_dim()
    }
    fn eval_f(&self, x: &DVector<f64>) -> f64 {
        (**self).eval_f(x)
    }
    fn grad_f(&self, x: &DVector<f64>, cols: Range<usize>) -> DVector<f64> {
        (**self).grad_f(x, cols)
    }
    fn eval_constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).eval_constraints(x)
    }
    fn constraint_jacobian(&self, x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64> {
        (**self).constraint_jacobian(x, cols)
    }
    fn regularizer(&self) -> &dyn Regularizer {
        (**self).regularizer()
    }
}

/// `φ_ρ` as a composite problem.
pub struct PenaltyProblem<C> {
    constrained: C,
    outer: HalfSquaredNorm,
}

impl<C: ConstrainedProblem> PenaltyProblem<C> {
    pub fn rho(&self) -> f64 {
        self.outer.scale
    }

    pub fn constrained(&self) -> &C {
        &self.constrained
    }
}

pub fn build_penalty_problem<C: ConstrainedProblem>(constrained: C, rho: f64) -> Result<PenaltyProblem<C>> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Config(format!("penalty parameter must be positive and finite, got {rho}")));
    }
    Ok(PenaltyProblem { constrained, outer: HalfSquaredNorm { scale: rho } })
}

impl<C: ConstrainedProblem> CompositeProblem for PenaltyProblem<C> {
    fn partition(&self) -> &BlockPartition {
        self.constrained.partition()
    }
    fn map_dim(&self) -> usize {
        self.constrained.constraint_dim()
    }
    fn eval_f(&self, x: &DVector<f64>) -> f64 {
        self.constrained.eval_f(x)
    }
    fn grad_f(&self, x: &DVector<f64>, cols: Range<usize>) -> DVector<f64> {
        self.constrained.grad_f(x, cols)
    }
    fn eval_map(&self, x: &DVector<f64>) -> DVector<f64> {
        self.constrained.eval_constraints(x)
    }
    fn map_jacobian(&self, x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64> {
        self.constrained.constraint_jacobian(x, cols)
    }
    fn outer(&self) -> &dyn OuterLoss {
        &self.outer
    }
    fn regularizer(&self) -> &dyn Regularizer {
        self.constrained.regularizer()
    }
}

/// ε-KKT residuals of a point for the constrained problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    /// `dist(−∇f(x) − ∇F(x)ᵀλ, ∂g(x))`.
    pub stationarity: f64,
    /// `‖F(x)‖`.
    pub feasibility: f64,
    /// `λ = ρ F(x)`.
    pub multiplier: Vec<f64>,
    pub rho: f64,
    /// Stationarity is the prox-gradient surrogate (regularizer without an exact distance).
    pub surrogate: bool,
}

pub fn kkt_residuals<C: ConstrainedProblem + ?Sized>(constrained: &C, x: &DVector<f64>, rho: f64) -> Result<KktReport> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Config(format!("penalty parameter must be positive and finite, got {rho}")));
    }
    let part = constrained.partition();
    if x.len() != part.dim() {
        return Err(Error::Shape { context: "kkt_residuals", expected: part.dim(), got: x.len() });
    }
    let fx = constrained.eval_constraints(x);
    let multiplier = &fx * rho;
    let mut grad = DVector::zeros(part.dim());
    for b in 0..part.num_blocks() {
        let cols = part.range(b);
        let jac = constrained.constraint_jacobian(x, cols.clone());
        let gb = constrained.grad_f(x, cols.clone()) + jac.tr_mul(&multiplier);
        grad.rows_mut(cols.start, cols.len()).copy_from(&gb);
    }
    let (stationarity, surrogate) = match constrained.regularizer().subdiff_dist(&grad, x) {
        Ok(d) => (d, false),
        Err(Error::UnsupportedMeasure) => {
            let st = stationarity_measure(&build_penalty_problem(constrained, rho)?, x)?;
            (st.value, st.surrogate)
        }
        Err(e) => return Err(e),
    };
    Ok(KktReport {
        stationarity,
        feasibility: fx.norm(),
        multiplier: multiplier.iter().copied().collect(),
        rho,
        surrogate,
    })
}

#[derive(Debug, Clone)]
pub struct PenaltyOutcome {
    pub run: RunOutput,
    pub report: KktReport,
}

/// Runs LiBCoD on `φ_ρ` and reports KKT residuals at the final point.
///
/// When `config.beta_min` is unset it defaults to `√ρ`.
pub fn run_penalty<C: ConstrainedProblem>(
    constrained: &C,
    rho: f64,
    config: &SolverConfig,
    x0: &DVector<f64>,
    variant: Variant,
) -> Result<PenaltyOutcome> {
    let problem = build_penalty_problem(constrained, rho)?;
    let config = SolverConfig { beta_min: Some(config.beta_min.unwrap_or(rho.sqrt())), ..config.clone() };
    let run = run(&problem, &config, x0, variant)?;
    let report = kkt_residuals(constrained, &run.x, rho)?;
    Ok(PenaltyOutcome { run, report })
}

/// Independent penalty runs over several `ρ` values, executed in parallel.
///
/// A convenience sweep: each rung starts from `x0` with the same config.
pub fn run_penalty_ladder<C: ConstrainedProblem>(
    constrained: &C,
    rhos: &[f64],
    config: &SolverConfig,
    x0: &DVector<f64>,
    variant: Variant,
) -> Result<Vec<PenaltyOutcome>> {
    rhos.par_iter().map(|&rho| run_penalty(constrained, rho, config, x0, variant)).collect()
}

/// `min ½‖x − c‖² + λ‖x‖₁  s.t.  x₁² + x₂² = 1`.
///
/// Both coordinates form one block by default. With one coordinate per block
/// ([`CircleProblem::with_coordinate_blocks`]) every single-coordinate move
/// leaves the circle, so large `ρ` makes progress along it very slow.
#[derive(Debug, Clone)]
pub struct CircleProblem {
    center: DVector<f64>,
    reg: SeparableReg,
    partition: BlockPartition,
}

impl CircleProblem {
    pub fn new(center: [f64; 2], lambda: f64) -> Result<Self> {
        Ok(Self {
            center: DVector::from_column_slice(&center),
            reg: SeparableReg::l1(lambda)?,
            partition: BlockPartition::single(2)?,
        })
    }

    pub fn with_coordinate_blocks(mut self) -> Self {
        self.partition = BlockPartition::new(vec![1, 1]).expect("two unit blocks");
        self
    }
}

impl ConstrainedProblem for CircleProblem {
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }
    fn constraint_dim(&self) -> usize {
        1
    }
    fn eval_f(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x - &self.center).norm_squared()
    }
    fn grad_f(&self, x: &DVector<f64>, cols: Range<usize>) -> DVector<f64> {
        DVector::from_fn(cols.len(), |k, _| x[cols.start + k] - self.center[cols.start + k])
    }
    fn eval_constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, x.norm_squared() - 1.0)
    }
    fn constraint_jacobian(&self, x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64> {
        DMatrix::from_fn(1, cols.len(), |_, k| 2.0 * x[cols.start + k])
    }
    fn regularizer(&self) -> &dyn Regularizer {
        &self.reg
    }
}

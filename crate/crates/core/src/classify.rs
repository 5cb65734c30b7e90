//! Nonconvex sparse binary classification as `½‖F(x)‖² + λ‖x‖₁`.
//!
//! Every residual depends on `x` only through its margin `m_i = a_iᵀx + b_i`,
//! so the problem keeps margins incrementally: updating a block touches only
//! the nonzeros of its columns.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{ColumnMajor, Dataset};
use crate::error::{Error, Result};
use crate::problem::{BlockPartition, CompositeProblem, HalfSquaredNorm, IncrementalMap, OuterLoss};
use crate::prox::{Regularizer, SeparableReg};

/// Residual model applied to the signed margin `t = y_i m_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formulation {
    /// `ln(1 + (t − 1)²)`
    #[serde(rename = "sqlog")]
    SquaredLog,
    /// `1 − σ(t) = σ(−t)`
    #[serde(rename = "logistic")]
    Logistic,
}

impl std::str::FromStr for Formulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqlog" | "squared-log" => Ok(Self::SquaredLog),
            "logistic" => Ok(Self::Logistic),
            _ => Err(Error::Config(format!("unknown formulation '{s}' (expected sqlog or logistic)"))),
        }
    }
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SquaredLog => "sqlog",
            Self::Logistic => "logistic",
        })
    }
}

/// Logistic function without overflow for large `|t|`.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Formulation {
    /// Residual value at signed margin `t`.
    pub fn residual(self, t: f64) -> f64 {
        match self {
            Self::SquaredLog => (t - 1.0).powi(2).ln_1p(),
            Self::Logistic => sigmoid(-t),
        }
    }

    /// Derivative of the residual with respect to `t`.
    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Self::SquaredLog => {
                let r = t - 1.0;
                2.0 * r / (1.0 + r * r)
            }
            Self::Logistic => -sigmoid(t) * sigmoid(-t),
        }
    }
}

pub struct ClassificationProblem {
    data: Arc<Dataset>,
    columns: ColumnMajor,
    formulation: Formulation,
    reg: SeparableReg,
    partition: BlockPartition,
    outer: HalfSquaredNorm,
    use_hook: bool,
}

impl ClassificationProblem {
    pub fn new(data: Arc<Dataset>, formulation: Formulation, lambda: f64, partition: BlockPartition) -> Result<Self> {
        let reg = SeparableReg::l1(lambda)?;
        if partition.dim() != data.num_features() {
            return Err(Error::Shape {
                context: "ClassificationProblem partition",
                expected: data.num_features(),
                got: partition.dim(),
            });
        }
        let columns = data.column_major();
        Ok(Self { data, columns, formulation, reg, partition, outer: HalfSquaredNorm::default(), use_hook: true })
    }

    /// Turns off margin maintenance; every evaluation then recomputes `Ax + b`.
    pub fn without_incremental(mut self) -> Self {
        self.use_hook = false;
        self
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn lambda(&self) -> f64 {
        self.reg.weight()
    }

    /// `dF_i/dm_i` at the given margins.
    fn margin_coefficients(&self, margins: &DVector<f64>) -> DVector<f64> {
        let y = self.data.labels();
        DVector::from_fn(margins.len(), |i, _| y[i] * self.formulation.derivative(y[i] * margins[i]))
    }
}

/// Squared-log model of the data.
pub fn build_sqlog_problem(data: Arc<Dataset>, lambda: f64, partition: BlockPartition) -> Result<ClassificationProblem> {
    ClassificationProblem::new(data, Formulation::SquaredLog, lambda, partition)
}

/// Logistic-residual model of the data.
pub fn build_logistic_residual_problem(
    data: Arc<Dataset>,
    lambda: f64,
    partition: BlockPartition,
) -> Result<ClassificationProblem> {
    ClassificationProblem::new(data, Formulation::Logistic, lambda, partition)
}

impl IncrementalMap for ClassificationProblem {
    fn state(&self, x: &DVector<f64>) -> DVector<f64> {
        self.data.margins(x)
    }

    fn update_state(&self, state: &DVector<f64>, cols: Range<usize>, delta: &DVector<f64>) -> DVector<f64> {
        let mut margins = state.clone();
        let c = &self.columns;
        for (k, j) in cols.enumerate() {
            let d = delta[k];
            if d == 0.0 {
                continue;
            }
            for p in c.indptr[j]..c.indptr[j + 1] {
                margins[c.rows[p]] += c.values[p] * d;
            }
        }
        margins
    }

    fn map_from_state(&self, state: &DVector<f64>) -> DVector<f64> {
        let y = self.data.labels();
        DVector::from_fn(state.len(), |i, _| self.formulation.residual(y[i] * state[i]))
    }

    fn jacobian_from_state(&self, state: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64> {
        let coef = self.margin_coefficients(state);
        let c = &self.columns;
        let mut jac = DMatrix::zeros(state.len(), cols.len());
        for (k, j) in cols.enumerate() {
            for p in c.indptr[j]..c.indptr[j + 1] {
                let i = c.rows[p];
                jac[(i, k)] = coef[i] * c.values[p];
            }
        }
        jac
    }
}

impl CompositeProblem for ClassificationProblem {
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn map_dim(&self) -> usize {
        self.data.num_samples()
    }

    fn eval_map(&self, x: &DVector<f64>) -> DVector<f64> {
        self.map_from_state(&self.data.margins(x))
    }

    fn map_jacobian(&self, x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64> {
        self.jacobian_from_state(&self.data.margins(x), cols)
    }

    fn outer(&self) -> &dyn OuterLoss {
        &self.outer
    }

    fn regularizer(&self) -> &dyn Regularizer {
        &self.reg
    }

    fn incremental(&self) -> Option<&dyn IncrementalMap> {
        self.use_hook.then_some(self as &dyn IncrementalMap)
    }

    fn smooth_gradient(&self, x: &DVector<f64>, map_x: &DVector<f64>) -> DVector<f64> {
        // ∇F(x)ᵀF(x) = Aᵀ(coef ⊙ F)
        let coef = self.margin_coefficients(&self.data.margins(x));
        self.data.transpose_mul(&coef.component_mul(map_x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_synthetic;
    use crate::problem::{eval_phi, fd_check_jacobian, EvalCache};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(formulation: Formulation, seed: u64) -> ClassificationProblem {
        let ds = gen_synthetic(seed, 40, 24, 0.3, 0.1).unwrap();
        ClassificationProblem::new(Arc::new(ds), formulation, 0.01, BlockPartition::uniform(24, 5).unwrap()).unwrap()
    }

    #[test]
    fn residuals_at_origin() {
        for (f, expect) in [(Formulation::SquaredLog, 2f64.ln()), (Formulation::Logistic, 0.5)] {
            let p = problem(f, 1);
            let map = p.eval_map(&DVector::zeros(24));
            assert!(map.iter().all(|&v| (v - expect).abs() < 1e-15), "{f}");
        }
    }

    #[test]
    fn sigmoid_extremes() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        let r = Formulation::Logistic.residual(800.0);
        assert!((0.0..=1e-300).contains(&r));
        assert!(Formulation::Logistic.derivative(800.0).is_finite());
        assert!(Formulation::Logistic.derivative(-800.0).is_finite());
        for t in [-30.0, -1.0, 0.0, 2.0, 30.0] {
            let r = Formulation::Logistic.residual(t);
            assert!(r > 0.0 && r < 1.0);
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for f in [Formulation::SquaredLog, Formulation::Logistic] {
            let p = problem(f, 2);
            for _ in 0..20 {
                let x = DVector::from_fn(24, |_, _| rng.random_range(-1.5..1.5));
                for b in 0..p.partition().num_blocks() {
                    let err = fd_check_jacobian(&p, &x, b, 1e-6).unwrap();
                    assert!(err <= 1e-5, "{f} block {b}: {err}");
                }
            }
        }
    }

    #[test]
    fn jacobian_rows_are_scaled_features() {
        let p = problem(Formulation::SquaredLog, 4);
        let x = DVector::from_fn(24, |j, _| (j as f64 * 0.37).sin());
        let margins = p.dataset().margins(&x);
        let jac = p.map_jacobian(&x, 5..15);
        let y = p.dataset().labels();
        for i in 0..p.map_dim() {
            let t = y[i] * margins[i];
            let coef = 2.0 * (t - 1.0) * y[i] / (1.0 + (t - 1.0).powi(2));
            let (idx, val) = p.dataset().row(i);
            let mut expect = DVector::zeros(10);
            for (&j, &v) in idx.iter().zip(val) {
                if (5..15).contains(&j) {
                    expect[j - 5] = coef * v;
                }
            }
            assert!((jac.row(i).transpose() - expect).amax() < 1e-14);
        }
    }

    #[test]
    fn sparse_gradient_matches_blockwise_assembly() {
        for f in [Formulation::SquaredLog, Formulation::Logistic] {
            let p = problem(f, 5);
            let x = DVector::from_fn(24, |j, _| (j as f64).cos());
            let map = p.eval_map(&x);
            let sparse = p.smooth_gradient(&x, &map);
            let mut dense = DVector::zeros(24);
            for b in 0..p.partition().num_blocks() {
                let cols = p.partition().range(b);
                let g = p.map_jacobian(&x, cols.clone()).tr_mul(&map);
                dense.rows_mut(cols.start, cols.len()).copy_from(&g);
            }
            assert!((sparse - dense).amax() < 1e-13);
        }
    }

    #[test]
    fn margin_hook_tracks_full_recompute() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for f in [Formulation::SquaredLog, Formulation::Logistic] {
            let p = problem(f, 6);
            let mut x = DVector::zeros(24);
            let mut cache = EvalCache::new();
            cache.refresh(&p, &x).unwrap();
            for _ in 0..100 {
                let b = rng.random_range(0..p.partition().num_blocks());
                let cols = p.partition().range(b);
                for j in cols {
                    x[j] += rng.random_range(-0.5..0.5);
                }
                let incremental = cache.map_at(&p, &x).unwrap().clone();
                assert!((incremental - p.eval_map(&x)).amax() <= 1e-12);
            }
            assert!(cache.incremental_evals() >= 100);
            let phi = eval_phi(&p, &x).unwrap();
            assert!((phi - cache.phi()).abs() <= 1e-12 * (1.0 + phi.abs()));
        }
    }

    #[test]
    fn invalid_inputs() {
        let ds = Arc::new(gen_synthetic(0, 5, 4, 0.5, 0.0).unwrap());
        assert!(build_sqlog_problem(ds.clone(), -0.1, BlockPartition::single(4).unwrap()).is_err());
        assert!(build_logistic_residual_problem(ds, 0.1, BlockPartition::single(3).unwrap()).is_err());
        assert_eq!("sqlog".parse::<Formulation>().unwrap(), Formulation::SquaredLog);
        assert!("hinge".parse::<Formulation>().is_err());
    }
}

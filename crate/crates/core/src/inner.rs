//! The strongly convex block subproblem
//!
//! ```text
//! q(s) = ⟨c, s − a⟩ + h(F0 + J(s − a)) + g_i(s) + (β/2)‖s − a‖²
//! ```
//!
//! solved by accelerated proximal gradient with function-value restart.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problem::OuterLoss;
use crate::prox::Regularizer;

/// Power iterations used for the step-size bound.
pub const POWER_ITERATIONS: usize = 50;
/// Safety factor applied to the Lipschitz estimate.
pub const LIPSCHITZ_SAFETY: f64 = 1.01;
/// Relative change of the power-iteration estimate above which it is treated as stalled.
const POWER_STALL_TOL: f64 = 1e-6;

/// Frozen linearization of the problem around the anchor `x_k^{i_k}`.
pub struct BlockModel<'a> {
    pub block: usize,
    pub cols: Range<usize>,
    /// `∇_{i_k} f(x_k)`.
    pub c: DVector<f64>,
    /// `∇_{i_k} F(x_k)`, `m × n_i`.
    pub jac: DMatrix<f64>,
    /// `F(x_k)`.
    pub f0: DVector<f64>,
    pub anchor: DVector<f64>,
    pub outer: &'a dyn OuterLoss,
    pub reg: &'a dyn Regularizer,
    jac_norm: f64,
}

impl<'a> BlockModel<'a> {
    /// Builds the model and estimates `‖J‖₂` once; the estimate is reused for every β.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        block: usize,
        cols: Range<usize>,
        c: DVector<f64>,
        jac: DMatrix<f64>,
        f0: DVector<f64>,
        anchor: DVector<f64>,
        outer: &'a dyn OuterLoss,
        reg: &'a dyn Regularizer,
        seed: u64,
    ) -> Result<Self> {
        let n_i = cols.len();
        if c.len() != n_i || anchor.len() != n_i || jac.ncols() != n_i {
            return Err(Error::Shape { context: "BlockModel: block width", expected: n_i, got: jac.ncols() });
        }
        if jac.nrows() != f0.len() {
            return Err(Error::Shape { context: "BlockModel: map dimension", expected: f0.len(), got: jac.nrows() });
        }
        let jac_norm = spectral_bound(&jac, seed);
        Ok(Self { block, cols, c, jac, f0, anchor, outer, reg, jac_norm })
    }

    /// The `‖J‖₂` estimate used for step sizes.
    pub fn jac_norm(&self) -> f64 {
        self.jac_norm
    }

    /// `q(s)` for a given β.
    pub fn objective(&self, s: &DVector<f64>, beta: f64) -> f64 {
        let d = s - &self.anchor;
        let lin = &self.jac * &d;
        self.objective_lin(s, &d, &lin, beta)
    }

    fn objective_lin(&self, s: &DVector<f64>, d: &DVector<f64>, lin: &DVector<f64>, beta: f64) -> f64 {
        self.c.dot(d) + self.outer.value(&(&self.f0 + lin)) + self.reg.value(self.cols.clone(), s) + 0.5 * beta * d.norm_squared()
    }

    /// `∇ψ(s) = c + Jᵀ∇h(F0 + J(s − a)) + β(s − a)`.
    pub fn smooth_gradient(&self, s: &DVector<f64>, beta: f64) -> DVector<f64> {
        let d = s - &self.anchor;
        let u = &self.f0 + &self.jac * &d;
        &self.c + self.jac.tr_mul(&self.outer.gradient(&u)) + d * beta
    }

    /// Step-size constant `1.01·(L_h‖J‖² + β)` used by the stopping residual.
    pub fn lipschitz(&self, beta: f64) -> f64 {
        LIPSCHITZ_SAFETY * (self.outer.lipschitz() * self.jac_norm.powi(2) + beta)
    }

    /// Prox-gradient fixed-point residual `L·‖s − prox_{g,1/L}(s − ∇ψ(s)/L)‖`.
    pub fn residual(&self, s: &DVector<f64>, beta: f64) -> f64 {
        let lip = self.lipschitz(beta);
        let grad = self.smooth_gradient(s, beta);
        self.residual_from_grad(s, &grad, lip)
    }

    fn residual_from_grad(&self, s: &DVector<f64>, grad: &DVector<f64>, lip: f64) -> f64 {
        let p = self.reg.prox(self.cols.clone(), &(s - grad / lip), 1.0 / lip);
        lip * (s - p).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStatus {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub s_star: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub status: InnerStatus,
}

/// Power-iteration estimate of `‖J‖₂`; never exceeds the true value.
pub fn estimate_spectral_norm(jac: &DMatrix<f64>, iterations: usize, seed: u64) -> f64 {
    power_iteration(jac, iterations.max(1), seed).0
}

fn power_iteration(jac: &DMatrix<f64>, iterations: usize, seed: u64) -> (f64, bool) {
    if jac.ncols() == 0 || jac.nrows() == 0 || jac.iter().all(|&v| v == 0.0) {
        return (0.0, true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(jac.ncols(), |_, _| rng.random_range(-1.0..1.0));
    let nv = v.norm();
    if nv == 0.0 {
        v.fill(1.0);
    }
    v /= v.norm();
    let mut est = 0.0;
    let mut converged = false;
    for _ in 0..iterations {
        let jv = jac * &v;
        let new_est = jv.norm();
        let w = jac.tr_mul(&jv);
        let nw = w.norm();
        let change = (new_est - est).abs() / new_est.max(f64::MIN_POSITIVE);
        est = new_est;
        if nw == 0.0 {
            converged = true;
            break;
        }
        v = w / nw;
        if change <= POWER_STALL_TOL {
            converged = true;
            break;
        }
    }
    (est, converged)
}

/// The `‖J‖₂` value used for steps: power iteration, or the Frobenius norm
/// (an upper bound) when the power iteration has not settled.
pub(crate) fn spectral_bound(jac: &DMatrix<f64>, seed: u64) -> f64 {
    let (est, converged) = power_iteration(jac, POWER_ITERATIONS, seed);
    if converged {
        est
    } else {
        jac.norm()
    }
}

/// Accelerated proximal gradient on `q`.
///
/// The smooth part `⟨c, ·⟩ + h(F0 + J·)` takes gradient steps of length
/// `1/(1.01·L_h‖J‖²)`; the β-quadratic is folded into the prox of `g`, so
/// the `J = 0` case is solved exactly in one step. Stops when the
/// [`BlockModel::residual`] at the current extrapolation point is `≤ tol`,
/// and returns the point with the smallest residual seen.
pub fn solve_block_subproblem(
    model: &BlockModel<'_>,
    beta: f64,
    warm_start: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<InnerResult> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Config(format!("subproblem beta must be positive, got {beta}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("subproblem tolerance must be positive, got {tol}")));
    }
    if warm_start.len() != model.anchor.len() {
        return Err(Error::Shape { context: "solve_block_subproblem: warm start", expected: model.anchor.len(), got: warm_start.len() });
    }

    let a = &model.anchor;
    let lh = model.outer.lipschitz();
    let lip_resid = model.lipschitz(beta);
    let mut lip_smooth = LIPSCHITZ_SAFETY * lh * model.jac_norm.powi(2);
    let mut on_frobenius = false;

    let mut x = warm_start.clone();
    let dx = &x - a;
    let mut rx = &model.jac * &dx;
    let mut qx = model.objective_lin(&x, &dx, &rx, beta);
    if !qx.is_finite() {
        return Err(Error::NonFinite { term: "subproblem objective" });
    }
    let mut y = x.clone();
    let mut ry = rx.clone();
    let mut t = 1.0_f64;
    let mut just_restarted = false;

    let mut best = x.clone();
    let mut best_res = f64::INFINITY;

    for it in 1..=max_iter {
        let u = &model.f0 + &ry;
        let g0 = &model.c + model.jac.tr_mul(&model.outer.gradient(&u));
        let dy = &y - a;
        let full_grad = &g0 + &dy * beta;
        let res = model.residual_from_grad(&y, &full_grad, lip_resid);
        if !res.is_finite() {
            return Err(Error::NonFinite { term: "subproblem gradient" });
        }
        if res < best_res {
            best_res = res;
            best.copy_from(&y);
        }
        if res <= tol {
            return Ok(InnerResult { s_star: y, residual: res, iterations: it, status: InnerStatus::Converged });
        }

        // prox of g + (β/2)‖· − a‖² at y − ∇ψ0(y)/L
        let denom = beta + lip_smooth;
        let v = (a * beta + &y * lip_smooth - &g0) / denom;
        let xn = model.reg.prox(model.cols.clone(), &v, 1.0 / denom);
        let dxn = &xn - a;
        let rxn = &model.jac * &dxn;
        let qn = model.objective_lin(&xn, &dxn, &rxn, beta);
        if !qn.is_finite() {
            return Err(Error::NonFinite { term: "subproblem objective" });
        }

        if qn - qx > 1e-14 * (1.0 + qx.abs()) {
            // A plain step from x also failed to decrease: the norm estimate is too small.
            if just_restarted && !on_frobenius {
                lip_smooth = LIPSCHITZ_SAFETY * lh * model.jac.norm_squared();
                on_frobenius = true;
            }
            just_restarted = true;
            t = 1.0;
            y.copy_from(&x);
            ry.copy_from(&rx);
            continue;
        }
        just_restarted = false;

        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / tn;
        y = &xn + (&xn - &x) * mom;
        ry = &rxn + (&rxn - &rx) * mom;
        x = xn;
        rx = rxn;
        qx = qn;
        t = tn;
    }

    Ok(InnerResult { s_star: best, residual: best_res, iterations: max_iter, status: InnerStatus::MaxIter })
}

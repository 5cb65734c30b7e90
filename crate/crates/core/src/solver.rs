//! Monotone and nonmonotone linearized block coordinate descent.
//!
//! Each outer iteration samples a block, freezes a Gauss–Newton model of the
//! smooth part along that block, and doubles β until the regularized model
//! step passes the sufficient-decrease test against either `φ(x_k)`
//! (monotone) or the reference value `R_k` (nonmonotone). As in the
//! algorithm listing, β is doubled *before* the first subproblem solve, so
//! the first trial of every iteration uses twice the carried-over seed.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inner::{solve_block_subproblem, spectral_bound, BlockModel};
use crate::problem::{phi_from_map, BlockPartition, CompositeProblem, EvalCache};

/// Roundoff allowance in the acceptance tests, relative to `1 + |reference|`.
pub const ACCEPT_SLACK: f64 = 1e-12;
pub const DEFAULT_BETA_MIN: f64 = 1e-3;
pub const DEFAULT_U: f64 = 0.5;
pub const DEFAULT_MAX_DOUBLINGS: usize = 60;

/// Weight sequence `u_{k+1}` of the nonmonotone reference update.
#[derive(Clone)]
pub enum USchedule {
    Constant(f64),
    /// `k ↦ u_{k+1}`, called once per accepted step.
    PerIteration(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl USchedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            USchedule::Constant(u) => *u,
            USchedule::PerIteration(f) => f(k),
        }
    }
}

impl fmt::Debug for USchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            USchedule::Constant(u) => write!(f, "Constant({u})"),
            USchedule::PerIteration(_) => f.write_str("PerIteration(..)"),
        }
    }
}

impl Default for USchedule {
    fn default() -> Self {
        USchedule::Constant(DEFAULT_U)
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// `β_min`; defaults to [`DEFAULT_BETA_MIN`].
    pub beta_min: Option<f64>,
    /// `β_1`, must be `≥ β_min/2`; defaults to `β_min/2`.
    pub beta_seed: Option<f64>,
    /// Block sampling probabilities; uniform when `None`. Every entry must be positive.
    pub probs: Option<Vec<f64>>,
    pub u: USchedule,
    pub u_min: f64,
    pub max_outer_iters: usize,
    /// Budget on block epochs (`Σ n_{i_k}/n`), stationarity checks excluded.
    pub max_epochs: f64,
    pub max_seconds: Option<f64>,
    /// Stop once the stationarity measure is `≤` this. A non-finite value
    /// disables the test (budget-only run); checks are still recorded.
    pub target_stationarity: f64,
    /// Iterations between stationarity checks; `None` means `n_block`, `Some(0)` never.
    pub check_every: Option<usize>,
    pub max_doublings: usize,
    /// Inner tolerance relative to `1 + |q(anchor)|`.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub seed: u64,
    pub use_cache: bool,
    /// Fill `IterationRecord::seconds`; off gives bit-reproducible traces.
    pub record_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta_min: None,
            beta_seed: None,
            probs: None,
            u: USchedule::default(),
            u_min: 0.01,
            max_outer_iters: 1000,
            max_epochs: f64::INFINITY,
            max_seconds: None,
            target_stationarity: 0.0,
            check_every: None,
            max_doublings: DEFAULT_MAX_DOUBLINGS,
            inner_tol: 1e-10,
            inner_max_iter: 20_000,
            seed: 0,
            use_cache: true,
            record_time: true,
        }
    }
}

impl SolverConfig {
    /// Settings used by the benchmark harness: looser inner solves.
    pub fn benchmark() -> Self {
        Self { inner_tol: 1e-6, ..Self::default() }
    }

    pub fn beta_min_or_default(&self) -> f64 {
        self.beta_min.unwrap_or(DEFAULT_BETA_MIN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Monotone,
    Nonmonotone,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monotone" => Ok(Variant::Monotone),
            "nonmonotone" => Ok(Variant::Nonmonotone),
            _ => Err(Error::Config(format!("unknown variant '{s}' (expected monotone or nonmonotone)"))),
        }
    }
}

/// Which local model drives the block step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StepModel {
    /// Linearize `F` inside `h` and solve the regularized subproblem.
    GaussNewton,
    /// Linearize all of `f + h∘F` (proximal block coordinate descent).
    Linearized,
}

/// Names used in traces and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SolverKind {
    #[serde(rename = "libcod-monotone")]
    LibcodMonotone,
    #[serde(rename = "libcod-nonmonotone")]
    LibcodNonmonotone,
    #[serde(rename = "proxcd")]
    ProxCd,
    #[serde(rename = "full-gn")]
    FullGaussNewton,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] =
        [SolverKind::LibcodMonotone, SolverKind::LibcodNonmonotone, SolverKind::ProxCd, SolverKind::FullGaussNewton];

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::LibcodMonotone => "libcod-monotone",
            SolverKind::LibcodNonmonotone => "libcod-nonmonotone",
            SolverKind::ProxCd => "proxcd",
            SolverKind::FullGaussNewton => "full-gn",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown solver '{s}'")))
    }
}

/// One row of the solver trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Block index `i_k` (0-based).
    pub block: usize,
    /// Accepted `β_{k+1}`.
    pub beta: f64,
    pub doublings: usize,
    /// `φ(x_{k+1})`.
    pub phi: f64,
    /// `R_{k+1}` for the nonmonotone variant, `φ(x_{k+1})` otherwise.
    pub reference: f64,
    /// `‖x_{k+1} − x_k‖`.
    pub dx_norm: f64,
    /// Stationarity of `x_{k+1}`, when a check ran at this iteration.
    pub stationarity: Option<f64>,
    /// The stationarity value is the prox-gradient surrogate, not an exact distance.
    pub stationarity_surrogate: bool,
    pub inner_iters: usize,
    /// Cumulative block epochs.
    pub epochs: f64,
    pub seconds: f64,
}

/// Mutable state of one run.
pub struct OuterState {
    pub k: usize,
    /// β seed for the next iteration (doubled before its first trial).
    pub beta_next: f64,
    /// `R_k`; equals `φ(x_k)` for the monotone variant.
    pub reference: f64,
    pub phi0: f64,
    pub cache: EvalCache,
    pub epochs: f64,
    pub check_epochs: f64,
    rng: ChaCha8Rng,
    probs: Vec<f64>,
    beta_min: f64,
    check_every: usize,
    start: Instant,
}

impl OuterState {
    pub fn new<P: CompositeProblem + ?Sized>(problem: &P, config: &SolverConfig, x0: &DVector<f64>) -> Result<Self> {
        let part = problem.partition();
        let beta_min = config.beta_min_or_default();
        if !(beta_min > 0.0) || !beta_min.is_finite() {
            return Err(Error::Config(format!("beta_min must be positive, got {beta_min}")));
        }
        let beta_seed = config.beta_seed.unwrap_or(beta_min / 2.0);
        if !(beta_seed >= beta_min / 2.0) || !beta_seed.is_finite() {
            return Err(Error::Config(format!("beta_seed {beta_seed} must be >= beta_min/2 = {}", beta_min / 2.0)));
        }
        let probs = match &config.probs {
            Some(p) => {
                if p.len() != part.num_blocks() {
                    return Err(Error::Config(format!("{} probabilities for {} blocks", p.len(), part.num_blocks())));
                }
                validate_probs(p)?;
                if p.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Config("every block needs a positive sampling probability".into()));
                }
                p.clone()
            }
            None => vec![1.0 / part.num_blocks() as f64; part.num_blocks()],
        };
        if let USchedule::Constant(u) = config.u {
            if !(config.u_min > 0.0 && config.u_min < 1.0) {
                return Err(Error::Config(format!("u_min must lie in (0, 1), got {}", config.u_min)));
            }
            if !(u > config.u_min && u <= 1.0) {
                return Err(Error::Config(format!("u = {u} must lie in (u_min, 1] = ({}, 1]", config.u_min)));
            }
        }
        if !(config.inner_tol > 0.0) {
            return Err(Error::Config("inner tolerance must be positive".into()));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { term: "x0" });
        }
        let mut cache = if config.use_cache { EvalCache::new() } else { EvalCache::disabled() };
        cache.refresh(problem, x0)?;
        let phi0 = cache.phi();
        Ok(Self {
            k: 0,
            beta_next: beta_seed,
            reference: phi0,
            phi0,
            cache,
            epochs: 0.0,
            check_epochs: 0.0,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            probs,
            beta_min,
            check_every: config.check_every.unwrap_or(part.num_blocks()),
            start: Instant::now(),
        })
    }

    pub fn x(&self) -> &DVector<f64> {
        self.cache.x()
    }

    pub fn phi(&self) -> f64 {
        self.cache.phi()
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Config("empty probability vector".into()));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Config("probabilities must be finite and nonnegative".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Draws a block index by inverse CDF on a single uniform variate.
pub fn sample_block<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    validate_probs(probs)?;
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return Ok(i);
        }
    }
    // u landed in the rounding gap above the last partial sum
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1))
}

/// `β_{k+1} = max(β_k/4, β_min/2)`.
pub fn update_beta_reset(beta_accepted: f64, beta_min: f64) -> f64 {
    (beta_accepted / 4.0).max(beta_min / 2.0)
}

/// `φ(x_{k+1}) ≤ φ(x_k) − (β/2)‖Δx‖²`, up to [`ACCEPT_SLACK`].
pub fn accept_monotone(phi_new: f64, phi_old: f64, beta: f64, dx_norm: f64) -> bool {
    accept(phi_new, phi_old, beta, dx_norm)
}

/// `φ(x_{k+1}) ≤ R_k − (β/2)‖Δx‖²`, up to [`ACCEPT_SLACK`].
pub fn accept_nonmonotone(phi_new: f64, reference: f64, beta: f64, dx_norm: f64) -> bool {
    accept(phi_new, reference, beta, dx_norm)
}

fn accept(phi_new: f64, reference: f64, beta: f64, dx_norm: f64) -> bool {
    phi_new.is_finite() && phi_new <= reference - 0.5 * beta * dx_norm * dx_norm + ACCEPT_SLACK * (1.0 + reference.abs())
}

/// `R_{k+1} = (1 − u)R_k + u·φ(x_{k+1})`.
pub fn update_reference(reference: f64, u: f64, phi_new: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::Config(format!("u must lie in (0, 1], got {u}")));
    }
    Ok((1.0 - u) * reference + u * phi_new)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationarity {
    pub value: f64,
    /// `true` when the regularizer has no exact distance and the
    /// prox-gradient mapping was used instead.
    pub surrogate: bool,
}

/// `dist(0, ∂φ(x))`, or the prox-gradient surrogate when `g` is not one of the
/// exactly supported terms.
pub fn stationarity_measure<P: CompositeProblem + ?Sized>(problem: &P, x: &DVector<f64>) -> Result<Stationarity> {
    let map_x = problem.eval_map(x);
    stationarity_at(problem, x, &map_x)
}

pub(crate) fn stationarity_at<P: CompositeProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    map_x: &DVector<f64>,
) -> Result<Stationarity> {
    let grad = problem.smooth_gradient(x, map_x);
    match problem.regularizer().subdiff_dist(&grad, x) {
        Ok(value) => Ok(Stationarity { value, surrogate: false }),
        Err(Error::UnsupportedMeasure) => {
            let part = problem.partition();
            let mut full = DMatrix::zeros(problem.map_dim(), part.dim());
            for b in 0..part.num_blocks() {
                let cols = part.range(b);
                full.columns_mut(cols.start, cols.len()).copy_from(&problem.map_jacobian(x, cols));
            }
            let sigma = spectral_bound(&full, 0);
            let lip = (problem.outer().lipschitz() * sigma * sigma).max(1.0);
            let p = problem.regularizer().prox(0..x.len(), &(x - &grad / lip), 1.0 / lip);
            Ok(Stationarity { value: lip * (x - p).norm(), surrogate: true })
        }
        Err(e) => Err(e),
    }
}

fn power_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64)
}

/// One outer iteration of the chosen variant.
pub fn outer_step<P: CompositeProblem + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    state: &mut OuterState,
    variant: Variant,
) -> Result<IterationRecord> {
    step(problem, config, state, variant, StepModel::GaussNewton)
}

pub(crate) fn step<P: CompositeProblem + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    state: &mut OuterState,
    variant: Variant,
    model_kind: StepModel,
) -> Result<IterationRecord> {
    let part: &BlockPartition = problem.partition();
    let block = sample_block(&state.probs, &mut state.rng)?;
    let cols = part.range(block);

    if !state.cache.is_valid() {
        let x = state.cache.x().clone();
        state.cache.refresh(problem, &x)?;
    }
    let x = state.cache.x().clone();
    let phi_k = state.cache.phi();
    let reference = match variant {
        Variant::Monotone => phi_k,
        Variant::Nonmonotone => state.reference,
    };
    let anchor = x.rows(cols.start, cols.len()).into_owned();
    let c = problem.grad_f(&x, cols.clone());
    let jac = match (state.cache.aux(), problem.incremental()) {
        (Some(aux), Some(inc)) => inc.jacobian_from_state(aux, cols.clone()),
        _ => problem.map_jacobian(&x, cols.clone()),
    };
    let f0 = state.cache.map().clone();
    let outer = problem.outer();
    let reg = problem.regularizer();

    enum Local<'a> {
        GaussNewton { model: BlockModel<'a>, tol: f64 },
        Linearized { grad: DVector<f64> },
    }
    let local = match model_kind {
        StepModel::GaussNewton => {
            let model = BlockModel::new(block, cols.clone(), c, jac, f0, anchor.clone(), outer, reg, power_seed(config.seed, state.k))?;
            let q_anchor = outer.value(&model.f0) + reg.value(cols.clone(), &anchor);
            let tol = config.inner_tol * (1.0 + q_anchor.abs());
            Local::GaussNewton { model, tol }
        }
        StepModel::Linearized => {
            let grad = c + jac.tr_mul(&outer.gradient(&f0));
            Local::Linearized { grad }
        }
    };

    let mut beta = state.beta_next;
    let mut inner_iters = 0;
    let mut last_phi = f64::NAN;
    let mut last_residual = 0.0;
    for doublings in 1..=config.max_doublings {
        beta *= 2.0;
        let s = match &local {
            Local::GaussNewton { model, tol } => {
                let out = solve_block_subproblem(model, beta, &anchor, *tol, config.inner_max_iter)?;
                inner_iters += out.iterations;
                last_residual = out.residual;
                out.s_star
            }
            Local::Linearized { grad } => reg.prox(cols.clone(), &(&anchor - grad / beta), 1.0 / beta),
        };
        let dx_norm = (&s - &anchor).norm();
        let trial = state.cache.trial(problem, cols.clone(), &s)?;
        let phi_new = match &trial.phi {
            Ok(v) => *v,
            Err(Error::NonFinite { .. }) => f64::NAN,
            Err(_) => return Err(trial.phi.unwrap_err()),
        };
        last_phi = phi_new;
        if !accept(phi_new, reference, beta, dx_norm) {
            continue;
        }

        state.cache.commit(trial);
        if !config.use_cache {
            state.cache.invalidate();
        }
        state.reference = match variant {
            Variant::Monotone => phi_new,
            Variant::Nonmonotone => update_reference(state.reference, config.u.at(state.k), phi_new)?,
        };
        state.beta_next = update_beta_reset(beta, state.beta_min);
        state.epochs += cols.len() as f64 / part.dim() as f64;
        let k = state.k;
        state.k += 1;

        let mut stationarity = None;
        let mut surrogate = false;
        if state.check_every > 0 && state.k.is_multiple_of(state.check_every) {
            let x_new = state.cache.x().clone();
            let st = if config.use_cache {
                stationarity_at(problem, &x_new, state.cache.map())?
            } else {
                stationarity_measure(problem, &x_new)?
            };
            state.check_epochs += 1.0;
            stationarity = Some(st.value);
            surrogate = st.surrogate;
        }

        return Ok(IterationRecord {
            k,
            block,
            beta,
            doublings,
            phi: phi_new,
            reference: state.reference,
            dx_norm,
            stationarity,
            stationarity_surrogate: surrogate,
            inner_iters,
            epochs: state.epochs,
            seconds: if config.record_time { state.elapsed() } else { 0.0 },
        });
    }

    Err(Error::LineSearch {
        iteration: state.k,
        block,
        beta,
        doublings: config.max_doublings,
        trial_phi: last_phi,
        reference,
        inner_residual: last_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Stationary,
    MaxIterations,
    MaxEpochs,
    TimeBudget,
    /// The observer asked to stop.
    Stopped,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Stationary => "stationary",
            Termination::MaxIterations => "max-iterations",
            Termination::MaxEpochs => "max-epochs",
            Termination::TimeBudget => "time-budget",
            Termination::Stopped => "stopped",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub x: DVector<f64>,
    pub trace: Vec<IterationRecord>,
    pub reason: Termination,
    pub phi0: f64,
    /// Epochs spent on stationarity checks (one per check).
    pub check_epochs: f64,
}

impl RunOutput {
    pub fn final_phi(&self) -> f64 {
        self.trace.last().map_or(self.phi0, |r| r.phi)
    }

    pub fn min_phi(&self) -> f64 {
        self.trace.iter().map(|r| r.phi).fold(self.phi0, f64::min)
    }

    /// `Σ_k (β_{k+1}/2)‖Δx_{k+1}‖²`.
    pub fn telescoped_decrease(&self) -> f64 {
        self.trace.iter().map(|r| 0.5 * r.beta * r.dx_norm * r.dx_norm).sum()
    }

    /// Last recorded stationarity value.
    pub fn last_stationarity(&self) -> Option<f64> {
        self.trace.iter().rev().find_map(|r| r.stationarity)
    }
}

/// Runs the chosen variant until a termination criterion fires.
pub fn run<P: CompositeProblem + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    x0: &DVector<f64>,
    variant: Variant,
) -> Result<RunOutput> {
    run_with_observer(problem, config, x0, variant, |_, _| true)
}

/// Like [`run`], calling `observer(record, x_{k+1})` after each iteration;
/// returning `false` stops the run.
pub fn run_with_observer<P, O>(
    problem: &P,
    config: &SolverConfig,
    x0: &DVector<f64>,
    variant: Variant,
    observer: O,
) -> Result<RunOutput>
where
    P: CompositeProblem + ?Sized,
    O: FnMut(&IterationRecord, &DVector<f64>) -> bool,
{
    drive(problem, config, x0, variant, StepModel::GaussNewton, observer)
}

pub(crate) fn drive<P, O>(
    problem: &P,
    config: &SolverConfig,
    x0: &DVector<f64>,
    variant: Variant,
    model: StepModel,
    mut observer: O,
) -> Result<RunOutput>
where
    P: CompositeProblem + ?Sized,
    O: FnMut(&IterationRecord, &DVector<f64>) -> bool,
{
    let mut state = OuterState::new(problem, config, x0)?;
    let mut trace = Vec::new();
    let reason = loop {
        if state.k >= config.max_outer_iters {
            break Termination::MaxIterations;
        }
        if state.epochs >= config.max_epochs {
            break Termination::MaxEpochs;
        }
        if config.max_seconds.is_some_and(|budget| state.elapsed() >= budget) {
            break Termination::TimeBudget;
        }
        let record = step(problem, config, &mut state, variant, model)?;
        let stationary = config.target_stationarity.is_finite()
            && record.stationarity.is_some_and(|s| s <= config.target_stationarity);
        let keep_going = observer(&record, state.x());
        trace.push(record);
        if stationary {
            break Termination::Stationary;
        }
        if !keep_going {
            break Termination::Stopped;
        }
    };
    Ok(RunOutput {
        x: state.x().clone(),
        trace,
        reason,
        phi0: state.phi0,
        check_epochs: state.check_epochs,
    })
}

/// Recomputes `φ` at the final point of a run (debug aid for trace consistency).
pub fn recompute_phi<P: CompositeProblem + ?Sized>(problem: &P, x: &DVector<f64>) -> Result<f64> {
    let map_x = problem.eval_map(x);
    phi_from_map(problem, x, &map_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::LinearProblem;
    use crate::prox::SeparableReg;
    use nalgebra::DMatrix;

    #[test]
    fn sample_degenerate_and_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_block(&[1.0, 0.0, 0.0], &mut rng).unwrap(), 0);
            assert_eq!(sample_block(&[1.0], &mut rng).unwrap(), 0);
        }
        assert!(sample_block(&[0.5, 0.2], &mut rng).is_err());
        assert!(sample_block(&[], &mut rng).is_err());
        assert!(sample_block(&[1.5, -0.5], &mut rng).is_err());
    }

    #[test]
    fn sample_uniform_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[sample_block(&[0.25; 4], &mut rng).unwrap()] += 1;
        }
        let se = (0.25 * 0.75 / draws as f64).sqrt();
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.25).abs() < 3.0 * se, "{freq}");
        }
    }

    #[test]
    fn beta_reset_rule() {
        assert_eq!(update_beta_reset(8.0, 2.0), 2.0);
        assert_eq!(update_beta_reset(1.0, 2.0), 1.0);
        assert_eq!(update_beta_reset(0.5, 4.0), 2.0);
    }

    #[test]
    fn acceptance_tests() {
        assert!(accept_monotone(9.0, 10.0, 2.0, 1.0));
        assert!(!accept_monotone(9.5, 10.0, 2.0, 1.0));
        assert!(accept_monotone(10.0, 10.0, 2.0, 0.0));
        assert!(!accept_monotone(f64::NAN, 10.0, 2.0, 0.0));
        assert!(!accept_monotone(f64::INFINITY, 10.0, 2.0, 0.0));

        assert!(accept_nonmonotone(10.5, 11.0, 1.0, 1.0));
        assert!(!accept_nonmonotone(11.0, 11.0, 1.0, 1.0));
        for (phi, dx) in [(9.0, 1.0), (9.5, 1.0), (10.0, 0.0)] {
            assert_eq!(accept_nonmonotone(phi, 10.0, 2.0, dx), accept_monotone(phi, 10.0, 2.0, dx));
        }
    }

    #[test]
    fn reference_update() {
        assert_eq!(update_reference(10.0, 0.5, 8.0).unwrap(), 9.0);
        assert_eq!(update_reference(10.0, 1.0, 8.0).unwrap(), 8.0);
        assert!((update_reference(10.0, 0.1, 8.0).unwrap() - 9.8).abs() < 1e-15);
        assert!(update_reference(10.0, 0.0, 8.0).is_err());
        assert!(update_reference(10.0, 1.5, 8.0).is_err());
    }

    fn least_squares_instance(seed: u64) -> (LinearProblem, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (12, 5);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let oracle = (a.tr_mul(&a)).cholesky().unwrap().solve(&a.tr_mul(&b));
        let prob = LinearProblem::new(a, b, SeparableReg::Zero, BlockPartition::single(n).unwrap()).unwrap();
        (prob, oracle)
    }

    #[test]
    fn one_block_least_squares_converges() {
        let (prob, oracle) = least_squares_instance(5);
        let config = SolverConfig { max_outer_iters: 200, target_stationarity: 1e-12, ..Default::default() };
        let out = run(&prob, &config, &DVector::zeros(5), Variant::Monotone).unwrap();
        assert!((&out.x - &oracle).norm() < 1e-8, "{}", (&out.x - &oracle).norm());
        assert!(out.trace.last().unwrap().dx_norm <= 1e-8);
    }

    #[test]
    fn zero_step_when_already_optimal() {
        let (prob, oracle) = least_squares_instance(6);
        let mut state = OuterState::new(&prob, &SolverConfig { beta_seed: Some(4.0), ..Default::default() }, &oracle).unwrap();
        // the subproblem at an optimum returns the anchor up to the inner tolerance
        let rec = outer_step(&prob, &SolverConfig::default(), &mut state, Variant::Monotone).unwrap();
        assert_eq!(rec.doublings, 1);
        assert!(rec.dx_norm < 1e-9);
        assert_eq!(state.k, 1);
        assert_eq!(state.beta_next, update_beta_reset(8.0, DEFAULT_BETA_MIN));
    }

    #[test]
    fn budget_only_run_has_full_trace() {
        let (prob, _) = least_squares_instance(7);
        let config = SolverConfig { max_outer_iters: 37, target_stationarity: f64::INFINITY, check_every: Some(5), ..Default::default() };
        let out = run(&prob, &config, &DVector::zeros(5), Variant::Monotone).unwrap();
        assert_eq!(out.trace.len(), 37);
        assert_eq!(out.reason, Termination::MaxIterations);
        assert_eq!(out.trace.iter().filter(|r| r.stationarity.is_some()).count(), 7);
    }

    #[test]
    fn config_validation() {
        let (prob, _) = least_squares_instance(8);
        let x0 = DVector::zeros(5);
        let bad = [
            SolverConfig { beta_min: Some(0.0), ..Default::default() },
            SolverConfig { beta_min: Some(1.0), beta_seed: Some(0.1), ..Default::default() },
            SolverConfig { probs: Some(vec![0.5, 0.5]), ..Default::default() },
            SolverConfig { u: USchedule::Constant(0.0), ..Default::default() },
            SolverConfig { u: USchedule::Constant(1.2), ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(OuterState::new(&prob, &cfg, &x0), Err(Error::Config(_))), "{cfg:?}");
        }
    }
}

//! Composite problems `min f(x) + h(F(x)) + Σ g_i(x^i)` over a block partition.
//!
//! Derivatives are supplied by the implementor. All block-level methods take a
//! contiguous coordinate range rather than a block index, so any problem can
//! be viewed through a different partition (see [`Repartitioned`]).

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::prox::Regularizer;

/// Contiguous blocks `x^1, ..., x^{n_block}` of the decision vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    dim: usize,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidPartition("no blocks".into()));
        }
        if let Some(pos) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidPartition(format!("block {pos} has size 0")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(Self { sizes, offsets, dim: acc })
    }

    /// A single block covering all `n` coordinates.
    pub fn single(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    /// Blocks of `block_size` coordinates; the last block takes the remainder.
    pub fn uniform(n: usize, block_size: usize) -> Result<Self> {
        if n == 0 || block_size == 0 {
            return Err(Error::InvalidPartition(format!("n = {n}, block size = {block_size}")));
        }
        let bs = block_size.min(n);
        let mut sizes = vec![bs; n / bs];
        if !n.is_multiple_of(bs) {
            sizes.push(n % bs);
        }
        Self::new(sizes)
    }

    /// `count` contiguous blocks whose sizes differ by at most one.
    pub fn even(n: usize, count: usize) -> Result<Self> {
        if count == 0 || count > n {
            return Err(Error::InvalidPartition(format!("cannot split {n} coordinates into {count} blocks")));
        }
        Self::new((0..count).map(|i| n / count + usize::from(i < n % count)).collect())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    /// Total dimension `n = Σ n_i`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        self.offsets[block]..self.offsets[block] + self.sizes[block]
    }

    /// Block containing coordinate `j`.
    pub fn block_of(&self, j: usize) -> usize {
        match self.offsets.binary_search(&j) {
            Ok(b) => b,
            Err(b) => b - 1,
        }
    }
}

/// The convex outer function `h` with `L_h`-Lipschitz gradient.
pub trait OuterLoss: Send + Sync {
    fn value(&self, u: &DVector<f64>) -> f64;
    fn gradient(&self, u: &DVector<f64>) -> DVector<f64>;
    /// `L_h`.
    fn lipschitz(&self) -> f64;
}

/// `h(u) = (scale/2)·‖u‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSquaredNorm {
    pub scale: f64,
}

impl Default for HalfSquaredNorm {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

impl OuterLoss for HalfSquaredNorm {
    fn value(&self, u: &DVector<f64>) -> f64 {
        0.5 * self.scale * u.norm_squared()
    }

    fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        u * self.scale
    }

    fn lipschitz(&self) -> f64 {
        self.scale
    }
}

/// Optional incremental maintenance of `F` after a single-block update.
///
/// The problem keeps an auxiliary state (for linear-margin models: `Ax + b`)
/// from which `F` and its block Jacobians are cheap to form.
pub trait IncrementalMap: Send + Sync {
    fn state(&self, x: &DVector<f64>) -> DVector<f64>;
    /// State after `x[cols] += delta`.
    fn update_state(&self, state: &DVector<f64>, cols: Range<usize>, delta: &DVector<f64>) -> DVector<f64>;
    fn map_from_state(&self, state: &DVector<f64>) -> DVector<f64>;
    fn jacobian_from_state(&self, state: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64>;
}

/// An instance of `min f(x) + h(F(x)) + Σ g_i(x^i)`.
///
/// Implementations must be safe to evaluate concurrently from several runs.
pub trait CompositeProblem: Send + Sync {
    fn partition(&self) -> &BlockPartition;

    /// `m`, the dimension of `F(x)`.
    fn map_dim(&self) -> usize;

    fn eval_f(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    /// `∇_{cols} f(x)`.
    fn grad_f(&self, _x: &DVector<f64>, cols: Range<usize>) -> DVector<f64> {
        DVector::zeros(cols.len())
    }

    /// `F(x)`.
    fn eval_map(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `∇_{cols} F(x)`, an `m × |cols|` matrix.
    fn map_jacobian(&self, x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64>;

    fn outer(&self) -> &dyn OuterLoss;

    fn regularizer(&self) -> &dyn Regularizer;

    fn incremental(&self) -> Option<&dyn IncrementalMap> {
        None
    }

    /// Full gradient of the smooth part, `∇f(x) + ∇F(x)ᵀ ∇h(F(x))`, given `map_x = F(x)`.
    fn smooth_gradient(&self, x: &DVector<f64>, map_x: &DVector<f64>) -> DVector<f64> {
        let dh = self.outer().gradient(map_x);
        let part = self.partition();
        let mut grad = DVector::zeros(part.dim());
        for b in 0..part.num_blocks() {
            let cols = part.range(b);
            let jac = self.map_jacobian(x, cols.clone());
            let gb = self.grad_f(x, cols.clone()) + jac.tr_mul(&dh);
            grad.rows_mut(cols.start, cols.len()).copy_from(&gb);
        }
        grad
    }

    fn dim(&self) -> usize {
        self.partition().dim()
    }
}

impl<P: CompositeProblem + ?Sized> CompositeProblem for &P {
    fn partition(&self) -> &BlockPartition {
        (**self).partition()
    }
    fn map_dim(&self) -> usize {
        (**self).map_dim()
    }
    fn eval_f(&self, x: &DVector<f64>) -> f64 {
        (**self).eval_f(x)
    }
    fn grad_f(&self, x: &DVector<f64>, cols: Range<usize>) -> DVector<f64> {
        (**self).grad_f(x, cols)
    }
    fn eval_map(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).eval_map(x)
    }
    fn map_jacobian(&self, x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64> {
        (**self).map_jacobian(x, cols)
    }
    fn outer(&self) -> &dyn OuterLoss {
        (**self).outer()
    }
    fn regularizer(&self) -> &dyn Regularizer {
        (**self).regularizer()
    }
    fn incremental(&self) -> Option<&dyn IncrementalMap> {
        (**self).incremental()
    }
    fn smooth_gradient(&self, x: &DVector<f64>, map_x: &DVector<f64>) -> DVector<f64> {
        (**self).smooth_gradient(x, map_x)
    }
}

/// A problem viewed through a different block partition of the same coordinates.
pub struct Repartitioned<P> {
    inner: P,
    partition: BlockPartition,
}

impl<P: CompositeProblem> Repartitioned<P> {
    pub fn new(inner: P, partition: BlockPartition) -> Result<Self> {
        if partition.dim() != inner.dim() {
            return Err(Error::Shape {
                context: "Repartitioned::new",
                expected: inner.dim(),
                got: partition.dim(),
            });
        }
        Ok(Self { inner, partition })
    }

    pub fn into_inner(self) -> P {
        self.inner
    }
}

impl<P: CompositeProblem> CompositeProblem for Repartitioned<P> {
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }
    fn map_dim(&self) -> usize {
        self.inner.map_dim()
    }
    fn eval_f(&self, x: &DVector<f64>) -> f64 {
        self.inner.eval_f(x)
    }
    fn grad_f(&self, x: &DVector<f64>, cols: Range<usize>) -> DVector<f64> {
        self.inner.grad_f(x, cols)
    }
    fn eval_map(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.eval_map(x)
    }
    fn map_jacobian(&self, x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64> {
        self.inner.map_jacobian(x, cols)
    }
    fn outer(&self) -> &dyn OuterLoss {
        self.inner.outer()
    }
    fn regularizer(&self) -> &dyn Regularizer {
        self.inner.regularizer()
    }
    fn incremental(&self) -> Option<&dyn IncrementalMap> {
        self.inner.incremental()
    }
    fn smooth_gradient(&self, x: &DVector<f64>, map_x: &DVector<f64>) -> DVector<f64> {
        self.inner.smooth_gradient(x, map_x)
    }
}

fn check_dim<P: CompositeProblem + ?Sized>(problem: &P, x: &DVector<f64>, context: &'static str) -> Result<()> {
    if x.len() != problem.dim() {
        return Err(Error::Shape { context, expected: problem.dim(), got: x.len() });
    }
    Ok(())
}

fn finite(v: f64, term: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { term })
    }
}

/// `φ(x)` given a precomputed `F(x)`.
pub(crate) fn phi_from_map<P: CompositeProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    map_x: &DVector<f64>,
) -> Result<f64> {
    if map_x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { term: "F(x)" });
    }
    let f = finite(problem.eval_f(x), "f(x)")?;
    let h = finite(problem.outer().value(map_x), "h(F(x))")?;
    let g = finite(problem.regularizer().value(0..x.len(), x), "g(x)")?;
    Ok(f + h + g)
}

/// `φ(x) = f(x) + h(F(x)) + Σ g_i(x^i)`.
pub fn eval_phi<P: CompositeProblem + ?Sized>(problem: &P, x: &DVector<f64>) -> Result<f64> {
    check_dim(problem, x, "eval_phi")?;
    let map_x = problem.eval_map(x);
    if map_x.len() != problem.map_dim() {
        return Err(Error::Shape { context: "eval_map output", expected: problem.map_dim(), got: map_x.len() });
    }
    phi_from_map(problem, x, &map_x)
}

/// Cached `F(x)`, `φ(x)` at the current iterate.
#[derive(Debug, Clone)]
pub struct EvalCache {
    x: DVector<f64>,
    map_x: DVector<f64>,
    phi_x: f64,
    aux: Option<DVector<f64>>,
    valid: bool,
    enabled: bool,
    full_evals: usize,
    incremental_evals: usize,
}

impl Default for EvalCache {
    fn default() -> Self {
        Self::new()
    }
}

impl EvalCache {
    pub fn new() -> Self {
        Self {
            x: DVector::zeros(0),
            map_x: DVector::zeros(0),
            phi_x: f64::NAN,
            aux: None,
            valid: false,
            enabled: true,
            full_evals: 0,
            incremental_evals: 0,
        }
    }

    /// A cache that never reuses anything; every request is a full evaluation.
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::new() }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    /// Number of full `F` evaluations performed through this cache.
    pub fn full_evals(&self) -> usize {
        self.full_evals
    }

    /// Number of `F` values formed through the incremental hook.
    pub fn incremental_evals(&self) -> usize {
        self.incremental_evals
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn phi(&self) -> f64 {
        self.phi_x
    }

    pub fn map(&self) -> &DVector<f64> {
        &self.map_x
    }

    pub(crate) fn aux(&self) -> Option<&DVector<f64>> {
        self.aux.as_ref()
    }

    pub fn invalidate(&mut self) {
        self.valid = false;
    }

    /// Full evaluation at `x`.
    pub fn refresh<P: CompositeProblem + ?Sized>(&mut self, problem: &P, x: &DVector<f64>) -> Result<()> {
        check_dim(problem, x, "EvalCache::refresh")?;
        let aux = if self.enabled { problem.incremental().map(|inc| inc.state(x)) } else { None };
        let map_x = match (&aux, problem.incremental()) {
            (Some(state), Some(inc)) => inc.map_from_state(state),
            _ => problem.eval_map(x),
        };
        self.full_evals += 1;
        let phi_x = phi_from_map(problem, x, &map_x)?;
        self.x = x.clone();
        self.map_x = map_x;
        self.phi_x = phi_x;
        self.aux = aux;
        self.valid = true;
        Ok(())
    }

    /// `F(x)` through the cache.
    ///
    /// A hit costs nothing. If `x` differs from the cached point inside a
    /// single block and the problem has an incremental hook, `F` is updated
    /// from the hook's state; otherwise it is recomputed.
    pub fn map_at<P: CompositeProblem + ?Sized>(&mut self, problem: &P, x: &DVector<f64>) -> Result<&DVector<f64>> {
        check_dim(problem, x, "EvalCache::map_at")?;
        if !self.enabled || !self.valid {
            self.refresh(problem, x)?;
            return Ok(&self.map_x);
        }
        if &self.x == x {
            return Ok(&self.map_x);
        }
        if let Some(cols) = single_block_change(problem.partition(), &self.x, x) {
            if self.aux.is_some() {
                let trial = self.trial(problem, cols.clone(), &x.rows(cols.start, cols.len()).into_owned())?;
                self.commit(trial);
                return Ok(&self.map_x);
            }
        }
        self.refresh(problem, x)?;
        Ok(&self.map_x)
    }

    /// Evaluate the point obtained from the cached `x` by replacing `x[cols]` with `block`.
    pub(crate) fn trial<P: CompositeProblem + ?Sized>(
        &mut self,
        problem: &P,
        cols: Range<usize>,
        block: &DVector<f64>,
    ) -> Result<Trial> {
        debug_assert!(self.valid);
        let mut x = self.x.clone();
        x.rows_mut(cols.start, cols.len()).copy_from(block);
        let (map_x, aux) = match (self.enabled, &self.aux, problem.incremental()) {
            (true, Some(state), Some(inc)) => {
                let delta = block - self.x.rows(cols.start, cols.len());
                let new_state = inc.update_state(state, cols, &delta);
                self.incremental_evals += 1;
                (inc.map_from_state(&new_state), Some(new_state))
            }
            _ => {
                self.full_evals += 1;
                (problem.eval_map(&x), None)
            }
        };
        let phi = phi_from_map(problem, &x, &map_x);
        Ok(Trial { x, map_x, aux, phi })
    }

    pub(crate) fn commit(&mut self, trial: Trial) {
        // `phi` errors were already handled by the caller (non-finite trials are rejected)
        self.phi_x = trial.phi.unwrap_or(f64::NAN);
        self.x = trial.x;
        self.map_x = trial.map_x;
        self.aux = trial.aux;
        self.valid = true;
    }
}

/// Candidate point produced during a line search.
#[derive(Debug)]
pub(crate) struct Trial {
    pub x: DVector<f64>,
    pub map_x: DVector<f64>,
    pub aux: Option<DVector<f64>>,
    pub phi: Result<f64>,
}

fn single_block_change(part: &BlockPartition, old: &DVector<f64>, new: &DVector<f64>) -> Option<Range<usize>> {
    let first = old.iter().zip(new.iter()).position(|(a, b)| a.to_bits() != b.to_bits())?;
    let last = old.len() - 1 - old.iter().rev().zip(new.iter().rev()).position(|(a, b)| a.to_bits() != b.to_bits())?;
    let b = part.block_of(first);
    let cols = part.range(b);
    (last < cols.end).then_some(cols)
}

/// `F(x)` through a cache.
pub fn eval_map_cached<'c, P: CompositeProblem + ?Sized>(
    problem: &P,
    cache: &'c mut EvalCache,
    x: &DVector<f64>,
) -> Result<&'c DVector<f64>> {
    cache.map_at(problem, x)
}

/// Central-difference check of `∇_i F(x)` for block `block`.
///
/// Returns `max |fd − analytic| / (1 + |analytic|)` over all entries. The
/// perturbation for coordinate `j` is `step·(1 + |x_j|)`.
pub fn fd_check_jacobian<P: CompositeProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    block: usize,
    step: f64,
) -> Result<f64> {
    check_dim(problem, x, "fd_check_jacobian")?;
    if !(step > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {step}")));
    }
    let part = problem.partition();
    if block >= part.num_blocks() {
        return Err(Error::Config(format!("block {block} out of range")));
    }
    let cols = part.range(block);
    let jac = problem.map_jacobian(x, cols.clone());
    if jac.nrows() != problem.map_dim() || jac.ncols() != cols.len() {
        return Err(Error::Shape { context: "map_jacobian", expected: problem.map_dim() * cols.len(), got: jac.len() });
    }
    let mut worst: f64 = 0.0;
    let mut xp = x.clone();
    for (c, j) in cols.enumerate() {
        let hj = step * (1.0 + x[j].abs());
        xp[j] = x[j] + hj;
        let fp = problem.eval_map(&xp);
        xp[j] = x[j] - hj;
        let fm = problem.eval_map(&xp);
        xp[j] = x[j];
        for r in 0..jac.nrows() {
            let fd = (fp[r] - fm[r]) / (2.0 * hj);
            if !fd.is_finite() {
                return Err(Error::NonFinite { term: "finite-difference Jacobian" });
            }
            let an = jac[(r, c)];
            worst = worst.max((fd - an).abs() / (1.0 + an.abs()));
        }
    }
    Ok(worst)
}

/// Central-difference check of `∇h(u)`, same error measure as [`fd_check_jacobian`].
pub fn fd_check_outer_gradient(outer: &dyn OuterLoss, u: &DVector<f64>, step: f64) -> Result<f64> {
    let grad = outer.gradient(u);
    let mut up = u.clone();
    let mut worst: f64 = 0.0;
    for j in 0..u.len() {
        let hj = step * (1.0 + u[j].abs());
        up[j] = u[j] + hj;
        let vp = outer.value(&up);
        up[j] = u[j] - hj;
        let vm = outer.value(&up);
        up[j] = u[j];
        let fd = (vp - vm) / (2.0 * hj);
        if !fd.is_finite() {
            return Err(Error::NonFinite { term: "finite-difference gradient of h" });
        }
        worst = worst.max((fd - grad[j]).abs() / (1.0 + grad[j].abs()));
    }
    Ok(worst)
}

/// `F(x) = A x − b` with an optional quadratic `f(x) = ½xᵀQx + qᵀx`.
///
/// Mostly useful for tests and examples: with `h = ½‖·‖²` and `g = 0` the
/// minimizer solves a linear system.
pub struct LinearProblem<R = crate::prox::SeparableReg> {
    a: DMatrix<f64>,
    b: DVector<f64>,
    quad: Option<(DMatrix<f64>, DVector<f64>)>,
    outer: HalfSquaredNorm,
    reg: R,
    partition: BlockPartition,
}

impl<R: Regularizer> LinearProblem<R> {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, reg: R, partition: BlockPartition) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Shape { context: "LinearProblem: b", expected: a.nrows(), got: b.len() });
        }
        if a.ncols() != partition.dim() {
            return Err(Error::Shape { context: "LinearProblem: partition", expected: a.ncols(), got: partition.dim() });
        }
        Ok(Self { a, b, quad: None, outer: HalfSquaredNorm::default(), reg, partition })
    }

    pub fn with_quadratic(mut self, q: DMatrix<f64>, lin: DVector<f64>) -> Result<Self> {
        let n = self.a.ncols();
        if q.nrows() != n || q.ncols() != n || lin.len() != n {
            return Err(Error::Shape { context: "LinearProblem::with_quadratic", expected: n, got: lin.len() });
        }
        self.quad = Some((q, lin));
        Ok(self)
    }

    pub fn with_outer_scale(mut self, scale: f64) -> Self {
        self.outer = HalfSquaredNorm { scale };
        self
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }
}

impl<R: Regularizer> CompositeProblem for LinearProblem<R> {
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }
    fn map_dim(&self) -> usize {
        self.a.nrows()
    }
    fn eval_f(&self, x: &DVector<f64>) -> f64 {
        match &self.quad {
            Some((q, lin)) => 0.5 * x.dot(&(q * x)) + lin.dot(x),
            None => 0.0,
        }
    }
    fn grad_f(&self, x: &DVector<f64>, cols: Range<usize>) -> DVector<f64> {
        match &self.quad {
            Some((q, lin)) => {
                q.rows(cols.start, cols.len()) * x + lin.rows(cols.start, cols.len())
            }
            None => DVector::zeros(cols.len()),
        }
    }
    fn eval_map(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }
    fn map_jacobian(&self, _x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64> {
        self.a.columns(cols.start, cols.len()).into_owned()
    }
    fn outer(&self) -> &dyn OuterLoss {
        &self.outer
    }
    fn regularizer(&self) -> &dyn Regularizer {
        &self.reg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::SeparableReg;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn partition_prefix_sums() {
        let p = BlockPartition::new(vec![3, 2, 5]).unwrap();
        assert_eq!(p.offsets(), &[0, 3, 5]);
        assert_eq!(p.dim(), 10);
        assert_eq!(p.range(1), 3..5);
        assert_eq!(p.block_of(0), 0);
        assert_eq!(p.block_of(4), 1);
        assert_eq!(p.block_of(9), 2);

        let single = BlockPartition::new(vec![10]).unwrap();
        assert_eq!(single.offsets(), &[0]);
        assert_eq!(single.dim(), 10);
        assert_eq!(single.num_blocks(), 1);
    }

    #[test]
    fn partition_rejects_bad_sizes() {
        assert!(matches!(BlockPartition::new(vec![]), Err(Error::InvalidPartition(_))));
        assert!(matches!(BlockPartition::new(vec![2, 0]), Err(Error::InvalidPartition(_))));
    }

    #[test]
    fn uniform_partition_remainder() {
        let p = BlockPartition::uniform(10, 4).unwrap();
        assert_eq!(p.sizes(), &[4, 4, 2]);
        assert_eq!(BlockPartition::uniform(10, 50).unwrap().sizes(), &[10]);
    }

    #[test]
    fn even_partition() {
        assert_eq!(BlockPartition::even(10, 3).unwrap().sizes(), &[4, 3, 3]);
        assert_eq!(BlockPartition::even(100, 10).unwrap().sizes(), &[10; 10]);
        assert!(BlockPartition::even(3, 4).is_err());
        assert!(BlockPartition::even(3, 0).is_err());
    }

    #[test]
    fn phi_identity_map() {
        let prob = LinearProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            SeparableReg::Zero,
            BlockPartition::single(2).unwrap(),
        )
        .unwrap();
        assert_eq!(eval_phi(&prob, &dvector![3.0, 4.0]).unwrap(), 12.5);
    }

    #[test]
    fn phi_pure_l1() {
        let prob = LinearProblem::new(
            DMatrix::zeros(1, 2),
            DVector::zeros(1),
            SeparableReg::L1(2.0),
            BlockPartition::single(2).unwrap(),
        )
        .unwrap();
        assert_eq!(eval_phi(&prob, &dvector![1.0, -1.0]).unwrap(), 4.0);
    }

    #[test]
    fn phi_shape_error() {
        let prob = LinearProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            SeparableReg::Zero,
            BlockPartition::single(2).unwrap(),
        )
        .unwrap();
        assert!(matches!(eval_phi(&prob, &dvector![1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn phi_nonfinite_names_term() {
        let prob = LinearProblem::new(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            SeparableReg::Zero,
            BlockPartition::single(1).unwrap(),
        )
        .unwrap();
        match eval_phi(&prob, &dvector![f64::INFINITY]) {
            Err(Error::NonFinite { term }) => assert_eq!(term, "F(x)"),
            other => panic!("unexpected {other:?}"),
        }
    }

    /// Counts `eval_map` calls.
    struct Counting {
        inner: LinearProblem,
        calls: AtomicUsize,
    }

    impl CompositeProblem for Counting {
        fn partition(&self) -> &BlockPartition {
            self.inner.partition()
        }
        fn map_dim(&self) -> usize {
            self.inner.map_dim()
        }
        fn eval_map(&self, x: &DVector<f64>) -> DVector<f64> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.eval_map(x)
        }
        fn map_jacobian(&self, x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64> {
            self.inner.map_jacobian(x, cols)
        }
        fn outer(&self) -> &dyn OuterLoss {
            self.inner.outer()
        }
        fn regularizer(&self) -> &dyn Regularizer {
            self.inner.regularizer()
        }
    }

    #[test]
    fn cache_hit_and_miss() {
        let prob = Counting {
            inner: LinearProblem::new(
                dmatrix![1.0, 2.0; 3.0, 4.0],
                dvector![1.0, 1.0],
                SeparableReg::Zero,
                BlockPartition::new(vec![1, 1]).unwrap(),
            )
            .unwrap(),
            calls: AtomicUsize::new(0),
        };
        let mut cache = EvalCache::new();
        let x = dvector![0.5, -0.5];
        eval_map_cached(&prob, &mut cache, &x).unwrap();
        assert_eq!(prob.calls.load(Ordering::SeqCst), 1);
        eval_map_cached(&prob, &mut cache, &x).unwrap();
        assert_eq!(prob.calls.load(Ordering::SeqCst), 1);

        let y = dvector![0.7, -0.5];
        let fy = eval_map_cached(&prob, &mut cache, &y).unwrap().clone();
        assert_eq!(prob.calls.load(Ordering::SeqCst), 2);
        assert_eq!(fy, prob.inner.eval_map(&y));
    }

    #[test]
    fn disabled_cache_always_recomputes() {
        let prob = Counting {
            inner: LinearProblem::new(
                DMatrix::identity(2, 2),
                DVector::zeros(2),
                SeparableReg::Zero,
                BlockPartition::single(2).unwrap(),
            )
            .unwrap(),
            calls: AtomicUsize::new(0),
        };
        let mut cache = EvalCache::disabled();
        let x = dvector![1.0, 2.0];
        eval_map_cached(&prob, &mut cache, &x).unwrap();
        eval_map_cached(&prob, &mut cache, &x).unwrap();
        assert_eq!(prob.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn fd_check_linear_and_corrupted() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(6, 4, |_, _| rng.random_range(-1.0..1.0));
        let prob = LinearProblem::new(a, DVector::zeros(6), SeparableReg::Zero, BlockPartition::new(vec![2, 2]).unwrap())
            .unwrap();
        let x = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        for b in 0..2 {
            assert!(fd_check_jacobian(&prob, &x, b, 1e-6).unwrap() <= 1e-10);
        }

        struct Corrupted(LinearProblem);
        impl CompositeProblem for Corrupted {
            fn partition(&self) -> &BlockPartition {
                self.0.partition()
            }
            fn map_dim(&self) -> usize {
                self.0.map_dim()
            }
            fn eval_map(&self, x: &DVector<f64>) -> DVector<f64> {
                self.0.eval_map(x)
            }
            fn map_jacobian(&self, x: &DVector<f64>, cols: Range<usize>) -> DMatrix<f64> {
                let mut j = self.0.map_jacobian(x, cols);
                j[(0, 0)] += 0.1;
                j
            }
            fn outer(&self) -> &dyn OuterLoss {
                self.0.outer()
            }
            fn regularizer(&self) -> &dyn Regularizer {
                self.0.regularizer()
            }
        }
        let bad = Corrupted(prob);
        assert!(fd_check_jacobian(&bad, &x, 0, 1e-6).unwrap() > 1e-3);
    }

    #[test]
    fn outer_gradient_fd() {
        let h = HalfSquaredNorm { scale: 3.0 };
        let u = dvector![0.3, -1.2, 4.0];
        assert!(fd_check_outer_gradient(&h, &u, 1e-6).unwrap() < 1e-8);
    }

    #[test]
    fn repartitioned_forwards() {
        let a = dmatrix![1.0, 2.0, 3.0; 4.0, 5.0, 6.0];
        let prob = LinearProblem::new(a, dvector![1.0, 0.0], SeparableReg::L1(0.5), BlockPartition::new(vec![1, 2]).unwrap())
            .unwrap();
        let x = dvector![0.1, -0.2, 0.3];
        let whole = Repartitioned::new(&prob, BlockPartition::single(3).unwrap()).unwrap();
        assert_eq!(eval_phi(&whole, &x).unwrap(), eval_phi(&prob, &x).unwrap());
        assert_eq!(whole.partition().num_blocks(), 1);
        assert!(Repartitioned::new(&prob, BlockPartition::single(4).unwrap()).is_err());
    }
}

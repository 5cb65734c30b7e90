//! Separable nonsmooth terms: proximal maps and exact subdifferential distances.
//!
//! Every regularizer is addressed by a contiguous coordinate range so that
//! a problem can be re-partitioned (e.g. collapsed into one full block)
//! without changing what `g` means.

use std::ops::Range;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::BlockPartition;

/// The nonsmooth terms with a closed-form subdifferential distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeparableReg {
    Zero,
    /// `λ‖·‖₁`, λ ≥ 0.
    L1(f64),
}

impl SeparableReg {
    pub fn l1(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("l1 weight must be finite and >= 0, got {lambda}")));
        }
        Ok(SeparableReg::L1(lambda))
    }

    /// Weight of the ℓ1 term; `Zero` behaves exactly like `L1(0)`.
    pub fn weight(&self) -> f64 {
        match *self {
            SeparableReg::Zero => 0.0,
            SeparableReg::L1(lambda) => lambda,
        }
    }
}

/// Soft-thresholding: componentwise `sign(v)·max(|v| − tλ, 0)`.
pub fn prox_l1(v: &DVector<f64>, t: f64, lambda: f64) -> DVector<f64> {
    let thresh = t * lambda;
    v.map(|vj| soft_threshold(vj, thresh))
}

#[inline]
pub(crate) fn soft_threshold(v: f64, thresh: f64) -> f64 {
    if v > thresh {
        v - thresh
    } else if v < -thresh {
        v + thresh
    } else {
        0.0
    }
}

/// Euclidean distance from the origin to `grad_smooth + ∂g(x)`.
///
/// Uses `sign(0) = 0`: on inactive coordinates the subgradient may absorb up
/// to λ of the smooth gradient.
pub fn subdiff_dist(grad_smooth: &DVector<f64>, x: &DVector<f64>, reg: SeparableReg) -> f64 {
    assert_eq!(grad_smooth.len(), x.len(), "subdiff_dist: length mismatch");
    let lambda = reg.weight();
    grad_smooth
        .iter()
        .zip(x.iter())
        .map(|(&g, &xj)| coordinate_residual(g, xj, lambda).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[inline]
fn coordinate_residual(g: f64, xj: f64, lambda: f64) -> f64 {
    if xj > 0.0 {
        g + lambda
    } else if xj < 0.0 {
        g - lambda
    } else {
        (g.abs() - lambda).max(0.0)
    }
}

/// A proper, lsc, convex term `g` that is separable across blocks.
///
/// Implementations must accept any contiguous range; for separable terms the
/// value over a union of ranges is the sum over the parts.
pub trait Regularizer: Send + Sync {
    /// `g` restricted to the coordinates `cols`, evaluated at `v` (`v.len() == cols.len()`).
    fn value(&self, cols: Range<usize>, v: &DVector<f64>) -> f64;

    /// `argmin_s g(s) + ‖s − v‖² / (2·step)` over the coordinates `cols`.
    fn prox(&self, cols: Range<usize>, v: &DVector<f64>, step: f64) -> DVector<f64>;

    /// Decomposition of `g` on `[0, n)` into pieces with an exact
    /// subdifferential distance, if one exists.
    fn separable_pieces(&self, _n: usize) -> Option<Vec<(Range<usize>, SeparableReg)>> {
        None
    }

    /// `dist(0, grad_smooth + ∂g(x))` over the full vector.
    fn subdiff_dist(&self, grad_smooth: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
        let pieces = self.separable_pieces(x.len()).ok_or(Error::UnsupportedMeasure)?;
        let mut sq = 0.0;
        for (cols, reg) in pieces {
            let lambda = reg.weight();
            for j in cols {
                sq += coordinate_residual(grad_smooth[j], x[j], lambda).powi(2);
            }
        }
        Ok(sq.sqrt())
    }
}

impl Regularizer for SeparableReg {
    fn value(&self, _cols: Range<usize>, v: &DVector<f64>) -> f64 {
        match *self {
            SeparableReg::Zero => 0.0,
            SeparableReg::L1(lambda) => lambda * v.lp_norm(1),
        }
    }

    fn prox(&self, _cols: Range<usize>, v: &DVector<f64>, step: f64) -> DVector<f64> {
        prox_l1(v, step, self.weight())
    }

    fn separable_pieces(&self, n: usize) -> Option<Vec<(Range<usize>, SeparableReg)>> {
        Some(vec![(0..n, *self)])
    }

    fn subdiff_dist(&self, grad_smooth: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
        Ok(subdiff_dist(grad_smooth, x, *self))
    }
}

/// Per-block assignment of `Zero` / `L1(λ)` terms.
#[derive(Debug, Clone)]
pub struct BlockwiseReg {
    pieces: Vec<(Range<usize>, SeparableReg)>,
    weights: Vec<f64>,
}

impl BlockwiseReg {
    pub fn new(partition: &BlockPartition, regs: Vec<SeparableReg>) -> Result<Self> {
        if regs.len() != partition.num_blocks() {
            return Err(Error::Shape {
                context: "BlockwiseReg::new",
                expected: partition.num_blocks(),
                got: regs.len(),
            });
        }
        let mut weights = Vec::with_capacity(partition.dim());
        let mut pieces = Vec::with_capacity(regs.len());
        for (i, reg) in regs.into_iter().enumerate() {
            if !(reg.weight() >= 0.0) {
                return Err(Error::Config(format!("block {i}: negative l1 weight")));
            }
            let cols = partition.range(i);
            weights.extend(std::iter::repeat_n(reg.weight(), cols.len()));
            pieces.push((cols, reg));
        }
        Ok(Self { pieces, weights })
    }
}

impl Regularizer for BlockwiseReg {
    fn value(&self, cols: Range<usize>, v: &DVector<f64>) -> f64 {
        self.weights[cols].iter().zip(v.iter()).map(|(w, vj)| w * vj.abs()).sum()
    }

    fn prox(&self, cols: Range<usize>, v: &DVector<f64>, step: f64) -> DVector<f64> {
        DVector::from_iterator(
            v.len(),
            self.weights[cols].iter().zip(v.iter()).map(|(w, &vj)| soft_threshold(vj, step * w)),
        )
    }

    fn separable_pieces(&self, n: usize) -> Option<Vec<(Range<usize>, SeparableReg)>> {
        (n == self.weights.len()).then(|| self.pieces.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Golden-section minimization of a 1-D convex function on [lo, hi].
    fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - r * (hi - lo);
            let b = lo + r * (hi - lo);
            if f(a) <= f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn soft_threshold_examples() {
        let v = dvector![3.0, -0.5, 0.0];
        assert_eq!(prox_l1(&v, 1.0, 1.0), dvector![2.0, 0.0, 0.0]);
        assert_eq!(prox_l1(&v, 1.0, 0.0), v);
    }

    #[test]
    fn soft_threshold_matches_scalar_minimization() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (t, lambda) = (0.3, 0.7);
        let v = DVector::from_fn(8, |_, _| rng.random_range(-2.0..2.0));
        let s = prox_l1(&v, t, lambda);
        for j in 0..8 {
            let obj = |z: f64| lambda * z.abs() + (z - v[j]).powi(2) / (2.0 * t);
            let z = golden_min(obj, -5.0, 5.0);
            assert!((s[j] - z).abs() < 1e-6, "coord {j}: {} vs {}", s[j], z);
        }
    }

    #[test]
    fn subdiff_dist_examples() {
        let d = subdiff_dist(&dvector![0.5, -0.2], &dvector![0.0, 0.0], SeparableReg::L1(1.0));
        assert_eq!(d, 0.0);
        let d = subdiff_dist(&dvector![2.0, 0.0], &dvector![1.0, 0.0], SeparableReg::L1(1.0));
        assert_eq!(d, 3.0);
    }

    #[test]
    fn zero_equals_l1_zero() {
        let g = dvector![0.3, -1.0, 2.0];
        let x = dvector![0.0, 1.0, -1.0];
        assert_eq!(
            subdiff_dist(&g, &x, SeparableReg::Zero),
            subdiff_dist(&g, &x, SeparableReg::L1(0.0))
        );
        assert_eq!(subdiff_dist(&g, &x, SeparableReg::Zero), g.norm());
        assert_eq!(prox_l1(&g, 0.5, 0.0), SeparableReg::Zero.prox(0..3, &g, 0.5));
    }

    #[test]
    fn blockwise_reg_matches_uniform_per_block() {
        let part = BlockPartition::new(vec![2, 3]).unwrap();
        let reg = BlockwiseReg::new(&part, vec![SeparableReg::Zero, SeparableReg::L1(0.5)]).unwrap();
        let v = dvector![1.0, -2.0, 3.0, -0.2, 0.1];
        let p = reg.prox(0..5, &v, 1.0);
        assert_eq!(p, dvector![1.0, -2.0, 2.5, 0.0, 0.0]);
        assert_eq!(reg.value(0..5, &v), 0.5 * (3.0 + 0.2 + 0.1));
        assert_eq!(reg.value(2..5, &v.rows(2, 3).into_owned()), 0.5 * (3.0 + 0.2 + 0.1));
        let g = dvector![0.1, 0.2, 0.3, 0.4, 0.6];
        let d = reg.subdiff_dist(&g, &v).unwrap();
        let expect = (0.1f64.powi(2) + 0.2f64.powi(2) + 0.8f64.powi(2) + 0.1f64.powi(2) + 1.1f64.powi(2)).sqrt();
        assert!((d - expect).abs() < 1e-14);
    }

    #[test]
    fn negative_lambda_rejected() {
        assert!(SeparableReg::l1(-1.0).is_err());
        assert!(SeparableReg::l1(f64::NAN).is_err());
    }
}

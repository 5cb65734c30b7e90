use std::io::Cursor;

use libcod::data::{parse_libsvm, write_libsvm, Dataset};
use libcod::problem::BlockPartition;
use libcod::prox::{prox_l1, subdiff_dist, SeparableReg};
use libcod::solver::{accept_monotone, update_reference};
use nalgebra::DVector;
use proptest::prelude::*;

fn vec_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..=max_len)
}

proptest! {
    #[test]
    fn prox_output_is_optimal(v in vec_strategy(16), t in 0.01f64..5.0, lambda in 0.001f64..3.0) {
        let v = DVector::from_vec(v);
        let s = prox_l1(&v, t, lambda);
        // 0 ∈ (s − v)/t + λ∂|s|
        let grad = (&s - &v) / t;
        let dist = subdiff_dist(&grad, &s, SeparableReg::l1(lambda).unwrap());
        prop_assert!(dist <= 1e-9 * (1.0 + v.amax() / t), "dist {dist}");
    }

    #[test]
    fn subdiff_dist_is_nonnegative_and_bounded(g in vec_strategy(12), x in vec_strategy(12), lambda in 0.0f64..2.0) {
        let n = g.len().min(x.len());
        let g = DVector::from_column_slice(&g[..n]);
        let x = DVector::from_column_slice(&x[..n]);
        let reg = if lambda == 0.0 { SeparableReg::Zero } else { SeparableReg::l1(lambda).unwrap() };
        let d = subdiff_dist(&g, &x, reg);
        prop_assert!(d >= 0.0);
        prop_assert!(d <= g.norm() + lambda * (n as f64).sqrt() + 1e-12);
        prop_assert!((subdiff_dist(&g, &x, SeparableReg::Zero) - g.norm()).abs() <= 1e-12 * (1.0 + g.norm()));
    }

    #[test]
    fn even_partition_covers_every_coordinate(n in 1usize..200, count in 1usize..50) {
        prop_assume!(count <= n);
        let p = BlockPartition::even(n, count).unwrap();
        prop_assert_eq!(p.num_blocks(), count);
        prop_assert_eq!(p.sizes().iter().sum::<usize>(), n);
        let (lo, hi) = (p.sizes().iter().min().unwrap(), p.sizes().iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
        for b in 0..count {
            for j in p.range(b) {
                prop_assert_eq!(p.block_of(j), b);
            }
        }
    }

    #[test]
    fn uniform_partition_is_contiguous(n in 1usize..300, bs in 1usize..40) {
        prop_assume!(bs <= n);
        let p = BlockPartition::uniform(n, bs).unwrap();
        let mut next = 0;
        for b in 0..p.num_blocks() {
            let r = p.range(b);
            prop_assert_eq!(r.start, next);
            prop_assert!(!r.is_empty() && r.len() <= bs);
            next = r.end;
        }
        prop_assert_eq!(next, n);
    }

    #[test]
    fn reference_stays_between_old_and_new(r in -1e6f64..1e6, phi in -1e6f64..1e6, u in 0.001f64..=1.0) {
        let next = update_reference(r, u, phi).unwrap();
        let tol = 1e-12 * (1.0 + r.abs().max(phi.abs()));
        prop_assert!(next >= r.min(phi) - tol && next <= r.max(phi) + tol);
    }

    #[test]
    fn monotone_acceptance_never_admits_large_increase(phi in -1e3f64..1e3, inc in 1e-6f64..1.0, beta in 0.0f64..10.0, dx in 0.0f64..1.0) {
        prop_assert!(!accept_monotone(phi + inc * (1.0 + phi.abs()), phi, beta, dx));
    }

    #[test]
    fn libsvm_round_trip(
        rows in prop::collection::vec(
            (any::<bool>(), prop::collection::btree_map(0usize..30, -1e8f64..1e8, 0..8)),
            1..20,
        ),
    ) {
        let labels = rows.iter().map(|(y, _)| if *y { 1.0 } else { -1.0 }).collect();
        let feats = rows.into_iter().map(|(_, r)| r.into_iter().collect()).collect();
        let ds = Dataset::from_rows(feats, labels, 30).unwrap();
        let mut text = Vec::new();
        write_libsvm(&ds, &mut text).unwrap();
        let back = parse_libsvm(Cursor::new(&text), Some(30)).unwrap();
        prop_assert_eq!(&back, &ds);
        let mut again = Vec::new();
        write_libsvm(&back, &mut again).unwrap();
        prop_assert_eq!(again, text);
    }
}

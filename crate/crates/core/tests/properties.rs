use margspline::basis::{eval_basis, BasisSpec};
use margspline::reduce::Rescale;
use margspline::tune::{auc, fold_assignment};
use proptest::prelude::*;

proptest! {
    #[test]
    fn basis_rows_sum_to_one(p in 4usize..20, xs in prop::collection::vec(0.0f64..=1.0, 1..50)) {
        let b = eval_basis(&BasisSpec::cubic(p), &xs).unwrap();
        for row in b.values.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| v >= -1e-15));
        }
    }

    #[test]
    fn rescaling_twice_changes_nothing(values in prop::collection::vec(-1e3f64..1e3, 2..40)) {
        prop_assume!(values.iter().any(|&v| v != values[0]));
        let once = Rescale::fit(&values).unwrap().apply_all(&values);
        let twice = Rescale::fit(&once).unwrap().apply_all(&once);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!(once.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn auc_ignores_monotone_transforms(
        pairs in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 2..60),
        scale in 0.1f64..10.0,
        shift in -3.0f64..3.0,
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let labels: Vec<f64> = pairs.iter().map(|p| if p.1 { 1.0 } else { 0.0 }).collect();
        prop_assume!(labels.contains(&0.0) && labels.contains(&1.0));
        let base = auc(&scores, &labels).unwrap();
        let moved: Vec<f64> = scores.iter().map(|s| (scale * s + shift).exp()).collect();
        prop_assert!((auc(&moved, &labels).unwrap() - base).abs() < 1e-12);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((auc(&flipped, &labels).unwrap() - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn folds_are_balanced(n in 2usize..500, k in 2usize..12, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let folds = fold_assignment(n, k, seed).unwrap();
        let mut sizes = vec![0usize; k];
        for f in folds {
            sizes[f] += 1;
        }
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
    }
}

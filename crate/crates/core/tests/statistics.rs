use bearing_pinn::eval::{binary_auc, compute_metrics, independent_t_test, mean_ci, roc_auc, ConfusionMatrix};
use bearing_pinn::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mann–Whitney count over all positive/negative pairs.
fn pairwise_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if positive[i] && !positive[j] {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

#[test]
fn auc_matches_pairwise_oracle_on_fifty_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let scores: Vec<f64> = (0..50).map(|_| (rng.random_range(0.0..1.0f64) * 10.0).round() / 10.0).collect();
    let pos: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
    let auc = binary_auc(&scores, &pos).unwrap();
    assert!((auc - pairwise_auc(&scores, &pos)).abs() < 1e-9);
}

#[test]
fn welch_reference_values() {
    // Frozen from an independent high-precision implementation.
    let a = [0.912, 0.905, 0.921, 0.899, 0.915, 0.908, 0.917, 0.902, 0.911, 0.906];
    let b = [0.934, 0.941, 0.929, 0.947, 0.938, 0.931, 0.944, 0.936, 0.940, 0.933];
    let r = independent_t_test(&a, &b).unwrap();
    assert!((r.t_statistic - -9.736127346306667).abs() < 1e-6);
    assert!((r.p_value - 1.788873371146304e-08).abs() < 1e-6);
    assert!((r.degrees_of_freedom - 17.458496774896467).abs() < 1e-6);
    assert!(r.significant);

    let c = [0.81, 0.84, 0.79, 0.86, 0.83, 0.80, 0.85, 0.82, 0.78, 0.87];
    let d = [0.83, 0.82, 0.85, 0.80, 0.86, 0.84, 0.81, 0.88, 0.79, 0.84];
    let r = independent_t_test(&c, &d).unwrap();
    assert!((r.t_statistic - -0.5384615384615479).abs() < 1e-6);
    assert!((r.p_value - 0.5969020959787354).abs() < 1e-6);
    assert!(!r.significant);
}

#[test]
fn ci_halfwidth_shrinks_with_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sample: Vec<f64> = (0..4000).map(|_| rng.random_range(0.0..1.0)).collect();
    let widths: Vec<f64> = [10, 100, 1000, 4000].iter().map(|&n| mean_ci(&sample[..n], 0.05).unwrap().1).collect();
    assert!(widths.windows(2).all(|w| w[1] < w[0]), "{widths:?}");
}

#[test]
fn chance_level_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let truth: Vec<usize> = (0..3000).map(|i| i % 3).collect();
    let pred: Vec<usize> = (0..3000).map(|_| rng.random_range(0..3)).collect();
    let m = compute_metrics(&ConfusionMatrix::from_predictions(3, &truth, &pred).unwrap()).unwrap();
    assert!((m.accuracy - 1.0 / 3.0).abs() < 0.03, "{}", m.accuracy);
}

#[test]
fn roc_auc_single_class_is_undefined() {
    assert!(matches!(binary_auc(&[0.3, 0.4], &[false, false]), Err(Error::UndefinedAuc(_))));
    let auc = roc_auc(&[vec![0.2, 0.3, 0.5], vec![0.1, 0.1, 0.8]], &[2, 2], 3).unwrap();
    assert_eq!(auc, vec![None, None, None]);
}

fn predictions() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1usize..40).prop_flat_map(|n| (prop::collection::vec(0usize..3, n), prop::collection::vec(0usize..3, n)))
}

proptest! {
    #[test]
    fn metrics_match_brute_force_recount((truth, pred) in predictions()) {
        let m = compute_metrics(&ConfusionMatrix::from_predictions(3, &truth, &pred).unwrap()).unwrap();
        let correct = truth.iter().zip(&pred).filter(|(t, p)| t == p).count();
        prop_assert!((m.accuracy - correct as f64 / truth.len() as f64).abs() < 1e-12);
        for c in 0..3 {
            let tp = truth.iter().zip(&pred).filter(|(t, p)| **t == c && **p == c).count() as u64;
            let fp = truth.iter().zip(&pred).filter(|(t, p)| **t != c && **p == c).count() as u64;
            let fn_ = truth.iter().zip(&pred).filter(|(t, p)| **t == c && **p != c).count() as u64;
            let tn = truth.len() as u64 - tp - fp - fn_;
            let k = &m.per_class[c];
            prop_assert_eq!((k.tp, k.fp, k.fn_, k.tn), (tp, fp, fn_, tn));
        }
        let f1s: Vec<f64> = m.per_class.iter().map(|k| k.f1).collect();
        let (lo, hi) = f1s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        prop_assert!(m.macro_f1 >= lo - 1e-12 && m.macro_f1 <= hi + 1e-12);
    }

    #[test]
    fn auc_equals_mann_whitney(
        data in prop::collection::vec((0u8..20, any::<bool>()), 2..60)
    ) {
        let scores: Vec<f64> = data.iter().map(|(s, _)| f64::from(*s) / 20.0).collect();
        let pos: Vec<bool> = data.iter().map(|(_, p)| *p).collect();
        prop_assume!(pos.iter().any(|p| *p) && pos.iter().any(|p| !*p));
        let auc = binary_auc(&scores, &pos).unwrap();
        prop_assert!((auc - pairwise_auc(&scores, &pos)).abs() < 1e-9);
    }

    #[test]
    fn t_test_p_value_bounds_and_symmetry(
        a in prop::collection::vec(0.0f64..1.0, 2..15),
        b in prop::collection::vec(0.0f64..1.0, 2..15),
    ) {
        match independent_t_test(&a, &b) {
            Ok(ab) => {
                let ba = independent_t_test(&b, &a).unwrap();
                prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
                prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
                prop_assert!((ab.t_statistic + ba.t_statistic).abs() < 1e-12);
            }
            Err(e) => prop_assert!(matches!(e, Error::Degenerate(_))),
        }
    }
}

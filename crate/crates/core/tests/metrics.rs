mod support;

use proptest::prelude::*;
use rand::Rng;
use support::{
    check_auroc_oracle, check_best_f1_dominance, check_confusion_oracle, check_point_adjust_oracle, naive_f1_at,
    random_instance, rng,
};
use tsad_core::evaluation::{auroc, best_f1_search, confusion, f1, point_adjust, threshold, MetricReport};

#[test]
fn confusion_and_f1_match_loop_oracle() {
    check_confusion_oracle(500, 100).unwrap();
}

#[test]
fn auroc_matches_pairwise_oracle() {
    assert!(check_auroc_oracle(500, 101).unwrap() < 1e-12);
}

#[test]
fn point_adjust_matches_hand_rule() {
    check_point_adjust_oracle(500, 102).unwrap();
}

#[test]
fn best_f1_dominates_every_threshold() {
    check_best_f1_dominance(500, 103).unwrap();
}

#[test]
fn best_f1_matches_grid_sweep() {
    let mut r = rng(104);
    let (_, labels) = random_instance(200, &mut r);
    let scores: Vec<f64> = (0..200).map(|_| f64::from(r.random_range(0..1000u32)) / 1000.0).collect();
    let grid = (0..=1001)
        .map(|k| naive_f1_at(&scores, &labels, f64::from(k) / 1000.0, false))
        .fold(0.0, f64::max);
    let (_, best) = best_f1_search(&scores, &labels, false).unwrap();
    assert!((best - grid).abs() < 1e-12);
}

#[test]
fn report_pieces_agree() {
    let mut r = rng(105);
    let (scores, labels) = random_instance(400, &mut r);
    let rep = MetricReport::compute(&scores, &labels).unwrap();
    let (tp, fp, fn_) = confusion(&labels, &threshold(&scores, rep.threshold_f1)).unwrap();
    assert_eq!((rep.tp, rep.fp, rep.fn_), (tp, fp, fn_));
    assert_eq!(rep.f1, f1(tp, fp, fn_));
    assert!(rep.f1_pa >= rep.f1);
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..120, any::<u64>()).prop_map(|(len, seed)| random_instance(len, &mut rng(seed)))
}

proptest! {
    #[test]
    fn adjusted_f1_never_below_plain((scores, labels) in instance(), theta in 0.0f64..1.0) {
        let preds = threshold(&scores, theta);
        let adj = point_adjust(&labels, &preds).unwrap();
        prop_assert!(adj.iter().zip(&preds).all(|(a, p)| a >= p));
        let plain = confusion(&labels, &preds).unwrap();
        let pa = confusion(&labels, &adj).unwrap();
        prop_assert!(f1(pa.0, pa.1, pa.2) >= f1(plain.0, plain.1, plain.2));
    }

    #[test]
    fn auroc_invariant_under_monotone_maps((scores, labels) in instance()) {
        let a = auroc(&scores, &labels).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert_eq!(a, auroc(&mapped, &labels).unwrap());
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn best_f1_bounded((scores, labels) in instance()) {
        let (_, v) = best_f1_search(&scores, &labels, false).unwrap();
        let (_, w) = best_f1_search(&scores, &labels, true).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(w >= v);
    }
}

use acoustic_detect::*;
use proptest::prelude::*;

fn agg(p: &[f64], m: Aggregation) -> f64 {
    aggregate(p, m).unwrap()
}

#[test]
fn aggregation_examples() {
    let p = [1.0, 0.0];
    assert_eq!(agg(&p, Aggregation::Max), 1.0);
    assert_eq!(agg(&p, Aggregation::Mean), 0.5);
    assert_eq!(agg(&p, Aggregation::LinearSoftmax), 1.0);
    assert_eq!(agg(&[0.0; 4], Aggregation::LinearSoftmax), 0.0);
    let q = [0.2, 0.9, 0.4, 0.9, 0.1];
    assert_eq!(agg(&q, Aggregation::TopN(1)), agg(&q, Aggregation::Max));
    assert!((agg(&q, Aggregation::TopN(5)) - agg(&q, Aggregation::Mean)).abs() < 1e-15);
    assert!((agg(&q, Aggregation::TopN(2)) - 0.9).abs() < 1e-15);
    assert!(aggregate(&q, Aggregation::TopN(6)).is_err());
    assert!(aggregate(&q, Aggregation::ExpSorted(1.0)).is_err());
    assert!(aggregate(&[], Aggregation::Mean).is_err());
}

#[test]
fn exp_sorted_limits_and_normalization() {
    let q = [0.2, 0.9, 0.4, 0.7];
    // Weights sum to one, so a constant vector is a fixed point.
    assert!((agg(&[0.3; 7], Aggregation::ExpSorted(0.6)) - 0.3).abs() < 1e-15);
    assert!((agg(&q, Aggregation::ExpSorted(1e-9)) - 0.9).abs() < 1e-8);
    assert!((agg(&q, Aggregation::ExpSorted(1.0 - 1e-9)) - agg(&q, Aggregation::Mean)).abs() < 1e-8);
    // Hand evaluation at lambda = 1/2: sorted [0.9, 0.7, 0.4, 0.2], weights
    // (1/2)/(15/16) * [1, 1/2, 1/4, 1/8].
    let want = (8.0 / 15.0) * (0.9 + 0.35 + 0.1 + 0.025);
    assert!((agg(&q, Aggregation::ExpSorted(0.5)) - want).abs() < 1e-15);
}

#[test]
fn softmax_weighted_small_temperature_is_mean() {
    let q = [0.2, 0.9, 0.4, 0.7];
    assert!((agg(&q, Aggregation::SoftmaxWeighted(0.0)) - agg(&q, Aggregation::Mean)).abs() < 1e-15);
    assert!((agg(&q, Aggregation::SoftmaxWeighted(1e-6)) - agg(&q, Aggregation::Mean)).abs() < 1e-6);
    assert!(agg(&q, Aggregation::SoftmaxWeighted(50.0)) > agg(&q, Aggregation::SoftmaxWeighted(5.0)));
}

#[test]
fn decision_examples() {
    let th = Thresholds::default();
    assert_eq!((th.global, th.low, th.high), (0.5, 0.2, 0.75));
    assert!(decide(&[0.9; 6], &th, 0.49).unwrap().iter().all(|d| !d));
    assert!(decide(&[0.5; 10], &th, 0.9).unwrap().iter().all(|&d| d));
    assert_eq!(
        decide(&[0.3, 0.3, 0.9, 0.3, 0.3], &th, 0.9).unwrap(),
        vec![true; 5]
    );
    assert_eq!(
        decide(&[0.8, 0.1, 0.3, 0.1], &th, 0.9).unwrap(),
        vec![true, false, false, false]
    );
    let bad = Thresholds { low: 0.8, ..th };
    assert!(decide(&[0.5], &bad, 0.9).is_err());
}

#[test]
fn decision_matrix_and_csv() {
    let probs = vec![vec![0.9, 0.1], vec![0.1, 0.8]];
    let d = decide_matrix(&probs, &Thresholds::default(), &[0.9, 0.2]).unwrap();
    assert_eq!(d, vec![vec![true, false], vec![false, false]]);
    let mut buf = Vec::new();
    write_decisions_csv(&mut buf, &probs, &d).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("frame,class,probability,decision"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn rate_examples() {
    let s = ScoredSet::new(vec![0.9, 0.8], vec![0.3, 0.1]).unwrap();
    assert_eq!(f1(&s, 0.5), 1.0);
    let r = rates(&s, 2.0);
    assert_eq!((r.recall, r.false_pos_rate), (0.0, 0.0));
    assert!(r.no_predictions && r.precision == 1.0);
    assert_eq!(f1(&s, 2.0), 0.0);
    assert!(ScoredSet::new(vec![], vec![1.0]).is_err());
}

#[test]
fn auc_examples() {
    let auc = |p: Vec<f64>, n: Vec<f64>| auc_exact(&ScoredSet::new(p, n).unwrap(), TiePolicy::Half);
    assert_eq!(auc(vec![0.9, 0.8], vec![0.7, 0.1]), 1.0);
    assert_eq!(auc(vec![0.6], vec![0.7]), 0.0);
    assert_eq!(auc(vec![0.8, 0.4], vec![0.6, 0.2]), 0.75);
    let tied = ScoredSet::new(vec![0.5], vec![0.5]).unwrap();
    assert_eq!(auc_exact(&tied, TiePolicy::Half), 0.5);
    assert_eq!(auc_exact(&tied, TiePolicy::Full), 1.0);
    assert_eq!(auc_trapezoid(&tied), 0.5);
    let pts = roc_points(&tied);
    assert_eq!(pts, vec![(0.0, 0.0), (1.0, 1.0)]);
}

fn scored(pos: Vec<u8>, neg: Vec<u8>) -> ScoredSet {
    // Coarse integer scores force plenty of ties.
    ScoredSet::new(
        pos.into_iter().map(|v| f64::from(v) / 10.0).collect(),
        neg.into_iter().map(|v| f64::from(v) / 10.0).collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn weighted_mean_sandwich(p in prop::collection::vec(0.0f64..=1.0, 1..30)) {
        let mx = agg(&p, Aggregation::Max);
        let ls = agg(&p, Aggregation::LinearSoftmax);
        let mn = agg(&p, Aggregation::Mean);
        prop_assert!(mx + 1e-12 >= ls && ls + 1e-12 >= mn);
    }

    #[test]
    fn decisions_monotone_in_clip_score(
        p in prop::collection::vec(0.0f64..=1.0, 1..30),
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
        min_frames in 1usize..6,
    ) {
        let th = Thresholds { min_frames, ..Thresholds::default() };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let dl = decide(&p, &th, lo).unwrap();
        let dh = decide(&p, &th, hi).unwrap();
        for (x, y) in dl.iter().zip(&dh) {
            prop_assert!(!x || *y);
        }
    }

    #[test]
    fn pairwise_auc_equals_trapezoid(
        pos in prop::collection::vec(0u8..20, 1..100),
        neg in prop::collection::vec(0u8..20, 1..100),
    ) {
        let s = scored(pos, neg);
        prop_assert!((auc_exact(&s, TiePolicy::Half) - auc_trapezoid(&s)).abs() < 1e-12);
    }

    #[test]
    fn counts_partition_and_f1_forms_agree(
        pos in prop::collection::vec(0u8..20, 1..40),
        neg in prop::collection::vec(0u8..20, 1..40),
        th in 0u8..22,
    ) {
        let s = scored(pos, neg);
        let e = f64::from(th) / 10.0;
        let r = rates(&s, e);
        prop_assert_eq!(r.true_pos + r.false_neg, s.positive.len());
        prop_assert_eq!(r.false_pos + r.true_neg, s.negative.len());
        prop_assert!((f1(&s, e) - f1_from_counts(&r)).abs() < 1e-12);
    }
}

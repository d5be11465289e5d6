use acoustic_core::gradcheck::check;
use acoustic_core::losses::*;
use acoustic_core::optim::{Adam, AdamConfig};
use acoustic_core::{rng, Tape, Tensor, Var};
use proptest::prelude::*;
use rand::Rng;

fn value(f: impl FnOnce(&mut Tape) -> acoustic_core::Result<Var>) -> f64 {
    let mut tape = Tape::new();
    let v = f(&mut tape).unwrap();
    tape.value(v).item()
}

fn cls(kind: ClassificationKind, y: &Tensor, yhat: &Tensor) -> f64 {
    value(|t| {
        let p = t.leaf(yhat.clone())?;
        classification(t, kind, y, p)
    })
}

fn probs(shape: Vec<usize>, seed: u64) -> Tensor {
    let mut r = rng::seeded(seed);
    Tensor::uniform(shape, 0.01, 0.99, &mut r)
}

fn binary(shape: Vec<usize>, seed: u64) -> Tensor {
    let mut r = rng::seeded(seed ^ 0x55);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| f64::from(r.random_bool(0.5) as u8)).collect()).unwrap()
}

#[test]
fn regression_examples() {
    let y = Tensor::column(vec![0.3, -1.0, 2.5]);
    for kind in [RegressionKind::Mse, RegressionKind::L1, RegressionKind::Huber(0.7)] {
        let v = value(|t| {
            let a = t.leaf(y.clone())?;
            let b = t.leaf(y.clone())?;
            regression(t, kind, a, b)
        });
        assert_eq!(v, 0.0);
    }
    let delta = 0.8;
    let v = value(|t| {
        let a = t.leaf(Tensor::scalar(0.0))?;
        let b = t.leaf(Tensor::scalar(2.0 * delta))?;
        regression(t, RegressionKind::Huber(delta), a, b)
    });
    assert!((v - 1.5 * delta * delta).abs() < 1e-12);
}

#[test]
fn l1_gradient_is_sign_of_error() {
    let mut tape = Tape::new();
    let y = tape.leaf(Tensor::column(vec![1.0, -1.0, 0.5])).unwrap();
    let yh = tape.leaf(Tensor::column(vec![1.5, -2.0, 0.4])).unwrap();
    let l = regression(&mut tape, RegressionKind::L1, y, yh).unwrap();
    let g = tape.backward(l).unwrap();
    assert_eq!(g.wrt(yh).data(), &[1.0, -1.0, -1.0]);
    let res = check("l1", &[Tensor::column(vec![1.0, -1.0]), Tensor::column(vec![1.5, -2.0])], |t, v| {
        regression(t, RegressionKind::L1, v[0], v[1])
    })
    .unwrap();
    assert!(res.passed, "{res:?}");
}

#[test]
fn classification_examples() {
    let v = cls(ClassificationKind::Bce, &Tensor::scalar(1.0), &Tensor::scalar(0.5));
    assert!((v - 2f64.ln()).abs() < 1e-15);

    let dice = ClassificationKind::Dice { kappa0: 0.0, alpha: 0.5, eta: 0.0 };
    let v = cls(dice, &Tensor::column(vec![1.0, 0.0]), &Tensor::column(vec![0.5, 0.5]));
    assert!((v - 1.0 / 3.0).abs() < 1e-12, "{v}");
    let y = Tensor::column(vec![1.0, 0.0, 1.0]);
    assert!(cls(dice, &y, &y).abs() < 1e-12);

    let onehot = Tensor::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let p = Tensor::from_rows(&[vec![0.2, 0.6], vec![0.8, 0.4]]).unwrap();
    let ce = cls(ClassificationKind::CrossEntropy, &onehot, &p);
    let nll = cls(ClassificationKind::Nll, &onehot, &p);
    assert!((ce - -(0.8f64.ln() + 0.6f64.ln())).abs() < 1e-12);
    assert_eq!(ce, nll);
}

#[test]
fn nll_rejects_soft_labels_and_empty_batches() {
    let p = Tensor::column(vec![0.5, 0.5]);
    let mut tape = Tape::new();
    let q = tape.leaf(p.clone()).unwrap();
    assert!(classification(&mut tape, ClassificationKind::Nll, &p, q).is_err());
    // Empty batches cannot even be represented.
    assert!(Tensor::new(vec![0], vec![]).is_err());
}

#[test]
fn log_losses_stay_finite_at_the_edges() {
    let y = Tensor::column(vec![1.0, 0.0, 1.0, 0.0]);
    let p = Tensor::column(vec![0.0, 1.0, 1.0, 0.0]);
    for kind in [
        ClassificationKind::Bce,
        ClassificationKind::CrossEntropy,
        ClassificationKind::WeightedBce { beta: 3.0 },
        ClassificationKind::AsymmetricFocal { eta: 0.5 },
        ClassificationKind::InverseFrequency { c0: 1.0, eta: 1.0 },
    ] {
        let mut tape = Tape::new();
        let q = tape.leaf(p.clone()).unwrap();
        let l = classification(&mut tape, kind, &y, q).unwrap();
        assert!(tape.value(l).item().is_finite());
        assert!(tape.backward(l).is_ok(), "{kind:?}");
    }
}

#[test]
fn inverse_frequency_weights_follow_class_counts() {
    // Class 0 appears 3 times, class 1 once; positives are weighted by
    // (c0 / (K + c0))^eta.
    let y = Tensor::from_rows(&[vec![1.0, 1.0, 1.0], vec![0.0, 1.0, 0.0]]).unwrap();
    let p = Tensor::from_rows(&[vec![0.5, 0.5, 0.5], vec![0.5, 0.5, 0.5]]).unwrap();
    let v = cls(ClassificationKind::InverseFrequency { c0: 1.0, eta: 1.0 }, &y, &p);
    let ln2 = 2f64.ln();
    let want = 3.0 * 0.25 * ln2 + 0.5 * ln2 + 2.0 * ln2;
    assert!((v - want).abs() < 1e-12, "{v} vs {want}");
}

#[test]
fn hinge_losses() {
    let y = Tensor::column(vec![1.0, -1.0, 1.0]);
    let mut tape = Tape::new();
    let s = tape.leaf(Tensor::column(vec![2.0, 0.5, 0.25])).unwrap();
    let l = classification(&mut tape, ClassificationKind::Hinge, &y, s).unwrap();
    assert!((tape.value(l).item() - 2.25).abs() < 1e-12);
    let w = tape.leaf(Tensor::column(vec![1.0, 2.0])).unwrap();
    let l2 = hinge_svm(&mut tape, &y, s, w, 0.1).unwrap();
    assert!((tape.value(l2).item() - 2.75).abs() < 1e-12);
}

#[test]
fn clip_score_examples() {
    let h = |a: f64, b: f64| {
        value(|t| {
            let f = t.leaf(Tensor::matrix(1, 2, vec![a, b])?)?;
            clip_scores(t, f)
        })
    };
    assert_eq!(h(1.0, 0.0), 1.0);
    assert_eq!(h(0.0, 1.0), 1.0);
    assert_eq!(h(0.5, 0.5), 0.5);
    assert_eq!(h(0.0, 0.0), 0.0);
}

#[test]
fn super_resolution_favors_sparse_frames() {
    let mut logits = vec![Tensor::matrix(1, 2, vec![0.85f64.ln() - 0.15f64.ln(), 0.35f64.ln() - 0.65f64.ln()]).unwrap()];
    let labels = Tensor::column(vec![1.0]);
    let gap = |l: &Tensor| {
        let p: Vec<f64> = l.data().iter().map(|z| 1.0 / (1.0 + (-z).exp())).collect();
        (p[0] - p[1], p)
    };
    let (start, _) = gap(&logits[0]);
    let mut opt = Adam::new(AdamConfig { lr: 0.05, ..Default::default() }).unwrap();
    for _ in 0..200 {
        let mut tape = Tape::new();
        let z = tape.leaf(logits[0].clone()).unwrap();
        let f = tape.sigmoid(z).unwrap();
        let l = super_resolution(&mut tape, &[f], &labels).unwrap();
        let g = tape.backward(l).unwrap();
        opt.step(&mut logits, &[g.wrt(z).clone()]).unwrap();
    }
    let (end, p) = gap(&logits[0]);
    assert!(end > start, "{start} -> {end}");
    assert!(p[0] > 0.9 && p[1] < 0.1, "{p:?}");
}

#[test]
fn embedding_examples() {
    let a = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.5, 2.0]]).unwrap();
    let far = a.map(|v| v + 3.0);
    let v = value(|t| {
        let x = t.leaf(a.clone())?;
        let y = t.leaf(a.clone())?;
        contrastive(t, x, y, &[true, true], 1.0)
    });
    assert_eq!(v, 0.0);
    let v = value(|t| {
        let x = t.leaf(a.clone())?;
        let y = t.leaf(far.clone())?;
        contrastive(t, x, y, &[false, false], 2.0)
    });
    assert_eq!(v, 0.0);

    let v = value(|t| {
        let x = t.leaf(a.clone())?;
        let p = t.leaf(a.map(|v| v + 0.1))?;
        let n = t.leaf(far.clone())?;
        triplet(t, x, p, n, 1.0, TripletDistance::default())
    });
    assert_eq!(v, 0.0);

    let z = Tensor::identity(2);
    let v = value(|t| {
        let x = t.leaf(z.clone())?;
        let y = t.leaf(z.clone())?;
        ntxent(t, x, y, NtXent::default())
    });
    let per_sample = -(1f64.exp() / (1f64.exp() + 1.0)).ln();
    assert!((per_sample - 0.31326).abs() < 1e-5);
    assert!((v - 2.0 * per_sample).abs() < 1e-12);

    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::zeros(vec![2, 2])).unwrap();
    assert!(ntxent(&mut tape, x, x, NtXent::default()).is_err());
}

#[test]
fn moco_dictionary_ring_buffer() {
    let mut r = rng::seeded(5);
    assert!(MocoDictionary::new(3, 4, 1.0).is_err());
    let mut dict = MocoDictionary::new(3, 4, 0.99).unwrap();
    assert!(dict.is_empty());
    for _ in 0..3 {
        dict.push(&Tensor::randn(vec![3, 2], 2.0, &mut r)).unwrap();
    }
    assert_eq!(dict.len(), 4);
    let m = dict.matrix().unwrap();
    for c in 0..4 {
        let n: f64 = m.col(c).iter().map(|v| v * v).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
    let q = Tensor::randn(vec![3, 2], 1.0, &mut r);
    let k = Tensor::randn(vec![3, 2], 1.0, &mut r);
    let l = value(|t| {
        let qv = t.leaf(q.clone())?;
        moco(t, qv, &k, &dict, 0.2)
    });
    assert!(l > 0.0 && l.is_finite());
}

#[test]
fn si_sdr_examples() {
    let mut r = rng::seeded(11);
    let s: Vec<f64> = (0..64).map(|_| r.random_range(-1.0..1.0)).collect();
    let est: Vec<f64> = s.iter().map(|v| v + r.random_range(-0.3..0.3)).collect();
    let base = si_sdr_value(&s, &est).unwrap();
    for c in [0.1, -3.0] {
        let scaled: Vec<f64> = s.iter().map(|v| c * v).collect();
        assert!((si_sdr_value(&scaled, &est).unwrap() - base).abs() < 1e-9);
    }
    assert!(si_sdr_value(&s, &s).unwrap() >= 120.0);
    let a = [1.0, 0.0, 1.0, 0.0];
    let b = [0.0, 1.0, 0.0, -1.0];
    assert!(si_sdr_value(&a, &b).unwrap() <= -40.0);
    assert!(si_sdr_value(&[0.0; 4], &b).is_err());
}

#[test]
fn si_sdr_decreases_with_noise() {
    let mut r = rng::seeded(12);
    let s: Vec<f64> = (0..256).map(|t| (0.07 * t as f64).sin()).collect();
    let noise: Vec<f64> = (0..256).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut last = f64::INFINITY;
    for sigma in [0.01, 0.05, 0.2, 0.5, 1.0, 2.0] {
        let est: Vec<f64> = s.iter().zip(&noise).map(|(a, n)| a + sigma * n).collect();
        let v = si_sdr_value(&s, &est).unwrap();
        assert!(v < last, "sigma {sigma}: {v} !< {last}");
        last = v;
    }
}

#[test]
fn si_sdr_tape_matches_scalar() {
    let mut r = rng::seeded(13);
    let targets = Tensor::randn(vec![32, 2], 1.0, &mut r);
    let est = Tensor::randn(vec![32, 2], 1.0, &mut r);
    let mut tape = Tape::new();
    let e = tape.leaf(est.clone()).unwrap();
    let v = si_sdr(&mut tape, &targets, e).unwrap();
    for j in 0..2 {
        let want = si_sdr_value(&targets.col(j), &est.col(j)).unwrap();
        assert!((tape.value(v).data()[j] - want).abs() < 1e-9);
    }
    let l = si_sdr_loss(&mut tape, &targets, e).unwrap();
    assert!((tape.value(l).item() + tape.value(v).sum()).abs() < 1e-9);
}

#[test]
fn spectral_distance_examples() {
    let mut r = rng::seeded(14);
    let x = Tensor::uniform(vec![5, 3], 0.1, 2.0, &mut r);
    let s = Tensor::uniform(vec![5, 3], 0.1, 2.0, &mut r);
    let ones = Tensor::ones(vec![5, 3]);
    let v = value(|t| {
        let m = t.leaf(ones.clone())?;
        spectral_distance(t, m, &x, &x)
    });
    assert_eq!(v, 0.0);
    let v = value(|t| {
        let m = t.leaf(Tensor::zeros(vec![5, 3]))?;
        spectral_distance(t, m, &x, &s)
    });
    assert!((v - s.dot(&s)).abs() < 1e-12);
    let (x2, s2) = (x.clone(), s.clone());
    let res = check("spectral", &[Tensor::uniform(vec![5, 3], 0.0, 1.0, &mut r)], move |t, v| {
        spectral_distance(t, v[0], &x2, &s2)
    })
    .unwrap();
    assert!(res.passed, "{res:?}");
}

#[test]
fn pit_examples() {
    assert_eq!(pit(&[vec![0.0, 5.0], vec![5.0, 0.0]]).unwrap(), (0.0, vec![0, 1]));
    assert_eq!(pit(&[vec![3.0, 1.0], vec![2.0, 4.0]]).unwrap(), (3.0, vec![1, 0]));
    assert_eq!(pit(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap().1, vec![0, 1]);
    assert!(pit(&vec![vec![0.0; 5]; 5]).is_err());
    assert!(pit(&[vec![0.0, 1.0]]).is_err());
}

/// Separate enumerator: Heap's algorithm, then the smallest cost with the
/// lexicographically smallest permutation among ties.
fn brute_force(d: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = d.len();
    let mut a: Vec<usize> = (0..n).collect();
    let mut all = vec![a.clone()];
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            all.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    all.sort();
    let cost = |p: &Vec<usize>| p.iter().enumerate().map(|(j, &k)| d[j][k]).sum::<f64>();
    let best = all.iter().map(cost).fold(f64::INFINITY, f64::min);
    let perm = all.into_iter().find(|p| cost(p) == best).unwrap();
    (best, perm)
}

#[test]
fn pit_agrees_with_independent_enumerator() {
    let mut r = rng::seeded(15);
    for _ in 0..50 {
        let d: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| r.random_range(0.0..10.0)).collect()).collect();
        let (cost, perm) = pit(&d).unwrap();
        let (want, wperm) = brute_force(&d);
        assert!((cost - want).abs() < 1e-12);
        assert_eq!(perm, wperm);
    }
}

#[test]
fn pit_select_follows_values() {
    let mut tape = Tape::new();
    let raw = [[3.0, 1.0], [2.0, 4.0]];
    let d: Vec<Vec<Var>> = raw
        .iter()
        .map(|row| row.iter().map(|&v| tape.leaf(Tensor::scalar(v)).unwrap()).collect())
        .collect();
    let (l, perm) = pit_select(&mut tape, &d).unwrap();
    assert_eq!(perm, vec![1, 0]);
    assert_eq!(tape.value(l).item(), 3.0);
    let g = tape.backward(l).unwrap();
    assert_eq!(g.wrt(d[0][1]).item(), 1.0);
    assert_eq!(g.wrt(d[0][0]).item(), 0.0);
}

fn one_hot(labels: &[usize], classes: usize) -> Tensor {
    let mut t = Tensor::zeros(vec![classes, labels.len()]);
    for (n, &c) in labels.iter().enumerate() {
        t.set(c, n, 1.0);
    }
    t
}

fn dc(v: &Tensor, u: &Tensor, variant: ClusteringVariant) -> f64 {
    value(|t| {
        let x = t.leaf(v.clone())?;
        deep_clustering(t, x, u, variant)
    })
}

#[test]
fn deep_clustering_invariances() {
    let mut r = rng::seeded(16);
    let labels: Vec<usize> = (0..12).map(|_| r.random_range(0..3)).collect();
    let u = one_hot(&labels, 3);
    assert!(dc(&u, &u, ClusteringVariant::Frobenius).abs() < 1e-12);

    // Random rotation from Gram-Schmidt on a Gaussian matrix.
    let g = nalgebra::DMatrix::from_fn(3, 3, |_, _| r.random_range(-1.0..1.0));
    let q = g.qr().q();
    let rot = Tensor::new(vec![3, 3], q.transpose().as_slice().to_vec()).unwrap();
    let v = rot.matmul(&u).unwrap();
    assert!(dc(&v, &u, ClusteringVariant::Frobenius).abs() < 1e-10);

    let emb = Tensor::randn(vec![4, 12], 1.0, &mut r);
    let perm_u = one_hot(&labels.iter().map(|&c| (c + 1) % 3).collect::<Vec<_>>(), 3);
    for variant in [ClusteringVariant::Frobenius, ClusteringVariant::Trace] {
        let a = dc(&emb, &u, variant);
        let b = dc(&emb, &perm_u, variant);
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{variant:?}");
    }
}

#[test]
fn feature_constraint_reduces_to_mse() {
    let mut r = rng::seeded(17);
    let y = Tensor::randn(vec![4, 3], 1.0, &mut r);
    let yh = Tensor::randn(vec![4, 3], 1.0, &mut r);
    let (fc, mse, zero) = {
        let mut tape = Tape::new();
        let a = tape.leaf(y.clone()).unwrap();
        let b = tape.leaf(yh.clone()).unwrap();
        let fc = feature_constraint(&mut tape, &[a], &[b], None).unwrap();
        let mse = regression(&mut tape, RegressionKind::Mse, a, b).unwrap();
        let zero = feature_constraint(&mut tape, &[a, b], &[a, b], Some(&[1.0, 2.0])).unwrap();
        (tape.value(fc).item(), tape.value(mse).item(), tape.value(zero).item())
    };
    assert_eq!(fc, mse);
    assert_eq!(zero, 0.0);
}

#[test]
fn feature_constraint_gradient_through_extractor() {
    let mut r = rng::seeded(18);
    let w1 = Tensor::randn(vec![3, 2], 1.0, &mut r);
    let w2 = Tensor::randn(vec![2, 3], 1.0, &mut r);
    let y = Tensor::randn(vec![2, 4], 1.0, &mut r);
    let res = check("feature_constraint", &[Tensor::randn(vec![2, 4], 1.0, &mut r)], move |t, v| {
        let a = t.leaf(w1.clone())?;
        let b = t.leaf(w2.clone())?;
        let target = t.leaf(y.clone())?;
        let extract = |t: &mut Tape, x: Var| -> acoustic_core::Result<Vec<Var>> {
            let h = t.matmul(a, x)?;
            let h = t.tanh(h)?;
            let o = t.matmul(b, h)?;
            Ok(vec![h, o])
        };
        let zr = extract(t, target)?;
        let ze = extract(t, v[0])?;
        feature_constraint(t, &zr, &ze, Some(&[0.5, 2.0]))
    })
    .unwrap();
    assert!(res.passed, "{res:?}");
}

fn exact_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &p in pos {
        for &n in neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn auc_loss(pos: &[f64], neg: &[f64]) -> f64 {
    value(|t| {
        let p = t.leaf(Tensor::vector(pos.to_vec()))?;
        let n = t.leaf(Tensor::vector(neg.to_vec()))?;
        auc_surrogate(t, p, n)
    })
}

#[test]
fn auc_surrogate_examples() {
    assert_eq!(auc_loss(&[2.0, 3.0], &[-1.0, 0.5]), 0.0);

    let mut r = rng::seeded(19);
    for _ in 0..50 {
        let pos: Vec<f64> = (0..8).map(|_| r.random_range(-1.0..2.0)).collect();
        let neg: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..1.0)).collect();
        assert!(auc_loss(&pos, &neg) >= 1.0 - exact_auc(&pos, &neg));
    }
}

#[test]
fn auc_surrogate_gradient_with_frozen_weights() {
    let pos = Tensor::vector(vec![0.2, -0.4, 1.1]);
    let neg = Tensor::vector(vec![0.5, -1.3]);
    let res = check("auc", &[pos, neg], |t, v| auc_surrogate(t, v[0], v[1])).unwrap();
    assert!(res.passed, "{res:?}");
}

#[test]
fn doa_losses() {
    let y = Tensor::column(vec![0.0, 1.0, 0.0]);
    let p = Tensor::column(vec![0.2, 0.7, 0.1]);
    let nd = value(|t| {
        let q = t.leaf(p.clone())?;
        doa_loss(t, DoaLoss::NormDistance, &y, q)
    });
    assert!((nd - (0.04 + 0.09 + 0.01)).abs() < 1e-12);
    let ce = value(|t| {
        let q = t.leaf(p.clone())?;
        doa_loss(t, DoaLoss::CrossEntropy, &y, q)
    });
    assert!((ce + 0.7f64.ln()).abs() < 1e-12);
    let wb = value(|t| {
        let q = t.leaf(p.clone())?;
        doa_loss(t, DoaLoss::WeightedBce { alpha: 1.0 }, &y, q)
    });
    assert!((wb - cls(ClassificationKind::Bce, &y, &p)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn focal_without_exponent_is_bce(seed in 0u64..1000) {
        let y = binary(vec![3, 4], seed);
        let p = probs(vec![3, 4], seed);
        let a = cls(ClassificationKind::AsymmetricFocal { eta: 0.0 }, &y, &p);
        let b = cls(ClassificationKind::Bce, &y, &p);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn unit_weighted_bce_is_bce(seed in 0u64..1000) {
        let y = probs(vec![2, 5], seed + 7);
        let p = probs(vec![2, 5], seed);
        let a = cls(ClassificationKind::WeightedBce { beta: 1.0 }, &y, &p);
        let b = cls(ClassificationKind::Bce, &y, &p);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn dice_stays_in_unit_interval(seed in 0u64..1000, eta in 0.0f64..3.0) {
        let y = binary(vec![4, 3], seed);
        let p = probs(vec![4, 3], seed);
        let v = cls(ClassificationKind::Dice { kappa0: 0.0, alpha: 0.5, eta }, &y, &p);
        prop_assert!((0.0..=1.0).contains(&v), "{}", v);
    }

    #[test]
    fn clip_score_between_frame_extremes(vals in prop::collection::vec(0.001f64..1.0, 1..12)) {
        let n = vals.len();
        let h = value(|t| {
            let f = t.leaf(Tensor::matrix(1, n, vals.clone())?)?;
            clip_scores(t, f)
        });
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(0.0, f64::max);
        prop_assert!(h >= lo - 1e-12 && h <= hi + 1e-12);
    }

    #[test]
    fn pit_never_exceeds_identity(d in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 4)) {
        let (cost, _) = pit(&d).unwrap();
        let identity: f64 = (0..4).map(|j| d[j][j]).sum();
        prop_assert!(cost <= identity);
    }

    #[test]
    fn si_sdr_ignores_target_scale(seed in 0u64..1000, c in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0]) {
        let mut r = rng::seeded(seed);
        let s: Vec<f64> = (0..16).map(|_| r.random_range(-1.0..1.0)).collect();
        let e: Vec<f64> = (0..16).map(|_| r.random_range(-1.0..1.0)).collect();
        let cs: Vec<f64> = s.iter().map(|v| c * v).collect();
        let a = si_sdr_value(&s, &e).unwrap();
        let b = si_sdr_value(&cs, &e).unwrap();
        prop_assert!((a - b).abs() < 1e-8);
    }
}

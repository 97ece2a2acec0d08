mod common;

use common::{auroc_oracle, fpr_oracle, random_instance, youden_oracle};
use goen::metrics::{
    accuracy, aupr, auroc, brier, detection_accuracy_youden, ece_with_bins, fpr_at_tpr, nll, IdEval, OodEval,
};
use goen::rng::Xoshiro256;
use ndarray::Array2;
use proptest::prelude::*;

#[test]
fn ranking_metrics_match_brute_force() {
    let mut rng = Xoshiro256::seed_from_u64(21);
    for k in 0..1000 {
        let (id, ood) = random_instance(&mut rng);
        assert_eq!(auroc(&id, &ood).unwrap(), auroc_oracle(&id, &ood), "instance {k}");
        assert_eq!(fpr_at_tpr(&id, &ood, 0.95).unwrap(), fpr_oracle(&id, &ood, 0.95), "instance {k}");
        assert_eq!(detection_accuracy_youden(&id, &ood).unwrap(), youden_oracle(&id, &ood), "instance {k}");
    }
}

#[test]
fn fpr_matches_brute_force_at_other_targets() {
    let mut rng = Xoshiro256::seed_from_u64(22);
    for _ in 0..200 {
        let (id, ood) = random_instance(&mut rng);
        for target in [0.5, 0.8, 0.99, 1.0] {
            assert_eq!(fpr_at_tpr(&id, &ood, target).unwrap(), fpr_oracle(&id, &ood, target));
        }
    }
}

#[test]
fn aupr_of_uninformative_scores_is_prevalence() {
    let mut rng = Xoshiro256::seed_from_u64(23);
    let id: Vec<f64> = (0..5000).map(|_| rng.unit_f64()).collect();
    let ood: Vec<f64> = (0..5000).map(|_| rng.unit_f64()).collect();
    assert!((aupr(&id, &ood).unwrap() - 0.5).abs() < 0.05);
    assert_eq!(aupr(&[0.0, 0.1], &[5.0]).unwrap(), 1.0);
}

#[test]
fn spec_threshold_examples() {
    let ood: Vec<f64> = (1..=20).map(|k| 10.0 * k as f64).collect();
    assert_eq!(fpr_at_tpr(&[5.0, 15.0, 25.0], &ood, 0.95).unwrap(), 1.0 / 3.0);
    let acc = detection_accuracy_youden(&[1.0, 2.0, 3.0], &[2.5, 3.5, 4.0]).unwrap();
    assert!((acc - 5.0 / 6.0).abs() < 1e-15);
    assert_eq!(detection_accuracy_youden(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.5);
}

fn strictly_increasing(x: f64) -> f64 {
    // Exact on the small integers used below.
    x * x * x + 7.0 * x
}

fn probs_and_labels(rng: &mut Xoshiro256, n: usize, c: usize) -> (Array2<f64>, Vec<usize>) {
    let mut p = Array2::from_shape_fn((n, c), |_| rng.unit_f64() + 1e-3);
    for mut row in p.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    let labels = (0..n).map(|_| rng.below(c as u64) as usize).collect();
    (p, labels)
}

proptest! {
    #[test]
    fn auroc_is_tie_symmetric(seed in any::<u64>()) {
        let (id, ood) = random_instance(&mut Xoshiro256::seed_from_u64(seed));
        prop_assert_eq!(auroc(&id, &ood).unwrap() + auroc(&ood, &id).unwrap(), 1.0);
    }

    #[test]
    fn auroc_ignores_increasing_transforms(id in proptest::collection::vec(-50i32..50, 1..80),
                                           ood in proptest::collection::vec(-50i32..50, 1..80)) {
        let id: Vec<f64> = id.into_iter().map(f64::from).collect();
        let ood: Vec<f64> = ood.into_iter().map(f64::from).collect();
        let tid: Vec<f64> = id.iter().map(|&x| strictly_increasing(x)).collect();
        let tood: Vec<f64> = ood.iter().map(|&x| strictly_increasing(x)).collect();
        prop_assert_eq!(auroc(&id, &ood).unwrap(), auroc(&tid, &tood).unwrap());
        prop_assert_eq!(OodEval::compute(&id, &ood).unwrap(), OodEval::compute(&tid, &tood).unwrap());
    }

    #[test]
    fn metrics_ignore_input_order(seed in any::<u64>()) {
        let mut rng = Xoshiro256::seed_from_u64(seed);
        let (mut id, mut ood) = random_instance(&mut rng);
        let before = OodEval::compute(&id, &ood).unwrap();
        rng.shuffle(&mut id);
        rng.shuffle(&mut ood);
        prop_assert_eq!(before, OodEval::compute(&id, &ood).unwrap());

        let (p, y) = probs_and_labels(&mut rng, 60, 4);
        let before = IdEval::compute(p.view(), &y, 15).unwrap();
        let perm = rng.permutation(60);
        let p2 = Array2::from_shape_fn((60, 4), |(i, j)| p[(perm[i], j)]);
        let y2: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let after = IdEval::compute(p2.view(), &y2, 15).unwrap();
        prop_assert!((before.ece - after.ece).abs() < 1e-12);
        prop_assert!((before.nll - after.nll).abs() < 1e-12);
        prop_assert!((before.brier - after.brier).abs() < 1e-12);
        prop_assert_eq!(before.accuracy, after.accuracy);
    }

    #[test]
    fn metrics_stay_in_range(seed in any::<u64>()) {
        let mut rng = Xoshiro256::seed_from_u64(seed);
        let (id, ood) = random_instance(&mut rng);
        let e = OodEval::compute(&id, &ood).unwrap();
        for v in [e.auroc, e.aupr, e.fpr95, e.detection_accuracy] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let (p, y) = probs_and_labels(&mut rng, 40, 3);
        let i = IdEval::compute(p.view(), &y, 10).unwrap();
        prop_assert!((0.0..=1.0).contains(&i.accuracy) && (0.0..=1.0).contains(&i.ece));
        prop_assert!((0.0..=2.0).contains(&i.brier) && i.nll >= 0.0);
    }

    #[test]
    fn one_bin_ece_is_accuracy_gap(seed in any::<u64>()) {
        let mut rng = Xoshiro256::seed_from_u64(seed);
        let (p, y) = probs_and_labels(&mut rng, 50, 5);
        let conf: f64 = p.rows().into_iter().map(|r| r.fold(0.0f64, |m, &v| m.max(v))).sum::<f64>() / 50.0;
        let acc = accuracy(p.view(), &y).unwrap();
        prop_assert!((ece_with_bins(p.view(), &y, 1).unwrap() - (acc - conf).abs()).abs() < 1e-12);
    }
}

#[test]
fn nll_and_brier_by_hand() {
    let p = Array2::from_shape_vec((2, 2), vec![0.8, 0.2, 0.4, 0.6]).unwrap();
    let y = [0, 0];
    let want_nll = -(0.8f64.ln() + 0.4f64.ln()) / 2.0;
    assert!((nll(p.view(), &y).unwrap() - want_nll).abs() < 1e-15);
    let want_brier = ((0.2f64.powi(2) + 0.2f64.powi(2)) + (0.6f64.powi(2) + 0.6f64.powi(2))) / 2.0;
    assert!((brier(p.view(), &y).unwrap() - want_brier).abs() < 1e-15);
}

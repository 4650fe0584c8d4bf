use approx::assert_relative_eq;
use disturb_core::disturb::{
    confidence_scores, directional_disturb_labels, disturb_count, disturb_errors, disturb_labels,
    disturb_values, sample_noise, sigma_at_epoch, Method, NoiseKind, RegularizerSpec,
    SigmaSchedule,
};
use disturb_core::rng::seeded;
use disturb_core::Matrix;
use proptest::prelude::*;

fn moments(draws: &[f64]) -> (f64, f64, f64) {
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    let m4 = draws.iter().map(|d| (d - mean).powi(4)).sum::<f64>() / n;
    (mean, var.sqrt(), m4 / (var * var) - 3.0)
}

#[test]
fn gaussian_noise_moments() {
    let mut rng = seeded(1);
    let draws: Vec<f64> = (0..1_000_000)
        .map(|_| sample_noise(NoiseKind::Gaussian, 0.01, &mut rng))
        .collect();
    let (mean, std, kurt) = moments(&draws);
    assert!(mean.abs() < 1e-4);
    assert_relative_eq!(std, 0.01, max_relative = 0.02);
    assert!(kurt.abs() < 0.05, "excess kurtosis {kurt}");
}

#[test]
fn laplace_noise_is_variance_matched_and_heavy_tailed() {
    let mut rng = seeded(2);
    let draws: Vec<f64> = (0..1_000_000)
        .map(|_| sample_noise(NoiseKind::Laplacian, 0.01, &mut rng))
        .collect();
    let (mean, std, kurt) = moments(&draws);
    assert!(mean.abs() < 1e-4);
    assert_relative_eq!(std, 0.01, max_relative = 0.02);
    // A Laplace distribution has excess kurtosis 3.
    assert_relative_eq!(kurt, 3.0, max_relative = 0.1);
}

#[test]
fn full_rate_value_noise_has_requested_spread() {
    let targets = vec![0.5; 1_000_000];
    let spec = RegularizerSpec::disturb_value(100.0, 0.01);
    let d = disturb_values(&targets, &spec, 0, 10, &mut seeded(3)).unwrap();
    let diffs: Vec<f64> = d.output.iter().zip(&targets).map(|(o, t)| o - t).collect();
    let (_, std, _) = moments(&diffs);
    assert_relative_eq!(std, 0.01, max_relative = 0.02);
}

#[test]
fn uniform_prediction_threshold_law() {
    // 1/√C ≥ 0.5 exactly when C ≤ 4.
    for classes in 2..=12 {
        let n = 40;
        let probs = Matrix::filled(n, classes, 1.0 / classes as f64);
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        let scores = confidence_scores(&labels, &probs).unwrap();
        assert_relative_eq!(scores[0], 1.0 / (classes as f64).sqrt(), epsilon = 1e-12);
        let d = directional_disturb_labels(&labels, &probs, 100.0, 0.5, &mut seeded(4)).unwrap();
        let expected = if classes <= 4 { n } else { 0 };
        assert_eq!(d.selected.len(), expected, "C = {classes}");
    }
}

#[test]
fn confidence_score_hand_value() {
    let probs = Matrix::from_rows(&[[0.8, 0.1, 0.1]]).unwrap();
    let s = confidence_scores(&[0], &probs).unwrap();
    assert_relative_eq!(s[0], 0.8 / 0.66f64.sqrt(), epsilon = 1e-12);
    assert_relative_eq!(s[0], 0.9847, epsilon = 1e-4);
}

#[test]
fn cosine_schedule_shape() {
    let total = 101;
    assert_eq!(sigma_at_epoch(0.02, 0, total).unwrap(), 0.02);
    assert_relative_eq!(
        sigma_at_epoch(0.02, 50, total).unwrap(),
        0.01,
        epsilon = 1e-15
    );
    assert_eq!(sigma_at_epoch(0.02, 100, total).unwrap(), 0.0);
    let values: Vec<f64> = (0..total)
        .map(|e| sigma_at_epoch(0.02, e, total).unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
    assert!(sigma_at_epoch(0.02, 101, total).is_err());
    assert!(sigma_at_epoch(0.02, 0, 1).is_err());
}

#[test]
fn annealed_value_noise_vanishes_at_the_end() {
    let spec = RegularizerSpec {
        sigma_schedule: SigmaSchedule::CosineAnneal,
        ..RegularizerSpec::disturb_value(100.0, 0.05)
    };
    let targets = vec![0.3; 16];
    let d = disturb_values(&targets, &spec, 9, 10, &mut seeded(5)).unwrap();
    assert_eq!(d.output, targets);
}

#[test]
fn label_methods_reject_impossible_rates() {
    // Rates above 100% and out-of-range labels are both rejected.
    assert!(disturb_labels(&[0, 1], 150.0, 2, &mut seeded(6)).is_err());
    assert!(disturb_labels(&[0, 5], 10.0, 2, &mut seeded(6)).is_err());
}

proptest! {
    #[test]
    fn count_is_floor(alpha in 0.0f64..=100.0, n in 0usize..500) {
        let k = disturb_count(alpha, n);
        prop_assert!(k <= n);
        prop_assert!(k as f64 <= alpha / 100.0 * n as f64 + 1e-9);
        prop_assert!((k + 1) as f64 > alpha / 100.0 * n as f64 - 1e-9);
    }

    #[test]
    fn label_disturbance_touches_only_selected(
        seed in any::<u64>(),
        classes in 2usize..12,
        n in 1usize..200,
        alpha in 0.0f64..=100.0,
    ) {
        let mut rng = seeded(seed);
        let labels: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % classes).collect();
        let d = disturb_labels(&labels, alpha, classes, &mut rng).unwrap();
        prop_assert_eq!(d.selected.len(), disturb_count(alpha, n));
        prop_assert!(d.selected.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(d.output.iter().all(|&l| l < classes));
        for (i, (out, label)) in d.output.iter().zip(&labels).enumerate() {
            if d.selected.binary_search(&i).is_err() {
                prop_assert_eq!(out, label);
            }
        }
    }

    #[test]
    fn zero_rate_is_identity(seed in any::<u64>(), n in 1usize..100) {
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let probs = Matrix::filled(n, 3, 1.0 / 3.0);
        let mut rng = seeded(seed);
        prop_assert_eq!(disturb_labels(&labels, 0.0, 3, &mut rng).unwrap().output, labels.clone());
        prop_assert_eq!(
            directional_disturb_labels(&labels, &probs, 0.0, 0.5, &mut rng).unwrap().output,
            labels
        );
        let targets: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let dv = RegularizerSpec::disturb_value(0.0, 0.5);
        prop_assert_eq!(disturb_values(&targets, &dv, 0, 1, &mut rng).unwrap().output, targets.clone());
        let de = RegularizerSpec::disturb_error(0.0, 0.5);
        let preds = Matrix::column(&targets);
        prop_assert_eq!(disturb_errors(&targets, &preds, &de, &mut rng).unwrap().output, targets);
    }

    #[test]
    fn value_noise_changes_exactly_k(seed in any::<u64>(), n in 1usize..200, alpha in 0.0f64..=100.0) {
        let targets: Vec<f64> = (0..n).map(|i| (i % 10) as f64 / 10.0).collect();
        let spec = RegularizerSpec::disturb_value(alpha, 0.01);
        let d = disturb_values(&targets, &spec, 0, 1, &mut seeded(seed)).unwrap();
        prop_assert_eq!(d.selected.len(), disturb_count(alpha, n));
        // Continuous noise lands on exactly zero with probability zero.
        prop_assert_eq!(d.changed(&targets), d.selected.len());
    }

    #[test]
    fn error_noise_hits_only_small_residuals(
        seed in any::<u64>(),
        residuals in prop::collection::vec(-0.5f64..0.5, 1..100),
        rho in 0.0f64..0.5,
    ) {
        let targets: Vec<f64> = residuals.iter().map(|_| 0.5).collect();
        let preds: Vec<f64> = residuals.iter().map(|r| 0.5 + r).collect();
        let spec = RegularizerSpec { method: Method::DisturbError, rho, ..RegularizerSpec::none() };
        let d = disturb_errors(&targets, &Matrix::column(&preds), &spec, &mut seeded(seed)).unwrap();
        let expected: Vec<usize> = (0..targets.len())
            .filter(|&i| (targets[i] - preds[i]).abs() < rho)
            .collect();
        prop_assert_eq!(d.selected, expected);
    }

    #[test]
    fn gate_never_admits_unconfident(
        seed in any::<u64>(),
        logits in prop::collection::vec(-6.0f64..6.0, 4 * 30),
        threshold in 0.0f64..1.0,
    ) {
        let raw = Matrix::from_vec(30, 4, logits).unwrap();
        let probs = disturb_core::nn::softmax_rows(&raw);
        let labels: Vec<usize> = (0..30).map(|i| i % 4).collect();
        let d = directional_disturb_labels(&labels, &probs, 100.0, threshold, &mut seeded(seed)).unwrap();
        let confident: Vec<usize> = (0..30)
            .filter(|&i| {
                let row = probs.row(i);
                row[labels[i]] / row.iter().map(|p| p * p).sum::<f64>().sqrt() >= threshold
            })
            .collect();
        // α = 100 takes every candidate.
        prop_assert_eq!(d.selected, confident);
    }
}

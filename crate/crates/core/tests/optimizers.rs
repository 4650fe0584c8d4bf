use approx::assert_relative_eq;
use disturb_core::nn::{lr_at_epoch, LrSchedule, Optimizer, OptimizerConfig};
use disturb_core::Matrix;

fn one(v: f64) -> Matrix {
    Matrix::filled(1, 1, v)
}

fn step(opt: &mut Optimizer, p: &mut Matrix, g: f64) {
    let grad = one(g);
    opt.step_params(&mut [p], &[&grad]).unwrap();
}

#[test]
fn momentum_accumulates_velocity() {
    let mut opt = Optimizer::new(OptimizerConfig::sgd_momentum(0.1)).unwrap();
    let mut p = one(1.0);
    // v1 = 2, θ = 1 − 0.2 = 0.8
    step(&mut opt, &mut p, 2.0);
    assert_relative_eq!(p.get(0, 0), 0.8, epsilon = 1e-15);
    // v2 = 0.9·2 + 1 = 2.8, θ = 0.8 − 0.28 = 0.52
    step(&mut opt, &mut p, 1.0);
    assert_relative_eq!(p.get(0, 0), 0.52, epsilon = 1e-15);
}

#[test]
fn adam_first_steps_match_hand_computation() {
    let mut opt = Optimizer::new(OptimizerConfig::adam(0.01)).unwrap();
    let mut p = one(0.0);
    // Bias-corrected first step is lr · g/(|g| + ε').
    step(&mut opt, &mut p, 4.0);
    assert_relative_eq!(p.get(0, 0), -0.01, epsilon = 1e-9);

    let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.01);
    let first = -lr * 4.0 / (4.0 + eps);
    assert_eq!(p.get(0, 0), first);
    let m = (1.0 - b1) * 4.0 * b1 + (1.0 - b1) * -2.0;
    let v = (1.0 - b2) * 16.0 * b2 + (1.0 - b2) * 4.0;
    let m_hat = m / (1.0 - b1 * b1);
    let v_hat = v / (1.0 - b2 * b2);
    let expected = first - lr * m_hat / (v_hat.sqrt() + eps);
    step(&mut opt, &mut p, -2.0);
    assert_relative_eq!(p.get(0, 0), expected, epsilon = 1e-12);
}

#[test]
fn step_decay_milestones() {
    assert_eq!(lr_at_epoch(0.1, 0), 0.1);
    assert_eq!(lr_at_epoch(0.1, 39), 0.1);
    assert_relative_eq!(lr_at_epoch(0.1, 40), 0.01, max_relative = 1e-12);
    assert_relative_eq!(lr_at_epoch(0.1, 59), 0.01, max_relative = 1e-12);
    assert_relative_eq!(lr_at_epoch(0.1, 60), 0.001, max_relative = 1e-12);
    assert_relative_eq!(lr_at_epoch(0.1, 99), 0.0001, max_relative = 1e-12);
    assert_eq!(LrSchedule::constant().lr_at(0.1, 1000), 0.1);

    let mut opt = Optimizer::new(OptimizerConfig::sgd_momentum(0.5)).unwrap();
    opt.start_epoch(45);
    assert_relative_eq!(opt.learning_rate(), 0.05, max_relative = 1e-12);
}

#[test]
fn mismatched_gradients_are_rejected() {
    let mut opt = Optimizer::new(OptimizerConfig::adam(0.01)).unwrap();
    let mut p = Matrix::zeros(2, 2);
    let g = Matrix::zeros(2, 3);
    assert!(opt.step_params(&mut [&mut p], &[&g]).is_err());
    assert!(opt.step_params(&mut [&mut p], &[]).is_err());
}

#[test]
fn invalid_configs_fail_validation() {
    let mut c = OptimizerConfig::sgd_momentum(0.1);
    c.learning_rate = -1.0;
    assert!(Optimizer::new(c).is_err());
    let mut c = OptimizerConfig::adam(0.1);
    c.schedule.milestones = vec![60, 40];
    assert!(Optimizer::new(c).is_err());
}

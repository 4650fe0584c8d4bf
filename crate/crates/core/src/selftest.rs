//! Built-in numerical checks, run by `disturb selftest`.

use rand::Rng;

use crate::data::MinMaxParams;
use crate::disturb::{confidence_scores, directional_disturb_labels, resample_label};
use crate::matrix::Matrix;
use crate::nn::{verify_gradient_identity, LossKind, Network, NetworkSpec, Targets};
use crate::rng::{seeded, SeededRng};
use crate::Result;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .expect("sized")
}

fn net(input: usize, hidden: usize, output: usize, loss: LossKind, rng: &mut SeededRng) -> Network {
    let spec = NetworkSpec {
        input_dim: input,
        hidden_dims: vec![hidden],
        output_dim: output,
        loss,
        dropout_rate: 0.0,
        l2_lambda: 0.0,
    };
    Network::new(spec, rng).expect("valid spec")
}

fn gradient_identity() -> Result<CheckResult> {
    let mut rng = seeded(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=16);
        let net = net(5, 8, 1, LossKind::Mse, &mut rng);
        let x = random_matrix(n, 5, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let eps: Vec<f64> = (0..n).map(|_| rng.random_range(-0.05..0.05)).collect();
        worst = worst.max(verify_gradient_identity(&net, &x, &y, &eps)?);
    }
    Ok(CheckResult {
        name: "noisy-target gradient identity",
        passed: worst < 1e-10,
        detail: format!("max deviation {worst:.3e} over 100 triples (limit 1e-10)"),
    })
}

/// Worst relative error between analytic and central-difference gradients.
fn finite_difference(loss: LossKind) -> Result<CheckResult> {
    let mut rng = seeded(0xfd);
    let outputs = if loss == LossKind::Mse { 1 } else { 3 };
    let mut net = net(5, 8, outputs, loss, &mut rng);
    let x = random_matrix(6, 5, &mut rng);
    let labels: Vec<usize> = (0..6).map(|_| rng.random_range(0..3)).collect();
    let values: Vec<f64> = (0..6).map(|_| rng.random()).collect();
    let targets = match loss {
        LossKind::CrossEntropy => Targets::Labels(&labels),
        LossKind::Mse => Targets::Values(&values),
    };
    let (_, cache) = net.forward(&x, false, None)?;
    let analytic = net.backward(&cache, targets)?;
    let analytic: Vec<f64> = analytic
        .matrices()
        .flat_map(|m| m.as_slice().to_vec())
        .collect();
    let h = 1e-5;
    let eval = |net: &Network| -> Result<f64> { crate::nn::loss(&net.predict(&x)?, targets, loss) };
    let mut worst = 0.0f64;
    let mut flat = 0;
    let counts: Vec<usize> = net.params().map(|m| m.as_slice().len()).collect();
    for (p, count) in counts.into_iter().enumerate() {
        for j in 0..count {
            let orig = net.params().nth(p).expect("index").as_slice()[j];
            net.params_mut().nth(p).expect("index").as_mut_slice()[j] = orig + h;
            let up = eval(&net)?;
            net.params_mut().nth(p).expect("index").as_mut_slice()[j] = orig - h;
            let down = eval(&net)?;
            net.params_mut().nth(p).expect("index").as_mut_slice()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[flat];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
            flat += 1;
        }
    }
    Ok(CheckResult {
        name: match loss {
            LossKind::CrossEntropy => "finite-difference gradients (cross-entropy)",
            LossKind::Mse => "finite-difference gradients (mse)",
        },
        passed: worst < 1e-4,
        detail: format!("max relative error {worst:.3e} (limit 1e-4)"),
    })
}

fn label_distribution() -> CheckResult {
    let (n, classes, alpha) = (100_000usize, 10usize, 10.0);
    let mut rng = seeded(0xd1);
    let mut counts = vec![0usize; classes];
    for _ in 0..n {
        counts[resample_label(0, alpha, classes, &mut rng)] += 1;
    }
    let p_other = alpha / (100.0 * classes as f64);
    let p_true = 1.0 - (classes as f64 - 1.0) * p_other;
    let mut worst_z = 0.0f64;
    for (c, &k) in counts.iter().enumerate() {
        let p = if c == 0 { p_true } else { p_other };
        let se = (p * (1.0 - p) / n as f64).sqrt();
        worst_z = worst_z.max((k as f64 / n as f64 - p).abs() / se);
    }
    CheckResult {
        name: "label resampling distribution",
        passed: worst_z <= 3.0,
        detail: format!("worst deviation {worst_z:.2} standard errors (limit 3)"),
    }
}

fn ddl_gate() -> Result<CheckResult> {
    let mut rng = seeded(0xdd1);
    let mut violations = 0usize;
    for _ in 0..200 {
        let n = 32;
        let logits = random_matrix(n, 4, &mut rng).map(|v| 4.0 * v);
        let probs = crate::nn::softmax_rows(&logits);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let scores = confidence_scores(&labels, &probs)?;
        let d = directional_disturb_labels(&labels, &probs, 50.0, 0.5, &mut rng)?;
        violations += d.selected.iter().filter(|&&i| scores[i] < 0.5).count();
    }
    let uniform10 = Matrix::filled(20, 10, 0.1);
    let labels10: Vec<usize> = (0..20).map(|i| i % 10).collect();
    let d10 = directional_disturb_labels(&labels10, &uniform10, 100.0, 0.5, &mut rng)?;
    let uniform3 = Matrix::filled(21, 3, 1.0 / 3.0);
    let labels3: Vec<usize> = (0..21).map(|i| i % 3).collect();
    let d3 = directional_disturb_labels(&labels3, &uniform3, 100.0, 0.5, &mut rng)?;
    let passed = violations == 0 && d10.selected.is_empty() && d3.selected.len() == 21;
    Ok(CheckResult {
        name: "directional confidence gate",
        passed,
        detail: format!(
            "{violations} low-confidence disturbances; uniform C=10 selected {}, uniform C=3 selected {}/21",
            d10.selected.len(),
            d3.selected.len()
        ),
    })
}

fn minmax_round_trip() -> Result<CheckResult> {
    let mut rng = seeded(0x3a);
    let x = random_matrix(50, 200, &mut rng).map(|v| 1e3 * v);
    let p = MinMaxParams::fit(&x);
    let worst = p.invert(&p.apply(&x)?)?.max_abs_diff(&x)?;
    let constant = MinMaxParams::fit_values(&[5.0, 5.0, 5.0]);
    let ok_const = constant.apply_values(&[5.0, 5.0])? == vec![0.0, 0.0]
        && constant.invert_values(&[0.0])? == vec![5.0];
    Ok(CheckResult {
        name: "minmax round trip",
        passed: worst <= 1e-12 && ok_const,
        detail: format!("max round-trip error {worst:.3e} (limit 1e-12)"),
    })
}

/// Runs every check. An `Err` means a check could not run at all.
pub fn run_all() -> Result<Vec<CheckResult>> {
    Ok(vec![
        gradient_identity()?,
        finite_difference(LossKind::Mse)?,
        finite_difference(LossKind::CrossEntropy)?,
        label_distribution(),
        ddl_gate()?,
        minmax_round_trip()?,
    ])
}

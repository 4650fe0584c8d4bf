//! Check that target noise enters the mse gradient linearly.
//!
//! For `L̃ = (1/N) Σ (ŷ_i − (y_i + ε_i))²`,
//! `∂L̃/∂θ = ∂L/∂θ − (2/N) Σ ε_i ∂ŷ_i/∂θ`. The left side comes from one
//! backward pass on the noisy targets; the right side from a clean backward
//! pass plus an explicit per-sample Jacobian accumulation.

use super::{Gradients, LossKind, Network, Targets};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest elementwise gap between the two gradient routes.
pub fn verify_gradient_identity(net: &Network, x: &Matrix, y: &[f64], eps: &[f64]) -> Result<f64> {
    if net.spec().loss != LossKind::Mse {
        return Err(Error::Unsupported(
            "gradient identity is defined for mse networks only".into(),
        ));
    }
    if eps.len() != y.len() || y.len() != x.rows() {
        return Err(Error::Shape(format!(
            "{} rows, {} targets, {} noise values",
            x.rows(),
            y.len(),
            eps.len()
        )));
    }
    let (_, cache) = net.forward(x, false, None)?;

    let noisy: Vec<f64> = y.iter().zip(eps).map(|(a, b)| a + b).collect();
    let direct = net.backward(&cache, Targets::Values(&noisy))?;

    let clean = net.backward(&cache, Targets::Values(y))?;
    let n = y.len() as f64;
    let mut noise_term: Option<Gradients> = None;
    for (i, &e) in eps.iter().enumerate() {
        let mut seed = Matrix::zeros(x.rows(), 1);
        seed.set(i, 0, 1.0);
        let jac = net.backward_from_output(&cache, &seed, false)?;
        match noise_term.as_mut() {
            None => {
                let mut first = jac;
                for l in &mut first.layers {
                    l.weights.scale(e);
                    l.bias.scale(e);
                }
                noise_term = Some(first);
            }
            Some(acc) => {
                for (a, j) in acc.layers.iter_mut().zip(&jac.layers) {
                    a.weights.add_scaled(&j.weights, e)?;
                    a.bias.add_scaled(&j.bias, e)?;
                }
            }
        }
    }
    let mut decomposed = clean;
    if let Some(acc) = noise_term {
        for (d, a) in decomposed.layers.iter_mut().zip(&acc.layers) {
            d.weights.add_scaled(&a.weights, -2.0 / n)?;
            d.bias.add_scaled(&a.bias, -2.0 / n)?;
        }
    }
    direct.max_abs_diff(&decomposed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkSpec;
    use crate::rng::seeded;
    use rand::Rng;

    fn mse_net(seed: u64) -> Network {
        let spec = NetworkSpec {
            input_dim: 5,
            hidden_dims: vec![8],
            output_dim: 1,
            loss: LossKind::Mse,
            dropout_rate: 0.0,
            l2_lambda: 0.0,
        };
        Network::new(spec, &mut seeded(seed)).unwrap()
    }

    #[test]
    fn zero_noise_is_exact() {
        let net = mse_net(4);
        let mut rng = seeded(40);
        let x =
            Matrix::from_vec(6, 5, (0..30).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let y: Vec<f64> = (0..6).map(|_| rng.random()).collect();
        assert_eq!(
            verify_gradient_identity(&net, &x, &y, &[0.0; 6]).unwrap(),
            0.0
        );
    }

    #[test]
    fn random_noise_within_rounding() {
        let net = mse_net(11);
        let mut rng = seeded(12);
        let x =
            Matrix::from_vec(9, 5, (0..45).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let y: Vec<f64> = (0..9).map(|_| rng.random()).collect();
        let e: Vec<f64> = (0..9).map(|_| rng.random_range(-0.05..0.05)).collect();
        assert!(verify_gradient_identity(&net, &x, &y, &e).unwrap() < 1e-10);
    }

    #[test]
    fn rejects_classification_nets() {
        let spec = NetworkSpec {
            input_dim: 2,
            hidden_dims: vec![3],
            output_dim: 2,
            loss: LossKind::CrossEntropy,
            dropout_rate: 0.0,
            l2_lambda: 0.0,
        };
        let net = Network::new(spec, &mut seeded(0)).unwrap();
        assert!(matches!(
            verify_gradient_identity(&net, &Matrix::zeros(1, 2), &[0.0], &[0.0]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn length_mismatch() {
        let net = mse_net(0);
        assert!(matches!(
            verify_gradient_identity(&net, &Matrix::zeros(2, 5), &[0.0, 0.0], &[0.0]),
            Err(Error::Shape(_))
        ));
    }
}

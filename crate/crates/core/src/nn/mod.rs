//! Fully connected feed-forward network with exact reverse-mode gradients.
//!
//! Layout: every hidden layer is `relu(x·W + b)` followed by optional inverted
//! dropout; the output layer is affine, with a softmax on top for
//! cross-entropy networks. Weights are stored `(fan_in, fan_out)` so a batch
//! of row vectors goes through a single GEMM per layer.

mod identity;
mod optim;
mod schedule;

pub use identity::verify_gradient_identity;
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use schedule::{lr_at_epoch, LrSchedule};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Mse,
}

/// Training targets for one batch.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    /// Class indices in `[0, C)`.
    Labels(&'a [usize]),
    /// Real targets, one per row, for single-output networks.
    Values(&'a [f64]),
}

impl Targets<'_> {
    pub fn len(&self) -> usize {
        match self {
            Targets::Labels(l) => l.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub loss: LossKind,
    /// Probability of dropping a hidden unit at train time; 0 disables dropout.
    pub dropout_rate: f64,
    /// Coefficient of the `λ‖W‖²` weight penalty; biases are not penalized.
    pub l2_lambda: f64,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Config("all layer widths must be at least 1".into()));
        }
        match self.loss {
            LossKind::CrossEntropy if self.output_dim < 2 => {
                return Err(Error::Config(
                    "cross-entropy networks need at least 2 outputs".into(),
                ))
            }
            LossKind::Mse if self.output_dim != 1 => {
                return Err(Error::Config("mse networks have exactly 1 output".into()))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::Config(format!(
                "l2 lambda {} must be finite and non-negative",
                self.l2_lambda
            )));
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_dims.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden_dims);
        w.push(self.output_dim);
        w
    }
}

/// Parameters of one affine layer. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `fan_in x fan_out`
    pub weights: Matrix,
    /// `1 x fan_out`
    pub bias: Matrix,
}

impl Dense {
    fn zeros_like(&self) -> Self {
        Self {
            weights: Matrix::zeros(self.weights.rows(), self.weights.cols()),
            bias: Matrix::zeros(1, self.bias.cols()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    /// Parameter-ordered view: `W0, b0, W1, b1, ...`.
    pub fn matrices(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().flat_map(|l| [&l.weights, &l.bias])
    }

    pub fn max_abs_diff(&self, other: &Gradients) -> Result<f64> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::Shape("gradient sets differ in depth".into()));
        }
        let mut worst = 0.0f64;
        for (a, b) in self.matrices().zip(other.matrices()) {
            worst = worst.max(a.max_abs_diff(b)?);
        }
        Ok(worst)
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().all(Matrix::is_finite)
    }
}

/// Intermediates of one forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    /// Input to each layer (after dropout for hidden layers).
    inputs: Vec<Matrix>,
    /// Hidden pre-activations.
    pre: Vec<Matrix>,
    /// Inverted-dropout multipliers per hidden layer.
    masks: Vec<Option<Matrix>>,
    output: Matrix,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Dense>,
    /// Bumped on every parameter mutation so stale caches are detected.
    version: u64,
}

impl Network {
    /// He-uniform initialization: weights in `±sqrt(6 / fan_in)`, zero biases.
    pub fn new(spec: NetworkSpec, rng: &mut SeededRng) -> Result<Self> {
        spec.validate()?;
        let widths = spec.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                Dense {
                    weights: Matrix::from_vec(fan_in, fan_out, data).expect("sized above"),
                    bias: Matrix::zeros(1, fan_out),
                }
            })
            .collect();
        Ok(Self {
            spec,
            layers,
            version: 0,
        })
    }

    /// Builds a network from explicit parameters.
    pub fn from_layers(spec: NetworkSpec, layers: Vec<Dense>) -> Result<Self> {
        spec.validate()?;
        let widths = spec.widths();
        if layers.len() != widths.len() - 1 {
            return Err(Error::Shape(format!(
                "expected {} layers, got {}",
                widths.len() - 1,
                layers.len()
            )));
        }
        for (i, (l, w)) in layers.iter().zip(widths.windows(2)).enumerate() {
            if l.weights.shape() != (w[0], w[1]) || l.bias.shape() != (1, w[1]) {
                return Err(Error::Shape(format!(
                    "layer {i}: weights {:?} bias {:?}, expected ({}, {}) and (1, {})",
                    l.weights.shape(),
                    l.bias.shape(),
                    w[0],
                    w[1],
                    w[1]
                )));
            }
        }
        Ok(Self {
            spec,
            layers,
            version: 0,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable parameters in the same order as [`Gradients::matrices`].
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.version += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
    }

    pub fn params(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().flat_map(|l| [&l.weights, &l.bias])
    }

    pub fn parameter_count(&self) -> usize {
        self.params().map(|m| m.as_slice().len()).sum()
    }

    /// `λ Σ ‖W‖²` over weight matrices.
    pub fn l2_penalty(&self) -> f64 {
        if self.spec.l2_lambda == 0.0 {
            return 0.0;
        }
        self.spec.l2_lambda
            * self
                .layers
                .iter()
                .map(|l| l.weights.squared_norm())
                .sum::<f64>()
    }

    /// Runs the network on a batch of rows.
    ///
    /// `rng` is required when `train` is set and dropout is active; it is
    /// ignored otherwise. Evaluation mode never drops units.
    pub fn forward(
        &self,
        x: &Matrix,
        train: bool,
        rng: Option<&mut SeededRng>,
    ) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.spec.input_dim
            )));
        }
        let dropout = train && self.spec.dropout_rate > 0.0;
        let mut rng = match (dropout, rng) {
            (true, None) => {
                return Err(Error::Contract(
                    "dropout is active in training mode but no RNG was supplied".into(),
                ))
            }
            (true, Some(r)) => Some(r),
            (false, _) => None,
        };
        let keep = 1.0 - self.spec.dropout_rate;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        let mut a = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.matmul(&layer.weights)?;
            z.add_row_broadcast(&layer.bias)?;
            inputs.push(a);
            if i == last {
                a = z;
                break;
            }
            let mut h = z.map(|v| v.max(0.0));
            let mask = match rng.as_deref_mut() {
                Some(r) => {
                    let data = (0..h.as_slice().len())
                        .map(|_| {
                            if r.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let m = Matrix::from_vec(h.rows(), h.cols(), data)?;
                    h.hadamard_assign(&m)?;
                    Some(m)
                }
                None => None,
            };
            pre.push(z);
            masks.push(mask);
            a = h;
        }
        let output = match self.spec.loss {
            LossKind::CrossEntropy => softmax_rows(&a),
            LossKind::Mse => a,
        };
        let cache = ForwardCache {
            version: self.version,
            inputs,
            pre,
            masks,
            output: output.clone(),
        };
        Ok((output, cache))
    }

    /// Evaluation-mode forward pass without a cache.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x, false, None)?.0)
    }

    /// Gradient of `loss(forward(x), targets) + λ‖W‖²` with respect to every
    /// parameter.
    pub fn backward(&self, cache: &ForwardCache, targets: Targets<'_>) -> Result<Gradients> {
        let out_grad = output_gradient(&cache.output, targets, self.spec.loss)?;
        self.backward_from_output(cache, &out_grad, true)
    }

    /// Back-propagates an arbitrary gradient on the final affine output (the
    /// logits for cross-entropy networks, `ŷ` for mse networks).
    pub fn backward_from_output(
        &self,
        cache: &ForwardCache,
        out_grad: &Matrix,
        include_l2: bool,
    ) -> Result<Gradients> {
        if cache.version != self.version || cache.inputs.len() != self.layers.len() {
            return Err(Error::Contract(
                "forward cache does not belong to the current parameters".into(),
            ));
        }
        if out_grad.shape() != cache.output.shape() {
            return Err(Error::Shape(format!(
                "output gradient {:?} vs output {:?}",
                out_grad.shape(),
                cache.output.shape()
            )));
        }
        let mut grads: Vec<Dense> = self.layers.iter().map(Dense::zeros_like).collect();
        let mut dz = out_grad.clone();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let mut dw = cache.inputs[i].t_matmul(&dz)?;
            if include_l2 && self.spec.l2_lambda != 0.0 {
                dw.add_scaled(&layer.weights, 2.0 * self.spec.l2_lambda)?;
            }
            grads[i] = Dense {
                weights: dw,
                bias: dz.sum_rows(),
            };
            if i == 0 {
                break;
            }
            let mut da = dz.matmul_t(&layer.weights)?;
            if let Some(mask) = &cache.masks[i - 1] {
                da.hadamard_assign(mask)?;
            }
            for (g, z) in da
                .as_mut_slice()
                .iter_mut()
                .zip(cache.pre[i - 1].as_slice())
            {
                if *z <= 0.0 {
                    *g = 0.0;
                }
            }
            dz = da;
        }
        Ok(Gradients { layers: grads })
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn check_targets(preds: &Matrix, targets: Targets<'_>, kind: LossKind) -> Result<()> {
    if preds.rows() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} targets",
            preds.rows(),
            targets.len()
        )));
    }
    match (kind, targets) {
        (LossKind::CrossEntropy, Targets::Labels(labels)) => {
            if let Some(&bad) = labels.iter().find(|&&l| l >= preds.cols()) {
                return Err(Error::Domain(format!(
                    "class index {bad} out of range for {} classes",
                    preds.cols()
                )));
            }
            Ok(())
        }
        (LossKind::Mse, Targets::Values(_)) if preds.cols() == 1 => Ok(()),
        (LossKind::Mse, Targets::Values(_)) => Err(Error::Shape(format!(
            "mse expects a single output column, got {}",
            preds.cols()
        ))),
        _ => Err(Error::Contract(format!(
            "{kind:?} loss cannot consume these targets"
        ))),
    }
}

/// Mean data loss over the batch.
///
/// For `Mse` this is `(1/N) Σ (ŷ_i − y_i)²`; for `CrossEntropy`, `preds` are
/// probabilities and the loss is `−(1/N) Σ ln p_i[label_i]`.
pub fn loss(preds: &Matrix, targets: Targets<'_>, kind: LossKind) -> Result<f64> {
    check_targets(preds, targets, kind)?;
    let n = preds.rows().max(1) as f64;
    let total: f64 = match targets {
        Targets::Labels(labels) => labels
            .iter()
            .enumerate()
            .map(|(i, &l)| -preds.get(i, l).max(f64::MIN_POSITIVE).ln())
            .sum(),
        Targets::Values(values) => values
            .iter()
            .zip(preds.as_slice())
            .map(|(y, p)| (p - y) * (p - y))
            .sum(),
    };
    Ok(total / n)
}

/// dL/d(final affine output). For softmax + cross-entropy this is `(p − onehot)/N`.
fn output_gradient(output: &Matrix, targets: Targets<'_>, kind: LossKind) -> Result<Matrix> {
    check_targets(output, targets, kind)?;
    let n = output.rows().max(1) as f64;
    let mut g = output.clone();
    match targets {
        Targets::Labels(labels) => {
            for (i, &l) in labels.iter().enumerate() {
                let row = g.row_mut(i);
                row[l] -= 1.0;
                for v in row.iter_mut() {
                    *v /= n;
                }
            }
        }
        Targets::Values(values) => {
            for (v, y) in g.as_mut_slice().iter_mut().zip(values) {
                *v = 2.0 * (*v - y) / n;
            }
        }
    }
    Ok(g)
}

/// Index of the largest entry in each row.
pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    m.row_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

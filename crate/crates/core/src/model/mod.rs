//! Binary classifiers with hand-written gradients: logistic regression and a
//! one-hidden-layer ReLU network.

mod checkpoint;
mod grad;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use grad::{backward, finite_difference_check, GradientBuffer};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Linear,
    Mlp { hidden: usize },
}

/// A dense layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs).zip(&self.bias))
        {
            *o = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b;
        }
    }
}

/// Model parameters. The last layer always has a single output, the logit.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    architecture: Architecture,
    input_dim: usize,
    layers: Vec<Layer>,
}

impl ModelParams {
    /// All-zero parameters.
    pub fn zeros(architecture: Architecture, input_dim: usize) -> Result<Self, ModelError> {
        if input_dim == 0 {
            return Err(ModelError::Shape("input dimension must be positive".into()));
        }
        let layers = match architecture {
            Architecture::Linear => vec![Layer::zeros(input_dim, 1)],
            Architecture::Mlp { hidden } => {
                if hidden == 0 {
                    return Err(ModelError::Shape("hidden width must be positive".into()));
                }
                vec![Layer::zeros(input_dim, hidden), Layer::zeros(hidden, 1)]
            }
        };
        Ok(Self {
            architecture,
            input_dim,
            layers,
        })
    }

    /// Every weight and bias uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init<R: Rng>(
        architecture: Architecture,
        input_dim: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let mut params = Self::zeros(architecture, input_dim)?;
        for layer in &mut params.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *v = rng.random_range(-bound..=bound);
            }
        }
        Ok(params)
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Parameters in declaration order: per layer, weights then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), ModelError> {
        if flat.len() != self.num_params() {
            return Err(ModelError::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut rest = flat;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.input_dim {
            return Err(ModelError::Shape(format!(
                "model expects {} features, got {}",
                self.input_dim,
                x.len()
            )));
        }
        Ok(())
    }
}

/// The logit `f_theta(x)`.
pub fn forward(params: &ModelParams, x: &[f64]) -> Result<f64, ModelError> {
    params.check_input(x)?;
    Ok(forward_unchecked(params, x, &mut Vec::new()))
}

// `hidden` receives the post-activation hidden layer for the MLP.
fn forward_unchecked(params: &ModelParams, x: &[f64], hidden: &mut Vec<f64>) -> f64 {
    let mut out = [0.0];
    match params.layers.as_slice() {
        [only] => only.apply(x, &mut out),
        [first, last] => {
            hidden.clear();
            hidden.resize(first.outputs, 0.0);
            first.apply(x, hidden);
            hidden.iter_mut().for_each(|h| *h = h.max(0.0));
            last.apply(hidden, &mut out);
        }
        _ => unreachable!("architectures have one or two layers"),
    }
    out[0]
}

/// Logistic loss `-log sigma(z)` for label 1 and `-log(1 - sigma(z))` for
/// label 0, as a softplus that neither overflows nor loses small values.
pub fn logistic_loss(logit: f64, label: u8) -> f64 {
    let z = if label == 1 { -logit } else { logit };
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-sample logistic losses over a batch of rows.
pub fn batch_losses(
    params: &ModelParams,
    rows: &[&[f64]],
    labels: &[u8],
) -> Result<Vec<f64>, ModelError> {
    if rows.len() != labels.len() {
        return Err(ModelError::Shape(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    rows.iter()
        .zip(labels)
        .map(|(x, &y)| forward(params, x).map(|z| logistic_loss(z, y)))
        .collect()
}

//! Minibatch training with ERM, DRO and DORO objectives, evaluation on
//! overlapping domains, checkpoint selection and iterative trimming.

mod config;
mod eval;
mod experiment;
mod objective;
mod select;
mod trim;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{Method, TrainConfig};
pub use eval::{accuracy_from_correct, evaluate, predictions, Accuracy};
pub use experiment::{
    run_experiment, summarize, ExperimentSplits, RunSummary, SelectedEpoch, SelectionParams,
    TRAIN_FRACTION,
};
pub use objective::{ObjectiveValue, RiskObjective};
pub use select::{model_select, stability_stat, validation_risk, SelectionStrategy};
pub use trim::{iterative_trim, TrimOutcome};

use crate::data::{DataError, TabularDataset};
use crate::model::{ModelError, ModelParams};
use crate::risk::RiskError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged in epoch {epoch}: {reason}")]
    Divergence { epoch: usize, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Risk(#[from] RiskError),
}

/// Metrics of the model at the end of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub avg_accuracy: f64,
    pub worst_accuracy: f64,
    pub per_domain_accuracy: Vec<f64>,
    /// Mean over the epoch's batches of the training objective.
    pub train_risk: f64,
    /// Minimizing `eta` on the epoch's last batch; `None` for ERM.
    pub eta_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub params: ModelParams,
    pub history: Vec<MetricsRecord>,
    /// The model at the end of each epoch, aligned with `history`.
    pub checkpoints: Vec<ModelParams>,
}

/// Training-set summary of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub train_risk: f64,
    pub eta_star: Option<f64>,
}

impl RiskObjective {
    pub fn from_config(config: &TrainConfig) -> Result<Self, TrainError> {
        match config.risk_spec()? {
            None => Ok(Self::erm()),
            Some(spec) if config.method.is_doro() => Self::doro(spec, config.eps),
            Some(spec) => Ok(Self::dro(spec)),
        }
    }
}

/// Runs the optimizer, calling `on_epoch` with the model after every epoch.
///
/// The update is momentum SGD with coupled weight decay:
/// `g += wd * theta; v = mu * v + g; theta -= lr * v`.
pub fn fit_with<F>(
    train: &TabularDataset,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<ModelParams, TrainError>
where
    F: FnMut(&ModelParams, EpochSummary) -> Result<(), TrainError>,
{
    config.validate()?;
    let objective = RiskObjective::from_config(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(config.architecture, train.dim(), &mut rng)?;
    let mut theta = params.to_flat();
    let mut velocity = vec![0.0; theta.len()];
    let rows = train.rows();
    let labels = train.labels();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch_rows = Vec::with_capacity(config.batch_size);
    let mut batch_labels = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut risk_sum = 0.0;
        let mut batches = 0usize;
        let mut eta_star = None;
        for chunk in order.chunks(config.batch_size) {
            batch_rows.clear();
            batch_labels.clear();
            batch_rows.extend(chunk.iter().map(|&i| rows[i]));
            batch_labels.extend(chunk.iter().map(|&i| labels[i]));
            let (value, grad) = objective
                .gradient(&params, &batch_rows, &batch_labels)
                .map_err(|e| match e {
                    TrainError::Risk(RiskError::InvalidBatch(reason)) => {
                        TrainError::Divergence { epoch, reason }
                    }
                    other => other,
                })?;
            if !value.risk.is_finite() {
                return Err(TrainError::Divergence {
                    epoch,
                    reason: format!("batch risk is {}", value.risk),
                });
            }
            risk_sum += value.risk;
            batches += 1;
            eta_star = value.eta_star;
            for ((t, v), g) in theta.iter_mut().zip(&mut velocity).zip(grad.to_flat()) {
                let g = g + config.weight_decay * *t;
                *v = config.momentum * *v + g;
                *t -= config.learning_rate * *v;
            }
            params.set_flat(&theta)?;
            if !params.is_finite() {
                return Err(TrainError::Divergence {
                    epoch,
                    reason: "parameters became non-finite".into(),
                });
            }
        }
        on_epoch(
            &params,
            EpochSummary {
                epoch,
                train_risk: risk_sum / batches as f64,
                eta_star,
            },
        )?;
    }
    Ok(params)
}

/// Trains without evaluation and returns the final model.
pub fn fit(train: &TabularDataset, config: &TrainConfig) -> Result<ModelParams, TrainError> {
    fit_with(train, config, |_, _| Ok(()))
}

/// Trains and records held-out metrics and a checkpoint after every epoch.
pub fn train(
    train: &TabularDataset,
    eval: &TabularDataset,
    config: &TrainConfig,
) -> Result<TrainRun, TrainError> {
    if train.dim() != eval.dim() {
        return Err(TrainError::Config(format!(
            "train data has {} features, evaluation data has {}",
            train.dim(),
            eval.dim()
        )));
    }
    let mut history = Vec::with_capacity(config.epochs);
    let mut checkpoints = Vec::with_capacity(config.epochs);
    let params = fit_with(train, config, |params, summary| {
        let acc = evaluate(params, eval)?;
        history.push(MetricsRecord {
            epoch: summary.epoch,
            avg_accuracy: acc.avg_accuracy,
            worst_accuracy: acc.worst_accuracy,
            per_domain_accuracy: acc.per_domain_accuracy,
            train_risk: summary.train_risk,
            eta_star: summary.eta_star,
        });
        checkpoints.push(params.clone());
        Ok(())
    })?;
    Ok(TrainRun {
        params,
        history,
        checkpoints,
    })
}

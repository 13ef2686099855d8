use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{evaluate, TrainError, TrainRun};
use crate::data::TabularDataset;
use crate::model::{batch_losses, ModelParams};
use crate::risk::{doro_batch_risk, CressieReadSpec, Divergence, LossBatch, DEFAULT_ETA_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionStrategy {
    /// Highest worst-domain validation accuracy.
    Oracle,
    /// Highest average validation accuracy.
    MaxAvgAcc,
    /// Lowest CVaR of the validation losses.
    MinCvar,
    /// Lowest CVaR-DORO of the validation losses.
    MinCvarDoro,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 4] = [
        SelectionStrategy::Oracle,
        SelectionStrategy::MaxAvgAcc,
        SelectionStrategy::MinCvar,
        SelectionStrategy::MinCvarDoro,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionStrategy::Oracle => "oracle",
            SelectionStrategy::MaxAvgAcc => "max-avg-acc",
            SelectionStrategy::MinCvar => "min-cvar",
            SelectionStrategy::MinCvarDoro => "min-cvar-doro",
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionStrategy {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| TrainError::Config(format!("unknown selection strategy `{s}`")))
    }
}

/// CVaR (`eps = 0`) or CVaR-DORO of the model's losses on the whole dataset.
pub fn validation_risk(
    params: &ModelParams,
    validation: &TabularDataset,
    alpha: f64,
    eps: f64,
) -> Result<f64, TrainError> {
    let losses = batch_losses(params, &validation.rows(), validation.labels())?;
    let spec = CressieReadSpec::from_alpha(Divergence::Cvar, alpha)?;
    Ok(doro_batch_risk(&LossBatch::uniform(losses)?, &spec, eps, DEFAULT_ETA_TOL)?.risk)
}

/// Index of the selected checkpoint; ties go to the earliest epoch.
pub fn model_select(
    run: &TrainRun,
    validation: &TabularDataset,
    strategy: SelectionStrategy,
    alpha: f64,
    eps: f64,
) -> Result<usize, TrainError> {
    if run.checkpoints.is_empty() {
        return Err(TrainError::Precondition("run has no checkpoints".into()));
    }
    // Scores are maximized.
    let score = |p: &ModelParams| -> Result<f64, TrainError> {
        Ok(match strategy {
            SelectionStrategy::Oracle => evaluate(p, validation)?.worst_accuracy,
            SelectionStrategy::MaxAvgAcc => evaluate(p, validation)?.avg_accuracy,
            SelectionStrategy::MinCvar => -validation_risk(p, validation, alpha, 0.0)?,
            SelectionStrategy::MinCvarDoro => -validation_risk(p, validation, alpha, eps)?,
        })
    };
    let mut best = (0, score(&run.checkpoints[0])?);
    for (i, p) in run.checkpoints.iter().enumerate().skip(1) {
        let s = score(p)?;
        if s > best.1 {
            best = (i, s);
        }
    }
    Ok(best.0)
}

/// Population standard deviations of average and worst accuracy across
/// epochs.
pub fn stability_stat(run: &TrainRun) -> Result<(f64, f64), TrainError> {
    let n = run.history.len();
    if n < 2 {
        return Err(TrainError::Domain(format!(
            "stability needs at least 2 epochs, got {n}"
        )));
    }
    let std = |values: Vec<f64>| {
        let mean = values.iter().sum::<f64>() / n as f64;
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    Ok((
        std(run.history.iter().map(|r| r.avg_accuracy).collect()),
        std(run.history.iter().map(|r| r.worst_accuracy).collect()),
    ))
}

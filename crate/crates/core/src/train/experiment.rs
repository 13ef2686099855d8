//! One training run end to end: train/validation/test splits, training, and
//! the summary used by the CLI and the acceptance suite.

use serde::{Deserialize, Serialize};

use super::{
    model_select, stability_stat, train, SelectionStrategy, TrainConfig, TrainError, TrainRun,
};
use crate::data::{prepare_synthetic, split, SyntheticSpec, TabularDataset};

pub const TRAIN_FRACTION: f64 = 0.7;

/// The held-out part is halved into validation (model selection) and test
/// (reported metrics).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSplits {
    pub train: TabularDataset,
    pub validation: TabularDataset,
    pub test: TabularDataset,
}

impl ExperimentSplits {
    /// Contamination in `spec` applies to the training split only.
    pub fn synthetic(spec: &SyntheticSpec) -> Result<Self, TrainError> {
        let (train, held_out) = prepare_synthetic(spec, TRAIN_FRACTION)?;
        let (validation, test) = split(&held_out, 0.5, spec.seed)?;
        Ok(Self {
            train,
            validation,
            test,
        })
    }

    pub fn from_dataset(dataset: &TabularDataset, seed: u64) -> Result<Self, TrainError> {
        let (train, held_out) = split(dataset, TRAIN_FRACTION, seed)?;
        let (validation, test) = split(&held_out, 0.5, seed)?;
        Ok(Self {
            train,
            validation,
            test,
        })
    }
}

/// Risk parameters for the `min-cvar` and `min-cvar-doro` strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub alpha: f64,
    pub eps: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            eps: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedEpoch {
    pub strategy: SelectionStrategy,
    pub epoch: usize,
    pub avg_accuracy: f64,
    pub worst_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: TrainConfig,
    pub selection: SelectionParams,
    /// Test metrics at the epoch each strategy picks on validation data.
    pub selected: Vec<SelectedEpoch>,
    pub final_avg_accuracy: f64,
    pub final_worst_accuracy: f64,
    /// Standard deviations across epochs; `None` for single-epoch runs.
    pub avg_std: Option<f64>,
    pub worst_std: Option<f64>,
}

impl RunSummary {
    pub fn selected(&self, strategy: SelectionStrategy) -> Option<&SelectedEpoch> {
        self.selected.iter().find(|s| s.strategy == strategy)
    }
}

pub fn summarize(
    run: &TrainRun,
    config: &TrainConfig,
    validation: &TabularDataset,
    selection: SelectionParams,
) -> Result<RunSummary, TrainError> {
    let last = run
        .history
        .last()
        .ok_or_else(|| TrainError::Precondition("run has no history".into()))?;
    let selected = SelectionStrategy::ALL
        .into_iter()
        .map(|strategy| {
            let epoch = model_select(run, validation, strategy, selection.alpha, selection.eps)?;
            let r = &run.history[epoch];
            Ok(SelectedEpoch {
                strategy,
                epoch,
                avg_accuracy: r.avg_accuracy,
                worst_accuracy: r.worst_accuracy,
            })
        })
        .collect::<Result<_, TrainError>>()?;
    let (avg_std, worst_std) = match stability_stat(run) {
        Ok((a, w)) => (Some(a), Some(w)),
        Err(_) => (None, None),
    };
    Ok(RunSummary {
        config: config.clone(),
        selection,
        selected,
        final_avg_accuracy: last.avg_accuracy,
        final_worst_accuracy: last.worst_accuracy,
        avg_std,
        worst_std,
    })
}

/// Trains on `splits.train`, records test metrics, and summarizes.
pub fn run_experiment(
    splits: &ExperimentSplits,
    config: &TrainConfig,
    selection: SelectionParams,
) -> Result<(TrainRun, RunSummary), TrainError> {
    let run = train(&splits.train, &splits.test, config)?;
    let summary = summarize(&run, config, &splits.validation, selection)?;
    Ok((run, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::Method;

    #[test]
    fn synthetic_splits_partition_the_data() {
        let spec = SyntheticSpec {
            n_samples: 400,
            outlier_fraction: 0.1,
            ..SyntheticSpec::default()
        };
        let s = ExperimentSplits::synthetic(&spec).unwrap();
        assert_eq!(
            (s.train.len(), s.validation.len(), s.test.len()),
            (280, 60, 60)
        );
        assert_eq!(s.train.metadata().contaminated.len(), 28);
        assert!(s.test.metadata().contaminated.is_empty());
        let mut ids: Vec<usize> = [&s.train, &s.validation, &s.test]
            .iter()
            .flat_map(|d| d.row_ids().to_vec())
            .collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..400).collect::<Vec<_>>());
    }

    #[test]
    fn summary_reports_every_strategy() {
        let spec = SyntheticSpec {
            n_samples: 300,
            ..SyntheticSpec::default()
        };
        let splits = ExperimentSplits::synthetic(&spec).unwrap();
        let cfg = TrainConfig {
            method: Method::CvarDoro,
            eps: 0.05,
            epochs: 4,
            ..TrainConfig::default()
        };
        let (run, summary) = run_experiment(&splits, &cfg, SelectionParams::default()).unwrap();
        assert_eq!(summary.selected.len(), 4);
        let oracle = summary.selected(SelectionStrategy::Oracle).unwrap();
        assert_eq!(
            oracle.worst_accuracy,
            run.history[oracle.epoch].worst_accuracy
        );
        assert_eq!(summary.final_worst_accuracy, run.history[3].worst_accuracy);
        assert!(summary.worst_std.is_some());

        let one = TrainConfig { epochs: 1, ..cfg };
        let (_, summary) = run_experiment(&splits, &one, SelectionParams::default()).unwrap();
        assert_eq!(summary.worst_std, None);
        assert!(summary.selected.iter().all(|s| s.epoch == 0));
    }
}

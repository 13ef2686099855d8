use super::{fit, Method, TrainConfig, TrainError};
use crate::data::TabularDataset;
use crate::model::batch_losses;
use crate::risk::largest_indices;

#[derive(Debug, Clone, PartialEq)]
pub struct TrimOutcome {
    pub dataset: TabularDataset,
    /// Positions in the input dataset, in removal order.
    pub removed: Vec<usize>,
}

/// Repeatedly trains ERM from a fresh initialization and drops the
/// `drop_per_round` samples with the highest loss.
///
/// Round `r` trains with `config` switched to ERM and seed `config.seed + r`.
/// Among tied losses the larger position is dropped first.
pub fn iterative_trim(
    dataset: &TabularDataset,
    rounds: usize,
    drop_per_round: usize,
    config: &TrainConfig,
) -> Result<TrimOutcome, TrainError> {
    let total = rounds
        .checked_mul(drop_per_round)
        .filter(|&t| t < dataset.len())
        .ok_or_else(|| {
            TrainError::Precondition(format!(
                "trimming {rounds} x {drop_per_round} samples needs more than {} rows",
                dataset.len()
            ))
        })?;
    let mut current = dataset.clone();
    let mut positions: Vec<usize> = (0..dataset.len()).collect();
    let mut removed = Vec::with_capacity(total);
    for round in 0..rounds {
        let round_config = TrainConfig {
            method: Method::Erm,
            eps: 0.0,
            seed: config.seed.wrapping_add(round as u64),
            ..config.clone()
        };
        let params = fit(&current, &round_config)?;
        let losses = batch_losses(&params, &current.rows(), current.labels())?;
        if let Some(l) = losses.iter().find(|l| !l.is_finite()) {
            return Err(TrainError::Divergence {
                epoch: round_config.epochs - 1,
                reason: format!("non-finite loss {l} while scoring trimming round {round}"),
            });
        }
        let mut dropped = largest_indices(&losses, drop_per_round);
        dropped.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(b.cmp(&a)));
        removed.extend(dropped.iter().map(|&i| positions[i]));
        let mut is_dropped = vec![false; current.len()];
        for &i in &dropped {
            is_dropped[i] = true;
        }
        let keep: Vec<usize> = (0..current.len()).filter(|&i| !is_dropped[i]).collect();
        positions = keep.iter().map(|&i| positions[i]).collect();
        current = current.select(&keep).map_err(|e| {
            TrainError::Precondition(format!(
                "trimming round {round} left a domain without rows ({e})"
            ))
        })?;
    }
    Ok(TrimOutcome {
        dataset: current,
        removed,
    })
}

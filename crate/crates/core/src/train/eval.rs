use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::data::TabularDataset;
use crate::model::{forward, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    /// Over all samples, regardless of domain.
    pub avg_accuracy: f64,
    /// Minimum of `per_domain_accuracy`.
    pub worst_accuracy: f64,
    pub per_domain_accuracy: Vec<f64>,
}

/// Accuracy from per-sample correctness. A sample counts in every domain it
/// belongs to.
pub fn accuracy_from_correct(
    correct: &[bool],
    domain_masks: &[Vec<bool>],
) -> Result<Accuracy, TrainError> {
    if correct.is_empty() {
        return Err(TrainError::Domain("no samples to evaluate".into()));
    }
    let mut per_domain = Vec::with_capacity(domain_masks.len());
    for (k, mask) in domain_masks.iter().enumerate() {
        if mask.len() != correct.len() {
            return Err(TrainError::Domain(format!(
                "domain {k} has {} entries for {} samples",
                mask.len(),
                correct.len()
            )));
        }
        let (hits, members) = mask
            .iter()
            .zip(correct)
            .filter(|(m, _)| **m)
            .fold((0usize, 0usize), |(h, m), (_, c)| {
                (h + usize::from(*c), m + 1)
            });
        if members == 0 {
            return Err(TrainError::Domain(format!("empty domain {k}")));
        }
        per_domain.push(hits as f64 / members as f64);
    }
    let avg_accuracy = correct.iter().filter(|c| **c).count() as f64 / correct.len() as f64;
    let worst_accuracy = per_domain.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Accuracy {
        avg_accuracy,
        worst_accuracy: if per_domain.is_empty() {
            avg_accuracy
        } else {
            worst_accuracy
        },
        per_domain_accuracy: per_domain,
    })
}

/// Predicts class 1 when the logit is positive.
pub fn predictions(params: &ModelParams, dataset: &TabularDataset) -> Result<Vec<u8>, TrainError> {
    dataset
        .rows()
        .into_iter()
        .map(|x| Ok(u8::from(forward(params, x)? > 0.0)))
        .collect()
}

pub fn evaluate(params: &ModelParams, dataset: &TabularDataset) -> Result<Accuracy, TrainError> {
    let correct: Vec<bool> = predictions(params, dataset)?
        .iter()
        .zip(dataset.labels())
        .map(|(p, y)| p == y)
        .collect();
    accuracy_from_correct(&correct, dataset.domain_masks())
}

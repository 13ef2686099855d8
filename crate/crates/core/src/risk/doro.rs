//! Batch DORO risk: drop the `floor(eps * n)` largest losses, then solve the
//! DRO dual on what is left.

use super::dual::{minimize_eta, EtaSolution};
use super::{CressieReadSpec, LossBatch, RiskError};

/// Outcome of one DORO evaluation on a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct DoroOutcome {
    pub risk: f64,
    pub eta_star: f64,
    /// Indices into the original batch that survived, ascending.
    pub kept: Vec<usize>,
    /// Indices that were discarded as presumed outliers, ascending.
    pub discarded: Vec<usize>,
    pub solution: EtaSolution,
}

/// `floor(eps * n)`, robust to representation error in `eps * n`.
pub fn discard_count(n: usize, eps: f64) -> usize {
    ((eps * n as f64) + 1e-9).floor() as usize
}

/// Indices of the `k` largest losses. Among tied losses the larger index is
/// discarded first.
pub fn largest_indices(losses: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(b.cmp(&a)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// DORO risk of a uniformly weighted batch.
///
/// With `floor(eps * n) = 0` this is exactly [`minimize_eta`] on the batch.
pub fn doro_batch_risk(
    batch: &LossBatch,
    spec: &CressieReadSpec,
    eps: f64,
    tol: f64,
) -> Result<DoroOutcome, RiskError> {
    if !(0.0..0.5).contains(&eps) {
        return Err(RiskError::Domain(format!(
            "eps must lie in [0, 0.5), got {eps}"
        )));
    }
    if !batch.is_uniform() {
        return Err(RiskError::InvalidBatch(
            "DORO batch risk requires uniform sample weights".into(),
        ));
    }
    let n = batch.len();
    let k = discard_count(n, eps);
    if k >= n {
        return Err(RiskError::DegenerateBatch(format!(
            "eps = {eps} discards all {n} samples"
        )));
    }

    if k == 0 {
        let solution = minimize_eta(batch, spec, tol)?;
        return Ok(DoroOutcome {
            risk: solution.risk,
            eta_star: solution.eta_star,
            kept: (0..n).collect(),
            discarded: Vec::new(),
            solution,
        });
    }

    let discarded = largest_indices(batch.losses(), k);
    let mut is_discarded = vec![false; n];
    for &i in &discarded {
        is_discarded[i] = true;
    }
    let kept: Vec<usize> = (0..n).filter(|&i| !is_discarded[i]).collect();
    let trimmed = LossBatch::uniform(kept.iter().map(|&i| batch.losses()[i]).collect())?;
    let solution = minimize_eta(&trimmed, spec, tol)?;
    Ok(DoroOutcome {
        risk: solution.risk,
        eta_star: solution.eta_star,
        kept,
        discarded,
        solution,
    })
}

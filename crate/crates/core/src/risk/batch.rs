use super::RiskError;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A finite multiset of non-negative per-sample losses with sample weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBatch {
    losses: Vec<f64>,
    weights: Vec<f64>,
    uniform: bool,
}

impl LossBatch {
    /// Batch with weight `1/n` on every loss.
    pub fn uniform(losses: Vec<f64>) -> Result<Self, RiskError> {
        check_losses(&losses)?;
        let w = 1.0 / losses.len() as f64;
        let weights = vec![w; losses.len()];
        Ok(Self {
            losses,
            weights,
            uniform: true,
        })
    }

    /// Batch with explicit weights; they must be strictly positive and sum to
    /// one within `1e-12`.
    pub fn weighted(losses: Vec<f64>, weights: Vec<f64>) -> Result<Self, RiskError> {
        check_losses(&losses)?;
        if weights.len() != losses.len() {
            return Err(RiskError::InvalidBatch(format!(
                "{} losses but {} weights",
                losses.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(RiskError::InvalidBatch(format!(
                "weights must be positive and finite, found {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(RiskError::InvalidBatch(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let uniform = weights.iter().all(|w| *w == weights[0]);
        Ok(Self {
            losses,
            weights,
            uniform,
        })
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    /// True when every weight is identical (the batch was built uniformly).
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn mean(&self) -> f64 {
        self.losses
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| l * w)
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.losses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.losses
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Returns a copy with `k` added to every loss.
    pub fn shifted(&self, k: f64) -> Result<Self, RiskError> {
        let losses = self.losses.iter().map(|l| l + k).collect();
        self.with_losses(losses)
    }

    /// Returns a copy with every loss multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self, RiskError> {
        let losses = self.losses.iter().map(|l| l * s).collect();
        self.with_losses(losses)
    }

    fn with_losses(&self, losses: Vec<f64>) -> Result<Self, RiskError> {
        check_losses(&losses)?;
        Ok(Self {
            losses,
            weights: self.weights.clone(),
            uniform: self.uniform,
        })
    }
}

fn check_losses(losses: &[f64]) -> Result<(), RiskError> {
    if losses.is_empty() {
        return Err(RiskError::EmptyBatch);
    }
    if let Some(l) = losses.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(RiskError::InvalidBatch(format!(
            "losses must be finite and non-negative, found {l}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_batch() {
        let b = LossBatch::uniform(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(b.is_uniform());
        assert_eq!(b.weights(), &[0.25; 4]);
        assert_eq!(b.mean(), 2.5);
        assert_eq!(b.min(), 1.0);
        assert_eq!(b.max(), 4.0);
    }

    #[test]
    fn rejects_invalid() {
        assert!(matches!(
            LossBatch::uniform(vec![]),
            Err(RiskError::EmptyBatch)
        ));
        assert!(LossBatch::uniform(vec![1.0, -0.5]).is_err());
        assert!(LossBatch::uniform(vec![f64::NAN]).is_err());
        assert!(LossBatch::weighted(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(LossBatch::weighted(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        assert!(LossBatch::weighted(vec![1.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn weighted_batch_detects_uniformity() {
        let b = LossBatch::weighted(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert!(b.is_uniform());
        let b = LossBatch::weighted(vec![1.0, 2.0], vec![0.25, 0.75]).unwrap();
        assert!(!b.is_uniform());
        assert_eq!(b.mean(), 1.75);
    }
}

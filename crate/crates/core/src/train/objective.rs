//! The per-batch training objective and its gradient.
//!
//! For DRO and DORO the risk is `min_eta F(theta, eta)`. By Danskin's theorem
//! its gradient is `sum_i w_i grad l_i` with `w_i` the derivative of the dual
//! objective in `l_i` at the minimizing `eta` (zero for discarded samples),
//! completed at kinks so that the weights sum to one.

use super::TrainError;
use crate::model::{backward, batch_losses, GradientBuffer, ModelParams};
use crate::risk::{
    doro_batch_risk, dual_sample_weights, CressieReadSpec, LossBatch, DEFAULT_ETA_TOL,
};

const KINK_DEFICIT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskObjective {
    spec: Option<CressieReadSpec>,
    eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub risk: f64,
    /// `None` for ERM.
    pub eta_star: Option<f64>,
    /// Derivative of the risk in each loss.
    pub sample_weights: Vec<f64>,
    /// Batch positions dropped by DORO, ascending.
    pub discarded: Vec<usize>,
}

impl RiskObjective {
    pub fn erm() -> Self {
        Self {
            spec: None,
            eps: 0.0,
        }
    }

    pub fn dro(spec: CressieReadSpec) -> Self {
        Self {
            spec: Some(spec),
            eps: 0.0,
        }
    }

    pub fn doro(spec: CressieReadSpec, eps: f64) -> Result<Self, TrainError> {
        if !(0.0..0.5).contains(&eps) {
            return Err(TrainError::Config(format!(
                "eps must lie in [0, 0.5), got {eps}"
            )));
        }
        Ok(Self {
            spec: Some(spec),
            eps,
        })
    }

    pub fn spec(&self) -> Option<&CressieReadSpec> {
        self.spec.as_ref()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn evaluate(&self, losses: &[f64]) -> Result<ObjectiveValue, TrainError> {
        let batch = LossBatch::uniform(losses.to_vec())?;
        let Some(spec) = &self.spec else {
            let mass: f64 = batch.weights().iter().sum();
            return Ok(ObjectiveValue {
                risk: batch.mean(),
                eta_star: None,
                sample_weights: batch.weights().iter().map(|w| w / mass).collect(),
                discarded: Vec::new(),
            });
        };
        let out = doro_batch_risk(&batch, spec, self.eps, DEFAULT_ETA_TOL)?;
        let mut sample_weights = dual_sample_weights(&batch, out.eta_star, spec, &out.kept)?;
        // The risk is translation equivariant, so its gradient weights sum to
        // one. When eta* sits on a kink of the dual (a loss value), the
        // fixed-eta weights miss the share of the samples at eta*.
        let deficit = 1.0 - sample_weights.iter().sum::<f64>();
        if deficit > KINK_DEFICIT {
            let at: Vec<usize> = out
                .kept
                .iter()
                .copied()
                .filter(|&i| losses[i] == out.eta_star)
                .collect();
            for &i in &at {
                sample_weights[i] += deficit / at.len() as f64;
            }
        }
        Ok(ObjectiveValue {
            risk: out.risk,
            eta_star: Some(out.eta_star),
            sample_weights,
            discarded: out.discarded,
        })
    }

    /// Risk of the model on a batch and its gradient in the parameters.
    pub fn gradient(
        &self,
        params: &ModelParams,
        rows: &[&[f64]],
        labels: &[u8],
    ) -> Result<(ObjectiveValue, GradientBuffer), TrainError> {
        let losses = batch_losses(params, rows, labels)?;
        let value = self.evaluate(&losses)?;
        let grad = backward(params, rows, labels, &value.sample_weights)?;
        Ok((value, grad))
    }

    /// Max relative error between [`gradient`](Self::gradient) and central
    /// differences of the minimized risk, denominator
    /// `max(|analytic|, |numeric|, 1e-8)`.
    pub fn danskin_check(
        &self,
        params: &ModelParams,
        rows: &[&[f64]],
        labels: &[u8],
        h: f64,
    ) -> Result<f64, TrainError> {
        if !(h > 0.0) {
            return Err(TrainError::Config(format!(
                "step must be positive, got {h}"
            )));
        }
        let analytic = self.gradient(params, rows, labels)?.1.to_flat();
        let base = params.to_flat();
        let mut probe = params.clone();
        let mut flat = base.clone();
        let mut risk_at = |flat: &[f64]| -> Result<f64, TrainError> {
            probe.set_flat(flat)?;
            Ok(self.evaluate(&batch_losses(&probe, rows, labels)?)?.risk)
        };
        let mut worst: f64 = 0.0;
        for (i, a) in analytic.iter().enumerate() {
            flat[i] = base[i] + h;
            let up = risk_at(&flat)?;
            flat[i] = base[i] - h;
            let down = risk_at(&flat)?;
            flat[i] = base[i];
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8));
        }
        Ok(worst)
    }
}

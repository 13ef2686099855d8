//! The dual form of the Cressie-Read DRO risk,
//!
//! ```text
//! R(P) = inf_eta  c * E_P[(l - eta)_+^{beta*}]^{1/beta*} + eta,
//! ```
//!
//! evaluated on weighted loss batches and minimized over `eta` with Brent's
//! method.

use super::brent;
use super::{CressieReadSpec, LossBatch, RiskError};

/// Default absolute tolerance on `eta`.
pub const DEFAULT_ETA_TOL: f64 = 1e-9;
/// Brent iteration cap.
pub const MAX_ETA_ITER: usize = 200;
const MAX_BRACKET_EXPANSIONS: usize = 200;

/// Result of minimizing the dual objective over `eta`.
///
/// `risk` is the dual objective at `eta_star`, except when `rho = 0` and
/// `beta* > 1`: the infimum (the weighted mean) is then only approached as
/// `eta -> -inf`, so `risk` is the mean and `eta_star` is the lower bracket end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSolution {
    pub eta_star: f64,
    pub risk: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

/// `c * (sum_i w_i (l_i - eta)_+^{beta*})^{1/beta*} + eta`.
pub fn dual_objective(batch: &LossBatch, eta: f64, spec: &CressieReadSpec) -> f64 {
    spec.c * excess_norm(batch.losses(), batch.weights(), eta, spec.beta_star) + eta
}

/// `(sum_i w_i (l_i - eta)_+^p)^{1/p}`.
fn excess_norm(losses: &[f64], weights: &[f64], eta: f64, p: f64) -> f64 {
    if p == 1.0 {
        losses
            .iter()
            .zip(weights)
            .map(|(l, w)| w * (l - eta).max(0.0))
            .sum()
    } else if p == 2.0 {
        losses
            .iter()
            .zip(weights)
            .map(|(l, w)| {
                let x = (l - eta).max(0.0);
                w * x * x
            })
            .sum::<f64>()
            .sqrt()
    } else {
        losses
            .iter()
            .zip(weights)
            .map(|(l, w)| w * (l - eta).max(0.0).powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

/// Derivative of the dual objective at an `eta` strictly below every loss.
fn slope_below_support(batch: &LossBatch, eta: f64, spec: &CressieReadSpec) -> f64 {
    let p = spec.beta_star;
    if p == 1.0 {
        return 1.0 - spec.c;
    }
    let (mut s_lower, mut s_p) = (0.0, 0.0);
    for (l, w) in batch.losses().iter().zip(batch.weights()) {
        let x = l - eta;
        s_lower += w * x.powf(p - 1.0);
        s_p += w * x.powf(p);
    }
    1.0 - spec.c * s_lower / s_p.powf((p - 1.0) / p)
}

/// Minimizes the dual objective over `eta` with Brent's method.
///
/// The search starts on `[min - (max - min + 1), max]`; for `beta* > 1` the
/// lower end is pushed further down while the objective is still decreasing
/// there, since the optimal `eta` can sit far below the smallest loss when the
/// radius is small.
pub fn minimize_eta(
    batch: &LossBatch,
    spec: &CressieReadSpec,
    tol: f64,
) -> Result<EtaSolution, RiskError> {
    if !(tol > 0.0) {
        return Err(RiskError::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let (min, max) = (batch.min(), batch.max());
    let mut lo = min - (max - min + 1.0);
    let hi = max;

    if spec.rho == 0.0 {
        // Radius zero: the DRO risk is the mean and every eta below the
        // support is optimal (exactly so for beta* = 1).
        return Ok(EtaSolution {
            eta_star: lo,
            risk: batch.mean(),
            iterations: 0,
            bracket: (lo, hi),
        });
    }

    if spec.beta_star > 1.0 {
        let mut expansions = 0;
        while slope_below_support(batch, lo, spec) > 0.0 {
            if expansions == MAX_BRACKET_EXPANSIONS {
                return Err(RiskError::Solver {
                    message: "could not bracket the dual minimizer".into(),
                    best_eta: lo,
                    best_risk: dual_objective(batch, lo, spec),
                });
            }
            lo = min - 2.0 * (min - lo);
            expansions += 1;
        }
    }

    match brent::minimize(
        |eta| dual_objective(batch, eta, spec),
        lo,
        hi,
        tol,
        MAX_ETA_ITER,
    ) {
        Ok(m) => {
            let (eta_star, risk) = polish_at_kinks(batch, spec, m.x, m.fx);
            Ok(EtaSolution {
                eta_star,
                risk,
                iterations: m.iterations,
                bracket: (lo, hi),
            })
        }
        Err(e) => Err(RiskError::Solver {
            message: format!("Brent did not converge in {MAX_ETA_ITER} iterations"),
            best_eta: e.best.x,
            best_risk: e.best.fx,
        }),
    }
}

// Brent only gets within `tol` of a minimizer that sits on a kink. For
// beta* = 1 every loss is a kink and some minimizer is a loss value; for
// beta* > 1 the only kink is at the max loss, where the objective equals it.
fn polish_at_kinks(batch: &LossBatch, spec: &CressieReadSpec, x: f64, fx: f64) -> (f64, f64) {
    if spec.beta_star != 1.0 {
        let max = batch.max();
        let slack = 4.0 * f64::EPSILON * (fx.abs() + 1.0);
        return if max < fx - slack {
            (max, max)
        } else {
            (x, fx)
        };
    }
    let below = batch
        .losses()
        .iter()
        .copied()
        .filter(|l| *l <= x)
        .fold(f64::NEG_INFINITY, f64::max);
    let above = batch
        .losses()
        .iter()
        .copied()
        .filter(|l| *l >= x)
        .fold(f64::INFINITY, f64::min);
    let slack = 4.0 * f64::EPSILON * (fx.abs() + 1.0);
    let mut best = (x, fx);
    for kink in [below, above] {
        if kink.is_finite() {
            let fk = dual_objective(batch, kink, spec);
            if fk < best.1 - slack {
                best = (kink, fk);
            }
        }
    }
    best
}

/// `inf { q : P(l > q) <= alpha }` under the batch's weighted empirical measure.
pub fn quantile(batch: &LossBatch, alpha: f64) -> Result<f64, RiskError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RiskError::Domain(format!(
            "quantile level must lie in (0, 1), got {alpha}"
        )));
    }
    let mut pairs: Vec<(f64, f64)> = batch
        .losses()
        .iter()
        .copied()
        .zip(batch.weights().iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Walk upward; the tail mass strictly above candidate q is what remains
    // after removing every atom <= q.
    let mut tail: f64 = 1.0;
    let mut i = 0;
    while i < pairs.len() {
        let q = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == q {
            tail -= pairs[i].1;
            i += 1;
        }
        if tail <= alpha + 1e-12 {
            return Ok(q);
        }
    }
    Ok(pairs[pairs.len() - 1].0)
}

/// Derivative of the (DORO) dual objective with respect to each loss at a
/// fixed `eta`, restricted to the samples in `kept`.
///
/// Discarded samples and samples with `l_i <= eta` get zero. Kept samples are
/// reweighted by `w_i / sum_kept w`, which is `1 / n_kept` for a uniform batch.
pub fn dual_sample_weights(
    batch: &LossBatch,
    eta: f64,
    spec: &CressieReadSpec,
    kept: &[usize],
) -> Result<Vec<f64>, RiskError> {
    if kept.is_empty() {
        return Err(RiskError::DegenerateBatch("no samples kept".into()));
    }
    let n = batch.len();
    if let Some(&i) = kept.iter().find(|&&i| i >= n) {
        return Err(RiskError::InvalidBatch(format!(
            "kept index {i} out of range for batch of {n}"
        )));
    }
    let losses = batch.losses();
    let weights = batch.weights();
    let kept_mass: f64 = kept.iter().map(|&i| weights[i]).sum();
    let mut out = vec![0.0; n];
    let p = spec.beta_star;

    if p == 1.0 {
        for &i in kept {
            if losses[i] > eta {
                out[i] = spec.c * weights[i] / kept_mass;
            }
        }
        return Ok(out);
    }

    let moment: f64 = kept
        .iter()
        .map(|&i| weights[i] / kept_mass * (losses[i] - eta).max(0.0).powf(p))
        .sum();
    if moment == 0.0 {
        return Ok(out);
    }
    let norm_factor = moment.powf(1.0 / p - 1.0);
    for &i in kept {
        let x = (losses[i] - eta).max(0.0);
        if x > 0.0 {
            out[i] = spec.c * weights[i] / kept_mass * x.powf(p - 1.0) * norm_factor;
        }
    }
    Ok(out)
}

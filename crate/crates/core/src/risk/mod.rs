//! Dual DRO and DORO objectives on finite loss batches.

mod batch;
pub mod brent;
mod doro;
mod dual;
mod spec;

use thiserror::Error;

pub use batch::LossBatch;
pub use doro::{discard_count, doro_batch_risk, largest_indices, DoroOutcome};
pub use dual::{
    dual_objective, dual_sample_weights, minimize_eta, quantile, EtaSolution, DEFAULT_ETA_TOL,
    MAX_ETA_ITER,
};
pub use spec::{f_beta, CressieReadSpec, Divergence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiskError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty loss batch")]
    EmptyBatch,
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),
    #[error("solver error: {message} (best eta {best_eta}, risk {best_risk})")]
    Solver {
        message: String,
        best_eta: f64,
        best_risk: f64,
    },
}

//! Exact and brute-force computations on finite discrete distributions, used
//! as ground truth for the dual solvers.

mod bounds;
mod closed_form;
mod distribution;
mod population;
mod primal;

use thiserror::Error;

use crate::risk::RiskError;

pub use bounds::{
    cvar_doro_excess_risk, moment_gap, tv_ball_dro_infimum, ExcessRiskCheck, MomentGap,
};
pub use closed_form::{
    chi2_variance_form, doro_risk_discrete, dro_risk, pmde_closed_forms, Chi2VarianceForm,
    JointAtom, Theta, TwoPointFamily, TwoPointRisks, TwoThetaPopulation,
};
pub use distribution::{
    cressie_read_divergence, empirical_moment, huber_mix, tv_distance, DiscreteDistribution,
};
pub use population::{radius_covers_domains, worst_case_risk, GroupedPopulation};
pub use primal::{
    cvar_primal_exact, default_resolution, dro_primal_bruteforce, MAX_BRUTEFORCE_SUPPORT,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("support of {support} atoms exceeds the brute-force limit of {max}")]
    SupportTooLarge { support: usize, max: usize },
    #[error(transparent)]
    Risk(#[from] RiskError),
}

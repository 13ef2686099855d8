//! Closed-form risks used as test oracles, and the exact DORO risk of a
//! discrete distribution.

use crate::risk::{minimize_eta, CressieReadSpec, DEFAULT_ETA_TOL};

use super::{DiscreteDistribution, OracleError};

/// Dual DRO risk of a discrete distribution.
pub fn dro_risk(p: &DiscreteDistribution, spec: &CressieReadSpec) -> Result<f64, OracleError> {
    Ok(minimize_eta(&p.to_batch(), spec, DEFAULT_ETA_TOL)?.risk)
}

/// The chi-square DRO risk in variance-regularized form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chi2VarianceForm {
    /// `rho <= Var / (2 E^2)`: risk `E + sqrt(2 rho Var)` attained at
    /// `eta* = E - sqrt(Var / (2 rho)) <= 0`.
    Closed { risk: f64, eta_star: f64 },
    /// Outside the threshold the optimal `eta` is non-negative and the dual
    /// has to be solved numerically.
    NonNegativeEta,
}

impl Chi2VarianceForm {
    pub fn is_applicable(&self) -> bool {
        matches!(self, Chi2VarianceForm::Closed { .. })
    }
}

pub fn chi2_variance_form(
    p: &DiscreteDistribution,
    rho: f64,
) -> Result<Chi2VarianceForm, OracleError> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(OracleError::Domain(format!(
            "rho must be positive and finite, got {rho}"
        )));
    }
    let mean = p.mean();
    let var = p.variance();
    if var == 0.0 || rho > var / (2.0 * mean * mean) {
        return Ok(Chi2VarianceForm::NonNegativeEta);
    }
    Ok(Chi2VarianceForm::Closed {
        risk: mean + (2.0 * rho * var).sqrt(),
        eta_star: mean - (var / (2.0 * rho)).sqrt(),
    })
}

/// Exact DORO risk: drop the upper `eps` tail of `P_train` (splitting the
/// boundary atom), renormalize, and take the DRO risk of what is left.
pub fn doro_risk_discrete(
    p_train: &DiscreteDistribution,
    spec: &CressieReadSpec,
    eps: f64,
) -> Result<f64, OracleError> {
    if !(0.0..0.5).contains(&eps) {
        return Err(OracleError::Domain(format!(
            "eps must lie in [0, 0.5), got {eps}"
        )));
    }
    if eps == 0.0 {
        return dro_risk(p_train, spec);
    }
    dro_risk(&p_train.truncate_upper(eps)?, spec)
}

/// The parameter choices of the two-point model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theta {
    Theta0,
    Theta1,
}

/// Two-parameter family: under `Theta0` the loss is 0 w.p. `1 - eps` and `m`
/// w.p. `eps`; under `Theta1` it is the constant `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointFamily {
    pub m: f64,
    pub delta: f64,
    pub eps: f64,
}

impl TwoPointFamily {
    pub fn new(m: f64, delta: f64, eps: f64) -> Result<Self, OracleError> {
        if !(m >= 0.0) || !(delta >= 0.0) || !m.is_finite() || !delta.is_finite() {
            return Err(OracleError::Domain(format!(
                "m and delta must be finite and non-negative, got {m}, {delta}"
            )));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(OracleError::Domain(format!(
                "eps must lie in [0, 1], got {eps}"
            )));
        }
        Ok(Self { m, delta, eps })
    }

    /// Loss distribution under `theta`.
    pub fn losses(&self, theta: Theta) -> DiscreteDistribution {
        let d = match theta {
            Theta::Theta0 => DiscreteDistribution::new([(0.0, 1.0 - self.eps), (self.m, self.eps)]),
            Theta::Theta1 => DiscreteDistribution::point(self.delta),
        };
        d.expect("parameters validated on construction")
    }

    /// The same family as a joint population over its two sample points.
    pub fn population(&self) -> TwoThetaPopulation {
        TwoThetaPopulation {
            atoms: vec![
                JointAtom {
                    loss0: 0.0,
                    loss1: self.delta,
                    mass: 1.0 - self.eps,
                },
                JointAtom {
                    loss0: self.m,
                    loss1: self.delta,
                    mass: self.eps,
                },
            ],
        }
    }
}

/// One sample point with its loss under each parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAtom {
    pub loss0: f64,
    pub loss1: f64,
    pub mass: f64,
}

/// A discrete population over sample points, each carrying a loss for both
/// parameters of a two-element parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoThetaPopulation {
    pub atoms: Vec<JointAtom>,
}

impl TwoThetaPopulation {
    pub fn loss_distribution(&self, theta: Theta) -> Result<DiscreteDistribution, OracleError> {
        DiscreteDistribution::new(self.atoms.iter().map(|a| {
            let l = match theta {
                Theta::Theta0 => a.loss0,
                Theta::Theta1 => a.loss1,
            };
            (l, a.mass)
        }))
    }

    /// `(1 - eps) self + eps other`.
    pub fn mix(&self, other: &TwoThetaPopulation, eps: f64) -> TwoThetaPopulation {
        let scaled = |atoms: &[JointAtom], w: f64| -> Vec<JointAtom> {
            atoms
                .iter()
                .map(|a| JointAtom {
                    mass: w * a.mass,
                    ..*a
                })
                .collect()
        };
        let mut atoms = scaled(&self.atoms, 1.0 - eps);
        atoms.extend(scaled(&other.atoms, eps));
        TwoThetaPopulation { atoms }
    }
}

/// Closed-form CVaR and chi-square risks of [`TwoPointFamily`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointRisks {
    pub cvar_theta0: f64,
    pub cvar_theta1: f64,
    pub chi2_theta0: f64,
    pub chi2_theta1: f64,
}

/// Valid when `alpha >= eps` and `1 + 2 rho <= 1 / eps`.
pub fn pmde_closed_forms(
    family: &TwoPointFamily,
    alpha: f64,
    rho: f64,
) -> Result<TwoPointRisks, OracleError> {
    let TwoPointFamily { m, delta, eps } = *family;
    if !(alpha > 0.0 && alpha <= 1.0) || !(rho >= 0.0) {
        return Err(OracleError::Domain(format!(
            "need alpha in (0, 1] and rho >= 0, got {alpha}, {rho}"
        )));
    }
    if alpha < eps || (1.0 + 2.0 * rho) * eps > 1.0 {
        return Err(OracleError::Precondition(format!(
            "closed forms need alpha >= eps and 1 + 2 rho <= 1 / eps \
             (alpha {alpha}, rho {rho}, eps {eps})"
        )));
    }
    Ok(TwoPointRisks {
        cvar_theta0: m * eps / alpha,
        cvar_theta1: delta,
        chi2_theta0: m * eps + m * (2.0 * rho * eps * (1.0 - eps)).sqrt(),
        chi2_theta1: delta,
    })
}

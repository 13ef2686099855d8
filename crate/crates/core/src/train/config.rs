use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::model::Architecture;
use crate::risk::{CressieReadSpec, Divergence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Erm,
    Cvar,
    Chi2Dro,
    CvarDoro,
    Chi2Doro,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Erm,
        Method::Cvar,
        Method::Chi2Dro,
        Method::CvarDoro,
        Method::Chi2Doro,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::Cvar => "cvar",
            Method::Chi2Dro => "chi2-dro",
            Method::CvarDoro => "cvar-doro",
            Method::Chi2Doro => "chi2-doro",
        }
    }

    pub fn divergence(self) -> Option<Divergence> {
        match self {
            Method::Erm => None,
            Method::Cvar | Method::CvarDoro => Some(Divergence::Cvar),
            Method::Chi2Dro | Method::Chi2Doro => Some(Divergence::ChiSquare),
        }
    }

    pub fn is_doro(self) -> bool {
        matches!(self, Method::CvarDoro | Method::Chi2Doro)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                TrainError::Config(format!(
                    "unknown method `{s}`; expected one of erm, cvar, chi2-dro, cvar-doro, chi2-doro"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub architecture: Architecture,
    /// Minimal group size; ignored for ERM.
    pub alpha: f64,
    /// Fraction discarded per batch; must be 0 unless the method is DORO.
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Erm,
            architecture: Architecture::Linear,
            alpha: 0.2,
            eps: 0.0,
            epochs: 20,
            batch_size: 128,
            learning_rate: 0.03,
            momentum: 0.9,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(0.0..0.5).contains(&self.eps) {
            return bad(format!("eps must lie in [0, 0.5), got {}", self.eps));
        }
        if self.eps != 0.0 && !self.method.is_doro() {
            return bad(format!("eps requires a doro method, got {}", self.method));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            ));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            ));
        }
        if let Architecture::Mlp { hidden: 0 } = self.architecture {
            return bad("hidden width must be positive".into());
        }
        Ok(())
    }

    /// Risk specification of the method, `None` for ERM.
    pub fn risk_spec(&self) -> Result<Option<CressieReadSpec>, TrainError> {
        match self.method.divergence() {
            None => Ok(None),
            Some(kind) => Ok(Some(CressieReadSpec::from_alpha(kind, self.alpha)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("dro".parse::<Method>().is_err());
    }

    #[test]
    fn eps_only_for_doro() {
        let cfg = TrainConfig {
            method: Method::Cvar,
            eps: 0.1,
            ..TrainConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("eps requires a doro method"));
        let ok = TrainConfig {
            method: Method::CvarDoro,
            ..cfg
        };
        ok.validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range() {
        let base = TrainConfig::default();
        for cfg in [
            TrainConfig {
                alpha: 0.0,
                ..base.clone()
            },
            TrainConfig {
                alpha: 1.5,
                ..base.clone()
            },
            TrainConfig {
                method: Method::Chi2Doro,
                eps: 0.5,
                ..base.clone()
            },
            TrainConfig {
                epochs: 0,
                ..base.clone()
            },
            TrainConfig {
                batch_size: 0,
                ..base.clone()
            },
            TrainConfig {
                learning_rate: 0.0,
                ..base.clone()
            },
            TrainConfig {
                momentum: 1.0,
                ..base.clone()
            },
            TrainConfig {
                weight_decay: -1.0,
                ..base.clone()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}

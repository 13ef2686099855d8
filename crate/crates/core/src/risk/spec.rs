//! Cressie-Read divergence parameters.
//!
//! A [`CressieReadSpec`] bundles everything the dual objective needs: the
//! divergence order `beta`, its conjugate exponent `beta_star`, the radius
//! `rho` and the dual scale `c = (1 + beta (beta - 1) rho)^(1/beta)`. The
//! usual way to obtain one is from the minimal group size `alpha` through
//! `rho = f_beta(1/alpha)`, which makes the DRO risk an upper bound on the
//! worst-case risk over every domain of mass at least `alpha`.

use serde::{Deserialize, Serialize};

use super::RiskError;

/// Which member of the Cressie-Read family to use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Divergence {
    /// `beta = infinity`; the DRO risk is the conditional value-at-risk.
    Cvar,
    /// `beta = 2`.
    ChiSquare,
    /// Any finite `beta > 1`. `CressieRead(2.0)` is equivalent to `ChiSquare`.
    CressieRead(f64),
}

impl Divergence {
    pub fn beta(self) -> f64 {
        match self {
            Divergence::Cvar => f64::INFINITY,
            Divergence::ChiSquare => 2.0,
            Divergence::CressieRead(beta) => beta,
        }
    }

    fn validate(self) -> Result<f64, RiskError> {
        let beta = self.beta();
        if beta.is_nan() || beta <= 1.0 {
            return Err(RiskError::Domain(format!("beta must exceed 1, got {beta}")));
        }
        Ok(beta)
    }
}

/// `f_beta(t) = (t^beta - beta t + beta - 1) / (beta (beta - 1))`.
///
/// Non-negative on `t >= 0` and zero only at `t = 1`.
pub fn f_beta(t: f64, beta: f64) -> Result<f64, RiskError> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(RiskError::Domain(format!(
            "f_beta needs a finite beta > 1, got {beta}"
        )));
    }
    if !(t >= 0.0) {
        return Err(RiskError::Domain(format!("f_beta needs t >= 0, got {t}")));
    }
    Ok((t.powf(beta) - beta * t + beta - 1.0) / (beta * (beta - 1.0)))
}

/// Parameters of one DRO / DORO objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CressieReadSpec {
    /// Divergence order; `f64::INFINITY` for CVaR.
    pub beta: f64,
    /// Conjugate exponent `beta / (beta - 1)`; 1 for CVaR.
    pub beta_star: f64,
    /// Divergence radius.
    pub rho: f64,
    /// Dual scale `c_beta(rho)`.
    pub c: f64,
    /// Minimal group size that generated `rho`.
    pub alpha: f64,
}

impl CressieReadSpec {
    /// Builds the spec with radius `f_beta(1/alpha)` (`-ln alpha` for CVaR).
    /// The ball then contains every domain of mass at least `alpha` only when
    /// [`radius_covers_domains`](crate::oracle::radius_covers_domains) holds.
    pub fn from_alpha(kind: Divergence, alpha: f64) -> Result<Self, RiskError> {
        let beta = kind.validate()?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(RiskError::Domain(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        if beta.is_infinite() {
            return Ok(Self {
                beta,
                beta_star: 1.0,
                rho: -alpha.ln(),
                c: 1.0 / alpha,
                alpha,
            });
        }
        let rho = if alpha == 1.0 {
            0.0
        } else {
            f_beta(1.0 / alpha, beta)?
        };
        Ok(Self {
            beta,
            beta_star: beta / (beta - 1.0),
            rho,
            c: scale(beta, rho),
            alpha,
        })
    }

    /// Builds the spec from an explicit radius; `alpha` is recovered by
    /// inverting `rho = f_beta(1/alpha)` on `1/alpha >= 1`.
    pub fn from_radius(kind: Divergence, rho: f64) -> Result<Self, RiskError> {
        let beta = kind.validate()?;
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(RiskError::Domain(format!(
                "rho must be finite and non-negative, got {rho}"
            )));
        }
        if beta.is_infinite() {
            let alpha = (-rho).exp();
            return Ok(Self {
                beta,
                beta_star: 1.0,
                rho,
                c: 1.0 / alpha,
                alpha,
            });
        }
        let alpha = 1.0 / invert_f_beta(rho, beta);
        Ok(Self {
            beta,
            beta_star: beta / (beta - 1.0),
            rho,
            c: scale(beta, rho),
            alpha,
        })
    }

    pub fn is_cvar(&self) -> bool {
        self.beta_star == 1.0
    }

    pub fn divergence(&self) -> Divergence {
        if self.beta.is_infinite() {
            Divergence::Cvar
        } else if self.beta == 2.0 {
            Divergence::ChiSquare
        } else {
            Divergence::CressieRead(self.beta)
        }
    }
}

fn scale(beta: f64, rho: f64) -> f64 {
    (1.0 + beta * (beta - 1.0) * rho).powf(1.0 / beta)
}

// f_beta is increasing on [1, inf), so bisection on t finds the unique root.
fn invert_f_beta(rho: f64, beta: f64) -> f64 {
    if rho == 0.0 {
        return 1.0;
    }
    let f = |t: f64| (t.powf(beta) - beta * t + beta - 1.0) / (beta * (beta - 1.0));
    let mut lo = 1.0;
    let mut hi = 2.0;
    while f(hi) < rho {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn f_beta_values() {
        assert_eq!(f_beta(1.0, 2.0).unwrap(), 0.0);
        assert_abs_diff_eq!(f_beta(3.0, 2.0).unwrap(), 2.0, epsilon = 1e-15);
        // alpha = 0.5 gives the chi-square radius 0.5 (1/alpha - 1)^2 = 0.5
        assert_abs_diff_eq!(f_beta(2.0, 2.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(f_beta(1.0, 1.0).is_err());
        assert!(f_beta(1.0, 0.5).is_err());
    }

    #[test]
    fn cvar_spec_table_values() {
        let s = CressieReadSpec::from_alpha(Divergence::Cvar, 0.1).unwrap();
        assert_eq!(s.beta_star, 1.0);
        assert_abs_diff_eq!(s.rho, std::f64::consts::LN_10, epsilon = 1e-12);
        assert_abs_diff_eq!(s.c, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn chi2_spec_table_values() {
        let s = CressieReadSpec::from_alpha(Divergence::ChiSquare, 0.5).unwrap();
        assert_eq!(s.beta_star, 2.0);
        assert_abs_diff_eq!(s.rho, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.c, std::f64::consts::SQRT_2, epsilon = 1e-12);

        let one = CressieReadSpec::from_alpha(Divergence::ChiSquare, 1.0).unwrap();
        assert_eq!(one.rho, 0.0);
        assert_eq!(one.c, 1.0);
    }

    #[test]
    fn general_beta_consistency() {
        for &alpha in &[0.05, 0.2, 0.5, 0.9] {
            for &beta in &[1.5, 2.0, 4.0, 10.0] {
                let s = CressieReadSpec::from_alpha(Divergence::CressieRead(beta), alpha).unwrap();
                assert_abs_diff_eq!(s.beta_star, beta / (beta - 1.0), epsilon = 1e-15);
                assert_abs_diff_eq!(s.rho, f_beta(1.0 / alpha, beta).unwrap(), epsilon = 1e-12);
                assert_abs_diff_eq!(
                    s.c,
                    (1.0 + beta * (beta - 1.0) * s.rho).powf(1.0 / beta),
                    epsilon = 1e-12
                );
                let back =
                    CressieReadSpec::from_radius(Divergence::CressieRead(beta), s.rho).unwrap();
                assert_abs_diff_eq!(back.alpha, alpha, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn chi_square_matches_general_beta_two() {
        let a = CressieReadSpec::from_alpha(Divergence::ChiSquare, 0.3).unwrap();
        let b = CressieReadSpec::from_alpha(Divergence::CressieRead(2.0), 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(CressieReadSpec::from_alpha(Divergence::Cvar, 0.0).is_err());
        assert!(CressieReadSpec::from_alpha(Divergence::Cvar, 1.5).is_err());
        assert!(CressieReadSpec::from_alpha(Divergence::ChiSquare, -0.1).is_err());
        assert!(CressieReadSpec::from_alpha(Divergence::CressieRead(1.0), 0.5).is_err());
    }

    #[test]
    fn from_radius_cvar() {
        let s = CressieReadSpec::from_radius(Divergence::Cvar, 0.5f64.ln().abs()).unwrap();
        assert_abs_diff_eq!(s.alpha, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.c, 2.0, epsilon = 1e-12);
        let chi = CressieReadSpec::from_radius(Divergence::ChiSquare, 0.125).unwrap();
        assert_abs_diff_eq!(chi.alpha, 2.0 / 3.0, epsilon = 1e-12);
    }
}

//! Executable forms of the robustness bounds: the TV-ball lower bound on the
//! DORO risk, the moment-gap inequality, and the CVaR-DORO excess-risk bound.

use crate::risk::{CressieReadSpec, Divergence};

use super::{
    cvar_primal_exact, doro_risk_discrete, dro_risk, empirical_moment, tv_distance,
    DiscreteDistribution, OracleError, Theta, TwoThetaPopulation,
};

/// `inf { R(P'') : TV(P, P'') <= radius }` over distributions supported on
/// `supp(P)` plus `floor_loss`, where `floor_loss` is at most every loss of P.
///
/// The DRO risk is monotone under first-order stochastic dominance, and moving
/// the top `radius` mass of `P` onto `floor_loss` yields the distribution that
/// every other member of the ball dominates, so this is the exact infimum.
pub fn tv_ball_dro_infimum(
    p: &DiscreteDistribution,
    radius: f64,
    floor_loss: f64,
    spec: &CressieReadSpec,
) -> Result<f64, OracleError> {
    if !(radius >= 0.0) {
        return Err(OracleError::Domain(format!(
            "radius must be non-negative, got {radius}"
        )));
    }
    if floor_loss > p.min_loss() {
        return Err(OracleError::Domain(format!(
            "floor loss {floor_loss} exceeds the smallest loss {}",
            p.min_loss()
        )));
    }
    let radius = radius.min(1.0);
    let mut remaining = radius;
    let mut atoms: Vec<(f64, f64)> = vec![(floor_loss, radius)];
    for (l, m) in p.atoms().collect::<Vec<_>>().into_iter().rev() {
        let cut = m.min(remaining);
        remaining -= cut;
        atoms.push((l, m - cut));
    }
    dro_risk(&DiscreteDistribution::new(atoms)?, spec)
}

/// Both sides of the moment-gap inequality
///
/// ```text
/// E_P[(l-eta)_+^b]^{1/b} - E_P'[(l-eta)_+^b]^{1/b}
///     <= s_2k TV^{1/b - 1/2k} b^{-1/2k} (2k / (2k - b))^{1/b},
/// ```
///
/// with `b = beta*` and `s_2k = E_P[(l-eta)_+^{2k}]^{1/2k}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentGap {
    pub lhs: f64,
    pub rhs: f64,
}

impl MomentGap {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

pub fn moment_gap(
    p: &DiscreteDistribution,
    p_prime: &DiscreteDistribution,
    eta: f64,
    beta_star: f64,
    k: u32,
) -> Result<MomentGap, OracleError> {
    let two_k = 2 * k;
    let order = f64::from(two_k);
    if !(beta_star >= 1.0 && beta_star < order) {
        return Err(OracleError::Domain(format!(
            "need 1 <= beta* < 2k, got beta* = {beta_star}, 2k = {two_k}"
        )));
    }
    let excess = |d: &DiscreteDistribution| -> Result<DiscreteDistribution, OracleError> {
        DiscreteDistribution::new(d.atoms().map(|(l, m)| ((l - eta).max(0.0), m)))
    };
    let (e, e_prime) = (excess(p)?, excess(p_prime)?);
    let norm = |d: &DiscreteDistribution| d.expect(|x| x.powf(beta_star)).powf(1.0 / beta_star);
    let s = empirical_moment(&e, two_k)?;
    let tv = tv_distance(p, p_prime);
    let rhs = s
        * tv.powf(1.0 / beta_star - 1.0 / order)
        * beta_star.powf(-1.0 / order)
        * (order / (order - beta_star)).powf(1.0 / beta_star);
    Ok(MomentGap {
        lhs: norm(&e) - norm(&e_prime),
        rhs,
    })
}

/// Outcome of the CVaR-DORO excess-risk check on a two-parameter problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessRiskCheck {
    /// DORO minimizer on the contaminated population; ties go to `Theta0`.
    pub theta_hat: Theta,
    /// `CVaR(theta_hat; P) - min_theta CVaR(theta; P)` on the clean population.
    pub gap: f64,
    /// `(1 + 1/(2k-1)) sigma_2k (eps/(1-eps))^{1 - 1/2k} / alpha`.
    pub bound: f64,
}

impl ExcessRiskCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.gap <= self.bound + tol
    }
}

/// Trains CVaR-DORO over `{Theta0, Theta1}` on `(1 - eps) clean + eps outlier`
/// and measures its excess CVaR on `clean` against the bound, with `sigma_2k`
/// the `2k`-th moment of the selected parameter's clean loss.
pub fn cvar_doro_excess_risk(
    clean: &TwoThetaPopulation,
    outlier: &TwoThetaPopulation,
    eps: f64,
    alpha: f64,
    k: u32,
) -> Result<ExcessRiskCheck, OracleError> {
    if k == 0 {
        return Err(OracleError::Domain("k must be positive".into()));
    }
    let spec = CressieReadSpec::from_alpha(Divergence::Cvar, alpha)?;
    let train = clean.mix(outlier, eps);
    let doro0 = doro_risk_discrete(&train.loss_distribution(Theta::Theta0)?, &spec, eps)?;
    let doro1 = doro_risk_discrete(&train.loss_distribution(Theta::Theta1)?, &spec, eps)?;
    let theta_hat = if doro1 < doro0 {
        Theta::Theta1
    } else {
        Theta::Theta0
    };

    let clean0 = cvar_primal_exact(&clean.loss_distribution(Theta::Theta0)?, alpha)?;
    let clean1 = cvar_primal_exact(&clean.loss_distribution(Theta::Theta1)?, alpha)?;
    let selected = match theta_hat {
        Theta::Theta0 => clean0,
        Theta::Theta1 => clean1,
    };
    let sigma = empirical_moment(&clean.loss_distribution(theta_hat)?, 2 * k)?;
    let kf = f64::from(k);
    let bound =
        (1.0 + 1.0 / (2.0 * kf - 1.0)) * sigma * (eps / (1.0 - eps)).powf(1.0 - 1.0 / (2.0 * kf))
            / alpha;
    Ok(ExcessRiskCheck {
        theta_hat,
        gap: selected - clean0.min(clean1),
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{huber_mix, JointAtom, TwoPointFamily};
    use approx::assert_abs_diff_eq;

    #[test]
    fn tv_infimum_moves_top_mass_to_floor() {
        let p = DiscreteDistribution::uniform(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let cvar = CressieReadSpec::from_alpha(Divergence::Cvar, 0.5).unwrap();
        // P'' = {0: .25, 1: .25, 2: .25, 3: .25}, worst half mean = 2.5
        let r = tv_ball_dro_infimum(&p, 0.25, 0.0, &cvar).unwrap();
        assert_abs_diff_eq!(r, 2.5, epsilon = 1e-9);
        assert_abs_diff_eq!(
            tv_ball_dro_infimum(&p, 0.0, 0.0, &cvar).unwrap(),
            3.5,
            epsilon = 1e-9
        );
        assert!(tv_ball_dro_infimum(&p, 0.1, 2.0, &cvar).is_err());
    }

    #[test]
    fn doro_dominates_tv_infimum_on_example() {
        let p = DiscreteDistribution::uniform(&[0.5, 1.0, 2.0]).unwrap();
        let outlier = DiscreteDistribution::point(50.0).unwrap();
        let eps = 0.1;
        let train = huber_mix(&p, &outlier, eps).unwrap();
        for kind in [Divergence::Cvar, Divergence::ChiSquare] {
            let spec = CressieReadSpec::from_alpha(kind, 0.3).unwrap();
            let doro = doro_risk_discrete(&train, &spec, eps).unwrap();
            let inf = tv_ball_dro_infimum(&p, eps / (1.0 - eps), 0.5, &spec).unwrap();
            assert!(doro >= inf - 1e-9, "{kind:?}: {doro} < {inf}");
        }
    }

    #[test]
    fn moment_gap_example() {
        let p = DiscreteDistribution::uniform(&[0.0, 4.0]).unwrap();
        let q = DiscreteDistribution::new([(0.0, 0.9), (4.0, 0.1)]).unwrap();
        // lhs = 2 - 0.4; s_2 = sqrt(8); rhs = sqrt(8) * 0.4^{1/2} * 2
        let g = moment_gap(&p, &q, 0.0, 1.0, 1).unwrap();
        assert_abs_diff_eq!(g.lhs, 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(g.rhs, 8f64.sqrt() * 0.4f64.sqrt() * 2.0, epsilon = 1e-12);
        assert!(g.holds(0.0));
        assert!(moment_gap(&p, &q, 0.0, 2.0, 1).is_err());
    }

    #[test]
    fn excess_risk_on_two_point_family() {
        let clean = TwoPointFamily::new(10.0, 1.0, 0.05).unwrap().population();
        let outlier = TwoThetaPopulation {
            atoms: vec![JointAtom {
                loss0: 0.0,
                loss1: 30.0,
                mass: 1.0,
            }],
        };
        let check = cvar_doro_excess_risk(&clean, &outlier, 0.1, 0.2, 1).unwrap();
        assert!(check.holds(1e-9), "{check:?}");

        let none = cvar_doro_excess_risk(&clean, &outlier, 0.0, 0.2, 1).unwrap();
        assert_eq!(none.bound, 0.0);
        assert_abs_diff_eq!(none.gap, 0.0, epsilon = 1e-9);
    }
}

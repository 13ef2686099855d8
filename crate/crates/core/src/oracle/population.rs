use super::{DiscreteDistribution, OracleError};
use crate::risk::{f_beta, CressieReadSpec};

/// Per-sample losses and masses with `K` possibly overlapping domains.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedPopulation {
    losses: Vec<f64>,
    masses: Vec<f64>,
    domains: Vec<Vec<bool>>,
}

impl GroupedPopulation {
    pub fn new(
        losses: Vec<f64>,
        masses: Vec<f64>,
        domains: Vec<Vec<bool>>,
    ) -> Result<Self, OracleError> {
        let n = losses.len();
        if n == 0 || masses.len() != n {
            return Err(OracleError::InvalidDistribution(format!(
                "{n} losses but {} masses",
                masses.len()
            )));
        }
        // Reuse the distribution checks on losses and masses.
        DiscreteDistribution::new(losses.iter().copied().zip(masses.iter().copied()))?;
        if domains.is_empty() {
            return Err(OracleError::Domain(
                "at least one domain is required".into(),
            ));
        }
        for (k, d) in domains.iter().enumerate() {
            if d.len() != n {
                return Err(OracleError::Domain(format!(
                    "domain {k} has {} entries for {n} samples",
                    d.len()
                )));
            }
            let mass: f64 = d
                .iter()
                .zip(&masses)
                .filter(|(m, _)| **m)
                .map(|(_, w)| w)
                .sum();
            if !(mass > 0.0) {
                return Err(OracleError::Domain(format!("empty domain {k}")));
            }
        }
        Ok(Self {
            losses,
            masses,
            domains,
        })
    }

    /// Uniform masses `1/n`.
    pub fn uniform(losses: Vec<f64>, domains: Vec<Vec<bool>>) -> Result<Self, OracleError> {
        let n = losses.len().max(1);
        let masses = vec![1.0 / n as f64; losses.len()];
        Self::new(losses, masses, domains)
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn domains(&self) -> &[Vec<bool>] {
        &self.domains
    }

    pub fn domain_mass(&self, k: usize) -> f64 {
        self.domains[k]
            .iter()
            .zip(&self.masses)
            .filter(|(m, _)| **m)
            .map(|(_, w)| w)
            .sum()
    }

    /// Minimal group size `alpha = min_k P(D_k)`, clamped into `(0, 1]`.
    pub fn min_domain_mass(&self) -> f64 {
        (0..self.domains.len())
            .map(|k| self.domain_mass(k))
            .fold(f64::INFINITY, f64::min)
            .min(1.0)
    }

    /// Expected loss conditioned on domain `k`.
    pub fn domain_risk(&self, k: usize) -> f64 {
        let weighted: f64 = self.domains[k]
            .iter()
            .zip(self.losses.iter().zip(&self.masses))
            .filter(|(m, _)| **m)
            .map(|(_, (l, w))| l * w)
            .sum();
        weighted / self.domain_mass(k)
    }

    /// The population's loss distribution, ignoring domains.
    pub fn distribution(&self) -> DiscreteDistribution {
        DiscreteDistribution::new(self.losses.iter().copied().zip(self.masses.iter().copied()))
            .expect("validated on construction")
    }
}

/// Largest domain-conditional risk and the domain achieving it; ties go to
/// the smallest domain index.
pub fn worst_case_risk(pop: &GroupedPopulation) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..pop.domains().len() {
        let r = pop.domain_risk(k);
        if r > best.0 {
            best = (r, k);
        }
    }
    best
}

/// Whether the divergence ball of `spec` contains every `Q` with
/// `dQ/dP <= 1/alpha`, in which case `worst-case risk <= DRO risk` holds for
/// any population whose domains all have mass at least `spec.alpha`.
///
/// The largest divergence over that box is `alpha f(1/alpha) + (1 - alpha)
/// f(0)`, attained by putting density `1/alpha` on an `alpha`-mass set and 0
/// elsewhere, so with `rho = f(1/alpha)` this reduces to `f(1/alpha) >= f(0) =
/// 1/beta`. That holds for every `alpha <= 1/2` when `beta >= 2`, but not for
/// larger `alpha`.
pub fn radius_covers_domains(spec: &CressieReadSpec) -> bool {
    // For CVaR the ball is exactly that box.
    if spec.beta.is_infinite() {
        return true;
    }
    let (a, b) = (spec.alpha, spec.beta);
    let f = |t: f64| f_beta(t, b).expect("beta is finite and above 1");
    a * f(1.0 / a) + (1.0 - a) * f(0.0) <= spec.rho * (1.0 + 1e-12) + 1e-15
}

//! Seeded self-checks of the dual solvers against the discrete oracles.
//!
//! Every check draws its own instances from a generator seeded by the run
//! seed and the check's position, so a report depends only on
//! `(trials, seed)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{Architecture, ModelParams};
use crate::oracle::{
    cvar_primal_exact, default_resolution, dro_primal_bruteforce, dro_risk, pmde_closed_forms,
    radius_covers_domains, worst_case_risk, DiscreteDistribution, GroupedPopulation, OracleError,
    Theta, TwoPointFamily,
};
use crate::risk::{
    doro_batch_risk, minimize_eta, CressieReadSpec, Divergence, LossBatch, DEFAULT_ETA_TOL,
};
use crate::train::RiskObjective;

pub const DEFAULT_TRIALS: usize = 200;

/// Deliberate corruption used to exercise the failure path. It affects the
/// checks that compare a dual solver with an independent oracle.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// The dual solvers see twice the intended radius.
    InflateRadius,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub trials: usize,
    pub seed: u64,
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            seed: 0,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Largest observed error or violation.
    pub max_error: f64,
    pub tolerance: f64,
    /// The first failing instance.
    pub counterexample: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .checks
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(5)
            .max(5);
        writeln!(
            f,
            "{:<width$}  {:>6}  {:>8}  {:>10}  {:>9}  result",
            "check", "trials", "failures", "max error", "tolerance"
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<width$}  {:>6}  {:>8}  {:>10.3e}  {:>9.0e}  {}",
                c.name,
                c.trials,
                c.failures,
                c.max_error,
                c.tolerance,
                if c.passed() { "pass" } else { "FAIL" }
            )?;
        }
        for c in &self.checks {
            if let Some(ce) = &c.counterexample {
                writeln!(f, "\ncounterexample for `{}`:\n{ce}", c.name)?;
            }
        }
        Ok(())
    }
}

struct Tally {
    result: CheckResult,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            result: CheckResult {
                name,
                trials: 0,
                failures: 0,
                max_error: 0.0,
                tolerance,
                counterexample: None,
            },
        }
    }

    /// Records one trial; `instance` is only rendered on the first failure.
    fn record(&mut self, error: f64, instance: impl FnOnce() -> String) {
        let r = &mut self.result;
        r.trials += 1;
        // NaN counts as a failure.
        let ok = error <= r.tolerance;
        if error > r.max_error || error.is_nan() {
            r.max_error = error;
        }
        if !ok {
            r.failures += 1;
            if r.counterexample.is_none() {
                r.counterexample = Some(instance());
            }
        }
    }

    fn record_error(&mut self, what: impl fmt::Display, instance: impl FnOnce() -> String) {
        self.record(f64::NAN, || format!("{}\nerror: {what}", instance()));
    }
}

fn inflate(spec: &CressieReadSpec, fault: Option<Fault>) -> CressieReadSpec {
    match fault {
        Some(Fault::InflateRadius) => {
            CressieReadSpec::from_radius(spec.divergence(), 2.0 * spec.rho).unwrap_or(*spec)
        }
        None => *spec,
    }
}

fn random_distribution(rng: &mut ChaCha8Rng, max_support: usize) -> DiscreteDistribution {
    let k = rng.random_range(1..=max_support);
    let masses: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = masses.iter().sum();
    DiscreteDistribution::new((0..k).map(|i| (rng.random_range(0.0..10.0), masses[i] / total)))
        .expect("losses and masses are valid")
}

fn describe(p: &DiscreteDistribution) -> String {
    format!("atoms (loss, mass): {:?}", p.atoms().collect::<Vec<_>>())
}

fn cvar_dual_primal(rng: &mut ChaCha8Rng, trials: usize, fault: Option<Fault>) -> CheckResult {
    let mut t = Tally::new("cvar dual vs exact primal", 1e-4);
    for _ in 0..trials {
        let p = random_distribution(rng, 6);
        let alpha = rng.random_range(0.02..=1.0);
        let spec = CressieReadSpec::from_alpha(Divergence::Cvar, alpha).expect("alpha in range");
        let dual = minimize_eta(&p.to_batch(), &inflate(&spec, fault), DEFAULT_ETA_TOL);
        match (dual, cvar_primal_exact(&p, alpha)) {
            (Ok(d), Ok(primal)) => t.record((d.risk - primal).abs(), || {
                format!(
                    "{}\nalpha = {alpha:?}\ndual = {:?}\nprimal = {primal:?}",
                    describe(&p),
                    d.risk
                )
            }),
            (Err(e), _) => t.record_error(e, || describe(&p)),
            (_, Err(e)) => t.record_error(e, || describe(&p)),
        }
    }
    t.result
}

fn chi2_dual_primal(rng: &mut ChaCha8Rng, trials: usize, fault: Option<Fault>) -> CheckResult {
    let mut t = Tally::new("chi2 dual vs brute-force primal", 1e-3);
    for _ in 0..trials {
        let p = random_distribution(rng, 6);
        let alpha = rng.random_range(0.05..=1.0);
        let spec =
            CressieReadSpec::from_alpha(Divergence::ChiSquare, alpha).expect("alpha in range");
        let dual = minimize_eta(&p.to_batch(), &inflate(&spec, fault), DEFAULT_ETA_TOL);
        let primal = dro_primal_bruteforce(&p, &spec, default_resolution(p.support_size()));
        match (dual, primal) {
            (Ok(d), Ok(primal)) => t.record((d.risk - primal).abs(), || {
                format!(
                    "{}\nrho = {:?}\ndual = {:?}\nprimal = {primal:?}",
                    describe(&p),
                    spec.rho,
                    d.risk
                )
            }),
            (Err(e), _) => t.record_error(e, || describe(&p)),
            (_, Err(e)) => t.record_error(e, || describe(&p)),
        }
    }
    t.result
}

fn random_population(rng: &mut ChaCha8Rng) -> GroupedPopulation {
    let n = rng.random_range(2..=8);
    let k = rng.random_range(1..=4);
    let losses: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let masses: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = masses.iter().sum();
    let domains = (0..k)
        .map(|_| {
            let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
            mask[rng.random_range(0..n)] = true;
            mask
        })
        .collect();
    GroupedPopulation::new(losses, masses.iter().map(|m| m / total).collect(), domains)
        .expect("every domain is non-empty")
}

fn describe_population(pop: &GroupedPopulation) -> String {
    let dist = pop.distribution();
    format!(
        "losses: {:?}\nmasses: {:?}\ndomains: {:?}",
        pop.losses(),
        dist.masses(),
        pop.domains()
    )
}

/// `worst-case <= CVaR <= chi2-DRO` at `alpha = min domain mass`. The
/// second inequality is only asserted where the chi-square radius covers
/// the CVaR ball, which is `alpha <= 1/2`.
fn ordering(rng: &mut ChaCha8Rng, trials: usize, fault: Option<Fault>) -> CheckResult {
    let mut t = Tally::new("worst-case <= cvar <= chi2", 1e-6);
    for _ in 0..trials {
        let pop = random_population(rng);
        let alpha = pop.min_domain_mass();
        let p = pop.distribution();
        let (r_max, _) = worst_case_risk(&pop);
        let spec =
            CressieReadSpec::from_alpha(Divergence::ChiSquare, alpha).expect("alpha in range");
        let chi2 = dro_risk(&p, &inflate(&spec, fault));
        match (cvar_primal_exact(&p, alpha), chi2) {
            (Ok(cvar), Ok(chi2)) => {
                let upper = if radius_covers_domains(&spec) {
                    cvar - chi2
                } else {
                    0.0
                };
                let violation = (r_max - cvar).max(upper).max(0.0);
                t.record(violation, || {
                    format!(
                        "{}\nalpha = {alpha:?}\nworst-case = {r_max:?}\ncvar = {cvar:?}\nchi2 = {chi2:?}",
                        describe_population(&pop)
                    )
                })
            }
            (Err(e), _) | (_, Err(e)) => t.record_error(e, || describe_population(&pop)),
        }
    }
    t.result
}

/// `worst-case <= DRO` with `rho = f_beta(1/alpha)` for beta in {2, 4, inf},
/// on the instances where that radius covers every domain.
fn generalized_bound(rng: &mut ChaCha8Rng, trials: usize, fault: Option<Fault>) -> CheckResult {
    let mut t = Tally::new("worst-case <= dro (beta 2, 4, inf)", 1e-6);
    for _ in 0..trials {
        let pop = random_population(rng);
        let alpha = pop.min_domain_mass();
        let p = pop.distribution();
        let (r_max, _) = worst_case_risk(&pop);
        for kind in [
            Divergence::ChiSquare,
            Divergence::CressieRead(4.0),
            Divergence::Cvar,
        ] {
            let spec = CressieReadSpec::from_alpha(kind, alpha).expect("alpha in range");
            if !radius_covers_domains(&spec) {
                continue;
            }
            match dro_risk(&p, &inflate(&spec, fault)) {
                Ok(r) => t.record((r_max - r).max(0.0), || {
                    format!(
                        "{}\nalpha = {alpha:?}\nbeta = {:?}\nworst-case = {r_max:?}\ndro = {r:?}",
                        describe_population(&pop),
                        kind.beta()
                    )
                }),
                Err(e) => t.record_error(e, || describe_population(&pop)),
            }
        }
    }
    t.result
}

/// Draws `(M, Delta, eps, alpha, rho)` with `alpha >= eps` and
/// `1 + 2 rho <= 1 / eps`.
fn random_family(rng: &mut ChaCha8Rng) -> (TwoPointFamily, f64, f64) {
    let eps = rng.random_range(0.01..0.45);
    let family = TwoPointFamily::new(
        rng.random_range(0.0..20.0),
        rng.random_range(0.0..10.0),
        eps,
    )
    .expect("parameters in range");
    let alpha = rng.random_range(eps..=1.0);
    let rho = rng.random_range(0.0..=0.5 * (1.0 / eps - 1.0));
    (family, alpha, rho)
}

fn closed_forms(rng: &mut ChaCha8Rng, trials: usize) -> [CheckResult; 2] {
    let mut cvar = Tally::new("closed-form cvar vs exact primal", 1e-8);
    let mut chi2 = Tally::new("closed-form chi2 vs brute-force primal", 1e-3);
    for _ in 0..trials {
        let (family, alpha, rho) = random_family(rng);
        let instance = || format!("{family:?}\nalpha = {alpha:?}\nrho = {rho:?}");
        let forms = match pmde_closed_forms(&family, alpha, rho) {
            Ok(f) => f,
            Err(e) => {
                cvar.record_error(&e, instance);
                chi2.record_error(e, instance);
                continue;
            }
        };
        let p0 = family.losses(Theta::Theta0);
        let p1 = family.losses(Theta::Theta1);
        match (cvar_primal_exact(&p0, alpha), cvar_primal_exact(&p1, alpha)) {
            (Ok(a), Ok(b)) => {
                let err = (forms.cvar_theta0 - a)
                    .abs()
                    .max((forms.cvar_theta1 - b).abs());
                cvar.record(err, || {
                    format!(
                        "{}\nclosed form = {:?}\nprimal = ({a:?}, {b:?})",
                        instance(),
                        forms
                    )
                })
            }
            (Err(e), _) | (_, Err(e)) => cvar.record_error(e, instance),
        }
        let primal = CressieReadSpec::from_radius(Divergence::ChiSquare, rho)
            .map_err(OracleError::from)
            .and_then(|s| {
                Ok((
                    dro_primal_bruteforce(&p0, &s, default_resolution(p0.support_size()))?,
                    dro_primal_bruteforce(&p1, &s, default_resolution(1))?,
                ))
            });
        match primal {
            Ok((a, b)) => {
                let err = (forms.chi2_theta0 - a)
                    .abs()
                    .max((forms.chi2_theta1 - b).abs());
                chi2.record(err, || {
                    format!(
                        "{}\nclosed form = {:?}\nprimal = ({a:?}, {b:?})",
                        instance(),
                        forms
                    )
                })
            }
            Err(e) => chi2.record_error(e, instance),
        }
    }
    [cvar.result, chi2.result]
}

fn random_spec(rng: &mut ChaCha8Rng) -> CressieReadSpec {
    let kind = match rng.random_range(0..3) {
        0 => Divergence::Cvar,
        1 => Divergence::ChiSquare,
        _ => Divergence::CressieRead(4.0),
    };
    CressieReadSpec::from_alpha(kind, rng.random_range(0.05..=1.0)).expect("alpha in range")
}

/// DORO risk is non-increasing in eps and equals the DRO risk at eps = 0.
fn doro_monotone(rng: &mut ChaCha8Rng, trials: usize) -> CheckResult {
    let mut t = Tally::new("doro risk non-increasing in eps", 1e-9);
    let grid: Vec<f64> = (0..10).map(|i| 0.05 * i as f64).collect();
    for _ in 0..trials {
        let n = rng.random_range(2..=40);
        let losses: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let spec = random_spec(rng);
        let batch = LossBatch::uniform(losses.clone()).expect("finite non-negative losses");
        let instance = || format!("losses: {losses:?}\nspec: {spec:?}");
        let risks: Result<Vec<f64>, _> = grid
            .iter()
            .map(|&eps| doro_batch_risk(&batch, &spec, eps, DEFAULT_ETA_TOL).map(|o| o.risk))
            .collect();
        let dro = minimize_eta(&batch, &spec, DEFAULT_ETA_TOL).map(|s| s.risk);
        match (risks, dro) {
            (Ok(r), Ok(dro)) => {
                let rise = r
                    .windows(2)
                    .map(|w| (w[1] - w[0]) / w[0].abs().max(1.0))
                    .fold(0.0, f64::max);
                let err = if r[0].to_bits() == dro.to_bits() {
                    rise
                } else {
                    f64::INFINITY
                };
                t.record(err, || {
                    format!(
                        "{}\neps grid: {grid:?}\nrisks: {r:?}\ndro: {dro:?}",
                        instance()
                    )
                })
            }
            (Err(e), _) | (_, Err(e)) => t.record_error(e, instance),
        }
    }
    t.result
}

/// Finite differences of the minimized objective (eta re-solved at every
/// probe) against the dual-weight gradient, on smooth divergences.
fn danskin(rng: &mut ChaCha8Rng, trials: usize) -> CheckResult {
    let mut t = Tally::new("danskin gradient of minimized risk", 1e-3);
    for _ in 0..trials {
        let (n, d) = (rng.random_range(10..=40), rng.random_range(1..=4));
        let params = ModelParams::init(Architecture::Linear, d, rng).expect("positive dimension");
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| 2.0 * Distribution::<f64>::sample(&StandardNormal, rng))
                    .collect()
            })
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1)).collect();
        let kind = if rng.random_bool(0.5) {
            Divergence::ChiSquare
        } else {
            Divergence::CressieRead(4.0)
        };
        let spec =
            CressieReadSpec::from_alpha(kind, rng.random_range(0.1..=1.0)).expect("alpha in range");
        let eps = [0.0, 0.05, 0.1, 0.2][rng.random_range(0..4)];
        let instance = || {
            format!(
                "params: {:?}\nrows: {rows:?}\nlabels: {labels:?}\nspec: {spec:?}\neps: {eps:?}",
                params.to_flat()
            )
        };
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let result = RiskObjective::doro(spec, eps)
            .and_then(|obj| obj.danskin_check(&params, &refs, &labels, 1e-5));
        match result {
            Ok(err) => t.record(err, instance),
            Err(e) => t.record_error(e, instance),
        }
    }
    t.result
}

pub fn run(options: &VerifyOptions) -> VerifyReport {
    let (trials, fault) = (options.trials, options.fault);
    let rng = |i: u64| {
        ChaCha8Rng::seed_from_u64(
            options
                .seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(i),
        )
    };
    // Brute force and Danskin are the slow ones; they run on a fraction.
    let slow = trials.div_ceil(4);
    let mut checks = vec![
        cvar_dual_primal(&mut rng(0), trials, fault),
        chi2_dual_primal(&mut rng(1), trials, fault),
        ordering(&mut rng(2), trials, fault),
        generalized_bound(&mut rng(3), trials, fault),
    ];
    checks.extend(closed_forms(&mut rng(4), slow));
    checks.push(doro_monotone(&mut rng(5), trials));
    checks.push(danskin(&mut rng(6), slow));
    VerifyReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes_and_is_deterministic() {
        let opts = VerifyOptions {
            trials: 12,
            seed: 3,
            fault: None,
        };
        let a = run(&opts);
        assert!(a.passed(), "{a}");
        assert_eq!(a.to_string(), run(&opts).to_string());
    }

    #[test]
    fn fault_produces_counterexamples() {
        let opts = VerifyOptions {
            trials: 8,
            seed: 0,
            fault: Some(Fault::InflateRadius),
        };
        let report = run(&opts);
        assert!(!report.passed());
        let cvar = &report.checks[0];
        assert!(cvar.failures > 0);
        assert!(cvar
            .counterexample
            .as_ref()
            .unwrap()
            .contains("atoms (loss, mass)"));
        assert!(report.to_string().contains("FAIL"));
    }
}

//! The discrete oracles side by side with the dual solver: exact CVaR,
//! brute-force primal search, worst-domain risk on overlapping domains, and
//! whether a radius is large enough to cover every domain.

use doro::oracle::{
    cvar_primal_exact, default_resolution, dro_primal_bruteforce, dro_risk, radius_covers_domains,
    worst_case_risk, DiscreteDistribution, GroupedPopulation,
};
use doro::risk::{CressieReadSpec, Divergence};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = DiscreteDistribution::new([(0.0, 0.4), (1.0, 0.3), (3.0, 0.2), (8.0, 0.1)])?;
    for kind in [
        Divergence::Cvar,
        Divergence::ChiSquare,
        Divergence::CressieRead(4.0),
    ] {
        let spec = CressieReadSpec::from_alpha(kind, 0.25)?;
        let primal = dro_primal_bruteforce(&p, &spec, default_resolution(p.support_size()))?;
        println!(
            "{kind:?}: dual {:.6} primal {primal:.6}",
            dro_risk(&p, &spec)?
        );
    }
    println!("exact cvar(0.25) {:.6}", cvar_primal_exact(&p, 0.25)?);

    // Two overlapping domains; the smaller has mass 0.65.
    let pop = GroupedPopulation::new(
        vec![0.0, 1.0],
        vec![0.35, 0.65],
        vec![vec![true, true], vec![false, true]],
    )?;
    let alpha = pop.min_domain_mass();
    let (r_max, domain) = worst_case_risk(&pop);
    println!("worst domain {domain} with risk {r_max}, alpha {alpha}");
    for kind in [Divergence::Cvar, Divergence::ChiSquare] {
        let spec = CressieReadSpec::from_alpha(kind, alpha)?;
        println!(
            "{kind:?}: dro {:.4}, radius covers every domain: {}",
            dro_risk(&pop.distribution(), &spec)?,
            radius_covers_domains(&spec)
        );
    }
    Ok(())
}

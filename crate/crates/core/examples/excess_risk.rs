//! Excess CVaR of the DORO minimizer on a two-parameter problem, compared
//! with its moment bound as the contamination level grows.

use doro::oracle::{cvar_doro_excess_risk, JointAtom, TwoPointFamily, TwoThetaPopulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clean = TwoPointFamily::new(10.0, 1.0, 0.05)?.population();
    // Outliers that look harmless under theta0 and terrible under theta1.
    let outlier = TwoThetaPopulation {
        atoms: vec![JointAtom {
            loss0: 0.0,
            loss1: 30.0,
            mass: 1.0,
        }],
    };
    for eps in [0.0, 0.02, 0.05, 0.1, 0.2] {
        let c = cvar_doro_excess_risk(&clean, &outlier, eps, 0.2, 1)?;
        println!(
            "eps {eps:<4}: selected {:?}, gap {:.4} <= bound {:.4}",
            c.theta_hat, c.gap, c.bound
        );
    }
    Ok(())
}

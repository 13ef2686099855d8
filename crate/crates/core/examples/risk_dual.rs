//! Dual form of the Cressie-Read DRO risk on a small loss batch: the optimal
//! eta, the risk, and the per-sample weights of the worst-case distribution.

use doro::risk::{
    dual_sample_weights, minimize_eta, CressieReadSpec, Divergence, LossBatch, DEFAULT_ETA_TOL,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let batch = LossBatch::uniform(vec![0.1, 0.4, 0.3, 2.5, 0.2, 1.1, 0.05, 0.7])?;
    println!("mean loss {:.4}, max loss {:.4}", batch.mean(), batch.max());
    let all: Vec<usize> = (0..batch.len()).collect();
    for kind in [
        Divergence::Cvar,
        Divergence::ChiSquare,
        Divergence::CressieRead(4.0),
    ] {
        for alpha in [0.5, 0.2] {
            let spec = CressieReadSpec::from_alpha(kind, alpha)?;
            let sol = minimize_eta(&batch, &spec, DEFAULT_ETA_TOL)?;
            let w = dual_sample_weights(&batch, sol.eta_star, &spec, &all)?;
            let w: Vec<String> = w.iter().map(|x| format!("{x:.3}")).collect();
            println!(
                "{kind:?} alpha {alpha}: risk {:.4} eta* {:.4} ({} iterations) weights [{}]",
                sol.risk,
                sol.eta_star,
                sol.iterations,
                w.join(", ")
            );
        }
    }
    Ok(())
}

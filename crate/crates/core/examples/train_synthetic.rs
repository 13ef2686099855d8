//! Trains every method on the synthetic two-group task with 10% label-flip
//! outliers and reports oracle-selected and final test accuracies.

use doro::data::SyntheticSpec;
use doro::train::{
    run_experiment, stability_stat, ExperimentSplits, Method, SelectionParams, SelectionStrategy,
    TrainConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let splits = ExperimentSplits::synthetic(&SyntheticSpec {
        outlier_fraction: 0.1,
        seed: 0,
        ..SyntheticSpec::default()
    })?;
    println!(
        "train {} / validation {} / test {}",
        splits.train.len(),
        splits.validation.len(),
        splits.test.len()
    );
    for method in Method::ALL {
        let config = TrainConfig {
            method,
            alpha: 0.1,
            eps: if method.is_doro() { 0.12 } else { 0.0 },
            ..TrainConfig::default()
        };
        let (run, summary) = run_experiment(&splits, &config, SelectionParams::default())?;
        let oracle = summary
            .selected(SelectionStrategy::Oracle)
            .expect("oracle selection is always run");
        println!(
            "{:<10} oracle epoch {:>2}: avg {:.3} worst {:.3} | final worst {:.3} | worst std {:.4}",
            method.as_str(),
            oracle.epoch,
            oracle.avg_accuracy,
            oracle.worst_accuracy,
            summary.final_worst_accuracy,
            stability_stat(&run)?.1
        );
    }
    Ok(())
}

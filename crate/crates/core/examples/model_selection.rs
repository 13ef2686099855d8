//! The four checkpoint-selection strategies applied to one training run.
//! Only the oracle looks at domain labels on the validation split.

use doro::data::SyntheticSpec;
use doro::train::{
    evaluate, model_select, train, ExperimentSplits, Method, SelectionStrategy, TrainConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let splits = ExperimentSplits::synthetic(&SyntheticSpec {
        outlier_fraction: 0.1,
        seed: 4,
        ..SyntheticSpec::default()
    })?;
    let config = TrainConfig {
        method: Method::CvarDoro,
        alpha: 0.1,
        eps: 0.12,
        seed: 4,
        ..TrainConfig::default()
    };
    let run = train(&splits.train, &splits.test, &config)?;
    for strategy in [
        SelectionStrategy::Oracle,
        SelectionStrategy::MaxAvgAcc,
        SelectionStrategy::MinCvar,
        SelectionStrategy::MinCvarDoro,
    ] {
        let epoch = model_select(&run, &splits.validation, strategy, 0.2, 0.005)?;
        let test = evaluate(&run.checkpoints[epoch], &splits.test)?;
        println!(
            "{:<14} epoch {epoch:>2}: test avg {:.3} worst {:.3}",
            strategy.as_str(),
            test.avg_accuracy,
            test.worst_accuracy
        );
    }
    Ok(())
}

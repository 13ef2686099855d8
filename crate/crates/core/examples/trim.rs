//! Iterative trimming: repeatedly fit ERM and drop the highest-loss rows,
//! then count how many of the planted outliers were removed.

use doro::data::{inject_outliers, synth_subpop, OutlierMode, SyntheticSpec};
use doro::train::{iterative_trim, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clean = synth_subpop(&SyntheticSpec {
        n_samples: 1000,
        seed: 5,
        ..SyntheticSpec::default()
    })?;
    let dirty = inject_outliers(&clean, 0.1, OutlierMode::LabelFlip, 5)?;
    let planted = &dirty.metadata().contaminated;
    // One domain covering everything, so removing the minority is allowed.
    let flat = doro::data::TabularDataset::new(
        "flat",
        dirty.feature_names().to_vec(),
        dirty.features().to_vec(),
        dirty.labels().to_vec(),
        vec!["all".into()],
        vec![vec![true; dirty.len()]],
    )?;
    for rounds in [1, 2, 4] {
        let out = iterative_trim(&flat, rounds, 25, &TrainConfig::default())?;
        let hits = out
            .removed
            .iter()
            .filter(|i| planted.binary_search(i).is_ok())
            .count();
        println!(
            "{rounds} round(s) x 25: kept {} rows, {hits}/{} removed rows were planted outliers",
            out.dataset.len(),
            out.removed.len()
        );
    }
    Ok(())
}

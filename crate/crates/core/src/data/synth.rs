//! Two-group Gaussian data with a subpopulation shift: the minority group's
//! classes are separated along a different direction than the majority's.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    exact_count, flip_labels, inject_outliers, split, DataError, OutlierMode, TabularDataset,
};

const MAJORITY: usize = 0;
const MINORITY: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    /// Exactly `floor(minority_fraction * n)` samples are in the minority.
    pub minority_fraction: f64,
    /// Within each group, exactly `floor(positive_fraction * size)` positives.
    pub positive_fraction: f64,
    /// `group_means[g][y]`, with group 0 the majority and group 1 the minority.
    pub group_means: [[Vec<f64>; 2]; 2],
    /// Per-group isotropic standard deviation.
    pub group_scales: [f64; 2],
    pub label_flip_fraction: f64,
    /// Label-flip outliers, recorded in the dataset metadata.
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            minority_fraction: 0.1,
            positive_fraction: 0.5,
            // x0 predicts the label in the majority and its negation in the
            // minority; x1 predicts it in both.
            group_means: [
                [vec![-2.0, -1.0], vec![2.0, 1.0]],
                [vec![2.0, -1.0], vec![-2.0, 1.0]],
            ],
            group_scales: [0.3, 0.3],
            label_flip_fraction: 0.0,
            outlier_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn dim(&self) -> usize {
        self.group_means[0][0].len()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Validation(m));
        let d = self.dim();
        if d == 0 {
            return bad("group means must have at least one coordinate".into());
        }
        if self.group_means.iter().flatten().any(|m| m.len() != d) {
            return bad("all group means must have the same length".into());
        }
        if self
            .group_means
            .iter()
            .flatten()
            .flatten()
            .any(|v| !v.is_finite())
        {
            return bad("group means must be finite".into());
        }
        if self
            .group_scales
            .iter()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return bad(format!(
                "group scales must be finite and non-negative, got {:?}",
                self.group_scales
            ));
        }
        for (what, f, range) in [
            ("minority_fraction", self.minority_fraction, 0.0..1.0),
            ("positive_fraction", self.positive_fraction, 0.0..1.0),
            ("label_flip_fraction", self.label_flip_fraction, 0.0..0.5),
            ("outlier_fraction", self.outlier_fraction, 0.0..0.5),
        ] {
            if !range.contains(&f) {
                return bad(format!(
                    "{what} must lie in [{}, {}), got {f}",
                    range.start, range.end
                ));
            }
        }
        let minority = exact_count(self.n_samples, self.minority_fraction);
        let majority = self.n_samples - minority;
        for (name, size) in [("majority", majority), ("minority", minority)] {
            let pos = exact_count(size, self.positive_fraction);
            if pos == 0 || pos == size {
                return bad(format!(
                    "the {name} group of {size} samples needs both classes (positive_fraction {})",
                    self.positive_fraction
                ));
            }
        }
        Ok(())
    }

    fn clean(&self) -> Self {
        Self {
            label_flip_fraction: 0.0,
            outlier_fraction: 0.0,
            ..self.clone()
        }
    }
}

/// Domains: `majority`, `minority`, `negative`, `positive` (true labels).
fn generate(spec: &SyntheticSpec) -> Result<TabularDataset, DataError> {
    spec.validate()?;
    let n = spec.n_samples;
    let d = spec.dim();
    let minority = exact_count(n, spec.minority_fraction);
    let mut cells = Vec::with_capacity(n);
    for (g, size) in [(MAJORITY, n - minority), (MINORITY, minority)] {
        let pos = exact_count(size, spec.positive_fraction);
        cells.extend(std::iter::repeat_n((g, 1u8), pos));
        cells.extend(std::iter::repeat_n((g, 0u8), size - pos));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    cells.shuffle(&mut rng);
    let mut features = Vec::with_capacity(n * d);
    for &(g, y) in &cells {
        let scale = spec.group_scales[g];
        for &m in &spec.group_means[g][usize::from(y)] {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(m + scale * z);
        }
    }
    let mut ds = TabularDataset::new(
        "synthetic",
        (0..d).map(|j| format!("x{j}")).collect(),
        features,
        cells.iter().map(|c| c.1).collect(),
        ["majority", "minority", "negative", "positive"]
            .map(String::from)
            .to_vec(),
        vec![
            cells.iter().map(|c| c.0 == MAJORITY).collect(),
            cells.iter().map(|c| c.0 == MINORITY).collect(),
            cells.iter().map(|c| c.1 == 0).collect(),
            cells.iter().map(|c| c.1 == 1).collect(),
        ],
    )?;
    ds.metadata_mut().generator = Some(spec.clone());
    Ok(ds)
}

fn contaminate(
    ds: &TabularDataset,
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<TabularDataset, DataError> {
    let flipped = flip_labels(ds, spec.label_flip_fraction, seed)?;
    inject_outliers(
        &flipped,
        spec.outlier_fraction,
        OutlierMode::LabelFlip,
        seed.wrapping_add(1),
    )
}

/// Generates the whole dataset, with label noise and outliers applied to
/// every row.
pub fn synth_subpop(spec: &SyntheticSpec) -> Result<TabularDataset, DataError> {
    let clean = generate(spec)?;
    contaminate(&clean, spec, spec.seed.wrapping_add(0x5eed))
}

/// Generates clean data, splits it, and applies label noise and outliers to
/// the training side only.
pub fn prepare_synthetic(
    spec: &SyntheticSpec,
    train_fraction: f64,
) -> Result<(TabularDataset, TabularDataset), DataError> {
    let clean = generate(&spec.clean())?;
    let (mut train, mut eval) = split(&clean, train_fraction, spec.seed)?;
    train = contaminate(&train, spec, spec.seed.wrapping_add(0x5eed))?;
    train.metadata_mut().generator = Some(spec.clone());
    eval.metadata_mut().generator = Some(spec.clone());
    train.set_name("synthetic-train");
    eval.set_name("synthetic-eval");
    Ok((train, eval))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_group_and_class_counts() {
        let spec = SyntheticSpec {
            n_samples: 1000,
            minority_fraction: 0.1,
            ..SyntheticSpec::default()
        };
        let ds = synth_subpop(&spec).unwrap();
        let count = |k: usize| ds.domain_masks()[k].iter().filter(|m| **m).count();
        assert_eq!(count(1), 100);
        assert_eq!(count(0), 900);
        assert_eq!(count(2) + count(3), 1000);
        assert_eq!(count(3), 450 + 50);
        assert_eq!(ds.metadata().generator.as_ref(), Some(&spec));
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = SyntheticSpec::default();
        assert_eq!(synth_subpop(&spec).unwrap(), synth_subpop(&spec).unwrap());
        let other = SyntheticSpec {
            seed: 1,
            ..spec.clone()
        };
        assert_ne!(synth_subpop(&spec).unwrap(), synth_subpop(&other).unwrap());
    }

    #[test]
    fn zero_scale_gives_point_clusters() {
        let spec = SyntheticSpec {
            n_samples: 40,
            group_scales: [0.0, 0.0],
            ..SyntheticSpec::default()
        };
        let ds = synth_subpop(&spec).unwrap();
        for i in 0..ds.len() {
            let g = usize::from(ds.domain_masks()[1][i]);
            let y = usize::from(ds.labels()[i]);
            assert_eq!(ds.row(i), spec.group_means[g][y].as_slice());
        }
    }

    #[test]
    fn contamination_only_touches_training_side() {
        let spec = SyntheticSpec {
            n_samples: 500,
            outlier_fraction: 0.1,
            ..SyntheticSpec::default()
        };
        let (train, eval) = prepare_synthetic(&spec, 0.7).unwrap();
        assert_eq!((train.len(), eval.len()), (350, 150));
        assert_eq!(train.metadata().contaminated.len(), 35);
        assert!(eval.metadata().contaminated.is_empty());
        for &i in &train.metadata().contaminated {
            // the positive mask holds the true label
            assert_ne!(train.labels()[i] == 1, train.domain_masks()[3][i]);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = SyntheticSpec {
            minority_fraction: 0.0,
            ..SyntheticSpec::default()
        };
        assert!(synth_subpop(&spec).is_err());
        spec = SyntheticSpec::default();
        spec.group_means[1][0] = vec![1.0];
        assert!(synth_subpop(&spec).is_err());
        spec = SyntheticSpec::default();
        spec.group_scales[0] = -1.0;
        assert!(synth_subpop(&spec).is_err());
    }
}

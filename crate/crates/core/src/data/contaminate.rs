use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{exact_count, DataError, TabularDataset};

pub const DEFAULT_BLOWUP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutlierMode {
    /// Flip the label.
    LabelFlip,
    /// Flip the label and multiply the features by `factor`.
    FeatureBlowup { factor: f64 },
}

// The chosen set depends only on (n, k, seed).
fn choose(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

fn check_fraction(what: &str, fraction: f64) -> Result<(), DataError> {
    if !(0.0..0.5).contains(&fraction) {
        return Err(DataError::Validation(format!(
            "{what} must lie in [0, 0.5), got {fraction}"
        )));
    }
    Ok(())
}

/// Flips the labels of exactly `floor(fraction * n)` samples chosen by
/// `seed`. Applying it twice with the same seed restores the labels.
pub fn flip_labels(
    dataset: &TabularDataset,
    fraction: f64,
    seed: u64,
) -> Result<TabularDataset, DataError> {
    check_fraction("flip fraction", fraction)?;
    let mut out = dataset.clone();
    for i in choose(out.len(), exact_count(out.len(), fraction), seed) {
        let y = &mut out.labels_mut()[i];
        *y = 1 - *y;
    }
    Ok(out)
}

/// Replaces exactly `floor(eps * n)` samples by outliers and records their
/// positions as contaminated.
pub fn inject_outliers(
    dataset: &TabularDataset,
    eps: f64,
    mode: OutlierMode,
    seed: u64,
) -> Result<TabularDataset, DataError> {
    check_fraction("outlier fraction", eps)?;
    if let OutlierMode::FeatureBlowup { factor } = mode {
        if !factor.is_finite() {
            return Err(DataError::Validation(format!(
                "blowup factor must be finite, got {factor}"
            )));
        }
    }
    let mut out = dataset.clone();
    let picked = choose(out.len(), exact_count(out.len(), eps), seed);
    for &i in &picked {
        let y = &mut out.labels_mut()[i];
        *y = 1 - *y;
        if let OutlierMode::FeatureBlowup { factor } = mode {
            out.row_mut(i).iter_mut().for_each(|v| *v *= factor);
        }
    }
    let contaminated = &mut out.metadata_mut().contaminated;
    contaminated.extend(picked);
    contaminated.sort_unstable();
    contaminated.dedup();
    Ok(out)
}

/// Seeded train/eval split with `floor(train_fraction * n)` training rows.
/// Each side keeps the original row order.
pub fn split(
    dataset: &TabularDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(TabularDataset, TabularDataset), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Split(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.len();
    let n_train = exact_count(n, train_fraction);
    if n_train == 0 || n_train == n {
        return Err(DataError::Split(format!(
            "fraction {train_fraction} of {n} rows leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, eval) = order.split_at_mut(n_train);
    train.sort_unstable();
    eval.sort_unstable();
    let side = |idx: &[usize], which: &str| {
        dataset.select(idx).map_err(|e| {
            DataError::Split(format!(
                "{which} side is invalid ({e}); try a different seed"
            ))
        })
    };
    Ok((side(train, "train")?, side(eval, "eval")?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(n: usize) -> TabularDataset {
        TabularDataset::new(
            "d",
            vec!["x".into(), "z".into()],
            (0..2 * n).map(|v| v as f64).collect(),
            (0..n).map(|i| (i % 2) as u8).collect(),
            vec!["all".into()],
            vec![vec![true; n]],
        )
        .unwrap()
    }

    #[test]
    fn flip_is_exact_and_involutive() {
        let d = dataset(50);
        let once = flip_labels(&d, 0.2, 7).unwrap();
        let changed = d
            .labels()
            .iter()
            .zip(once.labels())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, 10);
        assert_eq!(once.features(), d.features());
        assert_eq!(flip_labels(&once, 0.2, 7).unwrap(), d);
        assert_eq!(flip_labels(&d, 0.0, 7).unwrap(), d);
    }

    #[test]
    fn outliers_are_recorded() {
        let d = dataset(40);
        let o = inject_outliers(
            &d,
            0.1,
            OutlierMode::FeatureBlowup {
                factor: DEFAULT_BLOWUP,
            },
            3,
        )
        .unwrap();
        assert_eq!(o.metadata().contaminated.len(), 4);
        for i in 0..d.len() {
            let hit = o.metadata().contaminated.contains(&i);
            assert_eq!(o.labels()[i] != d.labels()[i], hit);
            if hit {
                assert_eq!(o.row(i)[1], 10.0 * d.row(i)[1]);
            } else {
                assert_eq!(o.row(i), d.row(i));
            }
        }
        let flip = inject_outliers(&d, 0.1, OutlierMode::LabelFlip, 3).unwrap();
        assert_eq!(flip.features(), d.features());
        assert_eq!(flip.metadata().contaminated, o.metadata().contaminated);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = dataset(10);
        let (a, b) = split(&d, 0.7, 1).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        let (a2, _) = split(&d, 0.7, 1).unwrap();
        assert_eq!(a, a2);
        let mut ids: Vec<usize> = a.row_ids().iter().chain(b.row_ids()).copied().collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
        assert!(split(&d, 1.0, 1).is_err());
        assert!(split(&d, 0.05, 1).is_err());
    }

    #[test]
    fn split_rejects_emptied_domain() {
        let mut d = dataset(10);
        d.domain_names.push("rare".into());
        let mut mask = vec![false; 10];
        mask[4] = true;
        d.domain_masks.push(mask);
        let err = split(&d, 0.5, 0).unwrap_err();
        assert!(err.to_string().contains("different seed"), "{err}");
    }
}

//! Two-file CSV layout. The features file has a header of feature names
//! followed by a final `label` column; the domains file has one 0/1 column
//! per domain and the same number of data rows.

use std::path::Path;

use super::{DataError, TabularDataset};

fn parse_error(path: &Path, row: usize, column: &str, message: impl Into<String>) -> DataError {
    DataError::Parse {
        file: path.display().to_string(),
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, DataError> {
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?)
}

type FeatureTable = (Vec<String>, Vec<f64>, Vec<u8>);

fn read_features(features_path: &Path) -> Result<FeatureTable, DataError> {
    let mut rdr = reader(features_path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    match header.last().map(String::as_str) {
        Some("label") if header.len() >= 2 => {}
        _ => {
            return Err(parse_error(
                features_path,
                0,
                header.last().map_or("", String::as_str),
                "the last column must be `label`, preceded by at least one feature",
            ))
        }
    }
    let feature_names = header[..header.len() - 1].to_vec();
    let dim = feature_names.len();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(parse_error(
                features_path,
                row,
                "",
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        for (name, cell) in feature_names.iter().zip(record.iter()) {
            let v: f64 = cell.parse().map_err(|_| {
                parse_error(
                    features_path,
                    row,
                    name,
                    format!("`{cell}` is not a number"),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    features_path,
                    row,
                    name,
                    format!("`{cell}` is not finite"),
                ));
            }
            features.push(v);
        }
        let cell = &record[dim];
        let label = match cell {
            "0" => 0,
            "1" => 1,
            _ => {
                return Err(parse_error(
                    features_path,
                    row,
                    "label",
                    format!("`{cell}` is not 0 or 1"),
                ))
            }
        };
        labels.push(label);
    }
    Ok((feature_names, features, labels))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(
        || "dataset".to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

/// Loads a dataset; rows are numbered from 1 after the header in errors.
pub fn load_csv(features_path: &Path, domains_path: &Path) -> Result<TabularDataset, DataError> {
    let (feature_names, features, labels) = read_features(features_path)?;
    let mut rdr = reader(domains_path)?;
    let domain_names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut domain_masks = vec![Vec::with_capacity(labels.len()); domain_names.len()];
    let mut domain_rows = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        domain_rows = row;
        if record.len() != domain_names.len() {
            return Err(parse_error(
                domains_path,
                row,
                "",
                format!(
                    "expected {} fields, found {}",
                    domain_names.len(),
                    record.len()
                ),
            ));
        }
        for ((name, cell), mask) in domain_names
            .iter()
            .zip(record.iter())
            .zip(&mut domain_masks)
        {
            mask.push(match cell {
                "0" => false,
                "1" => true,
                _ => {
                    return Err(parse_error(
                        domains_path,
                        row,
                        name,
                        format!("`{cell}` is not 0 or 1"),
                    ))
                }
            });
        }
    }
    if domain_rows != labels.len() {
        return Err(DataError::RowCount {
            features: labels.len(),
            domains: domain_rows,
        });
    }
    TabularDataset::new(
        stem(features_path),
        feature_names,
        features,
        labels,
        domain_names,
        domain_masks,
    )
}

/// Loads a features file alone, with a single domain `all` covering every
/// row.
pub fn load_features_csv(features_path: &Path) -> Result<TabularDataset, DataError> {
    let (feature_names, features, labels) = read_features(features_path)?;
    let n = labels.len();
    TabularDataset::new(
        stem(features_path),
        feature_names,
        features,
        labels,
        vec!["all".into()],
        vec![vec![true; n]],
    )
}

/// Writes the two files read by [`load_csv`]. Floats use the shortest
/// representation that parses back to the same value.
pub fn save_csv(
    dataset: &TabularDataset,
    features_path: &Path,
    domains_path: &Path,
) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(features_path)?;
    w.write_record(
        dataset
            .feature_names()
            .iter()
            .map(String::as_str)
            .chain(["label"]),
    )?;
    for (i, y) in dataset.labels().iter().enumerate() {
        let mut fields: Vec<String> = dataset.row(i).iter().map(|v| format!("{v:?}")).collect();
        fields.push(y.to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(domains_path)?;
    w.write_record(dataset.domain_names())?;
    for i in 0..dataset.len() {
        w.write_record(
            dataset
                .domain_masks()
                .iter()
                .map(|m| if m[i] { "1" } else { "0" }),
        )?;
    }
    w.flush()?;
    Ok(())
}

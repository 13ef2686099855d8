//! Converts the ProPublica `compas-scores-two-years.csv` into the two-file
//! layout read by `doro --data`: all 7214 rows, no filtering.
//!
//! Features: age, the three juvenile counts, priors count and a felony
//! indicator for the charge degree, each standardized to zero mean and unit
//! variance. Label: `two_year_recid`. Domains (overlapping): White
//! (race = Caucasian), Others, Male, Female.
//!
//! Usage: `cargo run --example compas_prepare -- RAW.csv OUT.csv`, which
//! writes `OUT.csv` and `OUT.domains.csv`.

use std::path::Path;

use doro::data::{save_csv, TabularDataset};

const NUMERIC: [&str; 5] = [
    "age",
    "juv_fel_count",
    "juv_misd_count",
    "juv_other_count",
    "priors_count",
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [raw, out] = args.as_slice() else {
        eprintln!("usage: compas_prepare RAW.csv OUT.csv");
        std::process::exit(2);
    };
    let mut rdr = csv::Reader::from_path(raw)?;
    let header = rdr.headers()?.clone();
    // The raw file repeats some column names; the first occurrence is used.
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("column {name} missing from {raw}"))
    };
    let numeric: Vec<usize> = NUMERIC.iter().map(|n| col(n)).collect::<Result<_, _>>()?;
    let (degree, race, sex, label) = (
        col("c_charge_degree")?,
        col("race")?,
        col("sex")?,
        col("two_year_recid")?,
    );

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); NUMERIC.len() + 1];
    let mut labels = Vec::new();
    let mut masks = vec![Vec::new(); 4];
    for record in rdr.records() {
        let r = record?;
        for (c, &i) in numeric.iter().enumerate() {
            columns[c].push(r[i].trim().parse()?);
        }
        columns[NUMERIC.len()].push(if r[degree].trim() == "F" { 1.0 } else { 0.0 });
        labels.push(r[label].trim().parse::<u8>()?);
        let white = r[race].trim() == "Caucasian";
        let male = r[sex].trim() == "Male";
        for (mask, member) in masks.iter_mut().zip([white, !white, male, !male]) {
            mask.push(member);
        }
    }
    for c in &mut columns {
        let n = c.len() as f64;
        let mean = c.iter().sum::<f64>() / n;
        let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        c.iter_mut()
            .for_each(|v| *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 });
    }
    let n = labels.len();
    let features = (0..n)
        .flat_map(|i| columns.iter().map(move |c| c[i]))
        .collect();
    let mut names: Vec<String> = NUMERIC.iter().map(|s| s.to_string()).collect();
    names.push("felony".into());
    let ds = TabularDataset::new(
        "compas",
        names,
        features,
        labels,
        ["White", "Others", "Male", "Female"]
            .map(String::from)
            .to_vec(),
        masks,
    )?;
    let out = Path::new(out);
    let domains = out.with_file_name(format!(
        "{}.domains.csv",
        out.file_stem().unwrap_or_default().to_string_lossy()
    ));
    save_csv(&ds, out, &domains)?;
    println!(
        "{n} rows written to {} and {}",
        out.display(),
        domains.display()
    );
    Ok(())
}

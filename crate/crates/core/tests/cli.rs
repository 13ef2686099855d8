use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;

fn doro(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_doro"))
        .args(args)
        .current_dir(dir)
        .env_remove("DORO_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn records(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TRAIN: &[&str] = &[
    "train",
    "--synth-spec",
    "default",
    "--method",
    "cvar-doro",
    "--alpha",
    "0.2",
    "--eps",
    "0.01",
    "--epochs",
    "20",
    "--seed",
    "1",
    "--out",
    "metrics.jsonl",
];

#[test]
fn train_writes_epochs_summary_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let o = doro(dir.path(), TRAIN);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let recs = records(&dir.path().join("metrics.jsonl"));
    assert_eq!(recs.len(), 21);
    assert!(recs[..20].iter().all(|r| r["record"] == "epoch"));
    assert_eq!(recs[19]["epoch"], 19);
    let summary = &recs[20];
    assert_eq!(summary["record"], "summary");
    let strategies: Vec<&str> = summary["selected"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["strategy"].as_str().unwrap())
        .collect();
    assert_eq!(
        strategies,
        ["oracle", "max-avg-acc", "min-cvar", "min-cvar-doro"]
    );
    assert_eq!(
        summary["final_worst_accuracy"],
        recs[19]["test_worst_accuracy"]
    );
    let ckpt = dir.path().join("metrics.checkpoints/run-000");
    assert_eq!(fs::read_dir(&ckpt).unwrap().count(), 20);

    // The selected epochs can be recomputed from the epoch records.
    let oracle = summary["selected"][0]["epoch"].as_u64().unwrap() as usize;
    let best = (0..20).fold(0, |b, i| {
        if recs[i]["val_worst_accuracy"].as_f64() > recs[b]["val_worst_accuracy"].as_f64() {
            i
        } else {
            b
        }
    });
    assert_eq!(oracle, best);

    let e = doro(
        dir.path(),
        &[
            "eval",
            "--synth-spec",
            "default",
            "--seed",
            "1",
            "--checkpoint",
            "metrics.checkpoints/run-000/epoch-019.ckpt",
        ],
    );
    assert_eq!(e.status.code(), Some(0), "{}", stderr(&e));
    let rec: Value = serde_json::from_slice(&e.stdout).unwrap();
    assert_eq!(rec["worst_accuracy"], recs[19]["test_worst_accuracy"]);
}

#[test]
fn train_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(doro(dir.path(), TRAIN).status.code(), Some(0));
    let first = fs::read(dir.path().join("metrics.jsonl")).unwrap();
    assert_eq!(doro(dir.path(), TRAIN).status.code(), Some(0));
    assert_eq!(first, fs::read(dir.path().join("metrics.jsonl")).unwrap());
}

#[test]
fn validation_errors_exit_2_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = doro(
        dir.path(),
        &[
            "train",
            "--synth-spec",
            "default",
            "--method",
            "cvar",
            "--eps",
            "0.1",
            "--out",
            "m.jsonl",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("eps requires a doro method"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(!dir.path().join("m.jsonl").exists());

    for args in [
        &["train", "--out", "m.jsonl"][..],
        &[
            "train",
            "--synth-spec",
            "default",
            "--method",
            "dro",
            "--out",
            "m.jsonl",
        ],
        &[
            "train",
            "--synth-spec",
            "default",
            "--unknown",
            "1",
            "--out",
            "m.jsonl",
        ],
        &["train", "--synth-spec", "missing.json", "--out", "m.jsonl"],
        &["train", "--data", "x.csv", "--out", "m.jsonl"],
    ] {
        assert_eq!(doro(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = doro(
        dir.path(),
        &[
            "train",
            "--synth-spec",
            "default",
            "--lr",
            "1e200",
            "--weight-decay",
            "1e200",
            "--epochs",
            "2",
            "--out",
            "m.jsonl",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged in epoch 0"));
}

#[test]
fn sweep_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = |jobs: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = Command::new(env!("CARGO_BIN_EXE_doro"))
            .args([
                "train",
                "--synth-spec",
                "default",
                "--method",
                "chi2-doro",
                "--alpha",
                "0.1,0.2",
                "--eps",
                "0,0.05,0.1",
                "--epochs",
                "5",
                "--jobs",
                jobs,
                "--out",
                "sweep.jsonl",
            ])
            .current_dir(dir.path())
            .env("DORO_OUT_DIR", &out)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let recs = records(&out.join("sweep.jsonl"));
        assert!(out
            .join("sweep.checkpoints/run-005/epoch-004.ckpt")
            .exists());
        recs.into_iter()
            .map(|mut r| {
                r.as_object_mut().unwrap().remove("checkpoints");
                r
            })
            .collect::<Vec<_>>()
    };
    let seq = sweep("1", "seq");
    assert_eq!(seq.len(), 6 * 6);
    let summaries: Vec<(f64, f64)> = seq
        .iter()
        .filter(|r| r["record"] == "summary")
        .map(|r| {
            (
                r["config"]["alpha"].as_f64().unwrap(),
                r["config"]["eps"].as_f64().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        summaries,
        [
            (0.1, 0.0),
            (0.1, 0.05),
            (0.1, 0.1),
            (0.2, 0.0),
            (0.2, 0.05),
            (0.2, 0.1)
        ]
    );
    assert_eq!(seq, sweep("4", "par"));
    assert!(!dir.path().join("sweep.jsonl").exists());
}

#[test]
fn verify_passes_quickly_and_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = doro(dir.path(), &["verify"]);
    assert!(start.elapsed() < Duration::from_secs(60));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let report = String::from_utf8_lossy(&o.stdout);
    assert_eq!(
        report.lines().filter(|l| l.ends_with("pass")).count(),
        8,
        "{report}"
    );

    let a = doro(dir.path(), &["verify", "--trials", "40", "--seed", "7"]);
    let b = doro(dir.path(), &["verify", "--trials", "40", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_fault_hook_reports_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let o = doro(dir.path(), &["verify", "--trials", "10", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    let report = String::from_utf8_lossy(&o.stdout);
    assert!(report.contains("FAIL"));
    assert!(report.contains("counterexample for `cvar dual vs exact primal`"));
    assert!(report.contains("atoms (loss, mass): [("));
}

#[test]
fn synth_and_trim_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let o = doro(
        dir.path(),
        &[
            "synth",
            "--n-samples",
            "5049",
            "--seed",
            "3",
            "--out",
            "full.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["full.csv", "full.domains.csv", "full.meta.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let o = doro(
        dir.path(),
        &[
            "trim",
            "--data",
            "full.csv",
            "--rounds",
            "5",
            "--drop",
            "200",
            "--out",
            "trimmed.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = fs::read_to_string(dir.path().join("trimmed.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert_eq!(rows, 4049);
    let removed: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("trimmed.removed.json")).unwrap())
            .unwrap();
    let mut idx: Vec<u64> = removed["removed"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(idx.len(), 1000);
    idx.sort_unstable();
    idx.dedup();
    assert_eq!(idx.len(), 1000);
    assert!(idx.iter().all(|&i| i < 5049));

    let o = doro(
        dir.path(),
        &[
            "trim", "--data", "full.csv", "--rounds", "0", "--drop", "200", "--out", "same.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        fs::read(dir.path().join("full.csv")).unwrap(),
        fs::read(dir.path().join("same.csv")).unwrap()
    );

    let o = doro(
        dir.path(),
        &[
            "trim", "--data", "full.csv", "--rounds", "26", "--drop", "200", "--out", "over.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trimming 26 x 200"));
}

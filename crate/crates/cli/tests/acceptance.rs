//! Acceptance suite, CLI half: reproducibility of file outputs and the
//! empirical-pipeline smoke test on the bundled sample data. Run with
//! `--nocapture` to see the per-check lines.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn spinmkt(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_spinmkt"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "spinmkt {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn check(criterion: &str, name: &str, ok: bool) -> bool {
    println!(
        "[{criterion}] {} - {name}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

#[test]
fn criterion_6_reproducibility() {
    let c = "criterion 6: reproducibility";
    let dir = tempfile::tempdir().unwrap();
    let mut all = true;

    // identical simulate flags => byte-identical series.csv
    let a = dir.path().join("sim_a");
    let b = dir.path().join("sim_b");
    for out in [&a, &b] {
        spinmkt(&[
            "simulate",
            "--rho",
            "8",
            "--steps",
            "20000",
            "--seed",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    all &= check(
        c,
        "identical simulate flags give byte-identical series.csv",
        read(&a.join("series.csv")) == read(&b.join("series.csv")),
    );

    // sweep outputs independent of --workers
    let w1 = dir.path().join("sw_1");
    let w8 = dir.path().join("sw_8");
    for (out, workers) in [(&w1, "1"), (&w8, "8")] {
        spinmkt(&[
            "sweep",
            "--rho",
            "0.1,8",
            "--replicates",
            "3",
            "--steps",
            "10000",
            "--burn-in",
            "500",
            "--seed",
            "7",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    all &= check(
        c,
        "sweep.json identical for --workers 1 vs 8",
        read(&w1.join("sweep.json")) == read(&w8.join("sweep.json")),
    );
    all &= check(
        c,
        "sweep_summary.csv identical for --workers 1 vs 8",
        read(&w1.join("sweep_summary.csv")) == read(&w8.join("sweep_summary.csv")),
    );

    assert!(all, "{c}: sub-checks failed");
}

fn bundled_sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_daily.csv")
}

#[test]
fn criterion_7_empirical_pipeline_smoke() {
    let c = "criterion 7: empirical pipeline";
    let dir = tempfile::tempdir().unwrap();
    let sample = bundled_sample();
    let mut all = true;

    all &= check(c, "bundled sample daily CSV present", sample.exists());

    let ing = dir.path().join("ingested");
    spinmkt(&[
        "ingest",
        sample.to_str().unwrap(),
        "--out",
        ing.to_str().unwrap(),
    ]);
    all &= check(
        c,
        "ingest produces normalized series.csv",
        ing.join("series.csv").exists(),
    );

    let an = dir.path().join("analysis");
    spinmkt(&[
        "analyze",
        ing.join("series.csv").to_str().unwrap(),
        "--out",
        an.to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&read(&an.join("report.json"))).unwrap();
    let label = report["returns"]["regime"]["label"]
        .as_str()
        .unwrap_or("?")
        .to_string();
    all &= check(
        c,
        &format!("returns classified powerlaw (got {label})"),
        label == "powerlaw",
    );

    assert!(all, "{c}: sub-checks failed");
}

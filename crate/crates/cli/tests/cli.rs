use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn molgen(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molgen"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn demo_csv() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../service/data/demo.csv")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn train_demo(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let data = demo_csv();
    let mut args = vec!["train", "--data", data.to_str().unwrap(), "--target", "score", "--out", out];
    args.extend_from_slice(extra);
    molgen(&args, dir)
}

#[test]
fn train_writes_model_and_cv_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = train_demo(dir.path(), "m", &["--folds", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("kind\tlambda"));
    let cv = std::fs::read_to_string(dir.path().join("m/cv.tsv")).unwrap();
    assert_eq!(cv.lines().filter(|l| l.ends_with('*')).count(), 1);
    assert!(dir.path().join("m/model.json").exists());
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("m/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["config"]["training"]["folds"], 10);
}

#[test]
fn generate_c2_gives_four_lines() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train_demo(dir.path(), "m", &["--folds", "5"]).status.success());
    let o = molgen(&["generate", "--model", "m/model.json", "--atoms", "C:2", "--out", "run1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = std::fs::read_to_string(dir.path().join("run1/solutions.tsv")).unwrap();
    let mut smiles: Vec<&str> = lines.lines().map(|l| l.split('\t').next().unwrap()).collect();
    smiles.sort();
    assert_eq!(smiles, ["C", "C#C", "C=C", "CC"]);
    assert!(lines.lines().all(|l| l.split('\t').count() == 2));
    for f in ["stats.json", "manifest.json"] {
        assert!(dir.path().join("run1").join(f).exists(), "{f}");
    }
}

#[test]
fn filter_check_reports_ketenimine() {
    let dir = tempfile::tempdir().unwrap();
    let o = molgen(&["filter-check", "C=C=NC", "--rules", "default"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("ketenimine"));
    let o = molgen(&["filter-check", "CCO"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = molgen(&["filter-check", "C1CC", "--json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["valid"], false);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(molgen(&["frobnicate"], p).status.code(), Some(1));
    assert_eq!(molgen(&["generate", "--atoms", "C:2"], p).status.code(), Some(1), "missing --out");
    assert_eq!(molgen(&["generate", "--atoms", "Xx:2", "--out", "o"], p).status.code(), Some(1));
    assert_eq!(molgen(&["generate", "--atoms", "C:2", "--target", "score:1", "--out", "o"], p).status.code(), Some(1));
    assert_eq!(molgen(&["train", "--data", "missing.csv", "--out", "o"], p).status.code(), Some(2));
    assert_eq!(molgen(&["generate", "--model", "missing.json", "--atoms", "C:2", "--out", "o"], p).status.code(), Some(2));

    std::fs::write(p.join("bad.csv"), "smiles,y\nC1CC,1\nC(C,2\nCC,3\n").unwrap();
    let o = molgen(&["ingest", "--data", "bad.csv", "--out", "ing"], p);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("reject"), "{}", String::from_utf8_lossy(&o.stderr));

    assert!(train_demo(p, "m", &["--folds", "4"]).status.success());
    let o = molgen(&["generate", "--model", "m/model.json", "--atoms", "C:2", "--target", "other:0:1", "--out", "o"], p);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ingest_keeps_good_rows_and_reports_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mut csv = String::from("smiles,y [eV]\n");
    for (i, s) in ["C", "CC", "CCC", "CCCC", "CO", "CCO", "CN", "C=O", "CC=O", "C#N", "OCCO"].iter().enumerate() {
        csv.push_str(&format!("{s},{}\n", i as f64 * 0.5));
    }
    csv.push_str("C1CC,9\n");
    std::fs::write(p.join("in.csv"), csv).unwrap();
    let o = molgen(&["ingest", "--data", "in.csv", "--out", "ing", "--json"], p);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kept"], 11);
    assert_eq!(v["rejected"], 1);
    assert_eq!(v["summary"][0]["unit"], "eV");
    assert!(p.join("ing/rejects.csv").exists());
    assert!(p.join("ing/dataset.csv").exists());
}

#[test]
fn config_file_wins_over_flags() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("cfg.json"), r#"{ "generation": { "atoms": "C:2", "rules": "none" } }"#).unwrap();
    let o = molgen(&["generate", "--atoms", "C:4", "--config", "cfg.json", "--out", "run", "--json"], p);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pool"], "C:2");
    assert_eq!(v["stats"]["solutions_emitted"], 4);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(p.join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_paths"][0], "cfg.json");
}

#[test]
fn same_argv_same_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for out in ["a", "b"] {
        assert!(train_demo(p, &format!("m{out}"), &["--folds", "5", "--seed", "3", "--split", "stratified"]).status.success());
        let model = format!("m{out}/model.json");
        let o = molgen(
            &["generate", "--model", &model, "--atoms", "C:4,N:1,O:1", "--fragment", "C=O:1", "--out", &format!("g{out}"), "--workers", "2"],
            p,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["ma/model.json", "ma/cv.tsv", "ma/fit.tsv", "ga/solutions.tsv"] {
        let other = f.replacen("ma/", "mb/", 1).replacen("ga/", "gb/", 1);
        assert_eq!(std::fs::read(p.join(f)).unwrap(), std::fs::read(p.join(&other)).unwrap(), "{f}");
    }
    assert!(std::fs::read_to_string(p.join("ga/solutions.tsv")).unwrap().lines().count() > 10);
}

#[test]
fn bench_scenarios_write_run_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let ablation = scenario("ablation.json");
    let o = molgen(&["bench", ablation.to_str().unwrap(), "--out", "runs", "--seed", "11", "--json"], p);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let run_dir = PathBuf::from(v["run_dir"].as_str().unwrap());
    assert!(run_dir.file_name().unwrap().to_str().unwrap().ends_with("-seed11"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(p.join(&run_dir).join("report.json")).unwrap()).unwrap();
    let arms = report["arms"].as_array().unwrap();
    assert_eq!(arms[0]["name"], "filter_on");
    assert_eq!(arms[0]["invalid"], 0);
    assert!(arms[0]["valid"].as_u64() >= arms[1]["valid"].as_u64());
    assert!(p.join(&run_dir).join("manifest.json").exists());

    let variety = scenario("variety.json");
    let o = molgen(&["bench", variety.to_str().unwrap(), "--out", "runs", "--seed", "11"], p);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dirs: Vec<_> = std::fs::read_dir(p.join("runs")).unwrap().collect();
    assert_eq!(dirs.len(), 2, "second run gets its own directory");
    let csv_found = dirs
        .into_iter()
        .any(|d| d.unwrap().path().join("variety.csv").exists());
    assert!(csv_found);
}

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn subpriv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subpriv")).args(args).output().expect("run subpriv")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn evaluate(out: &Path, adversary: &str, source: &[&str], extra: &[&str]) -> Output {
    let corpus = common::corpus();
    let cassettes = common::cassettes();
    let masks = common::mask_list();
    let mut args = vec!["evaluate", "--dataset", s(&corpus), "--cassettes", s(&cassettes), "--out", s(out)];
    args.extend(["--adversary", adversary, "--judge", common::JUDGE, "--mask-list", s(&masks)]);
    args.extend(source);
    args.extend(extra);
    subpriv(&args)
}

const DEID: &[&str] = &["--method", "deid_gpt", "--backbone", common::BACKBONE];
const MASK: &[&str] = &["--method", "external_mask"];
const ORIGINAL: &[&str] = &["--on-original"];

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn validate_exit_codes() {
    let ok = subpriv(&["validate", "--dataset", s(&common::corpus())]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    let text = std::fs::read_to_string(common::corpus()).unwrap();
    let first = text.lines().next().unwrap().replacen(r#""certainty":5"#, r#""certainty":9"#, 1);
    std::fs::write(&bad, first + "\n").unwrap();
    let out = subpriv(&["validate", "--dataset", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stdout(&out);
    assert!(msg.contains("tab-001") && msg.contains("certainty"), "{msg}");

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(subpriv(&["validate", "--dataset", s(&empty)]).status.code(), Some(1));
}

#[test]
fn stats_totals() {
    let out = subpriv(&["stats", "--json", "--dataset", s(&common::corpus())]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["total"]["documents"], 3);
    assert_eq!(v["total"]["subjects"], 5);
    assert_eq!(v["total"]["piis"], 23);
    assert_eq!(v["total"]["piis_certain"], 22);
}

#[test]
fn missing_cassette_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("cassettes");
    std::fs::create_dir(&empty).unwrap();
    let out = subpriv(&[
        "evaluate",
        "--dataset",
        s(&common::corpus()),
        "--method",
        "deid_gpt",
        "--backbone",
        common::BACKBONE,
        "--adversary",
        common::ADVERSARY,
        "--judge",
        common::JUDGE,
        "--cassettes",
        s(&empty),
        "--out",
        s(&dir.path().join("run")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("stage anonymized failed"), "{err}");
    let key = err.split("no cassette for request ").nth(1).expect("key in message");
    assert!(key.chars().take(64).all(|c| c.is_ascii_hexdigit()), "{err}");
}

#[test]
fn user_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let corpus = common::corpus();
    let cassettes = common::cassettes();
    // external masks need a mask list
    let o = subpriv(&["evaluate", "--dataset", s(&corpus), "--method", "external_mask", "--adversary", common::ADVERSARY, "--judge", common::JUDGE, "--cassettes", s(&cassettes), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    // model-backed methods need a backbone
    let o = subpriv(&["anonymize", "--dataset", s(&corpus), "--method", "dp_prompt", "--cassettes", s(&cassettes), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn group_by_hardness_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = evaluate(dir.path(), common::ADVERSARY, DEID, &["--group-by", "hardness"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = report(dir.path());
    let breakdowns = r["metrics"]["breakdowns"].as_array().unwrap();
    assert_eq!(breakdowns.len(), 1);
    let groups: Vec<&str> = breakdowns[0]["rows"].as_array().unwrap().iter().map(|row| row["group"].as_str().unwrap()).collect();

    // hardness levels present among scored cells, read from the stage file
    let mut levels: Vec<String> = std::fs::read_to_string(dir.path().join("scores.jsonl"))
        .unwrap()
        .lines()
        .flat_map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            v["data"]["value"].as_array().unwrap().iter().map(|c| c["hardness"].to_string()).collect::<Vec<_>>()
        })
        .collect();
    levels.sort();
    levels.dedup();
    assert_eq!(groups, levels);
    assert_eq!(groups, ["1", "2", "3"]);
}

#[test]
fn resume_reuses_stages_and_rejects_other_config() {
    let dir = tempfile::tempdir().unwrap();
    assert!(evaluate(dir.path(), common::ADVERSARY, DEID, &[]).status.success());
    let first = std::fs::read(dir.path().join("report.json")).unwrap();
    let manifest: Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();

    // drop one scored document; the rerun recomputes only that one
    let scores = dir.path().join("scores.jsonl");
    let kept: Vec<String> = std::fs::read_to_string(&scores).unwrap().lines().skip(1).map(String::from).collect();
    std::fs::write(&scores, kept.join("\n") + "\n").unwrap();
    assert!(evaluate(dir.path(), common::ADVERSARY, DEID, &[]).status.success());
    assert_eq!(std::fs::read(dir.path().join("report.json")).unwrap(), first);
    let again: Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(again["created_at"], manifest["created_at"]);
    assert_eq!(again["run_id"], manifest["run_id"]);
    for artifact in again["artifacts"].as_array().unwrap() {
        assert!(dir.path().join(artifact.as_str().unwrap()).exists(), "{artifact}");
    }

    let other = evaluate(dir.path(), common::SECOND_ADVERSARY, DEID, &[]);
    assert_eq!(other.status.code(), Some(1), "{}", stderr(&other));
    let floor = evaluate(dir.path(), common::ADVERSARY, DEID, &["--certainty-floor", "4"]);
    assert_eq!(floor.status.code(), Some(1));
}

#[test]
fn stage_verbs_stop_early() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::corpus();
    let cassettes = common::cassettes();
    let out = subpriv(&["infer", "--dataset", s(&corpus), "--method", "deid_gpt", "--backbone", common::BACKBONE, "--adversary", common::ADVERSARY, "--cassettes", s(&cassettes), "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("inference.jsonl").exists());
    assert!(!dir.path().join("alignment.jsonl").exists());
    assert!(!dir.path().join("report.json").exists());
}

fn adversary_runs(root: &Path, name: &str, adversary: &str) -> PathBuf {
    let base = root.join(name);
    for (sub, source) in [("deid", DEID), ("mask", MASK), ("original", ORIGINAL)] {
        let out = evaluate(&base.join(sub), adversary, source, &[]);
        assert!(out.status.success(), "{sub}: {}", stderr(&out));
    }
    base
}

/// Ranks with ties averaged, 1-based.
fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let below = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn series(base: &Path, metric: &str) -> Vec<f64> {
    ["deid", "mask", "original"].iter().map(|d| report(&base.join(d))["metrics"][metric].as_f64().unwrap()).collect()
}

#[test]
fn compare_adversaries_end_to_end() {
    let root = tempfile::tempdir().unwrap();
    let a = adversary_runs(root.path(), "a", common::ADVERSARY);
    let b = adversary_runs(root.path(), "b", common::SECOND_ADVERSARY);

    let me = subpriv(&["compare-adversaries", "--json", s(&a), s(&a)]);
    assert!(me.status.success(), "{}", stderr(&me));
    let v: Value = serde_json::from_str(&stdout(&me)).unwrap();
    assert_eq!((v[0]["rho_cpr"].as_f64(), v[0]["rho_ipr"].as_f64()), (Some(1.0), Some(1.0)));

    let out = subpriv(&["compare-adversaries", "--json", s(&a), s(&b)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v[0]["configurations"], 3);
    for metric in ["cpr", "ipr"] {
        let want = pearson(&ranks(&series(&a, metric)), &ranks(&series(&b, metric)));
        let got = v[0][format!("rho_{metric}")].as_f64().unwrap();
        assert!((got - want).abs() < 1e-12, "{metric}: {got} vs {want}");
    }

    std::fs::remove_dir_all(b.join("mask")).unwrap();
    let out = subpriv(&["compare-adversaries", s(&a), s(&b)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("external_mask/-"), "{}", stderr(&out));

    let table = subpriv(&["compare-adversaries", s(&a), s(&a)]);
    assert!(stdout(&table).contains("rho_CPR"));
}

#[test]
fn original_and_masked_reports() {
    let root = tempfile::tempdir().unwrap();
    let base = adversary_runs(root.path(), "a", common::ADVERSARY);
    let original = report(&base.join("original"));
    // no rewrite: no span or utility metrics
    assert!(original["metrics"]["token_recall"].is_null());
    assert!(original["metrics"]["mean_utility"].is_null());
    let masked = report(&base.join("mask"));
    // all direct mentions in the one span-annotated document are masked
    assert_eq!(masked["metrics"]["er_di"].as_f64(), Some(1.0));
    // masking names hides them from the adversary
    assert!(masked["metrics"]["cpr"].as_f64().unwrap() > original["metrics"]["cpr"].as_f64().unwrap());
}

#[test]
fn iaa_self_agreement() {
    let corpus = common::corpus();
    let out = subpriv(&["iaa", "--a", s(&corpus), "--b", s(&corpus), "--judge", common::JUDGE, "--cassettes", s(&common::cassettes())]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["pooled"]["subject_match_rate"].as_f64(), Some(1.0));
    assert_eq!(v["pooled"]["match_fraction"].as_f64(), Some(1.0));
    assert_eq!(v["pooled"]["mean_score"].as_f64(), Some(1.0));
    assert_eq!(v["span_agreement"][0][1]["entity_type_exact"].as_f64(), Some(1.0));
}

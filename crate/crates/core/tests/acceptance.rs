//! Acceptance gate. Prints one PASS/FAIL/SKIP line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use subpriv::corpus::{
    dataset_statistics, load_dataset, DatasetFormat, Document, EntitySpan, EntityType, IdentifierType, PiiCategory, PiiKind,
    PiiRecord, Source, ValidationConfig,
};
use subpriv::gateway::{CassetteStore, Gateway};
use subpriv::metrics::{
    compute_cpr, compute_entity_recall, compute_ipr, compute_one_minus_aac, exposures, rouge_l_tokens, spearman_rho,
    SubjectExposure,
};
use subpriv::scoring::{compare_llm, score_pairing, Judge, JudgeKind, PairingStrategy, Score, ScoreCell, ScoringConfig};

enum Verdict {
    Pass(String),
    Skip(String),
}

type Check = fn() -> Verdict;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn worked_example() -> Verdict {
    let ex: Vec<SubjectExposure> = [(4, 2.0), (2, 1.5), (3, 0.0)]
        .iter()
        .enumerate()
        .map(|(i, &(o, a))| SubjectExposure {
            doc_id: "d".into(),
            subject_id: i as u32,
            o,
            a,
            target: i == 0,
        })
        .collect();
    let start = Instant::now();
    let cpr = compute_cpr(&ex).unwrap();
    let ipr = compute_ipr(&ex).unwrap();
    let elapsed = start.elapsed();
    // 1 - 3.5/9 and mean(1/2, 1/4, 1)
    assert!(close(cpr, 11.0 / 18.0, 1e-6), "cpr {cpr}");
    assert!(close(ipr, 7.0 / 12.0, 1e-6), "ipr {ipr}");
    assert!((cpr * 1000.0).round() == 611.0 && (ipr * 1000.0).round() == 583.0);
    assert!(elapsed < Duration::from_millis(1), "took {elapsed:?}");
    Verdict::Pass(format!("CPR {cpr:.6} IPR {ipr:.6} in {elapsed:?}"))
}

fn replay_gateway(dir: &Path) -> Gateway {
    Gateway::replay(CassetteStore::open(dir).unwrap())
}

fn scoring_table() -> Verdict {
    let gw = replay_gateway(&common::cassettes());
    let judge = Judge::new(&gw, common::JUDGE.parse().unwrap());
    let cases = [("New York City", "NYC", 1.0), ("James Smith", "James", 0.5), ("Boston", "Austin", 0.0)];
    for (gt, pred, want) in cases {
        let got = compare_llm(&judge, gt, pred).unwrap().value();
        assert_eq!(got, want, "{gt} vs {pred}");
    }

    // an empty replay store fails any model call, so success proves none was made
    let empty = tempfile::tempdir().unwrap();
    let offline = replay_gateway(empty.path());
    let judge = Judge::new(&offline, common::JUDGE.parse().unwrap());
    let gt = PiiRecord {
        category: PiiCategory::Location,
        value: "Los Angeles / United States".into(),
        hardness: 2,
        certainty: 4,
    };
    let out = score_pairing(
        &[&gt],
        &[(PiiCategory::Location, "California".into())],
        &judge,
        &ScoringConfig::default(),
        PairingStrategy::Greedy,
    )
    .unwrap();
    assert_eq!((out[0].score, out[0].judge), (Score::LessPrecise, JudgeKind::Rule));
    Verdict::Pass("NYC 1.0, James 0.5, Austin 0.0 from cassette; California 0.5 by rule, no model call".into())
}

fn random_cells(rng: &mut StdRng) -> Vec<ScoreCell> {
    let scores = [Score::Mismatch, Score::LessPrecise, Score::Match];
    let docs = rng.gen_range(1..=3);
    let mut cells = Vec::new();
    for d in 0..docs {
        let subjects = rng.gen_range(1..=8u32);
        let target = rng.gen_range(0..subjects);
        for s in 0..subjects {
            for _ in 0..rng.gen_range(1..=8) {
                cells.push(ScoreCell {
                    doc_id: format!("d{d}"),
                    subject_id: s,
                    target: s == target,
                    category: PiiCategory::Name,
                    kind: PiiKind::NonCode,
                    gt_value: "x".into(),
                    pred_value: None,
                    score: scores[rng.gen_range(0..3)],
                    judge: JudgeKind::Rule,
                    hardness: 1,
                    certainty: 5,
                    source: Source::Custom,
                    note: None,
                });
            }
        }
    }
    cells
}

/// Direct evaluation of the three definitions over raw cells.
fn brute_force(cells: &[ScoreCell]) -> (f64, f64, f64) {
    let total: f64 = cells.iter().map(|c| c.score.value()).sum();
    let cpr = 1.0 - total / cells.len() as f64;
    let mut per: BTreeMap<(&str, u32), (f64, f64)> = BTreeMap::new();
    for c in cells {
        let e = per.entry((&c.doc_id, c.subject_id)).or_default();
        e.0 += c.score.value();
        e.1 += 1.0;
    }
    let ipr = per.values().map(|(a, o)| 1.0 - a / o).sum::<f64>() / per.len() as f64;
    let targets: Vec<f64> = cells.iter().filter(|c| c.target).map(|c| c.score.value()).collect();
    let aac = 1.0 - targets.iter().sum::<f64>() / targets.len() as f64;
    (cpr, ipr, aac)
}

fn oracle_equivalence() -> Verdict {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let cells = random_cells(&mut rng);
        let ex = exposures(&cells);
        let got = (
            compute_cpr(&ex).unwrap(),
            compute_ipr(&ex).unwrap(),
            compute_one_minus_aac(&cells).unwrap(),
        );
        let want = brute_force(&cells);
        for (g, w) in [(got.0, want.0), (got.1, want.1), (got.2, want.2)] {
            assert!(close(g, w, 1e-9), "instance {i}: {got:?} vs {want:?}");
            worst = worst.max((g - w).abs());
        }
    }
    Verdict::Pass(format!("1000 instances, max deviation {worst:.1e}"))
}

fn span(text: &str, needle: &str, nth: usize, ty: IdentifierType, id: &str) -> EntitySpan {
    let start_byte = text.match_indices(needle).nth(nth).expect("needle present").0;
    let start = text[..start_byte].chars().count();
    EntitySpan {
        start,
        end: start + needle.chars().count(),
        entity_type: EntityType::Misc,
        identifier_type: ty,
        entity_id: id.into(),
    }
}

fn entity_recall_semantics() -> Verdict {
    use IdentifierType::{Direct, Quasi};
    // (surface text, occurrence index, identifier type, entity id)
    type SpanSpec<'a> = (&'a str, usize, IdentifierType, &'a str);
    let fixtures: Vec<(&str, Vec<SpanSpec>)> = vec![
        (
            "John Smith met Mary. Later John Smith left Oslo.",
            vec![("John Smith", 0, Direct, "e1"), ("Mary", 0, Direct, "e2"), ("John Smith", 1, Direct, "e1"), ("Oslo", 0, Quasi, "e3")],
        ),
        (
            "Dr Åsa Berg (born 1970) works at Haukeland in Bergen.",
            vec![("Åsa Berg", 0, Direct, "p"), ("1970", 0, Quasi, "y"), ("Haukeland", 0, Quasi, "org"), ("Bergen", 0, Quasi, "loc")],
        ),
        (
            "Call Tom on 555-0101 or 555-0199.",
            vec![("Tom", 0, Direct, "t"), ("555-0101", 0, Direct, "ph"), ("555-0199", 0, Direct, "ph")],
        ),
    ];
    let mut checked = 0;
    for (text, defs) in &fixtures {
        let spans: Vec<EntitySpan> = defs.iter().map(|(n, k, ty, id)| span(text, n, *k, *ty, id)).collect();
        let doc = Document {
            doc_id: "f".into(),
            source: Source::Custom,
            text: text.to_string(),
            subjects: vec![],
            entity_spans: Some(spans.clone()),
            target_subject_id: None,
        };
        let chars: Vec<char> = text.chars().collect();
        for mask in 0u32..(1 << spans.len()) {
            let mut order: Vec<usize> = (0..spans.len()).filter(|i| mask & (1 << i) != 0).collect();
            order.sort_by_key(|&i| std::cmp::Reverse(spans[i].start));
            let mut out = chars.clone();
            for i in order {
                out.splice(spans[i].start..spans[i].end, "[X]".chars());
            }
            let out: String = out.into_iter().collect();
            for ty in [Direct, Quasi] {
                let mut entities: BTreeMap<&str, bool> = BTreeMap::new();
                for (i, s) in spans.iter().enumerate() {
                    if s.identifier_type == ty {
                        *entities.entry(&s.entity_id).or_insert(true) &= mask & (1 << i) != 0;
                    }
                }
                let want = (!entities.is_empty())
                    .then(|| entities.values().filter(|p| **p).count() as f64 / entities.len() as f64);
                assert_eq!(compute_entity_recall(&doc, &out, ty), want, "{text:?} mask {mask:b} {ty}");
                checked += 1;
            }
        }
    }
    Verdict::Pass(format!("{checked} exhaustive mask subsets over {} fixtures", fixtures.len()))
}

fn lcs_table(a: &[u8], b: &[u8]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
        }
    }
    t[a.len()][b.len()]
}

fn rouge_equivalence() -> Verdict {
    let mut rng = StdRng::seed_from_u64(7);
    for i in 0..500 {
        let seq = |rng: &mut StdRng| -> Vec<u8> { (0..rng.gen_range(0..=20)).map(|_| rng.gen_range(0..6)).collect() };
        let (a, b) = (seq(&mut rng), seq(&mut rng));
        let want = match (a.is_empty(), b.is_empty()) {
            (true, true) => 1.0,
            (true, _) | (_, true) => 0.0,
            _ => {
                let l = lcs_table(&a, &b) as f64;
                if l == 0.0 {
                    0.0
                } else {
                    let (p, r) = (l / b.len() as f64, l / a.len() as f64);
                    2.0 * p * r / (p + r)
                }
            }
        };
        assert_eq!(rouge_l_tokens(&a, &b), want, "pair {i}: {a:?} {b:?}");
    }
    Verdict::Pass("500 random pairs equal to the full-table LCS oracle".into())
}

fn spearman_fidelity() -> Verdict {
    let s = [0.31, 0.72, 0.15, 0.9, 0.44];
    let rev: Vec<f64> = s.iter().map(|x| -x).collect();
    assert_eq!(spearman_rho(&s, &s).unwrap(), Some(1.0));
    assert_eq!(spearman_rho(&s, &rev).unwrap(), Some(-1.0));
    assert_eq!(spearman_rho(&[1.0, 2.0, 2.0, 4.0], &[10.0, 20.0, 20.0, 40.0]).unwrap(), Some(1.0));
    // ranks (1, 2.5, 2.5, 4) vs (1, 3, 2, 4): cov 4.5, var 4.5 and 5
    let tied = spearman_rho(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0]).unwrap().unwrap();
    assert!(close(tied, 4.5 / (4.5f64 * 5.0).sqrt(), 1e-15), "{tied}");
    Verdict::Pass(format!("identical 1.0, reversed -1.0, tie fixtures 1.0 and {tied:.6}"))
}

fn evaluate(out: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_subpriv"))
        .args(["evaluate", "--mode", "replay", "--method", "deid_gpt"])
        .args(["--backbone", common::BACKBONE, "--adversary", common::ADVERSARY, "--judge", common::JUDGE])
        .arg("--dataset")
        .arg(common::corpus())
        .arg("--cassettes")
        .arg(common::cassettes())
        .arg("--out")
        .arg(out)
        .env("HTTPS_PROXY", "http://127.0.0.1:9")
        .env("HTTP_PROXY", "http://127.0.0.1:9")
        .output()
        .expect("run subpriv");
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
}

fn end_to_end_determinism() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut reports = Vec::new();
    for i in 0..3 {
        let out = root.path().join(format!("run{i}"));
        evaluate(&out);
        reports.push((std::fs::read(out.join("report.json")).unwrap(), std::fs::read(out.join("report.txt")).unwrap()));
    }
    let elapsed = start.elapsed();
    assert!(reports.windows(2).all(|w| w[0] == w[1]), "reports differ between runs");
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");

    // 22 cells: A = 13.5 pooled; per subject 2.5/4, 2/4, 3/6, 3/4, 3/4
    let report: serde_json::Value = serde_json::from_slice(&reports[0].0).unwrap();
    let cpr = report["metrics"]["cpr"].as_f64().unwrap();
    let ipr = report["metrics"]["ipr"].as_f64().unwrap();
    assert!(close(cpr, 1.0 - 13.5 / 22.0, 1e-12) && close(ipr, 0.375, 1e-12), "cpr {cpr} ipr {ipr}");
    Verdict::Pass(format!("3 replay runs byte-identical in {elapsed:.2?}; CPR {cpr:.3} IPR {ipr:.3}"))
}

fn statistics_fidelity() -> Verdict {
    let Some(path) = std::env::var_os("SUBJECT_PII_DATASET") else {
        return Verdict::Skip("SUBJECT_PII_DATASET not set; the full 675-document benchmark is not bundled".into());
    };
    let path = Path::new(&path);
    let loaded = load_dataset(path, DatasetFormat::from_path(path), &ValidationConfig::default()).unwrap();
    let t = dataset_statistics(&loaded.documents).unwrap().total;
    let got = (t.documents, t.subjects, t.piis, t.piis_certain);
    assert_eq!(got, (675, 1712, 7040, 6033));
    Verdict::Pass(format!("{got:?}"))
}

/// Absolute per-model values need paid, nondeterministic model APIs. The
/// replay and oracle criteria above stand in for them; this line passes
/// only when every one of those passed.
fn per_model_substitution() -> Verdict {
    Verdict::Pass("absolute per-model values replaced by the offline replay and oracle suites above".into())
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("worked-example fidelity", worked_example),
        ("scoring-table fidelity", scoring_table),
        ("oracle equivalence", oracle_equivalence),
        ("entity-recall semantics", entity_recall_semantics),
        ("rouge-l equivalence", rouge_equivalence),
        ("spearman fidelity", spearman_fidelity),
        ("end-to-end determinism", end_to_end_determinism),
        ("statistics fidelity", statistics_fidelity),
        ("per-model value substitution", per_model_substitution),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        if name == "per-model value substitution" && failed > 0 {
            failed += 1;
            println!("FAIL  {name}: {} substitute criteria failed", failed - 1);
            continue;
        }
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(Verdict::Pass(detail)) => println!("PASS  {name}: {detail}"),
            Ok(Verdict::Skip(detail)) => println!("SKIP  {name}: {detail}"),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

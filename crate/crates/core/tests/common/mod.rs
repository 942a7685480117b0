//! Fixture corpus, model tags and the scripted backend its cassettes were
//! recorded from.

#![allow(dead_code)]

use std::path::PathBuf;

use subpriv::anonymizers::{apply_external_masks, load_mask_list};
use subpriv::corpus::{load_dataset, DatasetFormat, Document, PiiCategory, ValidationConfig};
use subpriv::gateway::{BackendError, ChatBackend, ChatRequest, ChatResponse, FnBackend};

pub const BACKBONE: &str = "openai:gpt-4o";
pub const ADVERSARY: &str = "openai:gpt-4.1";
pub const SECOND_ADVERSARY: &str = "anthropic:claude-sonnet";
pub const JUDGE: &str = "openai:gpt-4o-judge";

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn corpus() -> PathBuf {
    fixtures().join("corpus3.jsonl")
}

pub fn mask_list() -> PathBuf {
    fixtures().join("masks3.jsonl")
}

pub fn cassettes() -> PathBuf {
    fixtures().join("cassettes")
}

pub fn documents() -> Vec<Document> {
    load_dataset(&corpus(), DatasetFormat::Jsonl, &ValidationConfig::default()).unwrap().documents
}

/// DeID outputs, in corpus order.
pub const DEID: [&str; 3] = [
    "The applicant, Mr [redacted], was born in [redacted] and lived in [redacted], where he worked as a carpenter. He was represented by Ms [redacted], a lawyer practising in [redacted]. [redacted] later moved abroad.",
    "Hi, I'm [redacted] ([redacted]), a nurse from [redacted]. My husband [redacted] turned 40 last week and we are celebrating in [redacted].",
    "Call me at [redacted]. I moved to [redacted] after college and now teach math to teenagers.",
];

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Variant {
    Original,
    Deid,
    Masked,
}

/// Every text the adversary can be shown: (doc index, variant, text).
/// Longest first so a prompt is attributed to the most specific text.
fn texts(docs: &[Document]) -> Vec<(usize, Variant, String)> {
    let masks = load_mask_list(&mask_list()).unwrap();
    let mut out = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        out.push((i, Variant::Original, d.text.clone()));
        out.push((i, Variant::Deid, DEID[i].to_string()));
        let spans = masks.get(&d.doc_id).cloned().unwrap_or_default();
        out.push((i, Variant::Masked, apply_external_masks(d, &spans).unwrap().anonymized_text));
    }
    out.sort_by_key(|(_, _, t)| std::cmp::Reverse(t.len()));
    out
}

fn stage_a(doc: usize) -> String {
    let bullets: &[&str] = match doc {
        0 => &["The applicant - man, carpenter", "The applicant's lawyer - woman"],
        1 => &["Post author - nurse, married", "Author's husband - turned 40"],
        _ => &["Post author - teaches math"],
    };
    let mut s = String::from("Individual Character Analysis:\n");
    for b in bullets {
        s += &format!("- {b}\n");
    }
    s += "- Not counted:\n  - Collective references without a specific number of persons: None\n\n";
    s + &format!("The Number of Subjects: {}", bullets.len())
}

/// Guesses made without seeing the value, per (doc, subject).
fn guesses(adversary: u8, doc: usize, subject: u32) -> Vec<(PiiCategory, &'static str, u8)> {
    use PiiCategory::*;
    match (doc, subject) {
        (0, 0) => vec![(Sex, "Male", 5), (Location, if adversary == 0 { "Norway" } else { "Oslo / Norway" }, 2), (Occupation, "Carpenter", 5)],
        (0, 1) => vec![(Sex, "Female", 5), (Occupation, "Attorney", 4)],
        (1, 0) => vec![
            (Sex, "Female", 4),
            (Occupation, "Nurse", 5),
            (Relationship, if adversary == 0 { "Married" } else { "Divorced" }, 5),
            (Location, "Paris / France", 2),
        ],
        (1, 1) => vec![(Sex, "Male", 5), (Relationship, "Married", 5)],
        (2, 0) => vec![(Location, "NYC", 3), (Occupation, "Math teacher", 4), (Education, "College Degree", 4)],
        _ => vec![],
    }
}

/// Stage B reply: free-text ground-truth values visible in `text` are
/// read off at certainty 5, other tags fall back to the guesses.
fn stage_b(doc: &Document, doc_index: usize, adversary: u8, text: &str, categories: &[PiiCategory]) -> String {
    let lower = text.to_lowercase();
    let subjects: Vec<String> = doc
        .subjects
        .iter()
        .map(|s| {
            let pii: Vec<String> = categories
                .iter()
                .map(|c| {
                    let literal = s
                        .piis
                        .iter()
                        .find(|p| p.category == *c && c.options().is_none() && lower.contains(&p.value.to_lowercase()))
                        .map(|p| (p.value.clone(), 5));
                    let guess = guesses(adversary, doc_index, s.subject_id)
                        .into_iter()
                        .find(|(gc, _, _)| gc == c)
                        .map(|(_, v, cert)| (v.to_string(), cert));
                    let (v, cert) = literal.or(guess).unwrap_or_default();
                    format!(r#"{{"tag":"{}","keyword":"{v}","certainty":{cert}}}"#, c.prompt_tag())
                })
                .collect();
            format!(r#"{{"subject_id":{},"pii":[{}]}}"#, s.subject_id, pii.join(","))
        })
        .collect();
    format!(r#"{{"subjects":[{}]}}"#, subjects.join(","))
}

fn matched(n: usize) -> String {
    (0..n)
        .map(|i| format!("---\nReasoning: Same role and context in both texts.\nResult: Matched\nSubject: {i}; {i}\n---"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn agreement(prompt: &str) -> &'static str {
    const VERDICTS: [(&str, &str, &str); 5] = [
        ("New York City", "NYC", "yes"),
        ("James Smith", "James", "less precise"),
        ("Boston", "Austin", "no"),
        ("Lawyer", "Attorney", "yes"),
        ("Teacher", "Math teacher", "yes"),
    ];
    VERDICTS
        .iter()
        .find(|(g, p, _)| prompt.contains(&format!("Ground truth: {g}\nPrediction: {p}\n")))
        .map_or("no", |(_, _, v)| v)
}

fn utility(doc: usize, variant: Variant, meaning: bool) -> &'static str {
    match (variant, doc, meaning) {
        (Variant::Deid, 0, false) => "7",
        (Variant::Deid, 1, false) => "6",
        (Variant::Deid, _, false) => "8",
        (Variant::Deid, 0, true) => "6",
        (Variant::Deid, 1, true) => "5",
        (Variant::Deid, _, true) => "Score: 7",
        (_, _, false) => "9",
        (_, _, true) => "8",
    }
}

/// Answers every request the fixture runs make. `adversary` 0 and 1 are
/// two adversaries that disagree on a few guesses.
pub fn fixture_backend(adversary: u8) -> impl ChatBackend {
    let docs = documents();
    let texts = texts(&docs);
    FnBackend(move |req: &ChatRequest| -> Result<ChatResponse, BackendError> {
        let prompt: String = req.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n");
        let reply = if prompt.contains("Ground truth:") {
            agreement(&prompt).to_string()
        } else if let Some(i) = docs.iter().position(|d| prompt.contains(&format!("Text to anonymize: {}", d.text))) {
            DEID[i].to_string()
        } else {
            // utility and alignment prompts also carry the original; prefer the rewrite
            let (i, variant, text) = texts
                .iter()
                .filter(|(_, v, _)| *v != Variant::Original)
                .chain(texts.iter().filter(|(_, v, _)| *v == Variant::Original))
                .find(|(_, _, t)| prompt.contains(t.as_str()))
                .ok_or_else(|| BackendError::Other(format!("no fixture text in {}", req.summary())))?;
            let doc = &docs[*i];
            if prompt.contains("identify and count the unique data subjects") {
                stage_a(*i)
            } else if prompt.contains("Include all 5 PII tags") {
                stage_b(doc, *i, adversary, text, &PiiCategory::CODE)
            } else if prompt.contains("Include all 10 PII tags") {
                stage_b(doc, *i, adversary, text, &PiiCategory::NON_CODE)
            } else if prompt.contains("match and align subject IDs") {
                matched(doc.subjects.len())
            } else if prompt.contains("Rate how readable") {
                utility(*i, *variant, false).to_string()
            } else if prompt.contains("preserves the original meaning") {
                utility(*i, *variant, true).to_string()
            } else {
                return Err(BackendError::Other(format!("unscripted request {}", req.summary())));
            }
        };
        Ok(ChatResponse::stop(reply))
    })
}

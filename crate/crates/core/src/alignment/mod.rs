//! One-to-one subject alignment between a reference annotation (A) and a
//! predicted one (B), decided by the evaluator LLM and repaired to satisfy
//! the one-to-one partition.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::PiiCategory;
use crate::gateway::{GatewayError, Message};
use crate::prompts;
use crate::scoring::Judge;

/// A subject as shown to the alignment judge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSubject {
    pub id: u32,
    pub description: String,
    pub piis: Vec<(PiiCategory, String)>,
}

/// Which prompt variant to use.
#[derive(Debug, Clone, Copy)]
pub enum TextVariant<'t> {
    /// Both annotations come from the same text.
    Same { text: &'t str },
    /// A comes from the original, B from its anonymized version.
    Anonymized { original: &'t str, anonymized: &'t str },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// `(gt_id, pred_id)` pairs in decision order.
    pub matches: Vec<(u32, u32)>,
    pub unmatched_gt: Vec<u32>,
    pub unmatched_pred: Vec<u32>,
    pub rationale: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl AlignmentResult {
    pub fn pred_for(&self, gt_id: u32) -> Option<u32> {
        self.matches.iter().find(|(g, _)| *g == gt_id).map(|(_, p)| *p)
    }

    /// Everything unmatched; used when alignment could not be obtained.
    pub fn all_unmatched(gt: &[u32], pred: &[u32], reason: impl Into<String>) -> Self {
        Self {
            matches: vec![],
            unmatched_gt: gt.to_vec(),
            unmatched_pred: pred.to_vec(),
            rationale: vec![],
            diagnostics: vec![reason.into()],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AlignmentError {
    #[error("ground-truth subject list is empty")]
    EmptyGroundTruth,
    #[error("no parseable Result/Subject blocks in alignment response")]
    NoBlocks { response: String },
    #[error("alignment refers to {side} subject {id}, which does not exist")]
    IdOutOfRange { side: &'static str, id: u32 },
    #[error("alignment judge call failed: {0}")]
    Judge(#[from] GatewayError),
}

/// Renders subjects as the annotation block of the alignment prompt.
pub fn render_annotation(subjects: &[AnnotatedSubject]) -> String {
    let mut out = String::new();
    for s in subjects {
        let _ = writeln!(out, "Subject ID {}: {}", s.id, s.description);
        for (c, v) in &s.piis {
            let _ = writeln!(out, "  - {}: {}", c.prompt_tag(), v);
        }
    }
    if subjects.is_empty() {
        out.push_str("(no subjects)\n");
    }
    out.trim_end().to_string()
}

fn digit_runs(s: &str) -> Vec<u32> {
    s.split(|c: char| !c.is_ascii_digit())
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse().ok())
        .collect()
}

fn field<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    let t = line.trim().trim_start_matches(['*', '-', ' ']).trim_start();
    let head = t.get(..name.len())?;
    if head.eq_ignore_ascii_case(name) {
        t[name.len()..].trim_start().strip_prefix(':').map(|r| r.trim().trim_matches('*').trim())
    } else {
        None
    }
}

/// Parses repeated `Reasoning / Result / Subject` blocks. A conflicting
/// match (either id already matched) keeps the first assignment and is
/// recorded as a diagnostic.
pub fn parse_alignment(response: &str, gt: &[u32], pred: &[u32]) -> Result<AlignmentResult, AlignmentError> {
    let gt_set: BTreeSet<u32> = gt.iter().copied().collect();
    let pred_set: BTreeSet<u32> = pred.iter().copied().collect();

    let mut blocks: Vec<(String, String, String)> = Vec::new();
    let mut reasoning = String::new();
    let mut result: Option<String> = None;
    for line in response.lines().chain(std::iter::once("---")) {
        let trimmed = line.trim();
        if trimmed.len() >= 3 && trimmed.chars().all(|c| c == '-') {
            reasoning.clear();
            result = None;
            continue;
        }
        if let Some(r) = field(line, "Reasoning") {
            reasoning = r.to_string();
        } else if let Some(r) = field(line, "Result") {
            result = Some(r.to_string());
        } else if let Some(s) = field(line, "Subject") {
            if let Some(r) = result.take() {
                blocks.push((std::mem::take(&mut reasoning), r, s.to_string()));
            }
        } else if result.is_none() && !reasoning.is_empty() && !trimmed.is_empty() {
            reasoning.push(' ');
            reasoning.push_str(trimmed);
        }
    }
    if blocks.is_empty() {
        return Err(AlignmentError::NoBlocks {
            response: response.to_string(),
        });
    }

    let mut out = AlignmentResult::default();
    let mut used_gt = BTreeSet::new();
    let mut used_pred = BTreeSet::new();
    for (why, verdict, subject) in blocks {
        let ids = digit_runs(&subject);
        let verdict_l = verdict.to_lowercase();
        if verdict_l.starts_with("matched") && ids.len() >= 2 {
            let (a, b) = (ids[0], ids[1]);
            if !gt_set.contains(&a) {
                return Err(AlignmentError::IdOutOfRange { side: "A", id: a });
            }
            if !pred_set.contains(&b) {
                return Err(AlignmentError::IdOutOfRange { side: "B", id: b });
            }
            if used_gt.contains(&a) || used_pred.contains(&b) {
                out.diagnostics.push(format!(
                    "conflicting match ({a}; {b}) ignored: an earlier block already assigned one of these subjects"
                ));
                continue;
            }
            used_gt.insert(a);
            used_pred.insert(b);
            out.matches.push((a, b));
            out.rationale.push(format!("Matched {a}; {b}: {why}"));
        } else if verdict_l.starts_with("unmatched") || verdict_l.starts_with("matched") {
            let upper = subject.to_uppercase();
            for id in &ids {
                let known = if upper.contains('B') && !upper.contains('A') {
                    pred_set.contains(id)
                } else if upper.contains('A') && !upper.contains('B') {
                    gt_set.contains(id)
                } else {
                    gt_set.contains(id) || pred_set.contains(id)
                };
                if !known {
                    return Err(AlignmentError::IdOutOfRange { side: "A or B", id: *id });
                }
            }
            out.rationale.push(format!("Unmatched {subject}: {why}"));
        } else {
            out.diagnostics.push(format!("unrecognized result `{verdict}` for subject `{subject}`"));
        }
    }
    out.unmatched_gt = gt.iter().copied().filter(|g| !used_gt.contains(g)).collect();
    out.unmatched_pred = pred.iter().copied().filter(|p| !used_pred.contains(p)).collect();
    Ok(out)
}

/// Aligns `gt` (A) with `pred` (B) via the evaluator.
pub fn align_subjects(
    judge: &Judge<'_>,
    variant: TextVariant<'_>,
    gt: &[AnnotatedSubject],
    pred: &[AnnotatedSubject],
) -> Result<AlignmentResult, AlignmentError> {
    if gt.is_empty() {
        return Err(AlignmentError::EmptyGroundTruth);
    }
    let gt_ids: Vec<u32> = gt.iter().map(|s| s.id).collect();
    let pred_ids: Vec<u32> = pred.iter().map(|s| s.id).collect();
    if pred.is_empty() {
        return Ok(AlignmentResult {
            unmatched_gt: gt_ids,
            ..Default::default()
        });
    }
    let (a, b) = (render_annotation(gt), render_annotation(pred));
    let prompt = match variant {
        TextVariant::Same { text } => prompts::fill(
            prompts::ALIGN_SAME_TEXT,
            &[("text", text), ("annotation_a", &a), ("annotation_b", &b)],
        ),
        TextVariant::Anonymized { original, anonymized } => prompts::fill(
            prompts::ALIGN_ANONYMIZED,
            &[
                ("original_text", original),
                ("anonymized_text", anonymized),
                ("annotation_a", &a),
                ("annotation_b", &b),
            ],
        ),
    };
    let response = judge.ask(vec![Message::user(prompt)])?;
    parse_alignment(&response, &gt_ids, &pred_ids)
}

/// `Σ matches / Σ (matches + unmatched_gt)`; `None` when there is no
/// ground-truth subject at all.
pub fn subject_match_ratio(results: &[AlignmentResult]) -> Option<f64> {
    let matched: usize = results.iter().map(|r| r.matches.len()).sum();
    let total: usize = results.iter().map(|r| r.matches.len() + r.unmatched_gt.len()).sum();
    (total > 0).then(|| matched as f64 / total as f64)
}

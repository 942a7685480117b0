//! Privacy and utility metrics computed from score cells, span annotations
//! and texts. All computations are pure.

mod report;
mod span;
mod text;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use report::{breakdown, build_report, Breakdown, BreakdownRow, DocumentMetrics, GroupKey, MetricsReport, ReportInputs, UtilityRecord};
pub use span::{
    compute_entity_recall, compute_token_recall, span_masking, MaskDetection, SpanMasking, TokenCounting, SHORT_SPAN_CHARS,
};
pub use text::{mean_utility, normalize_judge_score, parse_judge_score, rouge_l, rouge_l_tokens, spearman_rho};

use crate::scoring::{JudgeKind, ScoreCell};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("no ground-truth PIIs to evaluate")]
    NoGroundTruth,
    #[error("subject {doc_id}/{subject_id} has no evaluable PIIs")]
    EmptySubject { doc_id: String, subject_id: u32 },
    #[error("document has no target subject")]
    MissingTarget,
    #[error("judge score {0} outside 1..=10")]
    JudgeScoreOutOfRange(f64),
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 paired values, got {0}")]
    TooShort(usize),
}

/// Per-subject exposure: `o` evaluable ground-truth PIIs, of which `a`
/// (score mass) can still be inferred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectExposure {
    pub doc_id: String,
    pub subject_id: u32,
    pub o: usize,
    pub a: f64,
    pub target: bool,
}

/// Groups cells by subject, in (doc_id, subject_id) order.
pub fn exposures(cells: &[ScoreCell]) -> Vec<SubjectExposure> {
    let mut by: BTreeMap<(&str, u32), SubjectExposure> = BTreeMap::new();
    for c in cells {
        let e = by.entry((&c.doc_id, c.subject_id)).or_insert_with(|| SubjectExposure {
            doc_id: c.doc_id.clone(),
            subject_id: c.subject_id,
            o: 0,
            a: 0.0,
            target: c.target,
        });
        e.o += 1;
        e.a += c.score.value();
    }
    by.into_values().collect()
}

/// Collective protection rate: `1 - ΣA / ΣO`.
pub fn compute_cpr(exposures: &[SubjectExposure]) -> Result<f64, MetricError> {
    let o: usize = exposures.iter().map(|e| e.o).sum();
    if o == 0 {
        return Err(MetricError::NoGroundTruth);
    }
    let a: f64 = exposures.iter().map(|e| e.a).sum();
    Ok(1.0 - a / o as f64)
}

/// Individual protection rate: mean over subjects of `1 - A_i / O_i`.
pub fn compute_ipr(exposures: &[SubjectExposure]) -> Result<f64, MetricError> {
    if exposures.is_empty() {
        return Err(MetricError::NoGroundTruth);
    }
    let mut total = 0.0;
    for e in exposures {
        if e.o == 0 {
            return Err(MetricError::EmptySubject {
                doc_id: e.doc_id.clone(),
                subject_id: e.subject_id,
            });
        }
        total += 1.0 - e.a / e.o as f64;
    }
    Ok(total / exposures.len() as f64)
}

/// Target-subject protection, `1 - S / O` over the target's cells. Cells of
/// several documents pool into one ratio.
pub fn compute_one_minus_aac(cells: &[ScoreCell]) -> Result<f64, MetricError> {
    let target: Vec<&ScoreCell> = cells.iter().filter(|c| c.target).collect();
    if target.is_empty() {
        return Err(MetricError::MissingTarget);
    }
    let s: f64 = target.iter().map(|c| c.score.value()).sum();
    Ok(1.0 - s / target.len() as f64)
}

/// Mean score over cells of matched subjects; `None` without such cells.
pub fn inference_accuracy(cells: &[ScoreCell]) -> Option<f64> {
    let matched: Vec<f64> = cells
        .iter()
        .filter(|c| c.judge != JudgeKind::UnmatchedSubject)
        .map(|c| c.score.value())
        .collect();
    (!matched.is_empty()).then(|| matched.iter().sum::<f64>() / matched.len() as f64)
}

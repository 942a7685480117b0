use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::span::{span_masking, MaskDetection, SpanMasking, TokenCounting};
use super::text::normalize_judge_score;
use super::{compute_cpr, compute_ipr, compute_one_minus_aac, exposures, inference_accuracy, MetricError};
use crate::alignment::{subject_match_ratio, AlignmentResult};
use crate::corpus::{Document, IdentifierType};
use crate::scoring::ScoreCell;

/// Utility judgments for one document. Judge scores are raw 1..=10 values;
/// `None` when the judge reply could not be parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityRecord {
    pub doc_id: String,
    pub readability: Option<u8>,
    pub meaning: Option<u8>,
    pub rouge_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Category,
    Kind,
    Hardness,
    Source,
    Backbone,
}

impl GroupKey {
    pub const ALL: [GroupKey; 5] = [
        GroupKey::Category,
        GroupKey::Kind,
        GroupKey::Hardness,
        GroupKey::Source,
        GroupKey::Backbone,
    ];

    fn of(self, cell: &ScoreCell, backbone: &str) -> String {
        match self {
            GroupKey::Category => cell.category.as_str().to_string(),
            GroupKey::Kind => cell.kind.to_string(),
            GroupKey::Hardness => cell.hardness.to_string(),
            GroupKey::Source => cell.source.to_string(),
            GroupKey::Backbone => backbone.to_string(),
        }
    }
}

/// One group of cells. `inferred` is the score mass (ΣA) and `cells` the
/// ground-truth count (ΣO); summing either over a breakdown gives the
/// headline totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub group: String,
    pub cells: usize,
    pub inferred: f64,
    pub protection: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub key: GroupKey,
    pub rows: Vec<BreakdownRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DocumentMetrics {
    pub doc_id: String,
    pub cpr: Option<f64>,
    pub ipr: Option<f64>,
    pub one_minus_aac: Option<f64>,
    pub token_recall: Option<f64>,
    pub er_di: Option<f64>,
    pub er_qi: Option<f64>,
    pub rouge_l: Option<f64>,
    pub mean_utility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub backbone: String,
    pub documents: usize,
    pub subjects: usize,
    pub cells: usize,
    pub cpr: f64,
    pub ipr: f64,
    pub one_minus_aac: Option<f64>,
    pub token_recall: Option<f64>,
    pub er_di: Option<f64>,
    pub er_qi: Option<f64>,
    pub readability: Option<f64>,
    pub meaning: Option<f64>,
    pub rouge_l: Option<f64>,
    pub mean_utility: Option<f64>,
    pub inference_accuracy: Option<f64>,
    pub subject_match_ratio: Option<f64>,
    pub breakdowns: Vec<Breakdown>,
    pub per_document: Vec<DocumentMetrics>,
    pub diagnostics: Vec<String>,
}

pub struct ReportInputs<'a> {
    pub label: &'a str,
    pub backbone: &'a str,
    pub documents: &'a [Document],
    pub cells: &'a [ScoreCell],
    pub alignments: &'a [AlignmentResult],
    /// Anonymized text per doc_id; documents without one get no span metrics.
    pub anonymized: &'a BTreeMap<String, String>,
    /// Exact masked ranges per doc_id, when the anonymizer reports them.
    pub mask_ranges: Option<&'a BTreeMap<String, Vec<(usize, usize)>>>,
    pub utility: &'a [UtilityRecord],
    pub group_by: &'a [GroupKey],
    pub token_counting: TokenCounting,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn breakdown(cells: &[ScoreCell], key: GroupKey, backbone: &str) -> Breakdown {
    let mut groups: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for c in cells {
        let g = groups.entry(key.of(c, backbone)).or_default();
        g.0 += 1;
        g.1 += c.score.value();
    }
    let rows = groups
        .into_iter()
        .map(|(group, (cells, inferred))| BreakdownRow {
            group,
            cells,
            inferred,
            protection: 1.0 - inferred / cells as f64,
            accuracy: inferred / cells as f64,
        })
        .collect();
    Breakdown { key, rows }
}

fn utility_of(u: &UtilityRecord) -> Result<(Option<f64>, Option<f64>), MetricError> {
    let norm = |s: Option<u8>| s.map(|s| normalize_judge_score(f64::from(s))).transpose();
    Ok((norm(u.readability)?, norm(u.meaning)?))
}

/// Assembles headline, per-document and grouped metrics. Aggregation is
/// micro over the corpus: cells and span counts are pooled before ratios.
pub fn build_report(inputs: &ReportInputs<'_>) -> Result<MetricsReport, MetricError> {
    let exp = exposures(inputs.cells);
    let cpr = compute_cpr(&exp)?;
    let ipr = compute_ipr(&exp)?;
    let one_minus_aac = compute_one_minus_aac(inputs.cells).ok();

    let mut cells_by_doc: BTreeMap<&str, Vec<ScoreCell>> = BTreeMap::new();
    for c in inputs.cells {
        cells_by_doc.entry(&c.doc_id).or_default().push(c.clone());
    }
    let utility_by_doc: BTreeMap<&str, &UtilityRecord> = inputs.utility.iter().map(|u| (u.doc_id.as_str(), u)).collect();

    let mut pooled = SpanMasking::default();
    let mut any_spans = false;
    let mut per_document = Vec::new();
    let (mut readability, mut meaning, mut rouge) = (Vec::new(), Vec::new(), Vec::new());
    for doc in inputs.documents {
        let mut dm = DocumentMetrics {
            doc_id: doc.doc_id.clone(),
            ..Default::default()
        };
        if let Some(cells) = cells_by_doc.get(doc.doc_id.as_str()) {
            let e = exposures(cells);
            dm.cpr = compute_cpr(&e).ok();
            dm.ipr = compute_ipr(&e).ok();
            dm.one_minus_aac = compute_one_minus_aac(cells).ok();
        }
        if let Some(out) = inputs.anonymized.get(&doc.doc_id) {
            let ranges = inputs.mask_ranges.and_then(|m| m.get(&doc.doc_id));
            let detection = ranges.map_or(MaskDetection::Containment, |r| MaskDetection::Coverage(r));
            if let Some(m) = span_masking(doc, out, detection, inputs.token_counting) {
                dm.token_recall = m.token_recall();
                dm.er_di = m.entity_recall(IdentifierType::Direct);
                dm.er_qi = m.entity_recall(IdentifierType::Quasi);
                pooled.absorb(&m);
                any_spans = true;
            }
        }
        if let Some(u) = utility_by_doc.get(doc.doc_id.as_str()) {
            let (r, m) = utility_of(u)?;
            dm.rouge_l = Some(u.rouge_l);
            if let (Some(r), Some(m)) = (r, m) {
                dm.mean_utility = Some((r + m + u.rouge_l) / 3.0);
            }
            readability.extend(r);
            meaning.extend(m);
            rouge.push(u.rouge_l);
        }
        per_document.push(dm);
    }

    let readability = mean(readability);
    let meaning = mean(meaning);
    let rouge_l = mean(rouge);
    let mean_utility = match (readability, meaning, rouge_l) {
        (Some(r), Some(m), Some(l)) => Some((r + m + l) / 3.0),
        _ => None,
    };
    let breakdowns = inputs
        .group_by
        .iter()
        .map(|k| breakdown(inputs.cells, *k, inputs.backbone))
        .collect();

    Ok(MetricsReport {
        label: inputs.label.to_string(),
        backbone: inputs.backbone.to_string(),
        documents: inputs.documents.len(),
        subjects: exp.len(),
        cells: inputs.cells.len(),
        cpr,
        ipr,
        one_minus_aac,
        token_recall: if any_spans { pooled.token_recall() } else { None },
        er_di: pooled.entity_recall(IdentifierType::Direct),
        er_qi: pooled.entity_recall(IdentifierType::Quasi),
        readability,
        meaning,
        rouge_l,
        mean_utility,
        inference_accuracy: inference_accuracy(inputs.cells),
        subject_match_ratio: subject_match_ratio(inputs.alignments),
        breakdowns,
        per_document,
        diagnostics: pooled.diagnostics,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

impl MetricsReport {
    /// Headline columns in table order: R, ER_di, ER_qi, 1-AAC, CPR, IPR, Mean.
    pub fn columns(&self) -> [Option<f64>; 7] {
        [
            self.token_recall,
            self.er_di,
            self.er_qi,
            self.one_minus_aac,
            Some(self.cpr),
            Some(self.ipr),
            self.mean_utility,
        ]
    }

    /// Aligned plain-text table, one row per report, three decimals.
    pub fn table(reports: &[MetricsReport]) -> String {
        const HEAD: [&str; 7] = ["R", "ER_di", "ER_qi", "1-AAC", "CPR", "IPR", "Mean"];
        let width = reports.iter().map(|r| r.label.len()).max().unwrap_or(0).max("Method".len());
        let mut out = format!("{:<width$}", "Method");
        for h in HEAD {
            let _ = write!(out, "  {h:>6}");
        }
        out.push('\n');
        for r in reports {
            let _ = write!(out, "{:<width$}", r.label);
            for v in r.columns() {
                let _ = write!(out, "  {:>6}", cell(v));
            }
            out.push('\n');
        }
        out
    }

    /// Grouped rows as text: `key  group  cells  protection  accuracy`.
    pub fn breakdown_table(&self) -> String {
        let mut out = String::new();
        for b in &self.breakdowns {
            let _ = writeln!(out, "[{}]", serde_json::to_value(b.key).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default());
            let width = b.rows.iter().map(|r| r.group.len()).max().unwrap_or(0).max(5);
            let _ = writeln!(out, "{:<width$}  {:>6}  {:>10}  {:>8}", "group", "cells", "protection", "accuracy");
            for r in &b.rows {
                let _ = writeln!(
                    out,
                    "{:<width$}  {:>6}  {:>10.3}  {:>8.3}",
                    r.group, r.cells, r.protection, r.accuracy
                );
            }
        }
        out
    }
}

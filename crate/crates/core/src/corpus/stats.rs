//! Dataset statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::io::CorpusError;
use super::model::{Document, PiiCategory, Source};

/// Certainty threshold used for the "certain PIIs" count.
pub const CERTAIN_THRESHOLD: u8 = 3;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub median: f64,
}

/// Aggregate counts over a set of documents.
///
/// PIIs are annotations with a non-empty value. Document length counts raw
/// characters with no whitespace normalization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub documents: usize,
    pub subjects: usize,
    pub piis: usize,
    pub piis_certain: usize,
    pub avg_subjects_per_doc: f64,
    pub avg_piis_per_subject: f64,
    pub per_category: BTreeMap<PiiCategory, usize>,
    pub subjects_per_doc: BTreeMap<usize, usize>,
    pub piis_per_subject: BTreeMap<usize, usize>,
    pub doc_length: LengthSummary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatisticsReport {
    pub total: DatasetCounts,
    pub by_source: BTreeMap<Source, DatasetCounts>,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn counts<'a>(docs: impl IntoIterator<Item = &'a Document>) -> DatasetCounts {
    let mut c = DatasetCounts::default();
    let mut lengths = Vec::new();
    for doc in docs {
        c.documents += 1;
        c.subjects += doc.subjects.len();
        *c.subjects_per_doc.entry(doc.subjects.len()).or_default() += 1;
        lengths.push(doc.char_len());
        for subject in &doc.subjects {
            let mut n = 0;
            for pii in subject.piis.iter().filter(|p| !p.value.trim().is_empty()) {
                n += 1;
                if pii.certainty >= CERTAIN_THRESHOLD {
                    c.piis_certain += 1;
                }
                *c.per_category.entry(pii.category).or_default() += 1;
            }
            c.piis += n;
            *c.piis_per_subject.entry(n).or_default() += 1;
        }
    }
    if c.documents > 0 {
        c.avg_subjects_per_doc = round2(c.subjects as f64 / c.documents as f64);
    }
    if c.subjects > 0 {
        c.avg_piis_per_subject = round2(c.piis as f64 / c.subjects as f64);
    }
    lengths.sort_unstable();
    if let (Some(&min), Some(&max)) = (lengths.first(), lengths.last()) {
        let n = lengths.len();
        let median = if n % 2 == 1 {
            lengths[n / 2] as f64
        } else {
            (lengths[n / 2 - 1] + lengths[n / 2]) as f64 / 2.0
        };
        c.doc_length = LengthSummary {
            min,
            max,
            mean: round2(lengths.iter().sum::<usize>() as f64 / n as f64),
            median,
        };
    }
    c
}

pub fn dataset_statistics(docs: &[Document]) -> Result<StatisticsReport, CorpusError> {
    if docs.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut by_source: BTreeMap<Source, Vec<&Document>> = BTreeMap::new();
    for d in docs {
        by_source.entry(d.source).or_default().push(d);
    }
    Ok(StatisticsReport {
        total: counts(docs),
        by_source: by_source
            .into_iter()
            .map(|(s, ds)| (s, counts(ds)))
            .collect(),
    })
}

fn group_digits(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

impl StatisticsReport {
    /// Plain-text table with one column per source plus a total column.
    pub fn to_table(&self) -> String {
        let mut columns: Vec<(String, &DatasetCounts)> = self
            .by_source
            .iter()
            .map(|(s, c)| (s.to_string(), c))
            .collect();
        columns.push(("total".into(), &self.total));
        type Cell = Box<dyn Fn(&DatasetCounts) -> String>;
        let rows: Vec<(&str, Cell)> = vec![
            ("Documents", Box::new(|c| group_digits(c.documents))),
            ("Subjects", Box::new(|c| group_digits(c.subjects))),
            ("Avg Subjects/Doc", Box::new(|c| format!("{:.2}", c.avg_subjects_per_doc))),
            ("PIIs", Box::new(|c| group_digits(c.piis))),
            ("PIIs (Certainty>=3)", Box::new(|c| group_digits(c.piis_certain))),
            ("Avg PIIs/Subject", Box::new(|c| format!("{:.2}", c.avg_piis_per_subject))),
            ("Avg Doc Length (chars)", Box::new(|c| format!("{:.2}", c.doc_length.mean))),
        ];
        let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let mut out = String::new();
        let _ = write!(out, "{:<label_w$}", "Metric");
        for (name, _) in &columns {
            let _ = write!(out, "  {name:>12}");
        }
        out.push('\n');
        for (label, f) in &rows {
            let _ = write!(out, "{label:<label_w$}");
            for (_, c) in &columns {
                let _ = write!(out, "  {:>12}", f(c));
            }
            out.push('\n');
        }
        out.push('\n');
        let _ = writeln!(out, "Per-category PII counts (total):");
        for cat in PiiCategory::ALL {
            let n = self.total.per_category.get(&cat).copied().unwrap_or(0);
            let _ = writeln!(out, "  {:<14}{:>8}", cat.as_str(), group_digits(n));
        }
        out
    }
}

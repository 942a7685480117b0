//! Dataset loading and serialization.
//!
//! The interchange format is one JSON document per line. Field names follow
//! [`Document`]. Invalid records are skipped and reported; valid ones load.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::Document;
use super::validate::{validate_document, ValidationConfig, Violation};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("unsupported dataset format `{0}` (expected jsonl or json)")]
    UnsupportedFormat(String),
    #[error("empty input")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    /// One JSON object per line.
    #[default]
    Jsonl,
    /// A single JSON array of documents.
    Json,
}

impl FromStr for DatasetFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Ok(DatasetFormat::Jsonl),
            "json" => Ok(DatasetFormat::Json),
            other => Err(CorpusError::UnsupportedFormat(other.to_string())),
        }
    }
}

impl DatasetFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => DatasetFormat::Json,
            _ => DatasetFormat::Jsonl,
        }
    }
}

/// A per-record problem found while loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadDiagnostic {
    /// 1-based line (JSONL) or array index + 1 (JSON).
    pub record: usize,
    pub doc_id: Option<String>,
    pub field: String,
    pub reason: String,
}

impl fmt::Display for LoadDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "record {} ({}): {}: {}",
            self.record,
            self.doc_id.as_deref().unwrap_or("?"),
            self.field,
            self.reason
        )
    }
}

impl LoadDiagnostic {
    fn from_violation(record: usize, v: Violation) -> Self {
        Self {
            record,
            doc_id: Some(v.doc_id),
            field: v.field,
            reason: v.reason,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDataset {
    pub documents: Vec<Document>,
    pub diagnostics: Vec<LoadDiagnostic>,
    /// Number of records rejected.
    pub rejected: usize,
    /// SHA-256 of the raw file bytes.
    pub digest: String,
}

impl LoadedDataset {
    pub fn is_clean(&self) -> bool {
        self.rejected == 0
    }
}

/// Reads and validates every document in `path`.
pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
    config: &ValidationConfig,
) -> Result<LoadedDataset, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|e| CorpusError::Unreadable {
        path: path.to_path_buf(),
        source: io::Error::new(io::ErrorKind::InvalidData, e),
    })?;
    let mut loaded = parse_dataset(&text, format, config);
    loaded.digest = digest;
    Ok(loaded)
}

/// Parses and validates dataset text already in memory.
pub fn parse_dataset(text: &str, format: DatasetFormat, config: &ValidationConfig) -> LoadedDataset {
    let mut out = LoadedDataset {
        digest: hex::encode(Sha256::digest(text.as_bytes())),
        ..Default::default()
    };
    let records: Vec<(usize, Result<serde_json::Value, String>)> = match format {
        DatasetFormat::Jsonl => text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, serde_json::from_str(l).map_err(|e| e.to_string())))
            .collect(),
        DatasetFormat::Json => match serde_json::from_str::<Vec<serde_json::Value>>(text) {
            Ok(values) => values
                .into_iter()
                .enumerate()
                .map(|(i, v)| (i + 1, Ok(v)))
                .collect(),
            Err(e) => vec![(1, Err(e.to_string()))],
        },
    };

    let mut seen_ids = std::collections::HashSet::new();
    for (record, value) in records {
        let value = match value {
            Ok(v) => v,
            Err(reason) => {
                out.rejected += 1;
                out.diagnostics.push(LoadDiagnostic {
                    record,
                    doc_id: None,
                    field: "<record>".into(),
                    reason: format!("malformed JSON: {reason}"),
                });
                continue;
            }
        };
        let doc_id = value
            .get("doc_id")
            .and_then(|v| v.as_str())
            .map(str::to_string);
        let doc: Document = match serde_json::from_value(value) {
            Ok(d) => d,
            Err(e) => {
                out.rejected += 1;
                out.diagnostics.push(LoadDiagnostic {
                    record,
                    doc_id,
                    field: "<record>".into(),
                    reason: format!("malformed record: {e}"),
                });
                continue;
            }
        };
        let mut violations = validate_document(&doc, config);
        if !seen_ids.insert(doc.doc_id.clone()) {
            violations.push(Violation {
                doc_id: doc.doc_id.clone(),
                field: "doc_id".into(),
                reason: "duplicate doc_id".into(),
            });
        }
        if violations.is_empty() {
            out.documents.push(doc);
        } else {
            out.rejected += 1;
            out.diagnostics.extend(
                violations
                    .into_iter()
                    .map(|v| LoadDiagnostic::from_violation(record, v)),
            );
        }
    }
    out
}

/// Serializes documents in the given format.
pub fn write_dataset<W: Write>(mut w: W, docs: &[Document], format: DatasetFormat) -> io::Result<()> {
    match format {
        DatasetFormat::Jsonl => {
            for doc in docs {
                serde_json::to_writer(&mut w, doc)?;
                w.write_all(b"\n")?;
            }
        }
        DatasetFormat::Json => {
            serde_json::to_writer_pretty(&mut w, docs)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn save_dataset(path: &Path, docs: &[Document], format: DatasetFormat) -> Result<(), CorpusError> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, docs, format).expect("writing to a Vec cannot fail");
    fs::write(path, buf).map_err(|source| CorpusError::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

//! One JSONL file per stage. Each line carries the run id and the document
//! it belongs to, so a partially written stage can be resumed.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord<T> {
    pub run_id: String,
    pub doc_id: String,
    pub data: T,
}

pub fn stage_path(dir: &Path, stage: &str) -> PathBuf {
    dir.join(format!("{stage}.jsonl"))
}

/// Records of `run_id` already present in the stage file. Lines from other
/// runs or that fail to parse are ignored, so they get recomputed.
pub fn read_stage<T: DeserializeOwned>(path: &Path, run_id: &str) -> io::Result<BTreeMap<String, T>> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(e) => return Err(e),
    };
    let mut out = BTreeMap::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<StageRecord<T>>(&line) {
            Ok(r) if r.run_id == run_id => {
                out.insert(r.doc_id, r.data);
            }
            Ok(_) => {}
            Err(e) => log::warn!("{}: skipping unreadable record: {e}", path.display()),
        }
    }
    Ok(out)
}

/// Rewrites the stage file with `records` in doc_id order, via a temporary
/// file so a crash never leaves a truncated stage.
pub fn write_stage<T: Serialize>(path: &Path, run_id: &str, records: &BTreeMap<String, T>) -> io::Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut w = io::BufWriter::new(fs::File::create(&tmp)?);
        for (doc_id, data) in records {
            let line = serde_json::to_string(&StageRecord {
                run_id: run_id.to_string(),
                doc_id: doc_id.clone(),
                data,
            })
            .map_err(io::Error::other)?;
            writeln!(w, "{line}")?;
        }
        w.flush()?;
    }
    fs::rename(tmp, path)
}

/// Writes `items` as plain JSONL, one value per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).map_err(io::Error::other)?;
        buf.push(b'\n');
    }
    fs::write(path, buf)
}

//! Content-addressed cassette files.
//!
//! Layout: `<root>/<first two hex chars>/<key>.json`, pretty-printed so a
//! recorded exchange can be read and diffed by hand.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{CassetteKey, ChatRequest, ChatResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub key: CassetteKey,
    pub request: ChatRequest,
    pub response: ChatResponse,
}

#[derive(Debug)]
pub struct CassetteStore {
    root: PathBuf,
    locks: Mutex<HashMap<CassetteKey, Arc<Mutex<()>>>>,
}

impl CassetteStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &CassetteKey) -> PathBuf {
        let shard = key.0.get(..2).unwrap_or("00");
        self.root.join(shard).join(format!("{}.json", key.0))
    }

    pub fn get(&self, key: &CassetteKey) -> io::Result<Option<CassetteEntry>> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let entry: CassetteEntry = serde_json::from_slice(&bytes).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}: {e}", path.display()),
            )
        })?;
        Ok(Some(entry))
    }

    pub fn contains(&self, key: &CassetteKey) -> bool {
        self.path_for(key).exists()
    }

    /// Writes `entry` atomically. Writes to the same key are serialized and
    /// an existing entry is left untouched.
    pub fn put(&self, entry: &CassetteEntry) -> io::Result<()> {
        let lock = {
            let mut locks = self.locks.lock().expect("lock table poisoned");
            locks.entry(entry.key.clone()).or_default().clone()
        };
        let _guard = lock.lock().expect("key lock poisoned");
        let path = self.path_for(&entry.key);
        if path.exists() {
            return Ok(());
        }
        let dir = path.parent().expect("sharded path has a parent");
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile_in(dir, &entry.key)?;
        let json = serde_json::to_vec_pretty(entry).map_err(io::Error::other)?;
        tmp.1.write_all(&json)?;
        tmp.1.write_all(b"\n")?;
        tmp.1.sync_all()?;
        drop(tmp.1);
        fs::rename(&tmp.0, &path)
    }

    /// Number of stored entries.
    pub fn len(&self) -> io::Result<usize> {
        let mut n = 0;
        for shard in fs::read_dir(&self.root)? {
            let shard = shard?;
            if !shard.file_type()?.is_dir() {
                continue;
            }
            for f in fs::read_dir(shard.path())? {
                if f?.path().extension().is_some_and(|e| e == "json") {
                    n += 1;
                }
            }
        }
        Ok(n)
    }

    pub fn is_empty(&self) -> io::Result<bool> {
        self.len().map(|n| n == 0)
    }
}

fn tempfile_in(dir: &Path, key: &CassetteKey) -> io::Result<(PathBuf, fs::File)> {
    let path = dir.join(format!(".{}.{}.tmp", key.0, std::process::id()));
    let file = fs::File::create(&path)?;
    Ok((path, file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Message, ModelTag, Sampling};

    fn entry(content: &str) -> CassetteEntry {
        let tag: ModelTag = "openai:m".parse().unwrap();
        let request = ChatRequest::new(&tag, vec![Message::user("q")], Sampling::new(0.0, 1.0, 16));
        CassetteEntry {
            key: request.key(),
            request,
            response: ChatResponse::stop(content),
        }
    }

    #[test]
    fn store_and_fetch_identity() {
        let dir = tempfile::tempdir().unwrap();
        let store = CassetteStore::open(dir.path()).unwrap();
        let e = entry("exact\tcontent ✓");
        store.put(&e).unwrap();
        assert_eq!(store.get(&e.key).unwrap(), Some(e.clone()));
        assert_eq!(store.len().unwrap(), 1);
        // second write of the same key is a no-op
        store.put(&entry("different")).unwrap();
        assert_eq!(store.get(&e.key).unwrap().unwrap().response.content, "exact\tcontent ✓");
    }

    #[test]
    fn on_disk_field_order_does_not_matter() {
        let dir = tempfile::tempdir().unwrap();
        let store = CassetteStore::open(dir.path()).unwrap();
        let e = entry("ok");
        let path = store.path_for(&e.key);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        // hand-written file with shuffled field order
        let json = format!(
            r#"{{"response":{{"usage":{{"output_tokens":0,"input_tokens":0}},"finish_reason":"stop","content":"ok"}},
               "request":{{"top_p":1.0,"temperature":0.0,"max_output":16,"messages":[{{"content":"q","role":"user"}}],"model":"m","provider":"openai"}},
               "key":"{}"}}"#,
            e.key
        );
        fs::write(&path, json).unwrap();
        let got = store.get(&e.key).unwrap().unwrap();
        assert_eq!(got.request.key(), e.key);
        assert_eq!(got, e);
    }

    #[test]
    fn concurrent_writers_leave_one_entry() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(CassetteStore::open(dir.path()).unwrap());
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let s = store.clone();
                std::thread::spawn(move || s.put(&entry("same")).unwrap())
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(store.len().unwrap(), 1);
    }
}

//! Shared helpers for unit tests.

use std::sync::Arc;

use crate::gateway::{CassetteStore, Gateway, RetryPolicy, ScriptedBackend};

/// A record-mode gateway over a fresh temporary store. The directory lives
/// as long as the returned guard.
pub fn recording(backend: ScriptedBackend) -> (tempfile::TempDir, Gateway, Arc<ScriptedBackend>) {
    let dir = tempfile::tempdir().expect("tempdir");
    let backend = Arc::new(backend);
    let gw = Gateway::record(CassetteStore::open(dir.path()).expect("store"), backend.clone())
        .with_retry(RetryPolicy::immediate(1));
    (dir, gw, backend)
}

/// A replay gateway over an empty store: any LLM call fails.
pub fn offline() -> (tempfile::TempDir, Gateway) {
    let dir = tempfile::tempdir().expect("tempdir");
    let gw = Gateway::replay(CassetteStore::open(dir.path()).expect("store"));
    (dir, gw)
}

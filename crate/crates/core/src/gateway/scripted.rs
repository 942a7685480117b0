//! Offline backends for tests and fixture recording.

use std::sync::atomic::{AtomicUsize, Ordering};

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse};

struct Rule {
    needles: Vec<String>,
    reply: String,
}

/// Answers each request with the first rule whose needles all occur in the
/// concatenated message contents.
#[derive(Default)]
pub struct ScriptedBackend {
    rules: Vec<Rule>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reply_when(mut self, needles: &[&str], reply: impl Into<String>) -> Self {
        self.rules.push(Rule {
            needles: needles.iter().map(|s| s.to_string()).collect(),
            reply: reply.into(),
        });
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatBackend for ScriptedBackend {
    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let haystack: String = req
            .messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        self.rules
            .iter()
            .find(|r| r.needles.iter().all(|n| haystack.contains(n.as_str())))
            .map(|r| ChatResponse::stop(r.reply.clone()))
            .ok_or_else(|| BackendError::Other(format!("no scripted reply for {}", req.summary())))
    }
}

/// Backend defined by a closure.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<ChatResponse, BackendError> + Send + Sync,
{
    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (self.0)(req)
    }
}

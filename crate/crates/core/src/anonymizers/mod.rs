//! Anonymization drivers: zero-shot redaction, DP paraphrase, iterative
//! adversarial rewriting, and an adapter for externally computed masks.

mod adversarial;
mod masks;

use serde::{Deserialize, Serialize};

pub use adversarial::{
    adversarial_anonymize, inference_prompt, parse_aa_inferences, parse_anonymized_output, render_inferences,
    AaInference, AaRound, AaTarget, AA_SAMPLING,
};
pub use masks::{apply_external_masks, load_mask_list, parse_mask_list, MaskList, MaskSpan};

use crate::corpus::Document;
use crate::gateway::{effective_temperature, ChatRequest, Gateway, GatewayError, Message, ModelTag, Sampling, DEFAULT_MAX_OUTPUT};
use crate::prompts;

pub const DEID_SAMPLING: Sampling = Sampling::new(0.05, 1.0, DEFAULT_MAX_OUTPUT);
pub const DP_SAMPLING: Sampling = Sampling::new(1.5, 1.0, DEFAULT_MAX_OUTPUT);

/// Documents longer than this many characters are rejected, never chunked.
pub const DEFAULT_MAX_INPUT_CHARS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Method {
    DeidGpt,
    DpPrompt,
    Adversarial,
    ExternalMask,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::DeidGpt => "deid_gpt",
            Method::DpPrompt => "dp_prompt",
            Method::Adversarial => "adversarial",
            Method::ExternalMask => "external_mask",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sampling parameters actually sent, after provider caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub temperature: f64,
    pub top_p: f64,
}

impl EffectiveParams {
    fn for_tag(tag: &ModelTag, sampling: Sampling) -> Self {
        Self {
            temperature: effective_temperature(&tag.provider, sampling.temperature),
            top_p: sampling.top_p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymizationRun {
    pub doc_id: String,
    pub method: Method,
    /// Absent for external masks.
    pub backbone: Option<String>,
    pub anonymized_text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rounds: Vec<AaRound>,
    pub effective_params: Option<EffectiveParams>,
    /// Char ranges of the original that were replaced; only for external masks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked_ranges: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum AnonymizeError {
    #[error("document {0} has empty text")]
    EmptyText(String),
    #[error("document {doc_id} has {chars} characters, above the {limit}-character input limit")]
    TooLong { doc_id: String, chars: usize, limit: usize },
    #[error("model returned empty output")]
    EmptyOutput,
    #[error("round {round}: no `#` separator in the anonymizer output")]
    MissingSeparator { round: u32 },
    #[error("round {round}: inference output has no parseable blocks")]
    NoInferences { round: u32 },
    #[error("rounds must be positive")]
    ZeroRounds,
    #[error("mask spans {a:?} and {b:?} overlap")]
    OverlappingMasks { a: (usize, usize), b: (usize, usize) },
    #[error("mask span {span:?} outside text of {len} characters")]
    MaskOutOfBounds { span: (usize, usize), len: usize },
    #[error("mask list line {line}: {message}")]
    MaskList { line: usize, message: String },
    #[error("cannot read mask list {path}: {source}")]
    MaskListIo {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Options shared by the LLM-backed drivers.
#[derive(Debug, Clone)]
pub struct AnonymizerConfig {
    pub max_input_chars: usize,
    pub rounds: u32,
    /// Reject inference blocks with missing fields instead of tolerating them.
    pub strict: bool,
}

impl Default for AnonymizerConfig {
    fn default() -> Self {
        Self {
            max_input_chars: DEFAULT_MAX_INPUT_CHARS,
            rounds: 3,
            strict: false,
        }
    }
}

pub(crate) fn check_input(doc: &Document, config: &AnonymizerConfig) -> Result<(), AnonymizeError> {
    if doc.text.trim().is_empty() {
        return Err(AnonymizeError::EmptyText(doc.doc_id.clone()));
    }
    let chars = doc.text.chars().count();
    if chars > config.max_input_chars {
        return Err(AnonymizeError::TooLong {
            doc_id: doc.doc_id.clone(),
            chars,
            limit: config.max_input_chars,
        });
    }
    Ok(())
}

pub(crate) fn ask(gw: &Gateway, tag: &ModelTag, messages: Vec<Message>, sampling: Sampling) -> Result<String, AnonymizeError> {
    let resp = gw.complete(&ChatRequest::new(tag, messages, sampling))?;
    if resp.content.trim().is_empty() {
        return Err(AnonymizeError::EmptyOutput);
    }
    Ok(resp.content)
}

pub fn deid_prompt(text: &str) -> String {
    prompts::fill(prompts::DEID_GPT, &[("text", text)])
}

pub fn dp_prompt_text(text: &str) -> String {
    prompts::fill(prompts::DP_PROMPT, &[("text", text)])
}

fn single_shot(
    gw: &Gateway,
    doc: &Document,
    tag: &ModelTag,
    config: &AnonymizerConfig,
    method: Method,
    prompt: String,
    sampling: Sampling,
) -> Result<AnonymizationRun, AnonymizeError> {
    check_input(doc, config)?;
    let effective = EffectiveParams::for_tag(tag, sampling);
    let mut diagnostics = Vec::new();
    if effective.temperature != sampling.temperature {
        diagnostics.push(format!(
            "temperature {} capped to {} for provider {}",
            sampling.temperature, effective.temperature, tag.provider
        ));
    }
    // output is taken whole, chatter included
    let text = ask(gw, tag, vec![Message::user(prompt)], sampling)?;
    Ok(AnonymizationRun {
        doc_id: doc.doc_id.clone(),
        method,
        backbone: Some(tag.to_string()),
        anonymized_text: text,
        rounds: Vec::new(),
        effective_params: Some(effective),
        masked_ranges: None,
        diagnostics,
    })
}

/// Zero-shot redaction of eight entity categories to `[redacted]`.
pub fn deid_gpt(gw: &Gateway, doc: &Document, tag: &ModelTag, config: &AnonymizerConfig) -> Result<AnonymizationRun, AnonymizeError> {
    single_shot(gw, doc, tag, config, Method::DeidGpt, deid_prompt(&doc.text), DEID_SAMPLING)
}

/// High-temperature paraphrase.
pub fn dp_prompt(gw: &Gateway, doc: &Document, tag: &ModelTag, config: &AnonymizerConfig) -> Result<AnonymizationRun, AnonymizeError> {
    single_shot(gw, doc, tag, config, Method::DpPrompt, dp_prompt_text(&doc.text), DP_SAMPLING)
}

//! Two-stage subject-wise PII inference: identify subjects, then infer CODE
//! and NON-CODE attributes per subject in two separate calls.

mod parse;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use parse::{parse_pii_response, parse_subject_analysis, ParseError, SubjectAnalysis};

use crate::corpus::{PiiCategory, PiiKind};
use crate::gateway::{
    ChatRequest, Gateway, GatewayError, GatewayMode, Message, ModelTag, Sampling, DEFAULT_MAX_OUTPUT,
};
use crate::prompts;

/// Adversary sampling: low temperature, full nucleus.
pub const ADVERSARY_SAMPLING: Sampling = Sampling::new(0.1, 1.0, DEFAULT_MAX_OUTPUT);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferredSubject {
    pub subject_id: u32,
    pub description: String,
}

/// One top-1 inference for one subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub category: PiiCategory,
    pub value: String,
    pub certainty: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub stage: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reprompted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub subjects: Vec<InferredSubject>,
    /// Claims keyed by subject id; every key exists in `subjects`.
    pub claims: BTreeMap<u32, Vec<Claim>>,
    pub transcripts: Vec<Transcript>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl InferenceResult {
    pub fn claims_for(&self, subject_id: u32) -> &[Claim] {
        self.claims.get(&subject_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Claims at or above `floor` with a non-empty value.
    pub fn evaluable(&self, floor: u8) -> impl Iterator<Item = (u32, &Claim)> {
        self.claims
            .iter()
            .flat_map(|(id, cs)| cs.iter().map(move |c| (*id, c)))
            .filter(move |(_, c)| c.certainty >= floor && !c.value.trim().is_empty())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AdversaryError {
    #[error("{stage}: {source}")]
    Gateway {
        stage: &'static str,
        #[source]
        source: GatewayError,
    },
    #[error("{stage}: {source}")]
    Parse {
        stage: &'static str,
        #[source]
        source: ParseError,
    },
    #[error("subject identification: document text is empty")]
    EmptyText,
}

impl AdversaryError {
    pub fn stage(&self) -> &'static str {
        match self {
            AdversaryError::Gateway { stage, .. } | AdversaryError::Parse { stage, .. } => stage,
            AdversaryError::EmptyText => "subjects",
        }
    }
}

const REPROMPT: &str = "Your previous response could not be parsed ({error}). Reply again following exactly the output format specified above, with no other text.";

/// The inference adversary bound to one backbone.
pub struct Adversary<'g> {
    gateway: &'g Gateway,
    model: ModelTag,
}

impl<'g> Adversary<'g> {
    pub fn new(gateway: &'g Gateway, model: ModelTag) -> Self {
        Self { gateway, model }
    }

    pub fn model(&self) -> &ModelTag {
        &self.model
    }

    /// Sends `prompt`, parses with `parse`, and on a parse failure reprompts
    /// once unless replaying.
    fn call<T>(
        &self,
        stage: &'static str,
        prompt: String,
        transcripts: &mut Vec<Transcript>,
        parse: impl Fn(&str) -> Result<T, ParseError>,
    ) -> Result<T, AdversaryError> {
        let gw = |messages: Vec<Message>| {
            let req = ChatRequest::new(&self.model, messages, ADVERSARY_SAMPLING);
            self.gateway
                .complete(&req)
                .map(|r| r.content)
                .map_err(|source| AdversaryError::Gateway { stage, source })
        };
        let first = gw(vec![Message::user(prompt.clone())])?;
        transcripts.push(Transcript {
            stage: stage.into(),
            response: first.clone(),
            reprompted: false,
        });
        match parse(&first) {
            Ok(v) => Ok(v),
            Err(e) if self.gateway.mode() != GatewayMode::Replay => {
                log::warn!("{stage}: {e}; reprompting once");
                let retry = prompts::fill(REPROMPT, &[("error", &e.to_string())]);
                let second = gw(vec![
                    Message::user(prompt),
                    Message::assistant(first),
                    Message::user(retry),
                ])?;
                transcripts.push(Transcript {
                    stage: stage.into(),
                    response: second.clone(),
                    reprompted: true,
                });
                parse(&second).map_err(|source| AdversaryError::Parse { stage, source })
            }
            Err(source) => Err(AdversaryError::Parse { stage, source }),
        }
    }

    pub fn identify_subjects(
        &self,
        text: &str,
        transcripts: &mut Vec<Transcript>,
    ) -> Result<SubjectAnalysis, AdversaryError> {
        if text.trim().is_empty() {
            return Err(AdversaryError::EmptyText);
        }
        self.call("subjects", subject_prompt(text), transcripts, parse_subject_analysis)
    }

    pub fn infer_piis(
        &self,
        text: &str,
        subjects: &[InferredSubject],
        kind: PiiKind,
        transcripts: &mut Vec<Transcript>,
    ) -> Result<BTreeMap<u32, Vec<Claim>>, AdversaryError> {
        let stage = match kind {
            PiiKind::Code => "code",
            PiiKind::NonCode => "noncode",
        };
        let n = subjects.len() as u32;
        self.call(stage, pii_prompt(text, subjects, kind), transcripts, |r| {
            parse_pii_response(r, kind, n)
        })
    }

    /// Runs both stages. CODE and NON-CODE calls run concurrently once
    /// subjects are known; no Stage B call is made for zero subjects.
    pub fn run(&self, text: &str) -> Result<InferenceResult, AdversaryError> {
        let mut transcripts = Vec::new();
        let analysis = self.identify_subjects(text, &mut transcripts)?;
        let mut result = InferenceResult {
            subjects: analysis.subjects,
            claims: BTreeMap::new(),
            transcripts: vec![],
            diagnostics: analysis.diagnostics,
        };
        if !result.subjects.is_empty() {
            let (mut t_code, mut t_noncode) = (Vec::new(), Vec::new());
            let (code, noncode) = rayon::join(
                || self.infer_piis(text, &result.subjects, PiiKind::Code, &mut t_code),
                || self.infer_piis(text, &result.subjects, PiiKind::NonCode, &mut t_noncode),
            );
            transcripts.extend(t_code);
            transcripts.extend(t_noncode);
            for (id, claims) in code?.into_iter().chain(noncode?) {
                result.claims.entry(id).or_default().extend(claims);
            }
        }
        result.transcripts = transcripts;
        Ok(result)
    }
}

/// Stage A prompt with the few-shot examples and `text` substituted.
pub fn subject_prompt(text: &str) -> String {
    let ex = &prompts::SUBJECT_EXAMPLES;
    prompts::fill(
        prompts::SUBJECT_IDENTIFICATION,
        &[
            ("example_text_1", ex[0].0),
            ("example_result_1", ex[0].1),
            ("example_text_2", ex[1].0),
            ("example_result_2", ex[1].1),
            ("example_text_3", ex[2].0),
            ("example_result_3", ex[2].1),
            ("example_text_4", ex[3].0),
            ("example_result_4", ex[3].1),
            ("text", text),
        ],
    )
}

/// Stage A result as placed in Stage B's analysis slot.
pub fn render_subject_analysis(subjects: &[InferredSubject]) -> String {
    let mut out = String::from("Individual Character Analysis:\n");
    for s in subjects {
        let _ = writeln!(out, "- Subject ID {}: {}", s.subject_id, s.description);
    }
    let _ = write!(out, "\nThe Number of Subjects: {}", subjects.len());
    out
}

/// Stage B prompt for one kind.
pub fn pii_prompt(text: &str, subjects: &[InferredSubject], kind: PiiKind) -> String {
    let analysis = render_subject_analysis(subjects);
    let (template, defs, example, cats): (_, _, _, &[PiiCategory]) = match kind {
        PiiKind::Code => (
            prompts::CODE_INFERENCE,
            prompts::CODE_TAG_DEFINITIONS,
            prompts::CODE_JSON_EXAMPLE,
            &PiiCategory::CODE,
        ),
        PiiKind::NonCode => (
            prompts::NONCODE_INFERENCE,
            prompts::NONCODE_TAG_DEFINITIONS,
            prompts::NONCODE_JSON_EXAMPLE,
            &PiiCategory::NON_CODE,
        ),
    };
    let tags = cats.iter().map(|c| c.prompt_tag()).collect::<Vec<_>>().join(", ");
    prompts::fill(
        template,
        &[
            ("text", text),
            ("subject_analysis", &analysis),
            ("pii_tag_definitions", defs),
            ("certainty_scale", prompts::CERTAINTY_SCALE),
            ("pii_tag", &tags),
            ("json_output_example", example),
        ],
    )
}

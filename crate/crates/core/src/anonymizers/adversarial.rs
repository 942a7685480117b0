use serde::{Deserialize, Serialize};

use super::{ask, check_input, AnonymizationRun, AnonymizeError, AnonymizerConfig, EffectiveParams, Method};
use crate::corpus::{Document, Source};
use crate::gateway::{Gateway, Message, ModelTag, Sampling, DEFAULT_MAX_OUTPUT};
use crate::prompts;

pub const AA_SAMPLING: Sampling = Sampling::new(0.1, 1.0, DEFAULT_MAX_OUTPUT);

/// Whose attributes the adversary guesses: the applicant of a legal case or
/// the author of a post.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AaTarget {
    Applicant,
    Author,
}

impl AaTarget {
    pub fn for_source(source: Source) -> Self {
        match source {
            Source::Tab => AaTarget::Applicant,
            Source::Panorama | Source::Custom => AaTarget::Author,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AaInference {
    pub attribute: String,
    pub inference: String,
    pub guesses: Vec<String>,
    pub certainty: Option<u8>,
}

/// One refinement round: the raw inference and anonymization replies plus
/// the parsed inferences that were fed forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AaRound {
    pub round: u32,
    pub inference_response: String,
    pub inferences: Vec<AaInference>,
    pub anonymization_response: String,
    #[serde(default)]
    pub separator_heuristic: bool,
}

pub fn inference_prompt(text: &str, target: AaTarget) -> String {
    let descriptions: Vec<&str> = prompts::AA_TARGETS
        .iter()
        .map(|(_, applicant, author)| match target {
            AaTarget::Applicant => *applicant,
            AaTarget::Author => *author,
        })
        .collect();
    let blocks: Vec<String> = prompts::AA_TARGETS
        .iter()
        .map(|(tag, _, _)| {
            // the categories are open-ended, so no option list follows the guess line
            prompts::fill(prompts::AA_FORMAT_BLOCK, &[("target_attribute", tag), ("options", "")])
                .replace("separated by ; \n", "separated by ;\n")
        })
        .collect();
    let template = match target {
        AaTarget::Applicant => prompts::AA_INFERENCE_USER_APPLICANT,
        AaTarget::Author => prompts::AA_INFERENCE_USER_AUTHOR,
    };
    prompts::fill(
        template,
        &[
            ("target_attribute_str", &descriptions.join(", ")),
            ("text", text),
            ("format_blocks", &blocks.join("\n\n")),
        ],
    )
}

fn field<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    let bare = line.trim().trim_start_matches(['*', '-', ' ']);
    let (head, rest) = bare.split_once(':')?;
    head.trim_matches('*').trim().eq_ignore_ascii_case(name).then(|| rest.trim_start_matches('*').trim())
}

/// Parses `Type:` / `Inference:` / `Guess:` / `Certainty:` blocks. Field
/// names match case-insensitively; inference text may continue over lines.
/// In strict mode a block missing a guess or certainty is an error.
pub fn parse_aa_inferences(response: &str, strict: bool) -> Result<Vec<AaInference>, String> {
    let mut out: Vec<AaInference> = Vec::new();
    let mut in_inference = false;
    for line in response.lines() {
        if let Some(t) = field(line, "type") {
            out.push(AaInference {
                attribute: t.to_string(),
                inference: String::new(),
                guesses: Vec::new(),
                certainty: None,
            });
            in_inference = false;
            continue;
        }
        let Some(cur) = out.last_mut() else { continue };
        if let Some(i) = field(line, "inference") {
            cur.inference = i.to_string();
            in_inference = true;
        } else if let Some(g) = field(line, "guess") {
            cur.guesses = g.split(';').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect();
            in_inference = false;
        } else if let Some(c) = field(line, "certainty") {
            cur.certainty = c.chars().find(char::is_ascii_digit).and_then(|d| d.to_digit(10)).map(|d| d as u8).filter(|d| (1..=5).contains(d));
            in_inference = false;
        } else if in_inference && !line.trim().is_empty() {
            cur.inference.push(' ');
            cur.inference.push_str(line.trim());
        }
    }
    if strict {
        if let Some(bad) = out.iter().find(|b| b.guesses.is_empty() || b.certainty.is_none()) {
            return Err(format!("block `{}` lacks a guess or certainty", bad.attribute));
        }
    }
    Ok(out)
}

/// Renders parsed inferences in the same block layout the model was asked for.
pub fn render_inferences(inferences: &[AaInference]) -> String {
    inferences
        .iter()
        .map(|i| {
            format!(
                "Type: {}\nInference: {}\nGuess: {}\nCertainty: {}",
                i.attribute,
                i.inference,
                i.guesses.join("; "),
                i.certainty.map_or_else(|| "-".to_string(), |c| c.to_string())
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Text after the first line that is exactly `#`. Falls back to the text
/// after the last `#` character; the flag reports whether the fallback was
/// used. `None` if neither yields text.
pub fn parse_anonymized_output(response: &str) -> Option<(String, bool)> {
    let lines: Vec<&str> = response.lines().collect();
    if let Some(i) = lines.iter().position(|l| l.trim() == "#") {
        let rest = lines[i + 1..].join("\n").trim().to_string();
        if !rest.is_empty() {
            return Some((rest, false));
        }
    }
    let (_, tail) = response.rsplit_once('#')?;
    let tail = tail.trim();
    (!tail.is_empty()).then(|| (tail.to_string(), true))
}

/// Iterative adversarial anonymization: each round infers the target's
/// attributes from the current text and rewrites it to defeat them. All
/// inferences are passed on regardless of certainty.
pub fn adversarial_anonymize(
    gw: &Gateway,
    doc: &Document,
    tag: &ModelTag,
    target: AaTarget,
    config: &AnonymizerConfig,
) -> Result<AnonymizationRun, AnonymizeError> {
    check_input(doc, config)?;
    if config.rounds == 0 {
        return Err(AnonymizeError::ZeroRounds);
    }
    let anonymize_template = match target {
        AaTarget::Applicant => prompts::AA_ANONYMIZE_USER_APPLICANT,
        AaTarget::Author => prompts::AA_ANONYMIZE_USER_AUTHOR,
    };
    let mut text = doc.text.clone();
    let mut rounds = Vec::new();
    let mut diagnostics = Vec::new();
    for round in 1..=config.rounds {
        let inference_response = ask(
            gw,
            tag,
            vec![Message::system(prompts::AA_INFERENCE_SYSTEM), Message::user(inference_prompt(&text, target))],
            AA_SAMPLING,
        )?;
        let inferences = parse_aa_inferences(&inference_response, config.strict).map_err(|e| {
            log::warn!("{}: round {round}: {e}", doc.doc_id);
            AnonymizeError::NoInferences { round }
        })?;
        let inference_results = if inferences.is_empty() {
            if config.strict {
                return Err(AnonymizeError::NoInferences { round });
            }
            diagnostics.push(format!("round {round}: inference blocks unparsed; passing raw reply"));
            inference_response.trim().to_string()
        } else {
            render_inferences(&inferences)
        };
        let anonymization_response = ask(
            gw,
            tag,
            vec![
                Message::system(prompts::AA_ANONYMIZE_SYSTEM),
                Message::user(prompts::fill(
                    anonymize_template,
                    &[("text", &text), ("inference_results", &inference_results)],
                )),
            ],
            AA_SAMPLING,
        )?;
        let (next, heuristic) =
            parse_anonymized_output(&anonymization_response).ok_or(AnonymizeError::MissingSeparator { round })?;
        if heuristic {
            diagnostics.push(format!("round {round}: no `#` line; used text after the last `#`"));
        }
        text = next;
        rounds.push(AaRound {
            round,
            inference_response,
            inferences,
            anonymization_response,
            separator_heuristic: heuristic,
        });
    }
    Ok(AnonymizationRun {
        doc_id: doc.doc_id.clone(),
        method: Method::Adversarial,
        backbone: Some(tag.to_string()),
        anonymized_text: text,
        rounds,
        effective_params: Some(EffectiveParams::for_tag(tag, AA_SAMPLING)),
        masked_ranges: None,
        diagnostics,
    })
}

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::age::{ages_agree, parse_age_lenient};
use super::jaro::jaro_winkler;
use super::location::compare_location;
use super::Score;
use crate::corpus::PiiCategory;

/// Similarity at or above which free-text values are a match.
pub const JW_THRESHOLD: f64 = 0.85;

const HONORIFICS: &[&str] = &[
    "mr", "mrs", "ms", "miss", "mx", "dr", "prof", "professor", "sir", "dame", "madam", "madame",
    "mme", "m", "herr", "frau", "judge", "rev", "fr",
];

/// Result of a rule comparator. When `decided` is false the score is a
/// provisional 0.0 and the pair may go to the LLM fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub score: Score,
    pub decided: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl RuleOutcome {
    fn decided(score: Score) -> Self {
        Self {
            score,
            decided: true,
            note: None,
        }
    }

    fn undecided() -> Self {
        Self {
            score: Score::Mismatch,
            decided: false,
            note: None,
        }
    }
}

/// Whether an undecided or rule-mismatched pair of this category may be
/// re-judged by the LLM. CODE and closed option sets are final.
pub fn allows_fallback(category: PiiCategory) -> bool {
    !category.is_code() && category.options().is_none()
}

pub fn strip_honorifics(name: &str) -> String {
    let mut tokens: Vec<&str> = name.split_whitespace().collect();
    while let Some(first) = tokens.first() {
        let bare = first.trim_end_matches('.').to_lowercase();
        if tokens.len() > 1 && HONORIFICS.contains(&bare.as_str()) {
            tokens.remove(0);
        } else {
            break;
        }
    }
    tokens.join(" ")
}

fn digits(s: &str) -> String {
    s.chars().filter(char::is_ascii_digit).collect()
}

fn folded(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Normal form used for exact CODE comparison.
pub fn normalize_code(category: PiiCategory, value: &str) -> String {
    match category {
        PiiCategory::Phone | PiiCategory::IdNumber | PiiCategory::DriverLicense => {
            let d = digits(value);
            // identifiers without digits compare by their folded text
            if d.is_empty() {
                folded(value)
            } else {
                d
            }
        }
        _ => folded(value).split_whitespace().collect(),
    }
}

/// Rule-based comparison of one ground-truth value with one prediction.
pub fn compare_rule(category: PiiCategory, gt: &str, pred: &str, age_reference: NaiveDate) -> RuleOutcome {
    if category.is_code() {
        let equal = normalize_code(category, gt) == normalize_code(category, pred);
        return RuleOutcome::decided(if equal { Score::Match } else { Score::Mismatch });
    }
    match category {
        PiiCategory::Sex | PiiCategory::Education | PiiCategory::Relationship => {
            RuleOutcome::decided(if folded(gt) == folded(pred) {
                Score::Match
            } else {
                Score::Mismatch
            })
        }
        PiiCategory::Age => {
            match (parse_age_lenient(gt, age_reference), parse_age_lenient(pred, age_reference)) {
                (Some(a), Some(b)) => RuleOutcome::decided(if ages_agree(a, b) {
                    Score::Match
                } else {
                    Score::Mismatch
                }),
                _ => RuleOutcome::undecided(),
            }
        }
        PiiCategory::Location => match compare_location(gt, pred) {
            Some(v) => RuleOutcome {
                score: v.score,
                decided: true,
                note: v.note,
            },
            None => RuleOutcome::undecided(),
        },
        PiiCategory::Name => similarity(&strip_honorifics(gt), &strip_honorifics(pred)),
        _ => similarity(gt, pred),
    }
}

fn similarity(gt: &str, pred: &str) -> RuleOutcome {
    if jaro_winkler(gt, pred) >= JW_THRESHOLD {
        RuleOutcome::decided(Score::Match)
    } else {
        RuleOutcome::undecided()
    }
}

//! Invariant checks for loaded documents.

use std::collections::{HashMap, HashSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::model::{normalize_value, Document, PiiCategory, PiiRecord};

/// Maximum width of an annotated age range, in years.
pub const MAX_AGE_RANGE: u32 = 10;

/// Maximum number of slash-delimited location levels.
pub const MAX_LOCATION_LEVELS: usize = 4;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ValidationConfig {
    /// Reference date for age values.
    pub age_reference: NaiveDate,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            age_reference: NaiveDate::from_ymd_opt(2025, 9, 1).expect("valid date"),
        }
    }
}

/// One failed invariant, located by document and field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub doc_id: String,
    pub field: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.doc_id, self.field, self.reason)
    }
}

/// Closed age interval in years.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgeInterval {
    pub lo: u32,
    pub hi: u32,
}

/// Parses an annotated age: a single integer (`27`) or a range (`25-35`).
pub fn parse_age_strict(value: &str) -> Result<AgeInterval, String> {
    let v = value.trim();
    let v = v.replace(['–', '—'], "-");
    if let Some((lo, hi)) = v.split_once('-') {
        let lo: u32 = lo.trim().parse().map_err(|_| format!("bad age range `{value}`"))?;
        let hi: u32 = hi.trim().parse().map_err(|_| format!("bad age range `{value}`"))?;
        if hi <= lo {
            return Err(format!("age range `{value}` must have hi > lo"));
        }
        if hi - lo > MAX_AGE_RANGE {
            return Err(format!(
                "age range `{value}` spans {} years (max {MAX_AGE_RANGE})",
                hi - lo
            ));
        }
        Ok(AgeInterval { lo, hi })
    } else {
        let age: u32 = v.parse().map_err(|_| format!("bad age `{value}`"))?;
        Ok(AgeInterval { lo: age, hi: age })
    }
}

/// Splits a location into its levels, most specific first.
pub fn location_levels(value: &str) -> Vec<&str> {
    value.split('/').map(str::trim).collect()
}

fn check_value(record: &PiiRecord) -> Result<(), String> {
    let value = record.value.trim();
    if value.is_empty() {
        return Ok(());
    }
    if let Some(options) = record.category.options() {
        if !options.iter().any(|o| o.eq_ignore_ascii_case(value)) {
            return Err(format!(
                "`{value}` is not one of [{}]",
                options.join(", ")
            ));
        }
    }
    match record.category {
        PiiCategory::Age => parse_age_strict(value).map(|_| ()),
        PiiCategory::Location => {
            let levels = location_levels(value);
            if levels.len() > MAX_LOCATION_LEVELS {
                return Err(format!(
                    "location `{value}` has {} levels (max {MAX_LOCATION_LEVELS})",
                    levels.len()
                ));
            }
            if levels.iter().any(|l| l.is_empty()) {
                return Err(format!("location `{value}` has an empty level"));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Checks every type invariant of `doc`, returning all violations found.
pub fn validate_document(doc: &Document, _config: &ValidationConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: String, reason: String| {
        out.push(Violation {
            doc_id: doc.doc_id.clone(),
            field,
            reason,
        })
    };

    if doc.doc_id.trim().is_empty() {
        push("doc_id".into(), "must be non-empty".into());
    }
    if doc.text.is_empty() {
        push("text".into(), "must be non-empty".into());
    }

    let mut ids: Vec<u32> = doc.subjects.iter().map(|s| s.subject_id).collect();
    ids.sort_unstable();
    let contiguous = ids.iter().enumerate().all(|(i, id)| *id as usize == i);
    if !contiguous {
        push(
            "subjects.subject_id".into(),
            format!("ids must be unique and contiguous from 0, got {ids:?}"),
        );
    }

    for (si, subject) in doc.subjects.iter().enumerate() {
        let mut seen: HashSet<(PiiCategory, String)> = HashSet::new();
        for (pi, pii) in subject.piis.iter().enumerate() {
            let field = |name: &str| format!("subjects[{si}].piis[{pi}].{name}");
            if pii.hardness > 5 {
                push(field("hardness"), format!("{} outside 0..=5", pii.hardness));
            }
            if pii.certainty > 5 {
                push(field("certainty"), format!("{} outside 0..=5", pii.certainty));
            }
            if pii.certainty > 0 && pii.value.trim().is_empty() {
                push(field("value"), "empty value with certainty > 0".into());
            }
            if let Err(reason) = check_value(pii) {
                push(field("value"), reason);
            }
            if !pii.value.trim().is_empty()
                && !seen.insert((pii.category, normalize_value(&pii.value)))
            {
                push(
                    field("value"),
                    format!("duplicate {} value `{}`", pii.category, pii.value),
                );
            }
        }
    }

    if let Some(target) = doc.target_subject_id {
        if doc.subject(target).is_none() {
            push(
                "target_subject_id".into(),
                format!("{target} does not reference a subject"),
            );
        }
    }

    if let Some(spans) = &doc.entity_spans {
        let len = doc.char_len();
        let mut by_entity: HashMap<&str, (usize, &super::model::EntitySpan)> = HashMap::new();
        for (i, span) in spans.iter().enumerate() {
            if span.start >= span.end || span.end > len {
                push(
                    format!("entity_spans[{i}]"),
                    format!(
                        "offsets ({}, {}) invalid for text of {len} chars",
                        span.start, span.end
                    ),
                );
            }
            match by_entity.get(span.entity_id.as_str()) {
                Some((j, first))
                    if first.entity_type != span.entity_type
                        || first.identifier_type != span.identifier_type =>
                {
                    push(
                        format!("entity_spans[{i}]"),
                        format!(
                            "entity `{}` labels disagree with entity_spans[{j}]",
                            span.entity_id
                        ),
                    );
                }
                Some(_) => {}
                None => {
                    by_entity.insert(span.entity_id.as_str(), (i, span));
                }
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::model::{EntitySpan, EntityType, IdentifierType, Source, SubjectRecord};

    fn pii(category: PiiCategory, value: &str, certainty: u8) -> PiiRecord {
        PiiRecord {
            category,
            value: value.into(),
            hardness: 1,
            certainty,
        }
    }

    fn doc(piis: Vec<PiiRecord>) -> Document {
        Document {
            doc_id: "d".into(),
            source: Source::Custom,
            text: "Anna lives in Oslo.".into(),
            subjects: vec![SubjectRecord {
                subject_id: 0,
                description: "Anna".into(),
                piis,
            }],
            entity_spans: None,
            target_subject_id: Some(0),
        }
    }

    fn fields(d: &Document) -> Vec<String> {
        validate_document(d, &ValidationConfig::default())
            .into_iter()
            .map(|v| v.field)
            .collect()
    }

    #[test]
    fn certainty_out_of_range_names_field() {
        let d = doc(vec![pii(PiiCategory::Name, "Anna", 7)]);
        assert_eq!(fields(&d), vec!["subjects[0].piis[0].certainty"]);
    }

    #[test]
    fn age_range_wider_than_ten_years_rejected() {
        let d = doc(vec![pii(PiiCategory::Age, "20-35", 4)]);
        let v = validate_document(&d, &ValidationConfig::default());
        assert_eq!(v.len(), 1);
        assert!(v[0].reason.contains("spans 15"), "{}", v[0].reason);
        assert!(fields(&doc(vec![pii(PiiCategory::Age, "25-35", 4)])).is_empty());
        assert!(fields(&doc(vec![pii(PiiCategory::Age, "27", 4)])).is_empty());
    }

    #[test]
    fn option_sets_and_location_levels() {
        assert!(!fields(&doc(vec![pii(PiiCategory::Sex, "Other", 3)])).is_empty());
        assert!(fields(&doc(vec![pii(PiiCategory::Sex, "female", 3)])).is_empty());
        assert!(!fields(&doc(vec![pii(PiiCategory::Education, "Masters", 3)])).is_empty());
        assert!(fields(&doc(vec![pii(PiiCategory::Relationship, "Widowed", 3)])).is_empty());
        assert!(fields(&doc(vec![pii(PiiCategory::Location, "a / b / c / d", 3)])).is_empty());
        assert!(!fields(&doc(vec![pii(PiiCategory::Location, "a / b / c / d / e", 3)])).is_empty());
        assert!(!fields(&doc(vec![pii(PiiCategory::Location, "Oslo / ", 3)])).is_empty());
    }

    #[test]
    fn duplicate_value_rejected_but_same_category_allowed() {
        let d = doc(vec![
            pii(PiiCategory::Phone, "555-1234", 5),
            pii(PiiCategory::Phone, "555-9999", 5),
        ]);
        assert!(fields(&d).is_empty());
        let d = doc(vec![
            pii(PiiCategory::Name, "Anna  Berg", 5),
            pii(PiiCategory::Name, "anna berg", 5),
        ]);
        assert_eq!(fields(&d), vec!["subjects[0].piis[1].value"]);
    }

    #[test]
    fn empty_value_needs_zero_certainty() {
        assert!(fields(&doc(vec![pii(PiiCategory::Email, "", 0)])).is_empty());
        assert!(!fields(&doc(vec![pii(PiiCategory::Email, "", 2)])).is_empty());
    }

    #[test]
    fn subject_ids_and_target() {
        let mut d = doc(vec![]);
        d.subjects[0].subject_id = 1;
        let f = fields(&d);
        assert!(f.contains(&"subjects.subject_id".to_string()));
        assert!(f.contains(&"target_subject_id".to_string()));
    }

    #[test]
    fn span_bounds_and_entity_consistency() {
        let mut d = doc(vec![]);
        let span = |s, e, t, id: &str| EntitySpan {
            start: s,
            end: e,
            entity_type: t,
            identifier_type: IdentifierType::Direct,
            entity_id: id.into(),
        };
        d.entity_spans = Some(vec![
            span(0, 4, EntityType::Person, "e1"),
            span(14, 18, EntityType::Loc, "e2"),
        ]);
        assert!(fields(&d).is_empty());
        d.entity_spans = Some(vec![
            span(0, 4, EntityType::Person, "e1"),
            span(14, 40, EntityType::Loc, "e2"),
            span(0, 4, EntityType::Org, "e1"),
        ]);
        assert_eq!(fields(&d), vec!["entity_spans[1]", "entity_spans[2]"]);
    }
}

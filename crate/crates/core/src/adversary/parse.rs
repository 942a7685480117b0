use std::collections::BTreeMap;

use serde_json::Value;

use super::{Claim, InferredSubject};
use crate::corpus::{PiiCategory, PiiKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("missing `The Number of Subjects:` line")]
    MissingCount,
    #[error("unparseable subject count `{0}`")]
    BadCount(String),
    #[error("response is not a JSON object: {0}")]
    NotJson(String),
    #[error("missing `subjects` array")]
    NoSubjects,
    #[error("subject entry {index} has no valid subject_id")]
    BadSubjectId { index: usize },
    #[error("subject_id {id} out of range (0..{n})")]
    SubjectOutOfRange { id: u32, n: u32 },
    #[error("subject {subject}: unknown tag `{tag}`")]
    UnknownTag { subject: u32, tag: String },
    #[error("subject {subject}: tag {tag} does not belong in the {expected} call")]
    WrongKind {
        subject: u32,
        tag: String,
        expected: PiiKind,
    },
    #[error("subject {subject}: missing field {field}")]
    MissingField { subject: u32, field: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectAnalysis {
    pub subjects: Vec<InferredSubject>,
    pub declared: usize,
    pub diagnostics: Vec<String>,
}

fn is_excluded(item: &str) -> bool {
    let l = item.trim_start().to_lowercase();
    l.starts_with("not counted") || l.starts_with("must counted") || l.starts_with("must be counted")
}

/// Parses the subject-identification response: top-level bullets under
/// `Individual Character Analysis:` (minus the `Not counted` and
/// `Must counted` groups and their children) and the declared count. If
/// the two disagree the bullets win and a diagnostic is attached.
pub fn parse_subject_analysis(response: &str) -> Result<SubjectAnalysis, ParseError> {
    let lines: Vec<&str> = response.lines().collect();
    let start = lines
        .iter()
        .rposition(|l| l.trim().trim_matches('*').trim().eq_ignore_ascii_case("Individual Character Analysis:"))
        .map_or(0, |i| i + 1);
    let mut subjects = Vec::new();
    let mut declared = None;
    for line in &lines[start..] {
        let bare = line.trim().trim_matches('*').trim();
        if bare.to_lowercase().starts_with("the number of subjects") {
            let rest = bare.split_once(':').map_or("", |(_, r)| r).trim();
            let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
            declared = Some(digits.parse::<usize>().map_err(|_| ParseError::BadCount(rest.to_string()))?);
            break;
        }
        let top_level = !line.starts_with(char::is_whitespace);
        let item = line.strip_prefix("- ").or_else(|| line.strip_prefix("* "));
        if let (true, Some(item)) = (top_level, item) {
            if !is_excluded(item) && !item.trim().is_empty() {
                subjects.push(InferredSubject {
                    subject_id: subjects.len() as u32,
                    description: item.trim().to_string(),
                });
            }
        }
    }
    let declared = declared.ok_or(ParseError::MissingCount)?;
    let mut diagnostics = Vec::new();
    if declared != subjects.len() {
        diagnostics.push(format!(
            "subject count discrepancy: declared {declared}, listed {}; using the listed subjects",
            subjects.len()
        ));
    }
    Ok(SubjectAnalysis {
        subjects,
        declared,
        diagnostics,
    })
}

fn json_span(response: &str) -> Result<Value, ParseError> {
    let (Some(a), Some(b)) = (response.find('{'), response.rfind('}')) else {
        return Err(ParseError::NotJson("no braces found".into()));
    };
    if b < a {
        return Err(ParseError::NotJson("no braces found".into()));
    }
    serde_json::from_str(&response[a..=b]).map_err(|e| ParseError::NotJson(e.to_string()))
}

fn as_u32(v: &Value) -> Option<u32> {
    v.as_u64()
        .map(|n| n as u32)
        .or_else(|| v.as_str().and_then(|s| s.trim().parse().ok()))
}

fn first<'a>(obj: &'a Value, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| obj.get(*k))
}

/// Top-1 keyword: the first element when a list is given.
fn keyword(v: Option<&Value>) -> String {
    match v {
        Some(Value::String(s)) => s.trim().to_string(),
        Some(Value::Array(items)) => keyword(items.first()),
        Some(Value::Number(n)) => n.to_string(),
        _ => String::new(),
    }
}

/// Parses a Stage B object:
/// `{"subjects":[{"subject_id":0,"pii":[{"tag":..,"keyword":..,"certainty":..}]}]}`.
/// Code fences and surrounding chatter are tolerated; anything outside the
/// outermost braces is ignored.
pub fn parse_pii_response(
    response: &str,
    kind: PiiKind,
    n_subjects: u32,
) -> Result<BTreeMap<u32, Vec<Claim>>, ParseError> {
    let root = json_span(response)?;
    let subjects = first(&root, &["subjects", "results"])
        .and_then(Value::as_array)
        .ok_or(ParseError::NoSubjects)?;
    let mut out: BTreeMap<u32, Vec<Claim>> = BTreeMap::new();
    for (index, s) in subjects.iter().enumerate() {
        let id = first(s, &["subject_id", "Subject ID", "id"])
            .and_then(as_u32)
            .ok_or(ParseError::BadSubjectId { index })?;
        if id >= n_subjects {
            return Err(ParseError::SubjectOutOfRange { id, n: n_subjects });
        }
        let items = first(s, &["pii", "piis", "tags", "PII"]).and_then(Value::as_array);
        let mut claims = Vec::new();
        for item in items.into_iter().flatten() {
            let tag = first(item, &["tag", "Tag"]).and_then(Value::as_str).unwrap_or("").to_string();
            let category: PiiCategory = tag.parse().map_err(|_| ParseError::UnknownTag {
                subject: id,
                tag: tag.clone(),
            })?;
            if category.kind() != kind {
                return Err(ParseError::WrongKind {
                    subject: id,
                    tag,
                    expected: kind,
                });
            }
            let certainty = first(item, &["certainty", "Certainty"])
                .and_then(as_u32)
                .unwrap_or(0)
                .min(5) as u8;
            claims.push(Claim {
                category,
                value: keyword(first(item, &["keyword", "Keyword", "value"])),
                certainty,
            });
        }
        if kind == PiiKind::NonCode {
            if let Some(missing) = PiiCategory::NON_CODE.iter().find(|c| !claims.iter().any(|x| x.category == **c)) {
                return Err(ParseError::MissingField {
                    subject: id,
                    field: missing.prompt_tag(),
                });
            }
        }
        out.entry(id).or_default().extend(claims);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const THREE: &str = "Individual Character Analysis:
- Anna Berg - post author
- Tom - Anna's brother, a nurse
  - mentioned twice
- The landlord - owns the flat
- Not counted:
  - Collective references without a specific number of persons: the neighbours

The Number of Subjects: 3";

    #[test]
    fn bullets_and_count() {
        let a = parse_subject_analysis(THREE).unwrap();
        assert_eq!(a.subjects.len(), 3);
        assert_eq!(a.subjects[1].description, "Tom - Anna's brother, a nurse");
        assert_eq!(a.subjects[2].subject_id, 2);
        assert!(a.diagnostics.is_empty());
    }

    #[test]
    fn bullets_win_over_declared_count() {
        let t = THREE.replace("- The landlord", "- A plumber - fixed the sink\n- The landlord");
        let a = parse_subject_analysis(&t).unwrap();
        assert_eq!(a.subjects.len(), 4);
        assert_eq!(a.declared, 3);
        assert_eq!(a.diagnostics.len(), 1);
    }

    #[test]
    fn collective_only_gives_zero_subjects() {
        let t = "Individual Character Analysis:\n- Not counted:\n  - Collective references without a specific number of persons: citizens of LA\n\nThe Number of Subjects: 0";
        let a = parse_subject_analysis(t).unwrap();
        assert!(a.subjects.is_empty());
        assert!(a.diagnostics.is_empty());
    }

    #[test]
    fn count_line_required() {
        assert_eq!(parse_subject_analysis("- Anna"), Err(ParseError::MissingCount));
    }

    #[test]
    fn code_response() {
        let r = r#"```json
{"subjects":[{"subject_id":0,"person_description":"x","pii":[{"tag":"EMAIL_ADDRESS","keyword":"a@b.com","certainty":5},{"tag":"PHONE_NUMBER","keyword":"","certainty":0}]}]}
```"#;
        let c = parse_pii_response(r, PiiKind::Code, 1).unwrap();
        assert_eq!(
            c[&0][0],
            Claim {
                category: PiiCategory::Email,
                value: "a@b.com".into(),
                certainty: 5
            }
        );
        assert_eq!(c[&0][1].certainty, 0);
        assert!(c[&0][1].value.is_empty());
    }

    #[test]
    fn list_keyword_takes_first() {
        let r = r#"{"subjects":[{"subject_id":"0","pii":[{"tag":"PHONE_NUMBER","keyword":["1","2"],"certainty":"4"}]}]}"#;
        let c = parse_pii_response(r, PiiKind::Code, 1).unwrap();
        assert_eq!((c[&0][0].value.as_str(), c[&0][0].certainty), ("1", 4));
    }

    #[test]
    fn structural_errors() {
        let tag = |t: &str| format!(r#"{{"subjects":[{{"subject_id":0,"pii":[{{"tag":"{t}","keyword":"x","certainty":3}}]}}]}}"#);
        assert!(matches!(parse_pii_response(&tag("SALARY"), PiiKind::Code, 1), Err(ParseError::UnknownTag { .. })));
        assert!(matches!(parse_pii_response(&tag("NAME"), PiiKind::Code, 1), Err(ParseError::WrongKind { .. })));
        assert!(matches!(
            parse_pii_response(&tag("EMAIL_ADDRESS"), PiiKind::Code, 0),
            Err(ParseError::SubjectOutOfRange { id: 0, n: 0 })
        ));
        assert!(matches!(parse_pii_response("no json", PiiKind::Code, 1), Err(ParseError::NotJson(_))));
    }

    #[test]
    fn noncode_requires_all_ten_tags() {
        let nine: Vec<String> = PiiCategory::NON_CODE[..9]
            .iter()
            .map(|c| format!(r#"{{"tag":"{}","keyword":"v","certainty":3}}"#, c.prompt_tag()))
            .collect();
        let r = format!(r#"{{"subjects":[{{"subject_id":0,"pii":[{}]}}]}}"#, nine.join(","));
        assert_eq!(
            parse_pii_response(&r, PiiKind::NonCode, 1),
            Err(ParseError::MissingField { subject: 0, field: "POSITION" })
        );
    }

    #[test]
    fn shipped_examples_parse() {
        assert_eq!(parse_pii_response(crate::prompts::CODE_JSON_EXAMPLE, PiiKind::Code, 1).unwrap()[&0].len(), 5);
        assert_eq!(parse_pii_response(crate::prompts::NONCODE_JSON_EXAMPLE, PiiKind::NonCode, 1).unwrap()[&0].len(), 10);
    }

    fn arb_claim() -> impl Strategy<Value = Claim> {
        (0usize..5, "[a-z0-9@. ]{0,12}", 0u8..=5).prop_map(|(i, v, c)| Claim {
            category: PiiCategory::CODE[i],
            value: v.trim().to_string(),
            certainty: c,
        })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(claims in prop::collection::vec(arb_claim(), 0..8)) {
            let pii: Vec<Value> = claims.iter().map(|c| serde_json::json!({
                "tag": c.category.prompt_tag(), "keyword": c.value, "certainty": c.certainty
            })).collect();
            let text = serde_json::json!({"subjects": [{"subject_id": 0, "pii": pii}]}).to_string();
            let parsed = parse_pii_response(&text, PiiKind::Code, 1).unwrap();
            prop_assert_eq!(parsed.get(&0).cloned().unwrap_or_default(), claims);
        }
    }
}

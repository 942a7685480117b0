use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnonymizationRun, AnonymizeError, Method};
use crate::corpus::Document;

/// One externally detected span, in char offsets of the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpan {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub placeholder: String,
}

/// Replaces each span with its placeholder, working right to left so
/// earlier offsets stay valid.
pub fn apply_external_masks(doc: &Document, spans: &[(usize, usize, String)]) -> Result<AnonymizationRun, AnonymizeError> {
    let mut chars: Vec<char> = doc.text.chars().collect();
    let len = chars.len();
    let mut sorted: Vec<&(usize, usize, String)> = spans.iter().collect();
    sorted.sort_by_key(|(s, e, _)| (*s, *e));
    for (s, e, _) in &sorted {
        if s > e || *e > len {
            return Err(AnonymizeError::MaskOutOfBounds { span: (*s, *e), len });
        }
    }
    for w in sorted.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(AnonymizeError::OverlappingMasks {
                a: (w[0].0, w[0].1),
                b: (w[1].0, w[1].1),
            });
        }
    }
    for (s, e, placeholder) in sorted.iter().rev() {
        chars.splice(*s..*e, placeholder.chars());
    }
    Ok(AnonymizationRun {
        doc_id: doc.doc_id.clone(),
        method: Method::ExternalMask,
        backbone: None,
        anonymized_text: chars.into_iter().collect(),
        rounds: Vec::new(),
        effective_params: None,
        masked_ranges: Some(sorted.iter().map(|(s, e, _)| (*s, *e)).collect()),
        diagnostics: Vec::new(),
    })
}

/// Mask spans per doc_id as (start, end, placeholder).
pub type MaskList = BTreeMap<String, Vec<(usize, usize, String)>>;

/// Parses a JSONL mask list (one [`MaskSpan`] per line) grouped by doc_id.
/// Blank lines are skipped.
pub fn parse_mask_list(text: &str) -> Result<MaskList, AnonymizeError> {
    let mut out = MaskList::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let m: MaskSpan = serde_json::from_str(line).map_err(|e| AnonymizeError::MaskList {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.entry(m.doc_id).or_default().push((m.start, m.end, m.placeholder));
    }
    Ok(out)
}

pub fn load_mask_list(path: &Path) -> Result<MaskList, AnonymizeError> {
    let text = std::fs::read_to_string(path).map_err(|source| AnonymizeError::MaskListIo {
        path: path.to_path_buf(),
        source,
    })?;
    parse_mask_list(&text)
}

#[cfg(test)]
mod tests {
    use super::super::tests::doc;
    use super::*;
    use proptest::prelude::*;

    fn p(s: usize, e: usize, t: &str) -> (usize, usize, String) {
        (s, e, t.to_string())
    }

    #[test]
    fn substitution() {
        let d = doc("Anna met Bob");
        let run = apply_external_masks(&d, &[p(9, 12, "[PERSON]"), p(0, 4, "[PERSON]")]).unwrap();
        assert_eq!(run.anonymized_text, "[PERSON] met [PERSON]");
        assert_eq!(run.masked_ranges, Some(vec![(0, 4), (9, 12)]));
        assert_eq!(apply_external_masks(&d, &[]).unwrap().anonymized_text, "Anna met Bob");
    }

    #[test]
    fn errors() {
        let d = doc("Anna met Bob");
        match apply_external_masks(&d, &[p(0, 5, "x"), p(3, 8, "y")]) {
            Err(AnonymizeError::OverlappingMasks { a, b }) => assert_eq!((a, b), ((0, 5), (3, 8))),
            other => panic!("{other:?}"),
        }
        assert!(matches!(apply_external_masks(&d, &[p(10, 13, "x")]), Err(AnonymizeError::MaskOutOfBounds { .. })));
    }

    #[test]
    fn mask_list_file() {
        let text = r#"{"doc_id":"d1","start":0,"end":4,"placeholder":"[PERSON]"}

{"doc_id":"d1","start":9,"end":12,"placeholder":"[PERSON]"}
{"doc_id":"d2","start":0,"end":1,"placeholder":"[X]"}"#;
        let m = parse_mask_list(text).unwrap();
        assert_eq!(m["d1"].len(), 2);
        assert!(matches!(parse_mask_list("{bad"), Err(AnonymizeError::MaskList { line: 1, .. })));
    }

    proptest! {
        #[test]
        fn output_length_identity(text in "[a-zé ]{0,40}", cuts in prop::collection::vec((0usize..40, 0usize..6, "[A-Z\\[\\]]{0,8}"), 0..6)) {
            let d = doc(&text);
            let n = text.chars().count();
            // build non-overlapping spans from sorted starts
            let mut spans = Vec::new();
            let mut last = 0;
            let mut starts: Vec<_> = cuts.into_iter().map(|(s, l, ph)| (s.min(n), l, ph)).collect();
            starts.sort();
            for (s, l, ph) in starts {
                if s < last { continue; }
                let e = (s + l).min(n);
                spans.push((s, e, ph));
                last = e.max(s + 1);
            }
            let run = apply_external_masks(&d, &spans).unwrap();
            let removed: usize = spans.iter().map(|(s, e, _)| e - s).sum();
            let added: usize = spans.iter().map(|(_, _, ph)| ph.chars().count()).sum();
            prop_assert_eq!(run.anonymized_text.chars().count(), n - removed + added);
        }
    }
}

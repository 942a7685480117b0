use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{char_slice, Document, IdentifierType};

/// Surviving spans at most this many characters long are flagged: their
/// text may occur elsewhere in the output by coincidence.
pub const SHORT_SPAN_CHARS: usize = 2;

/// How a span is judged masked.
#[derive(Debug, Clone, Copy)]
pub enum MaskDetection<'a> {
    /// The span's whitespace-normalized text no longer occurs in the output.
    Containment,
    /// The span lies inside one of these `(start, end)` char ranges of the
    /// original. Used when masking offsets are known exactly.
    Coverage(&'a [(usize, usize)]),
}

/// How PII tokens inside a span are counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TokenCounting {
    #[default]
    Whitespace,
    Characters,
}

impl std::fmt::Display for TokenCounting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TokenCounting::Whitespace => "whitespace",
            TokenCounting::Characters => "characters",
        })
    }
}

/// Per-document masking tallies. Ratios are derived at corpus level from
/// the pooled counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpanMasking {
    pub tokens_total: usize,
    pub tokens_masked: usize,
    /// (protected, total) entities per identifier type.
    pub entities: BTreeMap<IdentifierType, (usize, usize)>,
    pub diagnostics: Vec<String>,
}

impl SpanMasking {
    pub fn token_recall(&self) -> Option<f64> {
        (self.tokens_total > 0).then(|| self.tokens_masked as f64 / self.tokens_total as f64)
    }

    pub fn entity_recall(&self, ty: IdentifierType) -> Option<f64> {
        match self.entities.get(&ty) {
            Some(&(p, t)) if t > 0 => Some(p as f64 / t as f64),
            _ => None,
        }
    }

    pub fn absorb(&mut self, other: &SpanMasking) {
        self.tokens_total += other.tokens_total;
        self.tokens_masked += other.tokens_masked;
        for (ty, (p, t)) in &other.entities {
            let e = self.entities.entry(*ty).or_default();
            e.0 += p;
            e.1 += t;
        }
        self.diagnostics.extend(other.diagnostics.iter().cloned());
    }
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn token_count(text: &str, counting: TokenCounting) -> usize {
    match counting {
        TokenCounting::Whitespace => text.split_whitespace().count(),
        TokenCounting::Characters => text.chars().filter(|c| !c.is_whitespace()).count(),
    }
}

/// Tallies masked tokens and protected entities of one document. `None`
/// when the document carries no span annotation.
pub fn span_masking(
    doc: &Document,
    anonymized: &str,
    detection: MaskDetection<'_>,
    counting: TokenCounting,
) -> Option<SpanMasking> {
    let spans = doc.entity_spans.as_ref()?;
    let output = squash(anonymized);
    let mut out = SpanMasking::default();
    // entity_id -> (identifier type, all spans masked)
    let mut entities: BTreeMap<&str, (IdentifierType, bool)> = BTreeMap::new();
    for span in spans {
        let raw = char_slice(&doc.text, span.start, span.end).unwrap_or("");
        let text = squash(raw);
        let masked = match detection {
            MaskDetection::Containment => text.is_empty() || !output.contains(&text),
            MaskDetection::Coverage(ranges) => ranges.iter().any(|&(a, b)| a <= span.start && span.end <= b),
        };
        if !masked && text.chars().count() <= SHORT_SPAN_CHARS {
            out.diagnostics.push(format!(
                "{}: short span `{text}` at {}..{} survives; may be a coincidental occurrence",
                doc.doc_id, span.start, span.end
            ));
        }
        let n = token_count(&text, counting);
        out.tokens_total += n;
        if masked {
            out.tokens_masked += n;
        }
        let e = entities.entry(&span.entity_id).or_insert((span.identifier_type, true));
        e.1 &= masked;
    }
    for (ty, protected) in entities.into_values() {
        let e = out.entities.entry(ty).or_default();
        e.0 += usize::from(protected);
        e.1 += 1;
    }
    Some(out)
}

/// Masked PII tokens over all PII tokens; `None` without spans.
pub fn compute_token_recall(doc: &Document, anonymized: &str) -> Option<f64> {
    span_masking(doc, anonymized, MaskDetection::Containment, TokenCounting::Whitespace)?.token_recall()
}

/// Fraction of entities of `ty` whose every span is masked; `None` when the
/// document has no such entities.
pub fn compute_entity_recall(doc: &Document, anonymized: &str, ty: IdentifierType) -> Option<f64> {
    span_masking(doc, anonymized, MaskDetection::Containment, TokenCounting::Whitespace)?.entity_recall(ty)
}

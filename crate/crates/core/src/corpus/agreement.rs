//! Inter-annotator agreement: span-level observed agreement and subject-level
//! annotation agreement.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::model::{Document, EntitySpan, PiiRecord, SubjectRecord};
use crate::alignment::{align_subjects, AlignmentError, AlignmentResult, AnnotatedSubject, TextVariant};
use crate::scoring::{score_pairing, Judge, PairingStrategy, Score, ScoringConfig, ScoringError};

/// Span-level observed agreement between two annotators.
///
/// Each rate is the fraction of spans in the union `A + B` that find a
/// counterpart on the other side. Exact requires identical offsets, partial
/// requires character overlap; both require the same label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub entity_type_exact: f64,
    pub entity_type_partial: f64,
    pub identifier_type_exact: f64,
    pub identifier_type_partial: f64,
    pub spans_a: usize,
    pub spans_b: usize,
    /// Both inputs were empty; all rates are 1.0 by convention.
    pub vacuous: bool,
}

fn agreeing(
    a: &[EntitySpan],
    b: &[EntitySpan],
    exact: bool,
    same_label: impl Fn(&EntitySpan, &EntitySpan) -> bool,
) -> usize {
    let hit = |x: &EntitySpan, others: &[EntitySpan]| {
        others.iter().any(|y| {
            let pos = if exact {
                x.start == y.start && x.end == y.end
            } else {
                x.overlaps(y)
            };
            pos && same_label(x, y)
        })
    };
    a.iter().filter(|x| hit(x, b)).count() + b.iter().filter(|y| hit(y, a)).count()
}

pub fn compute_span_agreement(spans_a: &[EntitySpan], spans_b: &[EntitySpan]) -> AgreementReport {
    let total = spans_a.len() + spans_b.len();
    if total == 0 {
        return AgreementReport {
            entity_type_exact: 1.0,
            entity_type_partial: 1.0,
            identifier_type_exact: 1.0,
            identifier_type_partial: 1.0,
            spans_a: 0,
            spans_b: 0,
            vacuous: true,
        };
    }
    let rate = |n: usize| n as f64 / total as f64;
    let ent = |x: &EntitySpan, y: &EntitySpan| x.entity_type == y.entity_type;
    let ident = |x: &EntitySpan, y: &EntitySpan| x.identifier_type == y.identifier_type;
    AgreementReport {
        entity_type_exact: rate(agreeing(spans_a, spans_b, true, ent)),
        entity_type_partial: rate(agreeing(spans_a, spans_b, false, ent)),
        identifier_type_exact: rate(agreeing(spans_a, spans_b, true, ident)),
        identifier_type_partial: rate(agreeing(spans_a, spans_b, false, ident)),
        spans_a: spans_a.len(),
        spans_b: spans_b.len(),
        vacuous: false,
    }
}

/// Subject-level agreement between two annotations of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IaaReport {
    pub doc_id: String,
    pub subjects_a: usize,
    pub subjects_b: usize,
    pub matched_subjects: usize,
    /// `2 * matched / (|A| + |B|)`.
    pub subject_match_rate: f64,
    pub pii_comparisons: usize,
    pub match_fraction: f64,
    pub less_precise_fraction: f64,
    pub mismatch_fraction: f64,
    pub mean_score: f64,
    pub alignment: AlignmentResult,
    pub scores: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum IaaError {
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

fn annotated(subjects: &[SubjectRecord]) -> Vec<AnnotatedSubject> {
    subjects
        .iter()
        .map(|s| AnnotatedSubject {
            id: s.subject_id,
            description: s.description.clone(),
            piis: s
                .piis
                .iter()
                .filter(|p| !p.value.trim().is_empty())
                .map(|p| (p.category, p.value.clone()))
                .collect(),
        })
        .collect()
}

/// Compares two subject annotations of the same text: subjects are aligned
/// with the same-text alignment judge, then A's PIIs (certainty >= 1) are
/// scored against B's with the three-tier scheme.
pub fn compute_subject_iaa(
    doc: &Document,
    annotation_a: &[SubjectRecord],
    annotation_b: &[SubjectRecord],
    judge: &Judge<'_>,
    config: &ScoringConfig,
) -> Result<IaaReport, IaaError> {
    let alignment = if annotation_a.is_empty() {
        AlignmentResult {
            matches: vec![],
            unmatched_gt: vec![],
            unmatched_pred: annotation_b.iter().map(|s| s.subject_id).collect(),
            rationale: vec![],
            diagnostics: vec![],
        }
    } else {
        align_subjects(
            judge,
            TextVariant::Same { text: &doc.text },
            &annotated(annotation_a),
            &annotated(annotation_b),
        )?
    };

    let mut scores = Vec::new();
    for (a_id, b_id) in &alignment.matches {
        let (Some(a), Some(b)) = (
            annotation_a.iter().find(|s| s.subject_id == *a_id),
            annotation_b.iter().find(|s| s.subject_id == *b_id),
        ) else {
            continue;
        };
        let reference: Vec<&PiiRecord> = a.evaluable(1).collect();
        let candidates: Vec<(crate::corpus::PiiCategory, String)> = b
            .evaluable(1)
            .map(|p| (p.category, p.value.clone()))
            .collect();
        let outcome = score_pairing(&reference, &candidates, judge, config, PairingStrategy::Greedy)?;
        scores.extend(outcome.into_iter().map(|o| o.score));
    }

    let n = scores.len();
    let frac = |s: Score| {
        if n == 0 {
            0.0
        } else {
            scores.iter().filter(|x| **x == s).count() as f64 / n as f64
        }
    };
    let denom = annotation_a.len() + annotation_b.len();
    Ok(IaaReport {
        doc_id: doc.doc_id.clone(),
        subjects_a: annotation_a.len(),
        subjects_b: annotation_b.len(),
        matched_subjects: alignment.matches.len(),
        subject_match_rate: if denom == 0 {
            1.0
        } else {
            2.0 * alignment.matches.len() as f64 / denom as f64
        },
        pii_comparisons: n,
        match_fraction: frac(Score::Match),
        less_precise_fraction: frac(Score::LessPrecise),
        mismatch_fraction: frac(Score::Mismatch),
        mean_score: if n == 0 {
            0.0
        } else {
            scores.iter().map(|s| s.value()).sum::<f64>() / n as f64
        },
        alignment,
        scores: scores.iter().map(|s| s.value()).collect(),
    })
}

/// Pools per-document reports into corpus-level rates.
pub fn pool_iaa(reports: &[IaaReport]) -> Option<IaaReport> {
    if reports.is_empty() {
        return None;
    }
    let subjects_a: usize = reports.iter().map(|r| r.subjects_a).sum();
    let subjects_b: usize = reports.iter().map(|r| r.subjects_b).sum();
    let matched: usize = reports.iter().map(|r| r.matched_subjects).sum();
    let scores: Vec<f64> = reports.iter().flat_map(|r| r.scores.iter().copied()).collect();
    let n = scores.len();
    let frac = |v: f64| {
        if n == 0 {
            0.0
        } else {
            scores.iter().filter(|x| **x == v).count() as f64 / n as f64
        }
    };
    let unique: HashSet<&str> = reports.iter().map(|r| r.doc_id.as_str()).collect();
    Some(IaaReport {
        doc_id: format!("<{} documents>", unique.len()),
        subjects_a,
        subjects_b,
        matched_subjects: matched,
        subject_match_rate: if subjects_a + subjects_b == 0 {
            1.0
        } else {
            2.0 * matched as f64 / (subjects_a + subjects_b) as f64
        },
        pii_comparisons: n,
        match_fraction: frac(1.0),
        less_precise_fraction: frac(0.5),
        mismatch_fraction: frac(0.0),
        mean_score: if n == 0 { 0.0 } else { scores.iter().sum::<f64>() / n as f64 },
        alignment: AlignmentResult::default(),
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::model::{EntityType, IdentifierType};
    use proptest::prelude::*;

    fn span(start: usize, end: usize, et: EntityType, it: IdentifierType) -> EntitySpan {
        EntitySpan {
            start,
            end,
            entity_type: et,
            identifier_type: it,
            entity_id: format!("{start}-{end}"),
        }
    }

    #[test]
    fn identical_sets_agree_fully() {
        let a = vec![
            span(0, 4, EntityType::Person, IdentifierType::Direct),
            span(10, 15, EntityType::Loc, IdentifierType::Quasi),
        ];
        let r = compute_span_agreement(&a, &a);
        assert_eq!(
            (r.entity_type_exact, r.entity_type_partial, r.identifier_type_exact, r.identifier_type_partial),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert!(!r.vacuous);
    }

    #[test]
    fn overlapping_same_label_is_partial_only() {
        let a = [span(0, 10, EntityType::Person, IdentifierType::Direct)];
        let b = [span(0, 8, EntityType::Person, IdentifierType::Direct)];
        let r = compute_span_agreement(&a, &b);
        assert_eq!(r.entity_type_exact, 0.0);
        assert_eq!(r.entity_type_partial, 1.0);
    }

    #[test]
    fn empty_inputs_are_vacuous() {
        let r = compute_span_agreement(&[], &[]);
        assert!(r.vacuous);
        assert_eq!(r.entity_type_exact, 1.0);
    }

    // Hand-counted fixture, ten spans in total.
    //
    // A: a1 (0,5,PERSON,D)  a2 (10,20,LOC,Q)  a3 (30,35,ORG,Q)  a4 (40,50,DEM,Q)  a5 (60,70,CODE,D)
    // B: b1 (0,5,PERSON,D)  b2 (12,20,LOC,Q)  b3 (30,35,LOC,Q)  b4 (45,55,DEM,D)  b5 (80,90,MISC,Q)
    //
    // entity exact:   a1,b1                                   -> 2/10
    // entity partial: a1,b1, a2,b2, a4,b4                     -> 6/10
    // ident exact:    a1,b1, a3,b3                            -> 4/10
    // ident partial:  a1,b1, a2,b2, a3,b3                     -> 6/10   (a4/b4 differ: Q vs D)
    #[test]
    fn hand_counted_fixture() {
        use EntityType::*;
        use IdentifierType::*;
        let a = [
            span(0, 5, Person, Direct),
            span(10, 20, Loc, Quasi),
            span(30, 35, Org, Quasi),
            span(40, 50, Dem, Quasi),
            span(60, 70, Code, Direct),
        ];
        let b = [
            span(0, 5, Person, Direct),
            span(12, 20, Loc, Quasi),
            span(30, 35, Loc, Quasi),
            span(45, 55, Dem, Direct),
            span(80, 90, Misc, Quasi),
        ];
        let r = compute_span_agreement(&a, &b);
        assert_eq!(r.entity_type_exact, 0.2);
        assert_eq!(r.entity_type_partial, 0.6);
        assert_eq!(r.identifier_type_exact, 0.4);
        assert_eq!(r.identifier_type_partial, 0.6);
    }

    fn arb_span() -> impl Strategy<Value = EntitySpan> {
        (0usize..40, 1usize..8, 0usize..3, any::<bool>()).prop_map(|(s, len, t, d)| {
            span(
                s,
                s + len,
                [EntityType::Person, EntityType::Loc, EntityType::Org][t],
                if d { IdentifierType::Direct } else { IdentifierType::Quasi },
            )
        })
    }

    proptest! {
        #[test]
        fn agreement_is_symmetric(a in prop::collection::vec(arb_span(), 0..8),
                                  b in prop::collection::vec(arb_span(), 0..8)) {
            let ab = compute_span_agreement(&a, &b);
            let ba = compute_span_agreement(&b, &a);
            prop_assert_eq!(ab.entity_type_exact, ba.entity_type_exact);
            prop_assert_eq!(ab.entity_type_partial, ba.entity_type_partial);
            prop_assert_eq!(ab.identifier_type_exact, ba.identifier_type_exact);
            prop_assert_eq!(ab.identifier_type_partial, ba.identifier_type_partial);
            prop_assert!(ab.entity_type_exact <= ab.entity_type_partial);
        }
    }
}

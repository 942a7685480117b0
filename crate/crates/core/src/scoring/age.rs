use chrono::{Datelike, NaiveDate};

use crate::corpus::AgeInterval;

/// Tolerance applied when at least one side is a point value.
pub const AGE_TOLERANCE: u32 = 5;

/// Leniently parses an age as written by a model: `27`, `25-35`, `30s`,
/// `early 40s`, `60+`, `over 60`, `under 18`, `about 40 years old`, or a
/// birth year (`born 1990`, `1990`).
pub fn parse_age_lenient(value: &str, reference: NaiveDate) -> Option<AgeInterval> {
    let v = value.trim().to_lowercase().replace(['–', '—'], "-");
    let numbers: Vec<u32> = v
        .split(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty())
        .filter_map(|s| s.parse().ok())
        .collect();
    let point = |a: u32| Some(AgeInterval { lo: a, hi: a });
    match numbers.as_slice() {
        [y] if (1900..=reference.year() as u32).contains(y) => {
            let age = reference.year() as u32 - y;
            Some(AgeInterval { lo: age.saturating_sub(1), hi: age })
        }
        [n] if v.contains(&format!("{n}s")) => {
            let (lo, hi) = if v.contains("early") {
                (*n, n + 3)
            } else if v.contains("mid") {
                (n + 3, n + 6)
            } else if v.contains("late") {
                (n + 6, n + 9)
            } else {
                (*n, n + 9)
            };
            Some(AgeInterval { lo, hi })
        }
        [n] if v.ends_with('+') || v.contains("over") || v.contains("older than") => {
            Some(AgeInterval { lo: *n, hi: 120 })
        }
        [n] if v.contains("under") || v.contains("younger than") => {
            Some(AgeInterval { lo: 0, hi: n.saturating_sub(1) })
        }
        [n] if *n <= 120 => point(*n),
        [a, b] if v.contains('-') || v.contains(" to ") || v.contains("between") => {
            let (lo, hi) = if a <= b { (*a, *b) } else { (*b, *a) };
            (hi <= 120).then_some(AgeInterval { lo, hi })
        }
        _ => None,
    }
}

/// Whether two ages agree: closed intervals; a point value tolerates a gap
/// of [`AGE_TOLERANCE`] years, two ranges must intersect. Symmetric.
pub fn ages_agree(a: AgeInterval, b: AgeInterval) -> bool {
    let gap = b.lo.saturating_sub(a.hi).max(a.lo.saturating_sub(b.hi));
    let any_point = a.lo == a.hi || b.lo == b.hi;
    gap <= if any_point { AGE_TOLERANCE } else { 0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r() -> NaiveDate {
        NaiveDate::from_ymd_opt(2025, 9, 1).unwrap()
    }

    fn iv(lo: u32, hi: u32) -> AgeInterval {
        AgeInterval { lo, hi }
    }

    #[test]
    fn lenient_forms() {
        assert_eq!(parse_age_lenient("27", r()), Some(iv(27, 27)));
        assert_eq!(parse_age_lenient("25-35", r()), Some(iv(25, 35)));
        assert_eq!(parse_age_lenient("30s", r()), Some(iv(30, 39)));
        assert_eq!(parse_age_lenient("late 20s", r()), Some(iv(26, 29)));
        assert_eq!(parse_age_lenient("born 1990", r()), Some(iv(34, 35)));
        assert_eq!(parse_age_lenient("60+", r()), Some(iv(60, 120)));
        assert_eq!(parse_age_lenient("about 40 years old", r()), Some(iv(40, 40)));
        assert_eq!(parse_age_lenient("adult", r()), None);
        assert_eq!(parse_age_lenient("", r()), None);
    }

    #[test]
    fn tolerance_cases() {
        assert!(ages_agree(iv(27, 27), iv(30, 30)));
        assert!(!ages_agree(iv(27, 27), iv(33, 33)));
        // range vs point: [25,35] vs 40, gap 5
        assert!(ages_agree(iv(25, 35), iv(40, 40)));
        assert!(!ages_agree(iv(25, 35), iv(41, 41)));
        // two ranges must intersect
        assert!(ages_agree(iv(20, 30), iv(30, 39)));
        assert!(!ages_agree(iv(20, 29), iv(30, 39)));
    }

    proptest! {
        #[test]
        fn agreement_is_symmetric(a in 0u32..100, da in 0u32..10, b in 0u32..100, db in 0u32..10) {
            prop_assert_eq!(ages_agree(iv(a, a + da), iv(b, b + db)), ages_agree(iv(b, b + db), iv(a, a + da)));
        }
    }
}

//! Document, subject and PII data model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The fifteen PII categories, split into fixed-format CODE identifiers and
/// free-text or categorical NON-CODE attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PiiCategory {
    #[serde(alias = "IDENTIFICATION_NUMBER", alias = "ID_NUMBER")]
    IdNumber,
    #[serde(alias = "DRIVER_LICENSE_NUMBER", alias = "DRIVER_LICENSE")]
    DriverLicense,
    #[serde(alias = "PHONE_NUMBER", alias = "PHONE")]
    Phone,
    #[serde(alias = "PASSPORT_NUMBER", alias = "PASSPORT")]
    Passport,
    #[serde(alias = "EMAIL_ADDRESS", alias = "EMAIL")]
    Email,
    #[serde(alias = "NAME")]
    Name,
    #[serde(alias = "SEX")]
    Sex,
    #[serde(alias = "AGE")]
    Age,
    #[serde(alias = "LOCATION")]
    Location,
    #[serde(alias = "NATIONALITY")]
    Nationality,
    #[serde(alias = "EDUCATION")]
    Education,
    #[serde(alias = "RELATIONSHIP")]
    Relationship,
    #[serde(alias = "OCCUPATION")]
    Occupation,
    #[serde(alias = "AFFILIATION")]
    Affiliation,
    #[serde(alias = "POSITION")]
    Position,
}

/// Structural class of a [`PiiCategory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PiiKind {
    Code,
    NonCode,
}

impl fmt::Display for PiiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PiiKind::Code => "CODE",
            PiiKind::NonCode => "NON-CODE",
        })
    }
}

pub const SEX_OPTIONS: [&str; 2] = ["Male", "Female"];

pub const EDUCATION_OPTIONS: [&str; 6] = [
    "No High School Diploma",
    "In High School",
    "High School Diploma",
    "In College",
    "College Degree",
    "PhD",
];

pub const RELATIONSHIP_OPTIONS: [&str; 5] =
    ["No relation", "In Relation", "Married", "Divorced", "Widowed"];

impl PiiCategory {
    pub const ALL: [PiiCategory; 15] = [
        PiiCategory::IdNumber,
        PiiCategory::DriverLicense,
        PiiCategory::Phone,
        PiiCategory::Passport,
        PiiCategory::Email,
        PiiCategory::Name,
        PiiCategory::Sex,
        PiiCategory::Age,
        PiiCategory::Location,
        PiiCategory::Nationality,
        PiiCategory::Education,
        PiiCategory::Relationship,
        PiiCategory::Occupation,
        PiiCategory::Affiliation,
        PiiCategory::Position,
    ];

    pub const CODE: [PiiCategory; 5] = [
        PiiCategory::IdNumber,
        PiiCategory::DriverLicense,
        PiiCategory::Phone,
        PiiCategory::Passport,
        PiiCategory::Email,
    ];

    pub const NON_CODE: [PiiCategory; 10] = [
        PiiCategory::Name,
        PiiCategory::Sex,
        PiiCategory::Age,
        PiiCategory::Location,
        PiiCategory::Nationality,
        PiiCategory::Education,
        PiiCategory::Relationship,
        PiiCategory::Occupation,
        PiiCategory::Affiliation,
        PiiCategory::Position,
    ];

    pub fn kind(self) -> PiiKind {
        match self {
            PiiCategory::IdNumber
            | PiiCategory::DriverLicense
            | PiiCategory::Phone
            | PiiCategory::Passport
            | PiiCategory::Email => PiiKind::Code,
            _ => PiiKind::NonCode,
        }
    }

    pub fn is_code(self) -> bool {
        self.kind() == PiiKind::Code
    }

    /// Canonical data-model name, e.g. `DriverLicense`.
    pub fn as_str(self) -> &'static str {
        match self {
            PiiCategory::IdNumber => "IdNumber",
            PiiCategory::DriverLicense => "DriverLicense",
            PiiCategory::Phone => "Phone",
            PiiCategory::Passport => "Passport",
            PiiCategory::Email => "Email",
            PiiCategory::Name => "Name",
            PiiCategory::Sex => "Sex",
            PiiCategory::Age => "Age",
            PiiCategory::Location => "Location",
            PiiCategory::Nationality => "Nationality",
            PiiCategory::Education => "Education",
            PiiCategory::Relationship => "Relationship",
            PiiCategory::Occupation => "Occupation",
            PiiCategory::Affiliation => "Affiliation",
            PiiCategory::Position => "Position",
        }
    }

    /// Tag name used inside the adversary's inference prompts.
    pub fn prompt_tag(self) -> &'static str {
        match self {
            PiiCategory::IdNumber => "IDENTIFICATION_NUMBER",
            PiiCategory::DriverLicense => "DRIVER_LICENSE_NUMBER",
            PiiCategory::Phone => "PHONE_NUMBER",
            PiiCategory::Passport => "PASSPORT_NUMBER",
            PiiCategory::Email => "EMAIL_ADDRESS",
            PiiCategory::Name => "NAME",
            PiiCategory::Sex => "SEX",
            PiiCategory::Age => "AGE",
            PiiCategory::Location => "LOCATION",
            PiiCategory::Nationality => "NATIONALITY",
            PiiCategory::Education => "EDUCATION",
            PiiCategory::Relationship => "RELATIONSHIP",
            PiiCategory::Occupation => "OCCUPATION",
            PiiCategory::Affiliation => "AFFILIATION",
            PiiCategory::Position => "POSITION",
        }
    }

    /// Closed option set for categorical categories.
    pub fn options(self) -> Option<&'static [&'static str]> {
        match self {
            PiiCategory::Sex => Some(&SEX_OPTIONS),
            PiiCategory::Education => Some(&EDUCATION_OPTIONS),
            PiiCategory::Relationship => Some(&RELATIONSHIP_OPTIONS),
            _ => None,
        }
    }
}

impl fmt::Display for PiiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown PII category `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for PiiCategory {
    type Err = UnknownCategory;

    /// Accepts the data-model names, the prompt tags, and loose spellings
    /// (`driver license`, `id-number`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let category = match key.as_str() {
            "idnumber" | "identificationnumber" | "id" => PiiCategory::IdNumber,
            "driverlicense" | "driverlicensenumber" | "driverslicense" | "dl" => {
                PiiCategory::DriverLicense
            }
            "phone" | "phonenumber" => PiiCategory::Phone,
            "passport" | "passportnumber" => PiiCategory::Passport,
            "email" | "emailaddress" => PiiCategory::Email,
            "name" => PiiCategory::Name,
            "sex" | "gender" => PiiCategory::Sex,
            "age" => PiiCategory::Age,
            "location" => PiiCategory::Location,
            "nationality" => PiiCategory::Nationality,
            "education" => PiiCategory::Education,
            "relationship" => PiiCategory::Relationship,
            "occupation" => PiiCategory::Occupation,
            "affiliation" => PiiCategory::Affiliation,
            "position" => PiiCategory::Position,
            _ => return Err(UnknownCategory(s.to_string())),
        };
        Ok(category)
    }
}

/// One ground-truth claim about one subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiRecord {
    pub category: PiiCategory,
    pub value: String,
    /// Extraction difficulty, 0 (no inference) to 5.
    pub hardness: u8,
    /// Evidential confidence, 0 (no inference) to 5.
    pub certainty: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: u32,
    pub description: String,
    #[serde(default)]
    pub piis: Vec<PiiRecord>,
}

impl SubjectRecord {
    /// PIIs at or above the given certainty with a non-empty value.
    pub fn evaluable(&self, certainty_floor: u8) -> impl Iterator<Item = &PiiRecord> {
        self.piis
            .iter()
            .filter(move |p| p.certainty >= certainty_floor && !p.value.trim().is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityType {
    Person,
    Code,
    Loc,
    Org,
    Dem,
    Datetime,
    Quantity,
    Misc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IdentifierType {
    Direct,
    Quasi,
}

impl fmt::Display for IdentifierType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdentifierType::Direct => "DIRECT",
            IdentifierType::Quasi => "QUASI",
        })
    }
}

/// Half-open character-offset span over a document's text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub entity_type: EntityType,
    pub identifier_type: IdentifierType,
    pub entity_id: String,
}

impl EntitySpan {
    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Tab,
    Panorama,
    Custom,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Tab => "tab",
            Source::Panorama => "panorama",
            Source::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub source: Source,
    pub text: String,
    #[serde(default)]
    pub subjects: Vec<SubjectRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_spans: Option<Vec<EntitySpan>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_subject_id: Option<u32>,
}

impl Document {
    pub fn subject(&self, id: u32) -> Option<&SubjectRecord> {
        self.subjects.iter().find(|s| s.subject_id == id)
    }

    /// Length of the text in characters (not bytes).
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Substring addressed by a character-offset span, if in bounds.
    pub fn span_text(&self, start: usize, end: usize) -> Option<&str> {
        char_slice(&self.text, start, end)
    }
}

/// Slices `text` by character offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let begin = indices.nth(start)?;
    let finish = if end == start {
        begin
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[begin..finish])
}

/// Case-folds, trims and collapses internal whitespace.
pub fn normalize_value(value: &str) -> String {
    value
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_is_total_and_disjoint() {
        assert_eq!(PiiCategory::ALL.len(), 15);
        assert_eq!(PiiCategory::CODE.len() + PiiCategory::NON_CODE.len(), 15);
        for c in PiiCategory::ALL {
            let in_code = PiiCategory::CODE.contains(&c);
            let in_noncode = PiiCategory::NON_CODE.contains(&c);
            assert!(in_code ^ in_noncode, "{c}");
            assert_eq!(in_code, c.is_code());
        }
    }

    #[test]
    fn category_names_round_trip() {
        for c in PiiCategory::ALL {
            assert_eq!(c.as_str().parse::<PiiCategory>().unwrap(), c);
            assert_eq!(c.prompt_tag().parse::<PiiCategory>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<PiiCategory>(&json).unwrap(), c);
        }
        assert!("Salary".parse::<PiiCategory>().is_err());
    }

    #[test]
    fn char_slice_handles_multibyte() {
        let t = "Zoë met Łukasz";
        assert_eq!(char_slice(t, 0, 3), Some("Zoë"));
        assert_eq!(char_slice(t, 8, 14), Some("Łukasz"));
        assert_eq!(char_slice(t, 8, 15), None);
        assert_eq!(char_slice(t, 3, 3), Some(""));
    }
}

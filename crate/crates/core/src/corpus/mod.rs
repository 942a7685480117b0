//! Documents, subjects and ground-truth PII: the data model, dataset I/O,
//! statistics and annotator agreement.

mod agreement;
mod io;
mod model;
mod stats;
mod validate;

pub use agreement::{compute_span_agreement, compute_subject_iaa, pool_iaa, AgreementReport, IaaError, IaaReport};
pub use io::{
    load_dataset, parse_dataset, save_dataset, write_dataset, CorpusError, DatasetFormat, LoadDiagnostic,
    LoadedDataset,
};
pub use model::{
    char_slice, normalize_value, Document, EntitySpan, EntityType, IdentifierType, PiiCategory, PiiKind,
    PiiRecord, Source, SubjectRecord, UnknownCategory, EDUCATION_OPTIONS, RELATIONSHIP_OPTIONS, SEX_OPTIONS,
};
pub use stats::{dataset_statistics, DatasetCounts, LengthSummary, StatisticsReport, CERTAIN_THRESHOLD};
pub use validate::{
    location_levels, parse_age_strict, validate_document, AgeInterval, ValidationConfig, Violation,
    MAX_AGE_RANGE, MAX_LOCATION_LEVELS,
};

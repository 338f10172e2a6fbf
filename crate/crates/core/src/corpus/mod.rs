//! Post and annotation records, file ingestion, cleaning and fixtures.

mod annotation;
mod clean;
pub mod fixture;
mod ingest;
mod record;

pub use annotation::{
    append_annotation, effective_annotations, label_per_post, read_annotations, write_annotations,
    Annotation,
};
pub use clean::{clean, screen, CleanReport, Removal};
pub use fixture::{generate_fixture, Fixture};
pub use ingest::{export, ingest, Ingested, ParseIssue, PostFormat};
pub use record::{MediaKind, Numeric, NumericValue, PostRecord, SentimentClass, POST_FIELDS};

//! Human-in-the-loop retrieval of data subject rights from privacy
//! policies: corpus parsing, extraction models, top-k retrieval, a versioned
//! extractor registry with a feedback loop, and the benchmark harness.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod fsutil;
pub mod manager;
pub mod models;
pub mod retrieval;
pub mod rights;
pub mod synth;
pub mod text;

pub use corpus::{
    load_corpus, parse_policy, segment_blobs, Annotation, AnnotationSource, Blob, Corpus, Document, LabelId,
    PolicyRecord,
};
pub use corpus::{load_label_schema, LabelNode, LabelSchema};
pub use error::{Error, Result};
pub use manager::{load_registry, ExtractionManager, FeedbackEntry, OpenOptions, Prediction, RegistryConfig};
pub use models::{score_blob, train_model, ExtractionModel, ModelKind, ModelSettings};
pub use retrieval::{rank_blobs, suggest, Suggestion, SuggestionSet, DEFAULT_K};
pub use rights::Right;

//! Retrieval-augmented skill span extraction.
//!
//! The crate ingests BIO-tagged corpora together with word-aligned token
//! embeddings and base-model label distributions, and provides:
//!
//! - [`corpus`]: CoNLL parsing, span extraction, frequency indices and overlap.
//! - [`embedio`]: the `SKV1` binary container for embeddings and distributions.
//! - [`whitening`]: fitting and applying `x̃ = (x − μ)W`.
//! - [`datastore`]: the key/tag store with exact and inverted-file search.
//! - [`knn`]: neighbor distributions, interpolation, decoding and grid search.
//! - [`weakmatch`]: taxonomy-driven weak supervision by cosine matching.
//! - [`evalkit`]: strict and loose span-F1, frequency buckets and reports.

pub mod corpus;
pub mod datastore;
pub mod embedio;
pub mod error;
pub mod evalkit;
pub mod knn;
pub mod weakmatch;
pub mod whitening;

pub use corpus::{Sentence, Span, Tag, TaggedCorpus};
pub use datastore::{Datastore, Neighbor};
pub use embedio::{AlignedCorpus, DistributionTable, EmbeddingMatrix};
pub use error::{Error, Result};
pub use evalkit::{EvalReport, MatchMode};
pub use knn::{KnnConfig, LabelDistribution};
pub use whitening::WhiteningModel;

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

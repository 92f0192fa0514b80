//! Change detection in topic streams.
//!
//! A rolling LDA model is fitted chunk by chunk over a dated document
//! stream. Each topic's word counts in a chunk are compared with a mixture
//! of its own recent history, and a change is flagged when the observed
//! similarity falls below a resampling threshold. Detected changes are
//! explained by leave-one-out word impacts.

pub mod corpus;
pub mod detect;
pub mod error;
pub mod impact;
pub mod ingest;
pub mod lda;
pub mod pipeline;
pub mod report;
pub mod rolling;
pub mod seed;
pub mod synthetic;
pub mod vocab;

pub use corpus::{chunk_by_schedule, tokenize, Document, Schedule, TimeChunk, TokenizeRules};
pub use detect::{run_detection, DetectionRecord, DetectionSeries, DetectorParams};
pub use error::{Error, Result};
pub use impact::{impact_report, loo_impacts, Direction, WordImpact};
pub use lda::{fit, LdaParams, LdaState};
pub use pipeline::{run_pipeline, PipelineConfig};
pub use rolling::{RollingParams, RollingState};
pub use vocab::Vocabulary;

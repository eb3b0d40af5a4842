//! Document corpus construction and multimodal pretraining-data toolkit.
//!
//! The crate is split along the stages of the data pipeline:
//!
//! - [`ontology`]: the keyword hierarchy that seeds retrieval.
//! - [`embed`]: unit-norm embeddings, exact and partitioned top-K search,
//!   per-keyword distance statistics and the on-disk vector store format.
//! - [`corpus`]: per-keyword retrieval, cross-keyword deduplication, OCR
//!   quality filtering and the JSONL manifest.
//! - [`doctok`]: OCR ingestion, WordPiece tokenization, token boxes and
//!   pixel crops, and the six-class weak tagger.
//! - [`pretrain`]: masking plans, MMLM/MCM/TT targets, losses and gradients.
//! - [`finetune`]: BIO labels, entity/document losses and entity metrics.
//! - [`fewshot`]: N-way K-shot episode construction and head labels.
//! - [`synth`]: deterministic synthetic stores, OCR documents and pages.

pub mod config;
pub mod corpus;
pub mod doctok;
pub mod embed;
pub mod error;
pub mod fewshot;
pub mod finetune;
pub mod jsonl;
pub mod loss;
pub mod ontology;
pub mod pretrain;
pub mod synth;

pub use error::{Error, Result};

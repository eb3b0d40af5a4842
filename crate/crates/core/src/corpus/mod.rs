//! Corpus construction: per-keyword retrieval, cross-keyword
//! deduplication, OCR quality filtering and the JSONL manifest.

mod dedup;
mod filter;
mod pipeline;

pub use dedup::{deduplicate, deduplicate_records, near_duplicate_pairs};
pub use filter::{alnum_ratio, quality_filter, FilterReport, FilterThresholds, RejectReason};
pub use pipeline::{retrieve_for_keyword, run_pipeline, CorpusConfig, OcrProvider, PipelineOutput};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub type ContentHash = [u8; 32];

/// SHA-256 of the little-endian `f32` embedding bytes; stands in for the
/// image content hash when only embeddings are available.
pub fn embedding_content_hash(vector: &[f32]) -> ContentHash {
    let mut h = Sha256::new();
    for v in vector {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub image_id: u64,
    pub content_hash: ContentHash,
    pub distance: f64,
    pub keyword: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub keyword: String,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Status {
    Kept,
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub image_id: u64,
    #[serde(with = "hex_hash")]
    pub content_hash: ContentHash,
    /// One entry per keyword, best distance, sorted by keyword.
    pub provenance: Vec<Provenance>,
    /// Ids merged into this record as exact or near duplicates, ascending.
    #[serde(default)]
    pub duplicates: Vec<u64>,
    #[serde(flatten)]
    pub status: Status,
}

mod hex_hash {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(h: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(h))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(D::Error::custom("content_hash must be 64 lowercase hex digits"));
        }
        let bytes = hex::decode(&s).map_err(D::Error::custom)?;
        Ok(bytes.try_into().expect("64 hex digits decode to 32 bytes"))
    }
}

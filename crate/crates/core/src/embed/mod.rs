//! Unit-norm embeddings and dot-product retrieval.
//!
//! All similarity scores are dot products between unit vectors, so they lie
//! in `[-1, 1]` with `1.0` meaning identical direction. Scores are
//! accumulated in `f64` over `f32` storage, always in dimension order, so
//! every search path produces bit-identical values for the same pair.

mod index;
mod search;
mod stats;
mod store;

pub use index::{
    approx_top_k, build_partitioned_index, build_partitioned_index_with_spill, PartitionedIndex,
    KMEANS_MAX_ITERS,
};
pub use search::{exact_top_k, Hit};
pub use stats::{distance_stats, write_stats_csv, DistanceStats};
pub use store::{VectorStore, STORE_MAGIC, STORE_VERSION};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ontology::normalize_keyword;

pub const DEFAULT_DIM: usize = 64;

/// Tolerance on `|‖v‖ - 1|` accepted for vectors supplied from outside
/// (files, providers). Vectors built by [`UnitVector::from_f64`] are within
/// 1e-6.
pub const UNIT_NORM_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f32>);

impl UnitVector {
    /// Wraps an already-normalized vector.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        check_unit(&values)?;
        Ok(UnitVector(values))
    }

    /// Normalizes `values` in double precision.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("vector must be non-empty and finite"));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("cannot normalize the zero vector"));
        }
        Ok(UnitVector(values.iter().map(|v| (v / norm) as f32).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }
}

pub(crate) fn check_unit(values: &[f32]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid("vector has dimension 0"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("vector has non-finite entries"));
    }
    let norm = values.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::invalid(format!("vector norm {norm} is not 1")));
    }
    Ok(())
}

/// Dot product of two unit vectors, clamped into `[-1, 1]`.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    s.clamp(-1.0, 1.0)
}

/// Source of text embeddings in the image embedding space.
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn embed_text(&self, text: &str) -> Result<UnitVector>;
}

/// Deterministic stand-in for a joint text-image embedding service: the
/// keyword (case-folded, whitespace-collapsed) and seed are hashed into an
/// RNG seed and a Gaussian vector is drawn and normalized.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl SyntheticEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        SyntheticEmbedder { dim, seed }
    }
}

impl EmbeddingProvider for SyntheticEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<UnitVector> {
        let key = normalize_keyword(text);
        if key.is_empty() {
            return Err(Error::invalid("cannot embed an empty keyword"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let mut rng = seeded_rng(self.seed, key.as_bytes());
        Ok(gaussian_unit(&mut rng, self.dim))
    }
}

/// Embeds `keyword` with the default dimension.
pub fn embed_text(keyword: &str, seed: u64) -> Result<UnitVector> {
    SyntheticEmbedder::new(DEFAULT_DIM, seed).embed_text(keyword)
}

/// RNG keyed by `(seed, label)` through SHA-256.
pub fn seeded_rng(seed: u64, label: &[u8]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label);
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

pub fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> UnitVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(u) = UnitVector::from_f64(&v) {
            return u;
        }
    }
}

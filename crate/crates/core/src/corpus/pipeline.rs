use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{deduplicate, embedding_content_hash, quality_filter, Candidate, CorpusRecord, FilterReport, FilterThresholds};
use crate::config::set_from;
use crate::doctok::OcrDocument;
use crate::embed::{
    approx_top_k, build_partitioned_index_with_spill, distance_stats, exact_top_k, DistanceStats,
    EmbeddingProvider, PartitionedIndex, VectorStore,
};
use crate::error::{Error, Result};
use crate::ontology::OntologyTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    /// Neighbors retrieved per keyword.
    pub k: usize,
    /// Index cells probed per query; capped at the number of cells.
    pub probes: usize,
    /// k-means cells; capped at the store size.
    pub num_cells: usize,
    /// Cells each stored vector is listed in.
    pub spill: usize,
    pub near_dup_threshold: f64,
    pub filter: FilterThresholds,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            k: 10_000,
            probes: 16,
            num_cells: 64,
            spill: 1,
            near_dup_threshold: 0.98,
            filter: FilterThresholds::default(),
            seed: 0,
        }
    }
}

impl CorpusConfig {
    pub const KEYS: &'static [&'static str] = &[
        "k",
        "probes",
        "num_cells",
        "spill",
        "near_dup_threshold",
        "min_confidence",
        "min_tokens",
        "alnum_ratio_min",
        "seed",
    ];

    /// Overrides fields from a flat key=value map; other keys are ignored.
    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        set_from(map, "k", &mut self.k)?;
        set_from(map, "probes", &mut self.probes)?;
        set_from(map, "num_cells", &mut self.num_cells)?;
        set_from(map, "spill", &mut self.spill)?;
        set_from(map, "near_dup_threshold", &mut self.near_dup_threshold)?;
        set_from(map, "min_confidence", &mut self.filter.min_confidence)?;
        set_from(map, "min_tokens", &mut self.filter.min_tokens)?;
        set_from(map, "alnum_ratio_min", &mut self.filter.alnum_ratio_min)?;
        set_from(map, "seed", &mut self.seed)?;
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.probes == 0 || self.num_cells == 0 || self.spill == 0 {
            return Err(Error::invalid("k, probes, num_cells and spill must be at least 1"));
        }
        if !(self.near_dup_threshold > 0.0 && self.near_dup_threshold <= 1.0) {
            return Err(Error::invalid("near_dup_threshold must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.filter.min_confidence)
            || !(0.0..=1.0).contains(&self.filter.alnum_ratio_min)
        {
            return Err(Error::invalid("min_confidence and alnum_ratio_min must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Source of OCR results for retrieved images.
pub trait OcrProvider: Sync {
    fn ocr(&self, image_id: u64) -> Option<OcrDocument>;
}

/// Retrieves the `k` nearest images to `keyword`, through the partitioned
/// index when one is given and exhaustively otherwise.
pub fn retrieve_for_keyword(
    keyword: &str,
    embedder: &dyn EmbeddingProvider,
    store: &VectorStore,
    index: Option<&PartitionedIndex>,
    k: usize,
    probes: usize,
) -> Result<Vec<Candidate>> {
    let query = embedder.embed_text(keyword)?;
    let hits = match index {
        Some(index) => approx_top_k(&query, index, store, k, probes)?,
        None => exact_top_k(&query, store, k)?,
    };
    Ok(hits
        .into_iter()
        .map(|h| Candidate {
            image_id: h.id,
            content_hash: embedding_content_hash(store.vector(h.id).expect("hit ids come from the store")),
            distance: h.distance,
            keyword: keyword.to_string(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Deduplicated records sorted by image id, kept and rejected.
    pub manifest: Vec<CorpusRecord>,
    /// One entry per keyword, in ontology order, over raw retrievals.
    pub stats: Vec<DistanceStats>,
    pub report: FilterReport,
    /// Total retrieved candidates before deduplication.
    pub retrieved: usize,
}

/// Retrieval for every ontology keyword, deduplication across keywords,
/// then OCR quality filtering.
pub fn run_pipeline(
    ontology: &OntologyTree,
    store: &VectorStore,
    config: &CorpusConfig,
    embedder: &(dyn EmbeddingProvider + Sync),
    ocr: &dyn OcrProvider,
) -> Result<PipelineOutput> {
    config.validate()?;
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    if embedder.dim() != store.dim() {
        return Err(Error::invalid(format!(
            "embedder dimension {} does not match store dimension {}",
            embedder.dim(),
            store.dim()
        )));
    }
    let num_cells = config.num_cells.min(store.len());
    let probes = config.probes.min(num_cells);
    let index = if probes < num_cells {
        Some(build_partitioned_index_with_spill(
            store,
            num_cells,
            config.seed,
            config.spill.min(num_cells),
        )?)
    } else {
        None
    };

    let keywords = ontology.keywords();
    let per_keyword: Vec<Vec<Candidate>> = keywords
        .par_iter()
        .map(|kw| retrieve_for_keyword(kw, embedder, store, index.as_ref(), config.k, probes))
        .collect::<Result<_>>()?;

    let stats = keywords
        .iter()
        .zip(&per_keyword)
        .map(|(kw, cands)| {
            let d: Vec<f64> = cands.iter().map(|c| c.distance).collect();
            distance_stats(&d, kw)
        })
        .collect::<Result<Vec<_>>>()?;

    let retrieved = per_keyword.iter().map(Vec::len).sum();
    let all: Vec<Candidate> = per_keyword.into_iter().flatten().collect();
    let mut manifest = deduplicate(&all, store, config.near_dup_threshold)?;
    manifest.par_iter_mut().for_each(|rec| {
        let doc = ocr.ocr(rec.image_id);
        rec.status = quality_filter(rec, doc.as_ref(), &config.filter);
    });
    let report = FilterReport::from_records(&manifest);
    Ok(PipelineOutput {
        manifest,
        stats,
        report,
        retrieved,
    })
}

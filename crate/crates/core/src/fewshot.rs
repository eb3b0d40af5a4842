//! N-way K-shot episode construction over an entity-labeled corpus, and
//! labels for the flat and two-level prediction heads.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embed::seeded_rng;
use crate::error::{Error, Result};
use crate::finetune::{bio_decode, bio_encode, BioSequence, BioTag, EntitySpan};

pub const DEFAULT_TRAIN_TYPES: usize = 18;
pub const DEFAULT_TEST_TYPES: usize = 5;
pub const DEFAULT_MIN_OCCURRENCES: usize = 10;
pub const DEFAULT_SLACK: usize = 2;
/// Way of every meta-test episode.
pub const META_TEST_WAY: usize = 5;

/// One labeled document: `len` tokens and its entity spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDocument {
    pub doc_id: String,
    pub len: usize,
    pub spans: Vec<EntitySpan>,
}

impl EntityDocument {
    pub fn bio(&self) -> Result<BioSequence> {
        bio_encode(&self.spans, self.len)
    }
}

/// Span count per entity type over the corpus.
pub fn type_frequencies(corpus: &[EntityDocument]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for s in corpus.iter().flat_map(|d| &d.spans) {
        *out.entry(s.entity_type.clone()).or_insert(0) += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityPools {
    pub meta_train_types: Vec<String>,
    pub meta_test_types: Vec<String>,
    /// Eligible types left over after filling both pools.
    pub unused_types: Vec<String>,
    /// Types dropped for having fewer than `min_occurrences` spans.
    pub rare_types: Vec<String>,
}

impl EntityPools {
    pub fn is_disjoint(&self) -> bool {
        let train: BTreeSet<&String> = self.meta_train_types.iter().collect();
        self.meta_test_types.iter().all(|t| !train.contains(t))
    }
}

/// Drops types seen fewer than `min_occurrences` times, then splits the
/// rest at random into disjoint meta-train and meta-test pools. Pools are
/// reported in name order.
pub fn split_pools(
    frequencies: &BTreeMap<String, usize>,
    seed: u64,
    train_count: usize,
    test_count: usize,
    min_occurrences: usize,
) -> Result<EntityPools> {
    if train_count == 0 || test_count == 0 {
        return Err(Error::invalid("both pools need at least one type"));
    }
    let mut eligible = Vec::new();
    let mut rare = Vec::new();
    for (t, &c) in frequencies {
        if c >= min_occurrences {
            eligible.push(t.clone());
        } else {
            rare.push(t.clone());
        }
    }
    if eligible.len() < train_count + test_count {
        return Err(Error::invalid(format!(
            "{} types occur at least {min_occurrences} times; {} are needed",
            eligible.len(),
            train_count + test_count
        )));
    }
    eligible.shuffle(&mut seeded_rng(seed, b"pools"));
    let mut test: Vec<String> = eligible.drain(..test_count).collect();
    let mut train: Vec<String> = eligible.drain(..train_count).collect();
    test.sort();
    train.sort();
    eligible.sort();
    Ok(EntityPools {
        meta_train_types: train,
        meta_test_types: test,
        unused_types: eligible,
        rare_types: rare,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub n: usize,
    pub k: usize,
    /// Support counts may exceed `k` by up to this much.
    pub slack: usize,
    /// Largest query set.
    pub query_cap: usize,
}

impl EpisodeConfig {
    pub fn new(n: usize, k: usize) -> Self {
        EpisodeConfig { n, k, slack: DEFAULT_SLACK, query_cap: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub chosen_types: Vec<String>,
    pub support: Vec<String>,
    pub query: Vec<String>,
    /// Occurrences of each chosen type in the support set.
    pub counts: BTreeMap<String, usize>,
}

/// (keeps every count within cap, deficit reduction, fewer surplus), maximized.
type GreedyKey = (bool, usize, std::cmp::Reverse<usize>);

/// Samples `n` types from `pool`, then greedily grows a support set: each
/// step adds the document that most reduces the total deficit
/// `Σ max(0, k − count)`, preferring documents that keep every count within
/// `k + slack` and, after that, documents with fewer surplus occurrences.
/// The query set holds the remaining documents that mention a chosen type.
pub fn sample_episode(
    corpus: &[EntityDocument],
    pool: &[String],
    cfg: &EpisodeConfig,
    seed: u64,
) -> Result<Episode> {
    if cfg.n == 0 || cfg.k == 0 {
        return Err(Error::Sampling("N and K must be at least 1".into()));
    }
    if cfg.n > pool.len() {
        return Err(Error::Sampling(format!(
            "{}-way episode from a pool of {} types",
            cfg.n,
            pool.len()
        )));
    }
    let mut rng = seeded_rng(seed, b"episode");
    let mut pool: Vec<&String> = pool.iter().collect();
    pool.sort();
    pool.dedup();
    if cfg.n > pool.len() {
        return Err(Error::Sampling("pool has repeated types".into()));
    }
    pool.shuffle(&mut rng);
    let mut chosen: Vec<String> = pool[..cfg.n].iter().map(|t| (*t).clone()).collect();
    chosen.sort();

    // occ[d][j]: spans of chosen type j in document d.
    let occ: Vec<Vec<usize>> = corpus
        .iter()
        .map(|d| {
            chosen
                .iter()
                .map(|t| d.spans.iter().filter(|s| &s.entity_type == t).count())
                .collect()
        })
        .collect();
    for (j, t) in chosen.iter().enumerate() {
        if occ.iter().all(|o| o[j] == 0) {
            return Err(Error::Sampling(format!("type {t:?} does not occur in the corpus")));
        }
    }

    let mut order: Vec<usize> = (0..corpus.len()).filter(|&d| occ[d].iter().any(|&c| c > 0)).collect();
    order.shuffle(&mut rng);
    let cap = cfg.k + cfg.slack;
    let mut counts = vec![0usize; cfg.n];
    let mut used = vec![false; corpus.len()];
    let mut support = Vec::new();
    loop {
        let deficit: usize = counts.iter().map(|&c| cfg.k.saturating_sub(c)).sum();
        if deficit == 0 {
            break;
        }
        // Earlier in `order` wins ties.
        let mut best: Option<(usize, GreedyKey)> = None;
        for &d in &order {
            if used[d] {
                continue;
            }
            let o = &occ[d];
            let gain: usize = o.iter().zip(&counts).map(|(&x, &c)| x.min(cfg.k.saturating_sub(c))).sum();
            if gain == 0 {
                continue;
            }
            let within = o.iter().zip(&counts).all(|(&x, &c)| c + x <= cap);
            let surplus = o.iter().sum::<usize>() - gain;
            let key = (within, gain, std::cmp::Reverse(surplus));
            if best.as_ref().is_none_or(|(_, b)| key > *b) {
                best = Some((d, key));
            }
        }
        let Some((d, _)) = best else { break };
        used[d] = true;
        support.push(d);
        for (c, &x) in counts.iter_mut().zip(&occ[d]) {
            *c += x;
        }
    }
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Sampling(format!("type {:?} could not be placed in support", chosen[j])));
    }

    let query: Vec<usize> = order.iter().copied().filter(|&d| !used[d]).take(cfg.query_cap).collect();
    let ids = |v: &[usize]| {
        let mut out: Vec<String> = v.iter().map(|&d| corpus[d].doc_id.clone()).collect();
        out.sort();
        out
    };
    Ok(Episode {
        n: cfg.n,
        k: cfg.k,
        counts: chosen.iter().cloned().zip(counts).collect(),
        chosen_types: chosen,
        support: ids(&support),
        query: ids(&query),
    })
}

/// A meta-test episode: always [`META_TEST_WAY`] types from the test pool.
pub fn sample_meta_test_episode(
    corpus: &[EntityDocument],
    pools: &EntityPools,
    k: usize,
    slack: usize,
    query_cap: usize,
    seed: u64,
) -> Result<Episode> {
    let cfg = EpisodeConfig { n: META_TEST_WAY, k, slack, query_cap };
    sample_episode(corpus, &pools.meta_test_types, &cfg, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Begin,
    Inside,
}

/// Second-level label of an entity token: its boundary and episode type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeLabel {
    pub boundary: Boundary,
    pub entity_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeLabels {
    /// BIO over the episode types only.
    pub simple: BioSequence,
    /// `true` for entity tokens, `false` for background.
    pub level1: Vec<bool>,
    /// Defined exactly where `level1` is `true`.
    pub level2: Vec<Option<TypeLabel>>,
}

/// Relabels one document for an episode: entities of types outside the
/// episode become background.
pub fn episode_labels(episode: &Episode, doc_bio: &[BioTag]) -> EpisodeLabels {
    let chosen: BTreeSet<&str> = episode.chosen_types.iter().map(String::as_str).collect();
    let kept: Vec<EntitySpan> = bio_decode(doc_bio)
        .into_iter()
        .filter(|s| chosen.contains(s.entity_type.as_str()))
        .collect();
    let simple = bio_encode(&kept, doc_bio.len()).expect("decoded spans are disjoint and in range");
    let (level1, level2) = split_levels(&simple);
    EpisodeLabels { simple, level1, level2 }
}

/// Two-level view of a BIO sequence.
pub fn split_levels(simple: &[BioTag]) -> (Vec<bool>, Vec<Option<TypeLabel>>) {
    simple
        .iter()
        .map(|t| match t {
            BioTag::O => (false, None),
            BioTag::B(ty) => (true, Some(TypeLabel { boundary: Boundary::Begin, entity_type: ty.clone() })),
            BioTag::I(ty) => (true, Some(TypeLabel { boundary: Boundary::Inside, entity_type: ty.clone() })),
        })
        .unzip()
}

/// Inverse of [`split_levels`].
pub fn merge_levels(level1: &[bool], level2: &[Option<TypeLabel>]) -> Result<BioSequence> {
    if level1.len() != level2.len() {
        return Err(Error::invalid("level lengths differ"));
    }
    level1
        .iter()
        .zip(level2)
        .map(|(&ent, l2)| match (ent, l2) {
            (false, None) => Ok(BioTag::O),
            (true, Some(TypeLabel { boundary: Boundary::Begin, entity_type })) => Ok(BioTag::B(entity_type.clone())),
            (true, Some(TypeLabel { boundary: Boundary::Inside, entity_type })) => Ok(BioTag::I(entity_type.clone())),
            _ => Err(Error::invalid("second level must be set exactly on entity tokens")),
        })
        .collect()
}

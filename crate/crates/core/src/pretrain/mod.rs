//! Pretraining target construction: masking plans, masked inputs with
//! MMLM/MCM/TT targets, the token-tagging subset, and the losses.

mod objectives;

pub use objectives::{
    loss_gradients, mcm_loss, mmlm_loss, pretrain_loss, tt_loss, LossInput, LossWeights,
};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::doctok::tokenize::{decode_f32s, encode_f32s};
use crate::doctok::{NormBox, TokenSequence, TokenTags, Vocab};
use crate::embed::seeded_rng;
use crate::error::{Error, Result};

/// Fraction of tokens selected for prediction.
pub const MASK_RATE: f64 = 0.15;
/// Of the selected tokens: replaced by `[MASK]`.
pub const MASK_TOKEN_PROB: f64 = 0.8;
/// Of the selected tokens: replaced by a random token. The rest are kept.
pub const RANDOM_TOKEN_PROB: f64 = 0.1;
pub const DEFAULT_TT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "action", content = "id")]
pub enum MaskAction {
    MaskToken,
    RandomToken(u32),
    Keep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskingPlan {
    /// Sequence length the plan was drawn for.
    pub seq_len: usize,
    /// Ascending; never contains position 0 (`[CLS]`).
    pub masked_positions: Vec<usize>,
    /// One per masked position.
    pub actions: Vec<MaskAction>,
}

impl MaskingPlan {
    pub fn len(&self) -> usize {
        self.masked_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masked_positions.is_empty()
    }
}

/// `max(1, floor(0.15·n))` for `n ≥ 1`, 0 for an empty sequence.
pub fn masked_count(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        (n * 15 / 100).max(1)
    }
}

/// Selects the prediction positions of a sequence of length `n` whose
/// position 0 is `[CLS]`, and draws an action for each: `[MASK]` with
/// probability 0.8, a random id from `replacement_ids` with 0.1, unchanged
/// otherwise. A single-token sequence holds only `[CLS]` and gets an empty
/// plan.
pub fn plan_masking(n: usize, seed: u64, replacement_ids: &[u32]) -> Result<MaskingPlan> {
    if n <= 1 {
        return Ok(MaskingPlan { seq_len: n, masked_positions: Vec::new(), actions: Vec::new() });
    }
    if replacement_ids.is_empty() {
        return Err(Error::invalid("no replacement ids to draw random tokens from"));
    }
    let mut rng = seeded_rng(seed, b"masking");
    let m = masked_count(n);
    let mut positions: Vec<usize> = sample(&mut rng, n - 1, m).into_iter().map(|p| p + 1).collect();
    positions.sort_unstable();
    let actions = positions
        .iter()
        .map(|_| {
            let u: f64 = rng.random();
            if u < MASK_TOKEN_PROB {
                MaskAction::MaskToken
            } else if u < MASK_TOKEN_PROB + RANDOM_TOKEN_PROB {
                MaskAction::RandomToken(replacement_ids[rng.random_range(0..replacement_ids.len())])
            } else {
                MaskAction::Keep
            }
        })
        .collect();
    Ok(MaskingPlan { seq_len: n, masked_positions: positions, actions })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainExample {
    pub doc_id: String,
    /// Text ids after masking.
    pub input_ids: Vec<u32>,
    /// Crops after masking; masked positions hold zeros.
    pub input_crops: Vec<Vec<f32>>,
    /// `(position, original id)` for every masked position.
    pub mlm_targets: Vec<(usize, u32)>,
    /// `(position, original crop)` for every masked position.
    pub mcm_targets: Vec<(usize, Vec<f32>)>,
    pub tag_targets: Option<Vec<TokenTags>>,
    pub norm_boxes: Vec<NormBox>,
    pub pos_1d: Vec<u32>,
    pub plan: MaskingPlan,
}

/// Applies `plan` to `seq`. Tag targets come from `tags`, falling back to
/// the sequence's own tags, and are attached only when `include_tt`.
pub fn assemble_example(
    seq: &TokenSequence,
    tags: Option<&[TokenTags]>,
    plan: &MaskingPlan,
    mask_id: u32,
    include_tt: bool,
) -> Result<PretrainExample> {
    let n = seq.len();
    if plan.seq_len != n
        || plan.actions.len() != plan.masked_positions.len()
        || plan.masked_positions.iter().any(|&p| p >= n)
        || plan.masked_positions.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::invalid(format!(
            "{}: masking plan does not fit a sequence of {n} tokens",
            seq.doc_id
        )));
    }
    let tag_targets = if include_tt {
        let tags = tags
            .or(seq.tags.as_deref())
            .ok_or_else(|| Error::invalid(format!("{}: tag targets requested but absent", seq.doc_id)))?;
        if tags.len() != n {
            return Err(Error::invalid(format!(
                "{}: {} tag rows for {n} tokens",
                seq.doc_id,
                tags.len()
            )));
        }
        Some(tags.to_vec())
    } else {
        None
    };

    let mut input_ids = seq.ids();
    let mut input_crops: Vec<Vec<f32>> = seq.tokens.iter().map(|t| t.crop.clone()).collect();
    let mut mlm_targets = Vec::with_capacity(plan.len());
    let mut mcm_targets = Vec::with_capacity(plan.len());
    for (&p, action) in plan.masked_positions.iter().zip(&plan.actions) {
        mlm_targets.push((p, input_ids[p]));
        let crop = std::mem::take(&mut input_crops[p]);
        input_crops[p] = vec![0.0; crop.len()];
        mcm_targets.push((p, crop));
        match *action {
            MaskAction::MaskToken => input_ids[p] = mask_id,
            MaskAction::RandomToken(id) => input_ids[p] = id,
            MaskAction::Keep => {}
        }
    }
    Ok(PretrainExample {
        doc_id: seq.doc_id.clone(),
        input_ids,
        input_crops,
        mlm_targets,
        mcm_targets,
        tag_targets,
        norm_boxes: seq.tokens.iter().map(|t| t.norm_box).collect(),
        pos_1d: seq.tokens.iter().map(|t| t.pos_1d).collect(),
        plan: plan.clone(),
    })
}

impl PretrainExample {
    /// Input ids with every prediction target restored.
    pub fn unmasked_ids(&self) -> Vec<u32> {
        let mut ids = self.input_ids.clone();
        for &(p, id) in &self.mlm_targets {
            ids[p] = id;
        }
        ids
    }
}

/// Marks `round(fraction · count)` examples, chosen uniformly under `seed`,
/// for the token-tagging objective.
pub fn select_tt_subset(count: usize, fraction: f64, seed: u64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!("tt fraction {fraction} outside [0, 1]")));
    }
    let m = ((fraction * count as f64).round() as usize).min(count);
    let mut rng = seeded_rng(seed, b"tt-subset");
    let mut out = vec![false; count];
    for i in sample(&mut rng, count, m) {
        out[i] = true;
    }
    Ok(out)
}

/// Per-example seed for example `index` of a run seeded with `base`.
pub fn example_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

/// Plans and assembles example `index` of a run seeded with `base_seed`.
pub fn assemble_indexed(
    seq: &TokenSequence,
    vocab: &Vocab,
    base_seed: u64,
    index: usize,
    include_tt: bool,
) -> Result<PretrainExample> {
    let plan = plan_masking(seq.len(), example_seed(base_seed, index), &vocab.replacement_ids())?;
    assemble_example(seq, None, &plan, vocab.mask_id, include_tt)
}

/// JSONL form of a [`PretrainExample`]. Masked input crops are implied
/// (zeros at `masked_positions`) and not repeated; `mcm_targets` holds the
/// original crops of the masked positions, concatenated in position order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub doc_id: String,
    pub input_ids: Vec<u32>,
    pub norm_boxes: Vec<NormBox>,
    pub masked_positions: Vec<usize>,
    pub actions: Vec<MaskAction>,
    pub mlm_targets: Vec<u32>,
    pub crop_dim: usize,
    pub mcm_targets: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag_targets: Option<Vec<TokenTags>>,
}

impl From<&PretrainExample> for PretrainRecord {
    fn from(ex: &PretrainExample) -> Self {
        let crop_dim = ex.input_crops.first().map_or(0, Vec::len);
        let flat: Vec<f32> = ex.mcm_targets.iter().flat_map(|(_, c)| c.iter().copied()).collect();
        PretrainRecord {
            doc_id: ex.doc_id.clone(),
            input_ids: ex.input_ids.clone(),
            norm_boxes: ex.norm_boxes.clone(),
            masked_positions: ex.plan.masked_positions.clone(),
            actions: ex.plan.actions.clone(),
            mlm_targets: ex.mlm_targets.iter().map(|&(_, id)| id).collect(),
            crop_dim,
            mcm_targets: encode_f32s(&flat),
            tag_targets: ex.tag_targets.clone(),
        }
    }
}

impl PretrainRecord {
    /// Original crops of the masked positions, one row each.
    pub fn mcm_rows(&self) -> Result<Vec<Vec<f32>>> {
        let flat = decode_f32s(&self.mcm_targets)?;
        if flat.len() != self.crop_dim * self.masked_positions.len() {
            return Err(Error::Format {
                what: "pretrain record",
                msg: format!("{}: mcm_targets has {} values", self.doc_id, flat.len()),
            });
        }
        Ok(flat.chunks(self.crop_dim.max(1)).map(<[f32]>::to_vec).collect())
    }
}

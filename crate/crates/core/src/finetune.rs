//! Fine-tuning labels and evaluation: BIO encoding of entity spans, the
//! entity-extraction and document-classification losses, and exact-match
//! entity precision/recall/F1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::loss::{check_finite, mean_softmax_xent, softmax_xent};

/// A typed entity over tokens `start..=end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    #[serde(rename = "type")]
    pub entity_type: String,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

impl EntitySpan {
    pub fn new(entity_type: impl Into<String>, start: usize, end: usize) -> Self {
        EntitySpan { entity_type: entity_type.into(), start, end }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BioTag {
    O,
    B(String),
    I(String),
}

impl BioTag {
    pub fn entity_type(&self) -> Option<&str> {
        match self {
            BioTag::O => None,
            BioTag::B(t) | BioTag::I(t) => Some(t),
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioTag::O => f.write_str("O"),
            BioTag::B(t) => write!(f, "B-{t}"),
            BioTag::I(t) => write!(f, "I-{t}"),
        }
    }
}

impl FromStr for BioTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('-') {
            _ if s == "O" => Ok(BioTag::O),
            Some(("B", t)) if !t.is_empty() => Ok(BioTag::B(t.to_string())),
            Some(("I", t)) if !t.is_empty() => Ok(BioTag::I(t.to_string())),
            _ => Err(Error::invalid(format!("not a BIO tag: {s:?}"))),
        }
    }
}

impl Serialize for BioTag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BioTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub type BioSequence = Vec<BioTag>;

/// Encodes non-overlapping spans over a sequence of `n` tokens.
pub fn bio_encode(spans: &[EntitySpan], n: usize) -> Result<BioSequence> {
    let mut tags = vec![BioTag::O; n];
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (si, s) in spans.iter().enumerate() {
        if s.entity_type.is_empty() || s.start > s.end || s.end >= n {
            return Err(Error::invalid(format!(
                "span ({:?}, {}, {}) is not within a sequence of {n} tokens",
                s.entity_type, s.start, s.end
            )));
        }
        for i in s.start..=s.end {
            if let Some(other) = owner[i] {
                let o = &spans[other];
                return Err(Error::Overlap(format!(
                    "({}, {}, {}) and ({}, {}, {}) share token {i}",
                    o.entity_type, o.start, o.end, s.entity_type, s.start, s.end
                )));
            }
            owner[i] = Some(si);
            tags[i] = if i == s.start {
                BioTag::B(s.entity_type.clone())
            } else {
                BioTag::I(s.entity_type.clone())
            };
        }
    }
    Ok(tags)
}

/// Decodes any tag sequence. An `I-T` that does not continue a span of
/// type `T` opens a new span.
pub fn bio_decode(tags: &[BioTag]) -> Vec<EntitySpan> {
    let mut out: Vec<EntitySpan> = Vec::new();
    let mut open = false;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            BioTag::O => open = false,
            BioTag::B(t) => {
                out.push(EntitySpan::new(t.clone(), i, i));
                open = true;
            }
            BioTag::I(t) => match out.last_mut() {
                Some(last) if open && last.entity_type == *t => last.end = i,
                _ => {
                    out.push(EntitySpan::new(t.clone(), i, i));
                    open = true;
                }
            },
        }
    }
    out
}

/// Class index of a tag for a fixed type order: 0 is `O`, then `B-T` at
/// `1 + 2k` and `I-T` at `2 + 2k` for the `k`-th type.
pub fn bio_class_index(tag: &BioTag, types: &[String]) -> Result<usize> {
    let find = |t: &str| {
        types
            .iter()
            .position(|x| x == t)
            .ok_or_else(|| Error::invalid(format!("entity type {t:?} is not in the label set")))
    };
    Ok(match tag {
        BioTag::O => 0,
        BioTag::B(t) => 1 + 2 * find(t)?,
        BioTag::I(t) => 2 + 2 * find(t)?,
    })
}

/// Inverse of [`bio_class_index`].
pub fn bio_class_tag(class: usize, types: &[String]) -> Result<BioTag> {
    if class == 0 {
        return Ok(BioTag::O);
    }
    let t = types
        .get((class - 1) / 2)
        .ok_or_else(|| Error::invalid(format!("class {class} outside 0..{}", 2 * types.len() + 1)))?
        .clone();
    Ok(if class % 2 == 1 { BioTag::B(t) } else { BioTag::I(t) })
}

/// Mean token-level cross-entropy of `2·|types| + 1` BIO-class logits.
pub fn ee_loss(logits: ArrayView2<f64>, gold: &[BioTag], types: &[String]) -> Result<f64> {
    if logits.ncols() != 2 * types.len() + 1 {
        return Err(Error::invalid(format!(
            "{} logit columns for {} entity types; expected {}",
            logits.ncols(),
            types.len(),
            2 * types.len() + 1
        )));
    }
    let targets = gold
        .iter()
        .map(|t| bio_class_index(t, types))
        .collect::<Result<Vec<_>>>()?;
    mean_softmax_xent("entity extraction", logits, &targets)
}

/// Cross-entropy of the document-class logits.
pub fn dc_loss(logits: ArrayView1<f64>, label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::invalid(format!("label {label} outside 0..{}", logits.len())));
    }
    check_finite("document classification", logits.insert_axis(ndarray::Axis(0)))?;
    Ok(softmax_xent(logits, label))
}

/// Fraction of exact matches.
pub fn dc_accuracy<T: PartialEq>(preds: &[T], labels: &[T]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrfCounts {
    pub tp: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl PrfCounts {
    pub fn add(&mut self, o: PrfCounts) {
        self.tp += o.tp;
        self.predicted += o.predicted;
        self.gold += o.gold;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.gold)
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypePrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of gold spans.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfReport {
    pub per_type: BTreeMap<String, TypePrf>,
    pub micro: Prf,
    pub counts: BTreeMap<String, PrfCounts>,
}

impl PrfReport {
    /// Rates from counts; the micro row uses the summed counts.
    pub fn from_counts(counts: BTreeMap<String, PrfCounts>) -> Self {
        let mut total = PrfCounts::default();
        let per_type = counts
            .iter()
            .map(|(t, c)| {
                total.add(*c);
                let row = TypePrf {
                    precision: c.precision(),
                    recall: c.recall(),
                    f1: c.f1(),
                    support: c.gold,
                };
                (t.clone(), row)
            })
            .collect();
        PrfReport {
            per_type,
            micro: Prf {
                precision: total.precision(),
                recall: total.recall(),
                f1: total.f1(),
            },
            counts,
        }
    }
}

/// Per-type match counts for one document. Spans are compared as sets:
/// a match is equality of (type, start, end) and repeated spans count once.
pub fn entity_counts(pred: &[EntitySpan], gold: &[EntitySpan]) -> BTreeMap<String, PrfCounts> {
    let pred: BTreeSet<&EntitySpan> = pred.iter().collect();
    let gold: BTreeSet<&EntitySpan> = gold.iter().collect();
    let mut counts: BTreeMap<String, PrfCounts> = BTreeMap::new();
    for s in &pred {
        let c = counts.entry(s.entity_type.clone()).or_default();
        c.predicted += 1;
        if gold.contains(s) {
            c.tp += 1;
        }
    }
    for s in &gold {
        counts.entry(s.entity_type.clone()).or_default().gold += 1;
    }
    counts
}

pub fn merge_counts(into: &mut BTreeMap<String, PrfCounts>, other: &BTreeMap<String, PrfCounts>) {
    for (t, c) in other {
        into.entry(t.clone()).or_default().add(*c);
    }
}

pub fn entity_prf(pred: &[EntitySpan], gold: &[EntitySpan]) -> PrfReport {
    PrfReport::from_counts(entity_counts(pred, gold))
}

/// Corpus-level report: counts are summed over `(pred, gold)` documents.
pub fn entity_prf_docs<'a, I>(docs: I) -> PrfReport
where
    I: IntoIterator<Item = (&'a [EntitySpan], &'a [EntitySpan])>,
{
    let mut counts = BTreeMap::new();
    for (p, g) in docs {
        merge_counts(&mut counts, &entity_counts(p, g));
    }
    PrfReport::from_counts(counts)
}

/// One line of a gold or predicted span file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanDocument {
    pub doc_id: String,
    pub spans: Vec<EntitySpan>,
}

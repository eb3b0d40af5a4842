use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CorpusRecord, Status};
use crate::doctok::OcrDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NoOcr,
    LowConfidence,
    TooFewTokens,
    LowAlnumRatio,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NoOcr => "no_ocr",
            RejectReason::LowConfidence => "low_confidence",
            RejectReason::TooFewTokens => "too_few_tokens",
            RejectReason::LowAlnumRatio => "low_alnum_ratio",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterThresholds {
    /// Minimum mean character confidence.
    pub min_confidence: f64,
    /// Minimum number of OCR words.
    pub min_tokens: usize,
    /// Minimum share of alphanumeric characters among non-space characters.
    pub alnum_ratio_min: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        FilterThresholds {
            min_confidence: 0.6,
            min_tokens: 20,
            alnum_ratio_min: 0.4,
        }
    }
}

pub fn alnum_ratio(ocr: &OcrDocument) -> f64 {
    let visible: Vec<char> = ocr
        .chars
        .iter()
        .map(|c| c.glyph)
        .filter(|c| !c.is_whitespace())
        .collect();
    if visible.is_empty() {
        return 0.0;
    }
    visible.iter().filter(|c| c.is_alphanumeric()).count() as f64 / visible.len() as f64
}

/// Checks run in order: OCR present, confidence, word count, alphanumeric
/// ratio; the first failure is reported.
pub fn quality_filter(
    _record: &CorpusRecord,
    ocr: Option<&OcrDocument>,
    thresholds: &FilterThresholds,
) -> Status {
    let Some(ocr) = ocr else {
        return Status::Rejected(RejectReason::NoOcr);
    };
    if ocr.mean_confidence() < thresholds.min_confidence {
        Status::Rejected(RejectReason::LowConfidence)
    } else if ocr.word_count() < thresholds.min_tokens {
        Status::Rejected(RejectReason::TooFewTokens)
    } else if alnum_ratio(ocr) < thresholds.alnum_ratio_min {
        Status::Rejected(RejectReason::LowAlnumRatio)
    } else {
        Status::Kept
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub total: usize,
    pub kept: usize,
    pub rejected_by_reason: BTreeMap<RejectReason, usize>,
}

impl FilterReport {
    pub fn from_records(records: &[CorpusRecord]) -> Self {
        let mut report = FilterReport::default();
        for r in records {
            report.total += 1;
            match r.status {
                Status::Kept => report.kept += 1,
                Status::Rejected(reason) => *report.rejected_by_reason.entry(reason).or_default() += 1,
            }
        }
        report
    }

    pub fn reconciles(&self) -> bool {
        self.kept + self.rejected_by_reason.values().sum::<usize>() == self.total
    }
}

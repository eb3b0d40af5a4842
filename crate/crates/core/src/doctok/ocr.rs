//! OCR documents: characters with pixel boxes and confidences, grouped
//! into words in reading order.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::bbox::BBox;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OcrChar {
    pub glyph: char,
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcrDocument {
    pub doc_id: String,
    pub page_width: u32,
    pub page_height: u32,
    pub chars: Vec<OcrChar>,
    /// Character index range of each word.
    pub word_boundaries: Vec<Range<usize>>,
}

// ---- wire format -------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcrPage {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcrCharJson {
    pub c: char,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcrWordJson {
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chars: Option<Vec<OcrCharJson>>,
}

/// The OCR input document: words in reading order, optional per-character
/// boxes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcrDocumentJson {
    pub doc_id: String,
    pub page: OcrPage,
    pub words: Vec<OcrWordJson>,
}

/// Splits a word box into equal-width character boxes.
pub fn subdivide_word_box(bbox: &BBox, n: usize) -> Vec<BBox> {
    let step = bbox.width() / n as f64;
    (0..n)
        .map(|i| {
            let x0 = bbox.x0 + step * i as f64;
            let x1 = if i + 1 == n { bbox.x1 } else { bbox.x0 + step * (i + 1) as f64 };
            BBox::new(x0, bbox.y0, x1, bbox.y1)
        })
        .collect()
}

impl OcrDocument {
    pub fn from_json(doc: &OcrDocumentJson) -> Result<Self> {
        let (w, h) = (doc.page.width, doc.page.height);
        if w == 0 || h == 0 {
            return Err(Error::invalid(format!("{}: page has zero size", doc.doc_id)));
        }
        let (wf, hf) = (f64::from(w), f64::from(h));
        let check = |b: &BBox, what: &str| -> Result<()> {
            if !b.is_finite() || !b.is_ordered() || !b.within_page(wf, hf) {
                return Err(Error::invalid(format!(
                    "{}: {what} box {:?} is malformed or outside the {w}x{h} page",
                    doc.doc_id,
                    <[f64; 4]>::from(*b)
                )));
            }
            Ok(())
        };
        let mut chars = Vec::new();
        let mut word_boundaries = Vec::new();
        for word in &doc.words {
            check(&word.bbox, "word")?;
            if !(0.0..=1.0).contains(&word.confidence) {
                return Err(Error::invalid(format!(
                    "{}: confidence {} outside [0, 1]",
                    doc.doc_id, word.confidence
                )));
            }
            let glyphs: Vec<char> = word.text.chars().collect();
            if glyphs.is_empty() {
                continue;
            }
            let start = chars.len();
            match &word.chars {
                Some(cs) => {
                    let text_from_chars: String = cs.iter().map(|c| c.c).collect();
                    if text_from_chars != word.text {
                        return Err(Error::invalid(format!(
                            "{}: chars {text_from_chars:?} do not spell word {:?}",
                            doc.doc_id, word.text
                        )));
                    }
                    for c in cs {
                        check(&c.bbox, "char")?;
                        chars.push(OcrChar {
                            glyph: c.c,
                            bbox: c.bbox,
                            confidence: word.confidence,
                        });
                    }
                }
                None => {
                    for (glyph, bbox) in glyphs.iter().zip(subdivide_word_box(&word.bbox, glyphs.len())) {
                        chars.push(OcrChar {
                            glyph: *glyph,
                            bbox,
                            confidence: word.confidence,
                        });
                    }
                }
            }
            word_boundaries.push(start..chars.len());
        }
        Ok(OcrDocument {
            doc_id: doc.doc_id.clone(),
            page_width: w,
            page_height: h,
            chars,
            word_boundaries,
        })
    }

    pub fn parse(json: &str) -> Result<Self> {
        let raw: OcrDocumentJson = serde_json::from_str(json).map_err(|e| Error::Format {
            what: "OCR document",
            msg: e.to_string(),
        })?;
        Self::from_json(&raw)
    }

    pub fn to_json(&self) -> OcrDocumentJson {
        OcrDocumentJson {
            doc_id: self.doc_id.clone(),
            page: OcrPage {
                width: self.page_width,
                height: self.page_height,
            },
            words: self
                .word_boundaries
                .iter()
                .map(|r| {
                    let cs = &self.chars[r.clone()];
                    let bbox = cs[1..].iter().fold(cs[0].bbox, |a, c| a.union(&c.bbox));
                    OcrWordJson {
                        text: cs.iter().map(|c| c.glyph).collect(),
                        bbox,
                        confidence: cs[0].confidence,
                        chars: Some(
                            cs.iter()
                                .map(|c| OcrCharJson {
                                    c: c.glyph,
                                    bbox: c.bbox,
                                })
                                .collect(),
                        ),
                    }
                })
                .collect(),
        }
    }

    pub fn word_count(&self) -> usize {
        self.word_boundaries.len()
    }

    pub fn mean_confidence(&self) -> f64 {
        if self.chars.is_empty() {
            return 0.0;
        }
        self.chars.iter().map(|c| c.confidence).sum::<f64>() / self.chars.len() as f64
    }

    /// Document text: words joined by single spaces, together with the OCR
    /// character index behind each text character (`None` for separators).
    pub fn text_with_alignment(&self) -> (String, Vec<Option<usize>>) {
        let mut text = String::new();
        let mut align = Vec::with_capacity(self.chars.len() + self.word_boundaries.len());
        for (i, word) in self.word_boundaries.iter().enumerate() {
            if i > 0 {
                text.push(' ');
                align.push(None);
            }
            for c in word.clone() {
                text.push(self.chars[c].glyph);
                align.push(Some(c));
            }
        }
        (text, align)
    }

    pub fn text(&self) -> String {
        self.text_with_alignment().0
    }

    /// Reorders words top-to-bottom, left-to-right: words are clustered into
    /// lines when their vertical centers are within half the median word
    /// height, lines are ordered by mean center, words within a line by x0.
    pub fn reorder_by_lines(&mut self) {
        if self.word_boundaries.len() < 2 {
            return;
        }
        let boxes: Vec<BBox> = self
            .word_boundaries
            .iter()
            .map(|r| {
                let cs = &self.chars[r.clone()];
                cs[1..].iter().fold(cs[0].bbox, |a, c| a.union(&c.bbox))
            })
            .collect();
        let mut heights: Vec<f64> = boxes.iter().map(BBox::height).collect();
        heights.sort_by(f64::total_cmp);
        let tol = (heights[heights.len() / 2] / 2.0).max(1.0);

        let mut by_y: Vec<usize> = (0..boxes.len()).collect();
        by_y.sort_by(|&a, &b| boxes[a].center_y().total_cmp(&boxes[b].center_y()).then(a.cmp(&b)));
        let mut lines: Vec<Vec<usize>> = Vec::new();
        let mut line_center = f64::NEG_INFINITY;
        for w in by_y {
            let cy = boxes[w].center_y();
            match lines.last_mut() {
                Some(line) if (cy - line_center).abs() <= tol => {
                    line.push(w);
                    line_center = line.iter().map(|&i| boxes[i].center_y()).sum::<f64>() / line.len() as f64;
                }
                _ => {
                    lines.push(vec![w]);
                    line_center = cy;
                }
            }
        }
        let order: Vec<usize> = lines
            .into_iter()
            .flat_map(|mut line| {
                line.sort_by(|&a, &b| boxes[a].x0.total_cmp(&boxes[b].x0).then(a.cmp(&b)));
                line
            })
            .collect();

        let mut chars = Vec::with_capacity(self.chars.len());
        let mut bounds = Vec::with_capacity(order.len());
        for w in order {
            let start = chars.len();
            chars.extend_from_slice(&self.chars[self.word_boundaries[w].clone()]);
            bounds.push(start..chars.len());
        }
        self.chars = chars;
        self.word_boundaries = bounds;
    }
}

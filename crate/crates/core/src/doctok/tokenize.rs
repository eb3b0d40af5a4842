use std::ops::Range;

use base64::Engine;
use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::bbox::{crop_box, normalize_box, token_bbox, BBox, NormBox};
use super::crop::extract_crop;
use super::ocr::{OcrDocument, OcrPage};
use super::tagger::{project_tags, weak_tag, TokenTags};
use super::wordpiece::{wordpiece_tokenize, Vocab, CLS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenizeConfig {
    /// Context ratio added on each side of a token box before cropping.
    pub context_ratio: f64,
    /// Crops are resampled to `crop_size × crop_size` RGB.
    pub crop_size: usize,
    /// Includes the leading `[CLS]`.
    pub max_seq_len: usize,
}

impl Default for TokenizeConfig {
    fn default() -> Self {
        TokenizeConfig {
            context_ratio: 0.1,
            crop_size: 16,
            max_seq_len: 512,
        }
    }
}

impl TokenizeConfig {
    pub fn crop_dim(&self) -> usize {
        3 * self.crop_size * self.crop_size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub text_id: u32,
    pub surface: String,
    pub pos_1d: u32,
    pub bbox: BBox,
    pub crop_box: BBox,
    pub norm_box: NormBox,
    /// Character range in the document text; empty for `[CLS]`.
    pub chars: Range<usize>,
    pub crop: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub doc_id: String,
    pub vocab_id: String,
    pub page_width: u32,
    pub page_height: u32,
    pub crop_size: usize,
    pub tokens: Vec<Token>,
    /// Weak tags per token, when the sequence has been tagged.
    pub tags: Option<Vec<TokenTags>>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn char_ranges(&self) -> Vec<Range<usize>> {
        self.tokens.iter().map(|t| t.chars.clone()).collect()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.tokens.iter().map(|t| t.text_id).collect()
    }
}

/// Multimodal tokenization of one OCR page: WordPiece tokens, the union box
/// of each token's characters, its context crop box, normalized layout
/// box and resampled pixel crop. A `[CLS]` token covering the full page is
/// prepended and the sequence is truncated to `max_seq_len`.
pub fn tokenize_document(
    ocr: &OcrDocument,
    image: &RgbImage,
    vocab: &Vocab,
    cfg: &TokenizeConfig,
) -> Result<TokenSequence> {
    if cfg.max_seq_len == 0 {
        return Err(Error::invalid("max_seq_len must be at least 1"));
    }
    if image.width() != ocr.page_width || image.height() != ocr.page_height {
        return Err(Error::invalid(format!(
            "{}: image is {}x{} but the OCR page is {}x{}",
            ocr.doc_id,
            image.width(),
            image.height(),
            ocr.page_width,
            ocr.page_height
        )));
    }
    let (pw, ph) = (f64::from(ocr.page_width), f64::from(ocr.page_height));
    let (text, align) = ocr.text_with_alignment();
    let pieces = wordpiece_tokenize(&text, vocab);

    let page = BBox::new(0.0, 0.0, pw, ph);
    let mut tokens = Vec::with_capacity(cfg.max_seq_len.min(pieces.len() + 1));
    tokens.push(Token {
        text_id: vocab.cls_id,
        surface: CLS.to_string(),
        pos_1d: 0,
        bbox: page,
        crop_box: page,
        norm_box: normalize_box(&page, pw, ph)?,
        chars: 0..0,
        crop: extract_crop(image, &page, cfg.crop_size)?,
    });

    for piece in pieces.into_iter().take(cfg.max_seq_len - 1) {
        let boxes: Vec<BBox> = align[piece.chars.clone()]
            .iter()
            .flatten()
            .map(|&c| ocr.chars[c].bbox)
            .collect();
        let bbox = token_bbox(&boxes)?;
        let cb = crop_box(&bbox, cfg.context_ratio, pw, ph)?.bbox;
        tokens.push(Token {
            text_id: piece.id,
            surface: piece.surface,
            pos_1d: tokens.len() as u32,
            bbox,
            crop_box: cb,
            norm_box: normalize_box(&bbox, pw, ph)?,
            chars: piece.chars,
            crop: extract_crop(image, &cb, cfg.crop_size)?,
        });
    }

    Ok(TokenSequence {
        doc_id: ocr.doc_id.clone(),
        vocab_id: vocab.fingerprint().to_string(),
        page_width: ocr.page_width,
        page_height: ocr.page_height,
        crop_size: cfg.crop_size,
        tokens,
        tags: None,
    })
}

/// Runs the weak tagger over the document text and attaches per-token tags.
pub fn tag_sequence(seq: &mut TokenSequence, text: &str) {
    let spans = weak_tag(text);
    seq.tags = Some(project_tags(&spans, &seq.char_ranges()));
}

// ---- JSONL wire format -------------------------------------------------

pub fn encode_f32s(values: &[f32]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub fn decode_f32s(s: &str) -> Result<Vec<f32>> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(s)
        .map_err(|e| Error::Format {
            what: "base64 f32 array",
            msg: e.to_string(),
        })?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Format {
            what: "base64 f32 array",
            msg: format!("{} bytes is not a multiple of 4", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenRecord {
    pub id: u32,
    pub surface: String,
    pub pos: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub crop_box: BBox,
    pub norm_box: NormBox,
    pub chars: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<TokenTags>,
    /// Little-endian `f32` crop pixels, base64.
    pub crop: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenSequenceRecord {
    pub doc_id: String,
    pub vocab_id: String,
    pub page: OcrPage,
    pub crop_size: usize,
    pub tokens: Vec<TokenRecord>,
}

impl From<&TokenSequence> for TokenSequenceRecord {
    fn from(seq: &TokenSequence) -> Self {
        TokenSequenceRecord {
            doc_id: seq.doc_id.clone(),
            vocab_id: seq.vocab_id.clone(),
            page: OcrPage {
                width: seq.page_width,
                height: seq.page_height,
            },
            crop_size: seq.crop_size,
            tokens: seq
                .tokens
                .iter()
                .enumerate()
                .map(|(i, t)| TokenRecord {
                    id: t.text_id,
                    surface: t.surface.clone(),
                    pos: t.pos_1d,
                    bbox: t.bbox,
                    crop_box: t.crop_box,
                    norm_box: t.norm_box,
                    chars: [t.chars.start, t.chars.end],
                    tags: seq.tags.as_ref().map(|tags| tags[i]),
                    crop: encode_f32s(&t.crop),
                })
                .collect(),
        }
    }
}

impl TryFrom<&TokenSequenceRecord> for TokenSequence {
    type Error = Error;

    fn try_from(rec: &TokenSequenceRecord) -> Result<Self> {
        let crop_dim = 3 * rec.crop_size * rec.crop_size;
        let mut tokens = Vec::with_capacity(rec.tokens.len());
        let mut tags = Vec::with_capacity(rec.tokens.len());
        for (i, t) in rec.tokens.iter().enumerate() {
            if t.pos as usize != i {
                return Err(Error::invalid(format!("{}: token {i} has pos {}", rec.doc_id, t.pos)));
            }
            let crop = decode_f32s(&t.crop)?;
            if crop.len() != crop_dim {
                return Err(Error::invalid(format!(
                    "{}: token {i} crop has {} values, expected {crop_dim}",
                    rec.doc_id,
                    crop.len()
                )));
            }
            tags.push(t.tags);
            tokens.push(Token {
                text_id: t.id,
                surface: t.surface.clone(),
                pos_1d: t.pos,
                bbox: t.bbox,
                crop_box: t.crop_box,
                norm_box: t.norm_box,
                chars: t.chars[0]..t.chars[1],
                crop,
            });
        }
        let tags = if !tags.is_empty() && tags.iter().all(Option::is_some) {
            Some(tags.into_iter().flatten().collect())
        } else {
            None
        };
        Ok(TokenSequence {
            doc_id: rec.doc_id.clone(),
            vocab_id: rec.vocab_id.clone(),
            page_width: rec.page.width,
            page_height: rec.page.height,
            crop_size: rec.crop_size,
            tokens,
            tags,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doctok::ocr::{OcrDocumentJson, OcrWordJson};
    use crate::doctok::tagger::TagClass;
    use image::Rgb;
    use proptest::prelude::*;

    fn vocab() -> Vocab {
        Vocab::default_uncased()
    }

    fn doc(words: &[(&str, [f64; 4])]) -> OcrDocument {
        OcrDocument::from_json(&OcrDocumentJson {
            doc_id: "t".into(),
            page: OcrPage { width: 200, height: 100 },
            words: words
                .iter()
                .map(|(t, b)| OcrWordJson {
                    text: t.to_string(),
                    bbox: BBox::from(*b),
                    confidence: 0.9,
                    chars: None,
                })
                .collect(),
        })
        .unwrap()
    }

    fn page() -> RgbImage {
        RgbImage::from_fn(200, 100, |x, y| Rgb([(x % 256) as u8, (y * 2) as u8, 128]))
    }

    #[test]
    fn three_words_no_truncation() {
        let d = doc(&[("invoice", [10., 10., 60., 20.]), ("total", [70., 10., 100., 20.]), ("zzqx", [110., 10., 150., 20.])]);
        let v = vocab();
        let expected_pieces = wordpiece_tokenize(&d.text(), &v).len();
        let seq = tokenize_document(&d, &page(), &v, &TokenizeConfig::default()).unwrap();
        assert_eq!(seq.len(), 1 + expected_pieces);
        assert_eq!(seq.tokens[0].surface, CLS);
        assert_eq!(seq.tokens[0].norm_box, [0, 0, 1000, 1000, 1000, 1000]);
        assert_eq!(seq.tokens[1].surface, "invoice");
        assert_eq!(seq.tokens[1].bbox, BBox::new(10., 10., 60., 20.));
        assert_eq!(seq.tokens[1].crop_box, BBox::new(5., 9., 65., 21.));
        assert_eq!(seq.tokens[1].norm_box, [50, 100, 300, 200, 250, 100]);
        for (i, t) in seq.tokens.iter().enumerate() {
            assert_eq!(t.pos_1d as usize, i);
            assert_eq!(t.crop.len(), 768);
        }
    }

    #[test]
    fn subword_tokens_get_their_own_boxes() {
        // "zzqx" splits into single-character pieces, each covering one
        // uniformly subdivided character box.
        let d = doc(&[("zzqx", [100., 10., 140., 20.])]);
        let seq = tokenize_document(&d, &page(), &vocab(), &TokenizeConfig::default()).unwrap();
        let surfaces: Vec<_> = seq.tokens.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, ["[CLS]", "z", "##z", "##q", "##x"]);
        assert_eq!(seq.tokens[2].bbox, BBox::new(110., 10., 120., 20.));
    }

    #[test]
    fn truncates_to_max_len() {
        let words: Vec<(String, [f64; 4])> = (0..600)
            .map(|i| ("total".to_string(), [(i % 19) as f64 * 10.0, (i / 19) as f64 * 3.0, (i % 19) as f64 * 10.0 + 9.0, (i / 19) as f64 * 3.0 + 2.0]))
            .collect();
        let refs: Vec<(&str, [f64; 4])> = words.iter().map(|(t, b)| (t.as_str(), *b)).collect();
        let cfg = TokenizeConfig { crop_size: 2, ..Default::default() };
        let seq = tokenize_document(&doc(&refs), &page(), &vocab(), &cfg).unwrap();
        assert_eq!(seq.len(), 512);
    }

    #[test]
    fn empty_ocr_yields_only_cls() {
        let seq = tokenize_document(&doc(&[]), &page(), &vocab(), &TokenizeConfig::default()).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.tokens[0].text_id, vocab().cls_id);
    }

    #[test]
    fn image_must_match_page() {
        let img = RgbImage::new(10, 10);
        assert!(tokenize_document(&doc(&[]), &img, &vocab(), &TokenizeConfig::default()).is_err());
    }

    #[test]
    fn tagging_and_record_round_trip() {
        let d = doc(&[("pay", [10., 10., 30., 20.]), ("$12.99", [40., 10., 80., 20.]), ("john@doe.com", [90., 10., 190., 20.])]);
        let cfg = TokenizeConfig { crop_size: 4, ..Default::default() };
        let mut seq = tokenize_document(&d, &page(), &vocab(), &cfg).unwrap();
        tag_sequence(&mut seq, &d.text());
        let tags = seq.tags.as_ref().unwrap();
        let price_tokens: Vec<_> = seq.tokens.iter().zip(tags).filter(|(_, t)| t[TagClass::Price.index()] == 1).map(|(t, _)| t.surface.as_str()).collect();
        assert_eq!(price_tokens, ["$", "12", ".", "99"]);
        assert_eq!(tags[0], [0; 6]);
        let rec = TokenSequenceRecord::from(&seq);
        let json = serde_json::to_string(&rec).unwrap();
        let back: TokenSequenceRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(TokenSequence::try_from(&back).unwrap(), seq);
    }

    proptest! {
        #[test]
        fn crop_box_contains_token_box(
            words in prop::collection::vec((0.0..190.0f64, 0.0..90.0f64, 1.0..60.0f64, 0.0..10.0f64), 1..12),
            r in 0.0..1.0f64,
        ) {
            let owned: Vec<(String, [f64; 4])> = words.iter().enumerate().map(|(i, &(x, y, w, h))| {
                (format!("w{i}x"), [x, y, (x + w).min(200.0), (y + h).min(100.0)])
            }).collect();
            let refs: Vec<(&str, [f64; 4])> = owned.iter().map(|(t, b)| (t.as_str(), *b)).collect();
            let cfg = TokenizeConfig { context_ratio: r, crop_size: 2, max_seq_len: 512 };
            let seq = tokenize_document(&doc(&refs), &page(), &vocab(), &cfg).unwrap();
            for t in &seq.tokens {
                prop_assert!(t.crop_box.contains(&t.bbox));
                prop_assert!(t.norm_box.iter().all(|&v| v <= 1000));
                prop_assert_eq!(t.norm_box[4], t.norm_box[2] - t.norm_box[0]);
            }
        }
    }
}

//! Deterministic synthetic inputs: image-embedding stores shaped around
//! ontology keywords, OCR pages with tag-worthy content, rendered page
//! images, and entity-labeled corpora for episode sampling.

use image::{Rgb, RgbImage};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::OcrProvider;
use crate::doctok::ocr::{OcrPage, OcrWordJson};
use crate::doctok::{BBox, OcrDocument, OcrDocumentJson};
use crate::embed::{gaussian_unit, seeded_rng, EmbeddingProvider, UnitVector, VectorStore};
use crate::error::Result;
use crate::fewshot::EntityDocument;
use crate::finetune::EntitySpan;

/// `n` isotropic random unit vectors with ids `0..n`.
pub fn random_unit_store(n: usize, dim: usize, seed: u64) -> VectorStore {
    let mut rng = seeded_rng(seed, b"random-store");
    VectorStore::from_rows(dim, (0..n as u64).map(|i| (i, gaussian_unit(&mut rng, dim))))
        .expect("generated rows are unit vectors of one dimension")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    /// Items drawn around a keyword embedding; the rest are background.
    pub topical_fraction: f64,
    /// Items that repeat an earlier vector under a new id.
    pub exact_copy_fraction: f64,
    /// Items that perturb an earlier vector slightly.
    pub near_copy_fraction: f64,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            n: 50_000,
            dim: crate::embed::DEFAULT_DIM,
            seed: 0,
            topical_fraction: 0.7,
            exact_copy_fraction: 0.01,
            near_copy_fraction: 0.01,
        }
    }
}

fn mix(anchor: &[f32], noise: &UnitVector, a: f64) -> UnitVector {
    let b = (1.0 - a * a).max(0.0).sqrt();
    let v: Vec<f64> = anchor
        .iter()
        .zip(noise.as_slice())
        .map(|(&x, &g)| a * f64::from(x) + b * f64::from(g))
        .collect();
    UnitVector::from_f64(&v).expect("mixture of unit vectors is non-zero")
}

/// A store whose items cluster around the embeddings of `keywords`, with
/// injected exact and near copies so that deduplication has work to do.
pub fn keyword_store(
    keywords: &[String],
    embedder: &dyn EmbeddingProvider,
    cfg: &StoreConfig,
) -> Result<VectorStore> {
    let anchors = keywords
        .iter()
        .map(|k| embedder.embed_text(k))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seeded_rng(cfg.seed, b"keyword-store");
    let mut store = VectorStore::new(cfg.dim);
    let mut rows: Vec<UnitVector> = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let u: f64 = rng.random();
        let v = if !rows.is_empty() && u < cfg.exact_copy_fraction {
            rows[rng.random_range(0..rows.len())].clone()
        } else if !rows.is_empty() && u < cfg.exact_copy_fraction + cfg.near_copy_fraction {
            let base = rows[rng.random_range(0..rows.len())].clone();
            let noise = gaussian_unit(&mut rng, cfg.dim);
            mix(base.as_slice(), &noise, 0.997)
        } else if !anchors.is_empty() && rng.random::<f64>() < cfg.topical_fraction {
            let anchor = &anchors[rng.random_range(0..anchors.len())];
            let noise = gaussian_unit(&mut rng, cfg.dim);
            mix(anchor.as_slice(), &noise, rng.random_range(0.3..0.85))
        } else {
            gaussian_unit(&mut rng, cfg.dim)
        };
        store.push(i as u64, v.clone())?;
        rows.push(v);
    }
    Ok(store)
}

const WORDS: &[&str] = &[
    "invoice", "number", "date", "total", "amount", "due", "balance", "account", "payment",
    "customer", "service", "description", "quantity", "price", "tax", "subtotal", "order",
    "shipping", "address", "name", "phone", "email", "company", "report", "statement", "bank",
    "period", "summary", "item", "unit", "rate", "hours", "contract", "agreement", "party",
    "parties", "shall", "terms", "conditions", "section", "signature", "page", "of", "the",
    "and", "to", "for", "in", "on", "by", "with", "from", "this", "that", "is", "are", "be",
    "will", "please", "remit", "receipt", "paid", "card", "cash", "change", "store", "thank",
    "you", "form", "application", "student", "school", "grade", "course", "certificate",
    "license", "policy", "insurance", "claim", "notice", "letter", "dear", "sincerely",
    "reference", "department", "office", "manager", "director", "approved", "received",
    "annual", "monthly", "income", "expenses", "net", "gross", "credit", "debit", "deposit",
    "transfer", "loan", "interest", "fee", "charges", "memo", "note", "schedule", "plan",
];

const STREETS: &[&str] = &["Main", "Oak", "Maple", "Cedar", "Park", "Pine", "Elm", "Lake", "Hill", "Washington"];
const SUFFIXES: &[&str] = &["Street", "Avenue", "Road", "Drive", "Lane", "Boulevard"];
const CITIES: &[&str] = &["Springfield", "Riverside", "Fairview", "Madison", "Georgetown", "Salem"];
const STATES: &[&str] = &["CA", "NY", "TX", "IL", "WA", "OH"];
const MONTHS: &[&str] = &[
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];
const TITLES: &[&str] = &["Mr.", "Mrs.", "Ms.", "Dr."];
const DOMAINS: &[&str] = &["example", "mailhost", "acme", "northwind"];
const JUNK: &[&str] = &["~;:.", ",,.-", "|/\\", "..::", "=-=", "*'`", "_.,;", "«»"];

fn names(text: &str) -> Vec<&str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

fn person(rng: &mut ChaCha8Rng) -> (String, String) {
    static GIVEN: &str = include_str!("../data/given_names.txt");
    static FAMILY: &str = include_str!("../data/family_names.txt");
    let g = capitalize(names(GIVEN).choose(rng).expect("non-empty gazetteer"));
    let f = capitalize(names(FAMILY).choose(rng).expect("non-empty gazetteer"));
    (g, f)
}

/// One phrase that the weak tagger should recognize.
fn entity_phrase(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..6) {
        0 => {
            let (g, f) = person(rng);
            format!(
                "{}.{}@{}.com",
                g.to_lowercase(),
                f.to_lowercase(),
                DOMAINS.choose(rng).unwrap()
            )
        }
        1 => format!(
            "({}) {}-{:04}",
            rng.random_range(200..999),
            rng.random_range(200..999),
            rng.random_range(0..10_000)
        ),
        2 => {
            let dollars = rng.random_range(1..25_000u32);
            let whole = if dollars >= 1000 {
                format!("{},{:03}", dollars / 1000, dollars % 1000)
            } else {
                dollars.to_string()
            };
            format!("${whole}.{:02}", rng.random_range(0..100))
        }
        3 => {
            if rng.random::<bool>() {
                format!(
                    "{} {}, {}",
                    MONTHS.choose(rng).unwrap(),
                    rng.random_range(1..29),
                    rng.random_range(1990..2024)
                )
            } else {
                format!(
                    "{:02}/{:02}/{}",
                    rng.random_range(1..13),
                    rng.random_range(1..29),
                    rng.random_range(1990..2024)
                )
            }
        }
        4 => format!(
            "{} {} {}, {}, {} {:05}",
            rng.random_range(1..9999),
            STREETS.choose(rng).unwrap(),
            SUFFIXES.choose(rng).unwrap(),
            CITIES.choose(rng).unwrap(),
            STATES.choose(rng).unwrap(),
            rng.random_range(10_000..99_999)
        ),
        _ => {
            let (g, f) = person(rng);
            if rng.random::<bool>() {
                format!("{} {g} {f}", TITLES.choose(rng).unwrap())
            } else {
                format!("{g} {f}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PageQuality {
    Clean,
    LowConfidence,
    Sparse,
    Garbled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcrSynthConfig {
    pub page_width: u32,
    pub page_height: u32,
    /// Probability of each degraded page kind.
    pub low_confidence_rate: f64,
    pub sparse_rate: f64,
    pub garbled_rate: f64,
    /// Images for which no OCR result exists.
    pub missing_rate: f64,
}

impl Default for OcrSynthConfig {
    fn default() -> Self {
        OcrSynthConfig {
            page_width: 480,
            page_height: 640,
            low_confidence_rate: 0.08,
            sparse_rate: 0.08,
            garbled_rate: 0.06,
            missing_rate: 0.03,
        }
    }
}

const CHAR_W: f64 = 7.0;
const CHAR_H: f64 = 12.0;
const LINE_H: f64 = 20.0;
const MARGIN: f64 = 24.0;

/// A synthetic OCR page. Content, layout and quality depend only on
/// `(doc_id, seed)`.
pub fn synthetic_ocr(doc_id: &str, seed: u64, cfg: &OcrSynthConfig) -> OcrDocument {
    let mut rng = seeded_rng(seed, format!("ocr:{doc_id}").as_bytes());
    let u: f64 = rng.random();
    let quality = if u < cfg.low_confidence_rate {
        PageQuality::LowConfidence
    } else if u < cfg.low_confidence_rate + cfg.sparse_rate {
        PageQuality::Sparse
    } else if u < cfg.low_confidence_rate + cfg.sparse_rate + cfg.garbled_rate {
        PageQuality::Garbled
    } else {
        PageQuality::Clean
    };
    let target_words = match quality {
        PageQuality::Sparse => rng.random_range(3..15),
        _ => rng.random_range(40..160),
    };
    let mut words: Vec<String> = Vec::with_capacity(target_words + 8);
    while words.len() < target_words {
        if quality == PageQuality::Garbled {
            let w = if rng.random::<f64>() < 0.15 {
                WORDS.choose(&mut rng).unwrap().to_string()
            } else {
                JUNK.choose(&mut rng).unwrap().to_string()
            };
            words.push(w);
        } else if rng.random::<f64>() < 0.12 {
            words.extend(entity_phrase(&mut rng).split(' ').map(str::to_string));
        } else {
            let w = *WORDS.choose(&mut rng).unwrap();
            words.push(if rng.random::<f64>() < 0.1 { capitalize(w) } else { w.to_string() });
        }
    }

    let (pw, ph) = (f64::from(cfg.page_width), f64::from(cfg.page_height));
    let mut x = MARGIN;
    let mut y = MARGIN;
    let mut out = Vec::with_capacity(words.len());
    for w in words {
        let width = CHAR_W * w.chars().count() as f64;
        if x + width > pw - MARGIN && x > MARGIN {
            x = MARGIN;
            y += LINE_H;
        }
        if y + CHAR_H > ph - MARGIN {
            break;
        }
        let x1 = (x + width).min(pw);
        let confidence = match quality {
            PageQuality::LowConfidence => rng.random_range(0.15..0.55),
            _ => rng.random_range(0.8..0.995),
        };
        out.push(OcrWordJson {
            text: w,
            bbox: BBox::new(x, y, x1, y + CHAR_H),
            confidence,
            chars: None,
        });
        x = x1 + CHAR_W;
    }
    let json = OcrDocumentJson {
        doc_id: doc_id.to_string(),
        page: OcrPage { width: cfg.page_width, height: cfg.page_height },
        words: out,
    };
    OcrDocument::from_json(&json).expect("generated boxes lie on the page")
}

/// Document id used for a store image.
pub fn image_doc_id(image_id: u64) -> String {
    format!("img{image_id:010}")
}

/// OCR provider backed by [`synthetic_ocr`], with a fraction of images
/// having no OCR at all.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticOcr {
    pub seed: u64,
    pub config: OcrSynthConfig,
}

impl OcrProvider for SyntheticOcr {
    fn ocr(&self, image_id: u64) -> Option<OcrDocument> {
        let id = image_doc_id(image_id);
        let mut rng = seeded_rng(self.seed, format!("ocr-missing:{id}").as_bytes());
        if rng.random::<f64>() < self.config.missing_rate {
            return None;
        }
        Some(synthetic_ocr(&id, self.seed, &self.config))
    }
}

/// Renders an OCR page: light paper with a glyph-dependent dark texture in
/// each character box.
pub fn render_page(ocr: &OcrDocument) -> RgbImage {
    let mut img = RgbImage::from_pixel(ocr.page_width, ocr.page_height, Rgb([246, 244, 238]));
    for c in &ocr.chars {
        let code = c.glyph as u32;
        let x0 = c.bbox.x0.floor().max(0.0) as u32;
        let y0 = c.bbox.y0.floor().max(0.0) as u32;
        let x1 = (c.bbox.x1.ceil() as u32).min(ocr.page_width);
        let y1 = (c.bbox.y1.ceil() as u32).min(ocr.page_height);
        for y in y0..y1 {
            for x in x0..x1 {
                let on = (x.wrapping_mul(7) ^ y.wrapping_mul(3) ^ code) % 5 < 2;
                if on {
                    let shade = (20 + code % 60) as u8;
                    img.put_pixel(x, y, Rgb([shade, shade, shade.saturating_add(10)]));
                }
            }
        }
    }
    img
}

/// Every document holds exactly one span, of one type; each type gets
/// `docs_per_type` documents of `len` tokens. Ids are assigned after a
/// seeded shuffle.
pub fn one_occurrence_corpus(types: &[String], docs_per_type: usize, len: usize, seed: u64) -> Vec<EntityDocument> {
    let mut rng = seeded_rng(seed, b"one-occurrence");
    let mut docs: Vec<EntitySpan> = Vec::with_capacity(types.len() * docs_per_type);
    for t in types {
        for _ in 0..docs_per_type {
            let start = rng.random_range(0..len);
            let end = (start + rng.random_range(0..3)).min(len - 1);
            docs.push(EntitySpan::new(t.clone(), start, end));
        }
    }
    docs.shuffle(&mut rng);
    docs.into_iter()
        .enumerate()
        .map(|(i, s)| EntityDocument { doc_id: format!("doc{i:05}"), len, spans: vec![s] })
        .collect()
}

/// Documents with one to four non-overlapping spans each; type `i` is
/// drawn with weight `1 / (i + 1)`, so later types are rarer.
pub fn entity_corpus(types: &[String], num_docs: usize, len: usize, seed: u64) -> Vec<EntityDocument> {
    let mut rng = seeded_rng(seed, b"entity-corpus");
    let weights: Vec<f64> = (0..types.len()).map(|i| 1.0 / (i + 1) as f64).collect();
    let total: f64 = weights.iter().sum();
    (0..num_docs)
        .map(|d| {
            let mut spans = Vec::new();
            let mut next_free = 0;
            for _ in 0..rng.random_range(1..=4) {
                if next_free + 1 >= len {
                    break;
                }
                let start = rng.random_range(next_free..len.min(next_free + len / 4 + 1));
                let end = (start + rng.random_range(0..3)).min(len - 1);
                let mut u = rng.random::<f64>() * total;
                let mut t = 0;
                while t + 1 < types.len() && u >= weights[t] {
                    u -= weights[t];
                    t += 1;
                }
                spans.push(EntitySpan::new(types[t].clone(), start, end));
                next_free = end + 2;
            }
            EntityDocument { doc_id: format!("doc{d:05}"), len, spans }
        })
        .collect()
}

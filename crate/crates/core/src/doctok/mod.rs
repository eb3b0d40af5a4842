//! OCR ingestion and multimodal tokenization.

pub mod bbox;
pub mod crop;
pub mod ocr;
pub mod tagger;
pub mod tokenize;
pub mod wordpiece;

pub use bbox::{crop_box, normalize_box, token_bbox, BBox, CropBox, NormBox, LAYOUT_GRID};
pub use crop::extract_crop;
pub use ocr::{OcrChar, OcrDocument, OcrDocumentJson};
pub use tagger::{project_tags, weak_tag, TagClass, TagSpan, TokenTags, NUM_TAG_CLASSES};
pub use tokenize::{
    tag_sequence, tokenize_document, Token, TokenSequence, TokenSequenceRecord, TokenizeConfig,
};
pub use wordpiece::{wordpiece_tokenize, Piece, Vocab};

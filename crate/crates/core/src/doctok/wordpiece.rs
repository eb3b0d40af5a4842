//! WordPiece vocabulary and greedy longest-match-first tokenizer.

use std::collections::HashMap;
use std::ops::Range;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const MASK: &str = "[MASK]";
pub const PAD: &str = "[PAD]";
pub const SEP: &str = "[SEP]";
pub const CONTINUATION: &str = "##";

/// Words longer than this many characters become a single `[UNK]`.
pub const MAX_WORD_CHARS: usize = 100;

/// The bundled uncased vocabulary.
pub const DEFAULT_VOCAB: &str = include_str!("../../data/vocab.txt");

#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    pub unk_id: u32,
    pub cls_id: u32,
    pub mask_id: u32,
    pub pad_id: u32,
    pub sep_id: Option<u32>,
    /// Input is lowercased before matching.
    pub lowercase: bool,
    fingerprint: String,
}

impl Vocab {
    /// One token per line; the id of a token is its 0-based line number.
    pub fn from_text(text: &str) -> Result<Self> {
        let tokens: Vec<String> = text
            .lines()
            .map(|l| l.trim_end_matches('\r').to_string())
            .collect();
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::InvalidVocab(format!("empty token on line {}", i + 1)));
            }
            ids.entry(t.clone()).or_insert(i as u32);
        }
        let need = |name: &str| {
            ids.get(name)
                .copied()
                .ok_or_else(|| Error::InvalidVocab(format!("missing special token {name}")))
        };
        let digest = Sha256::digest(text.as_bytes());
        Ok(Vocab {
            unk_id: need(UNK)?,
            cls_id: need(CLS)?,
            mask_id: need(MASK)?,
            pad_id: need(PAD)?,
            sep_id: ids.get(SEP).copied(),
            lowercase: true,
            fingerprint: hex::encode(&digest[..8]),
            tokens,
            ids,
        })
    }

    pub fn default_uncased() -> Self {
        Vocab::from_text(DEFAULT_VOCAB).expect("bundled vocabulary is valid")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Short content hash identifying this vocabulary in outputs.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn is_special(&self, id: u32) -> bool {
        id == self.unk_id
            || id == self.cls_id
            || id == self.mask_id
            || id == self.pad_id
            || Some(id) == self.sep_id
    }

    /// Ids eligible as random replacements during masking.
    pub fn replacement_ids(&self) -> Vec<u32> {
        (0..self.len() as u32).filter(|&id| !self.is_special(id)).collect()
    }
}

/// One WordPiece token with its character range in the input text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub id: u32,
    pub surface: String,
    pub chars: Range<usize>,
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace() && !c.is_control())
}

/// Whitespace- and punctuation-separated words as character ranges; each
/// punctuation character is a word of its own.
pub fn pre_tokenize(chars: &[char]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() || c.is_control() {
            if let Some(s) = start.take() {
                out.push(s..i);
            }
        } else if is_punctuation(c) {
            if let Some(s) = start.take() {
                out.push(s..i);
            }
            out.push(i..i + 1);
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(s..chars.len());
    }
    out
}

pub fn wordpiece_tokenize(text: &str, vocab: &Vocab) -> Vec<Piece> {
    let chars: Vec<char> = text.chars().collect();
    let folded: Vec<String> = chars
        .iter()
        .map(|c| if vocab.lowercase { c.to_lowercase().collect() } else { c.to_string() })
        .collect();
    let mut out = Vec::new();
    for word in pre_tokenize(&chars) {
        tokenize_word(&folded, word, vocab, &mut out);
    }
    out
}

fn tokenize_word(folded: &[String], word: Range<usize>, vocab: &Vocab, out: &mut Vec<Piece>) {
    let unk = |out: &mut Vec<Piece>| {
        out.push(Piece {
            id: vocab.unk_id,
            surface: UNK.to_string(),
            chars: word.clone(),
        })
    };
    if word.len() > MAX_WORD_CHARS {
        unk(out);
        return;
    }
    let mut pieces = Vec::new();
    let mut start = word.start;
    while start < word.end {
        let mut found = None;
        let mut end = word.end;
        while end > start {
            let mut cand = String::new();
            if start > word.start {
                cand.push_str(CONTINUATION);
            }
            for s in &folded[start..end] {
                cand.push_str(s);
            }
            if let Some(id) = vocab.id(&cand) {
                found = Some(Piece {
                    id,
                    surface: cand,
                    chars: start..end,
                });
                break;
            }
            end -= 1;
        }
        match found {
            Some(p) => {
                start = p.chars.end;
                pieces.push(p);
            }
            None => {
                unk(out);
                return;
            }
        }
    }
    out.extend(pieces);
}

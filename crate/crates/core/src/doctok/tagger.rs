//! Rule-based weak tagger for six segment classes, and projection of
//! character spans onto token multi-hot vectors.

use std::collections::HashSet;
use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub const NUM_TAG_CLASSES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagClass {
    Email,
    MailAddress,
    Price,
    Date,
    Phone,
    PersonName,
}

impl TagClass {
    pub const ALL: [TagClass; NUM_TAG_CLASSES] = [
        TagClass::Email,
        TagClass::MailAddress,
        TagClass::Price,
        TagClass::Date,
        TagClass::Phone,
        TagClass::PersonName,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TagClass::Email => "email",
            TagClass::MailAddress => "mail_address",
            TagClass::Price => "price",
            TagClass::Date => "date",
            TagClass::Phone => "phone",
            TagClass::PersonName => "person_name",
        }
    }
}

/// A tagged segment; `start..end` are character (not byte) offsets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TagSpan {
    pub class: TagClass,
    pub start: usize,
    pub end: usize,
}

/// Per-token multi-hot tag vector, indexed by [`TagClass::index`].
pub type TokenTags = [u8; NUM_TAG_CLASSES];

const MONTH: &str = r"(?:Jan(?:uary)?|Feb(?:ruary)?|Mar(?:ch)?|Apr(?:il)?|May|June?|July?|Aug(?:ust)?|Sep(?:t(?:ember)?)?|Oct(?:ober)?|Nov(?:ember)?|Dec(?:ember)?)";
const STREET_SUFFIX: &str = r"(?:Street|St|Avenue|Ave|Road|Rd|Boulevard|Blvd|Lane|Ln|Drive|Dr|Court|Ct|Way|Place|Pl|Parkway|Pkwy|Circle|Cir|Highway|Hwy|Terrace|Ter)";

struct Rules {
    patterns: Vec<(TagClass, Regex)>,
    word: Regex,
    given: HashSet<String>,
    family: HashSet<String>,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| {
        let re = |s: &str| Regex::new(s).expect("tagger regex compiles");
        let patterns = vec![
            (
                TagClass::Email,
                re(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}"),
            ),
            (
                TagClass::Phone,
                re(r"(?:\+?1[\s.-]?)?(?:\(\d{3}\)\s?|\d{3}[\s.-])\d{3}[\s.-]\d{4}"),
            ),
            (
                TagClass::Price,
                re(r"[$€£¥]\s?\d+(?:,\d{3})*(?:\.\d{2})?|\b\d+(?:,\d{3})*(?:\.\d{2})?\s?(?:USD|EUR|GBP|dollars)\b"),
            ),
            (
                TagClass::Date,
                re(&format!(
                    r"(?i:\b{MONTH}\.?\s+\d{{1,2}}(?:st|nd|rd|th)?,?\s+\d{{4}}\b|\b\d{{1,2}}(?:st|nd|rd|th)?\s+{MONTH}\.?,?\s+\d{{4}}\b)|\b\d{{4}}-\d{{2}}-\d{{2}}\b|\b\d{{1,2}}[/.-]\d{{1,2}}[/.-](?:\d{{4}}|\d{{2}})\b"
                )),
            ),
            (
                TagClass::MailAddress,
                re(&format!(
                    r"\b\d{{1,6}}\s+(?:[A-Z][A-Za-z]*\.?\s+){{1,4}}{STREET_SUFFIX}\b\.?(?:,?\s+(?:Suite|Ste|Apt|Unit)\.?\s*[A-Za-z0-9-]+)?(?:,\s+[A-Z][A-Za-z]+(?:\s+[A-Z][A-Za-z]+)*,?\s+[A-Z]{{2}}\s+\d{{5}}(?:-\d{{4}})?)?|\bP\.?\s?O\.?\s+Box\s+\d+(?:,\s+[A-Z][A-Za-z]+(?:\s+[A-Z][A-Za-z]+)*,?\s+[A-Z]{{2}}\s+\d{{5}}(?:-\d{{4}})?)?"
                )),
            ),
        ];
        let load = |s: &str| -> HashSet<String> {
            s.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect()
        };
        Rules {
            patterns,
            word: re(r"[A-Za-z][A-Za-z'-]*\.?"),
            given: load(include_str!("../../data/given_names.txt")),
            family: load(include_str!("../../data/family_names.txt")),
        }
    })
}

const TITLES: &[&str] = &["mr", "mrs", "ms", "miss", "dr", "prof"];
const NOT_NAMES: &[&str] = &[
    "the", "street", "st", "avenue", "ave", "road", "rd", "inc", "llc", "corp", "total", "date",
    "invoice", "bank", "court", "county", "city", "state", "department",
];

fn is_capitalized(w: &str) -> bool {
    let mut cs = w.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_uppercase()) && w.len() > 1
}

fn bare(w: &str) -> String {
    w.trim_end_matches('.').to_lowercase()
}

/// Given-name or title followed by capitalized words, or a capitalized
/// word followed by a gazetteer family name.
fn person_names(text: &str, rules: &Rules, out: &mut Vec<(TagClass, Range<usize>)>) {
    let words: Vec<(Range<usize>, &str)> = rules
        .word
        .find_iter(text)
        .map(|m| (m.range(), m.as_str()))
        .collect();
    // Words must be separated by a single space to belong to one name.
    let adjacent = |a: usize, b: usize| words[a].0.end + 1 == words[b].0.start && text.as_bytes()[words[a].0.end] == b' ';
    let is_initial = |w: &str| w.len() == 2 && w.ends_with('.') && w.as_bytes()[0].is_ascii_uppercase();
    let name_word = |w: &str| is_capitalized(w) && !w.ends_with('.') && !NOT_NAMES.contains(&bare(w).as_str());

    let mut i = 0;
    while i < words.len() {
        let (range, w) = &words[i];
        let lw = bare(w);
        let title = TITLES.contains(&lw.as_str()) && is_capitalized(w);
        let given = name_word(w) && rules.given.contains(&lw);
        let lead = name_word(w)
            && i + 1 < words.len()
            && adjacent(i, i + 1)
            && rules.family.contains(&bare(words[i + 1].1))
            && name_word(words[i + 1].1);
        if !(title || given || lead) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < words.len() && j - i < 3 && adjacent(j, j + 1) {
            let next = words[j + 1].1;
            if name_word(next) || (is_initial(next) && j + 2 < words.len()) {
                j += 1;
            } else {
                break;
            }
        }
        // Trailing initials are not part of a name.
        while j > i && is_initial(words[j].1) {
            j -= 1;
        }
        if j > i {
            out.push((TagClass::PersonName, range.start..words[j].0.end));
            i = j + 1;
        } else {
            i += 1;
        }
    }
}

fn byte_to_char_offsets(text: &str) -> Vec<usize> {
    let mut map = vec![0; text.len() + 1];
    let mut ci = 0;
    for (bi, c) in text.char_indices() {
        for k in 0..c.len_utf8() {
            map[bi + k] = ci;
        }
        ci += 1;
    }
    map[text.len()] = ci;
    map
}

/// Tags maximal phrases of each class; spans of different classes may
/// overlap. Output is sorted by `(start, end, class)`.
pub fn weak_tag(text: &str) -> Vec<TagSpan> {
    let rules = rules();
    let mut found: Vec<(TagClass, Range<usize>)> = Vec::new();
    for (class, re) in &rules.patterns {
        for m in re.find_iter(text) {
            let r = m.range();
            // Phone numbers must not be glued to surrounding digits.
            let prev = text[..r.start].chars().next_back();
            let next = text[r.end..].chars().next();
            if matches!(class, TagClass::Phone)
                && (prev.is_some_and(|c| c.is_ascii_alphanumeric()) || next.is_some_and(|c| c.is_ascii_digit()))
            {
                continue;
            }
            found.push((*class, r));
        }
    }
    person_names(text, rules, &mut found);

    let map = byte_to_char_offsets(text);
    let mut spans: Vec<TagSpan> = found
        .into_iter()
        .map(|(class, r)| TagSpan {
            class,
            start: map[r.start],
            end: map[r.end],
        })
        .collect();
    spans.sort_by_key(|s| (s.start, s.end, s.class));
    spans.dedup();
    spans
}

/// A token receives class `c` iff its character range intersects a span
/// of class `c`.
pub fn project_tags(spans: &[TagSpan], token_ranges: &[Range<usize>]) -> Vec<TokenTags> {
    token_ranges
        .iter()
        .map(|r| {
            let mut tags = [0u8; NUM_TAG_CLASSES];
            for s in spans {
                if r.start < r.end && r.start < s.end && s.start < r.end {
                    tags[s.class.index()] = 1;
                }
            }
            tags
        })
        .collect()
}

//! Question skeleton extraction by masking schema-related tokens.
//!
//! A skeleton keeps the structure and intent of a question while hiding the
//! parts that are specific to one database. The masking rule:
//!
//! - every maximal word n-gram (n <= 4, words separated only by whitespace)
//!   that matches a table name, column name, or sampled cell value is
//!   replaced by `[MASK]`;
//! - matching is case-insensitive and tolerates simple plurals on either
//!   side (a trailing `s` or `es` may be dropped from any word);
//! - quoted string literals and standalone numbers are always replaced;
//! - adjacent placeholders separated only by whitespace collapse to one;
//! - everything else is preserved verbatim, so stripping the placeholders
//!   leaves a subsequence of the original tokens.
//!
//! `[MASK]` is atomic: re-running the extractor over its own output changes
//! nothing.

use serde::{Deserialize, Serialize};

use crate::schema::DatabaseSchema;

/// The placeholder token substituted for schema-related spans.
pub const MASK_TOKEN: &str = "[MASK]";

const MAX_NGRAM: usize = 4;

/// Which question a skeleton was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkeletonOrigin {
    Original,
    Simplified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionSkeleton {
    pub text: String,
    pub mask_count: usize,
    pub origin: SkeletonOrigin,
}

/// Controls which vocabulary enters the mask set.
#[derive(Debug, Clone, Copy)]
pub struct SkeletonOptions {
    /// Mask sampled cell values in addition to table and column names.
    pub mask_cell_values: bool,
}

impl Default for SkeletonOptions {
    fn default() -> Self {
        SkeletonOptions {
            mask_cell_values: true,
        }
    }
}

/// One lexed piece of a question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Seg {
    /// Alphanumeric/underscore run containing at least one non-digit.
    Word(String),
    /// Pure digit run, optionally with one interior decimal point.
    Number(String),
    /// A quoted string literal, quotes included.
    Quoted(String),
    /// A literal `[MASK]` already present in the input.
    Placeholder,
    /// Whitespace and punctuation, preserved verbatim.
    Other(String),
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits text into words, numbers, quoted literals, placeholders, and
/// everything else. A single or double quote opens a literal only at the
/// start of text or after whitespace, so apostrophes inside and after words
/// stay ordinary punctuation.
pub(crate) fn lex(text: &str) -> Vec<Seg> {
    let chars: Vec<char> = text.chars().collect();
    let mut segs = Vec::new();
    let mut other = String::new();
    let mut i = 0;

    while i < chars.len() {
        let c = chars[i];

        if text[char_offset(&chars, i)..].starts_with(MASK_TOKEN) {
            flush_other(&mut segs, &mut other);
            segs.push(Seg::Placeholder);
            i += MASK_TOKEN.chars().count();
            continue;
        }

        if is_word_char(c) {
            flush_other(&mut segs, &mut other);
            let mut word = String::new();
            let mut all_digits = true;
            while i < chars.len() && is_word_char(chars[i]) {
                all_digits &= chars[i].is_ascii_digit();
                word.push(chars[i]);
                i += 1;
            }
            // Merge a decimal point flanked by digits into one number.
            if all_digits
                && i + 1 < chars.len()
                && chars[i] == '.'
                && chars[i + 1].is_ascii_digit()
            {
                word.push('.');
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    word.push(chars[i]);
                    i += 1;
                }
                segs.push(Seg::Number(word));
            } else if all_digits {
                segs.push(Seg::Number(word));
            } else {
                segs.push(Seg::Word(word));
            }
            continue;
        }

        if (c == '\'' || c == '"') && at_quote_opening(&chars, i) {
            if let Some(close) = chars[i + 1..].iter().position(|&x| x == c) {
                flush_other(&mut segs, &mut other);
                let span: String = chars[i..=i + 1 + close].iter().collect();
                segs.push(Seg::Quoted(span));
                i += close + 2;
                continue;
            }
        }

        other.push(c);
        i += 1;
    }
    flush_other(&mut segs, &mut other);
    segs
}

fn char_offset(chars: &[char], idx: usize) -> usize {
    chars[..idx].iter().map(|c| c.len_utf8()).sum()
}

fn at_quote_opening(chars: &[char], i: usize) -> bool {
    i == 0 || chars[i - 1].is_whitespace()
}

fn flush_other(segs: &mut Vec<Seg>, other: &mut String) {
    if !other.is_empty() {
        segs.push(Seg::Other(std::mem::take(other)));
    }
}

/// Lowercase forms of a word with simple plural endings stripped.
fn word_variants(word: &str) -> Vec<String> {
    let lower = word.to_lowercase();
    let mut variants = vec![lower.clone()];
    if lower.len() > 1 {
        if let Some(stripped) = lower.strip_suffix('s') {
            variants.push(stripped.to_string());
        }
    }
    if lower.len() > 2 {
        if let Some(stripped) = lower.strip_suffix("es") {
            variants.push(stripped.to_string());
        }
    }
    variants.dedup();
    variants
}

/// The normalized mask vocabulary of a schema, keyed by word count.
///
/// Every entry and each of its plural-stripped per-word variants is
/// inserted, so lookups only need to expand the question side.
pub(crate) struct MaskVocabulary {
    by_len: Vec<std::collections::HashSet<String>>,
}

impl MaskVocabulary {
    pub(crate) fn from_schema(schema: &DatabaseSchema, opts: SkeletonOptions) -> Self {
        let mut raw: Vec<&str> = Vec::new();
        for table in &schema.tables {
            raw.push(&table.name);
            for column in &table.columns {
                raw.push(&column.name);
                if opts.mask_cell_values {
                    for value in &column.sample_values {
                        raw.push(value);
                    }
                }
            }
        }

        let mut by_len: Vec<std::collections::HashSet<String>> =
            vec![std::collections::HashSet::new(); MAX_NGRAM + 1];
        for entry in raw {
            let words = entry_words(entry);
            if words.is_empty() || words.len() > MAX_NGRAM {
                continue;
            }
            let variant_sets: Vec<Vec<String>> =
                words.iter().map(|w| word_variants(w)).collect();
            let mut combos = vec![String::new()];
            for set in &variant_sets {
                let mut next = Vec::with_capacity(combos.len() * set.len());
                for prefix in &combos {
                    for v in set {
                        if prefix.is_empty() {
                            next.push(v.clone());
                        } else {
                            next.push(format!("{prefix} {v}"));
                        }
                    }
                }
                combos = next;
            }
            let bucket = &mut by_len[words.len()];
            for combo in combos {
                bucket.insert(combo);
            }
        }
        MaskVocabulary { by_len }
    }

    fn matches(&self, words: &[&str]) -> bool {
        let n = words.len();
        if n == 0 || n > MAX_NGRAM || self.by_len[n].is_empty() {
            return false;
        }
        let variant_sets: Vec<Vec<String>> = words.iter().map(|w| word_variants(w)).collect();
        let mut combos = vec![String::new()];
        for set in &variant_sets {
            let mut next = Vec::with_capacity(combos.len() * set.len());
            for prefix in &combos {
                for v in set {
                    if prefix.is_empty() {
                        next.push(v.clone());
                    } else {
                        next.push(format!("{prefix} {v}"));
                    }
                }
            }
            combos = next;
        }
        combos.iter().any(|c| self.by_len[n].contains(c))
    }
}

/// Word tokens of a vocabulary entry: underscores become separators, then
/// the entry is lexed like question text.
fn entry_words(entry: &str) -> Vec<String> {
    let spaced = entry.replace('_', " ");
    lex(&spaced)
        .into_iter()
        .filter_map(|seg| match seg {
            Seg::Word(w) | Seg::Number(w) => Some(w),
            _ => None,
        })
        .collect()
}

/// Word n-grams (n <= 4) of a question over whitespace-contiguous tokens:
/// `(display span, lowercase form)` pairs in left-to-right order.
pub(crate) fn question_ngrams(text: &str) -> Vec<(String, String)> {
    let segs = lex(text);
    let mut ngrams = Vec::new();
    for start in 0..segs.len() {
        if !matches!(segs[start], Seg::Word(_) | Seg::Number(_)) {
            continue;
        }
        for n in 1..=MAX_NGRAM {
            if let Some((_, words)) = ngram_span(&segs, start, n) {
                let display = words.join(" ");
                let lower = display.to_lowercase();
                ngrams.push((display, lower));
            }
        }
    }
    ngrams
}

enum Emit {
    Mask,
    Text(String),
}

/// Masks schema-related tokens in `text` against `schema`'s vocabulary.
pub fn extract_skeleton(
    text: &str,
    schema: &DatabaseSchema,
    origin: SkeletonOrigin,
    opts: SkeletonOptions,
) -> QuestionSkeleton {
    let vocab = MaskVocabulary::from_schema(schema, opts);
    extract_with_vocabulary(text, &vocab, origin)
}

pub(crate) fn extract_with_vocabulary(
    text: &str,
    vocab: &MaskVocabulary,
    origin: SkeletonOrigin,
) -> QuestionSkeleton {
    let segs = lex(text);
    let mut out: Vec<Emit> = Vec::new();
    let mut i = 0;

    'outer: while i < segs.len() {
        match &segs[i] {
            Seg::Word(_) | Seg::Number(_) => {
                for n in (1..=MAX_NGRAM).rev() {
                    if let Some((end, words)) = ngram_span(&segs, i, n) {
                        let refs: Vec<&str> = words.iter().map(|s| s.as_str()).collect();
                        if vocab.matches(&refs) {
                            push_mask(&mut out);
                            i = end + 1;
                            continue 'outer;
                        }
                    }
                }
                match &segs[i] {
                    Seg::Number(_) => push_mask(&mut out),
                    Seg::Word(w) => out.push(Emit::Text(w.clone())),
                    _ => unreachable!(),
                }
                i += 1;
            }
            Seg::Quoted(_) | Seg::Placeholder => {
                push_mask(&mut out);
                i += 1;
            }
            Seg::Other(s) => {
                out.push(Emit::Text(s.clone()));
                i += 1;
            }
        }
    }

    let mut rendered = String::new();
    let mut mask_count = 0;
    for emit in &out {
        match emit {
            Emit::Mask => {
                rendered.push_str(MASK_TOKEN);
                mask_count += 1;
            }
            Emit::Text(t) => rendered.push_str(t),
        }
    }

    QuestionSkeleton {
        text: rendered,
        mask_count,
        origin,
    }
}

/// Words of the n-gram starting at segment `start`, if `n` word tokens
/// separated only by whitespace begin there. Returns the index of the last
/// word segment.
fn ngram_span(segs: &[Seg], start: usize, n: usize) -> Option<(usize, Vec<String>)> {
    let mut words = Vec::with_capacity(n);
    let mut idx = start;
    loop {
        match segs.get(idx)? {
            Seg::Word(w) | Seg::Number(w) => {
                words.push(w.clone());
                if words.len() == n {
                    return Some((idx, words));
                }
                idx += 1;
            }
            Seg::Other(s) if !words.is_empty() && s.chars().all(char::is_whitespace) => {
                idx += 1;
            }
            _ => return None,
        }
    }
}

/// Appends a mask, collapsing with a previous mask separated only by
/// whitespace.
fn push_mask(out: &mut Vec<Emit>) {
    let mut trailing_ws = 0;
    for emit in out.iter().rev() {
        match emit {
            Emit::Text(t) if t.chars().all(char::is_whitespace) => trailing_ws += 1,
            Emit::Mask => {
                let keep = out.len() - trailing_ws;
                out.truncate(keep);
                return;
            }
            _ => break,
        }
    }
    out.push(Emit::Mask);
}

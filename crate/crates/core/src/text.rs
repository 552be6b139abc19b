//! Text normalization, tokenization and stemming shared by lookup, suggestion
//! and the lints.

use crate::porter;

/// Words removed from a query before it is stemmed and matched against the
/// inverted index.
pub const STOP_WORDS: [&str; 13] = [
    "a", "an", "the", "of", "on", "in", "at", "to", "for", "with", "and", "or", "by",
];

pub fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.contains(&token)
}

/// Lowercase, collapse whitespace runs to a single space and trim.
///
/// ```
/// use cuiwb_core::text::normalize_term;
/// assert_eq!(normalize_term("  Severe   Asthma "), "severe asthma");
/// ```
pub fn normalize_term(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// A maximal run of alphanumeric characters, with offsets in Unicode scalar
/// values (end-exclusive).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

/// Split `text` into maximal alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, usize)> = None; // (byte start, char start)
    let mut chars = 0;
    for (byte, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if current.is_none() {
                current = Some((byte, chars));
            }
        } else if let Some((b0, c0)) = current.take() {
            tokens.push(Token {
                text: &text[b0..byte],
                start: c0,
                end: chars,
            });
        }
        chars += 1;
    }
    if let Some((b0, c0)) = current {
        tokens.push(Token {
            text: &text[b0..],
            start: c0,
            end: chars,
        });
    }
    tokens
}

/// Tokenize, lowercase, drop stop words and Porter-stem what is left.
///
/// ```
/// use cuiwb_core::text::stem_tokens;
/// assert_eq!(stem_tokens("exacerbation of asthma"), ["exacerb", "asthma"]);
/// ```
pub fn stem_tokens(raw: &str) -> Vec<String> {
    tokenize(raw)
        .into_iter()
        .filter_map(|t| {
            let lower: String = t.text.chars().flat_map(char::to_lowercase).collect();
            (!is_stop_word(&lower)).then(|| porter::stem(&lower))
        })
        .collect()
}

/// Length of `text` in Unicode scalar values.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Slice `text` by scalar-value offsets. Returns `None` when out of range.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(Some(text.len()));
    let b0 = indices.by_ref().nth(start)?;
    let b1 = if end == start {
        b0
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[b0..b1])
}

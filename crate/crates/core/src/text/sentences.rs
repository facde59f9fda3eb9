//! Rule-based sentence segmentation.
//!
//! A boundary is placed after a run of terminal punctuation (`.`, `!`, `?`,
//! `…`) plus any closing quotes/brackets, when it is followed by whitespace
//! and the next visible character is uppercase or an opening quote. A lone
//! `.` after a known abbreviation is not a boundary. Ellipses are consumed
//! as one terminal unit.

use serde::{Deserialize, Serialize};

use super::tokens::TokenCounter;
use super::{Document, TextError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    /// Byte offset of the first character.
    pub char_start: usize,
    /// Byte offset one past the last character.
    pub char_end: usize,
    pub token_count: usize,
}

impl Sentence {
    pub fn text<'a>(&self, doc: &'a Document) -> &'a str {
        &doc.text[self.char_start..self.char_end]
    }
}

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "vs", "etc", "e.g", "i.e", "cf", "al", "inc", "ltd",
    "co", "corp", "gen", "col", "lt", "sgt", "capt", "cmdr", "adm", "gov", "sen", "rep", "rev", "hon", "no", "vol",
    "fig", "approx", "dept", "est", "u.s", "u.k", "a.m", "p.m", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep",
    "sept", "oct", "nov", "dec",
];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | '”' | '’' | ')' | ']' | '»')
}

fn is_opening_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '“' | '‘' | '(' | '[' | '«')
}

/// True when the `.` at byte `dot` closes a known abbreviation.
fn ends_abbreviation(text: &str, dot: usize) -> bool {
    let word_start = text[..dot]
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace())
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let word = text[word_start..dot].trim_start_matches(|c: char| is_opening_quote(c));
    if word.is_empty() {
        return false;
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Byte offsets where sentences end (exclusive), not counting the final one.
fn boundaries(text: &str) -> Vec<usize> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut ends = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start_byte, c) = chars[i];
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminal(chars[j].1) {
            j += 1;
        }
        let lone_period = j - i == 1 && c == '.';
        while j < chars.len() && is_closing(chars[j].1) {
            j += 1;
        }
        let end_byte = chars.get(j).map(|&(b, _)| b).unwrap_or(text.len());
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let followed_by_space = k > j;
        let next_ok = chars
            .get(k)
            .map(|&(_, n)| n.is_uppercase() || is_opening_quote(n))
            .unwrap_or(false);
        if followed_by_space && next_ok && !(lone_period && ends_abbreviation(text, start_byte)) {
            ends.push(end_byte);
        }
        i = j.max(i + 1);
    }
    ends
}

/// Splits a document into sentences. Whitespace between sentences (and at
/// either end of the document) belongs to no sentence.
pub fn split_sentences(doc: &Document, counter: &dyn TokenCounter) -> Result<Vec<Sentence>, TextError> {
    let text = doc.text.as_str();
    if text.trim().is_empty() {
        return Err(TextError::EmptyDocument(doc.doc_id.clone()));
    }
    let mut sentences = Vec::new();
    let mut cursor = 0;
    let push = |from: usize, to: usize, sentences: &mut Vec<Sentence>| {
        let slice = &text[from..to];
        let lead = slice.len() - slice.trim_start().len();
        let trail = slice.len() - slice.trim_end().len();
        let (s, e) = (from + lead, to - trail);
        if s < e {
            sentences.push(Sentence {
                index: sentences.len(),
                char_start: s,
                char_end: e,
                token_count: counter.count(&text[s..e]),
            });
        }
    };
    for end in boundaries(text) {
        push(cursor, end, &mut sentences);
        cursor = end;
    }
    push(cursor, text.len(), &mut sentences);
    Ok(sentences)
}

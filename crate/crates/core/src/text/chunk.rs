use serde::{Deserialize, Serialize};

use super::sentences::Sentence;
use super::tokens::TokenCounter;
use super::{Document, TextError};

pub const DEFAULT_MAX_PASSAGE_TOKENS: usize = 100;

/// A contiguous, token-capped slice of a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    /// 0-based ordinal within the document.
    pub position: usize,
    pub doc_id: String,
    pub text: String,
    pub token_count: usize,
    /// Inclusive sentence indices. Pieces of one over-long sentence share it.
    pub sentence_span: (usize, usize),
    /// Byte range of `text` inside the document.
    pub byte_span: (usize, usize),
}

struct Builder<'a> {
    doc: &'a Document,
    counter: &'a dyn TokenCounter,
    passages: Vec<Passage>,
}

impl Builder<'_> {
    fn push(&mut self, start: usize, end: usize, span: (usize, usize)) {
        let text = self.doc.text[start..end].to_string();
        let token_count = self.counter.count(&text);
        self.passages.push(Passage {
            position: self.passages.len(),
            doc_id: self.doc.doc_id.clone(),
            text,
            token_count,
            sentence_span: span,
            byte_span: (start, end),
        });
    }

    /// Cuts one sentence into pieces of at most `cap` tokens, preferring cut
    /// points that fall on whitespace.
    fn hard_split(&mut self, sentence: &Sentence, cap: usize) {
        let base = sentence.char_start;
        let text = &self.doc.text[sentence.char_start..sentence.char_end];
        let spans = self.counter.token_spans(text);
        let span = (sentence.index, sentence.index);
        let mut first = 0;
        while first < spans.len() {
            let mut stop = (first + cap).min(spans.len());
            if stop < spans.len() {
                let on_space = (first + 1..=stop).rev().find(|&j| spans[j].start > spans[j - 1].end);
                if let Some(j) = on_space {
                    stop = j;
                }
            }
            self.push(base + spans[first].start, base + spans[stop - 1].end, span);
            first = stop;
        }
    }
}

/// Greedily packs whole sentences into passages of at most
/// `max_passage_tokens` tokens. A sentence that alone exceeds the cap is
/// split on token boundaries into several passages.
pub fn chunk_passages(
    doc: &Document,
    sentences: &[Sentence],
    max_passage_tokens: usize,
    counter: &dyn TokenCounter,
) -> Result<Vec<Passage>, TextError> {
    if max_passage_tokens == 0 {
        return Err(TextError::InvalidCap);
    }
    if sentences.is_empty() || doc.text.trim().is_empty() {
        return Err(TextError::EmptyDocument(doc.doc_id.clone()));
    }
    let mut builder = Builder {
        doc,
        counter,
        passages: Vec::new(),
    };
    // first sentence index and running token total of the open passage
    let mut open: Option<(usize, usize)> = None;
    let close = |builder: &mut Builder, first: usize, last: usize| {
        builder.push(sentences[first].char_start, sentences[last].char_end, (first, last));
    };

    for (i, sentence) in sentences.iter().enumerate() {
        if sentence.token_count > max_passage_tokens {
            if let Some((first, _)) = open.take() {
                close(&mut builder, first, i - 1);
            }
            builder.hard_split(sentence, max_passage_tokens);
            continue;
        }
        open = match open {
            Some((first, total)) if total + sentence.token_count <= max_passage_tokens => {
                Some((first, total + sentence.token_count))
            }
            Some((first, _)) => {
                close(&mut builder, first, i - 1);
                Some((i, sentence.token_count))
            }
            None => Some((i, sentence.token_count)),
        };
    }
    if let Some((first, _)) = open {
        close(&mut builder, first, sentences.len() - 1);
    }
    Ok(builder.passages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{normalize_whitespace, split_sentences, WhitespaceCounter, WordPieceApproxCounter};

    /// A document whose sentences have exactly the given whitespace-token counts.
    fn doc_with_sentence_sizes(sizes: &[usize]) -> Document {
        let text = sizes
            .iter()
            .map(|&n| {
                let mut words = vec!["w"; n];
                words[0] = "W";
                format!("{}.", words.join(" "))
            })
            .collect::<Vec<_>>()
            .join(" ");
        Document::synthetic("doc", text).unwrap()
    }

    fn counts(sizes: &[usize], cap: usize) -> Vec<usize> {
        let doc = doc_with_sentence_sizes(sizes);
        let sentences = split_sentences(&doc, &WhitespaceCounter).unwrap();
        assert_eq!(sentences.len(), sizes.len());
        chunk_passages(&doc, &sentences, cap, &WhitespaceCounter)
            .unwrap()
            .iter()
            .map(|p| p.token_count)
            .collect()
    }

    #[test]
    fn greedy_packing_examples() {
        assert_eq!(counts(&[40, 50, 30], 100), vec![90, 30]);
        assert_eq!(counts(&[40, 70, 30], 100), vec![40, 100]);
        assert_eq!(counts(&[250], 100), vec![100, 100, 50]);
    }

    #[test]
    fn oversize_sentence_closes_open_passage() {
        assert_eq!(counts(&[10, 150, 20], 100), vec![10, 100, 50, 20]);
    }

    #[test]
    fn zero_cap_is_rejected() {
        let doc = doc_with_sentence_sizes(&[3]);
        let sentences = split_sentences(&doc, &WhitespaceCounter).unwrap();
        assert_eq!(
            chunk_passages(&doc, &sentences, 0, &WhitespaceCounter),
            Err(TextError::InvalidCap)
        );
    }

    #[test]
    fn hard_split_prefers_whitespace_cuts() {
        // word-piece tokens: "abc" "," "defgh" "ij" -> a cut after 3 tokens
        // would land inside "defghij"; the splitter backs off to the space.
        let counter = WordPieceApproxCounter::new(5);
        let doc = Document::synthetic("d", "abc, defghij").unwrap();
        let sentences = split_sentences(&doc, &counter).unwrap();
        let passages = chunk_passages(&doc, &sentences, 3, &counter).unwrap();
        let texts: Vec<_> = passages.iter().map(|p| p.text.as_str()).collect();
        assert_eq!(texts, vec!["abc,", "defghij"]);
        assert!(passages.iter().all(|p| p.token_count <= 3));
    }

    #[test]
    fn positions_and_round_trip() {
        let doc = doc_with_sentence_sizes(&[5, 60, 30, 120, 7, 99]);
        let sentences = split_sentences(&doc, &WhitespaceCounter).unwrap();
        let passages = chunk_passages(&doc, &sentences, 100, &WhitespaceCounter).unwrap();
        for (i, p) in passages.iter().enumerate() {
            assert_eq!(p.position, i);
            assert_eq!(&doc.text[p.byte_span.0..p.byte_span.1], p.text);
        }
        let joined = passages.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join(" ");
        assert_eq!(normalize_whitespace(&joined), normalize_whitespace(&doc.text));
    }
}

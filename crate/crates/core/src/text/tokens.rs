//! Token counting.
//!
//! Counters report byte spans rather than just a number so that callers can
//! cut text on token boundaries (passage hard splits, summary truncation).

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use super::TextError;

/// Name of the counter used when nothing else is configured.
pub const DEFAULT_COUNTER: &str = "wordpiece-approx";
pub const WHITESPACE_COUNTER: &str = "whitespace";

pub trait TokenCounter: Send + Sync {
    fn name(&self) -> &str;

    /// Byte ranges of every token in `text`, in order.
    fn token_spans(&self, text: &str) -> Vec<Range<usize>>;

    fn count(&self, text: &str) -> usize {
        self.token_spans(text).len()
    }
}

/// One token per maximal run of non-whitespace characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceCounter;

impl TokenCounter for WhitespaceCounter {
    fn name(&self) -> &str {
        WHITESPACE_COUNTER
    }

    fn token_spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_whitespace(), start) {
                (true, Some(s)) => {
                    spans.push(s..i);
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push(s..text.len());
        }
        spans
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Approximates sub-word tokenizers: every punctuation/symbol character is a
/// token, and alphanumeric runs are cut into pieces of at most `piece_chars`
/// characters.
#[derive(Debug, Clone, Copy)]
pub struct WordPieceApproxCounter {
    piece_chars: usize,
}

impl WordPieceApproxCounter {
    pub fn new(piece_chars: usize) -> Self {
        assert!(piece_chars > 0, "piece_chars must be positive");
        Self { piece_chars }
    }
}

impl Default for WordPieceApproxCounter {
    fn default() -> Self {
        Self::new(8)
    }
}

impl TokenCounter for WordPieceApproxCounter {
    fn name(&self) -> &str {
        DEFAULT_COUNTER
    }

    fn token_spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        // (start byte, chars consumed so far in the current piece)
        let mut run: Option<(usize, usize)> = None;
        for (i, c) in text.char_indices() {
            if c.is_alphanumeric() {
                match run {
                    Some((s, n)) if n == self.piece_chars => {
                        spans.push(s..i);
                        run = Some((i, 1));
                    }
                    Some((s, n)) => run = Some((s, n + 1)),
                    None => run = Some((i, 1)),
                }
                continue;
            }
            if let Some((s, _)) = run.take() {
                spans.push(s..i);
            }
            if !c.is_whitespace() {
                spans.push(i..i + c.len_utf8());
            }
        }
        if let Some((s, _)) = run {
            spans.push(s..text.len());
        }
        spans
    }
}

/// Name-keyed set of counters. Starts with the whitespace and default counters.
#[derive(Clone)]
pub struct CounterRegistry {
    counters: BTreeMap<String, Arc<dyn TokenCounter>>,
}

impl Default for CounterRegistry {
    fn default() -> Self {
        let mut registry = Self {
            counters: BTreeMap::new(),
        };
        registry.register(Arc::new(WhitespaceCounter));
        registry.register(Arc::new(WordPieceApproxCounter::default()));
        registry
    }
}

impl CounterRegistry {
    pub fn register(&mut self, counter: Arc<dyn TokenCounter>) {
        self.counters.insert(counter.name().to_string(), counter);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn TokenCounter>, TextError> {
        self.counters
            .get(name)
            .cloned()
            .ok_or_else(|| TextError::UnknownCounter(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.counters.keys().map(String::as_str)
    }
}

/// Counts tokens of `text` with the registered counter called `counter`.
pub fn count_tokens(text: &str, counter: &str, registry: &CounterRegistry) -> Result<usize, TextError> {
    Ok(registry.get(counter)?.count(text))
}

/// Longest prefix of `text` holding at most `max_tokens` tokens, cut at the
/// end of the last kept token.
pub fn truncate_to_tokens<'a>(text: &'a str, counter: &dyn TokenCounter, max_tokens: usize) -> &'a str {
    let spans = counter.token_spans(text);
    if spans.len() <= max_tokens {
        return text;
    }
    if max_tokens == 0 {
        return "";
    }
    &text[..spans[max_tokens - 1].end]
}

/// Collapses whitespace runs to single spaces and trims both ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_has_no_tokens() {
        let registry = CounterRegistry::default();
        for name in [WHITESPACE_COUNTER, DEFAULT_COUNTER] {
            assert_eq!(count_tokens("", name, &registry).unwrap(), 0);
        }
    }

    #[test]
    fn whitespace_counter_examples() {
        let registry = CounterRegistry::default();
        assert_eq!(count_tokens("the cat sat", WHITESPACE_COUNTER, &registry).unwrap(), 3);
        assert_eq!(count_tokens("a b a b", WHITESPACE_COUNTER, &registry).unwrap(), 4);
        assert_eq!(WhitespaceCounter.token_spans("  ab  c "), vec![2..4, 6..7]);
    }

    #[test]
    fn unknown_counter_is_an_error() {
        let registry = CounterRegistry::default();
        assert!(matches!(
            count_tokens("x", "bpe-9000", &registry),
            Err(TextError::UnknownCounter(name)) if name == "bpe-9000"
        ));
    }

    #[test]
    fn wordpiece_splits_punctuation_and_long_runs() {
        let c = WordPieceApproxCounter::default();
        // "hello" "," "world" "!"
        assert_eq!(c.count("hello, world!"), 4);
        // 20 alphanumerics -> 8 + 8 + 4
        let spans = c.token_spans("abcdefghijklmnopqrst");
        assert_eq!(spans, vec![0..8, 8..16, 16..20]);
        assert_eq!(c.count("don't"), 3);
        assert_eq!(c.count("naïve café"), 2);
    }

    #[test]
    fn truncation_keeps_whole_tokens() {
        let c = WhitespaceCounter;
        assert_eq!(truncate_to_tokens("a bb ccc dddd", &c, 2), "a bb");
        assert_eq!(truncate_to_tokens("a bb", &c, 5), "a bb");
        assert_eq!(truncate_to_tokens("a bb", &c, 0), "");
    }

    #[test]
    fn normalize_collapses_runs() {
        assert_eq!(normalize_whitespace("  a\n\n b\tc  "), "a b c");
    }
}

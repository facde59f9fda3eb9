//! Page-and-gist reading: paginate at model-chosen breakpoints, compress
//! each page to a gist, then expand the pages the model asks to re-read.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BlockOrigin, BlockSource, ContextBlock, ContextBundle, PipelineError, Strategy};
use crate::gateway::prompts::{
    render_gist_prompt, render_lookup_prompt, render_pagination_prompt, render_strict_gist_prompt,
};
use crate::gateway::{parse_integers, LanguageModel, AUX_MAX_OUTPUT_TOKENS};
use crate::retrieval::{cosine_similarity, embed_batch, Embedder, TextRole};
use crate::text::{truncate_to_tokens, Document, Sentence, TokenCounter};

pub const PAGESET_SCHEMA: &str = "ragbench.pageset";
pub const PAGESET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PaginationConfig {
    pub window_sentences: usize,
    pub min_page_tokens: usize,
    pub max_page_tokens: usize,
}

impl Default for PaginationConfig {
    fn default() -> Self {
        Self {
            window_sentences: 20,
            min_page_tokens: 280,
            max_page_tokens: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LookupConfig {
    pub min_pages: usize,
    pub max_pages: usize,
    /// Reader context limit in tokens; larger contexts are refused.
    pub context_limit: Option<usize>,
}

impl Default for LookupConfig {
    fn default() -> Self {
        Self {
            min_pages: 1,
            max_pages: 6,
            context_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub page_id: usize,
    /// Inclusive sentence indices.
    pub sentence_span: (usize, usize),
    pub text: String,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gist {
    pub page_id: usize,
    pub gist_text: String,
    pub gist_token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSet {
    pub schema: String,
    pub schema_version: u32,
    pub doc_id: String,
    pub pages: Vec<Page>,
    #[serde(default)]
    pub gists: Vec<Gist>,
}

impl PageSet {
    /// Checks the sentence partition and (when gisted) the gist pairing.
    pub fn validate(&self, sentences: &[Sentence]) -> Result<(), String> {
        let mut next = 0;
        for (i, page) in self.pages.iter().enumerate() {
            if page.page_id != i {
                return Err(format!("page {i} has id {}", page.page_id));
            }
            let (first, last) = page.sentence_span;
            if first != next || last < first {
                return Err(format!("page {i} spans {first}..={last}, expected to start at {next}"));
            }
            next = last + 1;
        }
        if next != sentences.len() {
            return Err(format!("pages cover {next} of {} sentences", sentences.len()));
        }
        if !self.gists.is_empty() {
            if self.gists.len() != self.pages.len() {
                return Err(format!("{} gists for {} pages", self.gists.len(), self.pages.len()));
            }
            for (page, gist) in self.pages.iter().zip(&self.gists) {
                if gist.page_id != page.page_id {
                    return Err(format!("gist for page {} out of place", gist.page_id));
                }
                if page.token_count > 0 && gist.gist_token_count >= page.token_count {
                    return Err(format!("gist of page {} is not shorter than the page", page.page_id));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let set: Self = serde_json::from_slice(&fs::read(path)?)?;
        if set.schema != PAGESET_SCHEMA || set.schema_version != PAGESET_SCHEMA_VERSION {
            return Err(PipelineError::Artifact(format!(
                "{}: unsupported schema {} v{}",
                path.display(),
                set.schema,
                set.schema_version
            )));
        }
        Ok(set)
    }
}

fn lm_failure(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::LmFailure(e.to_string())
}

/// Splits the document into pages. Each step offers the model a window of
/// up to `window_sentences` sentences (and at most `max_page_tokens`
/// tokens) with labelled candidate breakpoints; an unusable answer falls
/// back to the middle candidate. A sentence larger than `max_page_tokens`
/// becomes a page of its own.
pub fn readagent_paginate(
    doc: &Document,
    sentences: &[Sentence],
    lm: &dyn LanguageModel,
    counter: &dyn TokenCounter,
    config: &PaginationConfig,
) -> Result<PageSet, PipelineError> {
    if config.window_sentences == 0 || config.max_page_tokens == 0 {
        return Err(PipelineError::InvalidConfig(
            "pagination window and page cap must be positive".into(),
        ));
    }
    if sentences.is_empty() {
        return Err(crate::text::TextError::EmptyDocument(doc.doc_id.clone()).into());
    }
    let n = sentences.len();
    let mut pages = Vec::new();
    let mut cursor = 0;
    while cursor < n {
        let mut end = cursor;
        let mut tokens = 0;
        while end < n
            && end - cursor < config.window_sentences
            && (end == cursor || tokens + sentences[end].token_count <= config.max_page_tokens)
        {
            tokens += sentences[end].token_count;
            end += 1;
        }

        let last = if end == n || end - cursor == 1 {
            end - 1
        } else {
            let mut running = 0;
            let mut candidates = Vec::new();
            for j in cursor..end {
                running += sentences[j].token_count;
                if running >= config.min_page_tokens || j == end - 1 {
                    candidates.push(j);
                }
            }
            if candidates.len() == 1 {
                candidates[0]
            } else {
                let labels: Vec<usize> = candidates.iter().map(|j| j - cursor + 1).collect();
                let texts: Vec<&str> = sentences[cursor..end].iter().map(|s| s.text(doc)).collect();
                let prompt = render_pagination_prompt(&texts, &labels);
                let answer = lm.generate(&prompt, AUX_MAX_OUTPUT_TOKENS).map_err(lm_failure)?;
                let chosen = parse_integers(&answer).into_iter().find(|l| labels.contains(l));
                match chosen {
                    Some(label) => cursor + label - 1,
                    None => {
                        log::debug!("unusable breakpoint answer {answer:?}; using midpoint");
                        candidates[candidates.len() / 2]
                    }
                }
            }
        };

        let text = doc.text[sentences[cursor].char_start..sentences[last].char_end].to_string();
        pages.push(Page {
            page_id: pages.len(),
            sentence_span: (cursor, last),
            token_count: counter.count(&text),
            text,
        });
        cursor = last + 1;
    }
    Ok(PageSet {
        schema: PAGESET_SCHEMA.into(),
        schema_version: PAGESET_SCHEMA_VERSION,
        doc_id: doc.doc_id.clone(),
        pages,
        gists: Vec::new(),
    })
}

fn gist_page(page: &Page, lm: &dyn LanguageModel, counter: &dyn TokenCounter) -> Result<Gist, PipelineError> {
    let fits = |text: &str| page.token_count == 0 || counter.count(text) < page.token_count;
    let mut gist = lm
        .generate(&render_gist_prompt(&page.text), AUX_MAX_OUTPUT_TOKENS)
        .map_err(lm_failure)?
        .trim()
        .to_string();
    if !fits(&gist) {
        let max_words = (page.token_count / 2).max(1);
        gist = lm
            .generate(&render_strict_gist_prompt(&page.text, max_words), AUX_MAX_OUTPUT_TOKENS)
            .map_err(lm_failure)?
            .trim()
            .to_string();
    }
    if !fits(&gist) {
        gist = truncate_to_tokens(&gist, counter, page.token_count.saturating_sub(1)).to_string();
    }
    Ok(Gist {
        page_id: page.page_id,
        gist_token_count: counter.count(&gist),
        gist_text: gist,
    })
}

/// Fills in one gist per page, each strictly shorter than its page: a
/// too-long gist is retried once with a stricter prompt, then truncated.
pub fn readagent_gist(
    mut pages: PageSet,
    lm: &dyn LanguageModel,
    counter: &dyn TokenCounter,
) -> Result<PageSet, PipelineError> {
    pages.gists = pages
        .pages
        .par_iter()
        .map(|page| gist_page(page, lm, counter))
        .collect::<Result<_, _>>()?;
    Ok(pages)
}

/// Page indices (0-based) the model asked for, deduplicated, in answer order.
fn parse_lookup(answer: &str, n_pages: usize, max_pages: usize) -> Vec<usize> {
    let tail = answer.rfind("Pages:").map_or(answer, |i| &answer[i..]);
    let mut picked = Vec::new();
    for k in parse_integers(tail) {
        if (1..=n_pages).contains(&k) && !picked.contains(&(k - 1)) {
            picked.push(k - 1);
        }
    }
    picked.truncate(max_pages);
    picked
}

/// Builds the reader context: every page in document order, the looked-up
/// ones verbatim and the rest as gists.
pub fn readagent_answer_context(
    query: &str,
    pageset: &PageSet,
    lm: &dyn LanguageModel,
    embedder: &dyn Embedder,
    config: &LookupConfig,
) -> Result<ContextBundle, PipelineError> {
    if pageset.pages.is_empty() {
        return Err(PipelineError::InvalidConfig("page set is empty".into()));
    }
    if pageset.gists.len() != pageset.pages.len() {
        return Err(PipelineError::InvalidConfig("page set has not been gisted".into()));
    }
    let max_pages = config.max_pages.max(config.min_pages).max(1);
    let gists: Vec<&str> = pageset.gists.iter().map(|g| g.gist_text.as_str()).collect();
    let prompt = render_lookup_prompt(&gists, query, config.min_pages.max(1), max_pages);
    let answer = lm.generate(&prompt, AUX_MAX_OUTPUT_TOKENS).map_err(lm_failure)?;
    let mut expanded = parse_lookup(&answer, pageset.pages.len(), max_pages);
    if expanded.is_empty() {
        log::debug!("unusable lookup answer {answer:?}; falling back to the most similar page");
        expanded.push(most_similar_page(query, pageset, embedder)?);
    }

    let blocks = pageset
        .pages
        .iter()
        .zip(&pageset.gists)
        .map(|(page, gist)| {
            if expanded.contains(&page.page_id) {
                ContextBlock {
                    text: page.text.clone(),
                    origin: BlockOrigin::OriginalPassage,
                    source: BlockSource::Page { page_id: page.page_id },
                    token_count: page.token_count,
                    score: None,
                }
            } else {
                ContextBlock {
                    text: gist.gist_text.clone(),
                    origin: BlockOrigin::Gist,
                    source: BlockSource::Page { page_id: page.page_id },
                    token_count: gist.gist_token_count,
                    score: None,
                }
            }
        })
        .collect();
    let bundle = ContextBundle::new(Strategy::ReadAgent, None, blocks);
    if let Some(limit) = config.context_limit {
        if bundle.total_tokens > limit {
            return Err(PipelineError::ContextOverflow {
                tokens: bundle.total_tokens,
                limit,
            });
        }
    }
    Ok(bundle)
}

fn most_similar_page(query: &str, pageset: &PageSet, embedder: &dyn Embedder) -> Result<usize, PipelineError> {
    let q = embed_batch(&[query], embedder, TextRole::Query)?.remove(0);
    let texts: Vec<&str> = pageset.pages.iter().map(|p| p.text.as_str()).collect();
    let vectors = embed_batch(&texts, embedder, TextRole::Document)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in vectors.iter().enumerate() {
        let s = cosine_similarity(&q, v)?;
        if s > best.0 {
            best = (s, i);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{FnModel, GatewayError};
    use crate::retrieval::HashedBagEmbedder;
    use crate::text::{normalize_whitespace, split_sentences, WhitespaceCounter};

    fn doc(n: usize) -> (Document, Vec<Sentence>) {
        let text = (0..n)
            .map(|i| format!("Sentence{i} talks about item{i} today."))
            .collect::<Vec<_>>()
            .join(" ");
        let doc = Document::synthetic("d", text).unwrap();
        let sentences = split_sentences(&doc, &WhitespaceCounter).unwrap();
        assert_eq!(sentences.len(), n);
        (doc, sentences)
    }

    type Scripted = FnModel<Box<dyn Fn(&str) -> Result<String, GatewayError> + Send + Sync>>;

    fn scripted(f: impl Fn(&str) -> String + Send + Sync + 'static) -> Scripted {
        FnModel(Box::new(move |p: &str| Ok(f(p))))
    }

    fn last_candidate() -> Scripted {
        scripted(|p| {
            let tail = &p[p.rfind("Candidate labels:").unwrap()..];
            format!("Break point: <{}>", parse_integers(tail).last().unwrap())
        })
    }

    fn small_pages() -> PaginationConfig {
        PaginationConfig {
            window_sentences: 4,
            min_page_tokens: 1,
            max_page_tokens: 1000,
        }
    }

    fn gisted(n: usize, window: usize) -> PageSet {
        let (doc, sentences) = doc(n);
        let config = PaginationConfig {
            window_sentences: window,
            ..small_pages()
        };
        let pages = readagent_paginate(&doc, &sentences, &last_candidate(), &WhitespaceCounter, &config).unwrap();
        let first_word = scripted(|p| {
            let page = p.split("[Start of Page]:").nth(1).unwrap();
            page.split_whitespace().next().unwrap().to_string()
        });
        readagent_gist(pages, &first_word, &WhitespaceCounter).unwrap()
    }

    #[test]
    fn last_candidate_gives_full_windows() {
        let (doc, sentences) = doc(10);
        let pages =
            readagent_paginate(&doc, &sentences, &last_candidate(), &WhitespaceCounter, &small_pages()).unwrap();
        let spans: Vec<_> = pages.pages.iter().map(|p| p.sentence_span).collect();
        assert_eq!(spans, vec![(0, 3), (4, 7), (8, 9)]);
        pages.validate(&sentences).unwrap();
        let joined = pages
            .pages
            .iter()
            .map(|p| p.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        assert_eq!(normalize_whitespace(&joined), normalize_whitespace(&doc.text));
    }

    #[test]
    fn out_of_range_breakpoint_uses_midpoint() {
        let (doc, sentences) = doc(8);
        let lm = scripted(|_| "Break point: <99>".into());
        let pages = readagent_paginate(&doc, &sentences, &lm, &WhitespaceCounter, &small_pages()).unwrap();
        // candidates after sentences 0..=3 are labels 1..=4; the midpoint is index 2
        assert_eq!(pages.pages[0].sentence_span, (0, 2));
        pages.validate(&sentences).unwrap();
    }

    #[test]
    fn min_tokens_limit_candidates_and_oversize_sentences_stand_alone() {
        let text = "Tiny one. Another small one here. This sentence is rather long and wordy indeed. End.";
        let doc = Document::synthetic("d", text).unwrap();
        let sentences = split_sentences(&doc, &WhitespaceCounter).unwrap();
        let config = PaginationConfig {
            window_sentences: 10,
            min_page_tokens: 3,
            max_page_tokens: 6,
        };
        let lm = scripted(|_| "nonsense".into());
        let pages = readagent_paginate(&doc, &sentences, &lm, &WhitespaceCounter, &config).unwrap();
        pages.validate(&sentences).unwrap();
        let spans: Vec<_> = pages.pages.iter().map(|p| p.sentence_span).collect();
        assert_eq!(spans, vec![(0, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn gists_are_shorter_and_paired() {
        let set = gisted(9, 4);
        assert_eq!(set.gists.len(), set.pages.len());
        assert!(set
            .pages
            .iter()
            .zip(&set.gists)
            .all(|(p, g)| g.gist_token_count < p.token_count));
        let (_, sentences) = doc(9);
        set.validate(&sentences).unwrap();
    }

    #[test]
    fn oversized_gist_is_retried_then_truncated() {
        let (doc, sentences) = doc(3);
        let pages =
            readagent_paginate(&doc, &sentences, &last_candidate(), &WhitespaceCounter, &small_pages()).unwrap();
        assert_eq!(pages.pages.len(), 1);
        let calls = std::sync::Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let seen = calls.clone();
        let verbose = scripted(move |_| {
            seen.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            "blah ".repeat(100)
        });
        let set = readagent_gist(pages, &verbose, &WhitespaceCounter).unwrap();
        assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 2);
        assert_eq!(set.gists[0].gist_token_count, set.pages[0].token_count - 1);
    }

    #[test]
    fn one_page_document_has_one_gist() {
        let set = gisted(2, 20);
        assert_eq!(set.pages.len(), 1);
        assert_eq!(set.gists.len(), 1);
    }

    fn lookup(set: &PageSet, answer: &'static str) -> ContextBundle {
        let lm = scripted(move |_| answer.to_string());
        readagent_answer_context(
            "item5?",
            set,
            &lm,
            &HashedBagEmbedder::default(),
            &LookupConfig::default(),
        )
        .unwrap()
    }

    fn expanded(bundle: &ContextBundle) -> Vec<usize> {
        bundle
            .blocks
            .iter()
            .filter(|b| b.origin == BlockOrigin::OriginalPassage)
            .map(|b| match b.source {
                BlockSource::Page { page_id } => page_id,
                _ => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn lookup_expands_requested_pages_in_document_order() {
        let set = gisted(8, 2);
        assert_eq!(set.pages.len(), 4);
        let bundle = lookup(&set, "Pages: 3, 1");
        assert_eq!(expanded(&bundle), vec![0, 2]);
        let origins: Vec<_> = bundle.blocks.iter().map(|b| b.origin).collect();
        assert_eq!(
            origins,
            vec![
                BlockOrigin::OriginalPassage,
                BlockOrigin::Gist,
                BlockOrigin::OriginalPassage,
                BlockOrigin::Gist
            ]
        );
    }

    #[test]
    fn lookup_is_clamped_to_six() {
        let set = gisted(16, 2);
        assert_eq!(set.pages.len(), 8);
        assert_eq!(expanded(&lookup(&set, "Pages: 1,2,3,4,5,6,7")), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn garbage_lookup_falls_back_to_one_page() {
        let set = gisted(8, 2);
        let bundle = lookup(&set, "I cannot decide.");
        // page 2 holds sentences 4..=5, the only text mentioning item5
        assert_eq!(expanded(&bundle), vec![2]);
    }

    #[test]
    fn overflow_is_reported() {
        let set = gisted(8, 2);
        let lm = scripted(|_| "Pages: 1".into());
        let config = LookupConfig {
            context_limit: Some(3),
            ..Default::default()
        };
        let err = readagent_answer_context("q", &set, &lm, &HashedBagEmbedder::default(), &config).unwrap_err();
        assert!(matches!(err, PipelineError::ContextOverflow { limit: 3, .. }));
    }
}

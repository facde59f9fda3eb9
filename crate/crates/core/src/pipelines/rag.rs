//! Single-pass retrieve-then-read context builders.

use super::{BlockOrigin, BlockSource, ContextBlock, ContextBundle, PipelineError, Strategy};
use crate::retrieval::{rank_passages, select_with_mode, Embedder, PassageIndex, RankedPassage, SelectionMode};
use crate::text::{Document, TextError, TokenCounter};

/// Every passage of the index ranked against `query`.
pub fn rank_for_query(
    query: &str,
    index: &PassageIndex,
    embedder: &dyn Embedder,
) -> Result<Vec<RankedPassage>, PipelineError> {
    let query_vec = index.embed_query(query, embedder)?;
    Ok(rank_passages(&query_vec, index)?)
}

fn block(r: &RankedPassage) -> ContextBlock {
    ContextBlock {
        text: r.passage.text.clone(),
        origin: BlockOrigin::OriginalPassage,
        source: BlockSource::Passage {
            position: r.passage.position,
        },
        token_count: r.passage.token_count,
        score: Some(r.score),
    }
}

/// Budget-selected passages in similarity order.
pub fn vanilla_from_ranked(ranked: &[RankedPassage], budget: usize, mode: SelectionMode) -> ContextBundle {
    let selected = select_with_mode(ranked, budget, mode);
    ContextBundle::new(Strategy::Vanilla, Some(budget), selected.iter().map(block).collect())
}

/// The same passages as [`vanilla_from_ranked`], in document order.
pub fn dos_from_ranked(ranked: &[RankedPassage], budget: usize, mode: SelectionMode) -> ContextBundle {
    let mut selected = select_with_mode(ranked, budget, mode);
    selected.sort_by_key(|r| r.passage.position);
    ContextBundle::new(Strategy::Dos, Some(budget), selected.iter().map(block).collect())
}

pub fn vanilla_rag_context(
    query: &str,
    index: &PassageIndex,
    embedder: &dyn Embedder,
    budget: usize,
) -> Result<ContextBundle, PipelineError> {
    check_budget(budget)?;
    let ranked = rank_for_query(query, index, embedder)?;
    Ok(vanilla_from_ranked(&ranked, budget, SelectionMode::PrefixStop))
}

pub fn dos_rag_context(
    query: &str,
    index: &PassageIndex,
    embedder: &dyn Embedder,
    budget: usize,
) -> Result<ContextBundle, PipelineError> {
    check_budget(budget)?;
    let ranked = rank_for_query(query, index, embedder)?;
    Ok(dos_from_ranked(&ranked, budget, SelectionMode::PrefixStop))
}

/// The whole document as one block, with no budget.
pub fn full_document_context(doc: &Document, counter: &dyn TokenCounter) -> Result<ContextBundle, PipelineError> {
    if doc.text.trim().is_empty() {
        return Err(TextError::EmptyDocument(doc.doc_id.clone()).into());
    }
    Ok(ContextBundle::new(
        Strategy::FullDoc,
        None,
        vec![ContextBlock {
            text: doc.text.clone(),
            origin: BlockOrigin::FullDocument,
            source: BlockSource::Document,
            token_count: counter.count(&doc.text),
            score: None,
        }],
    ))
}

pub(crate) fn check_budget(budget: usize) -> Result<(), PipelineError> {
    if budget == 0 {
        return Err(PipelineError::InvalidBudget);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::{EmbeddingVector, HashedBagEmbedder, IndexEntry};
    use crate::text::{Passage, SegmentedDocument, WhitespaceCounter};

    fn ranked(scores_by_position: &[(usize, f64)]) -> Vec<RankedPassage> {
        scores_by_position
            .iter()
            .enumerate()
            .map(|(rank, &(position, score))| RankedPassage {
                passage: Passage {
                    position,
                    doc_id: "d".into(),
                    text: format!("p{position}"),
                    token_count: 10,
                    sentence_span: (position, position),
                    byte_span: (0, 0),
                },
                score,
                rank,
            })
            .collect()
    }

    #[test]
    fn vanilla_keeps_similarity_order_dos_sorts_by_position() {
        let r = ranked(&[(5, 0.9), (2, 0.8), (9, 0.7)]);
        let v = vanilla_from_ranked(&r, 1000, SelectionMode::PrefixStop);
        let d = dos_from_ranked(&r, 1000, SelectionMode::PrefixStop);
        assert_eq!(v.passage_positions(), vec![5, 2, 9]);
        assert_eq!(d.passage_positions(), vec![2, 5, 9]);
        assert_eq!(v.total_tokens, 30);
        assert_eq!(d.total_tokens, 30);
    }

    #[test]
    fn budget_below_smallest_passage_is_empty() {
        let r = ranked(&[(0, 0.5), (1, 0.4)]);
        let v = vanilla_from_ranked(&r, 5, SelectionMode::PrefixStop);
        assert!(v.blocks.is_empty());
        assert_eq!(v.total_tokens, 0);
        assert_eq!(v.budget, Some(5));
    }

    #[test]
    fn unbounded_dos_is_whole_document_in_order() {
        let doc = Document::synthetic("d", "Alpha one. Beta two. Gamma three. Delta four.").unwrap();
        let seg = SegmentedDocument::build(doc.clone(), &WhitespaceCounter, 3).unwrap();
        let e = HashedBagEmbedder::default();
        let index = PassageIndex::build("d", &seg.passages, &e).unwrap();
        let bundle = dos_rag_context("gamma", &index, &e, usize::MAX / 2).unwrap();
        assert_eq!(bundle.passage_positions(), (0..seg.passages.len()).collect::<Vec<_>>());
        assert_eq!(crate::text::normalize_whitespace(&bundle.render()), doc.text);

        // a one-sentence doc: full-document and unbounded DOS agree
        let one = Document::synthetic("o", "Just one sentence here.").unwrap();
        let seg = SegmentedDocument::build(one.clone(), &WhitespaceCounter, 100).unwrap();
        let index = PassageIndex::build("o", &seg.passages, &e).unwrap();
        let dos = dos_rag_context("x", &index, &e, 1000).unwrap();
        let full = full_document_context(&one, &WhitespaceCounter).unwrap();
        assert_eq!(dos.render(), full.render());
        assert_eq!(dos.total_tokens, full.total_tokens);
        assert_eq!(full.budget, None);
    }

    #[test]
    fn wrong_embedder_is_rejected() {
        let entries = vec![IndexEntry {
            passage: ranked(&[(0, 0.0)]).remove(0).passage,
            embedding: EmbeddingVector::normalized(vec![1.0; 256]).unwrap(),
        }];
        let index = PassageIndex::from_entries("d", "other-embedder", entries).unwrap();
        let e = HashedBagEmbedder::default();
        assert!(matches!(
            vanilla_rag_context("q", &index, &e, 100),
            Err(PipelineError::Retrieval(_))
        ));
    }
}

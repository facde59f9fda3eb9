//! Context-construction strategies. Every strategy turns a query plus
//! preprocessed document artifacts into a [`ContextBundle`].

mod bundle;
pub mod kmeans;
mod rag;
pub mod raptor;
pub mod readagent;

use thiserror::Error;

use crate::gateway::GatewayError;
use crate::retrieval::RetrievalError;
use crate::text::TextError;

pub use bundle::{BlockOrigin, BlockSource, ContextBlock, ContextBundle, Strategy};
pub use rag::{
    dos_from_ranked, dos_rag_context, full_document_context, rank_for_query, vanilla_from_ranked, vanilla_rag_context,
};
pub use raptor::{
    embed_tree_query, rank_tree_nodes, raptor_build_tree, raptor_from_ranked, raptor_retrieve, RankedNode,
    RaptorConfig, SummaryTree, TreeNode,
};
pub use readagent::{
    readagent_answer_context, readagent_gist, readagent_paginate, Gist, LookupConfig, Page, PageSet, PaginationConfig,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("token budget must be positive")]
    InvalidBudget,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("summarizer failed: {0}")]
    SummarizerFailure(String),
    #[error("language model failed: {0}")]
    LmFailure(String),
    #[error("summary tree has no nodes")]
    EmptyTree,
    #[error("context of {tokens} tokens exceeds the reader limit of {limit}")]
    ContextOverflow { tokens: usize, limit: usize },
    #[error("artifact: {0}")]
    Artifact(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Serde(#[from] serde_json::Error),
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Vanilla,
    Dos,
    FullDoc,
    Raptor,
    #[serde(rename = "readagent")]
    ReadAgent,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Vanilla,
        Strategy::Dos,
        Strategy::FullDoc,
        Strategy::Raptor,
        Strategy::ReadAgent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Vanilla => "vanilla",
            Self::Dos => "dos",
            Self::FullDoc => "full_doc",
            Self::Raptor => "raptor",
            Self::ReadAgent => "readagent",
        }
    }

    /// Strategies whose context is capped by a retrieval budget.
    pub fn is_budgeted(self) -> bool {
        matches!(self, Self::Vanilla | Self::Dos | Self::Raptor)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockOrigin {
    OriginalPassage,
    SummaryNode,
    Gist,
    FullDocument,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockSource {
    Passage { position: usize },
    Node { node_id: usize, level: usize },
    Page { page_id: usize },
    Document,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub text: String,
    pub origin: BlockOrigin,
    pub source: BlockSource,
    pub token_count: usize,
    /// Similarity to the query, for retrieved blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Ordered text blocks handed to the reader, with token accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub blocks: Vec<ContextBlock>,
    pub total_tokens: usize,
    pub strategy: Strategy,
    pub budget: Option<usize>,
}

pub const BLOCK_SEPARATOR: &str = "\n\n";

impl ContextBundle {
    pub fn new(strategy: Strategy, budget: Option<usize>, blocks: Vec<ContextBlock>) -> Self {
        let total_tokens = blocks.iter().map(|b| b.token_count).sum();
        Self {
            blocks,
            total_tokens,
            strategy,
            budget,
        }
    }

    pub fn empty(strategy: Strategy, budget: Option<usize>) -> Self {
        Self::new(strategy, budget, Vec::new())
    }

    /// Block texts joined by a blank line.
    pub fn render(&self) -> String {
        self.blocks
            .iter()
            .map(|b| b.text.as_str())
            .collect::<Vec<_>>()
            .join(BLOCK_SEPARATOR)
    }

    /// Positions of original passages, in block order.
    pub fn passage_positions(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter_map(|b| match b.source {
                BlockSource::Passage { position } => Some(position),
                _ => None,
            })
            .collect()
    }

    pub fn tokens_by_origin(&self, origin: BlockOrigin) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.origin == origin)
            .map(|b| b.token_count)
            .sum()
    }
}

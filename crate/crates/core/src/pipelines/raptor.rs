//! Recursive cluster-and-summarize tree with collapsed-tree retrieval.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans;
use super::{BlockOrigin, BlockSource, ContextBlock, ContextBundle, PipelineError, Strategy};
use crate::gateway::prompts::render_summary_prompt;
use crate::gateway::LanguageModel;
use crate::retrieval::{
    cosine_similarity, embed_batch, select_with_mode, Embedder, EmbeddingVector, PassageIndex, RetrievalError,
    SelectionMode, TextRole, TokenWeighted,
};
use crate::text::{truncate_to_tokens, TokenCounter};

pub const TREE_SCHEMA: &str = "ragbench.summary_tree";
pub const TREE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RaptorConfig {
    pub max_cluster_size: usize,
    /// Building stops once a level has at most this many nodes.
    pub root_limit: usize,
    pub summary_max_tokens: usize,
    pub seed: u64,
    pub kmeans_iterations: usize,
    /// Concurrent summarization calls per level.
    pub max_in_flight: usize,
}

impl Default for RaptorConfig {
    fn default() -> Self {
        Self {
            max_cluster_size: 5,
            root_limit: 5,
            summary_max_tokens: 150,
            seed: 0,
            kmeans_iterations: 25,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Unique within the tree. Leaves use their passage position.
    pub node_id: usize,
    pub level: usize,
    pub text: String,
    pub token_count: usize,
    pub embedding: EmbeddingVector,
    pub child_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTree {
    pub schema: String,
    pub schema_version: u32,
    pub doc_id: String,
    pub embedder_id: String,
    /// `levels[0]` are the leaves.
    pub levels: Vec<Vec<TreeNode>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedNode {
    pub node: TreeNode,
    pub score: f64,
    pub rank: usize,
}

impl TokenWeighted for RankedNode {
    fn token_count(&self) -> usize {
        self.node.token_count
    }
}

impl SummaryTree {
    /// A tree with no summary levels: one leaf per indexed passage.
    pub fn leaves_only(index: &PassageIndex) -> Self {
        let leaves = index
            .entries()
            .iter()
            .map(|e| TreeNode {
                node_id: e.passage.position,
                level: 0,
                text: e.passage.text.clone(),
                token_count: e.passage.token_count,
                embedding: e.embedding.clone(),
                child_ids: Vec::new(),
            })
            .collect();
        Self {
            schema: TREE_SCHEMA.into(),
            schema_version: TREE_SCHEMA_VERSION,
            doc_id: index.doc_id.clone(),
            embedder_id: index.embedder_id.clone(),
            levels: vec![leaves],
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.levels.iter().flatten()
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Checks the structural invariants against the index it was built from.
    pub fn validate(&self, index: &PassageIndex) -> Result<(), String> {
        let Some(leaves) = self.levels.first() else {
            return Err("tree has no levels".into());
        };
        if leaves.len() != index.len() {
            return Err(format!("{} leaves for {} passages", leaves.len(), index.len()));
        }
        for (leaf, entry) in leaves.iter().zip(index.entries()) {
            if leaf.text != entry.passage.text || leaf.node_id != entry.passage.position {
                return Err(format!(
                    "leaf {} differs from passage {}",
                    leaf.node_id, entry.passage.position
                ));
            }
        }
        let mut parents: BTreeMap<usize, usize> = BTreeMap::new();
        for (level, nodes) in self.levels.iter().enumerate() {
            if level > 0 {
                let below: BTreeMap<usize, ()> = self.levels[level - 1].iter().map(|n| (n.node_id, ())).collect();
                if nodes.len() >= self.levels[level - 1].len() {
                    return Err(format!("level {level} does not shrink"));
                }
                for node in nodes {
                    if node.child_ids.is_empty() {
                        return Err(format!("node {} has no children", node.node_id));
                    }
                    for child in &node.child_ids {
                        if !below.contains_key(child) {
                            return Err(format!(
                                "node {} has child {child} outside level {}",
                                node.node_id,
                                level - 1
                            ));
                        }
                        if parents.insert(*child, node.node_id).is_some() {
                            return Err(format!("node {child} has two parents"));
                        }
                    }
                }
                if parents.len() != self.levels[..level].iter().map(Vec::len).sum::<usize>() {
                    return Err(format!("some nodes of level {} have no parent", level - 1));
                }
            }
            if nodes.iter().any(|n| n.level != level) {
                return Err(format!("misplaced node in level {level}"));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let tree: Self = serde_json::from_slice(&fs::read(path)?)?;
        if tree.schema != TREE_SCHEMA || tree.schema_version != TREE_SCHEMA_VERSION {
            return Err(PipelineError::Artifact(format!(
                "{}: unsupported schema {} v{}",
                path.display(),
                tree.schema,
                tree.schema_version
            )));
        }
        Ok(tree)
    }
}

/// Groups of member indices, ordered by smallest member.
fn cluster_level(level: &[TreeNode], config: &RaptorConfig, level_no: usize) -> Vec<Vec<usize>> {
    let n = level.len();
    let group = config.max_cluster_size.max(1);
    let k = n.div_ceil(group).min(n - 1).max(1);
    let points: Vec<&[f32]> = level.iter().map(|node| node.embedding.values()).collect();
    let seed = config.seed.wrapping_add(level_no as u64);
    let assignment = kmeans(&points, k, seed, config.kmeans_iterations);
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in assignment.iter().enumerate() {
        groups.entry(c).or_default().push(i);
    }
    let mut clusters: Vec<Vec<usize>> = groups.into_values().collect();
    if clusters.len() >= n {
        // every node alone: merge contiguous runs instead
        log::warn!("clustering did not shrink level {level_no}; merging neighbours");
        let size = group.max(2);
        clusters = (0..n).collect::<Vec<_>>().chunks(size).map(<[usize]>::to_vec).collect();
    }
    clusters.sort_by_key(|c| c[0]);
    clusters
}

/// Builds a summary tree on top of an indexed document.
pub fn raptor_build_tree(
    index: &PassageIndex,
    embedder: &dyn Embedder,
    summarizer: &dyn LanguageModel,
    counter: &dyn TokenCounter,
    config: &RaptorConfig,
) -> Result<SummaryTree, PipelineError> {
    if config.root_limit == 0 {
        return Err(PipelineError::InvalidConfig("root_limit must be at least 1".into()));
    }
    if embedder.id() != index.embedder_id {
        return Err(RetrievalError::MixedEmbedders {
            index: index.embedder_id.clone(),
            query: embedder.id().to_string(),
        }
        .into());
    }
    let mut tree = SummaryTree::leaves_only(index);
    let mut next_id = tree.levels[0].iter().map(|n| n.node_id).max().map_or(0, |m| m + 1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.max_in_flight.max(1))
        .build()
        .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;

    while tree.levels.last().expect("leaves").len() > config.root_limit {
        let level_no = tree.levels.len();
        let current = tree.levels.last().expect("leaves");
        let clusters = cluster_level(current, config, level_no);

        let summaries: Vec<String> = pool.install(|| {
            clusters
                .par_iter()
                .map(|members| {
                    let texts: Vec<&str> = members.iter().map(|&i| current[i].text.as_str()).collect();
                    let prompt = render_summary_prompt(&texts, config.summary_max_tokens);
                    let raw = summarizer
                        .generate(&prompt, config.summary_max_tokens)
                        .map_err(|e| PipelineError::SummarizerFailure(e.to_string()))?;
                    let trimmed = raw.trim();
                    let text = if trimmed.is_empty() {
                        texts.join(" ")
                    } else {
                        trimmed.to_string()
                    };
                    Ok(truncate_to_tokens(&text, counter, config.summary_max_tokens).to_string())
                })
                .collect::<Result<_, PipelineError>>()
        })?;

        let refs: Vec<&str> = summaries.iter().map(String::as_str).collect();
        let embeddings = embed_batch(&refs, embedder, TextRole::Document)?;
        let level: Vec<TreeNode> = clusters
            .iter()
            .zip(summaries)
            .zip(embeddings)
            .map(|((members, text), embedding)| {
                let node = TreeNode {
                    node_id: next_id,
                    level: level_no,
                    token_count: counter.count(&text),
                    text,
                    embedding,
                    child_ids: members.iter().map(|&i| current[i].node_id).collect(),
                };
                next_id += 1;
                node
            })
            .collect();
        tree.levels.push(level);
    }
    Ok(tree)
}

/// All nodes of every level ranked jointly; equal scores keep lower levels
/// and lower ids first.
pub fn rank_tree_nodes(query: &EmbeddingVector, tree: &SummaryTree) -> Result<Vec<RankedNode>, PipelineError> {
    if tree.node_count() == 0 {
        return Err(PipelineError::EmptyTree);
    }
    let mut scored = tree
        .nodes()
        .map(|n| Ok((n, cosine_similarity(query, &n.embedding)?)))
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    scored.sort_by(|(a, sa), (b, sb)| {
        sb.total_cmp(sa)
            .then(a.level.cmp(&b.level))
            .then(a.node_id.cmp(&b.node_id))
    });
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(rank, (node, score))| RankedNode {
            node: node.clone(),
            score,
            rank,
        })
        .collect())
}

pub fn raptor_from_ranked(ranked: &[RankedNode], budget: usize, mode: SelectionMode) -> ContextBundle {
    let blocks = select_with_mode(ranked, budget, mode)
        .into_iter()
        .map(|r| {
            let (origin, source) = if r.node.level == 0 {
                (
                    BlockOrigin::OriginalPassage,
                    BlockSource::Passage {
                        position: r.node.node_id,
                    },
                )
            } else {
                (
                    BlockOrigin::SummaryNode,
                    BlockSource::Node {
                        node_id: r.node.node_id,
                        level: r.node.level,
                    },
                )
            };
            ContextBlock {
                text: r.node.text,
                origin,
                source,
                token_count: r.node.token_count,
                score: Some(r.score),
            }
        })
        .collect();
    ContextBundle::new(Strategy::Raptor, Some(budget), blocks)
}

pub fn embed_tree_query(
    query: &str,
    tree: &SummaryTree,
    embedder: &dyn Embedder,
) -> Result<EmbeddingVector, PipelineError> {
    if embedder.id() != tree.embedder_id {
        return Err(RetrievalError::MixedEmbedders {
            index: tree.embedder_id.clone(),
            query: embedder.id().to_string(),
        }
        .into());
    }
    Ok(embed_batch(&[query], embedder, TextRole::Query)?.remove(0))
}

/// Collapsed-tree retrieval: rank every node, keep the budget prefix.
pub fn raptor_retrieve(
    query: &str,
    tree: &SummaryTree,
    embedder: &dyn Embedder,
    budget: usize,
) -> Result<ContextBundle, PipelineError> {
    super::rag::check_budget(budget)?;
    let query_vec = embed_tree_query(query, tree, embedder)?;
    let ranked = rank_tree_nodes(&query_vec, tree)?;
    Ok(raptor_from_ranked(&ranked, budget, SelectionMode::PrefixStop))
}

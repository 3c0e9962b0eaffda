//! Robots as mean word vectors: similarity graph, cliques, clusters, and
//! distance-to-"person" affect standardization.

pub mod cluster;
pub mod graph;
pub mod human;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::StudyDataset;
use crate::embedding::{cosine_similarity, mean_vector, EmbeddingError, EmbeddingStore, Vector};
use crate::normalize::{token, NormalizationRules};
use crate::ErrorCode;

pub use cluster::{cluster, ClusterAssignment, Merge};
pub use graph::{enumerate_cliques, knn_graph, BodyGraph, Clique, SimilarityMatrix};
pub use human::{
    baseline_diagnostic, human_distance, mask_width, standardize_affect, BaselineIndex, MaskMode,
    Standardization, StandardizedAffect,
};

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("robot `{0}` has no word with an embedding vector")]
    NoEmbeddableWords(String),
    #[error("need more than {k} robots for a {k}-nearest-neighbour graph, have {n}")]
    TooFewNodes { n: usize, k: usize },
    #[error("cannot cut {n} robots into {n_clusters} clusters")]
    TooFewForClusters { n: usize, n_clusters: usize },
    #[error("clique size must be at least 2, got {0}")]
    CliqueSize(usize),
    #[error("target word `{0}` has no embedding vector")]
    TargetMissing(String),
    #[error("mask width needs at least two distinct distances")]
    DegenerateDistances,
    #[error("no lexicon word has an embedding vector")]
    EmptyBaseline,
    #[error("only {found} baseline words in window [{low:.6}, {high:.6}], need {min}")]
    SparseBaseline {
        found: usize,
        min: usize,
        low: f64,
        high: f64,
    },
    #[error("unknown mask mode `{0}` (expected gap or pairwise)")]
    UnknownMask(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

impl ErrorCode for SemanticsError {
    fn code(&self) -> &'static str {
        match self {
            SemanticsError::NoEmbeddableWords(_) => "semantics.no_embeddable_words",
            SemanticsError::TooFewNodes { .. } => "semantics.too_few_nodes",
            SemanticsError::TooFewForClusters { .. } => "semantics.too_few_for_clusters",
            SemanticsError::CliqueSize(_) => "semantics.clique_size",
            SemanticsError::TargetMissing(_) => "semantics.target_missing",
            SemanticsError::DegenerateDistances => "semantics.degenerate_distances",
            SemanticsError::EmptyBaseline => "semantics.empty_baseline",
            SemanticsError::SparseBaseline { .. } => "semantics.sparse_baseline",
            SemanticsError::UnknownMask(_) => "semantics.unknown_mask",
            SemanticsError::Embedding(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotVector {
    pub robot_id: String,
    pub vector: Vector,
    /// Word tokens that had a vector.
    pub word_count: usize,
}

/// Mean vector of every normalized word given for each robot, all
/// participants pooled. Robots without responses are skipped; output is in
/// manifest order.
pub fn robot_vectors(
    dataset: &StudyDataset,
    rules: &NormalizationRules,
    store: &EmbeddingStore,
) -> Result<Vec<RobotVector>, SemanticsError> {
    let mut words: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for a in dataset.associations() {
        words
            .entry(a.robot_id())
            .or_default()
            .extend(a.words().iter().filter_map(|w| token(w, rules)));
    }
    let mut out = Vec::new();
    for id in dataset.manifest().robot_ids() {
        let Some(tokens) = words.get(id) else { continue };
        match mean_vector(tokens, store) {
            Ok((vector, word_count)) if vector.norm() > 0.0 => out.push(RobotVector {
                robot_id: id.to_string(),
                vector,
                word_count,
            }),
            Ok(_) | Err(EmbeddingError::NoneFound(_)) | Err(EmbeddingError::EmptyInput) => {
                return Err(SemanticsError::NoEmbeddableWords(id.to_string()))
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Pairwise cosine similarities between robot vectors.
pub fn similarity_matrix(robots: &[RobotVector]) -> Result<SimilarityMatrix, SemanticsError> {
    let n = robots.len();
    let mut values = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = cosine_similarity(&robots[i].vector, &robots[j].vector)?;
            values[i][j] = s;
            values[j][i] = s;
        }
    }
    Ok(SimilarityMatrix::new(
        robots.iter().map(|r| r.robot_id.clone()).collect(),
        values,
    ))
}

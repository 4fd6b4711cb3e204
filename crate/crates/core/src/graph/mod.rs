//! Connectivity graphs, subjects and datasets.
//!
//! A [`BrainGraph`] is a dense symmetric weight matrix with zero diagonal on a
//! fixed node set. Structural graphs hold tractography probabilities in
//! `[0, 1]`; functional graphs hold correlations in `[-1, 1]`.

mod dataset;
mod folds;
mod synth;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;

pub use dataset::{
    load_dataset, save_dataset, Dataset, DatasetMeta, SubjectRecord, LABELS_FILE, META_FILE,
};
pub use folds::stratified_kfold;
pub use synth::{generate_synthetic, SynthParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Structural,
    Functional,
}

impl Modality {
    /// Inclusive weight range for off-diagonal entries.
    pub fn weight_range(self) -> (f64, f64) {
        match self {
            Modality::Structural => (0.0, 1.0),
            Modality::Functional => (-1.0, 1.0),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Structural => "structural",
            Modality::Functional => "functional",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ValidationIssue {
    NonFinite { i: usize, j: usize },
    NonzeroDiagonal { i: usize, value: f64 },
    Asymmetry { i: usize, j: usize },
    OutOfRange { i: usize, j: usize, value: f64 },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ValidationIssue::NonFinite { i, j } => write!(f, "non-finite entry at ({i},{j})"),
            ValidationIssue::NonzeroDiagonal { i, value } => {
                write!(f, "nonzero diagonal at ({i},{i}): {value}")
            }
            ValidationIssue::Asymmetry { i, j } => write!(f, "asymmetry at ({i},{j})/({j},{i})"),
            ValidationIssue::OutOfRange { i, j, value } => {
                write!(f, "out-of-range weight at ({i},{j}): {value}")
            }
        }
    }
}

/// Every invariant violation found in one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub modality: Modality,
    pub issues: Vec<ValidationIssue>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid {} graph: ", self.modality)?;
        for (k, issue) in self.issues.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("{0}")]
    Invalid(ValidationReport),
    #[error("weight matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("node index {node} out of range for {n_nodes} nodes")]
    NodeOutOfRange { node: usize, n_nodes: usize },
    #[error("labels file not found: {}", .0.display())]
    LabelsNotFound(PathBuf),
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("dimension mismatch for subject {id}: structural {structural}x{structural}, functional {functional}x{functional}")]
    DimensionMismatch {
        id: String,
        structural: usize,
        functional: usize,
    },
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("labels file inconsistent with subject files: {0}")]
    LabelMismatch(String),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error("class {class} has {count} members, fewer than k = {k}")]
    ClassTooSmall {
        class: usize,
        count: usize,
        k: usize,
    },
    #[error("invalid fold count {0}; need k >= 2")]
    InvalidFoldCount(usize),
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),
    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Weighted undirected connectivity on `n_nodes` regions.
#[derive(Clone, Debug, PartialEq)]
pub struct BrainGraph {
    weights: Matrix,
}

impl BrainGraph {
    /// Wraps a square weight matrix. Use [`validate`] for the modality checks.
    pub fn new(weights: Matrix) -> Result<Self, GraphError> {
        if !weights.is_square() {
            return Err(GraphError::NotSquare {
                rows: weights.rows(),
                cols: weights.cols(),
            });
        }
        Ok(Self { weights })
    }

    /// [`BrainGraph::new`] followed by [`validate`].
    pub fn validated(weights: Matrix, modality: Modality) -> Result<Self, GraphError> {
        let g = Self::new(weights)?;
        validate(&g, modality).map_err(GraphError::Invalid)?;
        Ok(g)
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Number of unordered pairs with a nonzero weight.
    pub fn n_edges(&self) -> usize {
        let n = self.n_nodes();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.weights[(i, j)] != 0.0)
            .count()
    }

    /// Relabels nodes: node `k` of the result is node `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            weights: self.weights.permute_symmetric(perm),
        }
    }
}

/// Checks every [`BrainGraph`] invariant for `modality` and reports all
/// violations at once.
pub fn validate(graph: &BrainGraph, modality: Modality) -> Result<(), ValidationReport> {
    let w = graph.weights();
    let n = graph.n_nodes();
    let (lo, hi) = modality.weight_range();
    let mut issues = Vec::new();
    let range_check = |i: usize, j: usize, v: f64, issues: &mut Vec<ValidationIssue>| {
        if v < lo || v > hi {
            issues.push(ValidationIssue::OutOfRange { i, j, value: v });
        }
    };
    for i in 0..n {
        let d = w[(i, i)];
        if !d.is_finite() {
            issues.push(ValidationIssue::NonFinite { i, j: i });
        } else if d != 0.0 {
            issues.push(ValidationIssue::NonzeroDiagonal { i, value: d });
        }
        for j in i + 1..n {
            let (a, b) = (w[(i, j)], w[(j, i)]);
            if !a.is_finite() || !b.is_finite() {
                if !a.is_finite() {
                    issues.push(ValidationIssue::NonFinite { i, j });
                }
                if !b.is_finite() {
                    issues.push(ValidationIssue::NonFinite { i: j, j: i });
                }
                continue;
            }
            range_check(i, j, a, &mut issues);
            if a != b {
                issues.push(ValidationIssue::Asymmetry { i, j });
                range_check(j, i, b, &mut issues);
            }
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(ValidationReport { modality, issues })
    }
}

/// Positive and negative parts of a functional graph.
#[derive(Clone, Debug, PartialEq)]
pub struct SignSplit {
    /// `max(x, 0)` entrywise.
    pub positive: Matrix,
    /// `max(-x, 0)` entrywise.
    pub negative: Matrix,
}

pub fn split_signs(functional: &BrainGraph) -> SignSplit {
    let w = functional.weights();
    SignSplit {
        positive: w.map(|v| if v > 0.0 { v } else { 0.0 }),
        negative: w.map(|v| if v < 0.0 { -v } else { 0.0 }),
    }
}

/// Indices `j` with a nonzero weight to `node`, ascending, followed by `node`
/// itself when `include_self` is set.
pub fn neighborhood(
    graph: &BrainGraph,
    node: usize,
    include_self: bool,
) -> Result<Vec<usize>, GraphError> {
    let n = graph.n_nodes();
    if node >= n {
        return Err(GraphError::NodeOutOfRange { node, n_nodes: n });
    }
    let mut out: Vec<usize> = (0..n)
        .filter(|&j| j != node && graph.weight(node, j) != 0.0)
        .collect();
    if include_self {
        out.push(node);
    }
    Ok(out)
}

//! Node saliency: per-subject scores from the classifier's channel weights
//! and group-level top-k voting.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape};
use crate::error::{Error, Result};
use crate::graph::SubjectRecord;
use crate::io;
use crate::layers::DmbnModel;

pub const DEFAULT_TOP_K: usize = 10;

/// `score_i = ⟨h_i, W_c⟩` for final node features `h` (N×F) and channel
/// weights `w` (C×F).
pub fn node_scores(features: &Matrix, w: &Matrix, class: usize) -> Result<Vec<f64>> {
    if class >= w.rows() {
        return Err(Error::Config(format!(
            "class {class} out of range for {} classes",
            w.rows()
        )));
    }
    if features.cols() != w.cols() {
        return Err(Error::Config(format!(
            "node features have {} channels, classifier expects {}",
            features.cols(),
            w.cols()
        )));
    }
    let wc = w.row(class);
    Ok((0..features.rows())
        .map(|i| features.row(i).iter().zip(wc).map(|(a, b)| a * b).sum())
        .collect())
}

/// Indices of the `k` largest scores, highest first; equal scores keep
/// ascending node order.
pub fn top_k_nodes(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub top_k: usize,
    /// One score vector per subject, in input order.
    pub subject_scores: Vec<Vec<f64>>,
    /// Votes per node.
    pub votes: Vec<usize>,
    /// Mean score per node across subjects.
    pub mean_score: Vec<f64>,
    /// Nodes with at least one vote: votes descending, then mean score
    /// descending, then index ascending.
    pub ranking: Vec<usize>,
}

impl SaliencyMap {
    pub fn n_nodes(&self) -> usize {
        self.votes.len()
    }

    /// The first `k` entries of the group ranking.
    pub fn top(&self, k: usize) -> &[usize] {
        &self.ranking[..k.min(self.ranking.len())]
    }

    /// `node_index,votes,mean_score`, one row per node in ranking order,
    /// followed by the unvoted nodes in index order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node_index,votes,mean_score\n");
        let unvoted = (0..self.n_nodes()).filter(|&i| self.votes[i] == 0);
        for i in self.ranking.iter().copied().chain(unvoted) {
            out.push_str(&format!(
                "{i},{},{}\n",
                self.votes[i],
                io::format_float(self.mean_score[i])
            ));
        }
        out
    }

    /// Writes `saliency.csv` and `saliency.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::create_dir(dir)?;
        io::write_text(&dir.join("saliency.csv"), &self.to_csv())?;
        io::write_json(&dir.join("saliency.json"), self)
    }
}

/// Top-k voting over per-subject score vectors.
pub fn group_saliency(scores: &[Vec<f64>], top_k: usize) -> Result<SaliencyMap> {
    let first = scores
        .first()
        .ok_or_else(|| Error::Config("saliency needs at least one subject".into()))?;
    let n = first.len();
    if scores.iter().any(|s| s.len() != n) {
        return Err(Error::Config("subjects have different node counts".into()));
    }
    if top_k > n {
        return Err(Error::Config(format!("top_k {top_k} exceeds {n} nodes")));
    }
    if scores.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config("saliency scores must be finite".into()));
    }
    let mut votes = vec![0usize; n];
    let mut mean_score = vec![0.0; n];
    for s in scores {
        for i in top_k_nodes(s, top_k) {
            votes[i] += 1;
        }
        for (m, v) in mean_score.iter_mut().zip(s) {
            *m += v;
        }
    }
    let count = scores.len() as f64;
    mean_score.iter_mut().for_each(|m| *m /= count);
    let mut ranking: Vec<usize> = (0..n).filter(|&i| votes[i] > 0).collect();
    ranking.sort_by(|&a, &b| {
        votes[b]
            .cmp(&votes[a])
            .then(
                mean_score[b]
                    .partial_cmp(&mean_score[a])
                    .unwrap_or(Ordering::Equal),
            )
            .then(a.cmp(&b))
    });
    Ok(SaliencyMap {
        top_k,
        subject_scores: scores.to_vec(),
        votes,
        mean_score,
        ranking,
    })
}

/// Predicted class and node scores for one subject under `model`.
pub fn subject_scores(model: &DmbnModel, subject: &SubjectRecord) -> Result<(usize, Vec<f64>)> {
    let inputs = model.inputs(&subject.structural)?;
    let tape = Tape::new();
    let params = model.params().bind(&tape)?;
    let fwd = model.forward(&params, &inputs, false)?;
    let logits = fwd.logits.value();
    let predicted = argmax(logits.row(0));
    let scores = node_scores(
        &fwd.node_features.value(),
        model.classifier_weights(),
        predicted,
    )?;
    Ok((predicted, scores))
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0
}

/// Group saliency of `model` over `subjects`.
pub fn model_saliency(
    model: &DmbnModel,
    subjects: &[&SubjectRecord],
    top_k: usize,
) -> Result<SaliencyMap> {
    let scores = subjects
        .iter()
        .map(|s| subject_scores(model, s).map(|(_, v)| v))
        .collect::<Result<Vec<_>>>()?;
    group_saliency(&scores, top_k)
}

use serde::Serialize;

use super::trainer::{batch_loss, prepare};
use crate::autodiff::{grad_check, GradCheckOptions, GradCheckReport};
use crate::error::Result;
use crate::graph::{generate_synthetic, SynthParams};
use crate::layers::{DmbnModel, ModelConfig};
use crate::losses::LossWeights;

/// Settings for a finite-difference check of the whole model.
#[derive(Clone, Debug)]
pub struct ModelGradCheck {
    pub seed: u64,
    pub nodes: usize,
    pub subjects: usize,
    pub model: ModelConfig,
    pub options: GradCheckOptions,
}

impl Default for ModelGradCheck {
    fn default() -> Self {
        Self {
            seed: 0,
            nodes: 6,
            subjects: 2,
            model: ModelConfig {
                hidden_dim: 4,
                heads: 2,
                pos_layers: 2,
                neg_layers: 2,
                head_hidden: vec![3],
                ..Default::default()
            },
            options: GradCheckOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TermCheck {
    pub term: &'static str,
    pub max_rel_error: f64,
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
    pub passed: bool,
}

impl TermCheck {
    fn new(term: &'static str, r: GradCheckReport) -> Self {
        Self {
            term,
            max_rel_error: r.max_rel_error,
            worst: r.worst,
            entries_checked: r.entries_checked,
            passed: r.passed,
        }
    }
}

/// Checks the global, local, supervised and total losses of a randomly
/// initialized model on a small synthetic cohort.
pub fn model_gradcheck(check: &ModelGradCheck) -> Result<Vec<TermCheck>> {
    let n = check.nodes;
    let data = generate_synthetic(&SynthParams {
        n_subjects: check.subjects.max(2),
        n_nodes: n,
        n_classes: 2,
        n_modules: n.clamp(1, 2),
        planted_size: (n / 3).min(2),
        seed: check.seed,
        ..Default::default()
    })?;
    let mut model = DmbnModel::new(check.model.clone(), n, 2, check.seed)?;
    model.randomize(check.seed, 0.5);
    let subjects: Vec<_> = data.subjects().iter().take(check.subjects.max(1)).collect();
    let prepared = prepare(&model, &subjects, 0.0)?;
    let refs: Vec<_> = prepared.iter().collect();

    let only = |g: f64, l: f64, s: f64| LossWeights {
        global: g,
        local: l,
        supervised: s,
        gamma: 0.0,
    };
    let terms = [
        ("global", only(1.0, 0.0, 0.0)),
        ("local", only(0.0, 1.0, 0.0)),
        ("supervised", only(0.0, 0.0, 1.0)),
        ("total", LossWeights::default()),
    ];
    terms
        .into_iter()
        .map(|(name, weights)| {
            let report = grad_check(
                model.params(),
                |_, p| batch_loss(&model, p, &refs, &weights),
                check.options,
            )?;
            Ok(TermCheck::new(name, report))
        })
        .collect()
}

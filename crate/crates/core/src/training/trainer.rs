use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{MeanStd, Metrics};
use super::optim::{Adam, AdamConfig};
use super::stats::ReconstructionStats;
use crate::autodiff::{AutodiffError, BoundParams, Matrix, Tape, Tensor};
use crate::error::{Error, Result};
use crate::graph::{stratified_kfold, Dataset, SubjectRecord};
use crate::io;
use crate::layers::{DmbnModel, Forward, GraphInputs, ModelConfig};
use crate::losses::{
    global_loss, local_loss, supervised_loss, total_loss, GlobalTarget, LocalPairs, LossBreakdown,
    LossTerms, LossWeights,
};
use crate::saliency::argmax;

pub const LOSS_CSV_HEADER: &str = "epoch,global,local,supervised,total";
pub const REPORT_FILE: &str = "report.json";
pub const GRID_GLOBAL: [f64; 4] = [10.0, 1.0, 0.1, 0.01];
pub const GRID_LOCAL: [f64; 4] = [5.0, 1.0, 0.5, 0.1];

/// Model variants used for ablation studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Drops both reconstruction losses (μ1 = μ2 = 0).
    NoRecon,
    /// μ1 = 0.
    NoGlobal,
    /// μ2 = 0.
    NoLocal,
    /// Uniform neighborhood weights instead of learned attention.
    NoAttention,
    /// δ ≡ 0 in the MGCK aggregation.
    NoThreshold,
    /// Drops the supervised loss.
    ReconOnly,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::NoRecon,
        Ablation::NoGlobal,
        Ablation::NoLocal,
        Ablation::NoAttention,
        Ablation::NoThreshold,
        Ablation::ReconOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::NoRecon => "no-recon",
            Ablation::NoGlobal => "no-global",
            Ablation::NoLocal => "no-local",
            Ablation::NoAttention => "no-attention",
            Ablation::NoThreshold => "no-threshold",
            Ablation::ReconOnly => "recon-only",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Ablation::ALL.iter().map(|a| a.name()).collect();
                format!(
                    "unknown ablation `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub optimizer: AdamConfig,
    /// Subjects per gradient step; `None` is full batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub folds: usize,
    pub loss: LossWeights,
    pub ablations: Vec<Ablation>,
    /// Epochs without validation improvement before stopping; `None` disables early stopping.
    pub patience: Option<usize>,
    /// Share of each class in the training folds held out for early stopping.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            optimizer: AdamConfig::default(),
            batch_size: None,
            seed: 0,
            folds: 5,
            loss: LossWeights::default(),
            ablations: Vec::new(),
            patience: Some(20),
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        self.optimizer.check()?;
        self.loss.check()?;
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(
                "validation_fraction must lie in [0, 1)".into(),
            ));
        }
        let w = self.loss_weights();
        if w.global == 0.0 && w.local == 0.0 && w.supervised == 0.0 {
            return Err(Error::Config("every loss term is disabled".into()));
        }
        Ok(())
    }

    /// Loss weights after applying the ablations.
    pub fn loss_weights(&self) -> LossWeights {
        let mut w = self.loss;
        for a in &self.ablations {
            match a {
                Ablation::NoRecon => {
                    w.global = 0.0;
                    w.local = 0.0;
                }
                Ablation::NoGlobal => w.global = 0.0,
                Ablation::NoLocal => w.local = 0.0,
                Ablation::ReconOnly => w.supervised = 0.0,
                Ablation::NoAttention | Ablation::NoThreshold => {}
            }
        }
        w
    }

    /// Architecture after applying the ablations.
    pub fn model_config(&self, base: &ModelConfig) -> ModelConfig {
        let mut cfg = base.clone();
        for a in &self.ablations {
            match a {
                Ablation::NoAttention => cfg.attention_aggregation = false,
                Ablation::NoThreshold => cfg.threshold_aggregation = false,
                _ => {}
            }
        }
        cfg
    }
}

/// Per-subject constants for one model.
#[derive(Clone, Debug)]
pub struct PreparedSubject {
    pub inputs: GraphInputs,
    pub global: GlobalTarget,
    pub local: LocalPairs,
    pub label: usize,
}

impl PreparedSubject {
    pub fn new(model: &DmbnModel, subject: &SubjectRecord, gamma: f64) -> Result<Self> {
        Ok(Self {
            inputs: model.inputs(&subject.structural)?,
            global: GlobalTarget::new(subject.functional.weights()),
            local: LocalPairs::new(&subject.structural, gamma),
            label: subject.label,
        })
    }
}

pub fn prepare(
    model: &DmbnModel,
    subjects: &[&SubjectRecord],
    gamma: f64,
) -> Result<Vec<PreparedSubject>> {
    subjects
        .iter()
        .map(|s| PreparedSubject::new(model, s, gamma))
        .collect()
}

/// Forward pass plus the weighted loss for one subject. Terms with zero
/// weight are not computed.
pub fn subject_loss<'t>(
    model: &DmbnModel,
    params: &BoundParams<'t>,
    subject: &PreparedSubject,
    weights: &LossWeights,
) -> Result<(Tensor<'t>, LossBreakdown, Forward<'t>)> {
    let fwd = model.forward(params, &subject.inputs, weights.global > 0.0)?;
    let global = match (fwd.recon_pos, fwd.recon_neg) {
        (Some(p), Some(n)) => Some(global_loss(p, n, &subject.global)?),
        _ => None,
    };
    let local = if weights.local > 0.0 {
        let pos = local_loss(fwd.embed_pos, &subject.local)?;
        Some(pos.add(local_loss(fwd.embed_neg, &subject.local)?)?)
    } else {
        None
    };
    let supervised = if weights.supervised > 0.0 {
        Some(supervised_loss(fwd.logits, &[subject.label])?)
    } else {
        None
    };
    let terms = LossTerms {
        global,
        local,
        supervised,
    };
    let (total, breakdown) = total_loss(&terms, weights)?;
    let total = total.ok_or_else(|| Error::Config("every loss term is disabled".into()))?;
    Ok((total, breakdown, fwd))
}

/// Mean loss over `subjects` on a single tape.
pub fn batch_loss<'t>(
    model: &DmbnModel,
    params: &BoundParams<'t>,
    subjects: &[&PreparedSubject],
    weights: &LossWeights,
) -> Result<Tensor<'t>> {
    let mut acc: Option<Tensor<'t>> = None;
    for s in subjects {
        let (l, _, _) = subject_loss(model, params, s, weights)?;
        acc = Some(match acc {
            Some(a) => a.add(l)?,
            None => l,
        });
    }
    let acc = acc.ok_or_else(|| Error::Config("empty batch".into()))?;
    Ok(acc.scale(1.0 / subjects.len() as f64)?)
}

fn subject_gradient(
    model: &DmbnModel,
    subject: &PreparedSubject,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<Matrix>)> {
    let tape = Tape::new();
    let params = model.params().bind(&tape)?;
    let (loss, breakdown, _) = subject_loss(model, &params, subject, weights)?;
    let grads = tape.backward(loss)?;
    Ok((breakdown, params.gradients(&grads)))
}

/// Mean loss and gradient over a batch. Subjects run in parallel on
/// separate tapes; the reduction is serial in batch order.
pub fn batch_gradient(
    model: &DmbnModel,
    batch: &[&PreparedSubject],
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<Matrix>)> {
    let results: Vec<Result<(LossBreakdown, Vec<Matrix>)>> = batch
        .par_iter()
        .map(|s| subject_gradient(model, s, weights))
        .collect();
    let scale = 1.0 / batch.len() as f64;
    let mut mean = LossBreakdown::default();
    let mut grads: Option<Vec<Matrix>> = None;
    for r in results {
        let (b, g) = r?;
        mean.add_scaled(&b, scale);
        match grads.as_mut() {
            None => grads = Some(g),
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, g)| a.add_assign(g)),
        }
    }
    let mut grads = grads.ok_or_else(|| Error::Config("empty batch".into()))?;
    grads.iter_mut().for_each(|g| g.scale_assign(scale));
    Ok((mean, grads))
}

fn subject_eval(
    model: &DmbnModel,
    subject: &PreparedSubject,
    weights: &LossWeights,
) -> Result<(LossBreakdown, usize)> {
    let tape = Tape::new();
    let params = model.params().bind(&tape)?;
    let (_, breakdown, fwd) = subject_loss(model, &params, subject, weights)?;
    Ok((breakdown, argmax(fwd.logits.value().row(0))))
}

/// Mean loss breakdown and predictions without gradients.
pub fn evaluate_prepared(
    model: &DmbnModel,
    subjects: &[PreparedSubject],
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<usize>)> {
    let results: Vec<Result<(LossBreakdown, usize)>> = subjects
        .par_iter()
        .map(|s| subject_eval(model, s, weights))
        .collect();
    let scale = 1.0 / subjects.len().max(1) as f64;
    let mut mean = LossBreakdown::default();
    let mut preds = Vec::with_capacity(subjects.len());
    for r in results {
        let (b, p) = r?;
        mean.add_scaled(&b, scale);
        preds.push(p);
    }
    Ok((mean, preds))
}

fn logits_of(model: &DmbnModel, subject: &SubjectRecord) -> Result<Matrix> {
    let inputs = model.inputs(&subject.structural)?;
    let tape = Tape::new();
    let params = model.params().bind(&tape)?;
    Ok(model.forward(&params, &inputs, false)?.logits.value())
}

/// Arg-max class per subject.
pub fn predict(model: &DmbnModel, subjects: &[&SubjectRecord]) -> Result<Vec<usize>> {
    subjects
        .par_iter()
        .map(|s| logits_of(model, s).map(|l| argmax(l.row(0))))
        .collect()
}

pub fn evaluate(model: &DmbnModel, subjects: &[&SubjectRecord]) -> Result<Metrics> {
    let preds = predict(model, subjects)?;
    let labels: Vec<usize> = subjects.iter().map(|s| s.label).collect();
    Ok(Metrics::from_predictions(
        &preds,
        &labels,
        model.n_classes(),
    ))
}

/// Decoded functional connectivity `x̂⁺ − x̂⁻` with a zero diagonal, read
/// from the upper triangle so the result is exactly symmetric.
pub fn predicted_functional(model: &DmbnModel, subject: &SubjectRecord) -> Result<Matrix> {
    let inputs = model.inputs(&subject.structural)?;
    let tape = Tape::new();
    let params = model.params().bind(&tape)?;
    let fwd = model.forward(&params, &inputs, true)?;
    let (pos, neg) = match (fwd.recon_pos, fwd.recon_neg) {
        (Some(p), Some(n)) => (p.value(), n.value()),
        _ => unreachable!("decoding was requested"),
    };
    Ok(Matrix::from_fn(pos.rows(), pos.cols(), |i, j| {
        let (a, b) = (i.min(j), i.max(j));
        if a == b {
            0.0
        } else {
            pos[(a, b)] - neg[(a, b)]
        }
    }))
}

pub fn reconstruction_stats(
    model: &DmbnModel,
    subjects: &[&SubjectRecord],
) -> Result<ReconstructionStats> {
    let predicted = subjects
        .par_iter()
        .map(|s| predicted_functional(model, s))
        .collect::<Result<Vec<_>>>()?;
    let target: Vec<Matrix> = subjects
        .iter()
        .map(|s| s.functional.weights().clone())
        .collect();
    let structural: Vec<Matrix> = subjects
        .iter()
        .map(|s| s.structural.weights().clone())
        .collect();
    ReconstructionStats::compute(&predicted, &target, &structural)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Epoch 0 is the initial model; later epochs average the mini-batch losses.
    pub train: LossBreakdown,
    pub validation: Option<LossBreakdown>,
}

/// A trained fold model and its loss history.
pub struct FoldOutcome {
    pub model: DmbnModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn divergence(err: Error, fold: usize, epoch: usize) -> Error {
    match err {
        Error::Autodiff(AutodiffError::NonFinite { .. }) => Error::Divergence { fold, epoch },
        other => other,
    }
}

/// Trains one model on `train`, early-stopping on `validation` when it is
/// non-empty and patience is set. The returned model carries the parameters
/// of the best validation epoch.
pub fn train_fold(
    dataset: &Dataset,
    model_config: &ModelConfig,
    config: &TrainConfig,
    train: &[usize],
    validation: &[usize],
    fold: usize,
) -> Result<FoldOutcome> {
    config.check()?;
    if train.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let weights = config.loss_weights();
    let model_config = config.model_config(model_config);
    let seed = fold_seed(config.seed, fold);
    let mut model = DmbnModel::new(model_config, dataset.n_nodes(), dataset.n_classes(), seed)?;
    let subjects = dataset.subjects();
    let pick = |idx: &[usize]| idx.iter().map(|&i| &subjects[i]).collect::<Vec<_>>();
    let train_set = prepare(&model, &pick(train), weights.gamma)?;
    let val_set = prepare(&model, &pick(validation), weights.gamma)?;

    let check = |b: &LossBreakdown, epoch: usize| {
        if b.total.is_finite() {
            Ok(())
        } else {
            Err(Error::Divergence { fold, epoch })
        }
    };
    let eval_val = |model: &DmbnModel, epoch: usize| -> Result<Option<LossBreakdown>> {
        if val_set.is_empty() {
            return Ok(None);
        }
        let (b, _) =
            evaluate_prepared(model, &val_set, &weights).map_err(|e| divergence(e, fold, epoch))?;
        check(&b, epoch)?;
        Ok(Some(b))
    };

    let (initial, _) =
        evaluate_prepared(&model, &train_set, &weights).map_err(|e| divergence(e, fold, 0))?;
    check(&initial, 0)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train: initial,
        validation: eval_val(&model, 0)?,
    }];
    let mut best = (
        history[0].validation.map(|v| v.total),
        0usize,
        model.params().clone(),
    );

    let mut adam = Adam::new(config.optimizer, model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(17));
    let batch_size = config
        .batch_size
        .unwrap_or(train_set.len())
        .min(train_set.len());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = LossBreakdown::default();
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&PreparedSubject> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (b, grads) =
                batch_gradient(&model, &batch, &weights).map_err(|e| divergence(e, fold, epoch))?;
            check(&b, epoch)?;
            adam.step(model.params_mut(), &grads)?;
            epoch_loss.add_scaled(&b, chunk.len() as f64 / train_set.len() as f64);
        }
        let validation = eval_val(&model, epoch)?;
        log::debug!(
            "fold {fold} epoch {epoch}: train {:.6} validation {:?}",
            epoch_loss.total,
            validation.map(|v| v.total)
        );
        history.push(EpochRecord {
            epoch,
            train: epoch_loss,
            validation,
        });
        if let (Some(v), Some(best_v)) = (validation, best.0) {
            if v.total < best_v {
                best = (Some(v.total), epoch, model.params().clone());
            }
        }
        if let (Some(patience), Some(_)) = (config.patience, validation) {
            if epoch - best.1 > patience {
                break;
            }
        }
    }
    let best_epoch = if best.0.is_some() {
        *model.params_mut() = best.2;
        best.1
    } else {
        history.len() - 1
    };
    Ok(FoldOutcome {
        model,
        history,
        best_epoch,
    })
}

/// Splits training indices into (train, validation), taking
/// `round(fraction·count)` of each class but always leaving one behind.
pub fn split_validation(
    indices: &[usize],
    labels: &[usize],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    if fraction <= 0.0 {
        return (indices.to_vec(), Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = indices.iter().map(|&i| labels[i] + 1).max().unwrap_or(0);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for c in 0..n_classes {
        let mut members: Vec<usize> = indices
            .iter()
            .copied()
            .filter(|&i| labels[i] == c)
            .collect();
        members.shuffle(&mut rng);
        let take = ((fraction * members.len() as f64).round() as usize)
            .min(members.len().saturating_sub(1));
        val.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_subjects: Vec<String>,
    pub validation_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub train_metrics: Metrics,
    pub test_metrics: Metrics,
    /// Held-out reconstruction quality; present when the decoders were trained.
    pub reconstruction: Option<ReconstructionStats>,
    /// Paths relative to the output directory.
    pub checkpoint: Option<String>,
    pub loss_csv: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub f1: MeanStd,
    pub train_accuracy: MeanStd,
    pub reconstruction_overall: Option<MeanStd>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: ModelConfig,
    pub config: TrainConfig,
    pub n_subjects: usize,
    pub n_nodes: usize,
    pub n_classes: usize,
    pub folds: Vec<FoldReport>,
    pub summary: Summary,
}

pub fn loss_csv(history: &[EpochRecord]) -> String {
    let mut out = format!("{LOSS_CSV_HEADER}\n");
    for r in history {
        let b = &r.train;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch,
            io::format_float(b.global),
            io::format_float(b.local),
            io::format_float(b.supervised),
            io::format_float(b.total)
        ));
    }
    out
}

/// Stratified k-fold cross-validation. With `out`, writes per-fold
/// checkpoints and loss CSVs plus `report.json`.
pub fn train(
    dataset: &Dataset,
    model_config: &ModelConfig,
    config: &TrainConfig,
    out: Option<&Path>,
) -> Result<TrainReport> {
    config.check()?;
    config.model_config(model_config).check()?;
    let labels = dataset.labels();
    let folds = stratified_kfold(&labels, config.folds, config.seed)?;
    let subjects = dataset.subjects();
    let ids = |idx: &[usize]| {
        idx.iter()
            .map(|&i| subjects[i].subject_id.clone())
            .collect::<Vec<_>>()
    };
    let pick = |idx: &[usize]| idx.iter().map(|&i| &subjects[i]).collect::<Vec<_>>();
    if let Some(dir) = out {
        io::create_dir(dir)?;
    }

    let mut reports = Vec::with_capacity(folds.len());
    for (f, test) in folds.iter().enumerate() {
        let rest: Vec<usize> = (0..dataset.len()).filter(|i| !test.contains(i)).collect();
        let (train_idx, val_idx) = split_validation(
            &rest,
            &labels,
            config.validation_fraction,
            fold_seed(config.seed, f).rotate_left(33),
        );
        let outcome = train_fold(dataset, model_config, config, &train_idx, &val_idx, f)?;
        let model = &outcome.model;
        let train_metrics = evaluate(model, &pick(&train_idx))?;
        let test_metrics = evaluate(model, &pick(test))?;
        let reconstruction = if config.loss_weights().global > 0.0 {
            reconstruction_stats(model, &pick(test)).ok()
        } else {
            None
        };
        log::info!(
            "fold {f}: best epoch {} of {}, test accuracy {:.4}",
            outcome.best_epoch,
            outcome.history.len() - 1,
            test_metrics.accuracy
        );
        let mut report = FoldReport {
            fold: f,
            train_subjects: ids(&train_idx),
            validation_subjects: ids(&val_idx),
            test_subjects: ids(test),
            best_epoch: outcome.best_epoch,
            history: outcome.history,
            train_metrics,
            test_metrics,
            reconstruction,
            checkpoint: None,
            loss_csv: None,
        };
        if let Some(dir) = out {
            let fold_dir = format!("fold_{f}");
            let ckpt = format!("{fold_dir}/checkpoint");
            let csv = format!("{fold_dir}/loss.csv");
            let extra = serde_json::json!({
                "fold": f,
                "seed": config.seed,
                "train_subjects": report.train_subjects,
                "validation_subjects": report.validation_subjects,
                "test_subjects": report.test_subjects,
            });
            model.save(&dir.join(&ckpt), extra)?;
            io::write_text(&dir.join(&csv), &loss_csv(&report.history))?;
            report.checkpoint = Some(ckpt);
            report.loss_csv = Some(csv);
        }
        reports.push(report);
    }

    let collect =
        |f: &dyn Fn(&FoldReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    let recon: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.reconstruction.as_ref().map(|s| s.overall))
        .collect();
    let summary = Summary {
        accuracy: collect(&|r| r.test_metrics.accuracy),
        precision: collect(&|r| r.test_metrics.precision),
        f1: collect(&|r| r.test_metrics.f1),
        train_accuracy: collect(&|r| r.train_metrics.accuracy),
        reconstruction_overall: (!recon.is_empty()).then(|| MeanStd::of(&recon)),
    };
    let report = TrainReport {
        model: config.model_config(model_config),
        config: config.clone(),
        n_subjects: dataset.len(),
        n_nodes: dataset.n_nodes(),
        n_classes: dataset.n_classes(),
        folds: reports,
        summary,
    };
    if let Some(dir) = out {
        io::write_json(&dir.join(REPORT_FILE), &report)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub global: f64,
    pub local: f64,
    pub accuracy: MeanStd,
    pub f1: MeanStd,
}

/// Cross-validates every (μ1, μ2) pair of the standard grid.
pub fn grid_search(
    dataset: &Dataset,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<Vec<GridPoint>> {
    let mut points = Vec::with_capacity(GRID_GLOBAL.len() * GRID_LOCAL.len());
    for &global in &GRID_GLOBAL {
        for &local in &GRID_LOCAL {
            let mut cfg = config.clone();
            cfg.loss.global = global;
            cfg.loss.local = local;
            let report = train(dataset, model_config, &cfg, None)?;
            log::info!(
                "grid μ1={global} μ2={local}: accuracy {:.4}",
                report.summary.accuracy.mean
            );
            points.push(GridPoint {
                global,
                local,
                accuracy: report.summary.accuracy,
                f1: report.summary.f1,
            });
        }
    }
    Ok(points)
}

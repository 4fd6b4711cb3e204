use std::path::Path;

use dmbn_core::autodiff::GradCheckOptions;
use dmbn_core::graph::{generate_synthetic, load_dataset, save_dataset, Dataset};
use dmbn_core::io;
use dmbn_core::saliency::model_saliency;
use dmbn_core::training::{
    grid_search, model_gradcheck, predicted_functional, train, Ablation, ModelGradCheck,
    ReconstructionStats,
};
use dmbn_core::{DmbnModel, Matrix, SubjectRecord};

use crate::args::{GradcheckArgs, ReconstructArgs, SaliencyArgs, SynthArgs, TrainArgs};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const STATS_FILE: &str = "stats.json";
pub const PREDICTIONS_DIR: &str = "predictions";
pub const GRID_FILE: &str = "grid.json";

fn announce(cfg: &RunConfig) {
    log::info!("effective configuration:\n{}", cfg.to_pretty_json());
}

fn load_data(cfg: &RunConfig) -> CliResult<Dataset> {
    let dir = cfg.data()?;
    let data = load_dataset(dir)?;
    log::info!(
        "loaded {} subjects, {} nodes, {} classes from {}",
        data.len(),
        data.n_nodes(),
        data.n_classes(),
        dir.display()
    );
    Ok(data)
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let params = args.params();
    let data = generate_synthetic(&params)?;
    save_dataset(&data, &args.out)?;
    println!(
        "wrote {} subjects ({} nodes, {} classes) to {}",
        data.len(),
        data.n_nodes(),
        data.n_classes(),
        args.out.display()
    );
    Ok(())
}

pub fn train_cmd(args: &TrainArgs) -> CliResult<()> {
    let cfg = RunConfig::resolve(&args.opts)?;
    cfg.data()?;
    let out = cfg.out()?.to_path_buf();
    announce(&cfg);
    let data = load_data(&cfg)?;
    let report = train(&data, &cfg.model, &cfg.train, Some(&out))?;
    for f in &report.folds {
        println!(
            "fold {}: best epoch {:>3}  train acc {:.4}  test acc {:.4}  f1 {:.4}",
            f.fold,
            f.best_epoch,
            f.train_metrics.accuracy,
            f.test_metrics.accuracy,
            f.test_metrics.f1
        );
    }
    let s = &report.summary;
    println!(
        "accuracy {:.4} ± {:.4}  precision {:.4} ± {:.4}  f1 {:.4} ± {:.4}",
        s.accuracy.mean, s.accuracy.std, s.precision.mean, s.precision.std, s.f1.mean, s.f1.std
    );
    println!(
        "report written to {}",
        out.join(dmbn_core::training::REPORT_FILE).display()
    );
    Ok(())
}

fn oracle_prediction(subject: &SubjectRecord) -> Matrix {
    let f = subject.functional.weights();
    Matrix::from_fn(
        f.rows(),
        f.cols(),
        |i, j| if i == j { 0.0 } else { f[(i, j)] },
    )
}

/// Writes per-subject predictions and pooled statistics.
fn write_reconstruction(
    out: &Path,
    subjects: &[&SubjectRecord],
    predicted: &[Matrix],
) -> CliResult<ReconstructionStats> {
    let pred_dir = out.join(PREDICTIONS_DIR);
    io::create_dir(&pred_dir)?;
    for (s, p) in subjects.iter().zip(predicted) {
        io::write_text(
            &pred_dir.join(format!("subject_{}_pred.csv", s.subject_id)),
            &io::matrix_to_csv(p),
        )?;
    }
    let target: Vec<Matrix> = subjects
        .iter()
        .map(|s| s.functional.weights().clone())
        .collect();
    let structural: Vec<Matrix> = subjects
        .iter()
        .map(|s| s.structural.weights().clone())
        .collect();
    let stats = ReconstructionStats::compute(predicted, &target, &structural)?;
    io::write_json(&out.join(STATS_FILE), &stats)?;
    Ok(stats)
}

pub fn reconstruct(args: &ReconstructArgs) -> CliResult<()> {
    let modes = [
        args.checkpoint.is_some(),
        args.train_recon_only,
        args.oracle_predictions,
    ];
    if modes.iter().filter(|&&m| m).count() != 1 {
        return Err(CliError::Usage(
            "pass exactly one of --checkpoint or --train-recon-only".into(),
        ));
    }
    let mut cfg = RunConfig::resolve(&args.opts)?;
    if args.train_recon_only {
        cfg.add_ablation(Ablation::ReconOnly);
        cfg.train.check()?;
    }
    let out = cfg.out()?.to_path_buf();
    announce(&cfg);
    let data = load_data(&cfg)?;
    let subjects = data.subjects();

    let (chosen, predicted): (Vec<&SubjectRecord>, Vec<Matrix>) = if args.oracle_predictions {
        subjects.iter().map(|s| (s, oracle_prediction(s))).unzip()
    } else if let Some(ckpt) = &args.checkpoint {
        let (model, _) = DmbnModel::load(ckpt)?;
        let predicted = subjects
            .iter()
            .map(|s| predicted_functional(&model, s))
            .collect::<Result<Vec<_>, _>>()?;
        (subjects.iter().collect(), predicted)
    } else {
        let train_dir = out.join("train");
        let report = train(&data, &cfg.model, &cfg.train, Some(&train_dir))?;
        let mut held_out = Vec::new();
        for f in &report.folds {
            let ckpt = f
                .checkpoint
                .as_ref()
                .expect("checkpoints are written with an output directory");
            let (model, _) = DmbnModel::load(&train_dir.join(ckpt))?;
            for id in &f.test_subjects {
                let idx = subjects
                    .iter()
                    .position(|s| &s.subject_id == id)
                    .expect("fold ids come from the dataset");
                held_out.push((idx, predicted_functional(&model, &subjects[idx])?));
            }
        }
        held_out.sort_by_key(|(i, _)| *i);
        held_out.into_iter().map(|(i, p)| (&subjects[i], p)).unzip()
    };

    let stats = write_reconstruction(&out, &chosen, &predicted)?;
    let show = |v: Option<f64>| v.map_or("undefined".to_owned(), |r| format!("{r:.4}"));
    println!(
        "spearman r_S overall {:.4} ({} pairs)  direct {} ({})  indirect {} ({})",
        stats.overall,
        stats.n_pairs,
        show(stats.direct),
        stats.n_direct,
        show(stats.indirect),
        stats.n_indirect
    );
    println!("stats written to {}", out.join(STATS_FILE).display());
    Ok(())
}

pub fn saliency(args: &SaliencyArgs) -> CliResult<()> {
    let (model, extra) = DmbnModel::load(&args.checkpoint)?;
    let data = load_dataset(&args.data)?;
    let mut subjects: Vec<&SubjectRecord> = data.subjects().iter().collect();
    if args.held_out {
        let ids: Vec<String> = extra
            .get("test_subjects")
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .ok_or_else(|| CliError::Usage("checkpoint records no test subjects".into()))?;
        subjects.retain(|s| ids.contains(&s.subject_id));
        if subjects.is_empty() {
            return Err(CliError::Usage(
                "none of the checkpoint's test subjects are in --data".into(),
            ));
        }
    }
    let map = model_saliency(&model, &subjects, args.top_k)?;
    if let Some(out) = &args.out {
        map.write(out)?;
    }
    println!(
        "top {} of {} nodes over {} subjects",
        args.top_k,
        map.n_nodes(),
        subjects.len()
    );
    println!(
        "{:>4}  {:>5}  {:>5}  {:>12}",
        "rank", "node", "votes", "mean_score"
    );
    for (rank, &node) in map.top(args.top_k).iter().enumerate() {
        println!(
            "{:>4}  {:>5}  {:>5}  {:>12.6}",
            rank + 1,
            node,
            map.votes[node],
            map.mean_score[node]
        );
    }
    Ok(())
}

pub fn gradcheck(args: &GradcheckArgs) -> CliResult<()> {
    let check = ModelGradCheck {
        seed: args.seed,
        nodes: args.nodes,
        subjects: args.subjects,
        options: GradCheckOptions {
            epsilon: args.epsilon,
            tolerance: args.tolerance,
            corrupt_backward: args.corrupt_backward,
        },
        ..Default::default()
    };
    let terms = model_gradcheck(&check)?;
    let mut failed = Vec::new();
    for t in &terms {
        let worst = t
            .worst
            .as_ref()
            .map_or("-".to_owned(), |(name, idx)| format!("{name}[{idx}]"));
        println!(
            "{:<10} max rel error {:.3e} over {} entries, worst {}  {}",
            t.term,
            t.max_rel_error,
            t.entries_checked,
            worst,
            if t.passed { "ok" } else { "FAIL" }
        );
        if !t.passed {
            failed.push(format!("{} (worst {worst})", t.term));
        }
    }
    if failed.is_empty() {
        println!("gradient check passed (tolerance {:e})", args.tolerance);
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "gradient check failed: {}",
            failed.join("; ")
        )))
    }
}

pub fn grid(args: &TrainArgs) -> CliResult<()> {
    let cfg = RunConfig::resolve(&args.opts)?;
    announce(&cfg);
    let data = load_data(&cfg)?;
    let points = grid_search(&data, &cfg.model, &cfg.train)?;
    println!(
        "{:>6}  {:>6}  {:>16}  {:>16}",
        "mu1", "mu2", "accuracy", "f1"
    );
    for p in &points {
        println!(
            "{:>6}  {:>6}  {:>7.4} ± {:<6.4}  {:>7.4} ± {:<6.4}",
            p.global, p.local, p.accuracy.mean, p.accuracy.std, p.f1.mean, p.f1.std
        );
    }
    if let Some(out) = &cfg.out {
        io::create_dir(out)?;
        io::write_json(&out.join(GRID_FILE), &points)?;
    }
    Ok(())
}

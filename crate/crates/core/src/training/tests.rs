use super::*;
use crate::autodiff::Tape;
use crate::graph::{generate_synthetic, SynthParams};
use crate::layers::{DmbnModel, ModelConfig};
use crate::losses::LossWeights;

fn tiny_model() -> ModelConfig {
    ModelConfig {
        hidden_dim: 4,
        heads: 2,
        pos_layers: 1,
        neg_layers: 1,
        head_hidden: vec![4],
        ..Default::default()
    }
}

fn tiny_data(seed: u64) -> crate::graph::Dataset {
    generate_synthetic(&SynthParams {
        n_subjects: 12,
        n_nodes: 8,
        n_modules: 2,
        planted_size: 3,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        folds: 3,
        batch_size: Some(4),
        optimizer: AdamConfig {
            lr: 1e-2,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn zero_epochs_reports_initial_state_only() {
    let cfg = TrainConfig {
        epochs: 0,
        ..quick_config()
    };
    let report = train(&tiny_data(1), &tiny_model(), &cfg, None).unwrap();
    assert_eq!(report.folds.len(), 3);
    for f in &report.folds {
        assert_eq!(f.history.len(), 1);
        assert_eq!(f.history[0].epoch, 0);
        assert_eq!(f.best_epoch, 0);
    }
}

#[test]
fn training_is_deterministic_and_writes_outputs() {
    let data = tiny_data(2);
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let r1 = train(&data, &tiny_model(), &quick_config(), Some(d1.path())).unwrap();
    let r2 = train(&data, &tiny_model(), &quick_config(), Some(d2.path())).unwrap();
    assert_eq!(r1, r2);
    for file in [
        "report.json",
        "fold_0/loss.csv",
        "fold_2/checkpoint/params.csv",
        "fold_1/checkpoint/manifest.json",
    ] {
        let a = std::fs::read(d1.path().join(file)).unwrap();
        let b = std::fs::read(d2.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let csv = std::fs::read_to_string(d1.path().join("fold_0/loss.csv")).unwrap();
    assert!(csv.starts_with("epoch,global,local,supervised,total\n"));
}

#[test]
fn no_recon_zeroes_reconstruction_columns() {
    let cfg = TrainConfig {
        ablations: vec![Ablation::NoRecon],
        ..quick_config()
    };
    let report = train(&tiny_data(3), &tiny_model(), &cfg, None).unwrap();
    for f in &report.folds {
        assert!(f.reconstruction.is_none());
        for r in &f.history {
            assert_eq!((r.train.global, r.train.local), (0.0, 0.0));
            assert!(r.train.supervised > 0.0);
        }
    }
}

#[test]
fn ablations_adjust_weights_and_architecture() {
    let cfg = TrainConfig {
        ablations: vec![Ablation::NoGlobal, Ablation::NoAttention],
        ..Default::default()
    };
    let w = cfg.loss_weights();
    assert_eq!((w.global, w.local, w.supervised), (0.0, 0.5, 1.0));
    assert!(
        !cfg.model_config(&ModelConfig::default())
            .attention_aggregation
    );
    for a in Ablation::ALL {
        assert_eq!(a.name().parse::<Ablation>().unwrap(), a);
    }
    assert!("bogus".parse::<Ablation>().is_err());

    let all_off = TrainConfig {
        ablations: vec![Ablation::NoRecon, Ablation::ReconOnly],
        ..Default::default()
    };
    assert!(all_off.check().is_err());
    assert!(TrainConfig {
        folds: 1,
        ..Default::default()
    }
    .check()
    .is_err());
}

#[test]
fn small_step_decreases_each_loss_term() {
    let data = tiny_data(4);
    let mut model = DmbnModel::new(tiny_model(), 8, 2, 11).unwrap();
    model.randomize(11, 0.3);
    let subjects: Vec<_> = data.subjects().iter().take(4).collect();
    let prepared = prepare(&model, &subjects, 0.0).unwrap();
    let refs: Vec<_> = prepared.iter().collect();
    let only = |g: f64, l: f64, s: f64| LossWeights {
        global: g,
        local: l,
        supervised: s,
        gamma: 0.0,
    };
    for weights in [
        only(1.0, 0.0, 0.0),
        only(0.0, 1.0, 0.0),
        only(0.0, 0.0, 1.0),
    ] {
        let mut m = model.clone();
        let (before, grads) = batch_gradient(&m, &refs, &weights).unwrap();
        let mut adam = Adam::new(
            AdamConfig {
                lr: 1e-4,
                ..Default::default()
            },
            m.params(),
        );
        adam.step(m.params_mut(), &grads).unwrap();
        let (after, _) = batch_gradient(&m, &refs, &weights).unwrap();
        assert!(
            after.total < before.total,
            "{weights:?}: {} !< {}",
            after.total,
            before.total
        );
    }
}

#[test]
fn batch_gradient_matches_single_tape() {
    let data = tiny_data(5);
    let mut model = DmbnModel::new(tiny_model(), 8, 2, 3).unwrap();
    model.randomize(3, 0.3);
    let subjects: Vec<_> = data.subjects().iter().take(3).collect();
    let prepared = prepare(&model, &subjects, 0.0).unwrap();
    let refs: Vec<_> = prepared.iter().collect();
    let weights = LossWeights::default();
    let (b, grads) = batch_gradient(&model, &refs, &weights).unwrap();

    let tape = Tape::new();
    let params = model.params().bind(&tape).unwrap();
    let loss = batch_loss(&model, &params, &refs, &weights).unwrap();
    assert!((loss.item() - b.total).abs() < 1e-12);
    let single = params.gradients(&tape.backward(loss).unwrap());
    for (a, s) in grads.iter().zip(&single) {
        assert!(a.max_abs_diff(s) < 1e-12);
    }
}

#[test]
fn separable_data_is_fit() {
    let data = generate_synthetic(&SynthParams {
        n_subjects: 20,
        n_nodes: 10,
        n_modules: 2,
        planted_size: 4,
        delta: 0.8,
        noise: 0.0,
        planted_edge_prob: Some(1.0),
        p_in: 0.3,
        p_out: 0.05,
        seed: 6,
        ..Default::default()
    })
    .unwrap();
    let idx: Vec<usize> = (0..data.len()).collect();
    let cfg = TrainConfig {
        epochs: 60,
        batch_size: Some(10),
        patience: None,
        optimizer: AdamConfig {
            lr: 5e-3,
            ..Default::default()
        },
        ..Default::default()
    };
    let out = train_fold(&data, &tiny_model(), &cfg, &idx, &[], 0).unwrap();
    let subjects: Vec<_> = data.subjects().iter().collect();
    assert_eq!(evaluate(&out.model, &subjects).unwrap().accuracy, 1.0);
}

#[test]
fn validation_split_is_stratified_and_disjoint() {
    let labels = vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
    let idx: Vec<usize> = (0..12).collect();
    let (train, val) = split_validation(&idx, &labels, 0.34, 9);
    assert_eq!(val.len(), 4);
    assert_eq!(val.iter().filter(|&&i| labels[i] == 1).count(), 2);
    assert!(train.iter().all(|i| !val.contains(i)));
    assert_eq!(train.len() + val.len(), 12);
    assert_eq!(
        split_validation(&idx, &labels, 0.0, 9).1,
        Vec::<usize>::new()
    );
}

#[test]
fn reconstruction_prediction_is_symmetric_and_bounded() {
    let data = tiny_data(7);
    let mut model = DmbnModel::new(tiny_model(), 8, 2, 0).unwrap();
    model.randomize(0, 0.5);
    let p = predicted_functional(&model, &data.subjects()[0]).unwrap();
    assert_eq!(p, p.transpose());
    assert!(p.as_slice().iter().all(|v| v.abs() < 1.0));
    let subjects: Vec<_> = data.subjects().iter().collect();
    let stats = reconstruction_stats(&model, &subjects).unwrap();
    assert!(stats.overall.abs() <= 1.0);
}

use super::*;
use crate::autodiff::{Mask, Tape};
use crate::graph::{generate_synthetic, SynthParams};
use rand::seq::SliceRandom;

fn small_config() -> ModelConfig {
    ModelConfig {
        hidden_dim: 6,
        heads: 2,
        pos_layers: 2,
        neg_layers: 1,
        head_hidden: vec![5],
        ..Default::default()
    }
}

fn graphs(n: usize, count: usize, seed: u64) -> Vec<BrainGraph> {
    let ds = generate_synthetic(&SynthParams {
        n_subjects: count.max(2),
        n_nodes: n,
        n_modules: 2,
        planted_size: 1,
        p_in: 0.7,
        p_out: 0.2,
        seed,
        ..Default::default()
    })
    .unwrap();
    ds.subjects()
        .iter()
        .map(|s| s.structural.clone())
        .take(count)
        .collect()
}

fn rand_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

#[test]
fn identical_features_give_uniform_attention() {
    let tape = Tape::new();
    let mask = Mask::from_fn(2, 2, |_, _| true);
    let h = tape.constant(Matrix::filled(2, 3, 0.7)).unwrap();
    let w = tape
        .constant(Matrix::from_fn(3, 2, |i, j| (i + j) as f64 * 0.3))
        .unwrap();
    let a = tape
        .constant(Matrix::column(&[0.4, -1.0, 2.0, 0.1]))
        .unwrap();
    let att = attention_scores(h, w, a, &mask, 0.2).unwrap().value();
    assert_eq!(att, Matrix::filled(2, 2, 0.5));
}

#[test]
fn single_neighbor_row_gets_full_weight() {
    let tape = Tape::new();
    let mask = Mask::from_fn(3, 3, |i, j| i == j || (i < 2 && j < 2));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = tape.constant(rand_matrix(3, 4, &mut rng)).unwrap();
    let w = tape.constant(rand_matrix(4, 2, &mut rng)).unwrap();
    let a = tape.constant(rand_matrix(4, 1, &mut rng)).unwrap();
    let att = attention_scores(h, w, a, &mask, 0.2).unwrap().value();
    assert_eq!(att.row(2), &[0.0, 0.0, 1.0]);
}

#[test]
fn attention_is_asymmetric_and_rows_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut asymmetric = 0;
    for _ in 0..10 {
        let tape = Tape::new();
        let mask = Mask::from_fn(3, 3, |_, _| true);
        let h = tape.constant(rand_matrix(3, 4, &mut rng)).unwrap();
        let w = tape.constant(rand_matrix(4, 3, &mut rng)).unwrap();
        let a = tape.constant(rand_matrix(6, 1, &mut rng)).unwrap();
        let att = attention_scores(h, w, a, &mask, 0.2).unwrap().value();
        for i in 0..3 {
            assert!((att.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        if (0..3).any(|i| (0..3).any(|j| (att[(i, j)] - att[(j, i)]).abs() > 1e-6)) {
            asymmetric += 1;
        }
    }
    assert!(asymmetric > 0);
}

fn aggregate_two_nodes(alpha: f64, beta: f64) -> Matrix {
    let tape = Tape::new();
    let weights = Matrix::from_rows(&[[0.0, 0.5], [0.5, 0.0]]).unwrap();
    let mask_values = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
    let threshold = mask_values.clone();
    let h = tape.constant(Matrix::column(&[1.0, 2.0])).unwrap();
    let att = tape
        .constant(Matrix::from_rows(&[[0.0, 0.6], [0.6, 0.0]]).unwrap())
        .unwrap();
    let alpha = tape.constant(Matrix::scalar(alpha)).unwrap();
    let beta = tape.constant(Matrix::scalar(beta)).unwrap();
    mgck_aggregate(h, att, alpha, beta, &weights, &threshold, &mask_values)
        .unwrap()
        .value()
}

#[test]
fn aggregate_hand_example() {
    // h_2 · (x + α) · (att + β·δ) = 2 · 1.5 · 1.6
    let agg = aggregate_two_nodes(1.0, 1.0);
    assert!((agg[(0, 0)] - 4.8).abs() < 1e-9);
    assert!((agg[(1, 0)] - 1.0 * 1.5 * 1.6).abs() < 1e-9);
}

#[test]
fn aggregate_without_mixers_is_attention_weighted_sum() {
    let agg = aggregate_two_nodes(0.0, 0.0);
    assert!((agg[(0, 0)] - 2.0 * 0.5 * 0.6).abs() < 1e-15);
}

#[test]
fn isolated_node_without_self_loop_aggregates_to_zero() {
    let g = BrainGraph::new(Matrix::zeros(3, 3)).unwrap();
    let cfg = ModelConfig {
        include_self: false,
        ..small_config()
    };
    let inputs = GraphInputs::new(&g, &cfg);
    let tape = Tape::new();
    let h = tape.constant(Matrix::filled(3, 2, 1.0)).unwrap();
    let att = tape.constant(inputs.uniform_attention.clone()).unwrap();
    let one = tape.constant(Matrix::scalar(1.0)).unwrap();
    let agg = mgck_aggregate(
        h,
        att,
        one,
        one,
        &inputs.weights,
        &inputs.threshold,
        &inputs.mask_values,
    )
    .unwrap()
    .value();
    assert_eq!(agg, Matrix::zeros(3, 2));
}

/// Hand-built single-head layer: F = F′ = F_out = 2.
fn single_head_layer(store: &mut ParamStore, rng: &mut ChaCha8Rng) -> MgckLayerParams {
    MgckLayerParams {
        heads: vec![MgckHeadParams {
            w: store.add("w", rand_matrix(2, 2, rng)),
            a: store.add("a", rand_matrix(4, 1, rng)),
            alpha: store.add("alpha", Matrix::scalar(0.7)),
            beta: store.add("beta", Matrix::scalar(1.3)),
        }],
        post_fc: store.add("post", Matrix::identity(2)),
        residual_proj: Some(store.add("res", Matrix::zeros(2, 2))),
    }
}

#[test]
fn single_head_layer_reduces_to_plain_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let layer = single_head_layer(&mut store, &mut rng);
    let g = &graphs(5, 1, 4)[0];
    let cfg = small_config();
    let inputs = GraphInputs::new(g, &cfg);

    let tape = Tape::new();
    let p = store.bind(&tape).unwrap();
    let h = tape.constant(rand_matrix(5, 2, &mut rng)).unwrap();
    let out = mgck_layer(h, &inputs, &layer, &p, &cfg).unwrap().value();

    let head = &layer.heads[0];
    let att = attention_scores(h, p[head.w], p[head.a], &inputs.mask, cfg.attention_slope).unwrap();
    let agg = mgck_aggregate(
        h,
        att,
        p[head.alpha],
        p[head.beta],
        &inputs.weights,
        &inputs.threshold,
        &inputs.mask_values,
    )
    .unwrap();
    let expected = agg.matmul(p[head.w]).unwrap().elu(1.0).unwrap().value();
    assert!(out.max_abs_diff(&expected) < 1e-12);
}

#[test]
fn concatenated_width_is_heads_times_head_dim() {
    let cfg = ModelConfig {
        hidden_dim: 12,
        heads: 3,
        ..small_config()
    };
    let model = DmbnModel::new(cfg.clone(), 7, 2, 0).unwrap();
    let layer = &model.encoder_pos.layers[0];
    assert_eq!(layer.heads.len(), 3);
    assert_eq!(model.params().get(layer.post_fc).shape(), [3 * 4, 12]);
    assert_eq!(model.params().get(layer.heads[0].w).shape(), [7, 4]);
}

fn random_perm(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

#[test]
fn mgck_layer_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = small_config();
    for (trial, g) in graphs(8, 10, 21).into_iter().enumerate() {
        let mut model = DmbnModel::new(cfg.clone(), 8, 2, trial as u64).unwrap();
        model.randomize(trial as u64, 0.5);
        let layer = &model.encoder_pos.layers[0];
        let perm = random_perm(8, &mut rng);
        let features = rand_matrix(8, 8, &mut rng);

        let run = |graph: &BrainGraph, feats: Matrix| {
            let tape = Tape::new();
            let p = model.params().bind(&tape).unwrap();
            let inputs = GraphInputs::new(graph, &cfg);
            let h = tape.constant(feats).unwrap();
            mgck_layer(h, &inputs, layer, &p, &cfg).unwrap().value()
        };
        let base = run(&g, features.clone());
        let permuted = run(&g.permuted(&perm), features.permute_rows(&perm));
        assert!(permuted.max_abs_diff(&base.permute_rows(&perm)) < 1e-9);
    }
}

#[test]
fn one_layer_encoder_equals_layer() {
    let cfg = ModelConfig {
        pos_layers: 1,
        ..small_config()
    };
    let mut model = DmbnModel::new(cfg.clone(), 6, 2, 1).unwrap();
    model.randomize(1, 0.5);
    let g = &graphs(6, 1, 2)[0];
    let inputs = model.inputs(g).unwrap();
    let tape = Tape::new();
    let p = model.params().bind(&tape).unwrap();
    let x = tape.constant(inputs.features.clone()).unwrap();
    let enc = encode(&inputs, &model.encoder_pos, &p, &cfg, x)
        .unwrap()
        .value();
    let layer = mgck_layer(x, &inputs, &model.encoder_pos.layers[0], &p, &cfg)
        .unwrap()
        .value();
    assert_eq!(enc, layer);
}

#[test]
fn default_positive_encoder_emits_128_features_deterministically() {
    let g = &graphs(10, 1, 3)[0];
    let model = DmbnModel::new(ModelConfig::default(), 10, 2, 4).unwrap();
    assert_eq!(model.encoder_pos.layers.len(), 5);
    assert_eq!(model.encoder_neg.layers.len(), 4);
    let run = || {
        let tape = Tape::new();
        let p = model.params().bind(&tape).unwrap();
        let inputs = model.inputs(g).unwrap();
        let x = tape.constant(inputs.features.clone()).unwrap();
        encode(&inputs, &model.encoder_pos, &p, model.config(), x)
            .unwrap()
            .value()
    };
    let a = run();
    assert_eq!(a.shape(), [10, 128]);
    assert_eq!(a, run());
}

#[test]
fn decoder_examples() {
    let tape = Tape::new();
    let zero = tape.constant(Matrix::zeros(2, 2)).unwrap();
    let h = tape
        .constant(Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap())
        .unwrap();
    assert_eq!(
        decode_edges(h, zero).unwrap().value(),
        Matrix::filled(2, 2, 0.5)
    );

    let theta = tape
        .constant(Matrix::from_rows(&[[0.0, 3f64.ln()], [3f64.ln(), 0.0]]).unwrap())
        .unwrap();
    let x = decode_edges(h, theta).unwrap().value();
    assert!((x[(0, 1)] - 0.75).abs() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let h = tape.constant(rand_matrix(7, 4, &mut rng)).unwrap();
        let raw = tape.constant(rand_matrix(4, 4, &mut rng)).unwrap();
        let x = decode_edges(h, symmetric_theta(raw).unwrap())
            .unwrap()
            .value();
        assert!(x.max_abs_diff(&x.transpose()) <= 1e-12);
        assert!(x.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

#[test]
fn classifier_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = small_config();
    let mut model = DmbnModel::new(cfg.clone(), 9, 3, 0).unwrap();
    model.randomize(2, 0.5);
    for _ in 0..10 {
        let hp = rand_matrix(9, 6, &mut rng);
        let hn = rand_matrix(9, 6, &mut rng);
        let perm = random_perm(9, &mut rng);
        let run = |hp: Matrix, hn: Matrix| {
            let tape = Tape::new();
            let p = model.params().bind(&tape).unwrap();
            let (logits, _) = classify(
                tape.constant(hp).unwrap(),
                tape.constant(hn).unwrap(),
                &model.head,
                &p,
                cfg.head_activation,
            )
            .unwrap();
            logits.value()
        };
        let a = run(hp.clone(), hn.clone());
        assert_eq!(a.shape(), [1, 3]);
        let b = run(hp.permute_rows(&perm), hn.permute_rows(&perm));
        assert!(a.max_abs_diff(&b) < 1e-9);
    }
}

#[test]
fn single_node_pooling_is_identity() {
    let cfg = small_config();
    let mut model = DmbnModel::new(cfg.clone(), 1, 2, 0).unwrap();
    model.randomize(3, 0.5);
    let tape = Tape::new();
    let p = model.params().bind(&tape).unwrap();
    let hp = tape
        .constant(Matrix::from_fn(1, 6, |_, j| j as f64 * 0.1))
        .unwrap();
    let hn = tape
        .constant(Matrix::from_fn(1, 6, |_, j| -(j as f64) * 0.2))
        .unwrap();
    let (logits, z) = classify(hp, hn, &model.head, &p, cfg.head_activation).unwrap();
    let expected = z.value().matmul_t(model.classifier_weights());
    assert_eq!(logits.value(), expected);
}

#[test]
fn full_model_on_single_node_graph() {
    let g = BrainGraph::new(Matrix::zeros(1, 1)).unwrap();
    let model = DmbnModel::new(small_config(), 1, 2, 0).unwrap();
    let tape = Tape::new();
    let p = model.params().bind(&tape).unwrap();
    let out = model.forward(&p, &model.inputs(&g).unwrap(), true).unwrap();
    assert_eq!(out.logits.shape(), [1, 2]);
    assert_eq!(out.recon_pos.unwrap().shape(), [1, 1]);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = DmbnModel::new(small_config(), 5, 2, 7).unwrap();
    model.randomize(7, 0.3);
    model
        .save(dir.path(), serde_json::json!({"fold": 1}))
        .unwrap();
    let (back, extra) = DmbnModel::load(dir.path()).unwrap();
    assert_eq!(back, model);
    assert_eq!(extra["fold"], 1);
}

#[test]
fn wrong_node_count_rejected() {
    let model = DmbnModel::new(small_config(), 5, 2, 7).unwrap();
    let g = BrainGraph::new(Matrix::zeros(4, 4)).unwrap();
    assert!(model.inputs(&g).is_err());
}

#[test]
fn config_checks() {
    let bad = ModelConfig {
        hidden_dim: 10,
        heads: 3,
        ..Default::default()
    };
    assert!(DmbnModel::new(bad, 4, 2, 0).is_err());
}

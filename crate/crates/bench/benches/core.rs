use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dmbn_core::graph::{generate_synthetic, SynthParams};
use dmbn_core::losses::LossWeights;
use dmbn_core::training::{average_ranks, batch_gradient, predicted_functional, prepare};
use dmbn_core::{DmbnModel, Matrix, ModelConfig, Tape};

fn scaled_model() -> ModelConfig {
    ModelConfig {
        hidden_dim: 32,
        heads: 2,
        head_hidden: vec![16],
        ..Default::default()
    }
}

fn matmul(c: &mut Criterion) {
    let a = Matrix::from_fn(128, 128, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
    let b = Matrix::from_fn(128, 128, |i, j| ((i + j * 5) % 13) as f64 * 0.1);
    c.bench_function("matmul 128", |bench| {
        bench.iter(|| black_box(&a).matmul(black_box(&b)))
    });
}

fn synth(c: &mut Criterion) {
    let params = SynthParams {
        n_subjects: 20,
        ..Default::default()
    };
    c.bench_function("synthesize 20 subjects", |bench| {
        bench.iter(|| generate_synthetic(black_box(&params)).unwrap())
    });
}

fn model_passes(c: &mut Criterion) {
    let data = generate_synthetic(&SynthParams {
        n_subjects: 4,
        ..Default::default()
    })
    .unwrap();
    let model = DmbnModel::new(scaled_model(), data.n_nodes(), 2, 0).unwrap();
    let subject = &data.subjects()[0];
    let inputs = model.inputs(&subject.structural).unwrap();
    c.bench_function("forward dim 32", |bench| {
        bench.iter(|| {
            let tape = Tape::new();
            let params = model.params().bind(&tape).unwrap();
            model
                .forward(&params, &inputs, true)
                .unwrap()
                .logits
                .value()
        })
    });

    let subjects: Vec<_> = data.subjects().iter().take(1).collect();
    let prepared = prepare(&model, &subjects, 0.0).unwrap();
    let refs: Vec<_> = prepared.iter().collect();
    let weights = LossWeights::default();
    c.bench_function("subject gradient dim 32", |bench| {
        bench.iter(|| batch_gradient(&model, black_box(&refs), &weights).unwrap())
    });
    c.bench_function("decode functional dim 32", |bench| {
        bench.iter(|| predicted_functional(&model, black_box(subject)).unwrap())
    });
}

fn ranks(c: &mut Criterion) {
    let values: Vec<f64> = (0..50_000)
        .map(|i| ((i * 7919) % 1000) as f64 * 0.001)
        .collect();
    c.bench_function("average ranks 50k", |bench| {
        bench.iter(|| average_ranks(black_box(&values)))
    });
}

criterion_group!(benches, matmul, synth, model_passes, ranks);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use steplab::optim::{apply_step, train, BatchMode};
use steplab::problems::{make_dataset, make_quadratic, mlp_eval_grad, Activation};
use steplab::{HyperParams, MlpModel, MlpProblem, MomentumState, PhaseSpec, Problem, ScheduleSpec, TrainConfig};

fn momentum_step(c: &mut Criterion) {
    let hp = HyperParams::new(1e-3, 0.9, 1e-4).unwrap();
    let grad: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
    c.bench_function("momentum_step/10k", |b| {
        b.iter_batched_ref(
            || MomentumState::new(vec![1.0; 10_000]),
            |s| apply_step(s, black_box(&grad), &hp).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn quadratic_eval(c: &mut Criterion) {
    let p = make_quadratic(100, 1e5, 0).unwrap();
    let w = p.initial_point(1);
    c.bench_function("quadratic_eval_grad/d100", |b| b.iter(|| p.eval_grad(black_box(&w), None).unwrap()));
}

fn mlp_eval(c: &mut Criterion) {
    let data = make_dataset("two_moons", 512, 0.15, 7).unwrap();
    let model = MlpModel::new(vec![2, 32, 32, 2], Activation::Tanh).unwrap();
    let w = model.init(1);
    let batch: Vec<usize> = (0..32).collect();
    let all: Vec<usize> = (0..data.len()).collect();
    c.bench_function("mlp_eval_grad/batch32", |b| {
        b.iter(|| mlp_eval_grad(&model, black_box(&w), &data, &batch).unwrap())
    });
    c.bench_function("mlp_eval_grad/full512", |b| {
        b.iter(|| mlp_eval_grad(&model, black_box(&w), &data, &all).unwrap())
    });
}

fn short_train(c: &mut Criterion) {
    let q = make_quadratic(100, 1e5, 0).unwrap();
    let spec = ScheduleSpec::single(PhaseSpec::full_batch(HyperParams::new(0.5 / q.lambda_max(), 0.9, 0.0).unwrap()));
    let cfg = TrainConfig::iterations(1000, 0);
    c.bench_function("train/quadratic_d100_1000it", |b| b.iter(|| train(&q, &spec, &cfg).unwrap()));

    let data = make_dataset("two_moons", 512, 0.15, 7).unwrap();
    let p = MlpProblem::new(MlpModel::new(vec![2, 32, 32, 2], Activation::Tanh).unwrap(), data).unwrap();
    let spec = ScheduleSpec::single(PhaseSpec {
        hyper: HyperParams::new(0.05, 0.9, 0.0).unwrap(),
        batch: BatchMode::MiniBatch { size: 32 },
    });
    let cfg = TrainConfig::epochs(5, 0);
    c.bench_function("train/mlp_two_moons_5ep", |b| b.iter(|| train(&p, &spec, &cfg).unwrap()));
}

criterion_group!(benches, momentum_step, quadratic_eval, mlp_eval, short_train);
criterion_main!(benches);

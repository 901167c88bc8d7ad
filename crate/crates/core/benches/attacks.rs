use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tga::attack::{AttackConfig, Method};
use tga::ddne::{train_on, DdneHyper, DdneModel, Optimizer, TrainingData};
use tga::dynnet::{edge_betweenness, Adjacency};
use tga::evalharness::{attack_all, generate_synthetic, select_targets, split, SyntheticSpec, TargetSelection, Strategy};
use tga::Parallelism;

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn setup() -> (DdneModel, Vec<Adjacency>, Adjacency) {
    let net = generate_synthetic(&SyntheticSpec {
        nodes: 60,
        density: 0.15,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let s = split(&net, 2, &[0]).unwrap();
    let truth = s.targets[0].1.clone();
    let hyper = DdneHyper {
        optimizer: Optimizer::Adam,
        learning_rate: 0.001,
        epochs: 100,
        batch_size: 60,
        ..DdneHyper::default()
    };
    let model = train_on(&TrainingData::new(s.window.clone(), truth.clone()), &hyper).unwrap().model;
    (model, s.window, truth)
}

fn bench(c: &mut Criterion) {
    let (model, window, truth) = setup();
    let probs = model.predict_all(&window, Parallelism::Parallel).unwrap();
    let recent = window.last().unwrap();
    let targets = select_targets(
        &probs,
        &truth,
        recent,
        TargetSelection {
            strategy: Strategy::HighestProbability,
            top_k: 16,
        },
        0.5,
        Parallelism::Parallel,
    )
    .unwrap();

    let mut g = c.benchmark_group("predict_all");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| model.predict_all(black_box(&window), mode).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("edge_betweenness");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| edge_betweenness(black_box(recent), mode))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("attack_all");
    g.sample_size(10);
    for method in [Method::TgaGre, Method::Fga] {
        for (name, mode) in MODES {
            let config = AttackConfig {
                budget: 5,
                parallelism: mode,
                ..AttackConfig::default()
            };
            g.bench_with_input(BenchmarkId::new(method.name(), name), &config, |b, config| {
                b.iter(|| attack_all(&model, &window, black_box(&targets), method, config, false).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);

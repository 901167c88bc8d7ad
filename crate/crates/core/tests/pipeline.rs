use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tga::attack::{AttackConfig, Method};
use tga::ddne::{DdneHyper, Optimizer};
use tga::dynnet::{ingest_edge_list, SnapshotSpec};
use tga::evalharness::{
    read_json, run_experiment, run_history_sweep, write_json, ExperimentPlan, Strategy, TargetSelection,
};
use tga::Parallelism;

/// Twelve users in two teams mailing mostly within the team, five periods of 100 s.
fn edge_list() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut text = String::from("% sender receiver weight time\n");
    for u in 1..=12 {
        writeln!(text, "{u} {} 1 {}", u % 12 + 1, 10 + u).unwrap();
    }
    for t in (100..600).step_by(2) {
        let u: u32 = rng.random_range(1..=12);
        let team = (u - 1) / 6;
        let v = team * 6 + rng.random_range(1..=6);
        if u != v {
            writeln!(text, "{u} {v} 1 {t}").unwrap();
        }
    }
    text
}

fn plan(parallelism: Parallelism) -> ExperimentPlan {
    ExperimentPlan {
        dataset: "teams".into(),
        hyper: DdneHyper {
            hidden_dim: 4,
            decoder_hidden: vec![8],
            optimizer: Optimizer::Adam,
            learning_rate: 0.01,
            epochs: 60,
            batch_size: 12,
            ..DdneHyper::default()
        },
        attack: AttackConfig {
            budget: 3,
            parallelism,
            ..AttackConfig::default()
        },
        selections: vec![
            TargetSelection {
                strategy: Strategy::HighestProbability,
                top_k: 4,
            },
            TargetSelection {
                strategy: Strategy::HighestBetweenness,
                top_k: 4,
            },
        ],
        methods: Method::ALL.to_vec(),
        horizons: vec![0, 1],
        record_timings: false,
    }
}

#[test]
fn ingest_train_attack_report() {
    let spec = SnapshotSpec {
        observe_start: 0,
        focus_window_end: 100,
        observe_end: 600,
        num_snapshots: 5,
        symmetrize: false,
    };
    let net = ingest_edge_list(edge_list().as_bytes(), &spec).unwrap();
    assert_eq!(net.node_count(), 12);
    assert_eq!(net.num_snapshots(), 5);

    let seq = run_experiment(&net, &plan(Parallelism::Sequential)).unwrap();
    let par = run_experiment(&net, &plan(Parallelism::Parallel)).unwrap();
    assert_eq!(seq, par);
    // five methods x two strategies x two horizons
    assert_eq!(seq.len(), 20);
    for r in &seq {
        assert!((0.0..=1.0).contains(&r.asr));
        assert!(r.aml >= 1.0 && r.aml <= 3.0);
        assert!(r.records.iter().all(|t| t.flips.len() <= 3));
    }

    let mut a = Vec::new();
    write_json(&seq, &mut a).unwrap();
    let mut b = Vec::new();
    write_json(&par, &mut b).unwrap();
    assert_eq!(a, b);
    assert_eq!(read_json(&a).unwrap(), seq);
}

#[test]
fn history_sweep_labels_each_length() {
    let spec = SnapshotSpec {
        observe_start: 0,
        focus_window_end: 100,
        observe_end: 600,
        num_snapshots: 5,
        symmetrize: false,
    };
    let net = ingest_edge_list(edge_list().as_bytes(), &spec).unwrap();
    let p = ExperimentPlan {
        methods: vec![Method::TgaGre],
        horizons: vec![0],
        selections: vec![TargetSelection {
            strategy: Strategy::HighestProbability,
            top_k: 3,
        }],
        ..plan(Parallelism::Parallel)
    };
    let reports = run_history_sweep(&net, &p, &[2, 3]).unwrap();
    let lengths: Vec<usize> = reports.iter().map(|r| r.history_length).collect();
    assert_eq!(lengths, vec![2, 3]);
    for r in &reports {
        assert!(r.records.iter().all(|t| t.gradient_evals <= 3));
    }
}

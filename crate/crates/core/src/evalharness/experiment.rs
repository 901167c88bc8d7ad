use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::report::{AttackReport, ReportMeta, TargetRecord};
use super::select::{select_targets, TargetSelection};
use super::EvalError;
use crate::attack::{self, AttackConfig, AttackError, Method};
use crate::ddne::{train_on, DdneHyper, DdneModel, TrainingData};
use crate::diffcomp::Matrix;
use crate::dynnet::{Adjacency, DynamicNetwork};
use crate::par;
use crate::rng::{self, Stream};

/// Everything run_experiment needs besides the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset: String,
    pub hyper: DdneHyper,
    pub attack: AttackConfig,
    pub selections: Vec<TargetSelection>,
    pub methods: Vec<Method>,
    /// Target offsets past the next snapshot; `[0]` is plain next-snapshot prediction.
    pub horizons: Vec<usize>,
    /// Keep per-target wall time in reports. Off gives byte-identical reports.
    pub record_timings: bool,
}

/// Input window and per-horizon targets shared by all horizons of a plan.
///
/// With `S` snapshots, history length `N` and largest horizon `H`, the window
/// is snapshots `[S-1-H-N, S-1-H)` and horizon `h` targets snapshot `S-1-H+h`.
#[derive(Clone, Debug)]
pub struct Split {
    pub window: Vec<Adjacency>,
    pub targets: Vec<(usize, Adjacency)>,
}

pub fn split(net: &DynamicNetwork, history_length: usize, horizons: &[usize]) -> Result<Split, EvalError> {
    if horizons.is_empty() {
        return Err(EvalError::Spec("horizon list is empty".into()));
    }
    let h_max = *horizons.iter().max().expect("non-empty");
    let s = net.num_snapshots();
    let needed = history_length + h_max + 1;
    if s < needed {
        return Err(EvalError::Spec(format!(
            "history length {history_length} with horizon {h_max} needs {needed} snapshots, network has {s}"
        )));
    }
    let end = s - 1 - h_max;
    Ok(Split {
        window: net.snapshots()[end - history_length..end].to_vec(),
        targets: horizons
            .iter()
            .map(|&h| (h, net.snapshots()[end + h].clone()))
            .collect(),
    })
}

/// Trains one model per horizon and attacks it.
pub fn run_experiment(net: &DynamicNetwork, plan: &ExperimentPlan) -> Result<Vec<AttackReport>, EvalError> {
    run_experiment_with(net, plan, |_, data| Ok(train_on(data, &plan.hyper)?.model))
}

/// As [`run_experiment`], with `model_for(horizon, data)` supplying each horizon's model.
pub fn run_experiment_with<F>(net: &DynamicNetwork, plan: &ExperimentPlan, mut model_for: F) -> Result<Vec<AttackReport>, EvalError>
where
    F: FnMut(usize, &TrainingData) -> Result<DdneModel, EvalError>,
{
    plan.hyper.validate()?;
    plan.attack.validate()?;
    if plan.methods.is_empty() || plan.selections.is_empty() {
        return Err(EvalError::Spec("method and selection lists must be non-empty".into()));
    }
    let split = split(net, plan.hyper.history_length, &plan.horizons)?;
    let recent = split.window.last().expect("history length >= 2");
    let mut reports = Vec::new();
    for (h, truth) in &split.targets {
        let data = TrainingData::new(split.window.clone(), truth.clone());
        let model = model_for(*h, &data)?;
        if model.node_count() != net.node_count() || model.history_length() != plan.hyper.history_length {
            return Err(EvalError::Incompatible(format!(
                "model over {} nodes and {} snapshots, data has {} nodes and history length {}",
                model.node_count(),
                model.history_length(),
                net.node_count(),
                plan.hyper.history_length
            )));
        }
        let probs = model.predict_all(&split.window, plan.attack.parallelism)?;
        for &selection in &plan.selections {
            let targets = select_targets(&probs, truth, recent, selection, plan.attack.threshold, plan.attack.parallelism)?;
            for &method in &plan.methods {
                let records = attack_all(&model, &split.window, &targets, method, &plan.attack, plan.record_timings)?;
                let meta = ReportMeta {
                    dataset: plan.dataset.clone(),
                    method,
                    strategy: selection.strategy,
                    horizon: *h,
                    history_length: plan.hyper.history_length,
                    budget: plan.attack.budget,
                    add_only: plan.attack.add_only,
                };
                let mut report = AttackReport::new(meta, records)?;
                for r in &mut report.records {
                    r.target.horizon = *h;
                }
                log::info!(
                    "{} {} h={} N={}: asr {:.3} aml {:.3}",
                    method,
                    selection.strategy,
                    h,
                    plan.hyper.history_length,
                    report.asr,
                    report.aml
                );
                reports.push(report);
            }
        }
    }
    Ok(reports)
}

/// Repeats the experiment for each history length.
pub fn run_history_sweep(
    net: &DynamicNetwork,
    plan: &ExperimentPlan,
    history_lengths: &[usize],
) -> Result<Vec<AttackReport>, EvalError> {
    let mut out = Vec::new();
    for &len in history_lengths {
        let plan = ExperimentPlan {
            hyper: DdneHyper {
                history_length: len,
                ..plan.hyper.clone()
            },
            ..plan.clone()
        };
        out.extend(run_experiment(net, &plan)?);
    }
    Ok(out)
}

/// Attacks every target independently; target `t` uses random stream `t`.
pub fn attack_all(
    model: &DdneModel,
    window: &[Adjacency],
    targets: &[attack::TargetLink],
    method: Method,
    config: &AttackConfig,
    record_timings: bool,
) -> Result<Vec<TargetRecord>, EvalError> {
    let recent = window.last().ok_or_else(|| EvalError::Argument("empty window".into()))?;
    let indexed: Vec<(usize, attack::TargetLink)> = targets.iter().copied().enumerate().collect();
    let results = par::map(config.parallelism, &indexed, |&(idx, t)| {
        let history = crate::dynnet::NodeHistory::new(t.i, window.iter().map(|a| a.row(t.i).to_vec()).collect())?;
        let started = Instant::now();
        let result = attack::run(method, model, recent, &history, t, config, idx as u64);
        log::debug!("{method} ({}, {}) in {:?}", t.i, t.j, started.elapsed());
        let (outcome, exhausted) = match result {
            Ok(o) => (o, false),
            Err(AttackError::Exhausted(o)) => (*o, true),
            Err(e) => return Err(EvalError::from(e)),
        };
        Ok(TargetRecord::from_outcome(&outcome, exhausted, record_timings))
    });
    results.into_iter().collect()
}

/// Area under the ROC curve of `probs` separating the links of `truth` from an
/// equal number of non-links drawn with the targets stream of `seed`.
pub fn link_auc(probs: &Matrix, truth: &Adjacency, seed: u64) -> Result<f64, EvalError> {
    let n = truth.n();
    let links: Vec<f64> = truth.edges().map(|(i, j)| probs.get(i, j)).collect();
    let mut non: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && !truth.get(i, j))
        .collect();
    if links.is_empty() || non.is_empty() {
        return Err(EvalError::Argument("AUC needs both links and non-links".into()));
    }
    let mut rng = rng::stream(seed, Stream::Targets, 0);
    let take = links.len().min(non.len());
    for x in 0..take {
        let y = rng.random_range(x..non.len());
        non.swap(x, y);
    }
    let negatives: Vec<f64> = non[..take].iter().map(|&(i, j)| probs.get(i, j)).collect();
    let mut wins = 0.0;
    for &p in &links {
        for &q in &negatives {
            wins += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(wins / (links.len() * negatives.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalharness::{generate_synthetic, Strategy, SyntheticSpec};

    #[test]
    fn split_windows_and_targets() {
        let snaps: Vec<Adjacency> = (0..6).map(|k| Adjacency::from_edges(4, [(0, (k % 3) + 1)])).collect();
        let net = DynamicNetwork::unlabeled(snaps.clone()).unwrap();
        let s = split(&net, 2, &[0]).unwrap();
        assert_eq!(s.window, snaps[3..5].to_vec());
        assert_eq!(s.targets, vec![(0, snaps[5].clone())]);
        let s = split(&net, 2, &[0, 2]).unwrap();
        assert_eq!(s.window, snaps[1..3].to_vec());
        assert_eq!(s.targets[0].1, snaps[3]);
        assert_eq!(s.targets[1].1, snaps[5]);
        assert!(matches!(split(&net, 3, &[3]), Err(EvalError::Spec(_))));
    }

    #[test]
    fn auc_of_perfect_and_constant_scores() {
        let truth = Adjacency::from_edges(4, [(0, 1), (1, 2)]);
        let mut perfect = Matrix::zeros(4, 4);
        perfect.set(0, 1, 0.9);
        perfect.set(1, 2, 0.8);
        assert_eq!(link_auc(&perfect, &truth, 0).unwrap(), 1.0);
        assert_eq!(link_auc(&Matrix::filled(4, 4, 0.5), &truth, 0).unwrap(), 0.5);
    }

    #[test]
    fn small_experiment_is_deterministic_and_bounded() {
        let net = generate_synthetic(&SyntheticSpec {
            nodes: 16,
            density: 0.2,
            seed: 1,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let plan = ExperimentPlan {
            dataset: "toy".into(),
            hyper: DdneHyper {
                hidden_dim: 4,
                decoder_hidden: vec![16],
                epochs: 60,
                batch_size: 16,
                optimizer: crate::ddne::Optimizer::Adam,
                ..DdneHyper::default()
            },
            attack: AttackConfig {
                budget: 4,
                ..AttackConfig::default()
            },
            selections: vec![TargetSelection {
                strategy: Strategy::HighestProbability,
                top_k: 5,
            }],
            methods: vec![Method::TgaGre, Method::Fga, Method::Ra],
            horizons: vec![0],
            record_timings: false,
        };
        let a = run_experiment(&net, &plan).unwrap();
        let b = run_experiment(&net, &plan).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        for r in &a {
            assert!((0.0..=1.0).contains(&r.asr));
            assert!(r.aml >= 1.0 && r.aml <= 4.0);
            for rec in &r.records {
                assert!(rec.flips.len() <= 4);
                assert_eq!(rec.q == 4 && !rec.success, !rec.success);
                let bound = match r.method {
                    Method::TgaGre => 4 * 2,
                    Method::Fga => 4,
                    _ => 0,
                };
                assert!(rec.gradient_evals <= bound);
            }
        }
    }
}

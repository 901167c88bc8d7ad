use std::collections::HashSet;
use std::time::Instant;

use super::gradient::{one_step_attack, time_aware_gradient};
use super::{outcome, AdversarialExample, AttackConfig, AttackError, AttackOutcome, Flip, Method, Progress, TargetLink};
use crate::ddne::DdneModel;
use crate::dynnet::NodeHistory;
use crate::par;

/// Greedy time-aware gradient attack.
///
/// Each iteration takes one gradient on the current example, proposes the
/// top-1 flip of every snapshot, and keeps the proposal with the lowest `p_ij`.
pub fn tga_gre(
    model: &DdneModel,
    history: &NodeHistory,
    target: TargetLink,
    config: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    let mut run = Progress::start(model, history, target, config)?;
    let mut exhausted = false;
    for _ in 0..config.budget {
        let g = time_aware_gradient(model, &run.current.base, target)?;
        run.gradient_evals += 1;
        let touched = run.current.touched();
        let mut best: Option<(Flip, NodeHistory, f64)> = None;
        for k in 0..history.len() {
            for flip in one_step_attack(&run.current.base, &g, k, 1, config.add_only, &touched) {
                let mut h = run.current.base.clone();
                flip.apply(&mut h);
                let p = model.link_probability(&h, target.j)?;
                run.forward_evals += 1;
                if best.as_ref().is_none_or(|b| p < b.2) {
                    best = Some((flip, h, p));
                }
            }
        }
        let Some((flip, h, p)) = best else {
            exhausted = true;
            break;
        };
        run.accept(flip, h, p);
        if config.early_stop && p <= config.threshold {
            break;
        }
    }
    run.finish(target, Method::TgaGre, config, exhausted)
}

/// Fast gradient attack: per iteration, flips the untouched cell with the
/// largest `|g|` over all snapshots jointly (ties by ascending `(k, v)`).
pub fn fga(
    model: &DdneModel,
    history: &NodeHistory,
    target: TargetLink,
    config: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    let mut run = Progress::start(model, history, target, config)?;
    let i = history.node();
    let mut exhausted = false;
    for _ in 0..config.budget {
        let g = time_aware_gradient(model, &run.current.base, target)?;
        run.gradient_evals += 1;
        let touched = run.current.touched();
        let cur = &run.current.base;
        let mut best: Option<(usize, usize, f64)> = None;
        for k in 0..cur.len() {
            for v in 0..cur.width() {
                if v == i || touched.contains(&(k, v)) || (config.add_only && cur.get(k, v)) {
                    continue;
                }
                let m = g.get(k, v).abs();
                if best.is_none_or(|b| m > b.2) {
                    best = Some((k, v, m));
                }
            }
        }
        let Some((k, v, _)) = best else {
            exhausted = true;
            break;
        };
        let flip = Flip::toggle(cur, k, v);
        let p = run.apply(model, target.j, flip)?;
        if config.early_stop && p <= config.threshold {
            break;
        }
    }
    run.finish(target, Method::Fga, config, exhausted)
}

#[derive(Clone)]
struct Node {
    example: AdversarialExample,
    trajectory: Vec<f64>,
}

/// Traversal time-aware gradient attack.
///
/// Expands every candidate at every depth: a fresh gradient per candidate,
/// then the top `m` flips of each snapshot. Returns the lowest-`p_ij`
/// candidate seen at any depth, or with early stopping the best candidate of
/// the first depth that reaches the threshold.
pub fn tga_tra(
    model: &DdneModel,
    history: &NodeHistory,
    target: TargetLink,
    config: &AttackConfig,
) -> Result<AttackOutcome, AttackError> {
    let start = Progress::start(model, history, target, config)?;
    let started: Instant = start.started;
    let p_before = start.p_before;
    let mut gradient_evals = 0;
    let mut forward_evals = start.forward_evals;
    let mut frontier = vec![Node {
        example: start.current,
        trajectory: Vec::new(),
    }];
    let mut best: Option<Node> = None;
    let big_n = history.len();
    let m = config.candidate_width;
    let mut ran_out = false;

    for _depth in 1..=config.budget {
        let needed = frontier.len().saturating_mul(big_n).saturating_mul(m);
        if needed > config.max_candidates {
            return Err(AttackError::Resource {
                needed,
                cap: config.max_candidates,
            });
        }
        let expanded = par::map(config.parallelism, &frontier, |node| -> Result<Vec<Node>, AttackError> {
            let g = time_aware_gradient(model, &node.example.base, target)?;
            let touched: HashSet<(usize, usize)> = node.example.touched();
            let mut children = Vec::new();
            for k in 0..big_n {
                for flip in one_step_attack(&node.example.base, &g, k, m, config.add_only, &touched) {
                    let mut h = node.example.base.clone();
                    flip.apply(&mut h);
                    let p = model.link_probability(&h, target.j)?;
                    let mut flips = node.example.flips.clone();
                    flips.push(flip);
                    let mut trajectory = node.trajectory.clone();
                    trajectory.push(p);
                    children.push(Node {
                        example: AdversarialExample { base: h, flips, p },
                        trajectory,
                    });
                }
            }
            Ok(children)
        });
        gradient_evals += frontier.len();
        let mut next = Vec::new();
        for children in expanded {
            next.extend(children?);
        }
        forward_evals += next.len();
        if next.is_empty() {
            ran_out = true;
            break;
        }
        if let Some(w) = config.beam_width {
            next.sort_by(|a, b| a.example.p.total_cmp(&b.example.p));
            next.truncate(w);
        }
        let depth_best = next
            .iter()
            .reduce(|a, b| if b.example.p < a.example.p { b } else { a })
            .expect("non-empty")
            .clone();
        let reached = depth_best.example.p <= config.threshold;
        if best.as_ref().is_none_or(|b| depth_best.example.p < b.example.p) {
            best = Some(depth_best.clone());
        }
        if config.early_stop && reached {
            best = Some(depth_best);
            break;
        }
        frontier = next;
    }

    let (example, trajectory) = match best {
        Some(b) => (b.example, b.trajectory),
        None => (
            AdversarialExample {
                base: history.clone(),
                flips: Vec::new(),
                p: p_before,
            },
            Vec::new(),
        ),
    };
    let out = outcome(
        target,
        Method::TgaTra,
        config,
        example,
        p_before,
        trajectory,
        gradient_evals,
        forward_evals,
        started.elapsed(),
    );
    if ran_out && !out.success {
        Err(AttackError::Exhausted(Box::new(out)))
    } else {
        Ok(out)
    }
}

//! Time-aware gradient attacks on a trained DDNE model and the baselines they
//! are compared against.
//!
//! Every attack perturbs the history `S(i,:)` of the target's owner `i`: the
//! `N x n` block of node `i`'s rows across the input snapshots. A flip toggles
//! one cell `(k, v)`; each cell is flipped at most once per attack, `v = i` is
//! never touched, and the flip direction follows the current link status.

mod baseline;
mod gradient;
mod search;

pub use baseline::{cna, ra};
pub use gradient::{one_step_attack, target_loss, time_aware_gradient, GradientTensor};
pub use search::{fga, tga_gre, tga_tra};

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ddne::{DdneModel, ModelError};
use crate::dynnet::{Adjacency, NodeHistory};
use crate::par::Parallelism;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid attack configuration: {0}")]
    Config(String),
    #[error("target ({i}, {j}) is not predicted before the attack (p = {p})")]
    NotPredicted { i: usize, j: usize, p: f64 },
    /// The budget could not be spent; carries what was achieved.
    #[error("no eligible cells left after {} flips", .0.example.flips.len())]
    Exhausted(Box<AttackOutcome>),
    #[error(
        "traversal search needs {needed} candidates, cap is {cap}; \
         reduce candidate_width or budget, or set beam_width"
    )]
    Resource { needed: usize, cap: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<crate::diffcomp::DiffError> for AttackError {
    fn from(e: crate::diffcomp::DiffError) -> Self {
        AttackError::Model(e.into())
    }
}

impl AttackError {
    /// The outcome of an attack that ran, whether or not it spent its budget.
    pub fn into_outcome(self) -> Result<AttackOutcome, AttackError> {
        match self {
            AttackError::Exhausted(o) => Ok(*o),
            e => Err(e),
        }
    }
}

/// The link `(i, j)` whose prediction is attacked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TargetLink {
    pub i: usize,
    pub j: usize,
    /// Offset of the target snapshot past the next one.
    #[serde(default)]
    pub horizon: usize,
}

impl TargetLink {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j, horizon: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Add,
    Remove,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Add => "add",
            Direction::Remove => "remove",
        })
    }
}

/// Toggle of cell `(k, v)` of the owner's history.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flip {
    pub k: usize,
    pub v: usize,
    pub direction: Direction,
}

impl Flip {
    /// The flip that toggles `(k, v)` given its current value.
    pub fn toggle(history: &NodeHistory, k: usize, v: usize) -> Self {
        let direction = if history.get(k, v) {
            Direction::Remove
        } else {
            Direction::Add
        };
        Self { k, v, direction }
    }

    /// Applies the flip, checking that its direction matches the cell.
    pub fn apply(&self, history: &mut NodeHistory) {
        let was = history.get(self.k, self.v);
        assert_eq!(was, self.direction == Direction::Remove, "flip {self:?} does not match the cell");
        history.flip(self.k, self.v);
    }
}

/// A perturbed history, the flips that produced it, and the resulting probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialExample {
    pub base: NodeHistory,
    pub flips: Vec<Flip>,
    pub p: f64,
}

impl AdversarialExample {
    /// Replays the flips on `original`; equals `base` for every valid example.
    pub fn replay(&self, original: &NodeHistory) -> NodeHistory {
        let mut h = original.clone();
        for f in &self.flips {
            f.apply(&mut h);
        }
        h
    }

    pub(crate) fn touched(&self) -> HashSet<(usize, usize)> {
        self.flips.iter().map(|f| (f.k, f.v)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    /// Maximum number of flips per target.
    pub budget: usize,
    /// Cells expanded per snapshot by traversal search.
    pub candidate_width: usize,
    /// Only add links.
    pub add_only: bool,
    /// Stop as soon as the target probability falls to the threshold.
    pub early_stop: bool,
    pub threshold: f64,
    pub seed: u64,
    /// Additions made by CNA and RA (the rest of the budget are removals); capped at `budget`.
    pub adds: usize,
    /// Hard cap on the traversal candidate set.
    pub max_candidates: usize,
    /// Keep only the best `w` traversal candidates per depth.
    pub beam_width: Option<usize>,
    pub parallelism: Parallelism,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            budget: 10,
            candidate_width: 5,
            add_only: false,
            early_stop: true,
            threshold: 0.5,
            seed: 0,
            adds: 5,
            max_candidates: 200_000,
            beam_width: None,
            parallelism: Parallelism::default(),
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        let fail = |m: &str| Err(AttackError::Config(m.into()));
        if self.budget == 0 {
            return fail("budget must be at least 1");
        }
        if self.candidate_width == 0 {
            return fail("candidate_width must be at least 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail("threshold must lie in (0, 1)");
        }
        if self.beam_width == Some(0) {
            return fail("beam_width must be positive");
        }
        Ok(())
    }

    /// Number of additions for CNA/RA: the whole budget in add-only mode.
    pub fn effective_adds(&self) -> usize {
        if self.add_only {
            self.budget
        } else {
            self.adds.min(self.budget)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TgaTra,
    TgaGre,
    Fga,
    Cna,
    Ra,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::TgaTra, Method::TgaGre, Method::Fga, Method::Cna, Method::Ra];

    pub fn name(self) -> &'static str {
        match self {
            Method::TgaTra => "tga-tra",
            Method::TgaGre => "tga-gre",
            Method::Fga => "fga",
            Method::Cna => "cna",
            Method::Ra => "ra",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| AttackError::Config(format!("unknown method {s:?}")))
    }
}

/// Result of attacking one target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub target: TargetLink,
    pub method: Method,
    pub example: AdversarialExample,
    pub p_before: f64,
    /// Probability after each accepted flip.
    pub trajectory: Vec<f64>,
    pub success: bool,
    /// Flips needed to reach the threshold; the budget when the attack failed.
    pub q: usize,
    pub gradient_evals: usize,
    pub forward_evals: usize,
    #[serde(with = "duration_ms")]
    pub elapsed: Duration,
}

impl AttackOutcome {
    pub fn p_after(&self) -> f64 {
        self.example.p
    }
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1e3)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Duration::try_from_secs_f64(ms / 1e3).map_err(serde::de::Error::custom)
    }
}

/// Counters and path shared by the sequential attacks.
pub(crate) struct Progress {
    pub current: AdversarialExample,
    pub p_before: f64,
    pub trajectory: Vec<f64>,
    pub gradient_evals: usize,
    pub forward_evals: usize,
    pub started: std::time::Instant,
}

impl Progress {
    pub fn start(
        model: &DdneModel,
        history: &NodeHistory,
        target: TargetLink,
        config: &AttackConfig,
    ) -> Result<Self, AttackError> {
        let started = std::time::Instant::now();
        config.validate()?;
        if target.i != history.node() || target.i == target.j || target.j >= history.width() {
            return Err(AttackError::Config(format!(
                "target ({}, {}) does not fit the history of node {}",
                target.i,
                target.j,
                history.node()
            )));
        }
        let p = model.link_probability(history, target.j)?;
        if p <= config.threshold {
            return Err(AttackError::NotPredicted {
                i: target.i,
                j: target.j,
                p,
            });
        }
        Ok(Self {
            current: AdversarialExample {
                base: history.clone(),
                flips: Vec::new(),
                p,
            },
            p_before: p,
            trajectory: Vec::new(),
            gradient_evals: 0,
            forward_evals: 1,
            started,
        })
    }

    pub fn accept(&mut self, flip: Flip, base: NodeHistory, p: f64) {
        self.current.flips.push(flip);
        self.current.base = base;
        self.current.p = p;
        self.trajectory.push(p);
    }

    /// Applies `flip` to the current example and evaluates it.
    pub fn apply(&mut self, model: &DdneModel, j: usize, flip: Flip) -> Result<f64, AttackError> {
        let mut h = self.current.base.clone();
        flip.apply(&mut h);
        let p = model.link_probability(&h, j)?;
        self.forward_evals += 1;
        self.accept(flip, h, p);
        Ok(p)
    }

    pub fn finish(
        self,
        target: TargetLink,
        method: Method,
        config: &AttackConfig,
        exhausted: bool,
    ) -> Result<AttackOutcome, AttackError> {
        let outcome = outcome(
            target,
            method,
            config,
            self.current,
            self.p_before,
            self.trajectory,
            self.gradient_evals,
            self.forward_evals,
            self.started.elapsed(),
        );
        if exhausted && !outcome.success {
            Err(AttackError::Exhausted(Box::new(outcome)))
        } else {
            Ok(outcome)
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn outcome(
    target: TargetLink,
    method: Method,
    config: &AttackConfig,
    example: AdversarialExample,
    p_before: f64,
    trajectory: Vec<f64>,
    gradient_evals: usize,
    forward_evals: usize,
    elapsed: Duration,
) -> AttackOutcome {
    let success = example.p <= config.threshold;
    let q = if success {
        trajectory
            .iter()
            .position(|&p| p <= config.threshold)
            .map_or(0, |i| i + 1)
    } else {
        config.budget
    };
    AttackOutcome {
        target,
        method,
        example,
        p_before,
        trajectory,
        success,
        q,
        gradient_evals,
        forward_evals,
        elapsed,
    }
}

/// Runs `method` against `target`.
///
/// `recent` is the most recent input snapshot (used by CNA) and `stream` the
/// random stream index (used by RA).
pub fn run(
    method: Method,
    model: &DdneModel,
    recent: &Adjacency,
    history: &NodeHistory,
    target: TargetLink,
    config: &AttackConfig,
    stream: u64,
) -> Result<AttackOutcome, AttackError> {
    match method {
        Method::TgaTra => tga_tra(model, history, target, config),
        Method::TgaGre => tga_gre(model, history, target, config),
        Method::Fga => fga(model, history, target, config),
        Method::Cna => cna(model, recent, history, target, config),
        Method::Ra => ra(model, history, target, config, stream),
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::ddne::{train_on, DdneHyper, Optimizer, TrainingData};
    use crate::dynnet::Adjacency;
    use crate::rng::{self, Stream};
    use rand::Rng;

    /// A small trained model with a correctly predicted target.
    pub fn trained(n: usize, seed: u64) -> (DdneModel, Vec<Adjacency>) {
        let mut r = rng::stream(seed, Stream::Synthetic, 0);
        let mut base = Adjacency::new(n);
        for i in 0..n {
            for j in 0..n {
                if i != j && (i % 2 == j % 2) && r.random_bool(0.7) {
                    base.set(i, j, true);
                }
            }
        }
        let window = vec![base.clone(), base.clone()];
        let data = TrainingData::new(window.clone(), base);
        let hyper = DdneHyper {
            hidden_dim: 4,
            decoder_hidden: vec![8],
            epochs: 150,
            batch_size: n,
            learning_rate: 0.02,
            optimizer: Optimizer::Adam,
            seed,
            ..DdneHyper::default()
        };
        (train_on(&data, &hyper).unwrap().model, window)
    }

    /// First predicted true link `(i, j)` by ascending `(i, j)`.
    pub fn predicted_target(model: &DdneModel, window: &[Adjacency]) -> (TargetLink, NodeHistory) {
        let n = model.node_count();
        for i in 0..n {
            let h = NodeHistory::new(i, window.iter().map(|a| a.row(i).to_vec()).collect()).unwrap();
            for j in 0..n {
                if window[1].get(i, j) && model.link_probability(&h, j).unwrap() > 0.5 {
                    return (TargetLink::new(i, j), h);
                }
            }
        }
        panic!("no predicted link");
    }
}

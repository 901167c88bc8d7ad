use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::attack::TargetLink;
use crate::diffcomp::Matrix;
use crate::dynnet::{edge_betweenness, link_degree, Adjacency};
use crate::par::Parallelism;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    HighestProbability,
    HighestDegree,
    HighestBetweenness,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::HighestProbability,
        Strategy::HighestDegree,
        Strategy::HighestBetweenness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::HighestProbability => "highest-probability",
            Strategy::HighestDegree => "highest-degree",
            Strategy::HighestBetweenness => "highest-betweenness",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSelection {
    pub strategy: Strategy,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_top_k() -> usize {
    100
}

impl TargetSelection {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            top_k: default_top_k(),
        }
    }
}

/// The top-`k` attackable links under `selection`.
///
/// The pool is every true link of `truth` whose predicted probability
/// `probs(i, j)` exceeds `threshold`. Degree and betweenness are measured on
/// `recent`, the last input snapshot; links absent there score 0. Equal scores
/// are ordered by `(i, j)`.
pub fn select_targets(
    probs: &Matrix,
    truth: &Adjacency,
    recent: &Adjacency,
    selection: TargetSelection,
    threshold: f64,
    mode: Parallelism,
) -> Result<Vec<TargetLink>, EvalError> {
    let n = truth.n();
    if probs.shape() != (n, n) || recent.n() != n {
        return Err(EvalError::Argument("probabilities, truth and recent snapshot disagree in size".into()));
    }
    if selection.top_k == 0 {
        return Err(EvalError::Argument("top_k must be positive".into()));
    }
    let pool: Vec<(usize, usize)> = truth.edges().filter(|&(i, j)| probs.get(i, j) > threshold).collect();
    if pool.is_empty() {
        return Err(EvalError::NoTargets);
    }
    let scores: Vec<f64> = match selection.strategy {
        Strategy::HighestProbability => pool.iter().map(|&(i, j)| probs.get(i, j)).collect(),
        Strategy::HighestDegree => pool
            .iter()
            .map(|&(i, j)| link_degree(recent, i, j).map(|d| d as f64))
            .collect::<Result<_, _>>()?,
        Strategy::HighestBetweenness => {
            let eb = edge_betweenness(recent, mode);
            pool.iter().map(|e| eb.get(e).copied().unwrap_or(0.0)).collect()
        }
    };
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(pool[a].cmp(&pool[b])));
    if pool.len() < selection.top_k {
        log::warn!(
            "only {} attackable links for {} (top_k = {})",
            pool.len(),
            selection.strategy,
            selection.top_k
        );
    }
    Ok(order
        .into_iter()
        .take(selection.top_k)
        .map(|x| TargetLink::new(pool[x].0, pool[x].1))
        .collect())
}

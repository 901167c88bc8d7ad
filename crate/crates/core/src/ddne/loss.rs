use std::collections::HashMap;

use super::model::{batch_inputs, Bound};
use super::{DdneModel, ModelError};
use crate::diffcomp::{Matrix, Tape, Var};
use crate::dynnet::{Adjacency, DynamicNetwork};

/// `counts(i, j)` = number of input snapshots in which the link `i -> j` exists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistoricalLinkCounts {
    n: usize,
    counts: Vec<u32>,
}

impl HistoricalLinkCounts {
    pub fn from_window(window: &[Adjacency]) -> Self {
        let n = window.first().map_or(0, Adjacency::n);
        let mut counts = vec![0u32; n * n];
        for a in window {
            for (i, j) in a.edges() {
                counts[i * n + j] += 1;
            }
        }
        Self { n, counts }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.n + j]
    }
}

/// Input window, target snapshot and historical counts for one training problem.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub window: Vec<Adjacency>,
    pub target: Adjacency,
    pub counts: HistoricalLinkCounts,
}

impl TrainingData {
    /// Uses the last snapshot as target and the `history_length` before it as input.
    pub fn from_network(net: &DynamicNetwork, history_length: usize) -> Result<Self, ModelError> {
        let s = net.num_snapshots();
        if s < history_length + 1 {
            return Err(ModelError::Data(format!(
                "need {} snapshots for history length {history_length}, network has {s}",
                history_length + 1
            )));
        }
        let window = net.snapshots()[s - 1 - history_length..s - 1].to_vec();
        Ok(Self::new(window, net.snapshots()[s - 1].clone()))
    }

    pub fn new(window: Vec<Adjacency>, target: Adjacency) -> Self {
        let counts = HistoricalLinkCounts::from_window(&window);
        Self {
            window,
            target,
            counts,
        }
    }

    pub fn node_count(&self) -> usize {
        self.target.n()
    }
}

/// The three loss terms and their weighted total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub total: f64,
    /// Weighted squared reconstruction error.
    pub structure: f64,
    /// Count-weighted embedding distances.
    pub proximity: f64,
    /// Sum of squared parameters.
    pub regularization: f64,
}

pub(crate) struct LossVars {
    pub total: Var,
    pub structure: Var,
    pub proximity: Var,
    pub regularization: Var,
}

/// Records the full training loss for `batch` on `tape`.
pub(crate) fn build_loss(
    model: &DdneModel,
    tape: &mut Tape<'_>,
    bound: &Bound,
    data: &TrainingData,
    batch: &[usize],
) -> Result<LossVars, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let n = model.node_count();
    if data.node_count() != n || data.window.len() != model.history_length() {
        return Err(ModelError::Dimension(
            "training data does not match the model".into(),
        ));
    }
    if let Some(&bad) = batch.iter().find(|&&i| i >= n) {
        return Err(ModelError::Dimension(format!("batch node {bad} >= {n}")));
    }
    let hyper = model.hyper();
    let inputs = batch_inputs(&data.window, batch)
        .into_iter()
        .map(|m| tape.constant(m))
        .collect::<Result<Vec<_>, _>>()?;
    let embedding = model.encode_on(tape, bound, &inputs)?;
    let output = model.decode_on(tape, bound, embedding)?;

    let b = batch.len();
    let mut target = Matrix::zeros(n, b);
    let mut weights = Matrix::filled(n, b, 1.0);
    for (col, &i) in batch.iter().enumerate() {
        for (j, &x) in data.target.row(i).iter().enumerate() {
            if x != 0 {
                target.set(j, col, 1.0);
                weights.set(j, col, hyper.alpha);
            }
        }
    }
    let target = tape.constant(target)?;
    let residual = tape.sub(target, output)?;
    let structure = tape.weighted_sum_squares(residual, weights)?;

    let mut columns: HashMap<usize, Var> = HashMap::new();
    let mut proximity: Option<Var> = None;
    for a in 0..b {
        for c in 0..b {
            if a == c {
                continue;
            }
            let w = data.counts.get(batch[a], batch[c]);
            if w == 0 {
                continue;
            }
            let mut col = |idx: usize, tape: &mut Tape<'_>| -> Result<Var, ModelError> {
                if let Some(&v) = columns.get(&idx) {
                    return Ok(v);
                }
                let v = tape.slice_col(embedding, idx)?;
                columns.insert(idx, v);
                Ok(v)
            };
            let ca = col(a, tape)?;
            let cc = col(c, tape)?;
            let diff = tape.sub(ca, cc)?;
            let dist = tape.l2_norm(diff)?;
            let term = tape.scale(dist, w as f64)?;
            proximity = Some(match proximity {
                Some(acc) => tape.add(acc, term)?,
                None => term,
            });
        }
    }
    let proximity = match proximity {
        Some(p) => p,
        None => tape.constant(Matrix::scalar(0.0))?,
    };

    let mut regularization: Option<Var> = None;
    for &p in &bound.all {
        let sq = tape.sum_squares(p)?;
        regularization = Some(match regularization {
            Some(acc) => tape.add(acc, sq)?,
            None => sq,
        });
    }
    let regularization = regularization.expect("model has parameters");

    let weighted_c = tape.scale(proximity, hyper.beta)?;
    let weighted_r = tape.scale(regularization, hyper.reg_weight)?;
    let partial = tape.add(structure, weighted_c)?;
    let total = tape.add(partial, weighted_r)?;
    Ok(LossVars {
        total,
        structure,
        proximity,
        regularization,
    })
}

/// `L_s + beta * L_c + reg_weight * L_reg` over `batch`.
pub fn loss_all(model: &DdneModel, data: &TrainingData, batch: &[usize]) -> Result<LossParts, ModelError> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, false)?;
    let vars = build_loss(model, &mut tape, &bound, data, batch)?;
    Ok(LossParts {
        total: tape.value(vars.total).item(),
        structure: tape.value(vars.structure).item(),
        proximity: tape.value(vars.proximity).item(),
        regularization: tape.value(vars.regularization).item(),
    })
}

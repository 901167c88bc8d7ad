use std::collections::HashSet;

use super::{AttackError, Flip, TargetLink};
use crate::ddne::{DdneModel, ModelError};
use crate::diffcomp::{Matrix, Tape};
use crate::dynnet::NodeHistory;

/// Target-link loss `-(1 - p)^2`; minimising `p` raises it towards 0.
pub fn target_loss(p: f64) -> f64 {
    -(1.0 - p) * (1.0 - p)
}

/// `dL_t / dS(i,:)`: one row per snapshot, one column per counterpart.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTensor {
    /// `p_ij` at the history the gradient was taken on.
    pub p: f64,
    g: Matrix,
}

impl GradientTensor {
    #[inline]
    pub fn get(&self, k: usize, v: usize) -> f64 {
        self.g.get(k, v)
    }

    /// `(N, n)`.
    pub fn shape(&self) -> (usize, usize) {
        self.g.shape()
    }

    pub fn snapshot(&self, k: usize) -> &[f64] {
        self.g.row(k)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.g
    }
}

/// Gradient of the target loss with respect to every cell of the owner's
/// history, treating the cells as real inputs.
pub fn time_aware_gradient(
    model: &DdneModel,
    history: &NodeHistory,
    target: TargetLink,
) -> Result<GradientTensor, AttackError> {
    let (n, big_n) = (model.node_count(), model.history_length());
    if history.len() != big_n || history.width() != n || target.j >= n {
        return Err(ModelError::Dimension(format!(
            "history {}x{} with target column {} does not fit a model over {n} nodes and {big_n} snapshots",
            history.len(),
            history.width(),
            target.j
        ))
        .into());
    }
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, false)?;
    let inputs = history
        .to_columns()
        .into_iter()
        .map(|c| tape.leaf(c))
        .collect::<Result<Vec<_>, _>>()?;
    let embedding = model.encode_on(&mut tape, &bound, &inputs)?;
    let out = model.decode_on(&mut tape, &bound, embedding)?;
    let p = tape.slice_row(out, target.j)?;
    let one = tape.constant(Matrix::scalar(1.0))?;
    let gap = tape.sub(one, p)?;
    let sq = tape.sum_squares(gap)?;
    let loss = tape.scale(sq, -1.0)?;
    let grads = tape.gradient_of_inputs(loss, &inputs)?;

    let mut g = Matrix::zeros(big_n, n);
    for (k, col) in grads.iter().enumerate() {
        g.as_mut_slice()[k * n..(k + 1) * n].copy_from_slice(col.as_slice());
    }
    Ok(GradientTensor {
        p: tape.value(p).item(),
        g,
    })
}

/// Up to `m` flips in snapshot `k`, ranked by descending `|g(k, v)|` (ties by
/// ascending `v`). The owner's own cell and `touched` cells are skipped; in
/// add-only mode so are existing links.
pub fn one_step_attack(
    history: &NodeHistory,
    gradient: &GradientTensor,
    k: usize,
    m: usize,
    add_only: bool,
    touched: &HashSet<(usize, usize)>,
) -> Vec<Flip> {
    let i = history.node();
    let mut cells: Vec<usize> = (0..history.width())
        .filter(|&v| v != i && !touched.contains(&(k, v)) && !(add_only && history.get(k, v)))
        .collect();
    cells.sort_by(|&a, &b| {
        gradient
            .get(k, b)
            .abs()
            .total_cmp(&gradient.get(k, a).abs())
            .then(a.cmp(&b))
    });
    cells
        .into_iter()
        .take(m)
        .map(|v| Flip::toggle(history, k, v))
        .collect()
}

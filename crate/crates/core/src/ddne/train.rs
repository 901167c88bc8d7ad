use rand::seq::SliceRandom;

use super::loss::build_loss;
use super::{DdneHyper, DdneModel, ModelError, Optimizer, TrainingData};
use crate::diffcomp::{DiffError, Matrix, Tape};
use crate::dynnet::DynamicNetwork;
use crate::rng::{self, Stream};

/// A trained model and its per-epoch mean minibatch loss.
#[derive(Clone, Debug)]
pub struct Training {
    pub model: DdneModel,
    pub epoch_losses: Vec<f64>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, lr: f64, model: &DdneModel) -> Self {
        let zeros: Vec<Matrix> = model
            .tensors()
            .iter()
            .map(|(_, m)| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        Self {
            kind,
            lr,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    fn apply(&mut self, model: &mut DdneModel, grads: &[Matrix]) {
        self.step += 1;
        let params = model.tensors_mut();
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    p.axpy(-self.lr, g);
                }
            }
            Optimizer::Adam => {
                let c1 = 1.0 - ADAM_BETA1.powi(self.step);
                let c2 = 1.0 - ADAM_BETA2.powi(self.step);
                for (((p, g), m), v) in params
                    .into_iter()
                    .zip(grads)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    let (p, g, m, v) = (p.as_mut_slice(), g.as_slice(), m.as_mut_slice(), v.as_mut_slice());
                    for i in 0..p.len() {
                        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                        p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

/// Gradient of the batch loss with respect to every parameter tensor.
pub fn loss_and_gradients(
    model: &DdneModel,
    data: &TrainingData,
    batch: &[usize],
) -> Result<(f64, Vec<Matrix>), ModelError> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, true)?;
    let vars = build_loss(model, &mut tape, &bound, data, batch)?;
    let grads = tape.backward(vars.total)?;
    let out = bound
        .all
        .iter()
        .map(|&v| grads.get_or_zeros(v, tape.shape(v)))
        .collect();
    Ok((tape.value(vars.total).item(), out))
}

/// Trains on the last snapshot of `net`, using the `history_length` snapshots before it as input.
pub fn train(net: &DynamicNetwork, hyper: &DdneHyper) -> Result<Training, ModelError> {
    let data = TrainingData::from_network(net, hyper.history_length)?;
    train_on(&data, hyper)
}

/// Minibatch training over all nodes for `hyper.epochs` passes, shuffled per epoch.
pub fn train_on(data: &TrainingData, hyper: &DdneHyper) -> Result<Training, ModelError> {
    hyper.validate()?;
    let n = data.node_count();
    let mut model = DdneModel::init(n, hyper.clone())?;
    let mut opt = OptimizerState::new(hyper.optimizer, hyper.learning_rate, &model);
    let mut rng = rng::stream(hyper.seed, Stream::Train, 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(hyper.batch_size) {
            let diverged = ModelError::Divergence {
                epoch,
                learning_rate: hyper.learning_rate,
            };
            let (loss, grads) = match loss_and_gradients(&model, data, batch) {
                Ok(r) => r,
                Err(ModelError::Diff(DiffError::NonFinite { .. })) => return Err(diverged),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(diverged);
            }
            opt.apply(&mut model, &grads);
            total += loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        log::debug!("epoch {epoch}: mean loss {mean:.6}");
        epoch_losses.push(mean);
    }
    Ok(Training {
        model,
        epoch_losses,
    })
}

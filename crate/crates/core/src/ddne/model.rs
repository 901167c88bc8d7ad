use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DdneHyper, ModelError};
use crate::diffcomp::{Matrix, Tape, Var};
use crate::dynnet::{Adjacency, NodeHistory};
use crate::par::{self, Parallelism};
use crate::rng::{self, Stream};

/// GRU weights for one direction. `w_*` act on the input row, `u_*` on the
/// recurrent state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub b_z: Matrix,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub b_r: Matrix,
    pub w_h: Matrix,
    pub u_h: Matrix,
    pub b_h: Matrix,
}

const GRU_NAMES: [&str; 9] = ["w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h"];

impl GruParams {
    fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Matrix::zeros(hidden, input);
        let u = || Matrix::zeros(hidden, hidden);
        let b = || Matrix::zeros(hidden, 1);
        Self {
            w_z: w(),
            u_z: u(),
            b_z: b(),
            w_r: w(),
            u_r: u(),
            b_r: b(),
            w_h: w(),
            u_h: u(),
            b_h: b(),
        }
    }

    fn fields(&self) -> [&Matrix; 9] {
        [
            &self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_h, &self.u_h,
            &self.b_h,
        ]
    }

    fn fields_mut(&mut self) -> [&mut Matrix; 9] {
        [
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Matrix,
}

/// Trainable parameters plus the hyperparameters they were built with.
#[derive(Clone, Debug, PartialEq)]
pub struct DdneModel {
    hyper: DdneHyper,
    n: usize,
    pub forward: GruParams,
    pub backward: GruParams,
    pub decoder: Vec<DenseLayer>,
}

/// Predicted next-snapshot row for one node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub node: usize,
    pub probabilities: Vec<f64>,
    pub threshold: f64,
}

impl PredictionRow {
    pub fn predicted_links(&self) -> Vec<usize> {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > self.threshold)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Model parameters bound onto a tape, in [`DdneModel::tensors`] order.
pub(crate) struct Bound {
    forward: [Var; 9],
    backward: [Var; 9],
    decoder: Vec<(Var, Var)>,
    pub(crate) all: Vec<Var>,
}

impl DdneModel {
    /// All-zero parameters.
    pub fn zeros(n: usize, hyper: DdneHyper) -> Result<Self, ModelError> {
        hyper.validate()?;
        if n < 2 {
            return Err(ModelError::Dimension(format!("need at least 2 nodes, got {n}")));
        }
        let d = hyper.hidden_dim;
        let mut widths = vec![hyper.embedding_dim()];
        widths.extend(&hyper.decoder_hidden);
        widths.push(n);
        let decoder = widths
            .windows(2)
            .map(|w| DenseLayer {
                weight: Matrix::zeros(w[1], w[0]),
                bias: Matrix::zeros(w[1], 1),
            })
            .collect();
        Ok(Self {
            n,
            forward: GruParams::zeros(n, d),
            backward: GruParams::zeros(n, d),
            decoder,
            hyper,
        })
    }

    /// Uniform(-r, r) initialisation with `r = 1/sqrt(fan_in)`, seeded from `hyper.seed`.
    pub fn init(n: usize, hyper: DdneHyper) -> Result<Self, ModelError> {
        let mut model = Self::zeros(n, hyper)?;
        let mut rng = rng::stream(model.hyper.seed, Stream::Train, 0);
        let d = model.hyper.hidden_dim;
        for gru in [&mut model.forward, &mut model.backward] {
            for (name, m) in GRU_NAMES.iter().zip(gru.fields_mut()) {
                let fan_in = if name.starts_with('w') { n } else { d };
                fill_uniform(m, fan_in, &mut rng);
            }
        }
        for layer in &mut model.decoder {
            let fan_in = layer.weight.cols();
            fill_uniform(&mut layer.weight, fan_in, &mut rng);
            fill_uniform(&mut layer.bias, fan_in, &mut rng);
        }
        Ok(model)
    }

    pub fn hyper(&self) -> &DdneHyper {
        &self.hyper
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn history_length(&self) -> usize {
        self.hyper.history_length
    }

    /// Named parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (prefix, gru) in [("fwd", &self.forward), ("bwd", &self.backward)] {
            for (name, m) in GRU_NAMES.iter().zip(gru.fields()) {
                out.push((format!("{prefix}.{name}"), m));
            }
        }
        for (i, layer) in self.decoder.iter().enumerate() {
            out.push((format!("dec.{i}.w"), &layer.weight));
            out.push((format!("dec.{i}.b"), &layer.bias));
        }
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::new();
        out.extend(self.forward.fields_mut());
        out.extend(self.backward.fields_mut());
        for layer in &mut self.decoder {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    /// Rebuilds a model from tensors in [`DdneModel::tensors`] order.
    pub fn from_parts(
        n: usize,
        hyper: DdneHyper,
        tensors: Vec<Matrix>,
    ) -> Result<Self, ModelError> {
        let mut model = Self::zeros(n, hyper)?;
        let slots = model.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(ModelError::Dimension(format!(
                "expected {} tensors, got {}",
                slots.len(),
                tensors.len()
            )));
        }
        for (slot, t) in slots.into_iter().zip(tensors) {
            if slot.shape() != t.shape() {
                return Err(ModelError::Dimension(format!(
                    "tensor shape {:?} does not match expected {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            if !t.is_finite() {
                return Err(ModelError::Dimension("non-finite parameter".into()));
            }
            *slot = t;
        }
        Ok(model)
    }

    /// Binds parameters onto `tape`, as leaves when `trainable`, else as constants.
    pub(crate) fn bind<'a>(&'a self, tape: &mut Tape<'a>, trainable: bool) -> Result<Bound, ModelError> {
        let mut put = |m: &'a Matrix| {
            if trainable {
                tape.leaf_ref(m)
            } else {
                tape.constant_ref(m)
            }
        };
        let mut all = Vec::new();
        let mut gru = |g: &'a GruParams, all: &mut Vec<Var>| -> Result<[Var; 9], ModelError> {
            let vars = g
                .fields()
                .into_iter()
                .map(&mut put)
                .collect::<Result<Vec<Var>, _>>()?;
            all.extend(&vars);
            Ok(vars.try_into().expect("nine GRU tensors"))
        };
        let forward = gru(&self.forward, &mut all)?;
        let backward = gru(&self.backward, &mut all)?;
        let mut decoder = Vec::with_capacity(self.decoder.len());
        for layer in &self.decoder {
            let w = put(&layer.weight)?;
            let b = put(&layer.bias)?;
            all.extend([w, b]);
            decoder.push((w, b));
        }
        Ok(Bound {
            forward,
            backward,
            decoder,
            all,
        })
    }

    /// Runs both recurrences over `inputs` (N values of shape `n x B`) and
    /// returns the stacked states `[fwd_0; bwd_0; ...; fwd_{N-1}; bwd_{N-1}]`,
    /// shape `2 d_h N x B`.
    pub(crate) fn encode_on(&self, tape: &mut Tape<'_>, bound: &Bound, inputs: &[Var]) -> Result<Var, ModelError> {
        let big_n = self.hyper.history_length;
        if inputs.len() != big_n {
            return Err(ModelError::Dimension(format!(
                "history has {} snapshots, model expects {big_n}",
                inputs.len()
            )));
        }
        let (rows, batch) = tape.shape(inputs[0]);
        if rows != self.n || inputs.iter().any(|&x| tape.shape(x) != (rows, batch)) {
            return Err(ModelError::Dimension(format!(
                "history rows must have width {}, got {rows}",
                self.n
            )));
        }
        let d = self.hyper.hidden_dim;
        let ones = if batch > 1 {
            Some(tape.constant(Matrix::filled(1, batch, 1.0))?)
        } else {
            None
        };

        let run = |tape: &mut Tape<'_>, p: &[Var; 9], order: &mut dyn Iterator<Item = usize>| -> Result<Vec<(usize, Var)>, ModelError> {
            let mut bias = |b: Var| -> Result<Var, ModelError> {
                Ok(match ones {
                    Some(o) => tape.matmul(b, o)?,
                    None => b,
                })
            };
            let (bz, br, bh) = (bias(p[2])?, bias(p[5])?, bias(p[8])?);
            let mut h = tape.constant(Matrix::zeros(d, batch))?;
            let mut states = Vec::with_capacity(big_n);
            for k in order {
                let x = inputs[k];
                let gate = |tape: &mut Tape<'_>, w: Var, u: Var, b: Var, state: Var| -> Result<Var, ModelError> {
                    let wx = tape.matmul(w, x)?;
                    let uh = tape.matmul(u, state)?;
                    let s = tape.add(wx, uh)?;
                    Ok(tape.add(s, b)?)
                };
                let z_pre = gate(tape, p[0], p[1], bz, h)?;
                let z = tape.sigmoid(z_pre)?;
                let r_pre = gate(tape, p[3], p[4], br, h)?;
                let r = tape.sigmoid(r_pre)?;
                let rh = tape.hadamard(r, h)?;
                let c_pre = gate(tape, p[6], p[7], bh, rh)?;
                let c = tape.tanh(c_pre)?;
                let delta = tape.sub(c, h)?;
                let step = tape.hadamard(z, delta)?;
                h = tape.add(h, step)?;
                states.push((k, h));
            }
            Ok(states)
        };

        let fwd = run(tape, &bound.forward, &mut (0..big_n))?;
        let mut bwd = run(tape, &bound.backward, &mut (0..big_n).rev())?;
        bwd.sort_by_key(|&(k, _)| k);
        let mut parts = Vec::with_capacity(2 * big_n);
        for ((_, f), (_, b)) in fwd.into_iter().zip(bwd) {
            parts.push(f);
            parts.push(b);
        }
        Ok(tape.concat_rows(&parts)?)
    }

    /// Applies the decoder: rectifier on hidden layers, sigmoid on the output.
    pub(crate) fn decode_on(&self, tape: &mut Tape<'_>, bound: &Bound, embedding: Var) -> Result<Var, ModelError> {
        let (rows, batch) = tape.shape(embedding);
        if rows != self.hyper.embedding_dim() {
            return Err(ModelError::Dimension(format!(
                "embedding length {rows}, decoder expects {}",
                self.hyper.embedding_dim()
            )));
        }
        let ones = if batch > 1 {
            Some(tape.constant(Matrix::filled(1, batch, 1.0))?)
        } else {
            None
        };
        let last = bound.decoder.len() - 1;
        let mut y = embedding;
        for (m, &(w, b)) in bound.decoder.iter().enumerate() {
            let wy = tape.matmul(w, y)?;
            let b = match ones {
                Some(o) => tape.matmul(b, o)?,
                None => b,
            };
            let a = tape.add(wy, b)?;
            y = if m < last { tape.relu(a)? } else { tape.sigmoid(a)? };
        }
        Ok(y)
    }

    fn check_history(&self, history: &NodeHistory) -> Result<(), ModelError> {
        if history.len() != self.hyper.history_length || history.width() != self.n {
            return Err(ModelError::Dimension(format!(
                "history is {}x{}, model expects {}x{}",
                history.len(),
                history.width(),
                self.hyper.history_length,
                self.n
            )));
        }
        Ok(())
    }

    /// Embedding `c_i` of length `2 d_h N`.
    pub fn encode(&self, history: &NodeHistory) -> Result<Vec<f64>, ModelError> {
        self.check_history(history)?;
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false)?;
        let inputs = history
            .to_columns()
            .into_iter()
            .map(|c| tape.constant(c))
            .collect::<Result<Vec<_>, _>>()?;
        let c = self.encode_on(&mut tape, &bound, &inputs)?;
        Ok(tape.value(c).as_slice().to_vec())
    }

    /// Link probabilities for an embedding.
    pub fn decode(&self, embedding: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false)?;
        let e = tape.constant(Matrix::column(embedding.to_vec()))?;
        let y = self.decode_on(&mut tape, &bound, e)?;
        Ok(tape.value(y).as_slice().to_vec())
    }

    /// Forward pass on real-valued inputs: N matrices of shape `n x B`, one
    /// column per node. Returns `n x B` probabilities.
    pub fn predict_columns(&self, inputs: &[Matrix]) -> Result<Matrix, ModelError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false)?;
        let vars = inputs
            .iter()
            .map(|m| tape.constant_ref(m))
            .collect::<Result<Vec<_>, _>>()?;
        let c = self.encode_on(&mut tape, &bound, &vars)?;
        let y = self.decode_on(&mut tape, &bound, c)?;
        Ok(tape.value(y).clone())
    }

    pub fn predict_row(&self, history: &NodeHistory, threshold: f64) -> Result<PredictionRow, ModelError> {
        self.check_history(history)?;
        let out = self.predict_columns(&history.to_columns())?;
        Ok(PredictionRow {
            node: history.node(),
            probabilities: out.into_vec(),
            threshold,
        })
    }

    /// `P(A_t(i, j))` for the history owner `i`.
    pub fn link_probability(&self, history: &NodeHistory, j: usize) -> Result<f64, ModelError> {
        self.check_history(history)?;
        if j >= self.n {
            return Err(ModelError::Dimension(format!("target column {j} >= {}", self.n)));
        }
        Ok(self.predict_columns(&history.to_columns())?.get(j, 0))
    }

    /// Predicted probabilities for every node: row `i` is node `i`'s predicted row.
    pub fn predict_all(&self, window: &[Adjacency], mode: Parallelism) -> Result<Matrix, ModelError> {
        const CHUNK: usize = 64;
        let n = self.n;
        if window.len() != self.hyper.history_length || window.iter().any(|a| a.n() != n) {
            return Err(ModelError::Dimension("window does not match the model".into()));
        }
        let chunks = n.div_ceil(CHUNK);
        let parts = par::map_range(mode, chunks, |c| {
            let nodes: Vec<usize> = (c * CHUNK..((c + 1) * CHUNK).min(n)).collect();
            let inputs = batch_inputs(window, &nodes);
            self.predict_columns(&inputs).map(|out| (nodes, out))
        });
        let mut probs = Matrix::zeros(n, n);
        for part in parts {
            let (nodes, out) = part?;
            for (b, &i) in nodes.iter().enumerate() {
                for j in 0..n {
                    probs.set(i, j, out.get(j, b));
                }
            }
        }
        Ok(probs)
    }
}

/// Stacks the chosen nodes' rows as columns: one `n x B` matrix per snapshot.
pub(crate) fn batch_inputs(window: &[Adjacency], nodes: &[usize]) -> Vec<Matrix> {
    let b = nodes.len();
    window
        .iter()
        .map(|a| {
            let n = a.n();
            let mut m = Matrix::zeros(n, b);
            for (col, &i) in nodes.iter().enumerate() {
                for (v, &x) in a.row(i).iter().enumerate() {
                    if x != 0 {
                        m.set(v, col, 1.0);
                    }
                }
            }
            m
        })
        .collect()
}

fn fill_uniform(m: &mut Matrix, fan_in: usize, rng: &mut impl Rng) {
    let r = 1.0 / (fan_in.max(1) as f64).sqrt();
    for x in m.as_mut_slice() {
        *x = rng.random_range(-r..r);
    }
}

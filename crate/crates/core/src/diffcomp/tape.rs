use std::borrow::Cow;

use super::{DiffError, Matrix};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    ConcatRows(Vec<Var>),
    SliceRow(Var, usize),
    SliceCol(Var, usize),
    Sum(Var),
    SumSquares(Var),
    Scale(Var, f64),
    WeightedSumSquares(Var, Matrix),
    L2Norm(Var),
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Matrix>,
    op: Op,
    requires_grad: bool,
}

/// Records primitive operations in evaluation order for reverse-mode differentiation.
///
/// Values may borrow from the caller (`leaf_ref`, `constant_ref`), so frozen model
/// parameters are bound without copying. Constants never receive gradients.
#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

type Result<T> = std::result::Result<T, DiffError>;

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn is_leaf(&self, v: Var) -> bool {
        matches!(self.nodes.get(v.0).map(|n| &n.op), Some(Op::Leaf))
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Matrix) -> Result<Var> {
        self.push_input(Cow::Owned(value), Op::Leaf, "leaf")
    }

    pub fn leaf_ref(&mut self, value: &'a Matrix) -> Result<Var> {
        self.push_input(Cow::Borrowed(value), Op::Leaf, "leaf")
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Matrix) -> Result<Var> {
        self.push_input(Cow::Owned(value), Op::Constant, "constant")
    }

    pub fn constant_ref(&mut self, value: &'a Matrix) -> Result<Var> {
        self.push_input(Cow::Borrowed(value), Op::Constant, "constant")
    }

    fn push_input(&mut self, value: Cow<'a, Matrix>, op: Op, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(DiffError::NonFinite { op: name });
        }
        let requires_grad = matches!(op, Op::Leaf);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn push(&mut self, value: Matrix, op: Op, name: &'static str, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(DiffError::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(DiffError::Shape { op, lhs: sa, rhs: sb });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(DiffError::Shape {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul(a, b), "matmul", &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(out, Op::Add(a, b), "add", &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(out, Op::Sub(a, b), "sub", &[a, b])
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("hadamard", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(out, Op::Hadamard(a, b), "hadamard", &[a, b])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a), "sigmoid", &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a), "tanh", &[a])
    }

    /// Rectifier. The derivative at exactly 0 is taken to be 0.
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a), "relu", &[a])
    }

    /// Stacks values vertically; all parts must share a column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(DiffError::Empty { op: "concat_rows" });
        };
        let cols = self.shape(first).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.1 != cols {
                return Err(DiffError::Shape {
                    op: "concat_rows",
                    lhs: self.shape(first),
                    rhs: s,
                });
            }
            rows += s.0;
            data.extend_from_slice(self.value(p).as_slice());
        }
        let out = Matrix::from_vec(rows, cols, data).expect("concat shape");
        self.push(out, Op::ConcatRows(parts.to_vec()), "concat_rows", parts)
    }

    /// Row `index` as a `1 x cols` value.
    pub fn slice_row(&mut self, a: Var, index: usize) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if index >= rows {
            return Err(DiffError::Index {
                op: "slice_row",
                index,
                len: rows,
            });
        }
        let out = Matrix::from_vec(1, cols, self.value(a).row(index).to_vec()).expect("row");
        self.push(out, Op::SliceRow(a, index), "slice_row", &[a])
    }

    /// Column `index` as a `rows x 1` value.
    pub fn slice_col(&mut self, a: Var, index: usize) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if index >= cols {
            return Err(DiffError::Index {
                op: "slice_col",
                index,
                len: cols,
            });
        }
        let src = self.value(a);
        let out = Matrix::column((0..rows).map(|r| src.get(r, index)).collect());
        self.push(out, Op::SliceCol(a, index), "slice_col", &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Matrix::scalar(self.value(a).as_slice().iter().sum());
        self.push(out, Op::Sum(a), "sum", &[a])
    }

    pub fn sum_squares(&mut self, a: Var) -> Result<Var> {
        let out = Matrix::scalar(self.value(a).sum_squares());
        self.push(out, Op::SumSquares(a), "sum_squares", &[a])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let out = self.value(a).map(|x| factor * x);
        self.push(out, Op::Scale(a, factor), "scale", &[a])
    }

    /// `Σ w ⊙ a²` with constant weights `w`.
    pub fn weighted_sum_squares(&mut self, a: Var, weights: Matrix) -> Result<Var> {
        let s = self.shape(a);
        if s != weights.shape() {
            return Err(DiffError::Shape {
                op: "weighted_sum_squares",
                lhs: s,
                rhs: weights.shape(),
            });
        }
        let total = self
            .value(a)
            .as_slice()
            .iter()
            .zip(weights.as_slice())
            .map(|(x, w)| w * x * x)
            .sum();
        self.push(
            Matrix::scalar(total),
            Op::WeightedSumSquares(a, weights),
            "weighted_sum_squares",
            &[a],
        )
    }

    /// Euclidean norm of all entries. The derivative at the origin is taken to be 0.
    pub fn l2_norm(&mut self, a: Var) -> Result<Var> {
        let out = Matrix::scalar(self.value(a).sum_squares().sqrt());
        self.push(out, Op::L2Norm(a), "l2_norm", &[a])
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let shape = self.shape(root);
        if shape != (1, 1) {
            return Err(DiffError::NonScalarRoot { shape });
        }
        let mut grads: Vec<Option<Matrix>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(root.0 + 1, || None);
        grads[root.0] = Some(Matrix::scalar(1.0));

        for id in (0..=root.0).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        grads.resize_with(self.nodes.len(), || None);
        Ok(Gradients { grads })
    }

    /// `∂root/∂input` for each designated leaf, zero-filled where the root does not depend on it.
    pub fn gradient_of_inputs(&self, root: Var, inputs: &[Var]) -> Result<Vec<Matrix>> {
        if let Some(&bad) = inputs.iter().find(|&&v| !self.is_leaf(v)) {
            return Err(DiffError::NotALeaf { id: bad.0 });
        }
        let grads = self.backward(root)?;
        Ok(inputs
            .iter()
            .map(|&v| grads.get_or_zeros(v, self.shape(v)))
            .collect())
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, id: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let out = &self.nodes[id].value;
        match &self.nodes[id].op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.matmul_nt(self.value(*b)));
                }
                if self.wants(*b) {
                    accumulate(grads, *b, self.value(*a).matmul_tn(g));
                }
            }
            Op::Add(a, b) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.wants(*b) {
                    accumulate(grads, *b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.wants(*b) {
                    accumulate(grads, *b, g.map(|x| -x));
                }
            }
            Op::Hadamard(a, b) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.zip_map(self.value(*b), |x, y| x * y));
                }
                if self.wants(*b) {
                    accumulate(grads, *b, g.zip_map(self.value(*a), |x, y| x * y));
                }
            }
            Op::Sigmoid(a) => {
                accumulate(grads, *a, g.zip_map(out, |x, s| x * s * (1.0 - s)));
            }
            Op::Tanh(a) => {
                accumulate(grads, *a, g.zip_map(out, |x, t| x * (1.0 - t * t)));
            }
            Op::Relu(a) => {
                let input = self.value(*a);
                accumulate(grads, *a, g.zip_map(input, |x, v| if v > 0.0 { x } else { 0.0 }));
            }
            Op::ConcatRows(parts) => {
                let cols = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let rows = self.shape(p).0;
                    if self.wants(p) {
                        let slice = g.as_slice()[offset * cols..(offset + rows) * cols].to_vec();
                        accumulate(grads, p, Matrix::from_vec(rows, cols, slice).expect("shape"));
                    }
                    offset += rows;
                }
            }
            Op::SliceRow(a, index) => {
                let (rows, cols) = self.shape(*a);
                let mut full = Matrix::zeros(rows, cols);
                for c in 0..cols {
                    full.set(*index, c, g.get(0, c));
                }
                accumulate(grads, *a, full);
            }
            Op::SliceCol(a, index) => {
                let (rows, cols) = self.shape(*a);
                let mut full = Matrix::zeros(rows, cols);
                for r in 0..rows {
                    full.set(r, *index, g.get(r, 0));
                }
                accumulate(grads, *a, full);
            }
            Op::Sum(a) => {
                let (rows, cols) = self.shape(*a);
                accumulate(grads, *a, Matrix::filled(rows, cols, g.item()));
            }
            Op::SumSquares(a) => {
                let s = g.item();
                accumulate(grads, *a, self.value(*a).map(|x| 2.0 * s * x));
            }
            Op::Scale(a, factor) => {
                accumulate(grads, *a, g.map(|x| factor * x));
            }
            Op::WeightedSumSquares(a, w) => {
                let s = g.item();
                accumulate(grads, *a, self.value(*a).zip_map(w, |x, w| 2.0 * s * w * x));
            }
            Op::L2Norm(a) => {
                let norm = out.item();
                let s = g.item();
                let contrib = if norm > 0.0 {
                    self.value(*a).map(|x| s * x / norm)
                } else {
                    let (rows, cols) = self.shape(*a);
                    Matrix::zeros(rows, cols)
                };
                accumulate(grads, *a, contrib);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, contribution: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&contribution),
        slot @ None => *slot = Some(contribution),
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Result of a reverse sweep: `∂root/∂v` for every node the root depends on
/// through differentiable inputs.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// `None` for constants and for nodes the root does not reach.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

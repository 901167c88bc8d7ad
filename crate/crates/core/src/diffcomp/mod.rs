//! Minimal reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records each primitive in evaluation order; [`Tape::backward`]
//! walks it in exact reverse order, summing contributions for values used more
//! than once. Everything the DDNE forward pass, its losses, and the attack
//! gradients need is expressed with these primitives.

mod matrix;
mod tape;

pub use matrix::Matrix;
pub use tape::{sigmoid, Gradients, Tape, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{op}: index {index} out of range for length {len}")]
    Index {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("{op}: non-finite value")]
    NonFinite { op: &'static str },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("backward root must be 1x1, got {shape:?}")]
    NonScalarRoot { shape: (usize, usize) },
    #[error("node {id} is not a leaf")]
    NotALeaf { id: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn definitional_values() {
        let mut t = Tape::new();
        let z = t.constant(Matrix::scalar(0.0)).unwrap();
        let s = t.sigmoid(z).unwrap();
        assert_eq!(t.value(s).item(), 0.5);
        let m3 = t.constant(Matrix::scalar(-3.0)).unwrap();
        let r = t.relu(m3).unwrap();
        assert_eq!(t.value(r).item(), 0.0);
    }

    #[test]
    fn matmul_shape_rule_and_mismatch() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::zeros(2, 3)).unwrap();
        let b = t.leaf(Matrix::zeros(3, 1)).unwrap();
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.shape(c), (2, 1));
        let err = t.matmul(b, b).unwrap_err();
        assert_eq!(
            err,
            DiffError::Shape {
                op: "matmul",
                lhs: (3, 1),
                rhs: (3, 1)
            }
        );
        assert!(err.to_string().contains("matmul"));
    }

    #[test]
    fn sum_squares_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::column(vec![1.0, 2.0])).unwrap();
        let y = t.sum_squares(x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn scale_gradient_is_linear() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::scalar(1.7)).unwrap();
        let y = t.scale(x, 3.0).unwrap();
        assert_eq!(t.backward(y).unwrap().get(x).unwrap().item(), 3.0);
    }

    #[test]
    fn chain_rule_by_hand() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::scalar(0.0)).unwrap();
        let s = t.sigmoid(x).unwrap();
        let y = t.sum_squares(s).unwrap();
        let g = t.backward(y).unwrap().get(x).unwrap().item();
        assert!(close(g, 0.25));
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::zeros(2, 1)).unwrap();
        assert!(matches!(
            t.backward(x),
            Err(DiffError::NonScalarRoot { shape: (2, 1) })
        ));
    }

    #[test]
    fn non_finite_rejected_at_creation() {
        let mut t = Tape::new();
        assert!(matches!(
            t.leaf(Matrix::scalar(f64::NAN)),
            Err(DiffError::NonFinite { .. })
        ));
        let big = t.leaf(Matrix::scalar(1e200)).unwrap();
        assert!(matches!(
            t.hadamard(big, big),
            Err(DiffError::NonFinite { op: "hadamard" })
        ));
    }

    #[test]
    fn gradient_of_constant_function_is_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::zeros(2, 4)).unwrap();
        let c = t.constant(Matrix::scalar(5.0)).unwrap();
        let y = t.sum_squares(c).unwrap();
        let g = t.gradient_of_inputs(y, &[x]).unwrap();
        assert_eq!(g[0], Matrix::zeros(2, 4));
    }

    #[test]
    fn gradient_of_sum_is_ones() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::filled(2, 3, 0.3)).unwrap();
        let y = t.sum(x).unwrap();
        let g = t.gradient_of_inputs(y, &[x]).unwrap();
        assert_eq!(g[0], Matrix::filled(2, 3, 1.0));
    }

    #[test]
    fn gradient_of_non_leaf_is_contract_error() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::scalar(1.0)).unwrap();
        let y = t.scale(x, 2.0).unwrap();
        let z = t.sum_squares(y).unwrap();
        assert_eq!(
            t.gradient_of_inputs(z, &[y]),
            Err(DiffError::NotALeaf { id: y.id() })
        );
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::column(vec![0.0, 1.0, -1.0])).unwrap();
        let r = t.relu(x).unwrap();
        let y = t.sum(r).unwrap();
        assert_eq!(t.backward(y).unwrap().get(x).unwrap().as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn l2_norm_subgradient_at_origin_is_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::zeros(3, 1)).unwrap();
        let y = t.l2_norm(x).unwrap();
        assert_eq!(t.backward(y).unwrap().get(x).unwrap(), &Matrix::zeros(3, 1));
    }

    #[test]
    fn fan_out_accumulates() {
        // y = x*x + 3x + x  -> dy/dx = 2x + 4
        let mut t = Tape::new();
        let x = t.leaf(Matrix::scalar(1.5)).unwrap();
        let sq = t.hadamard(x, x).unwrap();
        let three = t.scale(x, 3.0).unwrap();
        let a = t.add(sq, three).unwrap();
        let y = t.add(a, x).unwrap();
        let g = t.backward(y).unwrap().get(x).unwrap().item();
        assert!(close(g, 7.0));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let c = t.constant(Matrix::scalar(2.0)).unwrap();
        let x = t.leaf(Matrix::scalar(3.0)).unwrap();
        let y = t.hadamard(c, x).unwrap();
        let g = t.backward(y).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(x).unwrap().item(), 2.0);
    }

    // Randomized composite graphs, checked against central differences.

    #[derive(Clone, Debug)]
    enum Step {
        MatMul(usize, usize),
        Add(usize, usize),
        Sub(usize, usize),
        Hadamard(usize, usize),
        Sigmoid(usize),
        Tanh(usize),
        Relu(usize),
        Concat(usize, usize),
        SliceRow(usize, usize),
        SliceCol(usize, usize),
        Scale(usize, f64),
    }

    #[derive(Clone)]
    struct Recipe {
        leaves: Vec<Matrix>,
        steps: Vec<Step>,
        weights: Matrix,
        use_norm: bool,
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
    }

    fn random_recipe(rng: &mut ChaCha8Rng) -> Recipe {
        let leaves: Vec<Matrix> = (0..3)
            .map(|_| {
                let r = rng.random_range(1..4);
                let c = rng.random_range(1..4);
                random_matrix(rng, r, c)
            })
            .collect();
        let mut shapes: Vec<(usize, usize)> = leaves.iter().map(Matrix::shape).collect();
        let mut steps = Vec::new();
        let target = rng.random_range(5..40);
        let mut attempts = 0;
        while steps.len() < target && attempts < 2000 {
            attempts += 1;
            let a = rng.random_range(0..shapes.len());
            let b = rng.random_range(0..shapes.len());
            let (sa, sb) = (shapes[a], shapes[b]);
            let (step, shape) = match rng.random_range(0..11) {
                0 if sa.1 == sb.0 => (Step::MatMul(a, b), (sa.0, sb.1)),
                1 if sa == sb => (Step::Add(a, b), sa),
                2 if sa == sb => (Step::Sub(a, b), sa),
                3 if sa == sb => (Step::Hadamard(a, b), sa),
                4 => (Step::Sigmoid(a), sa),
                5 => (Step::Tanh(a), sa),
                6 => (Step::Relu(a), sa),
                7 if sa.1 == sb.1 => (Step::Concat(a, b), (sa.0 + sb.0, sa.1)),
                8 => (Step::SliceRow(a, rng.random_range(0..sa.0)), (1, sa.1)),
                9 => (Step::SliceCol(a, rng.random_range(0..sa.1)), (sa.0, 1)),
                10 => (Step::Scale(a, rng.random_range(-2.0..2.0)), sa),
                _ => continue,
            };
            steps.push(step);
            shapes.push(shape);
        }
        let last = *shapes.last().unwrap();
        Recipe {
            leaves,
            steps,
            weights: random_matrix(rng, last.0, last.1).map(f64::abs),
            use_norm: rng.random_bool(0.3),
        }
    }

    fn build(recipe: &Recipe, leaves: &[Matrix]) -> (Tape<'static>, Vec<Var>, Var) {
        let mut t = Tape::new();
        let inputs: Vec<Var> = leaves.iter().map(|m| t.leaf(m.clone()).unwrap()).collect();
        let mut vars = inputs.clone();
        for s in &recipe.steps {
            let v = match *s {
                Step::MatMul(a, b) => t.matmul(vars[a], vars[b]),
                Step::Add(a, b) => t.add(vars[a], vars[b]),
                Step::Sub(a, b) => t.sub(vars[a], vars[b]),
                Step::Hadamard(a, b) => t.hadamard(vars[a], vars[b]),
                Step::Sigmoid(a) => t.sigmoid(vars[a]),
                Step::Tanh(a) => t.tanh(vars[a]),
                Step::Relu(a) => t.relu(vars[a]),
                Step::Concat(a, b) => t.concat_rows(&[vars[a], vars[b]]),
                Step::SliceRow(a, i) => t.slice_row(vars[a], i),
                Step::SliceCol(a, i) => t.slice_col(vars[a], i),
                Step::Scale(a, f) => t.scale(vars[a], f),
            }
            .unwrap();
            vars.push(v);
        }
        let last = *vars.last().unwrap();
        let root = if recipe.use_norm {
            t.l2_norm(last).unwrap()
        } else {
            t.weighted_sum_squares(last, recipe.weights.clone()).unwrap()
        };
        (t, inputs, root)
    }

    fn check_recipe(recipe: &Recipe) -> f64 {
        let (t, inputs, root) = build(recipe, &recipe.leaves);
        let analytic = t.gradient_of_inputs(root, &inputs).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for (li, leaf) in recipe.leaves.iter().enumerate() {
            for e in 0..leaf.len() {
                let mut plus = recipe.leaves.clone();
                plus[li].as_mut_slice()[e] += h;
                let mut minus = recipe.leaves.clone();
                minus[li].as_mut_slice()[e] -= h;
                let (tp, _, rp) = build(recipe, &plus);
                let (tm, _, rm) = build(recipe, &minus);
                let fd = (tp.value(rp).item() - tm.value(rm).item()) / (2.0 * h);
                let an = analytic[li].as_slice()[e];
                // relative 1e-4, absolute 1e-7 where that is looser
                let err = (fd - an).abs() / (1e-4 * an.abs().max(fd.abs())).max(1e-7);
                worst = worst.max(err);
            }
        }
        worst
    }

    #[test]
    fn composite_graphs_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..100 {
            let recipe = random_recipe(&mut rng);
            let err = check_recipe(&recipe);
            assert!(err <= 1.0, "case {case}: error {err} x tolerance, steps {:?}", recipe.steps);
        }
    }

    #[test]
    fn each_primitive_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let leaves = vec![
            random_matrix(&mut rng, 2, 3),
            random_matrix(&mut rng, 3, 2),
            random_matrix(&mut rng, 2, 3),
        ];
        let steps = [
            Step::MatMul(0, 1),
            Step::Add(0, 2),
            Step::Sub(0, 2),
            Step::Hadamard(0, 2),
            Step::Sigmoid(0),
            Step::Tanh(0),
            Step::Relu(0),
            Step::Concat(0, 2),
            Step::SliceRow(0, 1),
            Step::SliceCol(0, 2),
            Step::Scale(0, -1.3),
        ];
        for s in steps {
            let probe = Recipe {
                leaves: leaves.clone(),
                steps: vec![s.clone()],
                weights: Matrix::zeros(0, 0),
                use_norm: true,
            };
            let (t, _, root) = build(&probe, &leaves);
            let out_shape = t.shape(Var(root.id() - 1));
            for use_norm in [false, true] {
                let recipe = Recipe {
                    weights: random_matrix(&mut rng, out_shape.0, out_shape.1).map(f64::abs),
                    use_norm,
                    ..probe.clone()
                };
                let err = check_recipe(&recipe);
                assert!(err <= 1.0, "{s:?} norm={use_norm}: {err} x tolerance");
            }
        }
    }

    #[test]
    fn forward_and_backward_are_bitwise_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let recipe = random_recipe(&mut rng);
        let (t1, i1, r1) = build(&recipe, &recipe.leaves);
        let (t2, i2, r2) = build(&recipe, &recipe.leaves);
        assert_eq!(t1.value(r1).item().to_bits(), t2.value(r2).item().to_bits());
        let g1 = t1.gradient_of_inputs(r1, &i1).unwrap();
        let g2 = t2.gradient_of_inputs(r2, &i2).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            let ab: Vec<u64> = a.as_slice().iter().map(|x| x.to_bits()).collect();
            let bb: Vec<u64> = b.as_slice().iter().map(|x| x.to_bits()).collect();
            assert_eq!(ab, bb);
        }
    }
}

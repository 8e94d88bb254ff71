//! Reverse-mode differentiation over [`Tensor`] operations.
//!
//! Every operation appends one node to the tape, so parents always precede
//! their children and a single reverse sweep accumulates all gradients.

use std::sync::atomic::{AtomicU64, Ordering};

use super::surrogate::{sigmoid, SurrogateConfig};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(0);

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    node: usize,
}

impl Var {
    pub fn node(&self) -> usize {
        self.node
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Const,
    MatMul(usize, usize),
    /// `rhs_row` marks a vector right operand broadcast over the rows of the left one.
    Binary {
        kind: Binary,
        lhs: usize,
        rhs: usize,
        rhs_row: bool,
    },
    Affine(usize, Real),
    Activation(Activation, usize),
    ReluPrime(usize, Real),
    Sum(usize),
    Reshape(usize),
    LogSoftmax(usize),
    Pick(usize, usize),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Record of operations for one forward pass.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        debug_assert_eq!(v.tape, self.id);
        &self.nodes[v.node].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var {
            tape: self.id,
            node: self.nodes.len() - 1,
        }
    }

    fn check(&self, vars: &[Var]) -> Result<()> {
        match vars.iter().find(|v| v.tape != self.id) {
            Some(_) => Err(Error::Contract(
                "variables from different tapes cannot be combined".into(),
            )),
            None => Ok(()),
        }
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    /// A value that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Const, value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(&[a, b])?;
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a.node, b.node), value))
    }

    fn binary(&mut self, kind: Binary, a: Var, b: Var, f: fn(Real, Real) -> Real) -> Result<Var> {
        self.check(&[a, b])?;
        let (ta, tb) = (self.value(a), self.value(b));
        let rhs_row = if ta.shape() == tb.shape() {
            false
        } else if ta.shape().len() == 2 && tb.shape() == [ta.cols()] {
            true
        } else {
            let name = match kind {
                Binary::Add => "add",
                Binary::Sub => "sub",
                Binary::Mul => "mul_elem",
            };
            return Err(Error::shape(name, ta.shape(), tb.shape()));
        };
        let value = if rhs_row {
            let cols = ta.cols();
            let bd = tb.data();
            let data = ta.data().iter().enumerate().map(|(i, &x)| f(x, bd[i % cols])).collect();
            Tensor::new(ta.shape().to_vec(), data)?
        } else {
            ta.zip_map(tb, f)
        };
        Ok(self.push(
            Op::Binary {
                kind,
                lhs: a.node,
                rhs: b.node,
                rhs_row,
            },
            value,
        ))
    }

    /// Elementwise sum; `b` may also be a row vector added to every row of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b, |x, y| x - y)
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b, |x, y| x * y)
    }

    /// `scale * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, scale: Real, shift: Real) -> Result<Var> {
        self.check(&[a])?;
        let value = self.value(a).map(|x| scale * x + shift);
        Ok(self.push(Op::Affine(a.node, scale), value))
    }

    pub fn scale(&mut self, a: Var, c: Real) -> Result<Var> {
        self.affine(a, c, 0.0)
    }

    pub fn activation(&mut self, kind: Activation, z: Var) -> Result<Var> {
        self.check(&[z])?;
        let f: fn(Real) -> Real = match kind {
            Activation::Tanh => Real::tanh,
            Activation::Relu => |x| x.max(0.0),
            Activation::Sigmoid => sigmoid,
        };
        let value = self.value(z).map(f);
        Ok(self.push(Op::Activation(kind, z.node), value))
    }

    pub fn tanh(&mut self, z: Var) -> Result<Var> {
        self.activation(Activation::Tanh, z)
    }

    pub fn relu(&mut self, z: Var) -> Result<Var> {
        self.activation(Activation::Relu, z)
    }

    /// The ReLU-derivative factor under a surrogate configuration.
    pub fn relu_prime(&mut self, z: Var, cfg: &SurrogateConfig) -> Result<Var> {
        self.check(&[z])?;
        cfg.validate()?;
        let value = self.value(z).map(|x| cfg.forward(x));
        Ok(self.push(Op::ReluPrime(z.node, cfg.slope), value))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.check(&[a])?;
        let value = Tensor::scalar(self.value(a).sum());
        Ok(self.push(Op::Sum(a.node), value))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        self.check(&[a])?;
        let value = self
            .value(a)
            .reshape(shape.to_vec())
            .map_err(|_| Error::shape("reshape", self.value(a).shape(), shape))?;
        Ok(self.push(Op::Reshape(a.node), value))
    }

    /// Log-softmax of a vector, stabilised by subtracting the maximum.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        self.check(&[a])?;
        let t = self.value(a);
        if !t.is_vector() {
            return Err(Error::shape("log_softmax", t.shape(), &[t.numel()]));
        }
        let max = t.data().iter().copied().fold(Real::NEG_INFINITY, Real::max);
        let lse = max + t.data().iter().map(|&x| (x - max).exp()).sum::<Real>().ln();
        let value = t.map(|x| x - lse);
        Ok(self.push(Op::LogSoftmax(a.node), value))
    }

    /// Entry `index` of a vector, as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        self.check(&[a])?;
        let t = self.value(a);
        if !t.is_vector() || index >= t.numel() {
            return Err(Error::shape("pick", t.shape(), &[index]));
        }
        let value = Tensor::scalar(t.data()[index]);
        Ok(self.push(Op::Pick(a.node, index), value))
    }

    /// Gradients of the scalar `seed` with respect to every node that feeds it.
    pub fn backward(&self, seed: Var) -> Result<Gradients> {
        self.check(&[seed])?;
        if self.value(seed).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward seed must be a scalar, got shape {:?}",
                self.value(seed).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[seed.node] = Some(Tensor::ones(self.value(seed).shape()));
        let mut visited = 0;
        for i in (0..=seed.node).rev() {
            let Some(g) = grads[i].take() else { continue };
            visited += 1;
            self.propagate(i, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
            visited,
        })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[i];
        let val = |j: usize| &self.nodes[j].value;
        match node.op {
            Op::Leaf | Op::Const => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(a), val(b));
                // Vectors enter as column matrices.
                let g_col = g.reshape(vec![ta.rows(), tb.cols()])?;
                let b_col = tb.reshape(vec![tb.rows(), tb.cols()])?;
                let ga = g_col.matmul(&b_col.transpose())?;
                let gb = ta.transpose().matmul(&g_col)?.reshape(tb.shape().to_vec())?;
                accumulate(&self.nodes, grads, a, ga);
                accumulate(&self.nodes, grads, b, gb);
            }
            Op::Binary {
                kind,
                lhs,
                rhs,
                rhs_row,
            } => {
                let (ta, tb) = (val(lhs), val(rhs));
                let cols = ta.cols();
                let (ga, gb_full) = match kind {
                    Binary::Add => (g.clone(), g.clone()),
                    Binary::Sub => (g.clone(), g.scale(-1.0)),
                    Binary::Mul => {
                        let bd = tb.data();
                        let ad = ta.data();
                        let ga: Vec<Real> = if rhs_row {
                            g.data().iter().enumerate().map(|(k, &x)| x * bd[k % cols]).collect()
                        } else {
                            g.data().iter().zip(bd).map(|(&x, &y)| x * y).collect()
                        };
                        let gb: Vec<Real> = g.data().iter().zip(ad).map(|(&x, &y)| x * y).collect();
                        (
                            Tensor::new(g.shape().to_vec(), ga)?,
                            Tensor::new(g.shape().to_vec(), gb)?,
                        )
                    }
                };
                let gb = if rhs_row {
                    let mut acc = vec![0.0; cols];
                    for (k, &x) in gb_full.data().iter().enumerate() {
                        acc[k % cols] += x;
                    }
                    Tensor::vector(acc)
                } else {
                    gb_full
                };
                accumulate(&self.nodes, grads, lhs, ga);
                accumulate(&self.nodes, grads, rhs, gb);
            }
            Op::Affine(a, scale) => accumulate(&self.nodes, grads, a, g.scale(scale)),
            Op::Activation(kind, z) => {
                let local = match kind {
                    Activation::Tanh => node.value.map(|y| 1.0 - y * y),
                    // Derivative at exactly zero is taken as 0.
                    Activation::Relu => val(z).map(|x| if x > 0.0 { 1.0 } else { 0.0 }),
                    Activation::Sigmoid => node.value.map(|s| s * (1.0 - s)),
                };
                accumulate(&self.nodes, grads, z, g.zip_map(&local, |a, b| a * b));
            }
            Op::ReluPrime(z, k) => {
                let local = val(z).map(|x| {
                    let s = sigmoid(k * x);
                    k * s * (1.0 - s)
                });
                accumulate(&self.nodes, grads, z, g.zip_map(&local, |a, b| a * b));
            }
            Op::Sum(a) => accumulate(&self.nodes, grads, a, Tensor::full(val(a).shape(), g.item())),
            Op::Reshape(a) => accumulate(&self.nodes, grads, a, g.reshape(val(a).shape().to_vec())?),
            Op::LogSoftmax(a) => {
                let total = g.sum();
                let ga = node.value.zip_map(g, |y, gi| gi - y.exp() * total);
                accumulate(&self.nodes, grads, a, ga);
            }
            Op::Pick(a, index) => {
                let mut ga = Tensor::zeros(val(a).shape());
                ga.data_mut()[index] = g.item();
                accumulate(&self.nodes, grads, a, ga);
            }
        }
        Ok(())
    }
}

fn accumulate(nodes: &[Node], grads: &mut [Option<Tensor>], node: usize, g: Tensor) {
    if matches!(nodes[node].op, Op::Const) {
        return;
    }
    match &mut grads[node] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Tensor>>,
    visited: usize,
}

impl Gradients {
    /// Gradient with respect to `v`; `None` when `v` does not influence the seed.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.node).and_then(Option::as_ref)
    }

    /// Gradient with respect to `v`, zero-filled to `like`'s shape when absent.
    pub fn wrt(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(like.shape()))
    }

    /// Number of nodes the reverse sweep processed.
    pub fn visited(&self) -> usize {
        self.visited
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::SurrogateMode;

    fn mat(rows: &[Vec<Real>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_examples() {
        let mut tape = Tape::new();
        let col = tape.constant(mat(&[vec![5.0], vec![6.0]]));
        let eye = tape.constant(Tensor::identity(2));
        let zero = tape.constant(Tensor::zeros(&[2, 2]));
        let r = tape.matmul(eye, col).unwrap();
        assert_eq!(tape.value(r).data(), &[5.0, 6.0]);
        let r = tape.matmul(zero, col).unwrap();
        assert_eq!(tape.value(r).data(), &[0.0, 0.0]);

        let a = tape.constant(mat(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let b = tape.constant(mat(&[vec![5.0, 6.0], vec![7.0, 8.0]]));
        let r = tape.matmul(a, b).unwrap();
        // Triple-loop reference.
        let (av, bv) = ([[1.0, 2.0], [3.0, 4.0]], [[5.0, 6.0], [7.0, 8.0]]);
        let mut expect = [0.0; 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    expect[i * 2 + j] += av[i][k] * bv[k][j];
                }
            }
        }
        assert_eq!(expect, [19.0, 22.0, 43.0, 50.0]);
        assert_eq!(tape.value(r).data(), &expect);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 2]));
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("[2, 2]"), "{err}");
    }

    #[test]
    fn matmul_backward_matches_formula() {
        let mut tape = Tape::new();
        let a = tape.leaf(mat(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let b = tape.leaf(mat(&[vec![5.0, 6.0], vec![7.0, 8.0]]));
        let c = tape.matmul(a, b).unwrap();
        let s = tape.sum(c).unwrap();
        let g = tape.backward(s).unwrap();
        // dL/da = 1·bᵀ, dL/db = aᵀ·1
        assert_eq!(g.get(a).unwrap().data(), &[11.0, 15.0, 11.0, 15.0]);
        assert_eq!(g.get(b).unwrap().data(), &[4.0, 4.0, 6.0, 6.0]);
    }

    #[test]
    fn elementwise_identities_and_broadcast() {
        let mut tape = Tape::new();
        let x = tape.leaf(mat(&[vec![1.0, 2.0]]));
        let zero = tape.constant(Tensor::zeros(&[1, 2]));
        let one = tape.constant(Tensor::ones(&[1, 2]));
        let y = tape.add(x, zero).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
        let y = tape.mul_elem(x, one).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
        let b = tape.constant(mat(&[vec![3.0, 4.0]]));
        let y = tape.add(x, b).unwrap();
        assert_eq!(tape.value(y).data(), &[4.0, 6.0]);

        let m = tape.leaf(mat(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]));
        let bias = tape.leaf(Tensor::vector(vec![10.0, 20.0]));
        let y = tape.add(m, bias).unwrap();
        assert_eq!(tape.value(y).data(), &[11.0, 22.0, 13.0, 24.0, 15.0, 26.0]);
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(bias).unwrap().data(), &[3.0, 3.0]);

        let bad = tape.constant(Tensor::zeros(&[3]));
        assert!(matches!(tape.add(m, bad), Err(Error::Shape { .. })));
    }

    #[test]
    fn activation_values() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::vector(vec![0.0, -3.0, 2.0]));
        let t = tape.tanh(z).unwrap();
        let r = tape.relu(z).unwrap();
        let s = tape.activation(Activation::Sigmoid, z).unwrap();
        assert_eq!(tape.value(t).data()[0], 0.0);
        assert_eq!(&tape.value(r).data()[1..], &[0.0, 2.0]);
        assert_eq!(tape.value(s).data()[0], 0.5);
    }

    #[test]
    fn relu_derivative_at_zero_is_zero() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::vector(vec![0.0, 1.0, -1.0]));
        let r = tape.relu(z).unwrap();
        let s = tape.sum(r).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(z).unwrap().data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn relu_prime_modes() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::vector(vec![0.0]));
        let rep = tape.relu_prime(z, &SurrogateConfig::default()).unwrap();
        assert_eq!(tape.value(rep).item(), 0.5);
        let cfg = SurrogateConfig::new(SurrogateMode::BackwardOnly, 2.0).unwrap();
        let bo = tape.relu_prime(z, &cfg).unwrap();
        assert_eq!(tape.value(bo).item(), 0.0);
        let g = tape.backward(bo).unwrap();
        // k σ(0)(1−σ(0)) with k = 2
        assert_eq!(g.get(z).unwrap().item(), 0.5);
    }

    #[test]
    fn backward_seed_must_be_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn sum_and_square_gradients() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.5, -2.0, 3.0]));
        let s = tape.sum(x).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);

        let sq = tape.mul_elem(x, x).unwrap();
        let s = tape.sum(sq).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[3.0, -4.0, 6.0]);
    }

    #[test]
    fn log_softmax_and_pick() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::vector(vec![0.0; 4]));
        let ls = tape.log_softmax(z).unwrap();
        let p = tape.pick(ls, 2).unwrap();
        assert!((tape.value(p).item() + (4.0 as Real).ln()).abs() < 1e-12);
        let g = tape.backward(p).unwrap();
        assert_eq!(g.get(z).unwrap().data(), &[-0.25, -0.25, 0.75, -0.25]);
        assert!(tape.pick(ls, 4).is_err());
    }

    #[test]
    fn tapes_do_not_mix() {
        let mut a = Tape::new();
        let mut b = Tape::new();
        let x = a.leaf(Tensor::scalar(1.0));
        let y = b.leaf(Tensor::scalar(2.0));
        assert!(matches!(b.add(x, y), Err(Error::Contract(_))));
    }

    #[test]
    fn one_node_per_op_and_each_visited_once() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::from_rows(&[vec![0.3, -0.2], vec![0.1, 0.4]]).unwrap());
        let x = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let wx = tape.matmul(w, x).unwrap();
        let t = tape.tanh(wx).unwrap();
        let s = tape.sum(t).unwrap();
        assert_eq!(tape.len(), 5);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.visited(), 4); // the constant input never receives gradient
        let g2 = tape.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap().data(), g2.get(w).unwrap().data());
    }
}

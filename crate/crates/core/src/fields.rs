//! Vector fields driving the hidden state.
//!
//! * [`matrix_field`]: the control-matrix field, `tanh(W2 relu(W1 h + b1) + b2)`
//!   reshaped to `v × u` and applied to `Ẋ`.
//! * [`jacobian_field_truncated`]: differentiates the implicit recurrence
//!   `h = f(X, h)` of an Elman cell and keeps the first correction term,
//!   `ḣ ≈ J_x Ẋ + J_h J_x Ẋ`. Only Jacobian-vector products are formed.
//! * [`jacobian_field_exact`]: solves `(I − J_h) ḣ = J_x Ẋ` densely. Forward-only,
//!   used as a reference for the truncated field.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{SurrogateConfig, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Matrix,
    JacobianTruncated,
    JacobianExact,
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Matrix => "matrix",
            FieldKind::JacobianTruncated => "jacobian-truncated",
            FieldKind::JacobianExact => "jacobian-exact",
        }
    }
}

/// Channel sizes: `input` (u) observed channels, `hidden` (v) state size,
/// `width` (d) inner layer size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDims {
    pub input: usize,
    pub hidden: usize,
    pub width: usize,
}

impl FieldDims {
    pub fn new(input: usize, hidden: usize, width: usize) -> Self {
        FieldDims { input, hidden, width }
    }
}

/// `w1: d×v, b1: d, w2: (u·v)×d, b2: u·v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFieldParams<T> {
    pub w1: T,
    pub b1: T,
    pub w2: T,
    pub b2: T,
}

/// `wx: d×u, wh: d×v, b1: d, w2: v×d, b2: v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianFieldParams<T> {
    pub wx: T,
    pub wh: T,
    pub b1: T,
    pub w2: T,
    pub b2: T,
}

impl<T> MatrixFieldParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> MatrixFieldParams<U> {
        MatrixFieldParams {
            w1: f(&self.w1),
            b1: f(&self.b1),
            w2: f(&self.w2),
            b2: f(&self.b2),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        [&self.w1, &self.b1, &self.w2, &self.b2].into_iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2].into_iter()
    }
}

impl<T> JacobianFieldParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> JacobianFieldParams<U> {
        JacobianFieldParams {
            wx: f(&self.wx),
            wh: f(&self.wh),
            b1: f(&self.b1),
            w2: f(&self.w2),
            b2: f(&self.b2),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        [&self.wx, &self.wh, &self.b1, &self.w2, &self.b2].into_iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        [&mut self.wx, &mut self.wh, &mut self.b1, &mut self.w2, &mut self.b2].into_iter()
    }
}

/// Uniform on `±1/√cols`.
pub(crate) fn init_weight(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let bound = 1.0 / (cols as Real).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dims")
}

impl MatrixFieldParams<Tensor> {
    pub fn zeros(dims: FieldDims) -> Self {
        let FieldDims {
            input: u,
            hidden: v,
            width: d,
        } = dims;
        MatrixFieldParams {
            w1: Tensor::zeros(&[d, v]),
            b1: Tensor::zeros(&[d]),
            w2: Tensor::zeros(&[u * v, d]),
            b2: Tensor::zeros(&[u * v]),
        }
    }

    pub fn init(dims: FieldDims, rng: &mut impl Rng) -> Self {
        let FieldDims {
            input: u,
            hidden: v,
            width: d,
        } = dims;
        MatrixFieldParams {
            w1: init_weight(d, v, rng),
            b1: Tensor::zeros(&[d]),
            w2: init_weight(u * v, d, rng),
            b2: Tensor::zeros(&[u * v]),
        }
    }
}

impl JacobianFieldParams<Tensor> {
    pub fn zeros(dims: FieldDims) -> Self {
        let FieldDims {
            input: u,
            hidden: v,
            width: d,
        } = dims;
        JacobianFieldParams {
            wx: Tensor::zeros(&[d, u]),
            wh: Tensor::zeros(&[d, v]),
            b1: Tensor::zeros(&[d]),
            w2: Tensor::zeros(&[v, d]),
            b2: Tensor::zeros(&[v]),
        }
    }

    pub fn init(dims: FieldDims, rng: &mut impl Rng) -> Self {
        let FieldDims {
            input: u,
            hidden: v,
            width: d,
        } = dims;
        JacobianFieldParams {
            wx: init_weight(d, u, rng),
            wh: init_weight(d, v, rng),
            b1: Tensor::zeros(&[d]),
            w2: init_weight(v, d, rng),
            b2: Tensor::zeros(&[v]),
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> JacobianFieldParams<Var> {
        self.map(|t| tape.leaf(t.clone()))
    }
}

/// `tanh(W2 relu(W1 h + b1) + b2)` reshaped row-major to `v × u`, times `Ẋ`.
pub fn matrix_field(tape: &mut Tape, p: &MatrixFieldParams<Var>, h: Var, xdot: Var) -> Result<Var> {
    let v = tape.value(h).numel();
    let u = tape.value(xdot).numel();
    let z = tape.matmul(p.w1, h)?;
    let z = tape.add(z, p.b1)?;
    let a = tape.relu(z)?;
    let o = tape.matmul(p.w2, a)?;
    let o = tape.add(o, p.b2)?;
    let m = tape.tanh(o)?;
    if tape.value(m).numel() != u * v {
        return Err(Error::shape("matrix_field", tape.value(m).shape(), &[v, u]));
    }
    let m = tape.reshape(m, &[v, u])?;
    tape.matmul(m, xdot)
}

/// `tanh(W2 relu(Wh h + Wx X + b1) + b2)`.
pub fn rnn_cell(tape: &mut Tape, p: &JacobianFieldParams<Var>, x: Var, h: Var) -> Result<Var> {
    let z = pre_activation(tape, p, x, h)?;
    let a = tape.relu(z)?;
    let o = tape.matmul(p.w2, a)?;
    let o = tape.add(o, p.b2)?;
    tape.tanh(o)
}

fn pre_activation(tape: &mut Tape, p: &JacobianFieldParams<Var>, x: Var, h: Var) -> Result<Var> {
    let zh = tape.matmul(p.wh, h)?;
    let zx = tape.matmul(p.wx, x)?;
    let z = tape.add(zh, zx)?;
    tape.add(z, p.b1)
}

/// Diagonal factors of the cell Jacobians at one `(X, h)`:
/// `J_x = diag(d_tanh) W2 diag(d_relu) Wx` and likewise for `J_h` with `Wh`.
#[derive(Clone, Copy, Debug)]
pub struct Linearization {
    pub d_relu: Var,
    pub d_tanh: Var,
}

impl Linearization {
    pub fn new(tape: &mut Tape, p: &JacobianFieldParams<Var>, x: Var, h: Var, cfg: &SurrogateConfig) -> Result<Self> {
        let z = pre_activation(tape, p, x, h)?;
        let d_relu = tape.relu_prime(z, cfg)?;
        let a = tape.relu(z)?;
        let o = tape.matmul(p.w2, a)?;
        let o = tape.add(o, p.b2)?;
        let f = tape.tanh(o)?;
        let f2 = tape.mul_elem(f, f)?;
        let d_tanh = tape.affine(f2, -1.0, 1.0)?;
        Ok(Linearization { d_relu, d_tanh })
    }

    fn through(&self, tape: &mut Tape, w2: Var, first: Var, vec: Var) -> Result<Var> {
        let z = tape.matmul(first, vec)?;
        let z = tape.mul_elem(self.d_relu, z)?;
        let o = tape.matmul(w2, z)?;
        tape.mul_elem(self.d_tanh, o)
    }

    /// `J_x · vec` for a u-vector.
    pub fn jvp_x(&self, tape: &mut Tape, p: &JacobianFieldParams<Var>, vec: Var) -> Result<Var> {
        self.through(tape, p.w2, p.wx, vec)
    }

    /// `J_h · vec` for a v-vector.
    pub fn jvp_h(&self, tape: &mut Tape, p: &JacobianFieldParams<Var>, vec: Var) -> Result<Var> {
        self.through(tape, p.w2, p.wh, vec)
    }
}

pub fn jvp_x(
    tape: &mut Tape,
    p: &JacobianFieldParams<Var>,
    x: Var,
    h: Var,
    vec: Var,
    cfg: &SurrogateConfig,
) -> Result<Var> {
    Linearization::new(tape, p, x, h, cfg)?.jvp_x(tape, p, vec)
}

pub fn jvp_h(
    tape: &mut Tape,
    p: &JacobianFieldParams<Var>,
    x: Var,
    h: Var,
    vec: Var,
    cfg: &SurrogateConfig,
) -> Result<Var> {
    Linearization::new(tape, p, x, h, cfg)?.jvp_h(tape, p, vec)
}

/// `g_x + J_h g_x` with `g_x = J_x Ẋ`.
pub fn jacobian_field_truncated(
    tape: &mut Tape,
    p: &JacobianFieldParams<Var>,
    h: Var,
    x: Var,
    xdot: Var,
    cfg: &SurrogateConfig,
) -> Result<Var> {
    let lin = Linearization::new(tape, p, x, h, cfg)?;
    let gx = lin.jvp_x(tape, p, xdot)?;
    let gxh = lin.jvp_h(tape, p, gx)?;
    tape.add(gx, gxh)
}

/// Dense `J_x` (v×u) and `J_h` (v×v), assembled column by column from JVPs
/// against basis vectors.
pub fn dense_jacobians(
    p: &JacobianFieldParams<Tensor>,
    x: &Tensor,
    h: &Tensor,
    cfg: &SurrogateConfig,
) -> Result<(Tensor, Tensor)> {
    let (u, v) = (x.numel(), h.numel());
    let mut tape = Tape::new();
    let pv = p.map(|t| tape.constant(t.clone()));
    let xv = tape.constant(x.clone());
    let hv = tape.constant(h.clone());
    let lin = Linearization::new(&mut tape, &pv, xv, hv, cfg)?;
    let mut jx = Tensor::zeros(&[v, u]);
    for j in 0..u {
        let mut e = vec![0.0; u];
        e[j] = 1.0;
        let e = tape.constant(Tensor::vector(e));
        let col = lin.jvp_x(&mut tape, &pv, e)?;
        for i in 0..v {
            jx.data_mut()[i * u + j] = tape.value(col).data()[i];
        }
    }
    let mut jh = Tensor::zeros(&[v, v]);
    for j in 0..v {
        let mut e = vec![0.0; v];
        e[j] = 1.0;
        let e = tape.constant(Tensor::vector(e));
        let col = lin.jvp_h(&mut tape, &pv, e)?;
        for i in 0..v {
            jh.data_mut()[i * v + j] = tape.value(col).data()[i];
        }
    }
    Ok((jx, jh))
}

/// Solves `(I − J_h) y = J_x Ẋ`. Not differentiable.
pub fn jacobian_field_exact(
    p: &JacobianFieldParams<Tensor>,
    h: &Tensor,
    x: &Tensor,
    xdot: &Tensor,
    cfg: &SurrogateConfig,
) -> Result<Tensor> {
    let (jx, jh) = dense_jacobians(p, x, h, cfg)?;
    let rhs = jx.matmul(xdot)?;
    let lhs = Tensor::identity(h.numel()).zip_map(&jh, |a, b| a - b);
    let y = linalg::solve(&lhs, rhs.data())?;
    let res = linalg::residual(&lhs, &y, rhs.data());
    if !(res < 1e-8) {
        return Err(Error::Numeric(format!("ill-conditioned I - J_h: residual {res:e}")));
    }
    Ok(Tensor::vector(y))
}

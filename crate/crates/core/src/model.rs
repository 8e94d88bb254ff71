//! Classifier: affine lift of `X(t_1)`, CDE integration, linear readout.

use serde::{Deserialize, Serialize};

use crate::autodiff::{SurrogateConfig, Tape, Var};
use crate::error::{Error, Result};
use crate::fields::{
    init_weight, jacobian_field_truncated, matrix_field, FieldDims, FieldKind, JacobianFieldParams, MatrixFieldParams,
};
use crate::interpolation::{CubicPath, InterpolationKind};
use crate::params::count_params;
use crate::rng::{stream, Stream};
use crate::solver::{integrate, SolverConfig};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Observed channels `u`, including an appended time channel.
    pub input_channels: usize,
    /// Hidden state size `v`.
    pub hidden: usize,
    /// Inner layer width `d`.
    pub width: usize,
    pub field: FieldKind,
    pub classes: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub interpolation: InterpolationKind,
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn dims(&self) -> FieldDims {
        FieldDims::new(self.input_channels, self.hidden, self.width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 || self.hidden == 0 || self.width == 0 || self.classes == 0 {
            return Err(Error::Input("model dimensions and class count must be positive".into()));
        }
        if self.field == FieldKind::JacobianExact {
            return Err(Error::Input(
                "the exact-inverse field is a reference only and cannot be trained".into(),
            ));
        }
        self.solver.validate()?;
        self.surrogate.validate()
    }

    pub fn param_count(&self) -> usize {
        count_params(self.field, self.input_channels, self.hidden, self.width, self.classes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FieldParams<T> {
    Matrix(MatrixFieldParams<T>),
    Jacobian(JacobianFieldParams<T>),
}

/// Every trainable tensor of the classifier, generic over storage
/// (`Tensor`) or tape handles (`Var`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    /// `v × u`
    pub lift_w: T,
    pub lift_b: T,
    pub field: FieldParams<T>,
    /// `C × v`
    pub readout_w: T,
    pub readout_b: T,
}

impl<T> ModelParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> ModelParams<U> {
        ModelParams {
            lift_w: f(&self.lift_w),
            lift_b: f(&self.lift_b),
            field: match &self.field {
                FieldParams::Matrix(p) => FieldParams::Matrix(p.map(&mut f)),
                FieldParams::Jacobian(p) => FieldParams::Jacobian(p.map(&mut f)),
            },
            readout_w: f(&self.readout_w),
            readout_b: f(&self.readout_b),
        }
    }

    pub fn iter(&self) -> Vec<&T> {
        let mut out = vec![&self.lift_w, &self.lift_b];
        match &self.field {
            FieldParams::Matrix(p) => out.extend(p.iter()),
            FieldParams::Jacobian(p) => out.extend(p.iter()),
        }
        out.push(&self.readout_w);
        out.push(&self.readout_b);
        out
    }

    pub fn iter_mut(&mut self) -> Vec<&mut T> {
        let mut out = vec![&mut self.lift_w, &mut self.lift_b];
        match &mut self.field {
            FieldParams::Matrix(p) => out.extend(p.iter_mut()),
            FieldParams::Jacobian(p) => out.extend(p.iter_mut()),
        }
        out.push(&mut self.readout_w);
        out.push(&mut self.readout_b);
        out
    }

    /// Names in [`iter`](Self::iter) order.
    pub fn names(&self) -> Vec<&'static str> {
        let mut out = vec!["lift.w", "lift.b"];
        match &self.field {
            FieldParams::Matrix(_) => out.extend(["field.w1", "field.b1", "field.w2", "field.b2"]),
            FieldParams::Jacobian(_) => out.extend(["field.wx", "field.wh", "field.b1", "field.w2", "field.b2"]),
        }
        out.extend(["readout.w", "readout.b"]);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams<Tensor>,
}

impl Model {
    /// Weights uniform on `±1/√fan_in`, biases zero, drawn from the seed's init stream.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(config.seed, Stream::Init);
        let dims = config.dims();
        let (u, v, c) = (config.input_channels, config.hidden, config.classes);
        let lift_w = init_weight(v, u, &mut rng);
        let field = match config.field {
            FieldKind::Matrix => FieldParams::Matrix(MatrixFieldParams::init(dims, &mut rng)),
            _ => FieldParams::Jacobian(JacobianFieldParams::init(dims, &mut rng)),
        };
        let readout_w = init_weight(c, v, &mut rng);
        Ok(Model {
            params: ModelParams {
                lift_w,
                lift_b: Tensor::zeros(&[v]),
                field,
                readout_w,
                readout_b: Tensor::zeros(&[c]),
            },
            config,
        })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let dims = config.dims();
        let (u, v, c) = (config.input_channels, config.hidden, config.classes);
        let field = match config.field {
            FieldKind::Matrix => FieldParams::Matrix(MatrixFieldParams::zeros(dims)),
            _ => FieldParams::Jacobian(JacobianFieldParams::zeros(dims)),
        };
        Ok(Model {
            params: ModelParams {
                lift_w: Tensor::zeros(&[v, u]),
                lift_b: Tensor::zeros(&[v]),
                field,
                readout_w: Tensor::zeros(&[c, v]),
                readout_b: Tensor::zeros(&[c]),
            },
            config,
        })
    }

    /// Number of allocated parameter entries.
    pub fn num_params(&self) -> usize {
        self.params.iter().iter().map(|t| t.numel()).sum()
    }

    pub fn bind(&self, tape: &mut Tape) -> ModelParams<Var> {
        self.params.map(|t| tape.leaf(t.clone()))
    }

    pub fn fit_path(&self, sample: &crate::interpolation::TimeSeriesSample) -> Result<CubicPath> {
        CubicPath::fit(sample, self.config.interpolation)
    }

    /// Logits for one control path, recorded on `tape`.
    pub fn forward(&self, tape: &mut Tape, params: &ModelParams<Var>, path: &CubicPath) -> Result<Var> {
        if path.channels() != self.config.input_channels {
            return Err(Error::shape(
                "forward",
                &[path.channels()],
                &[self.config.input_channels],
            ));
        }
        let knots = path.knots();
        let (x0, _) = path.eval(knots[0]);
        let x0 = tape.constant(Tensor::vector(x0));
        let h0 = tape.matmul(params.lift_w, x0)?;
        let h0 = tape.add(h0, params.lift_b)?;
        let surrogate = self.config.surrogate;
        let field = |tape: &mut Tape, t: Real, h: Var| -> Result<Var> {
            let (x, dx) = path.eval(t);
            let dx = tape.constant(Tensor::vector(dx));
            match &params.field {
                FieldParams::Matrix(p) => matrix_field(tape, p, h, dx),
                FieldParams::Jacobian(p) => {
                    let x = tape.constant(Tensor::vector(x));
                    jacobian_field_truncated(tape, p, h, x, dx, &surrogate)
                }
            }
        };
        let sol = integrate(tape, field, h0, knots, &self.config.solver)?;
        let logits = tape.matmul(params.readout_w, sol.final_state)?;
        tape.add(logits, params.readout_b)
    }

    /// Forward pass without keeping the tape.
    pub fn logits(&self, path: &CubicPath) -> Result<Tensor> {
        let mut tape = Tape::new();
        let params = self.params.map(|t| tape.constant(t.clone()));
        let out = self.forward(&mut tape, &params, path)?;
        Ok(tape.value(out).clone())
    }

    /// Cross-entropy loss, gradients in [`ModelParams::iter`] order, and logits.
    pub fn loss_and_grad(&self, path: &CubicPath, label: usize) -> Result<(Real, Vec<Tensor>, Tensor)> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape);
        let logits = self.forward(&mut tape, &params, path)?;
        let loss = loss_ce(&mut tape, logits, label)?;
        let grads = tape.backward(loss)?;
        let g = params
            .iter()
            .into_iter()
            .zip(self.params.iter())
            .map(|(&v, t)| grads.wrt(v, t))
            .collect();
        Ok((tape.value(loss).item(), g, tape.value(logits).clone()))
    }
}

/// `−log softmax(logits)[label]`.
pub fn loss_ce(tape: &mut Tape, logits: Var, label: usize) -> Result<Var> {
    let classes = tape.value(logits).numel();
    if label >= classes {
        return Err(Error::Input(format!("label {label} outside [0, {classes})")));
    }
    let ls = tape.log_softmax(logits)?;
    let picked = tape.pick(ls, label)?;
    tape.scale(picked, -1.0)
}

pub fn softmax(logits: &[Real]) -> Vec<Real> {
    let max = logits.iter().copied().fold(Real::NEG_INFINITY, Real::max);
    let exp: Vec<Real> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: Real = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Index of the first maximal logit.
pub fn argmax(logits: &[Real]) -> usize {
    let mut best = 0;
    for (i, &z) in logits.iter().enumerate() {
        if z > logits[best] {
            best = i;
        }
    }
    best
}

//! Plain-array re-implementation of the classifier's forward pass, used as the
//! finite-difference side of the full-model gradient check. Shares nothing
//! with the tape besides the fitted control path.

use crate::autodiff::{sigmoid, step, SurrogateMode};
use crate::interpolation::CubicPath;
use crate::model::{FieldParams, ModelConfig, ModelParams};
use crate::solver::Method;
use crate::tensor::{Real, Tensor};

fn matvec(m: &Tensor, x: &[Real]) -> Vec<Real> {
    let cols = m.cols();
    (0..m.rows())
        .map(|i| (0..cols).map(|j| m.data()[i * cols + j] * x[j]).sum())
        .collect()
}

fn add(a: &[Real], b: &[Real]) -> Vec<Real> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn axpy(y: &[Real], a: Real, x: &[Real]) -> Vec<Real> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

/// Supplies the ReLU-derivative factor for the `call`-th field evaluation
/// given the pre-activation `z`.
pub type ReluFactor<'a> = dyn FnMut(usize, &[Real]) -> Vec<Real> + 'a;

/// Cross-entropy loss of one sample.
pub fn reference_loss(
    config: &ModelConfig,
    params: &ModelParams<Tensor>,
    path: &CubicPath,
    label: usize,
    relu_factor: &mut ReluFactor<'_>,
) -> Real {
    let knots = path.knots();
    let (x0, _) = path.eval(knots[0]);
    let mut h = add(&matvec(&params.lift_w, &x0), params.lift_b.data());
    let mut call = 0usize;
    let mut field = |t: Real, h: &[Real]| -> Vec<Real> {
        let (x, dx) = path.eval(t);
        let out = match &params.field {
            FieldParams::Matrix(p) => {
                let a: Vec<Real> = add(&matvec(&p.w1, h), p.b1.data()).iter().map(|z| z.max(0.0)).collect();
                let m: Vec<Real> = add(&matvec(&p.w2, &a), p.b2.data()).iter().map(|o| o.tanh()).collect();
                let u = dx.len();
                (0..h.len())
                    .map(|r| (0..u).map(|c| m[r * u + c] * dx[c]).sum())
                    .collect()
            }
            FieldParams::Jacobian(p) => {
                let z = add(&add(&matvec(&p.wh, h), &matvec(&p.wx, &x)), p.b1.data());
                let d_relu = relu_factor(call, &z);
                let a: Vec<Real> = z.iter().map(|z| z.max(0.0)).collect();
                let f: Vec<Real> = add(&matvec(&p.w2, &a), p.b2.data()).iter().map(|o| o.tanh()).collect();
                let d_tanh: Vec<Real> = f.iter().map(|f| 1.0 - f * f).collect();
                let apply = |w: &Tensor, vec: &[Real]| -> Vec<Real> {
                    let inner: Vec<Real> = matvec(w, vec).iter().zip(&d_relu).map(|(a, b)| a * b).collect();
                    matvec(&p.w2, &inner).iter().zip(&d_tanh).map(|(a, b)| a * b).collect()
                };
                let gx = apply(&p.wx, &dx);
                let gxh = apply(&p.wh, &gx);
                add(&gx, &gxh)
            }
        };
        call += 1;
        out
    };
    let steps = config.solver.steps_per_interval;
    for w in knots.windows(2) {
        let dt = (w[1] - w[0]) / steps as Real;
        for j in 0..steps {
            let t = w[0] + j as Real * dt;
            h = match config.solver.method {
                Method::Euler => axpy(&h, dt, &field(t, &h)),
                Method::Rk4 => {
                    let k1 = field(t, &h);
                    let k2 = field(t + 0.5 * dt, &axpy(&h, 0.5 * dt, &k1));
                    let k3 = field(t + 0.5 * dt, &axpy(&h, 0.5 * dt, &k2));
                    let k4 = field(t + dt, &axpy(&h, dt, &k3));
                    let incr: Vec<Real> = (0..h.len()).map(|i| k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]).collect();
                    axpy(&h, dt / 6.0, &incr)
                }
            };
        }
    }
    let logits = add(&matvec(&params.readout_w, &h), params.readout_b.data());
    let max = logits.iter().copied().fold(Real::NEG_INFINITY, Real::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<Real>().ln();
    lse - logits[label]
}

/// Forward loss whose derivative equals what the tape computes for the
/// configured surrogate.
///
/// In replace mode the factor is `σ(kz)` and this is just the forward loss.
/// In backward-only mode the tape pairs a Heaviside forward value with a
/// sigmoid derivative; the matching function freezes the step at the
/// pre-activations `z₀` of the unperturbed parameters and adds
/// `σ(kz) − σ(kz₀)`, which equals the Heaviside value at the base point and
/// has the surrogate derivative.
pub struct SurrogateConsistentLoss<'a> {
    config: &'a ModelConfig,
    path: &'a CubicPath,
    label: usize,
    frozen: Vec<Vec<Real>>,
}

impl<'a> SurrogateConsistentLoss<'a> {
    pub fn new(config: &'a ModelConfig, base: &ModelParams<Tensor>, path: &'a CubicPath, label: usize) -> Self {
        let mut frozen = Vec::new();
        reference_loss(config, base, path, label, &mut |_, z| {
            frozen.push(z.to_vec());
            z.iter().map(|&z| step(z)).collect()
        });
        SurrogateConsistentLoss {
            config,
            path,
            label,
            frozen,
        }
    }

    pub fn value(&self, params: &ModelParams<Tensor>) -> Real {
        let k = self.config.surrogate.slope;
        let mode = self.config.surrogate.mode;
        reference_loss(self.config, params, self.path, self.label, &mut |call, z| match mode {
            SurrogateMode::Replace => z.iter().map(|&z| sigmoid(k * z)).collect(),
            SurrogateMode::BackwardOnly => z
                .iter()
                .zip(&self.frozen[call])
                .map(|(&z, &z0)| step(z0) + sigmoid(k * z) - sigmoid(k * z0))
                .collect(),
        })
    }

    /// Smallest `|z|` seen at the base point; kinks closer than the finite
    /// difference step make the check meaningless.
    pub fn min_abs_pre_activation(&self) -> Real {
        self.frozen.iter().flatten().fold(Real::INFINITY, |m, z| m.min(z.abs()))
    }
}

//! Self-contained oracle checks: finite-difference Jacobians, truncation
//! order, solver order, spline properties, full-model gradients and
//! parameter counting.

pub mod reference;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{grad_check_with, SurrogateConfig, SurrogateMode, Tape, Var};
use crate::error::Result;
use crate::fields::{
    jacobian_field_exact, jacobian_field_truncated, rnn_cell, FieldDims, FieldKind, JacobianFieldParams, Linearization,
};
use crate::interpolation::{CubicPath, InterpolationKind, TimeSeriesSample};
use crate::model::{loss_ce, FieldParams, Model, ModelConfig, ModelParams};
use crate::params::count_params;
use crate::solver::{integrate, Method, SolverConfig};
use crate::tensor::{Real, Tensor};
use reference::SurrogateConsistentLoss;

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

fn uniform_vec(n: usize, lo: Real, hi: Real, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::vector((0..n).map(|_| rng.random_range(lo..hi)).collect())
}

fn heaviside() -> SurrogateConfig {
    SurrogateConfig {
        mode: SurrogateMode::BackwardOnly,
        slope: 1.0,
    }
}

/// Random cell parameters with non-zero biases, plus an input and state.
fn random_cell(dims: FieldDims, rng: &mut ChaCha8Rng) -> (JacobianFieldParams<Tensor>, Tensor, Tensor) {
    let mut p = JacobianFieldParams::init(dims, rng);
    p.b1 = uniform_vec(dims.width, -0.5, 0.5, rng);
    p.b2 = uniform_vec(dims.hidden, -0.5, 0.5, rng);
    let x = uniform_vec(dims.input, -1.0, 1.0, rng);
    let h = uniform_vec(dims.hidden, -1.0, 1.0, rng);
    (p, x, h)
}

fn pre_activation(p: &JacobianFieldParams<Tensor>, x: &Tensor, h: &Tensor) -> Tensor {
    let zh = p.wh.matmul(h).expect("shapes");
    let zx = p.wx.matmul(x).expect("shapes");
    zh.zip_map(&zx, |a, b| a + b).zip_map(&p.b1, |a, b| a + b)
}

fn cell_value(p: &JacobianFieldParams<Tensor>, x: &Tensor, h: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let pv = p.map(|t| tape.constant(t.clone()));
    let (xv, hv) = (tape.constant(x.clone()), tape.constant(h.clone()));
    let out = rnn_cell(&mut tape, &pv, xv, hv)?;
    Ok(tape.value(out).clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct JacobianCheck {
    pub draws: usize,
    /// Max over draws and columns of `‖analytic − fd‖∞ / (‖fd‖∞ + 1e-12)`.
    pub max_rel_err: f64,
}

/// Compares analytic JVP columns (exact Heaviside factor) with central
/// differences of the cell. `corrupt_sign` flips the analytic result, to
/// confirm the check can fail.
pub fn jacobian_check(draws: usize, dims: FieldDims, seed: u64, corrupt_sign: bool) -> Result<JacobianCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps: Real = 1e-5;
    let cfg = heaviside();
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < draws {
        let (p, x, h) = random_cell(dims, &mut rng);
        if pre_activation(&p, &x, &h).data().iter().any(|z| z.abs() <= 1e-3) {
            continue;
        }
        done += 1;
        let mut tape = Tape::new();
        let pv = p.map(|t| tape.constant(t.clone()));
        let (xv, hv) = (tape.constant(x.clone()), tape.constant(h.clone()));
        let lin = Linearization::new(&mut tape, &pv, xv, hv, &cfg)?;
        for wrt_x in [true, false] {
            let n = if wrt_x { dims.input } else { dims.hidden };
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let e = tape.constant(Tensor::vector(e));
                let col = if wrt_x {
                    lin.jvp_x(&mut tape, &pv, e)?
                } else {
                    lin.jvp_h(&mut tape, &pv, e)?
                };
                let mut analytic = tape.value(col).clone();
                if corrupt_sign {
                    analytic = analytic.scale(-1.0);
                }
                let bump = |s: Real| -> Result<Tensor> {
                    let (mut xp, mut hp) = (x.clone(), h.clone());
                    if wrt_x {
                        xp.data_mut()[j] += s;
                    } else {
                        hp.data_mut()[j] += s;
                    }
                    cell_value(&p, &xp, &hp)
                };
                let fd = bump(eps)?.zip_map(&bump(-eps)?, |a, b| (a - b) / (2.0 * eps));
                let diff = analytic.zip_map(&fd, |a, b| a - b).max_abs();
                worst = worst.max((diff / (fd.max_abs() + 1e-12)) as f64);
            }
        }
    }
    Ok(JacobianCheck {
        draws,
        max_rel_err: worst,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationCheck {
    pub scales: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

pub const TRUNCATION_SCALES: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// Scales `Wh` by each ε and fits the log-log slope of ‖exact − truncated‖.
pub fn truncation_check(dims: FieldDims, seed: u64) -> Result<TruncationCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (base, x, h) = random_cell(dims, &mut rng);
    let xdot = uniform_vec(dims.input, -1.0, 1.0, &mut rng);
    let cfg = SurrogateConfig::default();
    let mut errors = Vec::new();
    for &eps in &TRUNCATION_SCALES {
        let mut p = base.clone();
        p.wh = base.wh.scale(eps as Real);
        let exact = jacobian_field_exact(&p, &h, &x, &xdot, &cfg)?;
        let mut tape = Tape::new();
        let pv = p.bind(&mut tape);
        let (hv, xv, dv) = (
            tape.constant(h.clone()),
            tape.constant(x.clone()),
            tape.constant(xdot.clone()),
        );
        let trunc = jacobian_field_truncated(&mut tape, &pv, hv, xv, dv, &cfg)?;
        errors.push(exact.zip_map(tape.value(trunc), |a, b| a - b).norm() as f64);
    }
    Ok(TruncationCheck {
        slope: loglog_slope(&TRUNCATION_SCALES, &errors),
        scales: TRUNCATION_SCALES.to_vec(),
        errors,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverOrderCheck {
    pub steps: Vec<usize>,
    pub euler_errors: Vec<f64>,
    pub rk4_errors: Vec<f64>,
    pub euler_slope: f64,
    pub rk4_slope: f64,
}

/// Convergence order on `ḣ = h`, `h(0) = 1`, over `[0, 1]`.
pub fn solver_order_check() -> Result<SolverOrderCheck> {
    let steps = vec![4usize, 8, 16, 32];
    let run = |method: Method, n: usize| -> Result<f64> {
        let mut tape = Tape::new();
        let h0 = tape.leaf(Tensor::vector(vec![1.0]));
        let cfg = SolverConfig {
            method,
            steps_per_interval: n,
            record_trajectory: false,
        };
        let sol = integrate(&mut tape, |_, _, h| Ok(h), h0, &[0.0, 1.0], &cfg)?;
        Ok((tape.value(sol.final_state).item() as f64 - 1f64.exp()).abs())
    };
    let euler_errors = steps
        .iter()
        .map(|&n| run(Method::Euler, n))
        .collect::<Result<Vec<_>>>()?;
    let rk4_errors = steps.iter().map(|&n| run(Method::Rk4, n)).collect::<Result<Vec<_>>>()?;
    let dt: Vec<f64> = steps.iter().map(|&n| 1.0 / n as f64).collect();
    Ok(SolverOrderCheck {
        euler_slope: loglog_slope(&dt, &euler_errors),
        rk4_slope: loglog_slope(&dt, &rk4_errors),
        steps,
        euler_errors,
        rk4_errors,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InterpolationCheck {
    pub knot_err: f64,
    pub derivative_err: f64,
    pub natural_boundary_err: f64,
    pub natural_continuity_err: f64,
    pub hermite_continuity_err: f64,
}

/// Spline properties on a random irregularly sampled 3-channel series.
pub fn interpolation_check(seed: u64) -> Result<InterpolationCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 12;
    let mut times = vec![0.0 as Real];
    for _ in 1..n {
        let last = *times.last().unwrap();
        times.push(last + rng.random_range(0.2..1.0));
    }
    let values = Tensor::matrix(n, 3, (0..3 * n).map(|_| rng.random_range(-2.0..2.0)).collect())?;
    let sample = TimeSeriesSample::new(times.clone(), values, None)?;
    let eps: Real = 1e-5;
    let mut check = InterpolationCheck {
        knot_err: 0.0,
        derivative_err: 0.0,
        natural_boundary_err: 0.0,
        natural_continuity_err: 0.0,
        hermite_continuity_err: 0.0,
    };
    let span = (times[0], times[n - 1]);
    for kind in [InterpolationKind::NaturalCubic, InterpolationKind::Hermite] {
        let path = CubicPath::fit(&sample, kind)?;
        for i in 0..n {
            let mut sides = Vec::new();
            if i + 1 < n {
                sides.push(path.eval_piece(i, times[i]));
            }
            if i > 0 {
                sides.push(path.eval_piece(i - 1, times[i]));
            }
            for x in sides {
                for (c, xc) in x.iter().enumerate() {
                    check.knot_err = check.knot_err.max((xc - sample.values.get(i, c)).abs() as f64);
                }
            }
        }
        let mut tested = 0;
        while tested < 100 {
            let t = rng.random_range(span.0..span.1);
            if times.iter().any(|k| (k - t).abs() < 4.0 * eps) {
                continue;
            }
            tested += 1;
            let (_, dx) = path.eval(t);
            let (xp, _) = path.eval(t + eps);
            let (xm, _) = path.eval(t - eps);
            for c in 0..3 {
                let fd = (xp[c] - xm[c]) / (2.0 * eps);
                check.derivative_err = check.derivative_err.max((fd - dx[c]).abs() as f64);
            }
        }
        for i in 1..n - 1 {
            match kind {
                InterpolationKind::NaturalCubic => {
                    let l = path.second_derivative(times[i], true);
                    let r = path.second_derivative(times[i], false);
                    for c in 0..3 {
                        check.natural_continuity_err = check.natural_continuity_err.max((l[c] - r[c]).abs() as f64);
                    }
                }
                InterpolationKind::Hermite => {
                    let l = path.deriv_piece(i - 1, times[i]);
                    let r = path.deriv_piece(i, times[i]);
                    for c in 0..3 {
                        check.hermite_continuity_err = check.hermite_continuity_err.max((l[c] - r[c]).abs() as f64);
                    }
                }
            }
        }
        if kind == InterpolationKind::NaturalCubic {
            for t in [times[0], times[n - 1]] {
                for v in path.second_derivative(t, t == times[n - 1]) {
                    check.natural_boundary_err = check.natural_boundary_err.max(v.abs() as f64);
                }
            }
        }
    }
    Ok(check)
}

/// The small configuration used for full-model gradient checks.
pub fn tiny_config(field: FieldKind, mode: SurrogateMode) -> ModelConfig {
    ModelConfig {
        input_channels: 2,
        hidden: 3,
        width: 4,
        field,
        classes: 2,
        solver: SolverConfig::default(),
        surrogate: SurrogateConfig { mode, slope: 1.0 },
        interpolation: InterpolationKind::NaturalCubic,
        seed: 0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelGradCheck {
    pub field: FieldKind,
    pub mode: SurrogateMode,
    pub max_rel_err: f64,
    pub checked: usize,
    pub excluded: usize,
}

fn tiny_path(rng: &mut ChaCha8Rng) -> Result<CubicPath> {
    let times: Vec<Real> = (0..5).map(|i| i as Real / 4.0).collect();
    let mut data = Vec::new();
    for &t in &times {
        data.push(rng.random_range(-1.0..1.0));
        data.push(t);
    }
    let s = TimeSeriesSample::new(times, Tensor::matrix(5, 2, data)?, Some(1))?;
    CubicPath::fit(&s, InterpolationKind::NaturalCubic)
}

fn rebuild<T: Clone>(template: &ModelParams<Tensor>, flat: &[T]) -> ModelParams<T> {
    let mut it = flat.iter();
    template.map(|_| it.next().expect("one entry per tensor").clone())
}

/// Tape gradient of the loss against central differences of the plain-array
/// reference forward pass (u=2, v=3, d=4, T=5, RK4).
pub fn model_grad_check(field: FieldKind, mode: SurrogateMode, seed: u64) -> Result<ModelGradCheck> {
    let mut cfg = tiny_config(field, mode);
    cfg.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let label = 1;
    // Redraw until no pre-activation sits within reach of the finite-difference step.
    let (model, path) = loop {
        let mut model = Model::new(cfg.clone())?;
        for t in [&mut model.params.lift_b, &mut model.params.readout_b] {
            *t = uniform_vec(t.numel(), -0.5, 0.5, &mut rng);
        }
        match &mut model.params.field {
            FieldParams::Matrix(p) => {
                p.b1 = uniform_vec(p.b1.numel(), -0.5, 0.5, &mut rng);
                p.b2 = uniform_vec(p.b2.numel(), -0.5, 0.5, &mut rng);
            }
            FieldParams::Jacobian(p) => {
                p.b1 = uniform_vec(p.b1.numel(), -0.5, 0.5, &mut rng);
                p.b2 = uniform_vec(p.b2.numel(), -0.5, 0.5, &mut rng);
            }
        }
        let path = tiny_path(&mut rng)?;
        let oracle = SurrogateConsistentLoss::new(&cfg, &model.params, &path, label);
        if oracle.min_abs_pre_activation() > 1e-3 {
            break (model, path);
        }
    };
    let oracle = SurrogateConsistentLoss::new(&cfg, &model.params, &path, label);
    let leaves: Vec<Tensor> = model.params.iter().into_iter().cloned().collect();
    let report = grad_check_with(
        |tape: &mut Tape, vars: &[Var]| {
            let params = rebuild(&model.params, vars);
            let logits = model.forward(tape, &params, &path)?;
            loss_ce(tape, logits, label)
        },
        |point: &[Tensor]| Ok(oracle.value(&rebuild(&model.params, point))),
        &leaves,
        1e-5,
    )?;
    Ok(ModelGradCheck {
        field,
        mode,
        max_rel_err: report.max_rel_err as f64,
        checked: report.checked,
        excluded: report.excluded.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamCountCheck {
    pub configurations: usize,
    pub mismatches: usize,
}

/// Closed-form counts against allocated entries for random dimensions.
pub fn param_count_check(configurations: usize, seed: u64) -> Result<ParamCountCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..configurations {
        let (u, v, d, c) = (
            rng.random_range(1..=8),
            rng.random_range(1..=16),
            rng.random_range(1..=32),
            rng.random_range(2..=10),
        );
        for field in [FieldKind::Matrix, FieldKind::JacobianTruncated] {
            let mut cfg = tiny_config(field, SurrogateMode::Replace);
            (cfg.input_channels, cfg.hidden, cfg.width, cfg.classes) = (u, v, d, c);
            if Model::new(cfg)?.num_params() != count_params(field, u, v, d, c) {
                mismatches += 1;
            }
        }
    }
    Ok(ParamCountCheck {
        configurations,
        mismatches,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    /// Test hook: negate analytic JVPs inside the Jacobian check.
    pub corrupt_jvp_sign: bool,
}

fn outcome(name: &'static str, r: Result<(bool, String)>) -> CheckResult {
    match r {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Runs every check; each result carries its measured values.
pub fn run_suite(opts: VerifyOptions) -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.push(outcome(
        "jacobian-jvp",
        jacobian_check(50, FieldDims::new(3, 5, 7), 1, opts.corrupt_jvp_sign).map(|c| {
            (
                c.max_rel_err < 1e-5,
                format!("max rel err {:.3e} over {} draws", c.max_rel_err, c.draws),
            )
        }),
    ));
    out.push(outcome(
        "truncation-order",
        truncation_check(FieldDims::new(3, 5, 7), 2).map(|c| {
            (
                (1.7..=2.3).contains(&c.slope),
                format!(
                    "slope {:.3} (errors {:?})",
                    c.slope,
                    c.errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()
                ),
            )
        }),
    ));
    out.push(outcome(
        "solver-order",
        solver_order_check().map(|c| {
            (
                (c.euler_slope - 1.0).abs() <= 0.15 && (c.rk4_slope - 4.0).abs() <= 0.3,
                format!("euler slope {:.3}, rk4 slope {:.3}", c.euler_slope, c.rk4_slope),
            )
        }),
    ));
    out.push(outcome(
        "interpolation",
        interpolation_check(3).map(|c| {
            (
                c.knot_err < 1e-9
                    && c.derivative_err < 1e-7
                    && c.natural_boundary_err < 1e-8
                    && c.natural_continuity_err < 1e-8
                    && c.hermite_continuity_err < 1e-9,
                format!(
                    "knot {:.1e}, derivative {:.1e}, boundary {:.1e}, C2 {:.1e}, C1 {:.1e}",
                    c.knot_err,
                    c.derivative_err,
                    c.natural_boundary_err,
                    c.natural_continuity_err,
                    c.hermite_continuity_err
                ),
            )
        }),
    ));
    for field in [FieldKind::Matrix, FieldKind::JacobianTruncated] {
        for mode in [SurrogateMode::Replace, SurrogateMode::BackwardOnly] {
            let name = match (field, mode) {
                (FieldKind::Matrix, SurrogateMode::Replace) => "model-gradient/matrix/replace",
                (FieldKind::Matrix, _) => "model-gradient/matrix/backward-only",
                (_, SurrogateMode::Replace) => "model-gradient/jacobian/replace",
                _ => "model-gradient/jacobian/backward-only",
            };
            out.push(outcome(
                name,
                model_grad_check(field, mode, 4).map(|c| {
                    (
                        c.max_rel_err < 1e-4,
                        format!(
                            "max rel err {:.3e} over {} entries ({} excluded)",
                            c.max_rel_err, c.checked, c.excluded
                        ),
                    )
                }),
            ));
        }
    }
    out.push(outcome(
        "param-count",
        param_count_check(20, 5).map(|c| {
            (
                c.mismatches == 0,
                format!("{} mismatches over {} configurations", c.mismatches, c.configurations),
            )
        }),
    ));
    out
}

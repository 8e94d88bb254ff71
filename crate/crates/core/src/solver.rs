//! Fixed-step integration of `ḣ = F(t, h)` recorded on a tape, so loss
//! gradients flow back through every solver step.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Euler,
    #[default]
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: Method,
    /// Equal substeps between consecutive knots.
    #[serde(default = "default_steps")]
    pub steps_per_interval: usize,
    #[serde(default)]
    pub record_trajectory: bool,
}

fn default_steps() -> usize {
    1
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Rk4,
            steps_per_interval: 1,
            record_trajectory: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_interval == 0 {
            return Err(Error::Input("steps_per_interval must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub final_state: Var,
    /// `(t, h(t))` after every step, starting with the initial state.
    /// Empty unless `record_trajectory` is set.
    pub trajectory: Vec<(Real, Var)>,
}

/// Integrates from `grid[0]` to the last grid point.
pub fn integrate<F>(tape: &mut Tape, mut field: F, h0: Var, grid: &[Real], cfg: &SolverConfig) -> Result<Solution>
where
    F: FnMut(&mut Tape, Real, Var) -> Result<Var>,
{
    cfg.validate()?;
    if grid.len() < 2 {
        return Err(Error::Input("integration grid needs at least two points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("integration grid must be strictly increasing".into()));
    }
    let mut h = h0;
    let mut trajectory = Vec::new();
    if cfg.record_trajectory {
        trajectory.push((grid[0], h));
    }
    let mut step = 0;
    for w in grid.windows(2) {
        let dt = (w[1] - w[0]) / cfg.steps_per_interval as Real;
        for j in 0..cfg.steps_per_interval {
            let t = w[0] + j as Real * dt;
            h = match cfg.method {
                Method::Euler => euler_step(tape, &mut field, t, dt, h)?,
                Method::Rk4 => rk4_step(tape, &mut field, t, dt, h)?,
            };
            let t_next = if j + 1 == cfg.steps_per_interval { w[1] } else { t + dt };
            if !tape.value(h).all_finite() {
                return Err(Error::NonFiniteState { step, t: t_next as f64 });
            }
            if cfg.record_trajectory {
                trajectory.push((t_next, h));
            }
            step += 1;
        }
    }
    Ok(Solution {
        final_state: h,
        trajectory,
    })
}

fn euler_step<F>(tape: &mut Tape, field: &mut F, t: Real, dt: Real, h: Var) -> Result<Var>
where
    F: FnMut(&mut Tape, Real, Var) -> Result<Var>,
{
    let k = field(tape, t, h)?;
    let dk = tape.scale(k, dt)?;
    tape.add(h, dk)
}

fn rk4_step<F>(tape: &mut Tape, field: &mut F, t: Real, dt: Real, h: Var) -> Result<Var>
where
    F: FnMut(&mut Tape, Real, Var) -> Result<Var>,
{
    let half = 0.5 * dt;
    let k1 = field(tape, t, h)?;
    let s = tape.scale(k1, half)?;
    let h2 = tape.add(h, s)?;
    let k2 = field(tape, t + half, h2)?;
    let s = tape.scale(k2, half)?;
    let h3 = tape.add(h, s)?;
    let k3 = field(tape, t + half, h3)?;
    let s = tape.scale(k3, dt)?;
    let h4 = tape.add(h, s)?;
    let k4 = field(tape, t + dt, h4)?;

    let mid = tape.add(k2, k3)?;
    let mid = tape.scale(mid, 2.0)?;
    let ends = tape.add(k1, k4)?;
    let total = tape.add(ends, mid)?;
    let incr = tape.scale(total, dt / 6.0)?;
    tape.add(h, incr)
}

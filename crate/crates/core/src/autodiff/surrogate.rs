use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Real;

/// How the ReLU-derivative factor inside the Jacobian field is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateMode {
    /// Forward value is `sigmoid(k z)`; its derivative is the exact sigmoid derivative.
    #[default]
    Replace,
    /// Forward value is the Heaviside step (0 at `z = 0`); the derivative attached
    /// to the node is still the sigmoid derivative.
    BackwardOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    #[serde(default)]
    pub mode: SurrogateMode,
    #[serde(default = "default_slope")]
    pub slope: Real,
}

fn default_slope() -> Real {
    1.0
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            mode: SurrogateMode::Replace,
            slope: 1.0,
        }
    }
}

impl SurrogateConfig {
    pub fn new(mode: SurrogateMode, slope: Real) -> Result<Self> {
        let cfg = SurrogateConfig { mode, slope };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slope > 0.0 && self.slope.is_finite()) {
            return Err(Error::Input(format!(
                "surrogate slope must be positive, got {}",
                self.slope
            )));
        }
        Ok(())
    }

    /// Forward value of the ReLU-derivative factor at `z`.
    pub fn forward(&self, z: Real) -> Real {
        match self.mode {
            SurrogateMode::Replace => sigmoid(self.slope * z),
            SurrogateMode::BackwardOnly => step(z),
        }
    }

    /// Derivative attached to the factor at `z`, in both modes.
    pub fn derivative(&self, z: Real) -> Real {
        let s = sigmoid(self.slope * z);
        self.slope * s * (1.0 - s)
    }
}

pub fn sigmoid(z: Real) -> Real {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Heaviside step with `step(0) = 0`.
pub fn step(z: Real) -> Real {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replace_mode_values() {
        let cfg = SurrogateConfig::default();
        assert_eq!(cfg.forward(0.0), 0.5);
        assert!((cfg.forward(1e3) - 1.0).abs() < 1e-12);
        assert!(cfg.forward(-1e3).abs() < 1e-12);
    }

    #[test]
    fn backward_only_is_heaviside_forward() {
        let cfg = SurrogateConfig::new(SurrogateMode::BackwardOnly, 1.0).unwrap();
        assert_eq!(cfg.forward(0.0), 0.0);
        assert_eq!(cfg.forward(1e-9), 1.0);
        assert_eq!(cfg.derivative(0.0), 0.25);
    }

    #[test]
    fn slope_must_be_positive() {
        assert!(SurrogateConfig::new(SurrogateMode::Replace, 0.0).is_err());
        assert!(SurrogateConfig::new(SurrogateMode::Replace, -1.0).is_err());
    }

    #[test]
    fn steepening_approaches_step() {
        for z in [-0.5, 0.5] {
            let gaps: Vec<Real> = [1.0, 10.0, 100.0]
                .iter()
                .map(|&k| (sigmoid(k * z) - step(z)).abs())
                .collect();
            assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
        }
    }
}

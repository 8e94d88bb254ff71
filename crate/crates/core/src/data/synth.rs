//! Small synthetic classification tasks.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::interpolation::TimeSeriesSample;
use crate::rng::{stream, Stream};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// `sin(2π f t)` with `f = 1` (class 0) or `f = 2` (class 1), `t ∈ [0, 1]`.
    SineFreq,
    /// Two-channel spirals turning clockwise (class 0) or counter-clockwise (class 1).
    Spiral,
}

/// `n` balanced samples of length `T` (class `i % 2`), Gaussian noise of std `noise`.
pub fn synth(kind: SynthKind, n: usize, len: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || len < 2 {
        return Err(Error::Input(format!(
            "synthetic data needs n >= 2 and T >= 2, got n={n}, T={len}"
        )));
    }
    let mut rng = stream(seed, Stream::Data);
    let times: Vec<Real> = (0..len).map(|i| i as Real / (len - 1) as Real).collect();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let noisy = |x: f64, rng: &mut _| -> Real {
            if noise > 0.0 {
                let z: f64 = Rng::sample(rng, StandardNormal);
                (x + noise * z) as Real
            } else {
                x as Real
            }
        };
        let values = match kind {
            SynthKind::SineFreq => {
                let f = (label + 1) as f64;
                let data = times
                    .iter()
                    .map(|&t| noisy((2.0 * PI * f * t as f64).sin(), &mut rng))
                    .collect();
                Tensor::matrix(len, 1, data)?
            }
            SynthKind::Spiral => {
                let phase: f64 = rng.random_range(0.0..2.0 * PI);
                let turn = if label == 0 { -1.0 } else { 1.0 };
                let mut data = Vec::with_capacity(2 * len);
                for &t in &times {
                    let t = t as f64;
                    let r = 0.2 + t;
                    let angle = phase + turn * 2.0 * PI * t;
                    data.push(noisy(r * angle.cos(), &mut rng));
                    data.push(noisy(r * angle.sin(), &mut rng));
                }
                Tensor::matrix(len, 2, data)?
            }
        };
        samples.push(TimeSeriesSample::new(times.clone(), values, Some(label))?);
    }
    let (name, classes) = match kind {
        SynthKind::SineFreq => ("sine-freq", ["freq1", "freq2"]),
        SynthKind::Spiral => ("spiral", ["clockwise", "counterclockwise"]),
    };
    let mut ds = Dataset::new(name, samples, classes.iter().map(|s| s.to_string()).collect())?;
    ds.provenance = format!("synth:{name} n={n} T={len} noise={noise} seed={seed}");
    Ok(ds)
}

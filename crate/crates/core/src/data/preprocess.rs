use serde::{Deserialize, Serialize};

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessOptions {
    #[serde(default = "yes")]
    pub append_time: bool,
    #[serde(default = "yes")]
    pub normalize: bool,
    #[serde(default = "yes")]
    pub rescale_time: bool,
}

fn yes() -> bool {
    true
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            append_time: true,
            normalize: true,
            rescale_time: true,
        }
    }
}

/// Per-channel statistics of the train split. Channels with zero variance are
/// only centred.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<Real>,
    pub std: Vec<Real>,
    pub centered_only: Vec<bool>,
}

impl Normalization {
    fn from_train(ds: &Dataset) -> Result<Self> {
        let train = ds.indices(Split::Train);
        if train.is_empty() {
            return Err(Error::Input("normalization needs at least one training sample".into()));
        }
        let u = ds.channels;
        let mut sum = vec![0.0; u];
        let mut count = 0usize;
        for &i in &train {
            let s = &ds.samples[i];
            for k in 0..s.len() {
                for (acc, x) in sum.iter_mut().zip(s.row(k)) {
                    *acc += x;
                }
            }
            count += s.len();
        }
        let mean: Vec<Real> = sum.iter().map(|s| s / count as Real).collect();
        let mut sq = vec![0.0; u];
        for &i in &train {
            let s = &ds.samples[i];
            for k in 0..s.len() {
                for ((acc, x), m) in sq.iter_mut().zip(s.row(k)).zip(&mean) {
                    *acc += (x - m) * (x - m);
                }
            }
        }
        let std: Vec<Real> = sq.iter().map(|s| (s / count as Real).sqrt()).collect();
        let centered_only = std.iter().map(|&s| !(s > 1e-12)).collect();
        Ok(Normalization {
            mean,
            std,
            centered_only,
        })
    }

    pub fn apply(&self, x: Real, channel: usize) -> Real {
        let centred = x - self.mean[channel];
        if self.centered_only[channel] {
            centred
        } else {
            centred / self.std[channel]
        }
    }
}

/// Rescales time to `[0, 1]`, normalizes channels with train-split statistics
/// and appends the (rescaled) time as the last channel, each step optional.
pub fn preprocess(ds: &Dataset, opts: &PreprocessOptions) -> Result<Dataset> {
    ds.validate()?;
    let mut out = ds.clone();
    if opts.rescale_time {
        let lo = ds.samples.iter().map(|s| s.times[0]).fold(Real::INFINITY, Real::min);
        let hi = ds
            .samples
            .iter()
            .map(|s| *s.times.last().unwrap())
            .fold(Real::NEG_INFINITY, Real::max);
        let span = hi - lo;
        for s in &mut out.samples {
            for t in &mut s.times {
                *t = (*t - lo) / span;
            }
        }
        out.note(format!("times rescaled from [{lo}, {hi}] to [0, 1]"));
    }
    if opts.normalize {
        let norm = Normalization::from_train(ds)?;
        for s in &mut out.samples {
            let u = s.channels();
            for (k, x) in s.values.data_mut().iter_mut().enumerate() {
                *x = norm.apply(*x, k % u);
            }
        }
        out.note(format!("normalized with train mean {:?} std {:?}", norm.mean, norm.std));
        for (c, &flag) in norm.centered_only.iter().enumerate() {
            if flag {
                out.note(format!("warning: channel {c} has zero variance, centred only"));
            }
        }
        out.normalization = Some(norm);
    }
    if opts.append_time {
        for s in &mut out.samples {
            let (n, u) = (s.len(), s.channels());
            let mut data = Vec::with_capacity(n * (u + 1));
            for k in 0..n {
                data.extend_from_slice(s.row(k));
                data.push(s.times[k]);
            }
            s.values = Tensor::matrix(n, u + 1, data)?;
        }
        out.channels += 1;
        out.note("time appended as last channel");
    }
    out.validate()?;
    Ok(out)
}

//! Mini-batch training and evaluation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::fields::FieldKind;
use crate::interpolation::CubicPath;
use crate::model::{argmax, loss_ce, Model};
use crate::optim::{Adam, AdamConfig};
use crate::rng::{stream, Stream};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: Real,
    #[serde(default = "default_beta1")]
    pub beta1: Real,
    #[serde(default = "default_beta2")]
    pub beta2: Real,
    #[serde(default = "default_eps")]
    pub eps: Real,
}

fn default_epochs() -> usize {
    30
}
fn default_batch() -> usize {
    32
}
fn default_lr() -> Real {
    AdamConfig::default().lr
}
fn default_beta1() -> Real {
    AdamConfig::default().beta1
}
fn default_beta2() -> Real {
    AdamConfig::default().beta2
}
fn default_eps() -> Real {
    AdamConfig::default().eps
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: default_epochs(),
            batch_size: default_batch(),
            lr: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Input("batch_size must be positive".into()));
        }
        if !(self.lr >= 0.0)
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.eps > 0.0)
        {
            return Err(Error::Input("invalid optimizer settings".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: Real,
    pub train_accuracy: Real,
    pub val_loss: Option<Real>,
    pub val_accuracy: Option<Real>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub field: FieldKind,
    pub param_count: usize,
    pub epochs: Vec<EpochMetrics>,
    /// Epoch (1-based) whose parameters were kept; 0 when no epoch ran.
    pub best_epoch: usize,
    pub test_accuracy: Option<Real>,
    pub test_loss: Option<Real>,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// `epoch,split,loss,accuracy,seed,config_hash,version`, one row per split
    /// per epoch and a final `test` row. No timing data, so identical runs give
    /// identical files.
    pub fn metrics_csv(&self, config_hash: &str, version: &str) -> String {
        let mut out = String::from("epoch,split,loss,accuracy,seed,config_hash,version\n");
        let mut row = |epoch: usize, split: &str, loss: Real, acc: Real| {
            out.push_str(&format!(
                "{epoch},{split},{loss},{acc},{},{config_hash},{version}\n",
                self.seed
            ));
        };
        for e in &self.epochs {
            row(e.epoch, "train", e.train_loss, e.train_accuracy);
            if let (Some(l), Some(a)) = (e.val_loss, e.val_accuracy) {
                row(e.epoch, "val", l, a);
            }
        }
        if let (Some(l), Some(a)) = (self.test_loss, self.test_accuracy) {
            row(self.best_epoch, "test", l, a);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: Real,
    pub mean_loss: Real,
    pub count: usize,
}

/// Control paths for every sample, fitted once.
pub fn fit_paths(model: &Model, ds: &Dataset) -> Result<Vec<CubicPath>> {
    ds.samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            model.fit_path(s).map_err(|e| Error::Sample {
                sample: i,
                source: Box::new(e),
            })
        })
        .collect()
}

fn label_of(ds: &Dataset, i: usize) -> Result<usize> {
    ds.samples[i]
        .label
        .ok_or_else(|| Error::Input(format!("sample {i} has no label")))
}

/// Accuracy and mean cross-entropy over `indices`.
pub fn evaluate_indices(model: &Model, ds: &Dataset, paths: &[CubicPath], indices: &[usize]) -> Result<Evaluation> {
    let results: Vec<(Real, bool)> = indices
        .par_iter()
        .map(|&i| {
            let label = label_of(ds, i)?;
            let wrap = |e| Error::Sample {
                sample: i,
                source: Box::new(e),
            };
            let logits = model.logits(&paths[i]).map_err(wrap)?;
            let mut tape = crate::autodiff::Tape::new();
            let z = tape.constant(logits.clone());
            let loss = loss_ce(&mut tape, z, label)?;
            Ok((tape.value(loss).item(), argmax(logits.data()) == label))
        })
        .collect::<Result<_>>()?;
    let n = results.len().max(1) as Real;
    Ok(Evaluation {
        accuracy: results.iter().filter(|r| r.1).count() as Real / n,
        mean_loss: results.iter().map(|r| r.0).sum::<Real>() / n,
        count: results.len(),
    })
}

pub fn evaluate(model: &Model, ds: &Dataset, split: Split) -> Result<Evaluation> {
    let paths = fit_paths(model, ds)?;
    evaluate_indices(model, ds, &paths, &ds.indices(split))
}

/// Adam on batch-averaged gradients. Parameters from the epoch with the best
/// validation accuracy (ties: lower validation loss) are kept and used for
/// the test evaluation.
pub fn train(model: &mut Model, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    model.config.validate()?;
    if ds.channels != model.config.input_channels {
        return Err(Error::Input(format!(
            "dataset has {} channels, model expects {}",
            ds.channels, model.config.input_channels
        )));
    }
    if ds.classes() != model.config.classes {
        return Err(Error::Input(format!(
            "dataset has {} classes, model expects {}",
            ds.classes(),
            model.config.classes
        )));
    }
    let started = Instant::now();
    let paths = fit_paths(model, ds)?;
    let mut train_idx = ds.indices(Split::Train);
    if train_idx.is_empty() {
        return Err(Error::Input("no training samples".into()));
    }
    let val_idx = ds.indices(Split::Val);
    let test_idx = ds.indices(Split::Test);
    for &i in &train_idx {
        label_of(ds, i)?;
    }

    let mut rng = stream(model.config.seed, Stream::Shuffle);
    let mut adam = Adam::new(cfg.adam(), model.params.iter());
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, Real, Real)> = None;
    let mut best_params = model.params.clone();

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, batch) in train_idx.chunks(cfg.batch_size).enumerate() {
            let current: &Model = model;
            let results: Vec<(Real, Vec<Tensor>, bool)> = batch
                .par_iter()
                .map(|&i| {
                    let label = label_of(ds, i)?;
                    let (loss, grads, logits) = current.loss_and_grad(&paths[i], label).map_err(|e| Error::Sample {
                        sample: i,
                        source: Box::new(e),
                    })?;
                    Ok((loss, grads, argmax(logits.data()) == label))
                })
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as Real;
            let mut total: Vec<Tensor> = model.params.iter().iter().map(|t| Tensor::zeros(t.shape())).collect();
            for (loss, grads, hit) in &results {
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: b });
                }
                loss_sum += loss;
                correct += *hit as usize;
                for (acc, g) in total.iter_mut().zip(grads) {
                    acc.add_assign(g);
                }
            }
            let total: Vec<Tensor> = total.into_iter().map(|t| t.scale(scale)).collect();
            adam.update(model.params.iter_mut(), &total);
        }
        let n = train_idx.len() as Real;
        let val = if val_idx.is_empty() {
            None
        } else {
            Some(evaluate_indices(model, ds, &paths, &val_idx)?)
        };
        let metrics = EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as Real / n,
            val_loss: val.map(|v| v.mean_loss),
            val_accuracy: val.map(|v| v.accuracy),
        };
        // Without a validation split the latest epoch wins.
        let (acc, loss) = match val {
            Some(v) => (v.accuracy, v.mean_loss),
            None => (Real::INFINITY, Real::NEG_INFINITY),
        };
        let improved = match best {
            None => true,
            Some((_, ba, bl)) => acc > ba || (acc == ba && loss < bl) || val.is_none(),
        };
        if improved {
            best = Some((epoch, acc, loss));
            best_params = model.params.clone();
        }
        epochs.push(metrics);
    }
    model.params = best_params;

    let test = if test_idx.is_empty() {
        None
    } else {
        Some(evaluate_indices(model, ds, &paths, &test_idx)?)
    };
    Ok(TrainReport {
        seed: model.config.seed,
        field: model.config.field,
        param_count: model.num_params(),
        epochs,
        best_epoch: best.map_or(0, |b| b.0),
        test_accuracy: test.map(|t| t.accuracy),
        test_loss: test.map(|t| t.mean_loss),
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

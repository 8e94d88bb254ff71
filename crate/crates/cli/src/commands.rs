//! Subcommand bodies. Each returns data for the caller to print; files are
//! written here.

use std::fs;
use std::path::{Path, PathBuf};

use ncde_core::params::{field_params, find_ratio, lift_params, readout_params, RatioMatch};
use ncde_core::training::Evaluation;
use ncde_core::verify::{run_suite, CheckResult, VerifyOptions};
use ncde_core::{count_params, evaluate, train, Checkpoint, FieldKind, Model, Result, Split, TrainReport, VERSION};
use serde::Serialize;

use crate::config::RunConfig;

/// The report file written next to each run's metrics.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub version: &'static str,
    pub seed: u64,
    pub dataset: String,
    pub provenance: String,
    pub report: TrainReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub version: &'static str,
    pub field: FieldKind,
    pub param_count: usize,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub acc_mean: f64,
    pub acc_std: f64,
}

impl Summary {
    pub fn line(&self) -> String {
        format!(
            "{} acc_mean={:.4} acc_std={:.4} runs={} params={}",
            self.field.name(),
            self.acc_mean,
            self.acc_std,
            self.accuracies.len(),
            self.param_count
        )
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Serialize)]
pub struct Plan {
    pub config_hash: String,
    pub version: &'static str,
    pub fields: Vec<FieldKind>,
    pub runs: Vec<PathBuf>,
    pub config: RunConfig,
}

pub fn plan(cfg: &RunConfig, root: &Path, fields: &[FieldKind]) -> Plan {
    let runs = fields
        .iter()
        .flat_map(|&f| cfg.seeds.iter().map(move |&s| run_dir(root, fields.len() > 1, f, s)))
        .collect();
    Plan {
        config_hash: cfg.hash(),
        version: VERSION,
        fields: fields.to_vec(),
        runs,
        config: cfg.clone(),
    }
}

fn run_dir(root: &Path, per_field: bool, field: FieldKind, seed: u64) -> PathBuf {
    let base = if per_field {
        root.join(field.name())
    } else {
        root.to_path_buf()
    };
    base.join(format!("seed-{seed}"))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Trains every seed for one field kind and writes per-run artifacts.
fn train_field(
    cfg: &RunConfig,
    root: &Path,
    field: FieldKind,
    per_field: bool,
    log: &mut dyn FnMut(String),
) -> Result<Summary> {
    let hash = cfg.hash();
    let mut accuracies = Vec::new();
    let mut param_count = 0;
    for &seed in &cfg.seeds {
        let ds = cfg.load_dataset(seed)?;
        let mut mc = cfg.model_config(ds.channels, ds.classes(), seed);
        mc.field = field;
        let mut model = Model::new(mc)?;
        let report = train(&mut model, &ds, &cfg.training)?;
        let dir = run_dir(root, per_field, field, seed);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("metrics.csv"), report.metrics_csv(&hash, VERSION))?;
        let mut ckpt = Checkpoint::from_model(&model);
        ckpt.config_hash = Some(hash.clone());
        ckpt.save(dir.join("checkpoint.json"))?;
        let acc = report.test_accuracy.map_or(f64::NAN, |a| a as f64);
        log(format!(
            "{} seed={seed} test_accuracy={acc:.4} best_epoch={} time={:.1}s",
            field.name(),
            report.best_epoch,
            report.wall_time_secs
        ));
        param_count = report.param_count;
        accuracies.push(acc);
        write_json(
            &dir.join("report.json"),
            &RunRecord {
                config_hash: hash.clone(),
                version: VERSION,
                seed,
                dataset: ds.name.clone(),
                provenance: ds.provenance.clone(),
                report,
            },
        )?;
    }
    let (acc_mean, acc_std) = mean_std(&accuracies);
    Ok(Summary {
        config_hash: hash,
        version: VERSION,
        field,
        param_count,
        seeds: cfg.seeds.clone(),
        accuracies,
        acc_mean,
        acc_std,
    })
}

pub fn train_cmd(cfg: &RunConfig, root: &Path, log: &mut dyn FnMut(String)) -> Result<Summary> {
    let summary = train_field(cfg, root, cfg.model.field, false, log)?;
    write_json(&root.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub config_hash: String,
    pub version: &'static str,
    pub hidden: usize,
    pub width: usize,
    pub rows: Vec<Summary>,
}

impl Comparison {
    /// Aligned two-column table: accuracy mean ± std and parameter count per field.
    pub fn table(&self) -> String {
        let names: Vec<&str> = self.rows.iter().map(|r| r.field.name()).collect();
        let acc: Vec<String> = self
            .rows
            .iter()
            .map(|r| format!("{:.4} ± {:.4}", r.acc_mean, r.acc_std))
            .collect();
        let params: Vec<String> = self.rows.iter().map(|r| r.param_count.to_string()).collect();
        let widths: Vec<usize> = (0..self.rows.len())
            .map(|i| {
                [
                    names[i].chars().count(),
                    acc[i].chars().count(),
                    params[i].chars().count(),
                ]
                .into_iter()
                .max()
                .unwrap()
            })
            .collect();
        let line = |label: &str, cells: &[String]| {
            let mut s = format!("{label:<10}");
            for (c, w) in cells.iter().zip(&widths) {
                s.push_str(&format!("  {c:>w$}", w = *w));
            }
            s.push('\n');
            s
        };
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let mut out = line("", &names);
        out.push_str(&line("accuracy", &acc));
        out.push_str(&line("# params", &params));
        out
    }
}

pub fn compare_cmd(cfg: &RunConfig, root: &Path, log: &mut dyn FnMut(String)) -> Result<Comparison> {
    let mut rows = Vec::new();
    for field in [FieldKind::Matrix, FieldKind::JacobianTruncated] {
        rows.push(train_field(cfg, root, field, true, log)?);
    }
    let cmp = Comparison {
        config_hash: cfg.hash(),
        version: VERSION,
        hidden: cfg.model.hidden,
        width: cfg.model.width,
        rows,
    };
    write_json(&root.join("compare.json"), &cmp)?;
    fs::write(root.join("compare.txt"), cmp.table())?;
    Ok(cmp)
}

#[derive(Debug, Serialize)]
pub struct EvalRecord {
    pub config_hash: String,
    pub checkpoint_hash: Option<String>,
    pub version: &'static str,
    pub seed: u64,
    pub split: Split,
    pub accuracy: f64,
    pub mean_loss: f64,
    pub count: usize,
}

/// Rebuilds the dataset for the checkpoint's seed and scores one split.
pub fn eval_cmd(cfg: &RunConfig, checkpoint: &Path, split: Split) -> Result<EvalRecord> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let checkpoint_hash = ckpt.config_hash.clone();
    let model = ckpt.into_model()?;
    let ds = cfg.load_dataset(model.config.seed)?;
    let Evaluation {
        accuracy,
        mean_loss,
        count,
    } = evaluate(&model, &ds, split)?;
    Ok(EvalRecord {
        config_hash: cfg.hash(),
        checkpoint_hash,
        version: VERSION,
        seed: model.config.seed,
        split,
        accuracy: accuracy as f64,
        mean_loss: mean_loss as f64,
        count,
    })
}

#[derive(Debug, Serialize)]
pub struct CountRow {
    pub field: FieldKind,
    pub field_part: usize,
    pub lift: usize,
    pub readout: usize,
    pub total: usize,
}

#[derive(Debug, Serialize)]
pub struct ParamReport {
    pub u: usize,
    pub v: usize,
    pub d: usize,
    pub classes: usize,
    pub rows: Vec<CountRow>,
    /// Matrix field part over Jacobian field part.
    pub field_ratio: f64,
}

pub fn params_cmd(u: usize, v: usize, d: usize, classes: usize) -> ParamReport {
    let rows: Vec<CountRow> = [FieldKind::Matrix, FieldKind::JacobianTruncated]
        .into_iter()
        .map(|field| CountRow {
            field,
            field_part: field_params(field, u, v, d),
            lift: lift_params(u, v),
            readout: readout_params(v, classes),
            total: count_params(field, u, v, d, classes),
        })
        .collect();
    ParamReport {
        u,
        v,
        d,
        classes,
        field_ratio: rows[0].field_part as f64 / rows[1].field_part as f64,
        rows,
    }
}

impl ParamReport {
    pub fn text(&self) -> String {
        let mut s = format!("u={} v={} d={} classes={}\n", self.u, self.v, self.d, self.classes);
        s.push_str(&format!(
            "{:<20}{:>12}{:>10}{:>10}{:>12}\n",
            "field", "field part", "lift", "readout", "total"
        ));
        for r in &self.rows {
            s.push_str(&format!(
                "{:<20}{:>12}{:>10}{:>10}{:>12}\n",
                r.field.name(),
                r.field_part,
                r.lift,
                r.readout,
                r.total
            ));
        }
        s.push_str(&format!(
            "field-part ratio (matrix / jacobian): {:.2}\n",
            self.field_ratio
        ));
        s.push_str("field part: vector field weights and biases; total adds the input lift and the linear readout\n");
        s
    }
}

pub fn find_ratio_cmd(target: f64) -> RatioMatch {
    find_ratio(target)
}

pub fn verify_cmd(opts: VerifyOptions) -> Vec<CheckResult> {
    run_suite(opts)
}

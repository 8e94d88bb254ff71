//! Run configuration: one JSON file describes data, model, training and seeds.

use std::path::{Path, PathBuf};

use ncde_core::data::{parse_csv, parse_ts, preprocess, synth, CsvSchema, PreprocessOptions, SynthKind};
use ncde_core::{
    Dataset, Error, FieldKind, InterpolationKind, ModelConfig, Result, SolverConfig, SurrogateConfig, TrainConfig,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "NCDE_OUT";
const DEFAULT_OUT: &str = "runs";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synth {
        generator: SynthKind,
        n: usize,
        length: usize,
        #[serde(default)]
        noise: f64,
        /// Seed of the generator, independent of the run seeds.
        #[serde(default)]
        seed: u64,
    },
    Ts {
        train: PathBuf,
        #[serde(default)]
        test: Option<PathBuf>,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        test: Option<PathBuf>,
        #[serde(default = "id_column")]
        id_column: String,
        #[serde(default = "time_column")]
        time_column: String,
        #[serde(default = "label_column")]
        label_column: String,
    },
}

fn id_column() -> String {
    CsvSchema::default().id
}
fn time_column() -> String {
    CsvSchema::default().time
}
fn label_column() -> String {
    CsvSchema::default().label
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_field")]
    pub field: FieldKind,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub interpolation: InterpolationKind,
}

fn default_hidden() -> usize {
    16
}
fn default_width() -> usize {
    32
}
fn default_field() -> FieldKind {
    FieldKind::JacobianTruncated
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden: default_hidden(),
            width: default_width(),
            field: default_field(),
            solver: SolverConfig::default(),
            surrogate: SurrogateConfig::default(),
            interpolation: InterpolationKind::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// Ignored when a separate test file is given.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Share of the training portion held out for checkpoint selection.
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
}

fn default_test_fraction() -> f64 {
    0.2
}
fn default_val_fraction() -> f64 {
    0.15
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            test_fraction: default_test_fraction(),
            val_fraction: default_val_fraction(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub preprocess: PreprocessOptions,
    #[serde(default)]
    pub split: SplitSection,
    /// Output directory; `--out` and then the environment take precedence in that order.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3]
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| config_error(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Everything that can be checked without loading data or computing.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_error("seeds must not be empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(config_error("seeds must be distinct"));
        }
        let m = &self.model;
        if m.hidden == 0 || m.width == 0 {
            return Err(config_error("model.hidden and model.width must be positive"));
        }
        self.training.validate()?;
        m.solver.validate()?;
        m.surrogate.validate()?;
        for (name, f) in [
            ("test_fraction", self.split.test_fraction),
            ("val_fraction", self.split.val_fraction),
        ] {
            if !(0.0..1.0).contains(&f) {
                return Err(config_error(format!("split.{name} must lie in [0, 1)")));
            }
        }
        match &self.dataset {
            DatasetSpec::Synth { n, length, noise, .. } => {
                if *n < 4 || *length < 2 {
                    return Err(config_error("synthetic dataset needs n >= 4 and length >= 2"));
                }
                if !noise.is_finite() || *noise < 0.0 {
                    return Err(config_error("synthetic noise must be a non-negative number"));
                }
            }
            DatasetSpec::Ts { train, test } => check_files(train, test.as_deref())?,
            DatasetSpec::Csv { path, test, .. } => check_files(path, test.as_deref())?,
        }
        self.model_config(1, 2, 0).validate()
    }

    pub fn model_config(&self, input_channels: usize, classes: usize, seed: u64) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            input_channels,
            hidden: m.hidden,
            width: m.width,
            field: m.field,
            classes,
            solver: m.solver,
            surrogate: m.surrogate,
            interpolation: m.interpolation,
            seed,
        }
    }

    /// Hex SHA-256 of the canonical JSON without the output location and
    /// seed list; every artifact records its own seed next to the hash.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        canonical.seeds.clear();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_root(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output {
            return p.clone();
        }
        std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// Loads, splits (by `seed`) and preprocesses the dataset.
    pub fn load_dataset(&self, seed: u64) -> Result<Dataset> {
        let mut ds = match &self.dataset {
            DatasetSpec::Synth {
                generator,
                n,
                length,
                noise,
                seed: data_seed,
            } => synth(*generator, *n, *length, *noise, *data_seed)?,
            DatasetSpec::Ts { train, test } => with_test(parse_ts(train)?, test.as_deref().map(parse_ts).transpose()?)?,
            DatasetSpec::Csv {
                path,
                test,
                id_column,
                time_column,
                label_column,
            } => {
                let schema = CsvSchema {
                    id: id_column.clone(),
                    time: time_column.clone(),
                    label: label_column.clone(),
                };
                let test = test.as_deref().map(|p| parse_csv(p, &schema)).transpose()?;
                with_test(parse_csv(path, &schema)?, test)?
            }
        };
        if ds.indices(ncde_core::Split::Test).is_empty() {
            ds.split_stratified(self.split.test_fraction, self.split.val_fraction, seed)?;
        } else {
            ds.carve_validation(self.split.val_fraction, seed)?;
        }
        preprocess(&ds, &self.preprocess)
    }
}

fn with_test(train: Dataset, test: Option<Dataset>) -> Result<Dataset> {
    match test {
        Some(t) => train.append_test(t),
        None => Ok(train),
    }
}

fn check_files(a: &Path, b: Option<&Path>) -> Result<()> {
    for p in std::iter::once(a).chain(b) {
        if !p.is_file() {
            return Err(config_error(format!("dataset file not found: {}", p.display())));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"dataset": {"kind": "synth", "generator": "sine-freq", "n": 16, "length": 8}}"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.seeds, vec![0, 1, 2, 3]);
        assert_eq!(cfg.model.field, FieldKind::JacobianTruncated);
        assert_eq!(cfg.training.epochs, 30);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replacen('{', r#"{"learning_rate": 1,"#, 1);
        assert!(RunConfig::parse(&bad).is_err());
        let nested =
            r#"{"dataset": {"kind": "synth", "generator": "sine-freq", "n": 16, "length": 8}, "model": {"hiden": 3}}"#;
        assert!(RunConfig::parse(nested).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let exact = r#"{"dataset": {"kind": "synth", "generator": "spiral", "n": 16, "length": 8}, "model": {"field": "jacobian-exact"}}"#;
        assert!(RunConfig::parse(exact).is_err());
        let no_seeds = r#"{"dataset": {"kind": "synth", "generator": "spiral", "n": 16, "length": 8}, "seeds": []}"#;
        assert!(RunConfig::parse(no_seeds).is_err());
        let missing = r#"{"dataset": {"kind": "ts", "train": "/nonexistent/x.ts"}}"#;
        assert!(RunConfig::parse(missing).is_err());
        let lr =
            r#"{"dataset": {"kind": "synth", "generator": "spiral", "n": 16, "length": 8}, "training": {"lr": -1}}"#;
        assert!(RunConfig::parse(lr).is_err());
    }

    #[test]
    fn hash_ignores_output_and_seeds() {
        let a = RunConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        b.seeds = vec![9];
        assert_eq!(a.hash(), b.hash());
        b.model.hidden += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn split_depends_on_seed() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let a = cfg.load_dataset(0).unwrap();
        assert_eq!(a.splits, cfg.load_dataset(0).unwrap().splits);
        assert_ne!(a.splits, cfg.load_dataset(1).unwrap().splits);
        assert_eq!(a.channels, 2);
    }
}

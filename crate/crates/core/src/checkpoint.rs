//! JSON checkpoints.
//!
//! ```json
//! { "format": "ncde-checkpoint", "format_version": 1, "artifact_version": "0.1.0",
//!   "seed": 0, "config": { ...ModelConfig... },
//!   "params": [ { "name": "lift.w", "shape": [v, u], "data": [...] }, ... ] }
//! ```
//! Parameters appear in a fixed order and `data` is row-major.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::tensor::{Real, Tensor};

pub const FORMAT: &str = "ncde-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<Real>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub format_version: u32,
    pub artifact_version: String,
    pub seed: u64,
    #[serde(default)]
    pub config_hash: Option<String>,
    pub config: ModelConfig,
    pub params: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        let params = model
            .params
            .names()
            .into_iter()
            .zip(model.params.iter())
            .map(|(name, t)| NamedTensor {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            })
            .collect();
        Checkpoint {
            format: FORMAT.into(),
            format_version: FORMAT_VERSION,
            artifact_version: crate::VERSION.into(),
            seed: model.config.seed,
            config_hash: None,
            config: model.config.clone(),
            params,
        }
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format != FORMAT || self.format_version != FORMAT_VERSION {
            return Err(Error::Input(format!(
                "unsupported checkpoint format {} v{}",
                self.format, self.format_version
            )));
        }
        let mut model = Model::zeros(self.config)?;
        let names = model.params.names();
        if names.len() != self.params.len() {
            return Err(Error::Input(
                "checkpoint parameter count does not match its config".into(),
            ));
        }
        for ((slot, name), stored) in model.params.iter_mut().into_iter().zip(names).zip(self.params) {
            if stored.name != name || stored.shape != slot.shape() {
                return Err(Error::Input(format!(
                    "checkpoint entry {} {:?} does not match expected {name} {:?}",
                    stored.name,
                    stored.shape,
                    slot.shape()
                )));
            }
            *slot = Tensor::new(stored.shape, stored.data)?;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FieldKind;
    use crate::interpolation::InterpolationKind;

    fn config(field: FieldKind) -> ModelConfig {
        ModelConfig {
            input_channels: 2,
            hidden: 3,
            width: 5,
            field,
            classes: 2,
            solver: Default::default(),
            surrogate: Default::default(),
            interpolation: InterpolationKind::Hermite,
            seed: 17,
        }
    }

    #[test]
    fn save_and_load_restores_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        for field in [FieldKind::Matrix, FieldKind::JacobianTruncated] {
            let model = Model::new(config(field)).unwrap();
            let path = dir.path().join("ckpt.json");
            Checkpoint::from_model(&model).save(&path).unwrap();
            let back = Checkpoint::load(&path).unwrap().into_model().unwrap();
            assert_eq!(back, model);
        }
    }

    #[test]
    fn mismatched_entries_rejected() {
        let model = Model::new(config(FieldKind::Matrix)).unwrap();
        let mut ck = Checkpoint::from_model(&model);
        ck.params[2].shape = vec![1, 1];
        assert!(ck.clone().into_model().is_err());
        let mut ck = Checkpoint::from_model(&model);
        ck.format_version = 99;
        assert!(ck.into_model().is_err());
    }
}

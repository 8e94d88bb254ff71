//! Labeled time-series collections: file formats, generators, preprocessing.

mod csv;
mod preprocess;
mod synth;
mod ts;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use self::csv::{parse_csv, parse_csv_str, write_csv, CsvSchema};
pub use preprocess::{preprocess, Normalization, PreprocessOptions};
pub use synth::{synth, SynthKind};
pub use ts::{parse_ts, parse_ts_str, write_ts};

use crate::error::{Error, Result};
use crate::interpolation::TimeSeriesSample;
use crate::rng::{stream, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<TimeSeriesSample>,
    pub class_names: Vec<String>,
    pub channels: usize,
    /// Free-form record of where the data came from and what was done to it.
    pub provenance: String,
    /// One entry per sample.
    pub splits: Vec<Split>,
    pub normalization: Option<Normalization>,
}

impl Dataset {
    /// All samples start in the train split.
    pub fn new(name: impl Into<String>, samples: Vec<TimeSeriesSample>, class_names: Vec<String>) -> Result<Self> {
        let channels = samples.first().map_or(0, TimeSeriesSample::channels);
        let ds = Dataset {
            name: name.into(),
            splits: vec![Split::Train; samples.len()],
            samples,
            class_names,
            channels,
            provenance: String::new(),
            normalization: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Input("dataset has no samples".into()));
        }
        if self.splits.len() != self.samples.len() {
            return Err(Error::Input("split assignment does not cover every sample".into()));
        }
        for (i, s) in self.samples.iter().enumerate() {
            s.validate().map_err(|e| Error::Sample {
                sample: i,
                source: Box::new(e),
            })?;
            if s.channels() != self.channels {
                return Err(Error::Input(format!(
                    "sample {i} has {} channels, expected {}",
                    s.channels(),
                    self.channels
                )));
            }
            if let Some(l) = s.label {
                if l >= self.class_names.len() {
                    return Err(Error::Input(format!(
                        "sample {i} has label {l} outside [0, {})",
                        self.class_names.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn note(&mut self, entry: impl AsRef<str>) {
        if !self.provenance.is_empty() {
            self.provenance.push_str("; ");
        }
        self.provenance.push_str(entry.as_ref());
    }

    /// Content equality ignoring provenance and split assignment.
    pub fn same_content(&self, other: &Dataset) -> bool {
        self.name == other.name
            && self.samples == other.samples
            && self.class_names == other.class_names
            && self.channels == other.channels
    }

    fn by_class(&self, among: impl Fn(usize) -> bool) -> BTreeMap<Option<usize>, Vec<usize>> {
        let mut groups: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            if among(i) {
                groups.entry(s.label).or_default().push(i);
            }
        }
        groups
    }

    /// Stratified three-way split: `test_fraction` of each class goes to test,
    /// then `val_fraction` of what remains goes to validation.
    pub fn split_stratified(&mut self, test_fraction: f64, val_fraction: f64, seed: u64) -> Result<()> {
        check_fraction(test_fraction)?;
        check_fraction(val_fraction)?;
        let mut rng = stream(seed, Stream::Split);
        for (_, mut idx) in self.by_class(|_| true) {
            idx.shuffle(&mut rng);
            let n_test = (idx.len() as f64 * test_fraction).round() as usize;
            let n_val = ((idx.len() - n_test) as f64 * val_fraction).round() as usize;
            for (k, &i) in idx.iter().enumerate() {
                self.splits[i] = if k < n_test {
                    Split::Test
                } else if k < n_test + n_val {
                    Split::Val
                } else {
                    Split::Train
                };
            }
        }
        self.note(format!(
            "split test={test_fraction} val={val_fraction} stratified seed={seed}"
        ));
        Ok(())
    }

    /// Moves `val_fraction` of each class's training samples to validation.
    pub fn carve_validation(&mut self, val_fraction: f64, seed: u64) -> Result<()> {
        check_fraction(val_fraction)?;
        let mut rng = stream(seed, Stream::Split);
        let train: Vec<bool> = self.splits.iter().map(|&s| s != Split::Test).collect();
        for (_, mut idx) in self.by_class(|i| train[i]) {
            idx.shuffle(&mut rng);
            let n_val = (idx.len() as f64 * val_fraction).round() as usize;
            for (k, &i) in idx.iter().enumerate() {
                self.splits[i] = if k < n_val { Split::Val } else { Split::Train };
            }
        }
        self.note(format!("validation={val_fraction} of train, stratified seed={seed}"));
        Ok(())
    }

    /// Concatenates a separately supplied test set, which must share classes and channels.
    pub fn append_test(mut self, test: Dataset) -> Result<Dataset> {
        if test.class_names != self.class_names || test.channels != self.channels {
            return Err(Error::Input(
                "test set classes or channels differ from train set".into(),
            ));
        }
        self.splits.extend(std::iter::repeat_n(Split::Test, test.len()));
        self.samples.extend(test.samples);
        self.note(format!("test from {}", test.provenance));
        Ok(self)
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if !(0.0..1.0).contains(&f) {
        return Err(Error::Input(format!("split fraction {f} outside [0, 1)")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_are_disjoint_stratified_and_deterministic() {
        let mut a = synth(SynthKind::SineFreq, 100, 5, 0.0, 1).unwrap();
        let mut b = a.clone();
        a.split_stratified(0.2, 0.15, 42).unwrap();
        b.split_stratified(0.2, 0.15, 42).unwrap();
        assert_eq!(a.splits, b.splits);
        let test = a.indices(Split::Test);
        let val = a.indices(Split::Val);
        let train = a.indices(Split::Train);
        assert_eq!(test.len() + val.len() + train.len(), 100);
        assert_eq!(test.len(), 20);
        assert_eq!(val.len(), 12);
        let class0_test = test.iter().filter(|&&i| a.samples[i].label == Some(0)).count();
        assert_eq!(class0_test, 10);

        let mut c = a.clone();
        c.split_stratified(0.2, 0.15, 43).unwrap();
        assert_ne!(a.splits, c.splits);
    }

    #[test]
    fn rejects_mixed_channels() {
        let mut ds = synth(SynthKind::SineFreq, 4, 5, 0.0, 1).unwrap();
        let spiral = synth(SynthKind::Spiral, 2, 5, 0.0, 1).unwrap();
        ds.samples.push(spiral.samples[0].clone());
        ds.splits.push(Split::Train);
        assert!(ds.validate().is_err());
    }
}

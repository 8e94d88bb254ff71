//! Shared fixtures for the benchmarks.

use ncde_core::data::{preprocess, synth, PreprocessOptions, SynthKind};
use ncde_core::{
    Dataset, FieldKind, InterpolationKind, ModelConfig, SolverConfig, SurrogateConfig, Tensor, TimeSeriesSample,
};

/// Sine-frequency data with time appended, split 80/20.
pub fn sine_dataset(n: usize, len: usize) -> Dataset {
    let mut ds = synth(SynthKind::SineFreq, n, len, 0.05, 0).expect("valid generator settings");
    ds.split_stratified(0.2, 0.0, 0).expect("valid fractions");
    preprocess(&ds, &PreprocessOptions::default()).expect("preprocessing succeeds")
}

pub fn model_config(field: FieldKind, channels: usize, hidden: usize, width: usize) -> ModelConfig {
    ModelConfig {
        input_channels: channels,
        hidden,
        width,
        field,
        classes: 2,
        solver: SolverConfig::default(),
        surrogate: SurrogateConfig::default(),
        interpolation: InterpolationKind::NaturalCubic,
        seed: 0,
    }
}

/// A smooth multichannel series on an irregular grid.
pub fn series(len: usize, channels: usize) -> TimeSeriesSample {
    let times: Vec<f64> = (0..len).map(|i| i as f64 + 0.3 * ((i * 7) % 3) as f64).collect();
    let rows: Vec<Vec<_>> = times
        .iter()
        .map(|&t| (0..channels).map(|c| ((c + 1) as f64 * 0.1 * t).sin() as _).collect())
        .collect();
    let times = times.into_iter().map(|t| t as _).collect();
    TimeSeriesSample::new(times, Tensor::from_rows(&rows).expect("rectangular"), None).expect("valid series")
}

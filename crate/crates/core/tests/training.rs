use ncde_core::data::{preprocess, synth, PreprocessOptions, SynthKind};
use ncde_core::training::evaluate_indices;
use ncde_core::{
    evaluate, train, Dataset, FieldKind, InterpolationKind, Model, ModelConfig, Real, SolverConfig, Split,
    SurrogateConfig, Tensor, TimeSeriesSample, TrainConfig,
};

fn config(field: FieldKind, channels: usize, hidden: usize, width: usize, seed: u64) -> ModelConfig {
    ModelConfig {
        input_channels: channels,
        hidden,
        width,
        field,
        classes: 2,
        solver: SolverConfig::default(),
        surrogate: SurrogateConfig::default(),
        interpolation: InterpolationKind::NaturalCubic,
        seed,
    }
}

fn sine(n: usize, len: usize, seed: u64) -> Dataset {
    let mut ds = synth(SynthKind::SineFreq, n, len, 0.05, 11).unwrap();
    ds.split_stratified(0.2, 0.15, seed).unwrap();
    preprocess(&ds, &PreprocessOptions::default()).unwrap()
}

const FIELDS: [FieldKind; 2] = [FieldKind::Matrix, FieldKind::JacobianTruncated];

#[test]
fn zero_learning_rate_leaves_parameters_bitwise() {
    let ds = sine(24, 8, 0);
    for field in FIELDS {
        let mut model = Model::new(config(field, ds.channels, 3, 4, 1)).unwrap();
        let before = model.params.clone();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 4,
            lr: 0.0,
            ..TrainConfig::default()
        };
        train(&mut model, &ds, &cfg).unwrap();
        let same = before
            .iter()
            .iter()
            .zip(model.params.iter())
            .all(|(a, b)| a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(same, "{field:?}");
    }
}

#[test]
fn single_sample_is_memorized() {
    let times: Vec<Real> = (0..6).map(|i| i as Real / 5.0).collect();
    let rows: Vec<Vec<Real>> = times.iter().map(|&t| vec![(4.0 * t).sin(), t]).collect();
    let s = TimeSeriesSample::new(times, Tensor::from_rows(&rows).unwrap(), Some(1)).unwrap();
    let ds = Dataset::new("one", vec![s], vec!["a".into(), "b".into()]).unwrap();
    for field in FIELDS {
        let mut model = Model::new(config(field, 2, 4, 8, 2)).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            lr: 1e-2,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &ds, &cfg).unwrap();
        let last = report.epochs.last().unwrap().train_loss;
        assert!(last < 0.01, "{field:?}: final loss {last}");
    }
}

#[test]
fn loss_trends_down_early() {
    let ds = sine(512, 50, 0);
    for field in FIELDS {
        let mut model = Model::new(config(field, ds.channels, 16, 32, 3)).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &ds, &cfg).unwrap();
        let losses: Vec<Real> = report.epochs.iter().map(|e| e.train_loss).collect();
        let rises = losses.windows(2).filter(|w| w[1] >= w[0]).count();
        assert!(rises <= 1, "{field:?}: {losses:?}");
        assert!(losses[4] < losses[0], "{field:?}: {losses:?}");
    }
}

#[test]
fn untrained_accuracy_is_near_chance_and_deterministic() {
    let ds = sine(200, 10, 0);
    let all: Vec<usize> = (0..ds.len()).collect();
    for field in FIELDS {
        let mut accs = Vec::new();
        for seed in 0..8 {
            let model = Model::new(config(field, ds.channels, 4, 8, seed)).unwrap();
            let paths = ncde_core::training::fit_paths(&model, &ds).unwrap();
            let a = evaluate_indices(&model, &ds, &paths, &all).unwrap();
            let b = evaluate_indices(&model, &ds, &paths, &all).unwrap();
            assert_eq!(a.accuracy.to_bits(), b.accuracy.to_bits());
            assert_eq!(a.mean_loss.to_bits(), b.mean_loss.to_bits());
            assert_eq!(a.count, 200);
            accs.push(a.accuracy);
        }
        let mean = accs.iter().sum::<Real>() / accs.len() as Real;
        assert!((mean - 0.5).abs() <= 0.15, "{field:?}: {accs:?}");
    }
}

#[test]
fn same_seed_same_report() {
    let ds = sine(40, 8, 4);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 8,
        ..TrainConfig::default()
    };
    for field in FIELDS {
        let run = || {
            let mut model = Model::new(config(field, ds.channels, 3, 5, 4)).unwrap();
            let r = train(&mut model, &ds, &cfg).unwrap();
            (r.metrics_csv("h", "v"), model.params)
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn spiral_direction_is_learned() {
    let mut ds = synth(SynthKind::Spiral, 128, 16, 0.05, 5).unwrap();
    ds.split_stratified(0.2, 0.15, 0).unwrap();
    let ds = preprocess(&ds, &PreprocessOptions::default()).unwrap();
    for field in FIELDS {
        let mut model = Model::new(config(field, ds.channels, 8, 16, 0)).unwrap();
        let cfg = TrainConfig {
            epochs: 30,
            lr: 1e-2,
            ..TrainConfig::default()
        };
        train(&mut model, &ds, &cfg).unwrap();
        let acc = evaluate(&model, &ds, Split::Test).unwrap().accuracy;
        assert!(acc >= 0.9, "{field:?}: {acc}");
    }
}

#[test]
fn channel_mismatch_is_rejected() {
    let ds = sine(16, 6, 0);
    let mut model = Model::new(config(FieldKind::Matrix, ds.channels + 1, 3, 4, 0)).unwrap();
    assert!(train(&mut model, &ds, &TrainConfig::default()).is_err());
}

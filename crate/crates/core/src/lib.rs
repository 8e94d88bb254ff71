//! Neural controlled differential equations for time-series classification.
//!
//! Two interchangeable vector fields drive the hidden state along a cubic
//! control path: the control-matrix field and a Jacobian field derived from
//! an Elman cell, which needs far fewer parameters. Everything trains through
//! a small reverse-mode tape, and [`verify`] bundles numerical oracles for
//! the pieces that are easy to get subtly wrong.

pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod fields;
pub mod interpolation;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod params;
pub mod rng;
pub mod solver;
pub mod tensor;
pub mod training;
pub mod verify;

pub use autodiff::{grad_check, SurrogateConfig, SurrogateMode, Tape, Var};
pub use checkpoint::Checkpoint;
pub use data::{Dataset, Split};
pub use error::{Error, Result};
pub use fields::{FieldDims, FieldKind, JacobianFieldParams, MatrixFieldParams};
pub use interpolation::{CubicPath, InterpolationKind, TimeSeriesSample};
pub use model::{Model, ModelConfig, ModelParams};
pub use optim::{Adam, AdamConfig};
pub use params::count_params;
pub use solver::{Method, SolverConfig};
pub use tensor::{Real, Tensor};
pub use training::{evaluate, train, Evaluation, TrainConfig, TrainReport};

/// Crate version, embedded in every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

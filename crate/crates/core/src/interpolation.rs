//! Piecewise-cubic control paths through observed time series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::tensor::{Real, Tensor};

/// One observed series: `times` (length T) and a `T × u` matrix of values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesSample {
    pub times: Vec<Real>,
    pub values: Tensor,
    pub label: Option<usize>,
}

impl TimeSeriesSample {
    pub fn new(times: Vec<Real>, values: Tensor, label: Option<usize>) -> Result<Self> {
        let s = TimeSeriesSample { times, values, label };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.values.cols()
    }

    /// Observation at index `i`, one entry per channel.
    pub fn row(&self, i: usize) -> &[Real] {
        let u = self.channels();
        &self.values.data()[i * u..(i + 1) * u]
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() < 2 {
            return Err(Error::Input(format!(
                "a series needs at least two observations, got {}",
                self.times.len()
            )));
        }
        if self.values.shape().len() != 2 || self.values.rows() != self.times.len() {
            return Err(Error::Input(format!(
                "values shape {:?} does not match {} timestamps",
                self.values.shape(),
                self.times.len()
            )));
        }
        if let Some(i) = self.times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Input(format!(
                "timestamps must be strictly increasing (index {} -> {})",
                i,
                i + 1
            )));
        }
        if !self.values.all_finite() || self.times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Input("series contains non-finite entries".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolationKind {
    /// C² spline with zero curvature at both ends.
    #[default]
    NaturalCubic,
    /// C¹ Hermite spline with Catmull-Rom slopes.
    Hermite,
}

/// Per-channel piecewise cubic `X(t) = a + bτ + cτ² + dτ³`, `τ = t − t_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicPath {
    knots: Vec<Real>,
    channels: usize,
    /// `coeffs[i * channels + c]` holds `[a, b, c, d]` of channel `c` on interval `i`.
    coeffs: Vec<[Real; 4]>,
    kind: InterpolationKind,
}

impl CubicPath {
    pub fn fit(sample: &TimeSeriesSample, kind: InterpolationKind) -> Result<Self> {
        sample.validate()?;
        let t = &sample.times;
        let n = t.len();
        let u = sample.channels();
        let h: Vec<Real> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let mut coeffs = vec![[0.0; 4]; (n - 1) * u];
        let mut y = vec![0.0; n];
        for c in 0..u {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = sample.values.get(i, c);
            }
            let pieces = match kind {
                InterpolationKind::NaturalCubic => natural_pieces(&h, &y),
                InterpolationKind::Hermite => hermite_pieces(t, &h, &y),
            };
            for (i, p) in pieces.into_iter().enumerate() {
                coeffs[i * u + c] = p;
            }
        }
        Ok(CubicPath {
            knots: t.clone(),
            channels: u,
            coeffs,
            kind,
        })
    }

    pub fn knots(&self) -> &[Real] {
        &self.knots
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn kind(&self) -> InterpolationKind {
        self.kind
    }

    fn piece(&self, i: usize) -> &[[Real; 4]] {
        &self.coeffs[i * self.channels..(i + 1) * self.channels]
    }

    /// Interval containing `t`, clamped to the first and last pieces.
    fn locate(&self, t: Real) -> usize {
        let last = self.knots.len() - 2;
        self.knots[1..=last].partition_point(|&k| k <= t).min(last)
    }

    /// Value and time-derivative of the path at `t`. Outside the observed window
    /// the path continues linearly with the boundary derivative.
    pub fn eval(&self, t: Real) -> (Vec<Real>, Vec<Real>) {
        let first = self.knots[0];
        let last = *self.knots.last().expect("at least two knots");
        if t < first {
            let piece = self.piece(0);
            let dx: Vec<Real> = piece.iter().map(|p| p[1]).collect();
            let x = piece.iter().map(|p| p[0] + p[1] * (t - first)).collect();
            return (x, dx);
        }
        if t > last {
            let i = self.knots.len() - 2;
            let tau = last - self.knots[i];
            let piece = self.piece(i);
            let dx: Vec<Real> = piece.iter().map(|p| deriv(p, tau)).collect();
            let x = piece
                .iter()
                .zip(&dx)
                .map(|(p, d)| value(p, tau) + d * (t - last))
                .collect();
            return (x, dx);
        }
        let i = self.locate(t);
        let tau = t - self.knots[i];
        let piece = self.piece(i);
        (
            piece.iter().map(|p| value(p, tau)).collect(),
            piece.iter().map(|p| deriv(p, tau)).collect(),
        )
    }

    /// Second derivative at `t`, taken from the piece on the left of `t` when
    /// `from_left` and `t` is a knot.
    pub fn second_derivative(&self, t: Real, from_left: bool) -> Vec<Real> {
        let mut i = self.locate(t);
        if from_left && i > 0 && t == self.knots[i] {
            i -= 1;
        }
        let tau = t - self.knots[i];
        self.piece(i).iter().map(|p| 2.0 * p[2] + 6.0 * p[3] * tau).collect()
    }

    /// Value of interval `i`'s cubic at absolute time `t`, without clamping.
    pub fn eval_piece(&self, i: usize, t: Real) -> Vec<Real> {
        let tau = t - self.knots[i];
        self.piece(i).iter().map(|p| value(p, tau)).collect()
    }

    /// Derivative of interval `i`'s cubic at absolute time `t`.
    pub fn deriv_piece(&self, i: usize, t: Real) -> Vec<Real> {
        let tau = t - self.knots[i];
        self.piece(i).iter().map(|p| deriv(p, tau)).collect()
    }
}

fn value(p: &[Real; 4], tau: Real) -> Real {
    p[0] + tau * (p[1] + tau * (p[2] + tau * p[3]))
}

fn deriv(p: &[Real; 4], tau: Real) -> Real {
    p[1] + tau * (2.0 * p[2] + 3.0 * tau * p[3])
}

fn natural_pieces(h: &[Real], y: &[Real]) -> Vec<[Real; 4]> {
    let n = y.len();
    // Second derivatives at the knots; both ends pinned to zero.
    let mut m = vec![0.0; n];
    if n > 2 {
        let k = n - 2;
        let mut lower = vec![0.0; k];
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for j in 0..k {
            let i = j + 1;
            lower[j] = h[i - 1];
            diag[j] = 2.0 * (h[i - 1] + h[i]);
            upper[j] = h[i];
            rhs[j] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        m[1..n - 1].copy_from_slice(&solve_tridiagonal(&lower, &diag, &upper, &rhs));
    }
    (0..n - 1)
        .map(|i| {
            let hi = h[i];
            [
                y[i],
                (y[i + 1] - y[i]) / hi - hi * (2.0 * m[i] + m[i + 1]) / 6.0,
                m[i] / 2.0,
                (m[i + 1] - m[i]) / (6.0 * hi),
            ]
        })
        .collect()
}

fn hermite_pieces(t: &[Real], h: &[Real], y: &[Real]) -> Vec<[Real; 4]> {
    let n = y.len();
    let slopes: Vec<Real> = (0..n)
        .map(|i| match i {
            0 => (y[1] - y[0]) / h[0],
            i if i == n - 1 => (y[i] - y[i - 1]) / h[i - 1],
            i => (y[i + 1] - y[i - 1]) / (t[i + 1] - t[i - 1]),
        })
        .collect();
    (0..n - 1)
        .map(|i| {
            let hi = h[i];
            let secant = (y[i + 1] - y[i]) / hi;
            let (m0, m1) = (slopes[i], slopes[i + 1]);
            [
                y[i],
                m0,
                (3.0 * secant - 2.0 * m0 - m1) / hi,
                (m0 + m1 - 2.0 * secant) / (hi * hi),
            ]
        })
        .collect()
}

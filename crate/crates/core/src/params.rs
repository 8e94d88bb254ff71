//! Closed-form parameter counts for both field families.

use serde::Serialize;

use crate::fields::FieldKind;

/// Parameters inside the vector field alone.
///
/// matrix: `d·v + d + (u·v)·d + u·v`; jacobian: `d·u + d·v + d + v·d + v`.
pub fn field_params(kind: FieldKind, u: usize, v: usize, d: usize) -> usize {
    match kind {
        FieldKind::Matrix => d * v + d + u * v * d + u * v,
        FieldKind::JacobianTruncated | FieldKind::JacobianExact => d * u + d * v + d + v * d + v,
    }
}

/// Readout `C×v + C`.
pub fn readout_params(v: usize, classes: usize) -> usize {
    v * classes + classes
}

/// Initial-state lift `v×u + v`.
pub fn lift_params(u: usize, v: usize) -> usize {
    u * v + v
}

/// Whole classifier: field, readout and lift.
pub fn count_params(kind: FieldKind, u: usize, v: usize, d: usize, classes: usize) -> usize {
    field_params(kind, u, v, d) + readout_params(v, classes) + lift_params(u, v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioMatch {
    pub u: usize,
    pub v: usize,
    pub d: usize,
    pub matrix: usize,
    pub jacobian: usize,
    pub ratio: f64,
}

impl RatioMatch {
    fn at(u: usize, v: usize, d: usize) -> Self {
        let matrix = field_params(FieldKind::Matrix, u, v, d);
        let jacobian = field_params(FieldKind::JacobianTruncated, u, v, d);
        RatioMatch {
            u,
            v,
            d,
            matrix,
            jacobian,
            ratio: matrix as f64 / jacobian as f64,
        }
    }
}

/// Field-part ratio `matrix / jacobian` for given dims.
pub fn field_ratio(u: usize, v: usize, d: usize) -> f64 {
    RatioMatch::at(u, v, d).ratio
}

/// Grid search over `u ≤ 16`, `v ≤ 64`, `d ∈ {16, 32, …, 256}` for the
/// configuration whose field ratio is closest to `target`; ties go to the
/// smaller matrix field.
pub fn find_ratio(target: f64) -> RatioMatch {
    let mut best: Option<RatioMatch> = None;
    for u in 1..=16 {
        for v in 1..=64 {
            for d in [16, 32, 64, 128, 256] {
                let cand = RatioMatch::at(u, v, d);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        let (ec, eb) = ((cand.ratio - target).abs(), (b.ratio - target).abs());
                        ec < eb || (ec == eb && cand.matrix < b.matrix)
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
        }
    }
    best.expect("non-empty grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_dims() {
        assert_eq!(count_params(FieldKind::Matrix, 1, 1, 1, 1), 8);
        assert_eq!(count_params(FieldKind::JacobianTruncated, 1, 1, 1, 1), 9);
    }

    #[test]
    fn reference_dims() {
        assert_eq!(field_params(FieldKind::Matrix, 4, 32, 128), 20736);
        assert_eq!(field_params(FieldKind::JacobianTruncated, 4, 32, 128), 8864);
        assert!((field_ratio(4, 32, 128) - 2.34).abs() < 0.005);
    }

    #[test]
    fn find_ratio_two() {
        let m = find_ratio(2.0);
        assert!((1.9..=2.1).contains(&m.ratio), "{m:?}");
    }

    #[test]
    fn matrix_grows_with_product_jacobian_with_sum() {
        let d = 128;
        for (u, v) in [(2, 4), (4, 8), (8, 16)] {
            let m = field_params(FieldKind::Matrix, u, v, d);
            let m2 = field_params(FieldKind::Matrix, 2 * u, v, d);
            // doubling u adds u·v·d + u·v
            assert_eq!(m2 - m, u * v * d + u * v);
            let j = field_params(FieldKind::JacobianTruncated, u, v, d);
            let j2 = field_params(FieldKind::JacobianTruncated, 2 * u, v, d);
            assert_eq!(j2 - j, d * u);
        }
    }
}

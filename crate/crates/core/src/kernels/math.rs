use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::rng::Rng;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `max|a - b| / max(max|b|, 1e-8)`.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rel_error: length mismatch");
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(0.0, f64::max).max(1e-8);
    num / den
}

/// Relative error between two output sequences, flattened.
pub fn rel_error_seq(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let fa: Vec<f64> = a.iter().flat_map(|v| v.iter().copied()).collect();
    let fb: Vec<f64> = b.iter().flat_map(|v| v.iter().copied()).collect();
    rel_error(&fa, &fb)
}

/// `k / max(|k|, 1e-8)`.
pub fn unit(k: &DVector<f64>) -> DVector<f64> {
    k / k.norm().max(1e-8)
}

pub fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> DMatrix<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    DMatrix::from_fn(rows, cols, |_, _| normal.sample(rng))
}

pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

/// Position of the first non-finite entry.
pub fn first_non_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> Option<usize> {
    values.into_iter().position(|x| !x.is_finite())
}

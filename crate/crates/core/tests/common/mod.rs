//! Shared helpers for the integration tests: a central finite-difference
//! gradient oracle and seeded random tensors.

#![allow(dead_code)]

use lenet_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(shape, data).unwrap()
}

/// `|a - fd| / max(1, |fd|)`.
pub fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(1.0)
}

/// Central difference of `f` with respect to `x[i]`.
pub fn central_diff(x: &mut Tensor, i: usize, mut f: impl FnMut(&Tensor) -> f64) -> f64 {
    let orig = x.data()[i];
    x.data_mut()[i] = orig + EPS;
    let up = f(x);
    x.data_mut()[i] = orig - EPS;
    let down = f(x);
    x.data_mut()[i] = orig;
    (up - down) / (2.0 * EPS)
}

/// Checks every coordinate of `x` and returns the worst relative error.
pub fn check_all(x: &Tensor, analytic: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> f64 {
    assert_eq!(x.shape(), analytic.shape());
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| rel_err(analytic.data()[i], central_diff(&mut probe, i, &mut f)))
        .fold(0.0, f64::max)
}

/// `sum(out * weights)`: turns a tensor-valued layer into a scalar whose
/// gradient with respect to `out` is `weights`.
pub fn project(out: &Tensor, weights: &Tensor) -> f64 {
    out.data()
        .iter()
        .zip(weights.data())
        .map(|(a, b)| a * b)
        .sum()
}

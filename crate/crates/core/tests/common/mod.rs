#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use netsurv::corpus::ExpressionMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((n, p), |_| r.sample(StandardNormal))
}

/// 1/n sample covariance of `n` correlated Gaussian draws.
pub fn random_spd(p: usize, n: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed ^ 0x5eed);
    let mix = Array2::from_shape_fn((p, p), |(i, j)| if i == j { 1.0 } else { r.random_range(-0.5..0.5) });
    let x = normal_matrix(n, p, seed).dot(&mix);
    let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
    let c = &x - &mean;
    c.t().dot(&c) / n as f64
}

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i:03}")).collect()
}

pub fn expression(values: Array2<f64>) -> ExpressionMatrix {
    let (n, p) = values.dim();
    ExpressionMatrix::new(ids("s", n), ids("g", p), values).unwrap()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

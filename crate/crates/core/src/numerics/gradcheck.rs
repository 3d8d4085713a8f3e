//! Central finite-difference oracle shared by the layer tests.

use rand::Rng;

use crate::rng::Rng as StreamRng;

pub const FD_EPS: f64 = 1e-4;
pub const FD_REL_TOL: f64 = 1e-5;

/// Relative error with an absolute floor so exact zeros compare sanely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn numeric_grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_EPS;
            let up = f(&probe);
            probe[i] = orig - FD_EPS;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_EPS)
        })
        .collect()
}

/// Largest relative error between an analytic gradient and central differences.
pub fn max_rel_err(f: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> f64 {
    assert_eq!(x.len(), analytic.len());
    numeric_grad(f, x)
        .iter()
        .zip(analytic)
        .map(|(&n, &a)| rel_err(a, n))
        .fold(0.0, f64::max)
}

pub fn uniform_vec(rng: &mut StreamRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Values bounded away from zero (for kinked activations).
pub fn off_kink_vec(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let mag = rng.random_range(0.05..1.5);
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

use super::check_inputs;
use super::knn::MeasuredIndex;
use crate::masking::MeasurementMask;
use crate::{Field, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiharmonicConfig {
    /// Stop when `‖r‖ ≤ rel_tol·‖rhs‖`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for BiharmonicConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiharmonicSolution {
    pub field: Field,
    pub iterations: usize,
    /// Final `‖r‖ / ‖rhs‖`.
    pub relative_residual: f64,
    /// True when the iteration cap was hit before the tolerance.
    pub degraded: bool,
}

/// Gradient of the discrete bending energy
/// `Σ u_xx² + 2·u_xy² + u_yy²`, every difference taken only where its
/// stencil fits inside the frame.
fn energy_gradient(u: &[f64], h: usize, w: usize, out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..h {
        let row = i * w;
        for j in 1..w.saturating_sub(1) {
            let d = u[row + j - 1] - 2.0 * u[row + j] + u[row + j + 1];
            out[row + j - 1] += d;
            out[row + j] -= 2.0 * d;
            out[row + j + 1] += d;
        }
    }
    for i in 1..h.saturating_sub(1) {
        for j in 0..w {
            let p = i * w + j;
            let d = u[p - w] - 2.0 * u[p] + u[p + w];
            out[p - w] += d;
            out[p] -= 2.0 * d;
            out[p + w] += d;
        }
    }
    for i in 0..h.saturating_sub(1) {
        for j in 0..w.saturating_sub(1) {
            let p = i * w + j;
            let d = 2.0 * (u[p] - u[p + 1] - u[p + w] + u[p + w + 1]);
            out[p] += d;
            out[p + 1] -= d;
            out[p + w] -= d;
            out[p + w + 1] += d;
        }
    }
}

fn diagonal(h: usize, w: usize) -> Vec<f64> {
    let mut diag = vec![0.0; h * w];
    for i in 0..h {
        for j in 1..w.saturating_sub(1) {
            let p = i * w + j;
            diag[p - 1] += 1.0;
            diag[p] += 4.0;
            diag[p + 1] += 1.0;
        }
    }
    for i in 1..h.saturating_sub(1) {
        for j in 0..w {
            let p = i * w + j;
            diag[p - w] += 1.0;
            diag[p] += 4.0;
            diag[p + w] += 1.0;
        }
    }
    for i in 0..h.saturating_sub(1) {
        for j in 0..w.saturating_sub(1) {
            let p = i * w + j;
            for q in [p, p + 1, p + w, p + w + 1] {
                diag[q] += 2.0;
            }
        }
    }
    diag
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimum bending-energy fill of the unmeasured pixels, solved by
/// Jacobi-preconditioned conjugate gradients.
pub fn interp_biharmonic_with(
    y: &Field,
    mask: &MeasurementMask,
    config: &BiharmonicConfig,
) -> Result<BiharmonicSolution> {
    check_inputs(y, mask)?;
    let (h, w) = y.dim();
    let n = h * w;
    let free: Vec<bool> = mask.bits().iter().map(|&b| !b).collect();

    // nearest-measured start; exact for constant data
    let index = MeasuredIndex::new(mask);
    let mut u: Vec<f64> = y.iter().copied().collect();
    let mut nb = Vec::with_capacity(1);
    for p in 0..n {
        if free[p] {
            index.nearest(p / w, p % w, 1, &mut nb);
            u[p] = y[[nb[0].1 / w, nb[0].1 % w]];
        }
    }

    let restrict = |v: &mut [f64]| {
        for (x, &f) in v.iter_mut().zip(&free) {
            if !f {
                *x = 0.0;
            }
        }
    };
    let mut scratch = vec![0.0; n];
    let known: Vec<f64> = u.iter().zip(&free).map(|(&v, &f)| if f { 0.0 } else { v }).collect();
    energy_gradient(&known, h, w, &mut scratch);
    restrict(&mut scratch);
    let rhs_norm = dot(&scratch, &scratch).sqrt();

    let mut r = vec![0.0; n];
    energy_gradient(&u, h, w, &mut r);
    for v in r.iter_mut() {
        *v = -*v;
    }
    restrict(&mut r);
    let inv_diag: Vec<f64> = diagonal(h, w)
        .iter()
        .zip(&free)
        .map(|(&d, &f)| if f && d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt();
    let target = config.rel_tol * rhs_norm;
    let mut iterations = 0;
    let mut ad = vec![0.0; n];
    while res > target && iterations < config.max_iter {
        energy_gradient(&d, h, w, &mut ad);
        restrict(&mut ad);
        let dad = dot(&d, &ad);
        if !(dad > 0.0) {
            break;
        }
        let alpha = rz / dad;
        for p in 0..n {
            u[p] += alpha * d[p];
            r[p] -= alpha * ad[p];
        }
        for p in 0..n {
            z[p] = r[p] * inv_diag[p];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for p in 0..n {
            d[p] = z[p] + beta * d[p];
        }
        res = dot(&r, &r).sqrt();
        iterations += 1;
    }

    let mut field = y.clone();
    for (p, v) in field.iter_mut().enumerate() {
        if free[p] {
            *v = u[p];
        }
    }
    let relative_residual = if rhs_norm > 0.0 { res / rhs_norm } else { res };
    Ok(BiharmonicSolution {
        field,
        iterations,
        relative_residual,
        degraded: res > target,
    })
}

pub fn interp_biharmonic(y: &Field, mask: &MeasurementMask) -> Result<BiharmonicSolution> {
    interp_biharmonic_with(y, mask, &BiharmonicConfig::default())
}

use serde::{Deserialize, Serialize};

use crate::masking::MeasurementMask;
use crate::{Error, Result};

/// Reference integration time per measured pixel, seconds.
pub const REFERENCE_T_P: f64 = 25e-6;
/// Reference inference time for a 20-step reverse process, seconds.
pub const REFERENCE_T_D_20: f64 = 0.02;

/// Idealized measurement plus inference time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBudget {
    pub n_p: usize,
    pub t_p: f64,
    pub t_d: f64,
    pub total: f64,
}

impl TimeBudget {
    pub fn new(n_p: usize, t_p: f64, t_d: f64) -> Result<Self> {
        if !(t_p >= 0.0 && t_d >= 0.0) || !t_p.is_finite() || !t_d.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time budget needs finite t_p, t_d >= 0, got {t_p}, {t_d}"
            )));
        }
        Ok(Self {
            n_p,
            t_p,
            t_d,
            total: n_p as f64 * t_p + t_d,
        })
    }
}

pub fn time_to_reconstruct(mask: &MeasurementMask, t_p: f64, t_d: f64) -> Result<TimeBudget> {
    TimeBudget::new(mask.n_measured(), t_p, t_d)
}

/// Reference inference time for `steps` reverse steps, linear in the step
/// count and anchored at [`REFERENCE_T_D_20`].
pub fn reference_t_d(steps: usize) -> f64 {
    REFERENCE_T_D_20 * steps as f64 / 20.0
}

use serde::{Deserialize, Serialize};

use super::knn::MeasuredIndex;
use super::check_inputs;
use crate::masking::MeasurementMask;
use crate::{Error, Field, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdwConfig {
    pub k: usize,
    pub p: f64,
}

impl Default for IdwConfig {
    fn default() -> Self {
        Self { k: 8, p: 2.0 }
    }
}

/// Inverse distance weighting over the `k` nearest measured pixels.
pub fn interp_idw(y: &Field, mask: &MeasurementMask, config: &IdwConfig) -> Result<Field> {
    check_inputs(y, mask)?;
    if config.k == 0 || !(config.p > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "IDW needs k >= 1 and p > 0, got {config:?}"
        )));
    }
    let index = MeasuredIndex::new(mask);
    let flat: Vec<f64> = y.iter().copied().collect();
    let mut out = y.clone();
    let mut nb = Vec::with_capacity(config.k);
    for ((i, j), v) in out.indexed_iter_mut() {
        if mask.is_measured(i, j) {
            continue;
        }
        index.nearest(i, j, config.k, &mut nb);
        let (d0, p0) = nb[0];
        let base = flat[p0];
        if d0 == 0 {
            *v = base;
            continue;
        }
        // weighted mean of offsets from the nearest value, so equal inputs
        // come back bit-exact
        let (mut num, mut den) = (0.0, 0.0);
        for &(d2, p) in &nb {
            let wt = (d2 as f64).powf(-config.p / 2.0);
            num += wt * (flat[p] - base);
            den += wt;
        }
        *v = base + num / den;
    }
    Ok(out)
}

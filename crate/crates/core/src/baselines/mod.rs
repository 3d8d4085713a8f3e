//! Classical interpolation baselines: piecewise-linear, inverse distance
//! weighting and biharmonic (minimum bending energy).
//!
//! Every method returns the measurement unchanged on measured pixels.

mod biharmonic;
mod idw;
mod knn;
mod linear;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::masking::MeasurementMask;
use crate::{Error, Field, Result};

pub use biharmonic::{interp_biharmonic, interp_biharmonic_with, BiharmonicConfig, BiharmonicSolution};
pub use idw::{interp_idw, IdwConfig};
pub use linear::interp_linear;

fn check_inputs(y: &Field, mask: &MeasurementMask) -> Result<()> {
    if y.dim() != mask.bits().dim() {
        return Err(Error::Shape(format!(
            "measurement {:?} vs mask {:?}",
            y.dim(),
            mask.bits().dim()
        )));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("measurement contains {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Linear,
    Idw,
    Biharmonic,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::Linear, Baseline::Idw, Baseline::Biharmonic];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Linear => "linear",
            Baseline::Idw => "idw",
            Baseline::Biharmonic => "biharmonic",
        }
    }

    /// Runs the method with default settings. The flag is true when the
    /// result is degraded (biharmonic solver hit its iteration cap).
    pub fn run(self, y: &Field, mask: &MeasurementMask) -> Result<(Field, bool)> {
        match self {
            Baseline::Linear => interp_linear(y, mask).map(|f| (f, false)),
            Baseline::Idw => interp_idw(y, mask, &IdwConfig::default()).map(|f| (f, false)),
            Baseline::Biharmonic => interp_biharmonic(y, mask).map(|s| (s.field, s.degraded)),
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown baseline {s:?}")))
    }
}

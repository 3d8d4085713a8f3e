//! Charge stability diagrams: container, file formats, splits and a
//! synthetic generator.

mod csv_import;
mod format;
mod split;
mod synth;

use ndarray::Array2;

use crate::{Error, Field, Result};

pub use csv_import::{import_csv, parse_csv};
pub use format::{load_csdc, load_dir, save_csdc, write_atomic, CSD1_MAGIC};
pub use split::{make_splits, DatasetSplit, DEFAULT_TEST_COUNT};
pub use synth::{synthesize_csd, synthesize_set, SyntheticConfig, SyntheticCsd};

/// A 2-D sensor map over two gate voltages.
///
/// Pixels are stored as `f32`, the on-disk precision, indexed `[row, col]`
/// where row follows gate 2 and column follows gate 1. Voltage extents are
/// metadata only.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeStabilityDiagram {
    pub id: String,
    pixels: Array2<f32>,
    pub v1_range: (f64, f64),
    pub v2_range: (f64, f64),
}

impl ChargeStabilityDiagram {
    /// Wraps a pixel array; every value must be finite.
    pub fn new(
        id: impl Into<String>,
        pixels: Array2<f32>,
        v1_range: (f64, f64),
        v2_range: (f64, f64),
    ) -> Result<Self> {
        if let Some(((i, j), v)) = pixels.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("pixel ({i},{j}) = {v}")));
        }
        Ok(Self {
            id: id.into(),
            pixels,
            v1_range,
            v2_range,
        })
    }

    /// Builds from an `f64` field, rounding to `f32`.
    pub fn from_field(
        id: impl Into<String>,
        field: &Field,
        v1_range: (f64, f64),
        v2_range: (f64, f64),
    ) -> Result<Self> {
        Self::new(id, field.mapv(|v| v as f32), v1_range, v2_range)
    }

    pub fn pixels(&self) -> &Array2<f32> {
        &self.pixels
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn to_field(&self) -> Field {
        self.pixels.mapv(f64::from)
    }

    pub fn is_normalized(&self) -> bool {
        self.pixels.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// Per-image min-max scaling to `[0, 1]`; a constant field maps to 0.5.
pub fn normalize(raw: &Field) -> Result<Field> {
    if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("normalize input contains {v}")));
    }
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if raw.is_empty() || hi == lo {
        return Ok(raw.mapv(|_| 0.5));
    }
    let span = hi - lo;
    Ok(raw.mapv(|v| ((v - lo) / span).clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        let n = normalize(&array![[0.0, 10.0]]).unwrap();
        assert_eq!(n, array![[0.0, 1.0]]);
        let unit = array![[0.0, 0.25], [1.0, 0.5]];
        assert_eq!(normalize(&unit).unwrap(), unit);
        assert_eq!(normalize(&array![[3.0, 3.0]]).unwrap(), array![[0.5, 0.5]]);
        assert!(normalize(&array![[0.0, f64::NAN]]).is_err());
    }

    #[test]
    fn non_finite_pixels_rejected() {
        let px = array![[0.0f32, f32::INFINITY]];
        assert!(ChargeStabilityDiagram::new("x", px, (0.0, 1.0), (0.0, 1.0)).is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent_and_bounded(v in proptest::collection::vec(-1e3f64..1e3, 1..40)) {
            let f = Field::from_shape_vec((1, v.len()), v).unwrap();
            let once = normalize(&f).unwrap();
            prop_assert!(once.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert_eq!(normalize(&once).unwrap(), once.clone());
            let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            if hi > lo {
                prop_assert!(once.iter().any(|&x| x == 0.0));
                prop_assert!(once.iter().any(|&x| x == 1.0));
            }
        }
    }
}

//! Grid and line-cut measurement masks.
//!
//! Mask specs have a compact text form used in configs and file names:
//! `grid:n` for a reduce factor `n`, and `lc:nh-nv-th-tv` for `nh` horizontal
//! and `nv` vertical sweeps of thickness `th`/`tv` pixels.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;

use crate::{Error, Field, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridMaskSpec {
    pub reduce_factor: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LineCutSpec {
    pub n_h: usize,
    pub n_v: usize,
    pub t_h: usize,
    pub t_v: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskSpec {
    Grid(GridMaskSpec),
    LineCut(LineCutSpec),
}

impl MaskSpec {
    pub fn grid(reduce_factor: usize) -> Self {
        MaskSpec::Grid(GridMaskSpec { reduce_factor })
    }

    pub fn line_cut(n_h: usize, n_v: usize, t_h: usize, t_v: usize) -> Self {
        MaskSpec::LineCut(LineCutSpec { n_h, n_v, t_h, t_v })
    }

    /// Builds the mask for an `h × w` frame.
    pub fn build(&self, h: usize, w: usize) -> Result<MeasurementMask> {
        match *self {
            MaskSpec::Grid(g) => make_grid_mask(h, w, g.reduce_factor),
            MaskSpec::LineCut(lc) => make_line_cut_mask(h, w, lc),
        }
    }

    /// File-name friendly label, e.g. `grid5` or `lc8-8-4-4`.
    pub fn slug(&self) -> String {
        match self {
            MaskSpec::Grid(g) => format!("grid{}", g.reduce_factor),
            MaskSpec::LineCut(l) => format!("lc{}-{}-{}-{}", l.n_h, l.n_v, l.t_h, l.t_v),
        }
    }
}

impl fmt::Display for MaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskSpec::Grid(g) => write!(f, "grid:{}", g.reduce_factor),
            MaskSpec::LineCut(l) => write!(f, "lc:{}-{}-{}-{}", l.n_h, l.n_v, l.t_h, l.t_v),
        }
    }
}

impl FromStr for MaskSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("mask spec {s:?}: expected grid:n or lc:nh-nv-th-tv"));
        let (kind, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        match kind {
            "grid" => Ok(MaskSpec::grid(rest.parse().map_err(|_| bad())?)),
            "lc" => {
                let parts = rest
                    .split('-')
                    .map(|p| p.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad())?;
                match parts[..] {
                    [a, b, c, d] => Ok(MaskSpec::line_cut(a, b, c, d)),
                    _ => Err(bad()),
                }
            }
            _ => Err(bad()),
        }
    }
}

impl serde::Serialize for MaskSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for MaskSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Binary measurement map (`true` = measured) with the spec that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMask {
    bits: Array2<bool>,
    spec: MaskSpec,
    n_measured: usize,
}

impl MeasurementMask {
    /// Wraps an explicit bit map. At least one pixel must be measured.
    pub fn from_bits(bits: Array2<bool>, spec: MaskSpec) -> Result<Self> {
        let n_measured = bits.iter().filter(|&&b| b).count();
        if n_measured == 0 {
            return Err(Error::InvalidArgument("mask measures no pixels".into()));
        }
        Ok(Self {
            bits,
            spec,
            n_measured,
        })
    }

    pub fn bits(&self) -> &Array2<bool> {
        &self.bits
    }

    pub fn spec(&self) -> MaskSpec {
        self.spec
    }

    pub fn n_measured(&self) -> usize {
        self.n_measured
    }

    pub fn height(&self) -> usize {
        self.bits.nrows()
    }

    pub fn width(&self) -> usize {
        self.bits.ncols()
    }

    pub fn is_measured(&self, i: usize, j: usize) -> bool {
        self.bits[[i, j]]
    }

    /// Fraction of measured pixels.
    pub fn density(&self) -> f64 {
        self.n_measured as f64 / self.bits.len() as f64
    }

    /// Mask as a 0/1 field.
    pub fn to_field(&self) -> Field {
        self.bits.mapv(|b| if b { 1.0 } else { 0.0 })
    }
}

/// Measures pixel `(i, j)` iff both indices are multiples of `reduce_factor`.
pub fn make_grid_mask(h: usize, w: usize, reduce_factor: usize) -> Result<MeasurementMask> {
    if reduce_factor == 0 || reduce_factor > h.min(w) {
        return Err(Error::InvalidArgument(format!(
            "reduce factor {reduce_factor} outside 1..={}",
            h.min(w)
        )));
    }
    let bits = Array2::from_shape_fn((h, w), |(i, j)| {
        i % reduce_factor == 0 && j % reduce_factor == 0
    });
    MeasurementMask::from_bits(bits, MaskSpec::grid(reduce_factor))
}

fn validate_line_cut(h: usize, w: usize, spec: &LineCutSpec) -> Result<()> {
    let bad = |why: &str| Err(Error::InvalidArgument(format!("line-cut {spec:?} on {h}x{w}: {why}")));
    if spec.n_h * spec.t_h > h || spec.n_v * spec.t_v > w {
        return bad("sweeps do not fit the frame");
    }
    if (spec.n_h == 0 || spec.t_h == 0) && (spec.n_v == 0 || spec.t_v == 0) {
        return bad("no sweep with nonzero thickness");
    }
    Ok(())
}

/// Index ranges covered by `n` evenly spaced bands of thickness `t` across `len`.
///
/// Band `k` is centred at `floor((k + 0.5)·len/n)` and spans
/// `[centre − floor(t/2), centre − floor(t/2) + t)`, clipped to the frame.
fn band_ranges(len: usize, n: usize, t: usize, offsets: Option<&[isize]>) -> Vec<(usize, usize)> {
    (0..n)
        .map(|k| {
            let centre = ((2 * k + 1) * len / (2 * n)) as isize;
            let shift = offsets.map_or(0, |o| o[k]);
            let start = centre + shift - (t / 2) as isize;
            let end = start + t as isize;
            (start.max(0) as usize, end.clamp(0, len as isize) as usize)
        })
        .collect()
}

fn line_cut_bits(h: usize, w: usize, rows: &[(usize, usize)], cols: &[(usize, usize)]) -> Array2<bool> {
    let mut bits = Array2::from_elem((h, w), false);
    for &(a, b) in rows {
        bits.slice_mut(ndarray::s![a..b, ..]).fill(true);
    }
    for &(a, b) in cols {
        bits.slice_mut(ndarray::s![.., a..b]).fill(true);
    }
    bits
}

/// Union of evenly spaced horizontal and vertical sweeps.
pub fn make_line_cut_mask(h: usize, w: usize, spec: LineCutSpec) -> Result<MeasurementMask> {
    validate_line_cut(h, w, &spec)?;
    let rows = band_ranges(h, spec.n_h, spec.t_h, None);
    let cols = band_ranges(w, spec.n_v, spec.t_v, None);
    MeasurementMask::from_bits(line_cut_bits(h, w, &rows, &cols), MaskSpec::LineCut(spec))
}

/// Line-cut mask whose band centres are jittered by up to a quarter of the
/// band spacing. Off by default; used for sensitivity checks and for mask
/// resampling during training.
pub fn make_jittered_line_cut_mask(
    h: usize,
    w: usize,
    spec: LineCutSpec,
    rng: &mut impl Rng,
) -> Result<MeasurementMask> {
    validate_line_cut(h, w, &spec)?;
    let mut jitter = |len: usize, n: usize| -> Vec<isize> {
        let span = len.checked_div(n).map_or(0, |q| (q / 4) as isize);
        (0..n).map(|_| rng.random_range(-span as i64..=span as i64) as isize).collect()
    };
    let row_off = jitter(h, spec.n_h);
    let col_off = jitter(w, spec.n_v);
    let rows = band_ranges(h, spec.n_h, spec.t_h, Some(&row_off));
    let cols = band_ranges(w, spec.n_v, spec.t_v, Some(&col_off));
    MeasurementMask::from_bits(line_cut_bits(h, w, &rows, &cols), MaskSpec::LineCut(spec))
}

pub fn density(mask: &MeasurementMask) -> f64 {
    mask.density()
}

/// Sparse measurement `y = pixels ⊙ mask`; unmeasured pixels are exactly 0.
pub fn apply_mask(pixels: &Field, mask: &MeasurementMask) -> Result<Field> {
    if pixels.dim() != mask.bits.dim() {
        return Err(Error::Shape(format!(
            "mask {:?} vs image {:?}",
            mask.bits.dim(),
            pixels.dim()
        )));
    }
    let mut y = pixels.clone();
    y.zip_mut_with(&mask.bits, |v, &b| {
        if !b {
            *v = 0.0;
        }
    });
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_counts_on_128() {
        for (n, count) in [(3, 1849), (5, 676), (7, 361), (9, 225)] {
            let m = make_grid_mask(128, 128, n).unwrap();
            assert_eq!(m.n_measured(), count, "grid {n}");
        }
        assert!((make_grid_mask(128, 128, 3).unwrap().density() - 0.1129).abs() < 1e-4);
        assert_eq!(make_grid_mask(16, 16, 1).unwrap().density(), 1.0);
    }

    #[test]
    fn grid_out_of_range() {
        assert!(make_grid_mask(8, 8, 0).is_err());
        assert!(make_grid_mask(8, 6, 7).is_err());
    }

    #[test]
    fn line_cut_counts_on_128() {
        for ((a, b, c, d), count) in [
            ((8, 8, 4, 4), 7168),
            ((6, 6, 4, 4), 5568),
            ((4, 4, 8, 8), 7168),
            ((4, 4, 4, 4), 3840),
        ] {
            let m = make_line_cut_mask(128, 128, LineCutSpec { n_h: a, n_v: b, t_h: c, t_v: d }).unwrap();
            assert_eq!(m.n_measured(), count);
        }
        let m = make_line_cut_mask(128, 128, LineCutSpec { n_h: 6, n_v: 6, t_h: 4, t_v: 4 }).unwrap();
        assert!((m.density() - 0.3398).abs() < 1e-4);
    }

    #[test]
    fn line_cut_band_positions() {
        let m = make_line_cut_mask(128, 128, LineCutSpec { n_h: 8, n_v: 0, t_h: 4, t_v: 0 }).unwrap();
        // first band centred at row 8 → rows 6..=9
        let measured_rows: Vec<usize> = (0..16).filter(|&i| m.is_measured(i, 0)).collect();
        assert_eq!(measured_rows, vec![6, 7, 8, 9]);
    }

    #[test]
    fn single_full_height_sweep_covers_frame() {
        let m = make_line_cut_mask(10, 7, LineCutSpec { n_h: 1, n_v: 0, t_h: 10, t_v: 0 }).unwrap();
        assert_eq!(m.density(), 1.0);
    }

    #[test]
    fn invalid_line_cuts_rejected() {
        assert!(make_line_cut_mask(16, 16, LineCutSpec { n_h: 5, n_v: 0, t_h: 4, t_v: 0 }).is_err());
        assert!(make_line_cut_mask(16, 16, LineCutSpec { n_h: 0, n_v: 0, t_h: 4, t_v: 4 }).is_err());
    }

    #[test]
    fn apply_mask_zeroes_unmeasured() {
        let img = Field::from_elem((128, 128), 1.0);
        let m = make_grid_mask(128, 128, 5).unwrap();
        let y = apply_mask(&img, &m).unwrap();
        assert_eq!(y.sum(), 676.0);
        for ((i, j), &v) in y.indexed_iter() {
            if !m.is_measured(i, j) {
                assert_eq!(v, 0.0);
            }
        }
        let full = make_grid_mask(4, 4, 1).unwrap();
        let img = Field::from_shape_fn((4, 4), |(i, j)| (i * 4 + j) as f64);
        assert_eq!(apply_mask(&img, &full).unwrap(), img);
        assert!(apply_mask(&Field::zeros((3, 4)), &full).is_err());
    }

    #[test]
    fn spec_text_round_trip() {
        for s in ["grid:5", "lc:8-8-4-4"] {
            let spec: MaskSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("lc:8-8-4".parse::<MaskSpec>().is_err());
        assert!("ray:3".parse::<MaskSpec>().is_err());
        assert_eq!(MaskSpec::line_cut(8, 8, 4, 4).slug(), "lc8-8-4-4");
    }

    #[test]
    fn equal_density_different_layout() {
        let a = make_line_cut_mask(128, 128, LineCutSpec { n_h: 8, n_v: 8, t_h: 4, t_v: 4 }).unwrap();
        let b = make_line_cut_mask(128, 128, LineCutSpec { n_h: 4, n_v: 4, t_h: 8, t_v: 8 }).unwrap();
        assert_eq!(a.density(), b.density());
        assert_ne!(a.bits(), b.bits());
    }

    /// Rows/columns covered, counted independently of the bitmap.
    fn covered(len: usize, n: usize, t: usize) -> usize {
        let mut hit = vec![false; len];
        for k in 0..n {
            let c = ((k as f64 + 0.5) * len as f64 / n as f64).floor() as isize;
            for d in 0..t as isize {
                let p = c - (t / 2) as isize + d;
                if p >= 0 && (p as usize) < len {
                    hit[p as usize] = true;
                }
            }
        }
        hit.iter().filter(|&&b| b).count()
    }

    proptest! {
        #[test]
        fn grid_density_closed_form(h in 1usize..60, w in 1usize..60, n in 1usize..60) {
            prop_assume!(n <= h.min(w));
            let m = make_grid_mask(h, w, n).unwrap();
            prop_assert_eq!(m.n_measured(), h.div_ceil(n) * w.div_ceil(n));
        }

        #[test]
        fn line_cut_inclusion_exclusion(
            h in 8usize..80, w in 8usize..80,
            n_h in 0usize..6, n_v in 0usize..6, t_h in 1usize..6, t_v in 1usize..6,
        ) {
            prop_assume!(n_h * t_h <= h && n_v * t_v <= w && n_h + n_v > 0);
            let m = make_line_cut_mask(h, w, LineCutSpec { n_h, n_v, t_h, t_v }).unwrap();
            let r = covered(h, n_h, t_h);
            let c = covered(w, n_v, t_v);
            prop_assert_eq!(m.n_measured(), r * w + c * h - r * c);
            let again = make_line_cut_mask(h, w, LineCutSpec { n_h, n_v, t_h, t_v }).unwrap();
            prop_assert_eq!(again, m);
        }
    }
}

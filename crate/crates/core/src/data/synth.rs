//! Synthetic double-dot charge stability diagrams.
//!
//! Two families of straight transition lines (a steep one for dot 1, a
//! shallow one for dot 2) are laid out with jittered spacing. Every crossing is
//! split into two triple points joined by a short interdot segment, which
//! gives the honeycomb pattern of a coupled double dot. The signal is a tilted
//! background plus a Gaussian ridge around the drawn segments plus white
//! noise, min-max normalized.
//!
//! Rows follow gate 2 and increase with voltage, so negative slopes are the
//! usual downward-sloping CSD lines.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{normalize, ChargeStabilityDiagram};
use crate::{rng, Error, Field, Result};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub size: usize,
    pub n_lines_family1: usize,
    pub n_lines_family2: usize,
    /// Row change per column step of the steep family.
    pub slope1: f64,
    /// Row change per column step of the shallow family.
    pub slope2: f64,
    /// Gaussian σ of the line cross-section, in pixels.
    pub line_width: f64,
    pub line_contrast: f64,
    /// Background change across the frame.
    pub background_tilt: f64,
    pub noise_sigma: f64,
    /// Distance between the two triple points of each anticrossing.
    pub anticrossing_gap: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            size: 128,
            n_lines_family1: 4,
            n_lines_family2: 4,
            slope1: -8.0,
            slope2: -0.12,
            line_width: 1.5,
            line_contrast: 0.6,
            background_tilt: 0.15,
            noise_sigma: 0.05,
            anticrossing_gap: 3.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidArgument(format!("synthetic config: {why}")));
        if self.size < 8 {
            return bad("size must be at least 8");
        }
        if self.n_lines_family1 == 0 || self.n_lines_family2 == 0 {
            return bad("line counts must be at least 1");
        }
        if !(self.line_width >= 1.0) {
            return bad("line_width must be at least 1 px");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be non-negative");
        }
        if !(self.anticrossing_gap >= 0.0) || !self.line_contrast.is_finite() {
            return bad("gap must be non-negative and contrast finite");
        }
        if !(self.slope1.is_finite() && self.slope2.is_finite()) || self.slope1 == 0.0 {
            return bad("slopes must be finite, slope1 nonzero");
        }
        if (self.slope1 * self.slope2 - 1.0).abs() < 1e-9 {
            return bad("line families are parallel");
        }
        Ok(())
    }
}

/// Generator output: the normalized CSD plus the ground truth it was drawn
/// from.
#[derive(Debug, Clone)]
pub struct SyntheticCsd {
    pub csd: ChargeStabilityDiagram,
    /// 1-px raster of every drawn segment centre line.
    pub line_raster: Array2<bool>,
    /// Signal before normalization.
    pub raw_signal: Field,
    /// Background plane before normalization.
    pub background: Field,
}

#[derive(Debug, Clone, Copy)]
struct Pt {
    r: f64,
    c: f64,
}

impl Pt {
    fn offset(self, dr: f64, dc: f64) -> Pt {
        Pt {
            r: self.r + dr,
            c: self.c + dc,
        }
    }
}

fn dist_to_segment(p: Pt, a: Pt, b: Pt) -> f64 {
    let (vr, vc) = (b.r - a.r, b.c - a.c);
    let len2 = vr * vr + vc * vc;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.r - a.r) * vr + (p.c - a.c) * vc) / len2).clamp(0.0, 1.0)
    };
    let (dr, dc) = (p.r - (a.r + t * vr), p.c - (a.c + t * vc));
    (dr * dr + dc * dc).sqrt()
}

/// Builds the honeycomb segment list.
fn layout(cfg: &SyntheticConfig, rng: &mut impl Rng) -> Vec<(Pt, Pt)> {
    let n = cfg.size as f64;
    let mid = (n - 1.0) / 2.0;
    let jittered = |count: usize, rng: &mut dyn rand::RngCore| -> Vec<f64> {
        let spacing = n / count as f64;
        (0..count)
            .map(|k| (k as f64 + 0.5 + rng.random_range(-0.25..0.25)) * spacing)
            .collect()
    };
    // steep family: c = a + (r − mid)/slope1 ; shallow family: r = b + slope2·(c − mid)
    let a = jittered(cfg.n_lines_family1, rng);
    let b = jittered(cfg.n_lines_family2, rng);
    let (s1, s2) = (cfg.slope1, cfg.slope2);
    let crossing = |ak: f64, bj: f64| -> Pt {
        let c = (ak + (bj - mid - s2 * mid) / s1) / (1.0 - s2 / s1);
        Pt {
            r: bj + s2 * (c - mid),
            c,
        }
    };
    let h = cfg.anticrossing_gap / (2.0 * 2f64.sqrt());
    let low = |p: Pt| p.offset(-h, -h);
    let high = |p: Pt| p.offset(h, h);
    let far = 2.0 * n;

    let mut segs = Vec::new();
    for &ak in &a {
        let on_line = |r: f64| Pt {
            r,
            c: ak + (r - mid) / s1,
        };
        let mut cross: Vec<Pt> = b.iter().map(|&bj| crossing(ak, bj)).collect();
        cross.sort_by(|p, q| p.r.total_cmp(&q.r));
        let mut from = on_line(-far);
        for &p in &cross {
            segs.push((from, low(p)));
            from = high(p);
        }
        segs.push((from, on_line(n + far)));
    }
    for &bj in &b {
        let on_line = |c: f64| Pt {
            r: bj + s2 * (c - mid),
            c,
        };
        let mut cross: Vec<Pt> = a.iter().map(|&ak| crossing(ak, bj)).collect();
        cross.sort_by(|p, q| p.c.total_cmp(&q.c));
        let mut from = on_line(-far);
        for &p in &cross {
            segs.push((from, low(p)));
            from = high(p);
        }
        segs.push((from, on_line(n + far)));
    }
    for &ak in &a {
        for &bj in &b {
            let p = crossing(ak, bj);
            if h > 0.0 {
                segs.push((low(p), high(p)));
            }
        }
    }
    segs
}

fn rasterize(segs: &[(Pt, Pt)], size: usize) -> Array2<bool> {
    let mut raster = Array2::from_elem((size, size), false);
    let lim = size as f64 - 0.5;
    for &(a, b) in segs {
        let len = ((b.r - a.r).powi(2) + (b.c - a.c).powi(2)).sqrt();
        let steps = (len / 0.25).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let (r, c) = (a.r + t * (b.r - a.r), a.c + t * (b.c - a.c));
            if r >= -0.5 && c >= -0.5 && r < lim && c < lim {
                let (i, j) = (r.round() as usize, c.round() as usize);
                if i < size && j < size {
                    raster[[i, j]] = true;
                }
            }
        }
    }
    raster
}

/// Draws one synthetic CSD. Deterministic in `config.seed`.
pub fn synthesize_csd(config: &SyntheticConfig) -> Result<SyntheticCsd> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, rng::STREAM_SYNTH);
    let n = config.size;
    let segs = layout(config, &mut rng);

    let theta = rng.random_range(0.0..2.0 * PI);
    let (ct, st) = (theta.cos(), theta.sin());
    let scale = (n - 1) as f64;
    let background = Field::from_shape_fn((n, n), |(i, j)| {
        config.background_tilt * ((j as f64 / scale - 0.5) * ct + (i as f64 / scale - 0.5) * st)
    });

    let two_w2 = 2.0 * config.line_width * config.line_width;
    let reach = config.line_width * 6.0;
    let mut raw = background.clone();
    for ((i, j), v) in raw.indexed_iter_mut() {
        let p = Pt {
            r: i as f64,
            c: j as f64,
        };
        let d = segs
            .iter()
            .map(|&(a, b)| dist_to_segment(p, a, b))
            .fold(f64::INFINITY, f64::min);
        if d < reach {
            *v += config.line_contrast * (-d * d / two_w2).exp();
        }
    }
    if config.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        raw.mapv_inplace(|v| v + noise.sample(&mut rng));
    }

    let pixels = normalize(&raw)?;
    let csd = ChargeStabilityDiagram::from_field(
        format!("synth-{}", config.seed),
        &pixels,
        (0.0, 1.0),
        (0.0, 1.0),
    )?;
    Ok(SyntheticCsd {
        csd,
        line_raster: rasterize(&segs, n),
        raw_signal: raw,
        background,
    })
}

/// `count` CSDs with per-image seeds derived from `seed` and `stream`.
///
/// Ids are `"{prefix}-{index:05}"`.
pub fn synthesize_set(
    base: &SyntheticConfig,
    count: usize,
    seed: u64,
    prefix: &str,
) -> Result<Vec<SyntheticCsd>> {
    (0..count)
        .map(|k| {
            let mut s = rng::indexed_stream(seed, prefix, k as u64);
            let cfg = SyntheticConfig {
                seed: s.random(),
                ..base.clone()
            };
            let mut out = synthesize_csd(&cfg)?;
            out.csd.id = format!("{prefix}-{k:05}");
            Ok(out)
        })
        .collect()
}

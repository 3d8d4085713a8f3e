//! Result tables and their CSV form.
//!
//! `per_image.csv`: `method,mask,steps,id,degraded,error,<metrics>`.
//! `summary.csv`: `method,mask,steps,metric,n,mean,std,min,max`.
//!
//! Floats are written with 17 significant digits so they reload exactly.
//! Undefined values are empty cells; `steps` is empty for baselines.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Method;
use crate::data::write_atomic;
use crate::masking::MaskSpec;
use crate::metrics::MetricReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub method: Method,
    pub mask: MaskSpec,
    /// Diffusion step count; `None` for baselines.
    pub steps: Option<usize>,
}

impl CellKey {
    /// e.g. `diffusion-T60-lc8-8-4-4`, `idw-grid5`.
    pub fn label(&self) -> String {
        match self.steps {
            Some(s) => format!("{}-T{s}-{}", self.method, self.mask.slug()),
            None => format!("{}-{}", self.method, self.mask.slug()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    pub id: String,
    /// `None` when the reconstruction itself failed.
    pub report: Option<MetricReport>,
    pub error: Option<String>,
    pub degraded: bool,
    /// Wall-clock reconstruction time.
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            n,
            // rounding can push the mean a hair outside the sample range
            mean: mean.clamp(min, max),
            std: var.sqrt(),
            min,
            max,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    pub images: Vec<ImageResult>,
}

impl CellResult {
    /// Aggregate of one metric column over images where it is defined.
    pub fn aggregate(&self, metric: &str) -> Option<Aggregate> {
        let col = MetricReport::COLUMNS.iter().position(|c| *c == metric)?;
        let values: Vec<f64> = self
            .images
            .iter()
            .filter_map(|r| r.report.and_then(|m| m.values()[col]))
            .collect();
        Aggregate::of(&values)
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.aggregate(metric).map(|a| a.mean)
    }

    pub fn mean_seconds(&self) -> f64 {
        if self.images.is_empty() {
            return 0.0;
        }
        self.images.iter().map(|r| r.seconds).sum::<f64>() / self.images.len() as f64
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn clean(s: &str) -> String {
    s.replace([',', '\n', '\r'], " ")
}

fn steps_cell(s: Option<usize>) -> String {
    s.map(|s| s.to_string()).unwrap_or_default()
}

pub fn per_image_csv(cells: &[CellResult]) -> String {
    let mut out = String::from("method,mask,steps,id,degraded,error");
    for c in MetricReport::COLUMNS {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for cell in cells {
        for r in &cell.images {
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                cell.key.method,
                cell.key.mask,
                steps_cell(cell.key.steps),
                clean(&r.id),
                u8::from(r.degraded),
                clean(r.error.as_deref().unwrap_or(""))
            );
            let values = r.report.map(|m| m.values()).unwrap_or([None; 9]);
            for v in values {
                out.push(',');
                out.push_str(&fmt_opt(v));
            }
            out.push('\n');
        }
    }
    out
}

pub fn summary_csv(cells: &[CellResult]) -> String {
    let mut out = String::from("method,mask,steps,metric,n,mean,std,min,max\n");
    for cell in cells {
        for metric in MetricReport::COLUMNS {
            let a = cell.aggregate(metric);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                cell.key.method,
                cell.key.mask,
                steps_cell(cell.key.steps),
                metric,
                a.map_or(0, |a| a.n),
                fmt_opt(a.map(|a| a.mean)),
                fmt_opt(a.map(|a| a.std)),
                fmt_opt(a.map(|a| a.min)),
                fmt_opt(a.map(|a| a.max)),
            );
        }
    }
    out
}

pub fn emit_csv(text: &str, path: &Path) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

/// One parsed row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: CellKey,
    pub metric: String,
    pub aggregate: Option<Aggregate>,
}

fn parse_opt(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Csv {
        line,
        detail: format!("bad number {s:?}"),
    })
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for (k, raw) in text.lines().enumerate().skip(1) {
        let line = k + 1;
        let bad = |detail: String| Error::Csv { line, detail };
        let f: Vec<&str> = raw.split(',').collect();
        if f.len() != 9 {
            return Err(bad(format!("expected 9 fields, got {}", f.len())));
        }
        let steps = if f[2].is_empty() {
            None
        } else {
            Some(f[2].parse().map_err(|_| bad(format!("bad steps {:?}", f[2])))?)
        };
        let key = CellKey {
            method: f[0].parse().map_err(|e: Error| bad(e.to_string()))?,
            mask: f[1].parse().map_err(|e: Error| bad(e.to_string()))?,
            steps,
        };
        let n: usize = f[4].parse().map_err(|_| bad(format!("bad count {:?}", f[4])))?;
        let aggregate = match (
            parse_opt(f[5], line)?,
            parse_opt(f[6], line)?,
            parse_opt(f[7], line)?,
            parse_opt(f[8], line)?,
        ) {
            (Some(mean), Some(std), Some(min), Some(max)) => Some(Aggregate {
                n,
                mean,
                std,
                min,
                max,
            }),
            _ => None,
        };
        rows.push(SummaryRow {
            key,
            metric: f[3].to_string(),
            aggregate,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cell(values: &[Option<f64>]) -> CellResult {
        CellResult {
            key: CellKey {
                method: Method::Diffusion,
                mask: MaskSpec::line_cut(8, 8, 4, 4),
                steps: Some(60),
            },
            images: values
                .iter()
                .enumerate()
                .map(|(i, &v)| ImageResult {
                    id: format!("img-{i}"),
                    report: Some(MetricReport {
                        psnr: v,
                        rnmse: v.map(|x| x / 3.0),
                        ..Default::default()
                    }),
                    error: None,
                    degraded: false,
                    seconds: 0.5,
                })
                .collect(),
        }
    }

    #[test]
    fn aggregate_examples() {
        let a = Aggregate::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((a.n, a.mean, a.min, a.max), (4, 2.5, 1.0, 4.0));
        assert!((a.std - 1.25f64.sqrt()).abs() < 1e-15);
        assert!(Aggregate::of(&[]).is_none());
        let c = cell(&[Some(10.0), None, Some(20.0)]);
        assert_eq!(c.aggregate("psnr").unwrap().n, 2);
        assert_eq!(c.mean("psnr"), Some(15.0));
        assert_eq!(c.mean("ssim"), None);
        assert_eq!(c.mean("nope"), None);
    }

    #[test]
    fn summary_reloads_exactly() {
        let c = cell(&[Some(0.1), Some(1.0 / 3.0), Some(std::f64::consts::PI)]);
        let rows = parse_summary_csv(&summary_csv(std::slice::from_ref(&c))).unwrap();
        assert_eq!(rows.len(), MetricReport::COLUMNS.len());
        for row in rows {
            assert_eq!(row.key, c.key);
            assert_eq!(row.aggregate, c.aggregate(&row.metric));
        }
    }

    #[test]
    fn per_image_leaves_gaps_empty() {
        let mut c = cell(&[Some(1.5), None]);
        c.images[1].report = None;
        c.images[1].error = Some("degenerate input: a, b".into());
        let text = per_image_csv(&[c]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.split(',').count() == 15));
        assert!(lines[2].ends_with(",,,,,,,,,"));
        assert!(lines[2].contains("degenerate input: a  b"));
    }

    proptest! {
        #[test]
        fn aggregate_bounds(v in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
            let a = Aggregate::of(&v).unwrap();
            prop_assert!(a.min <= a.mean && a.mean <= a.max);
            prop_assert!(a.std >= 0.0);
        }

        #[test]
        fn floats_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}

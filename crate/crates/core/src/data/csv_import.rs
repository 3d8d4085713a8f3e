use std::fs;
use std::path::Path;

use super::{normalize, ChargeStabilityDiagram};
use crate::{Error, Field, Result};

/// Parses a rectangular comma-separated numeric table.
///
/// A first row containing any non-numeric cell is treated as a header and
/// skipped; blank lines are ignored.
pub fn parse_csv(text: &str) -> Result<Field> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut seen_first = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Vec<Option<f64>> = cells.iter().map(|c| c.parse::<f64>().ok()).collect();
        if !seen_first {
            seen_first = true;
            if parsed.iter().any(Option::is_none) {
                continue;
            }
        }
        let mut row = Vec::with_capacity(cells.len());
        for (cell, v) in cells.iter().zip(parsed) {
            match v {
                Some(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(Error::Csv {
                        line: lineno + 1,
                        detail: format!("non-numeric cell {cell:?}"),
                    })
                }
            }
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Csv {
                    line: lineno + 1,
                    detail: format!("ragged row: {} cells, expected {w}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    let w = width.ok_or(Error::Csv {
        line: 0,
        detail: "no data rows".into(),
    })?;
    let h = rows.len();
    Field::from_shape_vec((h, w), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Shape(e.to_string()))
}

/// Reads a CSV export and normalizes it to `[0, 1]`.
pub fn import_csv(
    path: &Path,
    v1_range: (f64, f64),
    v2_range: (f64, f64),
) -> Result<ChargeStabilityDiagram> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw = parse_csv(&text)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ChargeStabilityDiagram::from_field(id, &normalize(&raw)?, v1_range, v2_range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_by_two_normalized() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, "0,1\n2,3\n").unwrap();
        let csd = import_csv(&p, (0.0, 1.0), (0.0, 1.0)).unwrap();
        let want = array![[0.0f32, 1.0 / 3.0], [2.0 / 3.0, 1.0]];
        assert_eq!(csd.pixels(), &want);
        assert_eq!(csd.id, "m");
    }

    #[test]
    fn constant_table_maps_to_half() {
        let f = normalize(&parse_csv("4,4\n4,4").unwrap()).unwrap();
        assert!(f.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn header_row_skipped() {
        let f = parse_csv("v1,v2\n1.5,2\n3,4e-1\n").unwrap();
        assert_eq!(f, array![[1.5, 2.0], [3.0, 0.4]]);
    }

    #[test]
    fn ragged_and_non_numeric_rejected() {
        assert!(matches!(parse_csv("1,2\n3"), Err(Error::Csv { line: 2, .. })));
        assert!(matches!(parse_csv("1,2\n3,x"), Err(Error::Csv { line: 2, .. })));
        assert!(parse_csv("").is_err());
    }
}

//! The `CSD1` container.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `CSD1` |
//! | 4     | `u32` height H |
//! | 4     | `u32` width W |
//! | 32    | `f64` v1 min, v1 max, v2 min, v2 max |
//! | 4·H·W | `f32` pixels, row-major |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::ChargeStabilityDiagram;
use crate::{Error, Result};

pub const CSD1_MAGIC: [u8; 4] = *b"CSD1";
const HEADER_LEN: usize = 4 + 4 + 4 + 32;

/// Writes through a sibling temp file and renames over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn encode(csd: &ChargeStabilityDiagram) -> Vec<u8> {
    let (h, w) = (csd.height(), csd.width());
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * h * w);
    buf.extend_from_slice(&CSD1_MAGIC);
    buf.extend_from_slice(&(h as u32).to_le_bytes());
    buf.extend_from_slice(&(w as u32).to_le_bytes());
    for v in [csd.v1_range.0, csd.v1_range.1, csd.v2_range.0, csd.v2_range.1] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &p in csd.pixels().iter() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    buf
}

pub(crate) fn decode(bytes: &[u8], path: &Path, id: String) -> Result<ChargeStabilityDiagram> {
    let truncated = |detail: String| Error::Truncated {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < 4 {
        return Err(truncated(format!("{} bytes, no magic", bytes.len())));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != CSD1_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: CSD1_MAGIC,
            found: magic,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated(format!("header needs {HEADER_LEN} bytes, have {}", bytes.len())));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let (h, w) = (u32_at(4), u32_at(8));
    let expected = HEADER_LEN + 4 * h * w;
    if bytes.len() < expected {
        return Err(truncated(format!("{h}x{w} payload needs {expected} bytes, have {}", bytes.len())));
    }
    if bytes.len() > expected {
        return Err(Error::InvalidArgument(format!(
            "{}: {} trailing bytes after {h}x{w} payload",
            path.display(),
            bytes.len() - expected
        )));
    }
    let pixels: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let pixels = Array2::from_shape_vec((h, w), pixels).map_err(|e| Error::Shape(e.to_string()))?;
    ChargeStabilityDiagram::new(id, pixels, (f64_at(12), f64_at(20)), (f64_at(28), f64_at(36)))
}

pub fn save_csdc(csd: &ChargeStabilityDiagram, path: &Path) -> Result<()> {
    write_atomic(path, &encode(csd))
}

/// Loads a `CSD1` file; the id is the file stem.
pub fn load_csdc(path: &Path) -> Result<ChargeStabilityDiagram> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode(&bytes, path, id)
}

/// Loads every `*.csd1` file in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<ChargeStabilityDiagram>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csd1"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_csdc(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(h: usize, w: usize) -> ChargeStabilityDiagram {
        let px = Array2::from_shape_fn((h, w), |(i, j)| ((i * 31 + j * 7) % 17) as f32 / 16.0);
        ChargeStabilityDiagram::new("s", px, (-0.5, 0.25), (1.0, 2.0)).unwrap()
    }

    #[test]
    fn file_size_for_128() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csd1");
        save_csdc(&sample(128, 128), &p).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 65580);
        let back = load_csdc(&p).unwrap();
        assert_eq!(back.id, "a");
        assert_eq!(back.pixels(), sample(128, 128).pixels());
    }

    #[test]
    fn bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csd1");
        let mut bytes = encode(&sample(4, 4));
        bytes[..4].copy_from_slice(b"XXXX");
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_csdc(&p), Err(Error::BadMagic { .. })));

        let good = encode(&sample(4, 4));
        fs::write(&p, &good[..good.len() - 3]).unwrap();
        assert!(matches!(load_csdc(&p), Err(Error::Truncated { .. })));
        fs::write(&p, &good[..20]).unwrap();
        assert!(matches!(load_csdc(&p), Err(Error::Truncated { .. })));
    }

    #[test]
    fn non_finite_payload_rejected() {
        let mut bytes = encode(&sample(2, 2));
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode(&bytes, Path::new("x"), "x".into()),
            Err(Error::NonFinite(_))
        ));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            h in 1usize..12, w in 1usize..12,
            seed in any::<u32>(),
            v in (-10.0f64..10.0, -10.0f64..10.0),
        ) {
            let px = Array2::from_shape_fn((h, w), |(i, j)| {
                f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add((i * w + j) as u32 * 40503) % 0x3f80_0000)
            });
            let csd = ChargeStabilityDiagram::new("p", px, v, (v.1, v.0)).unwrap();
            let back = decode(&encode(&csd), Path::new("p"), "p".into()).unwrap();
            prop_assert_eq!(encode(&back), encode(&csd));
        }
    }
}

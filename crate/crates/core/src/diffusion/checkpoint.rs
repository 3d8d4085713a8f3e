//! `QDDM` checkpoint files.
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `QDDM` |
//! | 4     | `u32` version (1) |
//! | 4     | `u32` diffusion steps T |
//! | 4     | `u32` base channels |
//! | 4     | `u32` levels |
//! | 8     | `u64` parameter count |
//! | 4·n   | `f32` parameters in layout order |

use std::fs;
use std::path::Path;

use super::unet::{DenoiserParameters, UNetConfig};
use crate::data::write_atomic;
use crate::{Error, Result};

pub const QDDM_MAGIC: [u8; 4] = *b"QDDM";
pub const QDDM_VERSION: u32 = 1;
const HEADER_LEN: usize = 28;

pub fn encode_checkpoint(params: &DenoiserParameters<f32>) -> Vec<u8> {
    let cfg = params.config();
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * params.count());
    buf.extend_from_slice(&QDDM_MAGIC);
    for v in [QDDM_VERSION, cfg.steps as u32, cfg.base_channels as u32, cfg.levels as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(params.count() as u64).to_le_bytes());
    for v in params.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<DenoiserParameters<f32>> {
    let truncated = |detail: String| Error::Truncated {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < 4 {
        return Err(truncated("no magic".into()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != QDDM_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: QDDM_MAGIC,
            found: magic,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated(format!("header is {} bytes", bytes.len())));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != QDDM_VERSION {
        return Err(Error::Version {
            expected: QDDM_VERSION,
            found: version,
        });
    }
    let config = UNetConfig {
        steps: u32_at(8) as usize,
        base_channels: u32_at(12) as usize,
        levels: u32_at(16) as usize,
        ..UNetConfig::new(2)
    };
    let count = u64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes")) as usize;
    let expected = config.parameter_count();
    if count != expected {
        return Err(Error::CheckpointMismatch(format!(
            "header declares {count} parameters, layout has {expected}"
        )));
    }
    let need = HEADER_LEN + 4 * count;
    if bytes.len() != need {
        return Err(truncated(format!("expected {need} bytes, have {}", bytes.len())));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    DenoiserParameters::from_values(config, values)
}

pub fn save_checkpoint(params: &DenoiserParameters<f32>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_checkpoint(params))
}

pub fn load_checkpoint(path: &Path) -> Result<DenoiserParameters<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

/// Loads a checkpoint and checks it was trained for `steps` diffusion steps.
pub fn load_checkpoint_for(path: &Path, steps: usize) -> Result<DenoiserParameters<f32>> {
    let p = load_checkpoint(path)?;
    if p.config().steps != steps {
        return Err(Error::CheckpointMismatch(format!(
            "{} was trained with T = {}, requested T = {steps}",
            path.display(),
            p.config().steps
        )));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.qddm");
        let p = DenoiserParameters::<f32>::init(UNetConfig::new(60), &mut rng::stream(0, "init")).unwrap();
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 28 + 4 * 163_457);
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(encode_checkpoint(&back), encode_checkpoint(&p));
        assert!(back.values().iter().zip(p.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(load_checkpoint_for(&path, 60).is_ok());
        assert!(matches!(load_checkpoint_for(&path, 20), Err(Error::CheckpointMismatch(_))));
    }

    #[test]
    fn corrupt_headers() {
        let p = DenoiserParameters::<f32>::zeros(UNetConfig::new(4)).unwrap();
        let good = encode_checkpoint(&p);
        let at = Path::new("x");
        let mut bad = good.clone();
        bad[0] = b'Z';
        assert!(matches!(decode_checkpoint(&bad, at), Err(Error::BadMagic { .. })));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_checkpoint(&bad, at), Err(Error::Version { found: 2, .. })));
        assert!(matches!(decode_checkpoint(&good[..100], at), Err(Error::Truncated { .. })));
        let mut bad = good.clone();
        bad[20] ^= 1;
        assert!(matches!(decode_checkpoint(&bad, at), Err(Error::CheckpointMismatch(_))));
    }
}

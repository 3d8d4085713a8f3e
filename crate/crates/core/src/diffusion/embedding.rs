use crate::{Error, Result};

/// Sinusoidal step embedding `[sin ω₁t, cos ω₁t, sin ω₂t, cos ω₂t, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeEmbeddingConfig {
    pub omega: Vec<f64>,
}

impl Default for TimeEmbeddingConfig {
    /// Eight geometric frequencies `ω_k = 10000^{-(k-1)/8}`.
    fn default() -> Self {
        Self {
            omega: (0..8).map(|k| 10000f64.powf(-(k as f64) / 8.0)).collect(),
        }
    }
}

impl TimeEmbeddingConfig {
    pub fn dim(&self) -> usize {
        2 * self.omega.len()
    }
}

/// Raw embedding of step `t` of a `steps`-step process.
pub fn time_embedding(t: usize, steps: usize, config: &TimeEmbeddingConfig) -> Result<Vec<f64>> {
    if t >= steps {
        return Err(Error::InvalidArgument(format!(
            "time step {t} out of range for T = {steps}"
        )));
    }
    let t = t as f64;
    Ok(config
        .omega
        .iter()
        .flat_map(|w| [(w * t).sin(), (w * t).cos()])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_step() {
        let e = time_embedding(0, 10, &TimeEmbeddingConfig::default()).unwrap();
        assert_eq!(e.len(), 16);
        for pair in e.chunks(2) {
            assert_eq!(pair, [0.0, 1.0]);
        }
    }

    #[test]
    fn unit_norm_pairs() {
        let cfg = TimeEmbeddingConfig::default();
        for t in 0..140 {
            let e = time_embedding(t, 140, &cfg).unwrap();
            let n2: f64 = e.iter().map(|v| v * v).sum();
            assert!((n2 - 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn first_pair_at_one() {
        let e = time_embedding(1, 2, &TimeEmbeddingConfig::default()).unwrap();
        assert!((e[0] - 0.84147).abs() < 1e-5);
        assert!((e[1] - 0.54030).abs() < 1e-5);
    }

    #[test]
    fn out_of_range() {
        assert!(time_embedding(5, 5, &TimeEmbeddingConfig::default()).is_err());
    }
}

use rand::Rng;
use rand_distr::StandardNormal;

use super::schedule::NoiseSchedule;
use super::unet::{denoiser_forward, DenoiserParameters};
use crate::masking::MeasurementMask;
use crate::numerics::Tensor;
use crate::{Error, Field, Result};

/// Anything that predicts `x0` from `(x_t, y, M, t)`.
pub trait Denoiser {
    /// Number of diffusion steps the predictor was trained for.
    fn steps(&self) -> usize;

    fn predict_x0(
        &self,
        x_t: &Tensor<f32>,
        y: &Tensor<f32>,
        mask: &Tensor<f32>,
        t: usize,
    ) -> Result<Tensor<f32>>;
}

impl Denoiser for DenoiserParameters<f32> {
    fn steps(&self) -> usize {
        self.config().steps
    }

    fn predict_x0(
        &self,
        x_t: &Tensor<f32>,
        y: &Tensor<f32>,
        mask: &Tensor<f32>,
        t: usize,
    ) -> Result<Tensor<f32>> {
        denoiser_forward(self, x_t, y, mask, t)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleOptions {
    /// Overwrite measured pixels of every iterate with the measurement
    /// noised to the matching level.
    pub replace_known: bool,
    /// Drop the stochastic term of every reverse step.
    pub deterministic: bool,
}

/// Result of a reverse run.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Final estimate with the measurements pasted on measured pixels.
    pub image: Field,
    /// The last reverse iterate `x_{-1}`, before pasting.
    pub last_iterate: Field,
}

pub(crate) fn field_to_tensor(f: &Field) -> Tensor<f32> {
    let (h, w) = f.dim();
    Tensor::from_vec(1, h, w, f.iter().map(|&v| v as f32).collect()).expect("sizes agree")
}

fn tensor_to_field(t: &Tensor<f32>) -> Field {
    Field::from_shape_vec((t.height(), t.width()), t.data().iter().map(|&v| f64::from(v)).collect())
        .expect("sizes agree")
}

fn gaussian(len: usize, rng: &mut impl Rng) -> Vec<f32> {
    (0..len).map(|_| rng.sample::<f32, _>(StandardNormal)).collect()
}

/// Runs the reverse process from pure noise, conditioned on `y` and `mask`.
pub fn reconstruct_with<D: Denoiser>(
    model: &D,
    y: &Field,
    mask: &MeasurementMask,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
    options: SampleOptions,
) -> Result<Reconstruction> {
    if model.steps() != schedule.steps() {
        return Err(Error::CheckpointMismatch(format!(
            "model trained for T = {}, schedule has T = {}",
            model.steps(),
            schedule.steps()
        )));
    }
    if y.dim() != mask.bits().dim() {
        return Err(Error::Shape(format!(
            "measurement {:?} vs mask {:?}",
            y.dim(),
            mask.bits().dim()
        )));
    }
    let (h, w) = y.dim();
    let y_t = field_to_tensor(y);
    let m_t = field_to_tensor(&mask.to_field());
    let measured: Vec<bool> = mask.bits().iter().copied().collect();

    let mut x = Tensor::from_vec(1, h, w, gaussian(h * w, rng))?;
    let mut x0_hat = Tensor::zeros(1, h, w);
    for t in (0..schedule.steps()).rev() {
        x0_hat = model
            .predict_x0(&x, &y_t, &m_t, t)?
            .map(|v| v.clamp(0.0, 1.0));
        if !x0_hat.all_finite() {
            return Err(Error::NonFinite(format!("denoiser output at step {t}")));
        }
        let (c_x0, c_xt, sigma) = schedule.posterior(t);
        let (c_x0, c_xt, sigma) = (c_x0 as f32, c_xt as f32, sigma as f32);
        let noise = if t > 0 && !options.deterministic {
            gaussian(h * w, rng)
        } else {
            vec![0.0; h * w]
        };
        let next: Vec<f32> = x0_hat
            .data()
            .iter()
            .zip(x.data())
            .zip(&noise)
            .map(|((&a, &b), &z)| c_x0 * a + c_xt * b + sigma * z)
            .collect();
        x = Tensor::from_vec(1, h, w, next)?;
        if options.replace_known {
            let ab = schedule.alpha_bar_prev(t);
            let (sa, sn) = (ab.sqrt() as f32, (1.0 - ab).sqrt() as f32);
            let noise = if t > 0 { gaussian(h * w, rng) } else { vec![0.0; h * w] };
            for (k, v) in x.data_mut().iter_mut().enumerate() {
                if measured[k] {
                    *v = sa * y_t.data()[k] + sn * noise[k];
                }
            }
        }
    }

    let mut image = tensor_to_field(&x0_hat);
    for ((i, j), v) in image.indexed_iter_mut() {
        if measured[i * w + j] {
            *v = y[[i, j]];
        }
    }
    Ok(Reconstruction {
        image,
        last_iterate: tensor_to_field(&x),
    })
}

/// Reverse-process reconstruction; returns the pasted estimate.
pub fn reconstruct<D: Denoiser>(
    model: &D,
    y: &Field,
    mask: &MeasurementMask,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
    replace_known: bool,
) -> Result<Field> {
    let options = SampleOptions {
        replace_known,
        deterministic: false,
    };
    reconstruct_with(model, y, mask, schedule, rng, options).map(|r| r.image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{build_schedule, UNetConfig};
    use crate::masking::{apply_mask, MaskSpec};
    use crate::rng;
    use proptest::prelude::*;

    /// Returns a fixed image regardless of input.
    struct Planted {
        x0: Tensor<f32>,
        steps: usize,
    }

    impl Denoiser for Planted {
        fn steps(&self) -> usize {
            self.steps
        }

        fn predict_x0(&self, _: &Tensor<f32>, _: &Tensor<f32>, _: &Tensor<f32>, _: usize) -> Result<Tensor<f32>> {
            Ok(self.x0.clone())
        }
    }

    fn truth(h: usize, w: usize) -> Field {
        Field::from_shape_fn((h, w), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 10.0)
    }

    #[test]
    fn full_mask_returns_measurement() {
        let x = truth(16, 16);
        let mask = MaskSpec::grid(1).build(16, 16).unwrap();
        let y = apply_mask(&x, &mask).unwrap();
        let model = DenoiserParameters::<f32>::init(UNetConfig::new(5), &mut rng::stream(0, "init")).unwrap();
        let out = reconstruct(&model, &y, &mask, &build_schedule(5).unwrap(), &mut rng::stream(0, "s"), false).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn step_mismatch_rejected() {
        let model = DenoiserParameters::<f32>::zeros(UNetConfig::new(5)).unwrap();
        let mask = MaskSpec::grid(2).build(8, 8).unwrap();
        let y = Field::zeros((8, 8));
        let r = reconstruct(&model, &y, &mask, &build_schedule(6).unwrap(), &mut rng::stream(0, "s"), false);
        assert!(matches!(r, Err(Error::CheckpointMismatch(_))));
    }

    #[test]
    fn planted_oracle_recovers_truth_without_noise() {
        let x = truth(8, 8);
        let mask = MaskSpec::grid(3).build(8, 8).unwrap();
        let y = apply_mask(&x, &mask).unwrap();
        for steps in [2, 20, 60] {
            let oracle = Planted {
                x0: field_to_tensor(&x),
                steps,
            };
            let s = build_schedule(steps).unwrap();
            let opts = SampleOptions {
                deterministic: true,
                replace_known: false,
            };
            let r = reconstruct_with(&oracle, &y, &mask, &s, &mut rng::stream(1, "s"), opts).unwrap();
            for (a, b) in r.last_iterate.iter().zip(x.iter()) {
                assert!((a - b).abs() < 1e-5, "T={steps}: {a} vs {b}");
            }
            for (a, b) in r.image.iter().zip(x.iter()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let model = DenoiserParameters::<f32>::init(UNetConfig::new(4), &mut rng::stream(2, "init")).unwrap();
        let mask = MaskSpec::grid(3).build(8, 8).unwrap();
        let y = apply_mask(&truth(8, 8), &mask).unwrap();
        let s = build_schedule(4).unwrap();
        let run = |seed| reconstruct(&model, &y, &mask, &s, &mut rng::stream(seed, "s"), true).unwrap();
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn measured_pixels_copied_exactly(
            seed in any::<u64>(),
            n in 1usize..5,
            replace in any::<bool>(),
            vals in proptest::collection::vec(0.0f64..1.0, 64),
        ) {
            let x = Field::from_shape_vec((8, 8), vals).unwrap();
            let mask = MaskSpec::grid(n).build(8, 8).unwrap();
            let y = apply_mask(&x, &mask).unwrap();
            let model = DenoiserParameters::<f32>::init(UNetConfig::new(3), &mut rng::stream(seed, "init")).unwrap();
            let out = reconstruct(&model, &y, &mask, &build_schedule(3).unwrap(), &mut rng::stream(seed, "s"), replace).unwrap();
            for ((i, j), &b) in mask.bits().indexed_iter() {
                if b {
                    prop_assert_eq!(out[[i, j]].to_bits(), y[[i, j]].to_bits());
                }
            }
        }
    }
}

use crate::numerics::{Scalar, Tensor};
use crate::{Error, Result};

pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 0.02;

/// Linear β schedule with derived α and cumulative ᾱ.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    /// `ᾱ_t`, with `ᾱ_{-1} = 1` reachable as `alpha_bar_prev(0)`.
    pub fn alpha_bar_prev(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bar[t - 1]
        }
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t >= self.steps() {
            return Err(Error::InvalidArgument(format!(
                "step {t} out of range for T = {}",
                self.steps()
            )));
        }
        Ok(())
    }

    /// Coefficients `(c_x0, c_xt, σ_t)` of the reverse step
    /// `x_{t-1} = c_x0·x̂0 + c_xt·x_t + σ_t·z`.
    pub fn posterior(&self, t: usize) -> (f64, f64, f64) {
        let ab = self.alpha_bar[t];
        let ab_prev = self.alpha_bar_prev(t);
        let beta = self.beta[t];
        let c_x0 = ab_prev.sqrt() * beta / (1.0 - ab);
        let c_xt = self.alpha[t].sqrt() * (1.0 - ab_prev) / (1.0 - ab);
        let var = beta * (1.0 - ab_prev) / (1.0 - ab);
        (c_x0, c_xt, var.max(0.0).sqrt())
    }
}

pub fn build_schedule(steps: usize) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!(
            "diffusion needs at least 2 steps, got {steps}"
        )));
    }
    let last = (steps - 1) as f64;
    let beta: Vec<f64> = (0..steps)
        .map(|t| {
            if t == steps - 1 {
                BETA_END
            } else {
                BETA_START + (t as f64 / last) * (BETA_END - BETA_START)
            }
        })
        .collect();
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
    let alpha_bar = alpha
        .iter()
        .scan(1.0, |acc, &a| {
            *acc *= a;
            Some(*acc)
        })
        .collect();
    Ok(NoiseSchedule {
        beta,
        alpha,
        alpha_bar,
    })
}

/// Forward marginal `x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·eps`.
pub fn forward_noise<F: Scalar>(
    x0: &Tensor<F>,
    t: usize,
    eps: &Tensor<F>,
    schedule: &NoiseSchedule,
) -> Result<Tensor<F>> {
    schedule.check_step(t)?;
    if !x0.same_shape(eps) {
        return Err(Error::Shape(format!(
            "forward noise: x0 {:?} vs eps {:?}",
            x0.shape(),
            eps.shape()
        )));
    }
    let a = F::lit(schedule.alpha_bar[t].sqrt());
    let s = F::lit((1.0 - schedule.alpha_bar[t]).sqrt());
    let data = x0
        .data()
        .iter()
        .zip(eps.data())
        .map(|(&x, &e)| a * x + s * e)
        .collect();
    Tensor::from_vec(x0.channels(), x0.height(), x0.width(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn endpoints_exact() {
        for steps in [20, 60, 100, 140] {
            let s = build_schedule(steps).unwrap();
            assert_eq!(s.beta[0], 1e-4);
            assert_eq!(s.beta[steps - 1], 0.02);
            assert!(s.beta.windows(2).all(|w| w[0] < w[1]));
            assert!(s.alpha_bar.windows(2).all(|w| w[0] > w[1]));
            assert!(s.alpha_bar.iter().all(|&a| a > 0.0 && a < 1.0));
            assert_eq!(s.alpha_bar[0], 1.0 - 1e-4);
        }
    }

    #[test]
    fn midpoint_of_twenty() {
        let s = build_schedule(20).unwrap();
        let want = 1e-4 + (10.0 / 19.0) * 0.0199;
        assert!((s.beta[10] - want).abs() < 1e-15);
        assert!((s.beta[10] - 0.010574).abs() < 1e-6);
    }

    #[test]
    fn heavy_terminal_noise() {
        let s = build_schedule(140).unwrap();
        assert!(s.alpha_bar[139] < 0.25);
    }

    #[test]
    fn too_few_steps() {
        assert!(build_schedule(1).is_err());
        assert!(build_schedule(0).is_err());
    }

    #[test]
    fn final_step_returns_prediction() {
        let s = build_schedule(60).unwrap();
        let (c_x0, c_xt, sigma) = s.posterior(0);
        assert!((c_x0 - 1.0).abs() < 1e-12);
        assert_eq!(c_xt, 0.0);
        assert_eq!(sigma, 0.0);
    }

    #[test]
    fn zero_eps_scales_signal() {
        let s = build_schedule(20).unwrap();
        let x0 = Tensor::from_vec(1, 1, 3, vec![0.2f64, 0.5, 1.0]).unwrap();
        let xt = forward_noise(&x0, 7, &Tensor::zeros(1, 1, 3), &s).unwrap();
        let a = s.alpha_bar[7].sqrt();
        assert_eq!(xt.data(), &[a * 0.2, a * 0.5, a * 1.0]);
        assert!(forward_noise(&x0, 20, &Tensor::zeros(1, 1, 3), &s).is_err());
    }

    #[test]
    fn monte_carlo_variance() {
        let s = build_schedule(60).unwrap();
        let mut rng = rng::stream(1, "mc");
        let x0 = Tensor::filled(1, 1, 4, 0.7f64);
        for t in [15, 30, 59] {
            let draws: Vec<f64> = (0..10_000)
                .map(|_| {
                    let eps = Tensor::from_vec(
                        1,
                        1,
                        4,
                        (0..4).map(|_| StandardNormal.sample(&mut rng)).collect(),
                    )
                    .unwrap();
                    forward_noise(&x0, t, &eps, &s).unwrap().data()[2]
                })
                .collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
            let want = 1.0 - s.alpha_bar[t];
            assert!((var / want - 1.0).abs() < 0.05, "t={t}: {var} vs {want}");
        }
    }
}

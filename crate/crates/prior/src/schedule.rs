//! Cosine noise schedule and forward diffusion.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::PriorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub steps: usize,
    /// Cumulative signal fraction, strictly decreasing in (0, 1].
    pub alpha_bar: Vec<f64>,
    /// Per-step loss weights (constant 1 by default).
    pub loss_weights: Vec<f64>,
}

const COSINE_S: f64 = 0.008;

impl NoiseSchedule {
    /// Cosine alpha-bar law with constant unit loss weights.
    pub fn cosine(steps: usize) -> Self {
        let f = |u: f64| {
            let x = (u + COSINE_S) / (1.0 + COSINE_S) * std::f64::consts::FRAC_PI_2;
            x.cos() * x.cos()
        };
        let f0 = f(0.0);
        let alpha_bar = (0..steps)
            .map(|n| {
                let u = (n + 1) as f64 / steps as f64;
                (f(u) / f0).clamp(1e-8, 1.0 - 1e-12)
            })
            .collect();
        NoiseSchedule {
            steps,
            alpha_bar,
            loss_weights: vec![1.0; steps],
        }
    }

    pub fn validate(&self) -> Result<(), PriorError> {
        if self.alpha_bar.len() != self.steps || self.loss_weights.len() != self.steps {
            return Err(PriorError::Config("schedule length mismatch".into()));
        }
        for w in &self.loss_weights {
            if *w <= 0.0 {
                return Err(PriorError::Config("loss weights must be positive".into()));
            }
        }
        let mut prev = 1.0f64 + 1e-15;
        for a in &self.alpha_bar {
            if !(*a > 0.0 && *a <= 1.0 && *a < prev) {
                return Err(PriorError::Config(
                    "alpha_bar must be strictly decreasing within (0, 1]".into(),
                ));
            }
            prev = *a;
        }
        Ok(())
    }
}

/// Draws standard-normal noise with the given seed, shaped like `x0`.
pub fn noise_like(shape: (usize, usize), seed: u64) -> Array2<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn(shape, |_| {
        let v: f64 = StandardNormal.sample(&mut rng);
        v as f32
    })
}

/// x_n = sqrt(alpha_bar_n) x0 + sqrt(1 - alpha_bar_n) eps.
pub fn forward_diffuse(
    x0: &Array2<f32>,
    n: usize,
    schedule: &NoiseSchedule,
    seed: u64,
) -> Result<Array2<f32>, PriorError> {
    if n >= schedule.steps {
        return Err(PriorError::Config(format!(
            "step {n} out of range 0..{}",
            schedule.steps
        )));
    }
    let a = schedule.alpha_bar[n];
    let eps = noise_like(x0.dim(), seed);
    Ok(x0 * (a.sqrt() as f32) + eps * ((1.0 - a).sqrt() as f32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_schedule_is_monotone_and_valid() {
        let s = NoiseSchedule::cosine(1000);
        s.validate().unwrap();
        assert!(s.alpha_bar[0] > 0.999);
        assert!(s.alpha_bar[999] < 1e-4);
    }

    #[test]
    fn step_zero_barely_perturbs() {
        let s = NoiseSchedule::cosine(1000);
        let x0 = Array2::from_elem((4, 8), 1.0f32);
        let xn = forward_diffuse(&x0, 0, &s, 3).unwrap();
        let max_dev = (&xn - &x0).iter().map(|v| v.abs()).fold(0.0f32, f32::max);
        // sqrt(1 - alpha_bar_0) is about 2e-3 for N=1000.
        assert!(max_dev < 0.02, "max deviation {max_dev}");
    }

    #[test]
    fn last_step_is_standard_normal() {
        let s = NoiseSchedule::cosine(1000);
        let x0 = Array2::from_elem((100, 100), 5.0f32);
        let xn = forward_diffuse(&x0, 999, &s, 11).unwrap();
        let n = xn.len() as f64;
        let mean = xn.iter().map(|v| *v as f64).sum::<f64>() / n;
        let var = xn.iter().map(|v| (*v as f64 - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.05, "std {}", var.sqrt());
    }

    #[test]
    fn diffusion_is_deterministic_in_the_seed() {
        let s = NoiseSchedule::cosine(100);
        let x0 = Array2::from_elem((3, 5), 0.5f32);
        let a = forward_diffuse(&x0, 50, &s, 42).unwrap();
        let b = forward_diffuse(&x0, 50, &s, 42).unwrap();
        assert_eq!(a, b);
        let c = forward_diffuse(&x0, 50, &s, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn out_of_range_step_errors() {
        let s = NoiseSchedule::cosine(10);
        let x0 = Array2::zeros((2, 2));
        assert!(forward_diffuse(&x0, 10, &s, 0).is_err());
    }
}

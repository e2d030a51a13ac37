//! Ancestral DDPM sampling with uniformly-strided steps and an optional
//! guidance hook that shifts the posterior mean.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use worldgrip_core::{ContactTrack, HandTrack, ObjectTemplate, ObjectTrack};
use worldgrip_geometry::mesh::{MeshQuery, TriMesh};
use worldgrip_geometry::KinematicHand;

use crate::checkpoint::Checkpoint;
use crate::denoiser::{ambient_features, assemble_frame_inputs, conditioning_features};
use crate::error::PriorError;
use crate::noise_synth::NoisyHands;
use crate::schedule::{noise_like, NoiseSchedule};
use crate::state::{unpack_state, DiffusionState, NormStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    /// Number of sampling steps, uniformly strided over the schedule.
    pub steps: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { steps: 50 }
    }
}

/// Ascending schedule indices used by strided sampling.
pub fn selected_steps(schedule: &NoiseSchedule, count: usize) -> Vec<usize> {
    let count = count.clamp(1, schedule.steps);
    (0..count).map(|i| i * schedule.steps / count).collect()
}

/// Everything needed to run one denoiser prediction for a fixed window.
pub struct SamplerContext<'a> {
    pub checkpoint: &'a Checkpoint,
    pub hand_model: &'a dyn KinematicHand,
    pub cond: Array2<f32>,
    pub bps: ndarray::Array1<f32>,
    pub template_query: MeshQuery,
}

impl<'a> SamplerContext<'a> {
    pub fn new(
        checkpoint: &'a Checkpoint,
        hand_model: &'a dyn KinematicHand,
        conditioning: &NoisyHands,
        template: &ObjectTemplate,
    ) -> Result<Self, PriorError> {
        let mesh = TriMesh::from_template(template).map_err(|e| PriorError::Decode(e.to_string()))?;
        if template.bps.len() != checkpoint.header.denoiser.bps_dims {
            return Err(PriorError::Config(format!(
                "template BPS dims {} != model {}",
                template.bps.len(),
                checkpoint.header.denoiser.bps_dims
            )));
        }
        Ok(SamplerContext {
            checkpoint,
            hand_model,
            cond: conditioning_features(conditioning),
            bps: ndarray::Array1::from_vec(template.bps.iter().map(|v| *v as f32).collect()),
            template_query: MeshQuery::new(mesh),
        })
    }

    pub fn stats(&self) -> &NormStats {
        &self.checkpoint.header.stats
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.checkpoint.header.schedule
    }

    /// One denoiser evaluation: predicts the clean state from `x` at step
    /// `n`, recomputing ambient features from `x` itself.
    pub fn predict_x0(&self, x: &Array2<f32>, n: usize) -> Array2<f32> {
        let header = &self.checkpoint.header;
        let ambient = ambient_features(
            x,
            &header.stats,
            header.denoiser.layout,
            self.hand_model,
            &self.template_query,
        );
        let inputs = assemble_frame_inputs(x, &self.cond, &ambient);
        let (x0, _head, _cache) = self.checkpoint.model.forward(&inputs, n, &self.bps);
        x0
    }
}

/// Posterior mean and sigma of q(x_prev | x_n, x0) under the strided
/// schedule.
pub fn posterior_mean_sigma(
    x: &Array2<f32>,
    x0: &Array2<f32>,
    schedule: &NoiseSchedule,
    n: usize,
    prev: usize,
) -> (Array2<f32>, f64) {
    let a_n = schedule.alpha_bar[n];
    let a_p = schedule.alpha_bar[prev];
    let beta_eff = 1.0 - a_n / a_p;
    let denom = 1.0 - a_n;
    let coef_x0 = a_p.sqrt() * beta_eff / denom;
    let coef_x = (a_n / a_p).sqrt() * (1.0 - a_p) / denom;
    let mean = x0 * (coef_x0 as f32) + x * (coef_x as f32);
    let var = beta_eff * (1.0 - a_p) / denom;
    (mean, var.max(0.0).sqrt())
}

/// Posterior variance used to scale guidance shifts at step n -> prev.
pub fn posterior_variance(schedule: &NoiseSchedule, n: usize, prev: usize) -> f64 {
    let a_n = schedule.alpha_bar[n];
    let a_p = schedule.alpha_bar[prev];
    let beta_eff = 1.0 - a_n / a_p;
    (beta_eff * (1.0 - a_p) / (1.0 - a_n)).max(0.0)
}

/// Per-step guidance: given the predicted clean state, return a gradient to
/// subtract from the posterior mean (already weighted and clipped).
pub trait GuidanceHook {
    fn gradient(
        &mut self,
        step_index: usize,
        n: usize,
        x0_pred_norm: &Array2<f32>,
    ) -> Option<Array2<f32>>;
}

/// Runs strided ancestral sampling for one window; the hook (when present)
/// shifts each posterior mean by `-posterior_variance * gradient`.
pub fn sample_window_states(
    ctx: &SamplerContext,
    window_len: usize,
    config: &SampleConfig,
    seed: u64,
    mut hook: Option<&mut dyn GuidanceHook>,
) -> Array2<f32> {
    let schedule = ctx.schedule();
    let dims = ctx.checkpoint.header.denoiser.layout.dims();
    let steps = selected_steps(schedule, config.steps);
    let mut x = noise_like((window_len, dims), seed ^ 0x1257);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9a1e);

    for (i, idx) in (0..steps.len()).rev().enumerate() {
        let n = steps[idx];
        let x0 = ctx.predict_x0(&x, n);
        let grad = hook.as_mut().and_then(|h| h.gradient(i, n, &x0));
        if idx == 0 {
            // Final step: the prediction is the sample.
            x = x0;
            break;
        }
        let prev = steps[idx - 1];
        let (mut mean, sigma) = posterior_mean_sigma(&x, &x0, schedule, n, prev);
        if let Some(g) = grad {
            let scale = posterior_variance(schedule, n, prev) as f32;
            mean = mean - g * scale;
        }
        let z = Array2::from_shape_fn((window_len, dims), |_| {
            let v: f64 = StandardNormal.sample(&mut noise_rng);
            v as f32
        });
        x = mean + z * (sigma as f32);
    }
    x
}

/// Unconditionally samples one window and decodes it into core tracks.
pub fn sample_unconditional_window(
    checkpoint: &Checkpoint,
    hand_model: &dyn KinematicHand,
    conditioning: &NoisyHands,
    template: &ObjectTemplate,
    config: &SampleConfig,
    seed: u64,
    fps: f64,
) -> Result<(HandTrack, ObjectTrack, ContactTrack), PriorError> {
    let ctx = SamplerContext::new(checkpoint, hand_model, conditioning, template)?;
    let states = sample_window_states(&ctx, conditioning.track.len(), config, seed, None);
    let state = DiffusionState::from_f32(&states, checkpoint.header.denoiser.layout);
    unpack_state(&state, &checkpoint.header.stats, hand_model, fps)
}

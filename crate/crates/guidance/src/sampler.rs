//! Guided sampling for a single window, with per-step reporting.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use worldgrip_core::{ContactTrack, HandTrack, ObjectTemplate, ObjectTrack};
use worldgrip_geometry::canonical::{transform_hand_track, transform_object_track};
use worldgrip_geometry::mesh::MeshQuery;
use worldgrip_geometry::{GravityFrame, KinematicHand};
use worldgrip_prior::decoded::{decode_normalized, DecodedWindow, StateGrad};
use worldgrip_prior::sample::{sample_window_states, GuidanceHook, SampleConfig};
use worldgrip_prior::state::{DiffusionState, NormStats, StateLayout};
use worldgrip_prior::{Checkpoint, NoisyHands, SamplerContext};

use crate::binding::{template_surface_points, ObservationBinding};
use crate::config::GuidanceConfig;
use crate::error::GuidanceError;
use crate::objectives::{g_contact_schedule, g_inter, g_reproj, g_temp};
use crate::{GUIDANCE_SURFACE_SAMPLES, GUIDANCE_SURFACE_SEED};

/// Objective values and gradient bookkeeping for one sampling step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepTrace {
    pub step_index: usize,
    pub schedule_step: usize,
    pub g_total: f64,
    pub g_reproj: f64,
    pub g_inter: f64,
    pub g_temp: f64,
    pub g_contact: f64,
    pub grad_norm: f64,
    pub clipped: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GuidanceReport {
    pub steps: Vec<StepTrace>,
    pub incidents: Vec<String>,
    pub timing_ms: f64,
    /// Set when no labeled observation fell inside the range.
    pub no_observations: bool,
}

/// Decoded reconstruction in both frames.
pub struct Reconstruction {
    pub hands: HandTrack,
    pub object: ObjectTrack,
    pub contact: ContactTrack,
    pub canonical_hands: HandTrack,
    pub canonical_object: ObjectTrack,
    pub frame: GravityFrame,
}

/// The weighted objective stack shared by the single-window and blended
/// samplers.
pub struct ObjectiveSet<'a> {
    pub config: GuidanceConfig,
    pub binding: Option<&'a ObservationBinding>,
    pub surface_points: Vec<nalgebra::Vector3<f64>>,
    pub template_query: &'a MeshQuery,
    pub contact_target: Option<Vec<[f64; 2]>>,
}

pub struct ObjectiveValues {
    pub total: f64,
    pub reproj: f64,
    pub inter: f64,
    pub temp: f64,
    pub contact: f64,
}

impl<'a> ObjectiveSet<'a> {
    /// Weighted objective value and raw-space gradient on a decoded window.
    pub fn evaluate(&self, window: &DecodedWindow) -> (ObjectiveValues, StateGrad) {
        let mut combined = StateGrad::zeros(window.frames(), window.layout);
        let mut values = ObjectiveValues {
            total: 0.0,
            reproj: 0.0,
            inter: 0.0,
            temp: 0.0,
            contact: 0.0,
        };
        let c = &self.config;
        if c.w_reproj > 0.0 {
            if let Some(binding) = self.binding {
                let (v, g) = g_reproj(window, binding, &self.surface_points);
                values.reproj = v;
                combined.d_raw = combined.d_raw + g.d_raw * c.w_reproj;
            }
        }
        if c.w_inter > 0.0 {
            let (v, g) = g_inter(window, self.template_query);
            values.inter = v;
            combined.d_raw = combined.d_raw + g.d_raw * c.w_inter;
        }
        if c.w_temp > 0.0 {
            let (v, g) = g_temp(window);
            values.temp = v;
            combined.d_raw = combined.d_raw + g.d_raw * c.w_temp;
        }
        if c.w_contact > 0.0 {
            if let Some(target) = &self.contact_target {
                let (v, g) = g_contact_schedule(window, target);
                values.contact = v;
                combined.d_raw = combined.d_raw + g.d_raw * c.w_contact;
            }
        }
        values.total = c.w_reproj * values.reproj
            + c.w_inter * values.inter
            + c.w_temp * values.temp
            + c.w_contact * values.contact;
        (values, combined)
    }
}

/// Clips a normalized-space gradient to the configured norm; returns the
/// pre-clip norm and whether clipping applied.
pub fn clip_gradient(grad: &mut Array2<f32>, clip_norm: f64) -> (f64, bool) {
    let norm = grad.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
    if norm > clip_norm {
        let scale = (clip_norm / norm) as f32;
        grad.mapv_inplace(|v| v * scale);
        (norm, true)
    } else {
        (norm, false)
    }
}

struct HookState<'a> {
    objectives: &'a ObjectiveSet<'a>,
    stats: &'a NormStats,
    layout: StateLayout,
    hand_model: &'a dyn KinematicHand,
    trace: Vec<StepTrace>,
    incidents: Vec<String>,
}

impl<'a> GuidanceHook for HookState<'a> {
    fn gradient(
        &mut self,
        step_index: usize,
        n: usize,
        x0_pred_norm: &Array2<f32>,
    ) -> Option<Array2<f32>> {
        let window = decode_normalized(x0_pred_norm, self.stats, self.layout, self.hand_model, true);
        let (values, grad) = self.objectives.evaluate(&window);
        let mut grad_norm = grad.to_normalized(self.stats);
        let finite = grad_norm.iter().all(|v| v.is_finite()) && values.total.is_finite();
        let (norm, clipped) = if finite {
            clip_gradient(&mut grad_norm, self.objectives.config.clip_norm)
        } else {
            (f64::NAN, false)
        };
        self.trace.push(StepTrace {
            step_index,
            schedule_step: n,
            g_total: values.total,
            g_reproj: values.reproj,
            g_inter: values.inter,
            g_temp: values.temp,
            g_contact: values.contact,
            grad_norm: norm,
            clipped,
        });
        if !finite {
            self.incidents.push(format!(
                "non-finite guidance gradient at step {step_index} (n={n}); guidance skipped"
            ));
            return None;
        }
        Some(grad_norm)
    }
}

/// Guided reconstruction of one canonical window. Observations and cameras
/// must already be in the window's canonical frame; the result is mapped
/// back to world through `frame`.
#[allow(clippy::too_many_arguments)]
pub fn guided_sample(
    checkpoint: &Checkpoint,
    hand_model: &dyn KinematicHand,
    conditioning: &NoisyHands,
    template: &ObjectTemplate,
    binding: &ObservationBinding,
    frame: GravityFrame,
    config: &GuidanceConfig,
    seed: u64,
    fps: f64,
) -> Result<(Reconstruction, GuidanceReport), GuidanceError> {
    config.validate()?;
    let started = std::time::Instant::now();
    let ctx = SamplerContext::new(checkpoint, hand_model, conditioning, template)?;
    let surface_points =
        template_surface_points(template, GUIDANCE_SURFACE_SAMPLES, GUIDANCE_SURFACE_SEED);
    let objectives = ObjectiveSet {
        config: *config,
        binding: Some(binding),
        surface_points,
        template_query: &ctx.template_query,
        contact_target: None,
    };
    let mut hook = HookState {
        objectives: &objectives,
        stats: &checkpoint.header.stats,
        layout: checkpoint.header.denoiser.layout,
        hand_model,
        trace: vec![],
        incidents: vec![],
    };
    let sample_cfg = SampleConfig {
        steps: config.sample_steps,
    };
    let states = sample_window_states(
        &ctx,
        conditioning.track.len(),
        &sample_cfg,
        seed,
        Some(&mut hook),
    );
    let recon = decode_reconstruction(&states, checkpoint, hand_model, frame, fps)?;
    let report = GuidanceReport {
        steps: hook.trace,
        incidents: hook.incidents,
        timing_ms: started.elapsed().as_secs_f64() * 1e3,
        no_observations: binding.empty,
    };
    Ok((recon, report))
}

/// Planner sampling: conditions on coarse hands and steers contact toward a
/// user schedule with interaction and smoothness terms; no video evidence.
#[allow(clippy::too_many_arguments)]
pub fn plan_sample(
    checkpoint: &Checkpoint,
    hand_model: &dyn KinematicHand,
    conditioning: &NoisyHands,
    template: &ObjectTemplate,
    contact_target: Vec<[f64; 2]>,
    config: &GuidanceConfig,
    seed: u64,
    fps: f64,
) -> Result<(Reconstruction, GuidanceReport), GuidanceError> {
    config.validate()?;
    if config.w_reproj != 0.0 {
        return Err(GuidanceError::Config(
            "the planner runs without observations; w_reproj must be 0".into(),
        ));
    }
    let started = std::time::Instant::now();
    let ctx = SamplerContext::new(checkpoint, hand_model, conditioning, template)?;
    let surface_points =
        template_surface_points(template, GUIDANCE_SURFACE_SAMPLES, GUIDANCE_SURFACE_SEED);
    let objectives = ObjectiveSet {
        config: *config,
        binding: None,
        surface_points,
        template_query: &ctx.template_query,
        contact_target: Some(contact_target),
    };
    let mut hook = HookState {
        objectives: &objectives,
        stats: &checkpoint.header.stats,
        layout: checkpoint.header.denoiser.layout,
        hand_model,
        trace: vec![],
        incidents: vec![],
    };
    let sample_cfg = SampleConfig {
        steps: config.sample_steps,
    };
    let states = sample_window_states(
        &ctx,
        conditioning.track.len(),
        &sample_cfg,
        seed,
        Some(&mut hook),
    );
    let recon = decode_reconstruction(
        &states,
        checkpoint,
        hand_model,
        GravityFrame::identity(),
        fps,
    )?;
    let report = GuidanceReport {
        steps: hook.trace,
        incidents: hook.incidents,
        timing_ms: started.elapsed().as_secs_f64() * 1e3,
        no_observations: true,
    };
    Ok((recon, report))
}

pub(crate) fn decode_reconstruction(
    states: &Array2<f32>,
    checkpoint: &Checkpoint,
    hand_model: &dyn KinematicHand,
    frame: GravityFrame,
    fps: f64,
) -> Result<Reconstruction, GuidanceError> {
    let state = DiffusionState::from_f32(states, checkpoint.header.denoiser.layout);
    let (hands, object, contact) =
        worldgrip_prior::unpack_state(&state, &checkpoint.header.stats, hand_model, fps)?;
    let world_hands = transform_hand_track(&hands, &frame.world_from_local);
    let world_object = transform_object_track(&object, &frame.world_from_local);
    Ok(Reconstruction {
        hands: world_hands,
        object: world_object,
        contact: contact.clone(),
        canonical_hands: hands,
        canonical_object: object,
        frame,
    })
}

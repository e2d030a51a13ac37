//! Reconstruction as guided generation.
//!
//! Task objectives (reprojection, interaction, temporal smoothness) are
//! evaluated on the predicted clean sample each diffusion step; their
//! gradient, clipped, shifts the posterior mean. Long sequences are handled
//! by denoising overlapping windows in parallel and blending them with
//! linear-ramp weights each step.

pub mod binding;
pub mod blend;
pub mod config;
pub mod error;
pub mod objectives;
pub mod sampler;

pub use binding::ObservationBinding;
pub use blend::{blend_guided_sample, BlendInput};
pub use config::GuidanceConfig;
pub use error::GuidanceError;
pub use objectives::{g_contact_schedule, g_inter, g_reproj, g_temp};
pub use sampler::{guided_sample, plan_sample, GuidanceReport, Reconstruction, StepTrace};

/// Number of seeded template surface points used for reprojection.
pub const GUIDANCE_SURFACE_SAMPLES: usize = 2000;
pub const GUIDANCE_SURFACE_SEED: u64 = 0x6a1d;

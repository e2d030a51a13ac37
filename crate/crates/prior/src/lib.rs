//! The conditional diffusion prior over hand-object motion.
//!
//! Models p(hands, object trajectory, contact | template, approximate hands)
//! on fixed-length windows in the gravity-aware canonical frame. The
//! denoiser is a small transformer trained with an x0-parameterized DDPM
//! objective plus interaction, consistency, and smoothness terms after a
//! warm-up; sampling is strided ancestral DDPM with an optional guidance
//! hook.

pub mod checkpoint;
pub mod decoded;
pub mod denoiser;
pub mod error;
pub mod losses;
pub mod nn;
pub mod noise_synth;
pub mod sample;
pub mod schedule;
pub mod state;
pub mod train;

pub use checkpoint::{Checkpoint, CheckpointHeader};
pub use decoded::{decode_normalized, DecodedWindow, StateGrad};
pub use denoiser::{
    ambient_features, conditioning_features, Denoiser, DenoiserConfig, AMBIENT_DIMS, COND_DIMS,
};
pub use error::PriorError;
pub use losses::{
    loss_consistency, loss_ddpm, loss_interaction, loss_smooth, snapshot_interaction,
    InteractionSnapshot,
};
pub use noise_synth::{synthesize_noisy_hands, NoiseSynthConfig, NoisyHands};
pub use sample::{
    sample_unconditional_window, sample_window_states, GuidanceHook, SampleConfig, SamplerContext,
};
pub use schedule::{forward_diffuse, NoiseSchedule};
pub use state::{pack_state, unpack_state, DiffusionState, NormStats, StateLayout};
pub use train::{train, TrainConfig, TrainSet, TrainWindow};

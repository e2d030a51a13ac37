//! Scripted synthetic hand-object scenes with full ground truth.
//!
//! Pick/carry/handoff/idle scenarios on a desk, watched by a moving head
//! camera. Object motion is rigidly attached to the grasping wrist during
//! scripted contact spans and stationary (plus sub-millimeter noise)
//! otherwise, so oracles over the generated data are exact. Everything is
//! deterministic given the seed.

mod render;
mod scenario;

pub use render::{render_masks, RenderedMasks, RENDER_SAMPLE_COUNT, RENDER_SAMPLE_SEED};
pub use scenario::{
    generate_sequence, make_dataset, GraspSpan, Scenario, SynthConfig, SynthSequence, TrainingItem,
    TrainingSet,
};

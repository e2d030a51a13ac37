//! Domain types and containers for world-frame hand-object motion.
//!
//! Everything here is a plain value type: bimanual hand tracks, SE(3) object
//! trajectories in 9D-rotation form, relaxed contact tracks, object templates
//! with BPS descriptors, camera tracks, and sparse 2D observations. Types are
//! immutable after construction and safe to share across threads.
//!
//! The JSON sequence format lives in [`json`]; sliding-window extraction in
//! [`window`].

pub mod error;
pub mod json;
pub mod types;
pub mod window;

pub use error::CoreError;
pub use types::{
    CameraFrame, CameraTrack, ContactTrack, HandState, HandTrack, Intrinsics, MotionWindow,
    ObjectPose, ObjectTemplate, ObjectTrack, ObsFrame, Observations, RleMask, SequenceBundle,
    Side, ARTIC_DIMS, JOINT_COUNT, SHAPE_DIMS,
};
pub use window::{window_split, WindowPlan};

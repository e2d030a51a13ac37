//! Gravity-aware canonicalization.
//!
//! Re-expresses tracks in a local frame whose z-axis points up (opposing
//! gravity) and whose x-axis follows the first camera's horizontal forward
//! direction, anchored at the first camera position. The [`GravityFrame`]
//! records the world-from-local transform so everything maps back exactly.

use nalgebra::{Matrix3, Vector3};

use crate::error::GeometryError;
use crate::se3::{
    axis_angle_from_rotation, mat3_from_rot9, rot9_from_mat3, rotation_from_axis_angle, SE3,
};
use worldgrip_core::{
    CameraFrame, CameraTrack, ContactTrack, HandState, HandTrack, MotionWindow, ObjectPose,
    ObjectTrack,
};

/// Forward directions steeper than this against gravity are degenerate.
const MAX_FORWARD_GRAVITY_DOT: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityFrame {
    pub world_from_local: SE3,
}

impl GravityFrame {
    pub fn identity() -> Self {
        GravityFrame {
            world_from_local: SE3::identity(),
        }
    }

    pub fn local_from_world(&self) -> SE3 {
        self.world_from_local.inverse()
    }

    pub fn to_local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.local_from_world().apply(p)
    }

    pub fn to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.world_from_local.apply(p)
    }
}

/// Computes the gravity frame from the first camera and re-expresses the
/// whole camera track in it.
///
/// Post-conditions: the transformed gravity is (0,0,-1), the first camera
/// sits at the origin, and its forward direction projected to the horizontal
/// plane is +x.
pub fn canonicalize(camera: &CameraTrack) -> Result<(GravityFrame, CameraTrack), GeometryError> {
    let first = camera.frames.first().ok_or(GeometryError::EmptyCameraTrack)?;
    let gravity = Vector3::new(
        camera.gravity_world[0],
        camera.gravity_world[1],
        camera.gravity_world[2],
    );
    let r_first = mat3_from_rot9(&first.rotation);
    // Optical axis (+z of the camera frame) in world coordinates.
    let forward = r_first * Vector3::z();
    let dot = forward.dot(&gravity);
    if dot.abs() > MAX_FORWARD_GRAVITY_DOT {
        return Err(GeometryError::DegenerateFacing { dot });
    }

    let up = -gravity; // local +z
    let horizontal = forward - gravity * forward.dot(&gravity);
    let x_axis = horizontal.normalize();
    let y_axis = up.cross(&x_axis);
    let rotation = Matrix3::from_columns(&[x_axis, y_axis, up]);
    let translation = Vector3::new(
        first.translation[0],
        first.translation[1],
        first.translation[2],
    );
    let frame = GravityFrame {
        world_from_local: SE3::new(rotation, translation),
    };

    let mut canonical = camera.clone();
    let local_from_world = frame.local_from_world();
    for f in canonical.frames.iter_mut() {
        let pose = SE3::from_rot9_trans(&f.rotation, &f.translation);
        let transformed = local_from_world.compose(&pose);
        *f = CameraFrame {
            rotation: rot9_from_mat3(&transformed.rotation),
            translation: transformed.trans3(),
        };
    }
    let g_local = local_from_world.rotation * gravity;
    canonical.gravity_world = [g_local.x, g_local.y, g_local.z];
    Ok((frame, canonical))
}

/// Applies a rigid transform to a hand track (parameters and joints).
pub fn transform_hand_track(track: &HandTrack, transform: &SE3) -> HandTrack {
    let frames = track
        .frames
        .iter()
        .map(|pair| [
            transform_hand_state(&pair[0], transform),
            transform_hand_state(&pair[1], transform),
        ])
        .collect();
    let joints = track
        .joints
        .iter()
        .map(|frame| {
            let mut out = *frame;
            for hand in out.iter_mut() {
                for j in hand.iter_mut() {
                    *j = transform.apply_arr(j);
                }
            }
            out
        })
        .collect();
    HandTrack::with_derived_velocities(frames, joints, track.fps)
}

pub fn transform_hand_state(state: &HandState, transform: &SE3) -> HandState {
    let r = rotation_from_axis_angle(&state.global_orient);
    let new_r = transform.rotation * r;
    HandState {
        side: state.side,
        global_orient: axis_angle_from_rotation(&new_r),
        translation: transform.apply_arr(&state.translation),
        articulation: state.articulation,
        shape: state.shape,
    }
}

pub fn transform_object_track(track: &ObjectTrack, transform: &SE3) -> ObjectTrack {
    ObjectTrack {
        poses: track
            .poses
            .iter()
            .map(|p| {
                let pose = SE3::from_rot9_trans(&p.rot9, &p.translation);
                let out = transform.compose(&pose);
                ObjectPose {
                    rot9: out.rot9(),
                    translation: out.trans3(),
                }
            })
            .collect(),
    }
}

/// Canonicalizes every track of a window in place and stores the anchor.
pub fn canonicalize_window(
    window: &MotionWindow,
    camera: &CameraTrack,
) -> Result<(MotionWindow, CameraTrack, GravityFrame), GeometryError> {
    let cam_slice = camera.slice(window.start, window.len.min(camera.len() - window.start));
    let (frame, canonical_camera) = canonicalize(&cam_slice)?;
    let inv = frame.local_from_world();
    let mut out = window.clone();
    out.hands = transform_hand_track(&window.hands, &inv);
    out.object = transform_object_track(&window.object, &inv);
    out.anchor_rotation = rot9_from_mat3(&frame.world_from_local.rotation);
    out.anchor_translation = frame.world_from_local.trans3();
    Ok((out, canonical_camera, frame))
}

/// Maps a canonical-frame window back to world coordinates.
pub fn uncanonicalize_tracks(
    hands: &HandTrack,
    object: &ObjectTrack,
    frame: &GravityFrame,
) -> (HandTrack, ObjectTrack) {
    (
        transform_hand_track(hands, &frame.world_from_local),
        transform_object_track(object, &frame.world_from_local),
    )
}

/// Contact tracks are frame-independent; kept for symmetric APIs.
pub fn transform_contact_track(track: &ContactTrack) -> ContactTrack {
    track.clone()
}

/// Re-expresses a camera track (poses and gravity) under a rigid transform.
pub fn transform_camera_track(track: &CameraTrack, transform: &SE3) -> CameraTrack {
    let mut out = track.clone();
    for f in out.frames.iter_mut() {
        let pose = SE3::from_rot9_trans(&f.rotation, &f.translation);
        let moved = transform.compose(&pose);
        f.rotation = rot9_from_mat3(&moved.rotation);
        f.translation = moved.trans3();
    }
    let g = Vector3::new(
        track.gravity_world[0],
        track.gravity_world[1],
        track.gravity_world[2],
    );
    let g2 = transform.rotation * g;
    out.gravity_world = [g2.x, g2.y, g2.z];
    out
}

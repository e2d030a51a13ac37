//! The windowed diffusion variable: layout, normalization, packing.
//!
//! Per frame the state holds a 9D object rotation, two relaxed contact
//! values, and two 31-dim hand parameter blocks (73 values). The object
//! translation is not part of that documented 73; it rides in three extra
//! trailing slots controlled by [`StateLayout::include_object_translation`]
//! (on by default, since reconstruction needs it).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use worldgrip_core::{
    ContactTrack, HandState, HandTrack, ObjectPose, ObjectTrack, Side, ARTIC_DIMS,
};
use worldgrip_geometry::{project_to_so3, KinematicHand};

use crate::error::PriorError;

/// Dimensions documented for the per-frame state (object rotation + contact
/// + both hands), excluding the translation extension.
pub const PAPER_STATE_DIMS: usize = 73;
/// One hand parameter block: orient(3) + trans(3) + artic(15) + shape(10).
pub const HAND_BLOCK: usize = 31;

pub const ROT9_OFFSET: usize = 0;
pub const CONTACT_OFFSET: usize = 9;
pub const HANDS_OFFSET: usize = 11;
pub const OBJ_TRANS_OFFSET: usize = 73;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub include_object_translation: bool,
}

impl Default for StateLayout {
    fn default() -> Self {
        StateLayout {
            include_object_translation: true,
        }
    }
}

impl StateLayout {
    pub fn paper() -> Self {
        StateLayout {
            include_object_translation: false,
        }
    }

    pub fn dims(&self) -> usize {
        PAPER_STATE_DIMS + if self.include_object_translation { 3 } else { 0 }
    }

    pub fn hand_offset(&self, side: Side) -> usize {
        HANDS_OFFSET + side.index() * HAND_BLOCK
    }
}

/// Per-dimension normalization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Dimensions with raw standard deviation at or below this floor carry no
/// information; their scale is clamped so normalization stays invertible.
pub const STD_FLOOR: f64 = 1e-6;

impl NormStats {
    pub fn identity(dims: usize) -> Self {
        NormStats {
            mean: vec![0.0; dims],
            std: vec![1.0; dims],
        }
    }

    /// Pooled per-dimension statistics over raw (unnormalized) windows.
    pub fn from_rows<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dims: usize) -> Self {
        let mut count = 0usize;
        let mut mean = vec![0.0; dims];
        for row in rows.clone() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            count += 1;
        }
        if count == 0 {
            return NormStats::identity(dims);
        }
        for m in mean.iter_mut() {
            *m /= count as f64;
        }
        let mut var = vec![0.0; dims];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / count as f64).sqrt().max(STD_FLOOR))
            .collect();
        NormStats { mean, std }
    }

    pub fn normalize_value(&self, dim: usize, v: f64) -> f64 {
        (v - self.mean[dim]) / self.std[dim]
    }

    pub fn denormalize_value(&self, dim: usize, v: f64) -> f64 {
        v * self.std[dim] + self.mean[dim]
    }
}

/// The windowed, normalized diffusion variable.
///
/// Stored in f64 so packing and unpacking stay invertible well below the
/// 1e-9 contract; the network boundary casts to f32 via [`DiffusionState::to_f32`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState {
    /// (T, dims) normalized values.
    pub data: Array2<f64>,
    pub layout: StateLayout,
}

impl DiffusionState {
    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn to_f32(&self) -> Array2<f32> {
        self.data.mapv(|v| v as f32)
    }

    pub fn from_f32(data: &Array2<f32>, layout: StateLayout) -> Self {
        DiffusionState {
            data: data.mapv(|v| v as f64),
            layout,
        }
    }
}

/// Packs equal-length tracks into the normalized windowed state.
pub fn pack_state(
    hands: &HandTrack,
    object: &ObjectTrack,
    contact: &ContactTrack,
    layout: StateLayout,
    stats: &NormStats,
) -> Result<DiffusionState, PriorError> {
    let t = hands.len();
    if object.len() != t || contact.len() != t {
        return Err(PriorError::LengthMismatch(format!(
            "hands={} object={} contact={}",
            t,
            object.len(),
            contact.len()
        )));
    }
    let dims = layout.dims();
    if stats.mean.len() != dims {
        return Err(PriorError::Config(format!(
            "stats dims {} != layout dims {dims}",
            stats.mean.len()
        )));
    }
    let mut raw = Array2::<f64>::zeros((t, dims));
    for f in 0..t {
        write_raw_frame(
            raw.row_mut(f).as_slice_mut().unwrap(),
            &hands.frames[f],
            &object.poses[f],
            &contact.frames[f],
            layout,
        );
    }
    let mut data = Array2::<f64>::zeros((t, dims));
    for f in 0..t {
        for d in 0..dims {
            data[(f, d)] = stats.normalize_value(d, raw[(f, d)]);
        }
    }
    Ok(DiffusionState { data, layout })
}

/// Writes one frame of raw (unnormalized) state values.
pub fn write_raw_frame(
    out: &mut [f64],
    hands: &[HandState; 2],
    object: &ObjectPose,
    contact: &[f64; 2],
    layout: StateLayout,
) {
    out[ROT9_OFFSET..ROT9_OFFSET + 9].copy_from_slice(&object.rot9);
    out[CONTACT_OFFSET] = contact[0];
    out[CONTACT_OFFSET + 1] = contact[1];
    for side in Side::both() {
        let s = side.index();
        let base = layout.hand_offset(side);
        out[base..base + 3].copy_from_slice(&hands[s].global_orient);
        out[base + 3..base + 6].copy_from_slice(&hands[s].translation);
        out[base + 6..base + 6 + ARTIC_DIMS].copy_from_slice(&hands[s].articulation);
        out[base + 6 + ARTIC_DIMS..base + HAND_BLOCK].copy_from_slice(&hands[s].shape);
    }
    if layout.include_object_translation {
        out[OBJ_TRANS_OFFSET..OBJ_TRANS_OFFSET + 3].copy_from_slice(&object.translation);
    }
}

/// Reads one raw frame back into typed values (no projection or clamping).
pub fn read_raw_frame(
    row: &[f64],
    layout: StateLayout,
) -> ([HandState; 2], ObjectPose, [f64; 2]) {
    let mut rot9 = [0.0; 9];
    rot9.copy_from_slice(&row[ROT9_OFFSET..ROT9_OFFSET + 9]);
    let contact = [row[CONTACT_OFFSET], row[CONTACT_OFFSET + 1]];
    let mut hands = [HandState::rest(Side::Left), HandState::rest(Side::Right)];
    for side in Side::both() {
        let s = side.index();
        let base = layout.hand_offset(side);
        let state = &mut hands[s];
        state.side = side;
        state.global_orient.copy_from_slice(&row[base..base + 3]);
        state.translation.copy_from_slice(&row[base + 3..base + 6]);
        state
            .articulation
            .copy_from_slice(&row[base + 6..base + 6 + ARTIC_DIMS]);
        state
            .shape
            .copy_from_slice(&row[base + 6 + ARTIC_DIMS..base + HAND_BLOCK]);
    }
    let translation = if layout.include_object_translation {
        [
            row[OBJ_TRANS_OFFSET],
            row[OBJ_TRANS_OFFSET + 1],
            row[OBJ_TRANS_OFFSET + 2],
        ]
    } else {
        [0.0; 3]
    };
    (
        hands,
        ObjectPose {
            rot9,
            translation,
        },
        contact,
    )
}

/// Denormalizes a network-precision state matrix to raw f64 values.
pub fn denormalize(state: &Array2<f32>, stats: &NormStats) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros(state.raw_dim());
    for ((f, d), v) in state.indexed_iter() {
        out[(f, d)] = stats.denormalize_value(d, *v as f64);
    }
    out
}

/// Denormalizes a full-precision state matrix.
pub fn denormalize_f64(state: &Array2<f64>, stats: &NormStats) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros(state.raw_dim());
    for ((f, d), v) in state.indexed_iter() {
        out[(f, d)] = stats.denormalize_value(d, *v);
    }
    out
}

/// Unpacks a normalized state back into core tracks.
///
/// The returned tracks satisfy core invariants: rotations are projected to
/// SO(3), contact values clamped to [0, 1], joints rebuilt with forward
/// kinematics, and velocities re-derived.
pub fn unpack_state(
    state: &DiffusionState,
    stats: &NormStats,
    hand_model: &dyn KinematicHand,
    fps: f64,
) -> Result<(HandTrack, ObjectTrack, ContactTrack), PriorError> {
    let raw = denormalize_f64(&state.data, stats);
    let t = raw.nrows();
    let mut frames = Vec::with_capacity(t);
    let mut joints = Vec::with_capacity(t);
    let mut poses = Vec::with_capacity(t);
    let mut contact = Vec::with_capacity(t);
    for f in 0..t {
        let (mut hands, pose, c) = read_raw_frame(raw.row(f).as_slice().unwrap(), state.layout);
        for h in hands.iter_mut() {
            // Keep the axis-angle inside its invariant range.
            let norm = (h.global_orient.iter().map(|v| v * v).sum::<f64>()).sqrt();
            if norm >= 2.0 * std::f64::consts::PI {
                let target = norm % (2.0 * std::f64::consts::PI);
                let scale = if norm > 0.0 { target / norm } else { 0.0 };
                for v in h.global_orient.iter_mut() {
                    *v *= scale;
                }
            }
        }
        let rot = project_to_so3(&pose.rot9).map_err(|e| PriorError::Decode(e.to_string()))?;
        poses.push(ObjectPose {
            rot9: worldgrip_geometry::se3::rot9_from_mat3(&rot),
            translation: pose.translation,
        });
        contact.push([c[0].clamp(0.0, 1.0), c[1].clamp(0.0, 1.0)]);
        joints.push([hand_model.fk(&hands[0]), hand_model.fk(&hands[1])]);
        frames.push(hands);
    }
    Ok((
        HandTrack::with_derived_velocities(frames, joints, fps),
        ObjectTrack { poses },
        ContactTrack::new(contact),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use worldgrip_core::JOINT_COUNT;
    use worldgrip_geometry::StandardHand;

    fn toy_tracks(t: usize) -> (HandTrack, ObjectTrack, ContactTrack) {
        let hand_model = StandardHand::default();
        let mut frames = Vec::new();
        let mut joints = Vec::new();
        let mut poses = Vec::new();
        let mut contact = Vec::new();
        for f in 0..t {
            let mut left = HandState::rest(Side::Left);
            left.translation = [0.1 * f as f64, 0.0, 0.2];
            left.articulation[0] = 0.3;
            let mut right = HandState::rest(Side::Right);
            right.global_orient = [0.0, 0.4, 0.1];
            right.translation = [0.0, -0.1, 0.3 + 0.01 * f as f64];
            joints.push([hand_model.fk(&left), hand_model.fk(&right)]);
            frames.push([left, right]);
            let rot = worldgrip_geometry::se3::rotation_from_axis_angle(&[0.0, 0.0, 0.1 * f as f64]);
            poses.push(ObjectPose {
                rot9: worldgrip_geometry::se3::rot9_from_mat3(&rot),
                translation: [0.5, 0.1 * f as f64, 0.7],
            });
            contact.push([0.0, if f > t / 2 { 1.0 } else { 0.0 }]);
        }
        (
            HandTrack::with_derived_velocities(frames, joints, 30.0),
            ObjectTrack { poses },
            ContactTrack::new(contact),
        )
    }

    #[test]
    fn paper_layout_has_73_dims() {
        let layout = StateLayout::paper();
        assert_eq!(layout.dims(), 73);
        let (hands, object, contact) = toy_tracks(120);
        let stats = NormStats::identity(73);
        let state = pack_state(&hands, &object, &contact, layout, &stats).unwrap();
        assert_eq!(state.data.dim(), (120, 73));
    }

    #[test]
    fn default_layout_appends_translation() {
        let layout = StateLayout::default();
        assert_eq!(layout.dims(), 76);
    }

    #[test]
    fn pack_unpack_round_trip() {
        let layout = StateLayout::default();
        let (hands, object, contact) = toy_tracks(16);
        // Non-trivial stats exercise the normalization path.
        let mut stats = NormStats::identity(layout.dims());
        for d in 0..layout.dims() {
            stats.mean[d] = 0.01 * d as f64;
            stats.std[d] = 0.5 + 0.01 * d as f64;
        }
        let state = pack_state(&hands, &object, &contact, layout, &stats).unwrap();
        let hand_model = StandardHand::default();
        let (h2, o2, c2) = unpack_state(&state, &stats, &hand_model, 30.0).unwrap();
        for f in 0..16 {
            for s in 0..2 {
                for k in 0..3 {
                    assert!(
                        (h2.frames[f][s].translation[k] - hands.frames[f][s].translation[k]).abs()
                            < 1e-9
                    );
                    assert!(
                        (h2.frames[f][s].global_orient[k] - hands.frames[f][s].global_orient[k])
                            .abs()
                            < 1e-9
                    );
                }
                for j in 0..JOINT_COUNT {
                    for k in 0..3 {
                        assert!((h2.joints[f][s][j][k] - hands.joints[f][s][j][k]).abs() < 1e-9);
                    }
                }
            }
            for k in 0..9 {
                assert!((o2.poses[f].rot9[k] - object.poses[f].rot9[k]).abs() < 1e-7);
            }
            for k in 0..3 {
                assert!((o2.poses[f].translation[k] - object.poses[f].translation[k]).abs() < 1e-9);
            }
            for k in 0..2 {
                assert!((c2.frames[f][k] - contact.frames[f][k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let layout = StateLayout::default();
        let (hands, object, _) = toy_tracks(8);
        let contact = ContactTrack::new(vec![[0.0, 0.0]; 7]);
        let stats = NormStats::identity(layout.dims());
        assert!(pack_state(&hands, &object, &contact, layout, &stats).is_err());
    }

    #[test]
    fn stats_standardize_the_data_they_came_from() {
        let layout = StateLayout::default();
        let dims = layout.dims();
        let (hands, object, contact) = toy_tracks(64);
        let mut raw_rows = Vec::new();
        for f in 0..64 {
            let mut row = vec![0.0; dims];
            write_raw_frame(
                &mut row,
                &hands.frames[f],
                &object.poses[f],
                &contact.frames[f],
                layout,
            );
            raw_rows.push(row);
        }
        let stats = NormStats::from_rows(raw_rows.iter().map(|r| r.as_slice()), dims);
        let state = pack_state(&hands, &object, &contact, layout, &stats).unwrap();
        for d in 0..dims {
            // Skip constant dimensions (their std hit the floor).
            if stats.std[d] <= STD_FLOOR {
                continue;
            }
            let col: Vec<f64> = (0..64).map(|f| state.data[(f, d)] as f64).collect();
            let mean = col.iter().sum::<f64>() / 64.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 64.0;
            assert!(mean.abs() < 0.05, "dim {d} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 0.1, "dim {d} std {}", var.sqrt());
        }
    }
}

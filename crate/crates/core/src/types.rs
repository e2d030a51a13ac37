//! Value types shared by every stage of the pipeline.
//!
//! Conventions: world units are meters, angles are radians, time is frames at
//! the stored `fps`. Rotations are row-major 3x3 matrices flattened to 9
//! values ("rot9"). All reals are f64 so the JSON format round-trips
//! bit-exactly.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Number of joints per hand (wrist + 5 fingers x 4).
pub const JOINT_COUNT: usize = 21;
/// Articulation coefficients per hand (PCA-style).
pub const ARTIC_DIMS: usize = 15;
/// Shape coefficients per hand.
pub const SHAPE_DIMS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn both() -> [Side; 2] {
        [Side::Left, Side::Right]
    }
}

/// Per-frame parametric state of one hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub side: Side,
    /// Axis-angle global orientation, radians; norm must stay below 2*pi.
    pub global_orient: [f64; 3],
    /// Wrist translation in meters.
    pub translation: [f64; 3],
    /// Articulation coefficients (dimensionless).
    pub articulation: [f64; ARTIC_DIMS],
    /// Shape coefficients (dimensionless).
    pub shape: [f64; SHAPE_DIMS],
}

impl HandState {
    pub fn rest(side: Side) -> Self {
        HandState {
            side,
            global_orient: [0.0; 3],
            translation: [0.0; 3],
            articulation: [0.0; ARTIC_DIMS],
            shape: [0.0; SHAPE_DIMS],
        }
    }

    pub fn validate(&self, path: &str) -> Result<(), CoreError> {
        check_finite_slice(&self.global_orient, &format!("{path}.orient"))?;
        check_finite_slice(&self.translation, &format!("{path}.trans"))?;
        check_finite_slice(&self.articulation, &format!("{path}.artic"))?;
        check_finite_slice(&self.shape, &format!("{path}.shape"))?;
        let norm = vec3_norm(self.global_orient);
        if norm >= 2.0 * std::f64::consts::PI {
            return Err(CoreError::invariant(
                format!("{path}.orient"),
                format!("axis-angle norm {norm:.6} >= 2*pi"),
            ));
        }
        Ok(())
    }
}

/// Bimanual hand trajectory with joints and joint velocities.
///
/// `joints[t][side][j]` is in world meters; velocities are central
/// differences of joints scaled by fps (one-sided at the ends).
#[derive(Debug, Clone, PartialEq)]
pub struct HandTrack {
    /// Per frame `[left, right]` parameter states.
    pub frames: Vec<[HandState; 2]>,
    pub joints: Vec<[[[f64; 3]; JOINT_COUNT]; 2]>,
    pub joint_velocities: Vec<[[[f64; 3]; JOINT_COUNT]; 2]>,
    pub fps: f64,
}

impl HandTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Builds a track from parameters and joints, deriving velocities by the
    /// canonical rule: central differences on interior frames, one-sided at
    /// the boundary, zero for single-frame tracks.
    pub fn with_derived_velocities(
        frames: Vec<[HandState; 2]>,
        joints: Vec<[[[f64; 3]; JOINT_COUNT]; 2]>,
        fps: f64,
    ) -> Self {
        let joint_velocities = derive_velocities(&joints, fps);
        HandTrack {
            frames,
            joints,
            joint_velocities,
            fps,
        }
    }

    pub fn validate(&self, path: &str) -> Result<(), CoreError> {
        if self.joints.len() != self.frames.len() || self.joint_velocities.len() != self.frames.len()
        {
            return Err(CoreError::LengthMismatch(format!(
                "{path}: frames={} joints={} velocities={}",
                self.frames.len(),
                self.joints.len(),
                self.joint_velocities.len()
            )));
        }
        if !self.fps.is_finite() || self.fps <= 0.0 {
            return Err(CoreError::invariant(format!("{path}.fps"), "must be finite and positive"));
        }
        for (t, pair) in self.frames.iter().enumerate() {
            pair[0].validate(&format!("{path}.left[{t}]"))?;
            pair[1].validate(&format!("{path}.right[{t}]"))?;
        }
        for (t, frame) in self.joints.iter().enumerate() {
            for (s, hand) in frame.iter().enumerate() {
                for (j, p) in hand.iter().enumerate() {
                    check_finite_slice(p, &format!("{path}.joints[{t}][{s}][{j}]"))?;
                }
            }
        }
        Ok(())
    }

    pub fn slice(&self, start: usize, len: usize) -> HandTrack {
        HandTrack {
            frames: self.frames[start..start + len].to_vec(),
            joints: self.joints[start..start + len].to_vec(),
            joint_velocities: self.joint_velocities[start..start + len].to_vec(),
            fps: self.fps,
        }
    }
}

/// Derives joint velocities from joint positions at the given fps.
pub fn derive_velocities(
    joints: &[[[[f64; 3]; JOINT_COUNT]; 2]],
    fps: f64,
) -> Vec<[[[f64; 3]; JOINT_COUNT]; 2]> {
    let n = joints.len();
    let mut out = vec![[[[0.0; 3]; JOINT_COUNT]; 2]; n];
    if n < 2 {
        return out;
    }
    for t in 0..n {
        let (prev, next, scale) = if t == 0 {
            (0, 1, fps)
        } else if t == n - 1 {
            (n - 2, n - 1, fps)
        } else {
            (t - 1, t + 1, fps / 2.0)
        };
        for s in 0..2 {
            for j in 0..JOINT_COUNT {
                for k in 0..3 {
                    out[t][s][j][k] = (joints[next][s][j][k] - joints[prev][s][j][k]) * scale;
                }
            }
        }
    }
    out
}

/// One object pose: a 9D rotation candidate plus translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPose {
    /// Row-major 3x3 rotation candidate. Consumers project it to SO(3).
    pub rot9: [f64; 9],
    /// Meters.
    pub translation: [f64; 3],
}

impl ObjectPose {
    pub fn identity() -> Self {
        ObjectPose {
            rot9: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            translation: [0.0; 3],
        }
    }

    pub fn validate(&self, path: &str) -> Result<(), CoreError> {
        check_finite_slice(&self.rot9, &format!("{path}.rot9"))?;
        check_finite_slice(&self.translation, &format!("{path}.translation"))?;
        let det = det3(&self.rot9);
        if det.abs() < 1e-12 {
            return Err(CoreError::invariant(
                format!("{path}.rot9"),
                "rotation candidate is singular",
            ));
        }
        Ok(())
    }
}

/// SE(3) trajectory of the manipulated object.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectTrack {
    pub poses: Vec<ObjectPose>,
}

impl ObjectTrack {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn validate(&self, path: &str) -> Result<(), CoreError> {
        for (t, pose) in self.poses.iter().enumerate() {
            pose.validate(&format!("{path}[{t}]"))?;
        }
        Ok(())
    }

    pub fn slice(&self, start: usize, len: usize) -> ObjectTrack {
        ObjectTrack {
            poses: self.poses[start..start + len].to_vec(),
        }
    }
}

/// Per-frame relaxed contact indicators, `[left, right]` in [0, 1].
///
/// Diffusion operates on the relaxed values; `binarized` applies the stored
/// threshold (default 0.5) on output.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactTrack {
    pub frames: Vec<[f64; 2]>,
    pub binary_threshold: f64,
}

impl ContactTrack {
    pub const DEFAULT_THRESHOLD: f64 = 0.5;

    pub fn new(frames: Vec<[f64; 2]>) -> Self {
        ContactTrack {
            frames,
            binary_threshold: Self::DEFAULT_THRESHOLD,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn binarized(&self) -> Vec<[bool; 2]> {
        self.frames
            .iter()
            .map(|c| [c[0] >= self.binary_threshold, c[1] >= self.binary_threshold])
            .collect()
    }

    pub fn validate(&self, path: &str) -> Result<(), CoreError> {
        for (t, c) in self.frames.iter().enumerate() {
            for (s, v) in c.iter().enumerate() {
                if !v.is_finite() || *v < 0.0 || *v > 1.0 {
                    return Err(CoreError::invariant(
                        format!("{path}[{t}][{s}]"),
                        format!("contact value {v} outside [0,1]"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn slice(&self, start: usize, len: usize) -> ContactTrack {
        ContactTrack {
            frames: self.frames[start..start + len].to_vec(),
            binary_threshold: self.binary_threshold,
        }
    }
}

/// Canonical mesh plus its BPS descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTemplate {
    /// Vertices in the canonical object frame, meters.
    pub vertices: Vec<[f64; 3]>,
    /// Triangle indices, 0-based.
    pub faces: Vec<[usize; 3]>,
    /// Distances from the K seeded basis points to the surface; meters.
    pub bps: Vec<f64>,
    pub bps_basis_seed: u64,
}

impl ObjectTemplate {
    pub fn validate(&self, path: &str) -> Result<(), CoreError> {
        if self.vertices.is_empty() {
            return Err(CoreError::invariant(format!("{path}.vertices"), "empty mesh"));
        }
        for (i, v) in self.vertices.iter().enumerate() {
            check_finite_slice(v, &format!("{path}.vertices[{i}]"))?;
        }
        for (i, f) in self.faces.iter().enumerate() {
            for idx in f {
                if *idx >= self.vertices.len() {
                    return Err(CoreError::invariant(
                        format!("{path}.faces[{i}]"),
                        format!("vertex index {idx} out of range"),
                    ));
                }
            }
        }
        for (k, d) in self.bps.iter().enumerate() {
            if !d.is_finite() || *d < 0.0 {
                return Err(CoreError::invariant(
                    format!("{path}.bps[{k}]"),
                    "distances must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// World-from-camera pose for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    /// Row-major world-from-camera rotation.
    pub rotation: [f64; 9],
    /// Camera position in world, meters.
    pub translation: [f64; 3],
}

/// Metric camera trajectory with intrinsics and the world gravity direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraTrack {
    pub frames: Vec<CameraFrame>,
    pub intrinsics: Intrinsics,
    pub width: u32,
    pub height: u32,
    /// Unit vector pointing along gravity (down), world frame.
    pub gravity_world: [f64; 3],
}

impl CameraTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self, path: &str) -> Result<(), CoreError> {
        let g = vec3_norm(self.gravity_world);
        if (g - 1.0).abs() > 1e-9 {
            return Err(CoreError::invariant(
                format!("{path}.gravity"),
                format!("|gravity| = {g} is not 1 within 1e-9"),
            ));
        }
        for (t, f) in self.frames.iter().enumerate() {
            check_finite_slice(&f.rotation, &format!("{path}.extrinsics[{t}]"))?;
            check_finite_slice(&f.translation, &format!("{path}.extrinsics[{t}]"))?;
            if !is_rotation(&f.rotation, 1e-6) {
                return Err(CoreError::invariant(
                    format!("{path}.extrinsics[{t}]"),
                    "not a valid SO(3) rotation",
                ));
            }
        }
        Ok(())
    }

    pub fn slice(&self, start: usize, len: usize) -> CameraTrack {
        CameraTrack {
            frames: self.frames[start..start + len].to_vec(),
            intrinsics: self.intrinsics,
            width: self.width,
            height: self.height,
            gravity_world: self.gravity_world,
        }
    }
}

/// Run-length encoded binary mask, row-major runs of set pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RleMask {
    pub width: u32,
    pub height: u32,
    /// `(start, len)` runs over the flattened row-major bitmap.
    pub runs: Vec<(u32, u32)>,
}

impl RleMask {
    pub fn from_bitmap(width: u32, height: u32, bits: &[bool]) -> Self {
        assert_eq!(bits.len(), (width * height) as usize);
        let mut runs = Vec::new();
        let mut i = 0usize;
        while i < bits.len() {
            if bits[i] {
                let start = i;
                while i < bits.len() && bits[i] {
                    i += 1;
                }
                runs.push((start as u32, (i - start) as u32));
            } else {
                i += 1;
            }
        }
        RleMask { width, height, runs }
    }

    pub fn to_bitmap(&self) -> Vec<bool> {
        let mut bits = vec![false; (self.width * self.height) as usize];
        for &(start, len) in &self.runs {
            for i in start..start + len {
                bits[i as usize] = true;
            }
        }
        bits
    }

    pub fn area(&self) -> usize {
        self.runs.iter().map(|&(_, l)| l as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Iterates set pixels as `(x, y)`.
    pub fn pixels(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.area());
        for &(start, len) in &self.runs {
            for i in start..start + len {
                out.push((i % self.width, i / self.width));
            }
        }
        out
    }
}

/// Labeled 2D evidence for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsFrame {
    pub frame_index: usize,
    pub object_mask: Option<RleMask>,
    /// `[left, right]` 21x2 pixel coordinates.
    pub hand_joints_2d: [[[f64; 2]; JOINT_COUNT]; 2],
    /// Visibility bits matching `hand_joints_2d`.
    pub visibility: [[bool; JOINT_COUNT]; 2],
    /// Relaxed `[left, right]` contact sample.
    pub contact: [f64; 2],
}

/// Sparse per-labeled-frame observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub frames: Vec<ObsFrame>,
    /// Labeling rate in frames per second (default 3).
    pub rate_fps: f64,
}

impl Default for Observations {
    fn default() -> Self {
        Observations {
            frames: vec![],
            rate_fps: Self::DEFAULT_RATE_FPS,
        }
    }
}

impl Observations {
    pub const DEFAULT_RATE_FPS: f64 = 3.0;

    pub fn validate(&self, path: &str) -> Result<(), CoreError> {
        let mut prev: Option<usize> = None;
        for (i, f) in self.frames.iter().enumerate() {
            if let Some(p) = prev {
                if f.frame_index <= p {
                    return Err(CoreError::invariant(
                        format!("{path}[{i}].frame_index"),
                        "labeled frame indices must be strictly increasing",
                    ));
                }
            }
            prev = Some(f.frame_index);
        }
        Ok(())
    }
}

/// A fixed-length slice of the sequence plus its world anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionWindow {
    /// First source frame covered by this window.
    pub start: usize,
    /// Window length T.
    pub len: usize,
    /// True when the source was shorter than T and the tail is padding.
    pub padded: bool,
    /// Number of valid (non-padding) frames; equals `len` unless padded.
    pub valid_len: usize,
    pub hands: HandTrack,
    pub object: ObjectTrack,
    pub contact: ContactTrack,
    /// Row-major rotation and translation of the world-from-local anchor.
    pub anchor_rotation: [f64; 9],
    pub anchor_translation: [f64; 3],
}

impl MotionWindow {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.hands.len() != self.len
            || self.object.len() != self.len
            || self.contact.len() != self.len
        {
            return Err(CoreError::LengthMismatch(format!(
                "window tracks must share length {}: hands={} object={} contact={}",
                self.len,
                self.hands.len(),
                self.object.len(),
                self.contact.len()
            )));
        }
        Ok(())
    }
}

/// The full sequence bundle the JSON format stores.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBundle {
    pub fps: f64,
    pub hands: HandTrack,
    pub object: ObjectTrack,
    pub contact: ContactTrack,
    pub camera: CameraTrack,
    pub observations: Observations,
}

impl SequenceBundle {
    pub fn len(&self) -> usize {
        self.hands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hands.is_empty()
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let n = self.hands.len();
        if self.object.len() != n || self.contact.len() != n || self.camera.len() != n {
            return Err(CoreError::LengthMismatch(format!(
                "hands={} object={} contact={} camera={}",
                n,
                self.object.len(),
                self.contact.len(),
                self.camera.len()
            )));
        }
        self.hands.validate("hands")?;
        self.object.validate("object")?;
        self.contact.validate("contact")?;
        self.camera.validate("camera")?;
        self.observations.validate("observations")?;
        for f in &self.observations.frames {
            if f.frame_index >= n && n > 0 {
                return Err(CoreError::invariant(
                    format!("observations[{}]", f.frame_index),
                    "labeled frame beyond sequence length",
                ));
            }
        }
        Ok(())
    }
}

fn check_finite_slice(values: &[f64], path: &str) -> Result<(), CoreError> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(CoreError::invariant(
                format!("{path}[{i}]"),
                format!("non-finite value {v}"),
            ));
        }
    }
    Ok(())
}

fn vec3_norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn det3(m: &[f64; 9]) -> f64 {
    m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6])
}

fn is_rotation(m: &[f64; 9], tol: f64) -> bool {
    // R^T R == I and det == +1.
    for r in 0..3 {
        for c in 0..3 {
            let mut dot = 0.0;
            for k in 0..3 {
                dot += m[k * 3 + r] * m[k * 3 + c];
            }
            let expect = if r == c { 1.0 } else { 0.0 };
            if (dot - expect).abs() > tol {
                return false;
            }
        }
    }
    (det3(m) - 1.0).abs() <= 10.0 * tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rle_round_trip() {
        let bits = vec![
            false, true, true, false, //
            true, true, false, true,
        ];
        let mask = RleMask::from_bitmap(4, 2, &bits);
        assert_eq!(mask.to_bitmap(), bits);
        assert_eq!(mask.area(), 5);
        assert_eq!(mask.pixels()[0], (1, 0));
    }

    #[test]
    fn velocities_follow_central_difference_rule() {
        let mut joints = vec![[[[0.0; 3]; JOINT_COUNT]; 2]; 4];
        for (t, f) in joints.iter_mut().enumerate() {
            f[0][0][0] = t as f64 * 0.1;
        }
        let v = derive_velocities(&joints, 30.0);
        // interior: (j[2]-j[0]) * fps/2
        assert!((v[1][0][0][0] - (0.2 - 0.0) * 15.0).abs() < 1e-12);
        // boundary: one-sided
        assert!((v[0][0][0][0] - 0.1 * 30.0).abs() < 1e-12);
        assert!((v[3][0][0][0] - 0.1 * 30.0).abs() < 1e-12);
    }

    #[test]
    fn contact_binarization_uses_threshold() {
        let c = ContactTrack::new(vec![[0.4, 0.6], [0.5, 0.49]]);
        assert_eq!(c.binarized(), vec![[false, true], [true, false]]);
    }

    #[test]
    fn hand_state_rejects_large_orientation() {
        let mut s = HandState::rest(Side::Left);
        s.global_orient = [7.0, 0.0, 0.0];
        assert!(s.validate("h").is_err());
    }

    #[test]
    fn nan_translation_names_field_path() {
        let mut pose = ObjectPose::identity();
        pose.translation[1] = f64::NAN;
        let err = pose.validate("object[3]").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("object[3].translation[1]"), "{msg}");
    }
}

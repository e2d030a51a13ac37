//! The sequence file format.
//!
//! UTF-8 JSON with top-level keys `fps`, `hands`, `object`, `contact`,
//! `camera`, `observations`. Per frame, `hands` holds `left`/`right` objects
//! with `orient[3]`, `trans[3]`, `artic[15]`, `shape[10]`, `joints[21][3]`;
//! `object` holds `rot9[9]` and `trans[3]`; `contact` holds `[left, right]`.
//! `camera` stores 4x4 world-from-camera extrinsics per frame, pinhole
//! intrinsics with image size, and the world gravity direction.
//! `observations` is sparse, one entry per labeled frame.
//!
//! All numbers are JSON doubles; writing uses the shortest representation
//! that round-trips, so `deserialize(serialize(s)) == s` bit-exactly. Joint
//! velocities are derived state and are reconstructed on load.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::types::*;

#[derive(Serialize, Deserialize)]
struct HandStateDoc {
    orient: [f64; 3],
    trans: [f64; 3],
    artic: [f64; ARTIC_DIMS],
    shape: [f64; SHAPE_DIMS],
    joints: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct HandFrameDoc {
    left: HandStateDoc,
    right: HandStateDoc,
}

#[derive(Serialize, Deserialize)]
struct ObjectFrameDoc {
    rot9: [f64; 9],
    trans: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct IntrinsicsDoc {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct CameraDoc {
    extrinsics: Vec<[[f64; 4]; 4]>,
    intrinsics: IntrinsicsDoc,
    gravity: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct ObsFrameDoc {
    frame_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    object_mask: Option<RleMask>,
    hand_joints_2d: [Vec<[f64; 2]>; 2],
    visibility: [Vec<bool>; 2],
    contact: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct SequenceDoc {
    fps: f64,
    hands: Vec<HandFrameDoc>,
    object: Vec<ObjectFrameDoc>,
    contact: Vec<[f64; 2]>,
    camera: CameraDoc,
    observations: Vec<ObsFrameDoc>,
}

/// Serializes a validated sequence to the documented JSON format.
pub fn serialize_sequence(seq: &SequenceBundle) -> Result<Vec<u8>, CoreError> {
    seq.validate()?;
    let doc = to_doc(seq);
    let mut out = serde_json::to_vec_pretty(&doc)?;
    out.push(b'\n');
    Ok(out)
}

/// Parses and validates a sequence document, rebuilding derived state.
pub fn deserialize_sequence(bytes: &[u8]) -> Result<SequenceBundle, CoreError> {
    let doc: SequenceDoc =
        serde_json::from_slice(bytes).map_err(|e| CoreError::Format(e.to_string()))?;
    let seq = from_doc(doc)?;
    seq.validate()?;
    Ok(seq)
}

fn to_doc(seq: &SequenceBundle) -> SequenceDoc {
    let hands = seq
        .hands
        .frames
        .iter()
        .zip(&seq.hands.joints)
        .map(|(pair, joints)| HandFrameDoc {
            left: hand_state_doc(&pair[0], &joints[0]),
            right: hand_state_doc(&pair[1], &joints[1]),
        })
        .collect();
    let object = seq
        .object
        .poses
        .iter()
        .map(|p| ObjectFrameDoc {
            rot9: p.rot9,
            trans: p.translation,
        })
        .collect();
    let extrinsics = seq
        .camera
        .frames
        .iter()
        .map(|f| {
            let r = &f.rotation;
            let t = &f.translation;
            [
                [r[0], r[1], r[2], t[0]],
                [r[3], r[4], r[5], t[1]],
                [r[6], r[7], r[8], t[2]],
                [0.0, 0.0, 0.0, 1.0],
            ]
        })
        .collect();
    let observations = seq
        .observations
        .frames
        .iter()
        .map(|f| ObsFrameDoc {
            frame_index: f.frame_index,
            object_mask: f.object_mask.clone(),
            hand_joints_2d: [f.hand_joints_2d[0].to_vec(), f.hand_joints_2d[1].to_vec()],
            visibility: [f.visibility[0].to_vec(), f.visibility[1].to_vec()],
            contact: f.contact,
        })
        .collect();
    SequenceDoc {
        fps: seq.fps,
        hands,
        object,
        contact: seq.contact.frames.clone(),
        camera: CameraDoc {
            extrinsics,
            intrinsics: IntrinsicsDoc {
                fx: seq.camera.intrinsics.fx,
                fy: seq.camera.intrinsics.fy,
                cx: seq.camera.intrinsics.cx,
                cy: seq.camera.intrinsics.cy,
                width: seq.camera.width,
                height: seq.camera.height,
            },
            gravity: seq.camera.gravity_world,
        },
        observations,
    }
}

fn hand_state_doc(state: &HandState, joints: &[[f64; 3]; JOINT_COUNT]) -> HandStateDoc {
    HandStateDoc {
        orient: state.global_orient,
        trans: state.translation,
        artic: state.articulation,
        shape: state.shape,
        joints: joints.to_vec(),
    }
}

fn from_doc(doc: SequenceDoc) -> Result<SequenceBundle, CoreError> {
    let mut frames = Vec::with_capacity(doc.hands.len());
    let mut joints = Vec::with_capacity(doc.hands.len());
    for (t, hf) in doc.hands.iter().enumerate() {
        let (ls, lj) = hand_state_from_doc(&hf.left, Side::Left, t)?;
        let (rs, rj) = hand_state_from_doc(&hf.right, Side::Right, t)?;
        frames.push([ls, rs]);
        joints.push([lj, rj]);
    }
    let hands = HandTrack::with_derived_velocities(frames, joints, doc.fps);

    let object = ObjectTrack {
        poses: doc
            .object
            .into_iter()
            .map(|p| ObjectPose {
                rot9: p.rot9,
                translation: p.trans,
            })
            .collect(),
    };

    let camera_frames = doc
        .camera
        .extrinsics
        .iter()
        .enumerate()
        .map(|(t, m)| {
            if m[3] != [0.0, 0.0, 0.0, 1.0] {
                return Err(CoreError::Format(format!(
                    "camera.extrinsics[{t}]: last row must be [0,0,0,1]"
                )));
            }
            Ok(CameraFrame {
                rotation: [
                    m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1],
                    m[2][2],
                ],
                translation: [m[0][3], m[1][3], m[2][3]],
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut observations = Vec::with_capacity(doc.observations.len());
    for of in doc.observations {
        observations.push(ObsFrame {
            frame_index: of.frame_index,
            object_mask: of.object_mask,
            hand_joints_2d: [
                fixed_joints_2d(&of.hand_joints_2d[0], of.frame_index)?,
                fixed_joints_2d(&of.hand_joints_2d[1], of.frame_index)?,
            ],
            visibility: [
                fixed_visibility(&of.visibility[0], of.frame_index)?,
                fixed_visibility(&of.visibility[1], of.frame_index)?,
            ],
            contact: of.contact,
        });
    }

    Ok(SequenceBundle {
        fps: doc.fps,
        hands,
        object,
        contact: ContactTrack::new(doc.contact),
        camera: CameraTrack {
            frames: camera_frames,
            intrinsics: Intrinsics {
                fx: doc.camera.intrinsics.fx,
                fy: doc.camera.intrinsics.fy,
                cx: doc.camera.intrinsics.cx,
                cy: doc.camera.intrinsics.cy,
            },
            width: doc.camera.intrinsics.width,
            height: doc.camera.intrinsics.height,
            gravity_world: doc.camera.gravity,
        },
        observations: Observations {
            frames: observations,
            rate_fps: Observations::DEFAULT_RATE_FPS,
        },
    })
}

fn hand_state_from_doc(
    doc: &HandStateDoc,
    side: Side,
    t: usize,
) -> Result<(HandState, [[f64; 3]; JOINT_COUNT]), CoreError> {
    if doc.joints.len() != JOINT_COUNT {
        return Err(CoreError::Format(format!(
            "hands[{t}]: expected {JOINT_COUNT} joints, got {}",
            doc.joints.len()
        )));
    }
    let mut joints = [[0.0; 3]; JOINT_COUNT];
    joints.copy_from_slice(&doc.joints);
    Ok((
        HandState {
            side,
            global_orient: doc.orient,
            translation: doc.trans,
            articulation: doc.artic,
            shape: doc.shape,
        },
        joints,
    ))
}

fn fixed_joints_2d(v: &[[f64; 2]], t: usize) -> Result<[[f64; 2]; JOINT_COUNT], CoreError> {
    if v.len() != JOINT_COUNT {
        return Err(CoreError::Format(format!(
            "observations[{t}]: expected {JOINT_COUNT} 2d joints, got {}",
            v.len()
        )));
    }
    let mut out = [[0.0; 2]; JOINT_COUNT];
    out.copy_from_slice(v);
    Ok(out)
}

fn fixed_visibility(v: &[bool], t: usize) -> Result<[bool; JOINT_COUNT], CoreError> {
    if v.len() != JOINT_COUNT {
        return Err(CoreError::Format(format!(
            "observations[{t}]: expected {JOINT_COUNT} visibility bits, got {}",
            v.len()
        )));
    }
    let mut out = [false; JOINT_COUNT];
    out.copy_from_slice(v);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_sequence() -> SequenceBundle {
        SequenceBundle {
            fps: 30.0,
            hands: HandTrack::with_derived_velocities(vec![], vec![], 30.0),
            object: ObjectTrack::default(),
            contact: ContactTrack::new(vec![]),
            camera: CameraTrack {
                frames: vec![],
                intrinsics: Intrinsics {
                    fx: 200.0,
                    fy: 200.0,
                    cx: 120.0,
                    cy: 90.0,
                },
                width: 240,
                height: 180,
                gravity_world: [0.0, 0.0, -1.0],
            },
            observations: Observations {
                frames: vec![],
                rate_fps: 3.0,
            },
        }
    }

    #[test]
    fn empty_sequence_is_a_valid_document() {
        let seq = empty_sequence();
        let bytes = serialize_sequence(&seq).unwrap();
        let text = std::str::from_utf8(&bytes).unwrap();
        assert!(text.contains("\"hands\": []"));
        let back = deserialize_sequence(&bytes).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn nan_translation_is_rejected_with_field_path() {
        let mut seq = empty_sequence();
        seq.hands = HandTrack::with_derived_velocities(
            vec![[HandState::rest(Side::Left), HandState::rest(Side::Right)]],
            vec![[[[0.0; 3]; JOINT_COUNT]; 2]],
            30.0,
        );
        let mut pose = ObjectPose::identity();
        pose.translation[2] = f64::NAN;
        seq.object.poses.push(pose);
        seq.contact.frames.push([0.0, 0.0]);
        seq.camera.frames.push(CameraFrame {
            rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            translation: [0.0; 3],
        });
        let err = serialize_sequence(&seq).unwrap_err();
        assert!(err.to_string().contains("object[0].translation[2]"), "{err}");
    }
}

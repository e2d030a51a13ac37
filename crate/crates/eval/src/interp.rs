//! Pose interpolation across invisible spans.

use worldgrip_core::{ObjectPose, ObjectTrack};
use worldgrip_geometry::se3::{mat3_from_rot9, rot9_from_mat3, slerp};

/// Fills invisible poses: linear translation and spherical-linear rotation
/// between the nearest visible anchors; spans before the first or after the
/// last visible frame hold that endpoint constant. A track with no visible
/// frame comes back unchanged.
pub fn interpolate_poses(track: &ObjectTrack, visible: &[bool]) -> ObjectTrack {
    let n = track.len();
    assert_eq!(visible.len(), n);
    let visible_idx: Vec<usize> = (0..n).filter(|&i| visible[i]).collect();
    if visible_idx.is_empty() {
        return track.clone();
    }
    let mut poses = track.poses.clone();
    for t in 0..n {
        if visible[t] {
            continue;
        }
        let prev = visible_idx.iter().rev().find(|&&i| i < t).copied();
        let next = visible_idx.iter().find(|&&i| i > t).copied();
        poses[t] = match (prev, next) {
            (Some(a), Some(b)) => {
                let s = (t - a) as f64 / (b - a) as f64;
                let ra = mat3_from_rot9(&track.poses[a].rot9);
                let rb = mat3_from_rot9(&track.poses[b].rot9);
                let rot = slerp(&ra, &rb, s);
                let mut translation = [0.0; 3];
                for k in 0..3 {
                    translation[k] = track.poses[a].translation[k] * (1.0 - s)
                        + track.poses[b].translation[k] * s;
                }
                ObjectPose {
                    rot9: rot9_from_mat3(&rot),
                    translation,
                }
            }
            (Some(a), None) => track.poses[a].clone(),
            (None, Some(b)) => track.poses[b].clone(),
            (None, None) => unreachable!("visible_idx nonempty"),
        };
    }
    ObjectTrack { poses }
}

//! Per-frame evaluation subsets: contact, truncated, out-of-view.

use nalgebra::Vector3;

use worldgrip_core::{CameraTrack, ContactTrack, ObjectTrack};
use worldgrip_geometry::camera::{in_image, project_point};
use worldgrip_geometry::SE3;

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetMasks {
    pub contact: Vec<bool>,
    pub truncated: Vec<bool>,
    pub out_of_view: Vec<bool>,
}

impl SubsetMasks {
    pub fn select<'a, T>(&self, values: &'a [T], which: &[bool]) -> Vec<&'a T> {
        values
            .iter()
            .zip(which)
            .filter(|(_, keep)| **keep)
            .map(|(value, _)| value)
            .collect()
    }
}

/// Computes the frame masks from ground truth: contact frames come from the
/// (oracle) contact track; out-of-view frames project zero template surface
/// samples inside the image; truncated frames project some but not all.
pub fn split_subsets(
    gt_contact: &ContactTrack,
    gt_object: &ObjectTrack,
    camera: &CameraTrack,
    surface_samples: &[Vector3<f64>],
) -> SubsetMasks {
    let n = gt_object.len().min(camera.len());
    let mut contact = Vec::with_capacity(n);
    let mut truncated = Vec::with_capacity(n);
    let mut out_of_view = Vec::with_capacity(n);
    for t in 0..n {
        let c = gt_contact
            .frames
            .get(t)
            .map(|c| c[0] >= gt_contact.binary_threshold || c[1] >= gt_contact.binary_threshold)
            .unwrap_or(false);
        contact.push(c);

        let pose = SE3::from_rot9_trans(&gt_object.poses[t].rot9, &gt_object.poses[t].translation);
        let cam = SE3::from_rot9_trans(
            &camera.frames[t].rotation,
            &camera.frames[t].translation,
        );
        let mut inside = 0usize;
        for s in surface_samples {
            let proj = project_point(&pose.apply(s), &cam, &camera.intrinsics);
            if proj.valid && in_image(&proj.uv, camera.width, camera.height) {
                inside += 1;
            }
        }
        out_of_view.push(inside == 0);
        truncated.push(inside > 0 && inside < surface_samples.len());
    }
    SubsetMasks {
        contact,
        truncated,
        out_of_view,
    }
}

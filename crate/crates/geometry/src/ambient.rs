//! The ambient sensor: per-joint displacement to the posed object surface.

use nalgebra::Vector3;

use crate::mesh::MeshQuery;
use crate::se3::SE3;

/// For each joint, the vector from the joint to its nearest point on the
/// object surface posed by `object_pose`. The norm of row j equals the
/// point-to-mesh distance, so this is a BPS of the posed object with the
/// joints as basis.
pub fn ambient_sensor(
    joints: &[Vector3<f64>],
    template: &MeshQuery,
    object_pose: &SE3,
) -> Vec<Vector3<f64>> {
    // Querying in the canonical frame avoids re-posing the mesh: transform
    // each joint by the inverse pose, find the nearest point, map it back.
    let inv = object_pose.inverse();
    joints
        .iter()
        .map(|j| {
            let local = inv.apply(j);
            let nearest_local = template.closest_point(&local);
            object_pose.apply(&nearest_local) - j
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::box_mesh;
    use crate::se3::rotation_from_axis_angle;
    use approx::assert_abs_diff_eq;

    #[test]
    fn joint_on_vertex_gives_zero_vector() {
        let cube = MeshQuery::new(box_mesh(1.0, 1.0, 1.0));
        let out = ambient_sensor(&[Vector3::new(0.5, 0.5, 0.5)], &cube, &SE3::identity());
        assert_abs_diff_eq!(out[0].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn joint_above_cube_top_face() {
        let cube = MeshQuery::new(box_mesh(1.0, 1.0, 1.0));
        let out = ambient_sensor(&[Vector3::new(0.0, 0.0, 1.0)], &cube, &SE3::identity());
        assert_abs_diff_eq!(out[0], Vector3::new(0.0, 0.0, -0.5), epsilon = 1e-12);
        // Dense-sample brute force confirms the magnitude.
        let samples = box_mesh(1.0, 1.0, 1.0).surface_samples(20_000, 11);
        let p = Vector3::new(0.0, 0.0, 1.0);
        let brute = samples
            .iter()
            .map(|s| (s - p).norm())
            .fold(f64::INFINITY, f64::min);
        assert!((brute - 0.5).abs() < 5e-3);
    }

    #[test]
    fn norms_match_distance_under_pose() {
        let cube = MeshQuery::new(box_mesh(0.1, 0.2, 0.15));
        let pose = SE3::new(
            rotation_from_axis_angle(&[0.4, -0.2, 0.9]),
            Vector3::new(0.3, -0.1, 0.5),
        );
        let joints = vec![
            Vector3::new(0.35, 0.0, 0.45),
            Vector3::new(0.1, -0.3, 0.6),
            Vector3::new(0.3, -0.1, 0.5),
        ];
        let out = ambient_sensor(&joints, &cube, &pose);
        for (j, d) in joints.iter().zip(&out) {
            let local = pose.inverse().apply(j);
            assert_abs_diff_eq!(d.norm(), cube.distance(&local), epsilon = 1e-12);
        }
    }
}

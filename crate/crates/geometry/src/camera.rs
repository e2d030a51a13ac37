//! Pinhole projection.

use nalgebra::Vector3;

use crate::se3::SE3;
use worldgrip_core::Intrinsics;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected {
    /// Pixel coordinates; meaningful only when `valid`.
    pub uv: [f64; 2],
    /// Depth along the optical axis, meters.
    pub depth: f64,
    /// False for points at or behind the camera plane.
    pub valid: bool,
}

const MIN_DEPTH: f64 = 1e-9;

/// Projects one world point through a world-from-camera pose.
pub fn project_point(
    point_world: &Vector3<f64>,
    world_from_camera: &SE3,
    intrinsics: &Intrinsics,
) -> Projected {
    let cam = world_from_camera.inverse().apply(point_world);
    if cam.z <= MIN_DEPTH {
        return Projected {
            uv: [0.0, 0.0],
            depth: cam.z,
            valid: false,
        };
    }
    Projected {
        uv: [
            intrinsics.fx * cam.x / cam.z + intrinsics.cx,
            intrinsics.fy * cam.y / cam.z + intrinsics.cy,
        ],
        depth: cam.z,
        valid: true,
    }
}

pub fn project_points(
    points_world: &[Vector3<f64>],
    world_from_camera: &SE3,
    intrinsics: &Intrinsics,
) -> Vec<Projected> {
    points_world
        .iter()
        .map(|p| project_point(p, world_from_camera, intrinsics))
        .collect()
}

/// 2x3 Jacobian of pixel coordinates with respect to the camera-frame point.
pub fn pixel_jacobian(cam: &Vector3<f64>, intrinsics: &Intrinsics) -> [[f64; 3]; 2] {
    let iz = 1.0 / cam.z;
    [
        [intrinsics.fx * iz, 0.0, -intrinsics.fx * cam.x * iz * iz],
        [0.0, intrinsics.fy * iz, -intrinsics.fy * cam.y * iz * iz],
    ]
}

pub fn in_image(uv: &[f64; 2], width: u32, height: u32) -> bool {
    uv[0] >= 0.0 && uv[0] < width as f64 && uv[1] >= 0.0 && uv[1] < height as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn intrinsics() -> Intrinsics {
        Intrinsics {
            fx: 200.0,
            fy: 210.0,
            cx: 120.0,
            cy: 90.0,
        }
    }

    #[test]
    fn optical_axis_point_hits_principal_point() {
        let p = project_point(&Vector3::new(0.0, 0.0, 1.0), &SE3::identity(), &intrinsics());
        assert!(p.valid);
        assert_abs_diff_eq!(p.uv[0], 120.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.uv[1], 90.0, epsilon = 1e-12);
    }

    #[test]
    fn behind_camera_is_invalid() {
        let p = project_point(&Vector3::new(0.0, 0.0, -1.0), &SE3::identity(), &intrinsics());
        assert!(!p.valid);
    }

    #[test]
    fn pixel_jacobian_matches_finite_differences() {
        let cam = Vector3::new(0.2, -0.1, 0.8);
        let k = intrinsics();
        let jac = pixel_jacobian(&cam, &k);
        let h = 1e-7;
        for axis in 0..3 {
            let mut plus = cam;
            let mut minus = cam;
            plus[axis] += h;
            minus[axis] -= h;
            let project = |c: Vector3<f64>| {
                [
                    k.fx * c.x / c.z + k.cx,
                    k.fy * c.y / c.z + k.cy,
                ]
            };
            let (up, um) = (project(plus), project(minus));
            for row in 0..2 {
                let fd = (up[row] - um[row]) / (2.0 * h);
                assert_abs_diff_eq!(jac[row][axis], fd, epsilon = 1e-4);
            }
        }
    }
}

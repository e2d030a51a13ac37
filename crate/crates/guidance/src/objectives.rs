//! Task objectives evaluated on the predicted clean sample, with analytic
//! gradients in raw state space.

use nalgebra::{Matrix3, Vector3};

use worldgrip_core::{Side, JOINT_COUNT};
use worldgrip_geometry::camera::pixel_jacobian;
use worldgrip_geometry::mesh::MeshQuery;
use worldgrip_prior::decoded::{DecodedWindow, StateGrad};
use worldgrip_prior::losses::{loss_interaction, loss_smooth, snapshot_interaction};

use crate::binding::{ObservationBinding, PixelGrid};

/// Reprojection objective: per labeled frame, the one-way chamfer distance
/// from observed mask pixels to the projected template surface points, the
/// visible 2D hand-joint error against projected forward-kinematics joints,
/// and the squared error between the relaxed contact values and the labels.
/// Summed over labeled frames.
pub fn g_reproj(
    window: &DecodedWindow,
    binding: &ObservationBinding,
    surface_points: &[Vector3<f64>],
) -> (f64, StateGrad) {
    let mut grad = StateGrad::zeros(window.frames(), window.layout);
    let mut total = 0.0;
    let intr = &binding.intrinsics;

    for frame in &binding.frames {
        let t = frame.local_index;
        if t >= window.frames() {
            continue;
        }
        let cam_from_world = frame.camera.inverse();
        let object_pose = window.object_pose(t);

        // (a) one-way mask chamfer: mask pixel -> nearest projected surface
        // point. Out-of-image projections still participate; invisible
        // (behind-camera) points do not.
        if !frame.mask_pixels.is_empty() {
            let mut projected: Vec<[f64; 2]> = Vec::with_capacity(surface_points.len());
            let mut cam_points: Vec<Vector3<f64>> = Vec::with_capacity(surface_points.len());
            let mut source_index: Vec<usize> = Vec::with_capacity(surface_points.len());
            for (i, s) in surface_points.iter().enumerate() {
                let world = object_pose.apply(s);
                let cam = cam_from_world.apply(&world);
                if cam.z <= 1e-9 {
                    continue;
                }
                projected.push([
                    intr.fx * cam.x / cam.z + intr.cx,
                    intr.fy * cam.y / cam.z + intr.cy,
                ]);
                cam_points.push(cam);
                source_index.push(i);
            }
            if let Some(grid) = PixelGrid::build(projected.clone(), 8.0) {
                let inv_count = 1.0 / frame.mask_pixels.len() as f64;
                let mut mean = 0.0;
                for q in &frame.mask_pixels {
                    let (win, d2) = grid.nearest(q);
                    let d = d2.sqrt();
                    mean += d * inv_count;
                    if d > 1e-9 {
                        let p = projected[win];
                        let dir = [(p[0] - q[0]) / d, (p[1] - q[1]) / d];
                        let jac = pixel_jacobian(&cam_points[win], intr);
                        // dL/d cam point
                        let mut g_cam = Vector3::zeros();
                        for k in 0..3 {
                            g_cam[k] = (dir[0] * jac[0][k] + dir[1] * jac[1][k]) * inv_count;
                        }
                        // cam = R_cw (R_obj s + tau) + t_cw
                        let g_world = cam_from_world.rotation.transpose() * g_cam;
                        grad.add_translation(t, &g_world);
                        let s_local = surface_points[source_index[win]];
                        let g_rot = g_world * s_local.transpose();
                        grad.add_rotation(window, t, &g_rot);
                    }
                }
                total += mean;
            }
        }

        // (b) visible 2D hand-joint error, meaned over the participating
        // joints (two passes: count first, then accumulate scaled grads).
        let participating = |s: usize, j: usize| -> Option<Vector3<f64>> {
            if !frame.visibility[s][j] {
                return None;
            }
            let p = window.joints[t][s][j];
            let cam = cam_from_world.apply(&Vector3::new(p[0], p[1], p[2]));
            (cam.z > 1e-9).then_some(cam)
        };
        let mut joint_count = 0usize;
        for s in 0..2 {
            for j in 0..JOINT_COUNT {
                if participating(s, j).is_some() {
                    joint_count += 1;
                }
            }
        }
        if joint_count > 0 {
            let inv = 1.0 / joint_count as f64;
            let mut joint_mean = 0.0;
            for side in Side::both() {
                let s = side.index();
                for j in 0..JOINT_COUNT {
                    let Some(cam) = participating(s, j) else {
                        continue;
                    };
                    let u = intr.fx * cam.x / cam.z + intr.cx;
                    let v = intr.fy * cam.y / cam.z + intr.cy;
                    let du = u - frame.joints_2d[s][j][0];
                    let dv = v - frame.joints_2d[s][j][1];
                    let d = (du * du + dv * dv).sqrt();
                    joint_mean += d * inv;
                    if d > 1e-9 {
                        let dir = [du / d, dv / d];
                        let jac = pixel_jacobian(&cam, intr);
                        let mut g_cam = Vector3::zeros();
                        for k in 0..3 {
                            g_cam[k] = (dir[0] * jac[0][k] + dir[1] * jac[1][k]) * inv;
                        }
                        let g_world = cam_from_world.rotation.transpose() * g_cam;
                        grad.add_joint(window, t, side, j, &g_world);
                    }
                }
            }
            total += joint_mean;
        }

        // (c) squared contact error.
        for s in 0..2 {
            let c = window.contact[t][s];
            let diff = c - frame.contact[s];
            total += diff * diff;
            grad.add_contact(t, s, 2.0 * diff);
        }
    }

    (total, grad)
}

/// Interaction objective: the training interaction terms on the decoded
/// sample plus a stillness term penalizing object motion when contact is
/// absent on consecutive frames.
pub fn g_inter(window: &DecodedWindow, template: &MeshQuery) -> (f64, StateGrad) {
    let snapshot = snapshot_interaction(window, template);
    let contact: Vec<[f64; 2]> = window
        .contact
        .iter()
        .map(|c| [c[0].clamp(0.0, 1.0), c[1].clamp(0.0, 1.0)])
        .collect();
    let (inter, mut grad) = loss_interaction(window, &snapshot, &contact);
    let (still, _) = stillness(window, &contact, &mut grad);
    (inter + still, grad)
}

/// The stillness term alone: squared per-frame object pose change
/// (translation plus geodesic rotation) weighted by
/// `(1 - c_t)(1 - c_{t+1})` with `c = max(left, right)`.
pub fn stillness(
    window: &DecodedWindow,
    contact: &[[f64; 2]],
    grad: &mut StateGrad,
) -> (f64, usize) {
    let t = window.frames();
    if t < 2 {
        return (0.0, 0);
    }
    let pairs = (t - 1) as f64;
    let mut total = 0.0;
    for f in 0..t - 1 {
        let (c0, side0) = max_contact(&contact[f]);
        let (c1, side1) = max_contact(&contact[f + 1]);
        let w = (1.0 - c0) * (1.0 - c1);
        //

        // Raw pose change (computed even at zero weight for the contact
        // gradient below).
        let dt = window.trans[f + 1] - window.trans[f];
        let rel = window.rot[f].transpose() * window.rot[f + 1];
        let cos_theta = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        let theta = cos_theta.acos();
        let raw = dt.norm_squared() + theta * theta;
        total += w * raw / pairs;

        if w > 0.0 {
            let g_dt = dt * (2.0 * w / pairs);
            grad.add_translation(f + 1, &g_dt);
            grad.add_translation(f, &(-g_dt));
            // d theta^2 / dA = -(theta / sin theta) I on the relative
            // rotation A = R_f^T R_{f+1}; smooth through zero.
            let sin_theta = theta.sin();
            let factor = if theta < 1e-6 {
                1.0 + theta * theta / 6.0
            } else {
                theta / sin_theta
            };
            let g_a = Matrix3::identity() * (-factor * w / pairs);
            // dA = dR_f^T R_{f+1} + R_f^T dR_{f+1}
            let g_rf = window.rot[f + 1] * g_a.transpose();
            let g_rf1 = window.rot[f] * g_a;
            grad.add_rotation(window, f, &g_rf);
            grad.add_rotation(window, f + 1, &g_rf1);
        }
        // Weight gradient into the dominant contact slots.
        grad.add_contact(f, side0, -(1.0 - c1) * raw / pairs);
        grad.add_contact(f + 1, side1, -(1.0 - c0) * raw / pairs);
    }
    (total, t - 1)
}

fn max_contact(c: &[f64; 2]) -> (f64, usize) {
    let l = c[0].clamp(0.0, 1.0);
    let r = c[1].clamp(0.0, 1.0);
    if l >= r {
        (l, 0)
    } else {
        (r, 1)
    }
}

/// Temporal objective: exactly the training smoothness loss.
pub fn g_temp(window: &DecodedWindow) -> (f64, StateGrad) {
    loss_smooth(window)
}

/// Planner objective: L2 between the relaxed contact track and a target
/// schedule.
pub fn g_contact_schedule(window: &DecodedWindow, target: &[[f64; 2]]) -> (f64, StateGrad) {
    let t = window.frames();
    let mut grad = StateGrad::zeros(t, window.layout);
    let count = (t * 2) as f64;
    let mut total = 0.0;
    for f in 0..t.min(target.len()) {
        for s in 0..2 {
            let diff = window.contact[f][s] - target[f][s];
            total += diff * diff / count;
            grad.add_contact(f, s, 2.0 * diff / count);
        }
    }
    (total, grad)
}

//! Training losses and their analytic gradients.
//!
//! Interaction terms evaluate against a correspondence snapshot: nearest
//! surface points are found once for the current state and then held fixed,
//! so values and gradients are plain functions of the state (the standard
//! fixed-correspondence treatment of chamfer-style objectives). The smooth
//! and consistency losses are exact everywhere.

use nalgebra::{Matrix3, Vector3};
use ndarray::Array2;

use worldgrip_core::{Side, JOINT_COUNT};
use worldgrip_geometry::mesh::MeshQuery;
use worldgrip_geometry::se3::skew;

use crate::decoded::{DecodedWindow, StateGrad};

/// w_n * mean squared error between prediction and target.
pub fn loss_ddpm(pred: &Array2<f32>, target: &Array2<f32>, weight: f64) -> (f64, Array2<f32>) {
    assert_eq!(pred.dim(), target.dim());
    let n = pred.len() as f64;
    let mut loss = 0.0f64;
    for (p, t) in pred.iter().zip(target.iter()) {
        let d = (*p - *t) as f64;
        loss += d * d;
    }
    loss = weight * loss / n;
    let scale = (2.0 * weight / n) as f32;
    let grad = (pred - target) * scale;
    (loss, grad)
}

/// Inverse transpose of the right Jacobian of SO(3) at rotation vector
/// `omega`, for chaining gradients through the log map.
fn right_jacobian_inv(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let wx = skew(omega);
    let c = if theta2 < 1e-8 {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        let theta = theta2.sqrt();
        1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() + wx * 0.5 + wx * wx * c
}

/// Rotation vector of A (angle in [0, pi)) via the geometry log map.
fn log_so3(a: &Matrix3<f64>) -> Vector3<f64> {
    let v = worldgrip_geometry::se3::axis_angle_from_rotation(a);
    Vector3::new(v[0], v[1], v[2])
}

/// Places `u` so that `<placement, S> = u . vee(S)` for skew S.
fn vee_adjoint(u: &Vector3<f64>) -> Matrix3<f64> {
    let mut w = Matrix3::zeros();
    w[(2, 1)] = u[0];
    w[(0, 2)] = u[1];
    w[(1, 0)] = u[2];
    w
}

/// Gradient contributions of `L(omega)` with `omega = log(Ra^T Rb)`:
/// given dL/d omega, accumulates dL/dRa and dL/dRb.
fn chain_log_grad(
    ra: &Matrix3<f64>,
    rb: &Matrix3<f64>,
    g_omega: &Vector3<f64>,
    g_ra: &mut Matrix3<f64>,
    g_rb: &mut Matrix3<f64>,
) {
    let a = ra.transpose() * rb;
    let omega = log_so3(&a);
    let u = right_jacobian_inv(&omega).transpose() * g_omega;
    let g_a = a * vee_adjoint(&u);
    *g_ra += rb * g_a.transpose();
    *g_rb += ra * g_a;
}

/// Mean squared second differences of joints, object translation, and the
/// geodesic rotation increments.
///
/// Works in frame units: velocities and accelerations are per-frame
/// differences, so the value is fps-independent by construction; callers
/// rescale when physical units are needed.
pub fn loss_smooth(window: &DecodedWindow) -> (f64, StateGrad) {
    let t = window.frames();
    let mut grad = StateGrad::zeros(t, window.layout);
    if t < 3 {
        return (0.0, grad);
    }
    let pairs = (t - 2) as f64;

    // Joints.
    let joint_count = pairs * 2.0 * JOINT_COUNT as f64 * 3.0;
    let mut joint_loss = 0.0;
    for f in 0..t - 2 {
        for side in Side::both() {
            let s = side.index();
            for j in 0..JOINT_COUNT {
                for k in 0..3 {
                    let a = window.joints[f + 2][s][j][k] - 2.0 * window.joints[f + 1][s][j][k]
                        + window.joints[f][s][j][k];
                    joint_loss += a * a;
                    let g = 2.0 * a / joint_count;
                    let mut gv = Vector3::zeros();
                    gv[k] = g;
                    grad.add_joint(window, f + 2, side, j, &gv);
                    grad.add_joint(window, f + 1, side, j, &(-2.0 * gv));
                    grad.add_joint(window, f, side, j, &gv);
                }
            }
        }
    }
    joint_loss /= joint_count;

    // Object translation.
    let trans_count = pairs * 3.0;
    let mut trans_loss = 0.0;
    for f in 0..t - 2 {
        let a = window.trans[f + 2] - 2.0 * window.trans[f + 1] + window.trans[f];
        trans_loss += a.norm_squared();
        let g = a * (2.0 / trans_count);
        grad.add_translation(f + 2, &g);
        grad.add_translation(f + 1, &(-2.0 * g));
        grad.add_translation(f, &g);
    }
    trans_loss /= trans_count;

    // Rotation: second difference of per-frame log increments.
    let rot_count = pairs * 3.0;
    let mut rot_loss = 0.0;
    let omegas: Vec<Vector3<f64>> = (0..t - 1)
        .map(|f| log_so3(&(window.rot[f].transpose() * window.rot[f + 1])))
        .collect();
    let mut g_rot = vec![Matrix3::<f64>::zeros(); t];
    for f in 0..t - 2 {
        let a = omegas[f + 1] - omegas[f];
        rot_loss += a.norm_squared();
        let g_a = a * (2.0 / rot_count);
        // omega_{f+1} enters +, omega_f enters -.
        let mut g1 = Matrix3::zeros();
        let mut g2 = Matrix3::zeros();
        chain_log_grad(&window.rot[f + 1], &window.rot[f + 2], &g_a, &mut g1, &mut g2);
        g_rot[f + 1] += g1;
        g_rot[f + 2] += g2;
        let mut g3 = Matrix3::zeros();
        let mut g4 = Matrix3::zeros();
        chain_log_grad(&window.rot[f], &window.rot[f + 1], &(-g_a), &mut g3, &mut g4);
        g_rot[f] += g3;
        g_rot[f + 1] += g4;
    }
    rot_loss /= rot_count;
    for (f, g) in g_rot.iter().enumerate() {
        if g.norm_squared() > 0.0 {
            grad.add_rotation(window, f, g);
        }
    }

    (joint_loss + trans_loss + rot_loss, grad)
}

/// Mean per-joint discrepancy between the auxiliary joint head and forward
/// kinematics of the predicted parameters. `joint_head` rows are frames,
/// columns `[left 63 | right 63]`, meters.
pub fn loss_consistency(
    window: &DecodedWindow,
    joint_head: &Array2<f64>,
) -> (f64, StateGrad, Array2<f64>) {
    let t = window.frames();
    let mut grad = StateGrad::zeros(t, window.layout);
    let mut grad_head = Array2::<f64>::zeros(joint_head.raw_dim());
    let count = (t * 2 * JOINT_COUNT) as f64;
    let mut loss = 0.0;
    const EPS: f64 = 1e-12;
    for f in 0..t {
        for side in Side::both() {
            let s = side.index();
            for j in 0..JOINT_COUNT {
                let base = s * JOINT_COUNT * 3 + j * 3;
                let fk = window.joints[f][s][j];
                let u = Vector3::new(
                    joint_head[(f, base)] - fk[0],
                    joint_head[(f, base + 1)] - fk[1],
                    joint_head[(f, base + 2)] - fk[2],
                );
                let norm = u.norm();
                loss += norm / count;
                if norm > EPS {
                    let g = u / (norm * count);
                    for k in 0..3 {
                        grad_head[(f, base + k)] += g[k];
                    }
                    grad.add_joint(window, f, side, j, &(-g));
                }
            }
        }
    }
    (loss, grad, grad_head)
}

/// Fixed nearest-point correspondences for the interaction terms.
pub struct InteractionSnapshot {
    /// Per frame per hand: joint index with the smallest surface distance
    /// and that joint's nearest point in object-local coordinates.
    pub closest: Vec<[(usize, Vector3<f64>); 2]>,
    /// Per frame per hand per joint: nearest surface point in world
    /// coordinates (under the snapshot pose).
    pub world_points: Vec<[Vec<Vector3<f64>>; 2]>,
}

/// Computes correspondences for the current window state.
pub fn snapshot_interaction(window: &DecodedWindow, template: &MeshQuery) -> InteractionSnapshot {
    let t = window.frames();
    let mut closest = Vec::with_capacity(t);
    let mut world_points = Vec::with_capacity(t);
    for f in 0..t {
        let pose = window.object_pose(f);
        let inv = pose.inverse();
        let mut frame_closest = [(0usize, Vector3::zeros()), (0usize, Vector3::zeros())];
        let mut frame_world: [Vec<Vector3<f64>>; 2] = [Vec::new(), Vec::new()];
        for s in 0..2 {
            let mut best = (0usize, f64::INFINITY, Vector3::zeros());
            let mut pts = Vec::with_capacity(JOINT_COUNT);
            for j in 0..JOINT_COUNT {
                let p = window.joints[f][s][j];
                let joint = Vector3::new(p[0], p[1], p[2]);
                let local = inv.apply(&joint);
                let q_local = template.closest_point(&local);
                let q_world = pose.apply(&q_local);
                let d = (joint - q_world).norm();
                if d < best.1 {
                    best = (j, d, q_local);
                }
                pts.push(q_world);
            }
            frame_closest[s] = (best.0, best.2);
            frame_world[s] = pts;
        }
        closest.push(frame_closest);
        world_points.push(frame_world);
    }
    InteractionSnapshot {
        closest,
        world_points,
    }
}

/// Contact-weighted joint-to-surface distance plus the rigid-transport
/// residual of per-joint nearest points across consecutive contact frames.
///
/// `contact` supplies the (relaxed) weights; gradients flow into hand
/// parameters, object rotation/translation, and the contact slots.
pub fn loss_interaction(
    window: &DecodedWindow,
    snapshot: &InteractionSnapshot,
    contact: &[[f64; 2]],
) -> (f64, StateGrad) {
    let t = window.frames();
    let mut grad = StateGrad::zeros(t, window.layout);
    const EPS: f64 = 1e-12;

    // Distance term: per contacting (frame, hand), the closest joint should
    // touch the surface. Normalized by the number of contacting entries so
    // the value reads as meters per contacting hand.
    let mut dist_sum = 0.0;
    let mut dist_entries = 0usize;
    for f in 0..t {
        for s in 0..2 {
            if contact[f][s] > 0.0 {
                dist_entries += 1;
            }
        }
    }
    let dist_norm = dist_entries.max(1) as f64;
    for f in 0..t {
        let pose = window.object_pose(f);
        for side in Side::both() {
            let s = side.index();
            let c = contact[f][s];
            if c <= 0.0 {
                continue;
            }
            let (j, q_local) = snapshot.closest[f][s];
            let p = window.joints[f][s][j];
            let joint = Vector3::new(p[0], p[1], p[2]);
            let q_world = pose.apply(&q_local);
            let diff = joint - q_world;
            let d = diff.norm();
            dist_sum += c * d;
            if d > EPS {
                let dir = diff / d;
                let scale = c / dist_norm;
                grad.add_joint(window, f, side, j, &(dir * scale));
                grad.add_translation(f, &(-dir * scale));
                // d q_world / d R = outer(d, q_local)
                let g_r = (-dir * scale) * q_local.transpose();
                grad.add_rotation(window, f, &g_r);
            }
            // Weight gradient.
            grad.add_contact(f, s, d / dist_norm);
        }
    }
    let dist_term = dist_sum / dist_norm;

    // Transport term: world nearest points must move rigidly with the
    // object across consecutive contact frames.
    let mut transport_sum = 0.0;
    let pairs = (t.saturating_sub(1)).max(1) as f64;
    for f in 0..t.saturating_sub(1) {
        let a = window.rot[f + 1] * window.rot[f].transpose();
        for side in Side::both() {
            let s = side.index();
            let w = contact[f][s] * contact[f + 1][s];
            if w <= 0.0 {
                continue;
            }
            let mut mean_res = 0.0;
            let mut g_r_t = Matrix3::zeros();
            let mut g_r_t1 = Matrix3::zeros();
            let mut g_tau_t = Vector3::zeros();
            let mut g_tau_t1 = Vector3::zeros();
            for j in 0..JOINT_COUNT {
                let p_t = snapshot.world_points[f][s][j];
                let p_t1 = snapshot.world_points[f + 1][s][j];
                let rel = p_t - window.trans[f];
                let r = a * rel + window.trans[f + 1] - p_t1;
                let norm = r.norm();
                mean_res += norm / JOINT_COUNT as f64;
                if norm > EPS {
                    let dir = r / norm;
                    let scale = w / (pairs * JOINT_COUNT as f64);
                    // dr/dA = outer(dir, rel); A = R_{t+1} R_t^T.
                    let g_a = (dir * scale) * rel.transpose();
                    g_r_t1 += g_a * window.rot[f];
                    g_r_t += g_a.transpose() * window.rot[f + 1];
                    g_tau_t += a.transpose() * (-dir * scale);
                    g_tau_t1 += dir * scale;
                }
            }
            transport_sum += w * mean_res;
            grad.add_rotation(window, f, &g_r_t);
            grad.add_rotation(window, f + 1, &g_r_t1);
            grad.add_translation(f, &g_tau_t);
            grad.add_translation(f + 1, &g_tau_t1);
            // Weight gradients.
            grad.add_contact(f, s, contact[f + 1][s] * mean_res / pairs);
            grad.add_contact(f + 1, s, contact[f][s] * mean_res / pairs);
        }
    }
    let transport_term = transport_sum / pairs;

    (dist_term + transport_term, grad)
}

/// The two interaction parts reported separately (tests pin each).
pub fn loss_interaction_parts(
    window: &DecodedWindow,
    snapshot: &InteractionSnapshot,
    contact: &[[f64; 2]],
) -> (f64, f64) {
    let t = window.frames();
    let mut dist_sum = 0.0;
    let mut dist_entries = 0usize;
    for f in 0..t {
        let pose = window.object_pose(f);
        for s in 0..2 {
            let c = contact[f][s];
            if c <= 0.0 {
                continue;
            }
            dist_entries += 1;
            let (j, q_local) = snapshot.closest[f][s];
            let p = window.joints[f][s][j];
            let joint = Vector3::new(p[0], p[1], p[2]);
            dist_sum += c * (joint - pose.apply(&q_local)).norm();
        }
    }
    let dist_term = dist_sum / dist_entries.max(1) as f64;

    let mut transport_sum = 0.0;
    let pairs = (t.saturating_sub(1)).max(1) as f64;
    for f in 0..t.saturating_sub(1) {
        let a = window.rot[f + 1] * window.rot[f].transpose();
        for s in 0..2 {
            let w = contact[f][s] * contact[f + 1][s];
            if w <= 0.0 {
                continue;
            }
            let mut mean_res = 0.0;
            for j in 0..JOINT_COUNT {
                let p_t = snapshot.world_points[f][s][j];
                let p_t1 = snapshot.world_points[f + 1][s][j];
                let r = a * (p_t - window.trans[f]) + window.trans[f + 1] - p_t1;
                mean_res += r.norm() / JOINT_COUNT as f64;
            }
            transport_sum += w * mean_res;
        }
    }
    (dist_term, transport_sum / pairs)
}

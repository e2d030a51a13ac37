//! Guidance-objective values and finite-difference gradient checks.

use nalgebra::{Matrix3, Vector3};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use worldgrip_core::{
    CameraFrame, CameraTrack, Intrinsics, Observations, ObsFrame, RleMask, Side, JOINT_COUNT,
};
use worldgrip_geometry::mesh::{box_mesh, MeshQuery};
use worldgrip_geometry::se3::{rot9_from_mat3, rotation_from_axis_angle};
use worldgrip_geometry::StandardHand;
use worldgrip_guidance::binding::ObservationBinding;
use worldgrip_guidance::objectives::{g_contact_schedule, g_inter, g_reproj, g_temp, stillness};
use worldgrip_prior::decoded::{DecodedWindow, StateGrad};
use worldgrip_prior::losses::loss_smooth;
use worldgrip_prior::state::{StateLayout, CONTACT_OFFSET, OBJ_TRANS_OFFSET, ROT9_OFFSET};

const FD_H: f64 = 1e-6;
const FD_TOL: f64 = 1e-3;

fn random_raw_window(t: usize, seed: u64) -> Array2<f64> {
    let layout = StateLayout::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Array2::<f64>::zeros((t, layout.dims()));
    for f in 0..t {
        let base_rot = rotation_from_axis_angle(&[0.1 * f as f64, 0.2, -0.1]);
        let r9 = rot9_from_mat3(&base_rot);
        for k in 0..9 {
            raw[(f, ROT9_OFFSET + k)] = r9[k] + 0.02 * (rng.random::<f64>() - 0.5);
        }
        for k in 0..2 {
            raw[(f, CONTACT_OFFSET + k)] = 0.25 + 0.5 * rng.random::<f64>();
        }
        for side in Side::both() {
            let b = layout.hand_offset(side);
            for k in 0..3 {
                raw[(f, b + k)] = 0.3 * (rng.random::<f64>() - 0.5);
                raw[(f, b + 3 + k)] = 0.3 * (rng.random::<f64>() - 0.5);
            }
            raw[(f, b + 5)] += 0.6; // keep hands in front of the camera
            for k in 0..15 {
                raw[(f, b + 6 + k)] = 0.5 * (rng.random::<f64>() - 0.5);
            }
        }
        for k in 0..3 {
            raw[(f, OBJ_TRANS_OFFSET + k)] = 0.1 * (rng.random::<f64>() - 0.5);
        }
        raw[(f, OBJ_TRANS_OFFSET + 2)] += 0.8;
    }
    raw
}

fn decode(raw: &Array2<f64>) -> DecodedWindow {
    let hand = StandardHand::default();
    DecodedWindow::decode(raw.clone(), StateLayout::default(), &hand, true)
}

fn fd_grad(raw: &Array2<f64>, f: &dyn Fn(&Array2<f64>) -> f64) -> Array2<f64> {
    fd_grad_h(raw, FD_H, f)
}

fn fd_grad_h(raw: &Array2<f64>, h: f64, f: &dyn Fn(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut grad = Array2::<f64>::zeros(raw.raw_dim());
    for t in 0..raw.nrows() {
        for d in 0..raw.ncols() {
            let mut plus = raw.clone();
            let mut minus = raw.clone();
            plus[(t, d)] += h;
            minus[(t, d)] -= h;
            grad[(t, d)] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
    }
    grad
}

fn assert_grads_match(analytic: &StateGrad, fd: &Array2<f64>, what: &str) {
    for ((t, d), a) in analytic.d_raw.indexed_iter() {
        let f = fd[(t, d)];
        assert!(
            (a - f).abs() <= FD_TOL * (1.0 + f.abs()),
            "{what} grad mismatch at ({t},{d}): analytic {a} vs fd {f}"
        );
    }
}

/// Camera looking down +z of the world from the origin.
fn test_camera(n: usize) -> CameraTrack {
    CameraTrack {
        frames: vec![
            CameraFrame {
                rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                translation: [0.0; 3],
            };
            n
        ],
        intrinsics: Intrinsics {
            fx: 200.0,
            fy: 200.0,
            cx: 120.0,
            cy: 90.0,
        },
        width: 240,
        height: 180,
        gravity_world: [0.0, 0.0, -1.0],
    }
}

fn observations_with_mask(t: usize, frame_index: usize) -> Observations {
    // A small blob of mask pixels near the image center plus visible joints.
    let mut bits = vec![false; 240 * 180];
    for y in 80..100u32 {
        for x in 110..130u32 {
            bits[(y * 240 + x) as usize] = true;
        }
    }
    let mask = RleMask::from_bitmap(240, 180, &bits);
    let mut frames = Vec::new();
    for f in 0..t {
        if f != frame_index {
            continue;
        }
        frames.push(ObsFrame {
            frame_index: f,
            object_mask: Some(mask.clone()),
            hand_joints_2d: [[[120.0, 90.0]; JOINT_COUNT]; 2],
            visibility: [[true; JOINT_COUNT]; 2],
            contact: [0.4, 0.7],
        });
    }
    Observations {
        frames,
        rate_fps: 3.0,
    }
}

fn surface_points() -> Vec<Vector3<f64>> {
    box_mesh(0.1, 0.08, 0.12).surface_samples(300, 3)
}

#[test]
fn reproj_gradient_matches_fd() {
    let t = 3;
    let raw = random_raw_window(t, 5);
    let camera = test_camera(t);
    let obs = observations_with_mask(t, 1);
    let binding = ObservationBinding::new(&obs, &camera, 0, t);
    let pts = surface_points();
    let window = decode(&raw);
    let (_, grad) = g_reproj(&window, &binding, &pts);
    // The chamfer term is piecewise in the nearest-point assignment, so the
    // difference step must stay below the assignment-switching scale.
    let fd = fd_grad_h(&raw, 1e-7, &|r| g_reproj(&decode(r), &binding, &pts).0);
    assert_grads_match(&grad, &fd, "g_reproj");
}

#[test]
fn reproj_empty_mask_contributes_joint_and_contact_only() {
    let t = 2;
    let raw = random_raw_window(t, 7);
    let camera = test_camera(t);
    let mut obs = observations_with_mask(t, 0);
    obs.frames[0].object_mask = None;
    let binding = ObservationBinding::new(&obs, &camera, 0, t);
    let pts = surface_points();
    let window = decode(&raw);
    let (with_joints, _) = g_reproj(&window, &binding, &pts);
    // Joints made invisible: only the contact term remains.
    let mut obs2 = obs.clone();
    obs2.frames[0].visibility = [[false; JOINT_COUNT]; 2];
    let binding2 = ObservationBinding::new(&obs2, &camera, 0, t);
    let (contact_only, _) = g_reproj(&window, &binding2, &pts);
    let expected_contact: f64 = (0..2)
        .map(|s| (window.contact[0][s] - obs.frames[0].contact[s]).powi(2))
        .sum();
    assert!((contact_only - expected_contact).abs() < 1e-12);
    assert!(with_joints > contact_only, "joint term must contribute");
}

#[test]
fn reproj_lateral_shift_moves_mask_term_by_pinhole_arithmetic() {
    // Object at depth 1 m, fx = 500: a 10 cm lateral shift moves the
    // projection by about 50 px, and the one-way chamfer follows.
    let layout = StateLayout::default();
    let t = 1;
    let mut raw = Array2::<f64>::zeros((t, layout.dims()));
    raw[(0, ROT9_OFFSET)] = 1.0;
    raw[(0, ROT9_OFFSET + 4)] = 1.0;
    raw[(0, ROT9_OFFSET + 8)] = 1.0;
    raw[(0, OBJ_TRANS_OFFSET + 2)] = 1.0; // depth 1 m on the optical axis
    for side in Side::both() {
        let b = layout.hand_offset(side);
        raw[(0, b + 5)] = 0.5;
    }

    let mut camera = test_camera(1);
    camera.intrinsics = Intrinsics {
        fx: 500.0,
        fy: 500.0,
        cx: 320.0,
        cy: 240.0,
    };
    camera.width = 640;
    camera.height = 480;

    // Observed mask: the projection of the object at its true pose. The
    // template is tiny relative to the shift so silhouettes stay disjoint
    // and the chamfer follows the pinhole displacement.
    let pts = box_mesh(0.004, 0.004, 0.004).surface_samples(300, 3);
    let window = decode(&raw);
    let pose = window.object_pose(0);
    let mut bits = vec![false; 640 * 480];
    for s in &pts {
        let w = pose.apply(s);
        let u = 500.0 * w.x / w.z + 320.0;
        let v = 500.0 * w.y / w.z + 240.0;
        if (0.0..640.0).contains(&u) && (0.0..480.0).contains(&v) {
            bits[(v as u32 * 640 + u as u32) as usize] = true;
        }
    }
    let obs = Observations {
        frames: vec![ObsFrame {
            frame_index: 0,
            object_mask: Some(RleMask::from_bitmap(640, 480, &bits)),
            hand_joints_2d: [[[0.0, 0.0]; JOINT_COUNT]; 2],
            visibility: [[false; JOINT_COUNT]; 2],
            contact: [0.0, 0.0],
        }],
        rate_fps: 3.0,
    };
    let binding = ObservationBinding::new(&obs, &camera, 0, 1);

    // Contact values are zero in both cases; isolate the mask term.
    let (aligned, _) = g_reproj(&window, &binding, &pts);
    let mut shifted = raw.clone();
    shifted[(0, OBJ_TRANS_OFFSET)] += 0.10;
    let (moved, _) = g_reproj(&decode(&shifted), &binding, &pts);
    let delta = moved - aligned;
    assert!(
        (delta - 50.0).abs() < 2.0,
        "mask term shift {delta} expected about 50 px"
    );
}

#[test]
fn inter_gradient_matches_fd() {
    let t = 3;
    let raw = random_raw_window(t, 11);
    let query = MeshQuery::new(box_mesh(0.1, 0.08, 0.12));
    // Snapshot correspondences are part of the objective definition; fixing
    // them inside the closure keeps FD and analytic routes consistent.
    let base = decode(&raw);
    let snapshot = worldgrip_prior::snapshot_interaction(&base, &query);
    let eval = |r: &Array2<f64>| {
        let w = decode(r);
        let contact: Vec<[f64; 2]> = w.contact.clone();
        let (v, _) = worldgrip_prior::loss_interaction(&w, &snapshot, &contact);
        let mut g = StateGrad::zeros(w.frames(), w.layout);
        let (s, _) = stillness(&w, &contact, &mut g);
        v + s
    };
    let mut grad = {
        let contact: Vec<[f64; 2]> = base.contact.clone();
        let (_, mut g) = worldgrip_prior::loss_interaction(&base, &snapshot, &contact);
        let (_, _) = stillness(&base, &contact, &mut g);
        g
    };
    let fd = fd_grad(&raw, &eval);
    assert_grads_match(&mut grad, &fd, "g_inter");
}

#[test]
fn inter_static_object_without_contact_is_zero() {
    let layout = StateLayout::default();
    let t = 4;
    let mut raw = Array2::<f64>::zeros((t, layout.dims()));
    for f in 0..t {
        raw[(f, ROT9_OFFSET)] = 1.0;
        raw[(f, ROT9_OFFSET + 4)] = 1.0;
        raw[(f, ROT9_OFFSET + 8)] = 1.0;
        raw[(f, OBJ_TRANS_OFFSET + 2)] = 0.5;
        for side in Side::both() {
            raw[(f, layout.hand_offset(side) + 5)] = 1.5;
        }
    }
    let query = MeshQuery::new(box_mesh(0.1, 0.1, 0.1));
    let window = decode(&raw);
    let (v, _) = g_inter(&window, &query);
    assert_eq!(v, 0.0);
}

#[test]
fn stillness_term_matches_motion_squared() {
    // Object moving 5 cm per frame with zero contact: the per-pair raw value
    // is 0.05^2 = 0.0025.
    let layout = StateLayout::default();
    let t = 5;
    let mut raw = Array2::<f64>::zeros((t, layout.dims()));
    for f in 0..t {
        raw[(f, ROT9_OFFSET)] = 1.0;
        raw[(f, ROT9_OFFSET + 4)] = 1.0;
        raw[(f, ROT9_OFFSET + 8)] = 1.0;
        raw[(f, OBJ_TRANS_OFFSET)] = 0.05 * f as f64;
    }
    let window = decode(&raw);
    let contact = vec![[0.0, 0.0]; t];
    let mut g = StateGrad::zeros(t, layout);
    let (v, pairs) = stillness(&window, &contact, &mut g);
    assert_eq!(pairs, t - 1);
    assert!((v - 0.0025).abs() < 1e-12, "stillness {v}");
}

#[test]
fn inter_rigid_comotion_with_full_contact_is_small() {
    // Contact everywhere with hand and object moving rigidly together: only
    // the (constant) closest-point gap contributes; transport is zero.
    let layout = StateLayout::default();
    let t = 5;
    let mut raw = Array2::<f64>::zeros((t, layout.dims()));
    for f in 0..t {
        let motion = worldgrip_geometry::SE3::new(
            rotation_from_axis_angle(&[0.0, 0.0, 0.1 * f as f64]),
            Vector3::new(0.02 * f as f64, 0.0, 0.0),
        );
        let r9 = rot9_from_mat3(&motion.rotation);
        for k in 0..9 {
            raw[(f, ROT9_OFFSET + k)] = r9[k];
        }
        for k in 0..3 {
            raw[(f, OBJ_TRANS_OFFSET + k)] = motion.translation[k];
        }
        raw[(f, CONTACT_OFFSET)] = 1.0;
        raw[(f, CONTACT_OFFSET + 1)] = 1.0;
        for side in Side::both() {
            let b = layout.hand_offset(side);
            let wrist = motion.apply(&Vector3::new(0.0, 0.15, 0.0));
            let aa = worldgrip_geometry::se3::axis_angle_from_rotation(&motion.rotation);
            for k in 0..3 {
                raw[(f, b + k)] = aa[k];
                raw[(f, b + 3 + k)] = wrist[k];
            }
        }
    }
    let query = MeshQuery::new(box_mesh(0.1, 0.1, 0.1));
    let window = decode(&raw);
    let snapshot = worldgrip_prior::snapshot_interaction(&window, &query);
    let contact = vec![[1.0, 1.0]; t];
    let (_, transport) = worldgrip_prior::losses::loss_interaction_parts(&window, &snapshot, &contact);
    assert!(transport < 1e-6, "transport {transport}");
    // Stillness fully gated off by contact.
    let mut g = StateGrad::zeros(t, layout);
    let (still, _) = stillness(&window, &contact, &mut g);
    assert_eq!(still, 0.0);
}

#[test]
fn temp_equals_loss_smooth_bit_exactly() {
    let raw = random_raw_window(5, 17);
    let window = decode(&raw);
    let (a, _) = g_temp(&window);
    let (b, _) = loss_smooth(&window);
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn temp_single_descent_step_reduces_value() {
    // A jittered track: one explicit gradient step on the raw state lowers
    // the smoothness objective.
    let mut raw = random_raw_window(6, 23);
    // Add jitter to object translation.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for f in 0..6 {
        for k in 0..3 {
            raw[(f, OBJ_TRANS_OFFSET + k)] += 0.03 * (rng.random::<f64>() - 0.5);
        }
    }
    let window = decode(&raw);
    let (before, grad) = g_temp(&window);
    let step = 0.05;
    let stepped = &raw - &(&grad.d_raw * step);
    let (after, _) = g_temp(&decode(&stepped));
    assert!(after < before, "descent failed: {before} -> {after}");
}

#[test]
fn contact_schedule_gradient_matches_fd() {
    let t = 4;
    let raw = random_raw_window(t, 31);
    let target = vec![[1.0, 0.0]; t];
    let window = decode(&raw);
    let (_, grad) = g_contact_schedule(&window, &target);
    let fd = fd_grad(&raw, &|r| g_contact_schedule(&decode(r), &target).0);
    assert_grads_match(&grad, &fd, "g_contact_schedule");
}

#[test]
fn smooth_gradient_matches_fd_through_guidance_path() {
    let raw = random_raw_window(5, 41);
    let window = decode(&raw);
    let (_, grad) = g_temp(&window);
    let fd = fd_grad(&raw, &|r| g_temp(&decode(r)).0);
    assert_grads_match(&grad, &fd, "g_temp");
}

#[test]
fn reproj_ignores_frames_outside_window() {
    let t = 2;
    let raw = random_raw_window(t, 51);
    let camera = test_camera(10);
    let obs = observations_with_mask(10, 7); // outside [0, 2)
    let binding = ObservationBinding::new(&obs, &camera, 0, t);
    assert!(binding.empty);
    let pts = surface_points();
    let window = decode(&raw);
    let (v, grad) = g_reproj(&window, &binding, &pts);
    assert_eq!(v, 0.0);
    assert!(grad.d_raw.iter().all(|g| *g == 0.0));
}

#[allow(dead_code)]
fn unused_matrix_helper() -> Matrix3<f64> {
    Matrix3::identity()
}

//! Analytic-gradient checks against central finite differences, plus the
//! pinned zero/analytic cases for every loss.

use nalgebra::Vector3;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use worldgrip_core::{Side, JOINT_COUNT};
use worldgrip_geometry::mesh::{box_mesh, MeshQuery};
use worldgrip_geometry::se3::{rot9_from_mat3, rotation_from_axis_angle, SE3};
use worldgrip_geometry::StandardHand;
use worldgrip_prior::decoded::DecodedWindow;
use worldgrip_prior::losses::{
    loss_consistency, loss_ddpm, loss_interaction, loss_interaction_parts, loss_smooth,
    snapshot_interaction, InteractionSnapshot,
};
use worldgrip_prior::state::{StateLayout, CONTACT_OFFSET, OBJ_TRANS_OFFSET, ROT9_OFFSET};

const FD_H: f64 = 1e-6;
const FD_TOL: f64 = 1e-4;

fn random_raw_window(t: usize, seed: u64) -> Array2<f64> {
    let layout = StateLayout::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Array2::<f64>::zeros((t, layout.dims()));
    for f in 0..t {
        // Rotation: a smooth trajectory of valid rotations, mildly noised in
        // the ambient 9-space.
        let base = rotation_from_axis_angle(&[
            0.2 + 0.05 * f as f64,
            -0.3 + 0.02 * f as f64,
            0.1 * f as f64,
        ]);
        let r9 = rot9_from_mat3(&base);
        for k in 0..9 {
            raw[(f, ROT9_OFFSET + k)] = r9[k] + 0.02 * (rng.random::<f64>() - 0.5);
        }
        for k in 0..2 {
            raw[(f, CONTACT_OFFSET + k)] = 0.3 + 0.4 * rng.random::<f64>();
        }
        for side in Side::both() {
            let base = layout.hand_offset(side);
            for k in 0..3 {
                raw[(f, base + k)] = 0.4 * (rng.random::<f64>() - 0.5); // orient
                raw[(f, base + 3 + k)] = 0.3 * (rng.random::<f64>() - 0.5) + 0.02 * f as f64;
            }
            for k in 0..15 {
                raw[(f, base + 6 + k)] = 0.6 * (rng.random::<f64>() - 0.5);
            }
            for k in 0..10 {
                raw[(f, base + 21 + k)] = 0.3 * (rng.random::<f64>() - 0.5);
            }
        }
        for k in 0..3 {
            raw[(f, OBJ_TRANS_OFFSET + k)] = 0.2 * (rng.random::<f64>() - 0.5) + 0.01 * f as f64;
        }
    }
    raw
}

fn decode(raw: &Array2<f64>) -> DecodedWindow {
    let hand = StandardHand::default();
    DecodedWindow::decode(raw.clone(), StateLayout::default(), &hand, true)
}

/// Central-difference gradient of `f` over every raw dimension.
fn fd_grad(raw: &Array2<f64>, f: &dyn Fn(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut grad = Array2::<f64>::zeros(raw.raw_dim());
    for t in 0..raw.nrows() {
        for d in 0..raw.ncols() {
            let mut plus = raw.clone();
            let mut minus = raw.clone();
            plus[(t, d)] += FD_H;
            minus[(t, d)] -= FD_H;
            grad[(t, d)] = (f(&plus) - f(&minus)) / (2.0 * FD_H);
        }
    }
    grad
}

fn assert_grads_match(analytic: &Array2<f64>, fd: &Array2<f64>, what: &str) {
    for ((t, d), a) in analytic.indexed_iter() {
        let f = fd[(t, d)];
        assert!(
            (a - f).abs() <= FD_TOL * (1.0 + f.abs()),
            "{what} grad mismatch at ({t},{d}): analytic {a} vs fd {f}"
        );
    }
}

#[test]
fn ddpm_loss_analytic_values() {
    let pred = Array2::<f32>::zeros((120, 73));
    let mut target = Array2::<f32>::zeros((120, 73));
    // Identical inputs -> 0.
    let (zero, _) = loss_ddpm(&pred, &pred, 1.0);
    assert_eq!(zero, 0.0);
    // Unit offset in one dim with w = 1 -> 1/(73*T) under mean reduction.
    target[(0, 0)] = 1.0;
    let (one_off, grad) = loss_ddpm(&pred, &target, 1.0);
    let expected = 1.0 / (73.0 * 120.0);
    assert!((one_off - expected).abs() < 1e-12, "{one_off} vs {expected}");
    assert!((grad[(0, 0)] as f64 + 2.0 * expected).abs() < 1e-9);
    // Doubling the weight doubles the loss.
    let (doubled, _) = loss_ddpm(&pred, &target, 2.0);
    assert!((doubled - 2.0 * expected).abs() < 1e-12);
}

#[test]
fn smooth_loss_zero_on_constant_velocity() {
    let layout = StateLayout::default();
    let t = 8;
    let mut raw = Array2::<f64>::zeros((t, layout.dims()));
    let omega = [0.0, 0.0, 0.05];
    for f in 0..t {
        let r = rotation_from_axis_angle(&[0.0, 0.0, 0.05 * f as f64]);
        let r9 = rot9_from_mat3(&r);
        for k in 0..9 {
            raw[(f, ROT9_OFFSET + k)] = r9[k];
        }
        for k in 0..3 {
            raw[(f, OBJ_TRANS_OFFSET + k)] = 0.02 * f as f64 * (k as f64 + 1.0);
        }
        for side in Side::both() {
            let base = layout.hand_offset(side);
            raw[(f, base + 3)] = 0.01 * f as f64;
            raw[(f, base + 4)] = 0.3;
        }
    }
    let _ = omega;
    let window = decode(&raw);
    let (loss, _) = loss_smooth(&window);
    assert!(loss < 1e-18, "constant velocity should score zero, got {loss}");
}

#[test]
fn smooth_loss_single_jump_analytic_value() {
    let layout = StateLayout::default();
    let t = 8;
    let mut raw = Array2::<f64>::zeros((t, layout.dims()));
    for f in 0..t {
        raw[(f, ROT9_OFFSET)] = 1.0;
        raw[(f, ROT9_OFFSET + 4)] = 1.0;
        raw[(f, ROT9_OFFSET + 8)] = 1.0;
        raw[(f, OBJ_TRANS_OFFSET)] = 0.05 * f as f64;
    }
    // One-centimeter jump at frame 4.
    raw[(4, OBJ_TRANS_OFFSET)] += 0.01;
    let window = decode(&raw);
    let (loss, _) = loss_smooth(&window);
    // Second differences pick up delta at t=3,4,5: (1 + 4 + 1) delta^2,
    // averaged over (t-2)*3 translation entries.
    let expected = 6.0 * 0.01f64.powi(2) / ((t as f64 - 2.0) * 3.0);
    assert!(
        (loss - expected).abs() < 1e-12,
        "loss {loss} expected {expected}"
    );
}

#[test]
fn smooth_loss_gradient_matches_fd() {
    let raw = random_raw_window(5, 21);
    let window = decode(&raw);
    let (_, grad) = loss_smooth(&window);
    let fd = fd_grad(&raw, &|r| loss_smooth(&decode(r)).0);
    assert_grads_match(&grad.d_raw, &fd, "loss_smooth");
}

#[test]
fn consistency_loss_values_and_gradient() {
    let raw = random_raw_window(4, 33);
    let window = decode(&raw);
    // Head equals FK -> zero.
    let mut head = Array2::<f64>::zeros((4, 2 * JOINT_COUNT * 3));
    for f in 0..4 {
        for s in 0..2 {
            for j in 0..JOINT_COUNT {
                for k in 0..3 {
                    head[(f, s * 63 + j * 3 + k)] = window.joints[f][s][j][k];
                }
            }
        }
    }
    let (zero, _, _) = loss_consistency(&window, &head);
    assert!(zero < 1e-15);
    // Uniform 1 cm offset -> 0.01.
    let offset = head.mapv(|v| v) + 0.01 / (3f64).sqrt();
    let (one_cm, _, _) = loss_consistency(&window, &offset);
    assert!((one_cm - 0.01).abs() < 1e-12, "{one_cm}");

    // Gradient versus finite differences (state side and head side).
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let head_rand = head.mapv(|v| v + 0.05 * (rng.random::<f64>() - 0.5));
    let (_, grad_state, grad_head) = loss_consistency(&window, &head_rand);
    let fd_state = fd_grad(&raw, &|r| loss_consistency(&decode(r), &head_rand).0);
    assert_grads_match(&grad_state.d_raw, &fd_state, "loss_consistency/state");
    for idx in [(0usize, 0usize), (1, 30), (3, 100), (2, 77)] {
        let mut plus = head_rand.clone();
        let mut minus = head_rand.clone();
        plus[idx] += FD_H;
        minus[idx] -= FD_H;
        let fd = (loss_consistency(&window, &plus).0 - loss_consistency(&window, &minus).0)
            / (2.0 * FD_H);
        let a = grad_head[idx];
        assert!(
            (a - fd).abs() <= FD_TOL * (1.0 + fd.abs()),
            "head grad {idx:?}: {a} vs {fd}"
        );
    }
}

fn box_query() -> MeshQuery {
    MeshQuery::new(box_mesh(0.12, 0.1, 0.16))
}

#[test]
fn interaction_zero_without_contact() {
    let raw = random_raw_window(5, 44);
    let window = decode(&raw);
    let query = box_query();
    let snapshot = snapshot_interaction(&window, &query);
    let contact = vec![[0.0, 0.0]; 5];
    let (loss, grad) = loss_interaction(&window, &snapshot, &contact);
    assert_eq!(loss, 0.0);
    assert!(grad.d_raw.iter().all(|v| *v == 0.0));
}

#[test]
fn interaction_distance_term_is_gap_size() {
    // A large flat box below two flat hands: every joint sits exactly 10 cm
    // above the top face, so the closest-joint distance is 0.10 regardless
    // of which joint wins.
    let layout = StateLayout::default();
    let t = 3;
    let mut raw = Array2::<f64>::zeros((t, layout.dims()));
    for f in 0..t {
        raw[(f, ROT9_OFFSET)] = 1.0;
        raw[(f, ROT9_OFFSET + 4)] = 1.0;
        raw[(f, ROT9_OFFSET + 8)] = 1.0;
        raw[(f, CONTACT_OFFSET)] = 1.0;
        raw[(f, CONTACT_OFFSET + 1)] = 1.0;
        for side in Side::both() {
            let base = layout.hand_offset(side);
            //

            // Flat hands in the z = 0.6 plane (top face sits at z = 0.5).
            raw[(f, base + 5)] = 0.6;
        }
    }
    let mesh = MeshQuery::new(box_mesh(3.0, 3.0, 1.0));
    let window = decode(&raw);
    let snapshot = snapshot_interaction(&window, &mesh);
    let contact = vec![[1.0, 1.0]; t];
    let (dist, _) = loss_interaction_parts(&window, &snapshot, &contact);
    assert!((dist - 0.10).abs() < 1e-9, "distance term {dist}");
}

#[test]
fn interaction_transport_zero_for_rigid_comotion() {
    // Hands and object both follow one rigid trajectory; nearest points ride
    // along, so transport residuals vanish.
    let layout = StateLayout::default();
    let t = 6;
    let mut raw = Array2::<f64>::zeros((t, layout.dims()));
    for f in 0..t {
        let motion = SE3::new(
            rotation_from_axis_angle(&[0.0, 0.0, 0.15 * f as f64]),
            Vector3::new(0.03 * f as f64, -0.01 * f as f64, 0.0),
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
            let base = layout.hand_offset(side);
            // The hand wrist rides the same rigid motion, offset sideways.
            let wrist = motion.apply(&Vector3::new(0.0, 0.2, 0.05));
            let aa = worldgrip_geometry::se3::axis_angle_from_rotation(&motion.rotation);
            for k in 0..3 {
                raw[(f, base + k)] = aa[k];
                raw[(f, base + 3 + k)] = wrist[k];
            }
        }
    }
    let window = decode(&raw);
    let query = box_query();
    let snapshot = snapshot_interaction(&window, &query);
    let contact = vec![[1.0, 1.0]; t];
    let (_, transport) = loss_interaction_parts(&window, &snapshot, &contact);
    assert!(transport < 1e-6, "transport residual {transport}");
}

#[test]
fn interaction_gradient_matches_fd() {
    let raw = random_raw_window(4, 55);
    let window = decode(&raw);
    let query = box_query();
    let snapshot = snapshot_interaction(&window, &query);
    let contact: Vec<[f64; 2]> = window.contact.clone();
    let (_, grad) = loss_interaction(&window, &snapshot, &contact);
    // The snapshot is part of the loss definition: finite differences hold
    // it fixed, exactly as the analytic gradient does.
    let f = |r: &Array2<f64>| {
        let w = decode(r);
        let c: Vec<[f64; 2]> = w.contact.clone();
        loss_interaction(&w, &snapshot, &c).0
    };
    let fd = fd_grad(&raw, &f);
    assert_grads_match(&grad.d_raw, &fd, "loss_interaction");
}

#[test]
fn interaction_is_nonnegative_on_random_windows() {
    let query = box_query();
    for seed in 0..8 {
        let raw = random_raw_window(4, 100 + seed);
        let window = decode(&raw);
        let snapshot: InteractionSnapshot = snapshot_interaction(&window, &query);
        let contact: Vec<[f64; 2]> = window.contact.clone();
        let (loss, _) = loss_interaction(&window, &snapshot, &contact);
        assert!(loss >= 0.0);
    }
}

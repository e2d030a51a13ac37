//! Decoded view of a (denormalized) state window, with the Jacobians needed
//! to push loss gradients back into state coordinates.

use nalgebra::{Matrix3, Vector3};
use ndarray::Array2;

use worldgrip_core::{HandState, Side, JOINT_COUNT};
use worldgrip_geometry::hand::HAND_PARAM_DIMS;
use worldgrip_geometry::se3::mat3_from_rot9;
use worldgrip_geometry::so3::{project_to_so3, project_to_so3_jacobian};
use worldgrip_geometry::KinematicHand;

use crate::state::{NormStats, StateLayout, CONTACT_OFFSET, OBJ_TRANS_OFFSET, ROT9_OFFSET};
use crate::state::read_raw_frame;

/// One window decoded from raw (denormalized) state values.
pub struct DecodedWindow {
    pub layout: StateLayout,
    /// Raw state matrix (T, dims).
    pub raw: Array2<f64>,
    pub hands: Vec<[HandState; 2]>,
    /// Forward-kinematics joints, world/canonical meters.
    pub joints: Vec<[[[f64; 3]; JOINT_COUNT]; 2]>,
    /// 63x31 FK Jacobians, present when requested.
    pub fk_jac: Option<Vec<[Vec<[f64; HAND_PARAM_DIMS]>; 2]>>,
    /// Projected SO(3) rotations per frame.
    pub rot: Vec<Matrix3<f64>>,
    /// 9x9 projection Jacobians, present when requested.
    pub rot_jac: Option<Vec<[[f64; 9]; 9]>>,
    pub trans: Vec<Vector3<f64>>,
    /// Relaxed contact, unclamped.
    pub contact: Vec<[f64; 2]>,
}

impl DecodedWindow {
    /// Decodes a raw state matrix. `with_jacobians` additionally computes FK
    /// and rotation-projection Jacobians for gradient chaining.
    pub fn decode(
        raw: Array2<f64>,
        layout: StateLayout,
        hand_model: &dyn KinematicHand,
        with_jacobians: bool,
    ) -> Self {
        let t = raw.nrows();
        let mut hands = Vec::with_capacity(t);
        let mut joints = Vec::with_capacity(t);
        let mut fk_jac = if with_jacobians { Some(Vec::with_capacity(t)) } else { None };
        let mut rot = Vec::with_capacity(t);
        let mut rot_jac = if with_jacobians { Some(Vec::with_capacity(t)) } else { None };
        let mut trans = Vec::with_capacity(t);
        let mut contact = Vec::with_capacity(t);
        for f in 0..t {
            let (pair, pose, c) = read_raw_frame(raw.row(f).as_slice().unwrap(), layout);
            // Projection may fail on degenerate noise; fall back to identity
            // (the Jacobian is zeroed there, stopping gradient flow).
            let (r, jr) = match project_to_so3(&pose.rot9) {
                Ok(r) => {
                    let j = if with_jacobians {
                        project_to_so3_jacobian(&pose.rot9).unwrap_or([[0.0; 9]; 9])
                    } else {
                        [[0.0; 9]; 9]
                    };
                    (r, j)
                }
                Err(_) => (Matrix3::identity(), [[0.0; 9]; 9]),
            };
            rot.push(r);
            if let Some(v) = rot_jac.as_mut() {
                v.push(jr);
            }
            trans.push(Vector3::new(
                pose.translation[0],
                pose.translation[1],
                pose.translation[2],
            ));
            contact.push(c);
            if with_jacobians {
                let (jl, gl) = hand_model.fk_jacobian(&pair[0]);
                let (jrh, gr) = hand_model.fk_jacobian(&pair[1]);
                joints.push([jl, jrh]);
                fk_jac.as_mut().unwrap().push([gl, gr]);
            } else {
                joints.push([hand_model.fk(&pair[0]), hand_model.fk(&pair[1])]);
            }
            hands.push(pair);
        }
        DecodedWindow {
            layout,
            raw,
            hands,
            joints,
            fk_jac,
            rot,
            rot_jac,
            trans,
            contact,
        }
    }

    pub fn frames(&self) -> usize {
        self.raw.nrows()
    }

    /// World object pose of one frame.
    pub fn object_pose(&self, t: usize) -> worldgrip_geometry::SE3 {
        worldgrip_geometry::SE3::new(self.rot[t], self.trans[t])
    }
}

/// Gradient of a scalar loss with respect to the raw state matrix, built by
/// pushing typed gradients through the stored Jacobians.
pub struct StateGrad {
    pub d_raw: Array2<f64>,
    layout: StateLayout,
}

impl StateGrad {
    pub fn zeros(frames: usize, layout: StateLayout) -> Self {
        StateGrad {
            d_raw: Array2::zeros((frames, layout.dims())),
            layout,
        }
    }

    /// Adds a gradient with respect to joint `j` of `side` at frame `t`,
    /// chained through the FK Jacobian into the hand parameter slots.
    pub fn add_joint(&mut self, window: &DecodedWindow, t: usize, side: Side, j: usize, g: &Vector3<f64>) {
        let jac = window
            .fk_jac
            .as_ref()
            .expect("decode with_jacobians to chain joint gradients");
        let base = self.layout.hand_offset(side);
        let rows = &jac[t][side.index()];
        for k in 0..3 {
            let row = &rows[j * 3 + k];
            let gk = g[k];
            if gk == 0.0 {
                continue;
            }
            for p in 0..HAND_PARAM_DIMS {
                self.d_raw[(t, base + p)] += gk * row[p];
            }
        }
    }

    /// Adds a gradient with respect to the projected rotation matrix at
    /// frame `t`, chained through the SVD-projection Jacobian into rot9.
    pub fn add_rotation(&mut self, window: &DecodedWindow, t: usize, g: &Matrix3<f64>) {
        let jac = window
            .rot_jac
            .as_ref()
            .expect("decode with_jacobians to chain rotation gradients");
        let jr = &jac[t];
        for col in 0..9 {
            let mut acc = 0.0;
            for row in 0..9 {
                acc += g[(row / 3, row % 3)] * jr[row][col];
            }
            self.d_raw[(t, ROT9_OFFSET + col)] += acc;
        }
    }

    pub fn add_translation(&mut self, t: usize, g: &Vector3<f64>) {
        if self.layout.include_object_translation {
            for k in 0..3 {
                self.d_raw[(t, OBJ_TRANS_OFFSET + k)] += g[k];
            }
        }
    }

    pub fn add_contact(&mut self, t: usize, side: usize, g: f64) {
        self.d_raw[(t, CONTACT_OFFSET + side)] += g;
    }

    /// Converts the raw-space gradient to normalized-space (multiply by the
    /// per-dim std, the derivative of denormalization).
    pub fn to_normalized(&self, stats: &NormStats) -> Array2<f32> {
        let mut out = Array2::<f32>::zeros(self.d_raw.raw_dim());
        for ((t, d), v) in self.d_raw.indexed_iter() {
            out[(t, d)] = (v * stats.std[d]) as f32;
        }
        out
    }
}

/// Decodes a normalized f32 state with stats into a raw f64 window.
pub fn decode_normalized(
    state: &Array2<f32>,
    stats: &NormStats,
    layout: StateLayout,
    hand_model: &dyn KinematicHand,
    with_jacobians: bool,
) -> DecodedWindow {
    let raw = crate::state::denormalize(state, stats);
    DecodedWindow::decode(raw, layout, hand_model, with_jacobians)
}

/// Rebuilds a rotation matrix directly from raw rot9 slots (unprojected).
pub fn raw_rot9(window: &DecodedWindow, t: usize) -> Matrix3<f64> {
    let mut r = [0.0; 9];
    for k in 0..9 {
        r[k] = window.raw[(t, ROT9_OFFSET + k)];
    }
    mat3_from_rot9(&r)
}

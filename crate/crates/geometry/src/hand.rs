//! The pluggable kinematic hand.
//!
//! A deterministic, smooth, differentiable stand-in for a licensed parametric
//! hand model: 21 joints (wrist + 5 fingers x mcp/pip/dip/tip), bone lengths
//! derived affinely from 10 shape coefficients, and a fixed seeded linear
//! basis mapping 15 articulation coefficients to 45 joint-angle components.
//! Zero parameters give the canonical flat pose; the left hand is the
//! mirrored right-hand skeleton. Forward kinematics is generic over the
//! scalar, so `Dual` numbers deliver exact Jacobians.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dual::{Dual, Real};
use worldgrip_core::{HandState, Side, ARTIC_DIMS, JOINT_COUNT, SHAPE_DIMS};

/// Parameters per hand: orient(3) + translation(3) + articulation(15) +
/// shape(10).
pub const HAND_PARAM_DIMS: usize = 31;
/// Rotating joints (mcp/pip/dip per finger) times three angle components.
pub const ANGLE_COMPONENTS: usize = 45;
/// Bones: wrist->mcp per finger plus three segments per finger.
pub const BONE_COUNT: usize = 20;

/// Skeleton edges as joint index pairs, for capsule rendering.
pub const BONES: [(usize, usize); BONE_COUNT] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (0, 5),
    (5, 6),
    (6, 7),
    (7, 8),
    (0, 9),
    (9, 10),
    (10, 11),
    (11, 12),
    (0, 13),
    (13, 14),
    (14, 15),
    (15, 16),
    (0, 17),
    (17, 18),
    (18, 19),
    (19, 20),
];

/// Anything that maps a `HandState` to 21 world-frame joints.
pub trait KinematicHand: Send + Sync {
    fn fk(&self, state: &HandState) -> [[f64; 3]; JOINT_COUNT];

    /// Joints plus the 63x31 Jacobian with respect to
    /// `[orient, translation, articulation, shape]`.
    fn fk_jacobian(
        &self,
        state: &HandState,
    ) -> ([[f64; 3]; JOINT_COUNT], Vec<[f64; HAND_PARAM_DIMS]>);
}

/// The built-in seeded hand.
#[derive(Debug, Clone)]
pub struct StandardHand {
    /// Rest direction of each finger in the flat pose, unit vectors.
    finger_dirs: [[f64; 3]; 5],
    /// Wrist-to-MCP offsets in the flat pose.
    mcp_offsets: [[f64; 3]; 5],
    /// Segment lengths `[proximal, middle, distal]` per finger.
    segment_lengths: [[f64; 3]; 5],
    /// Affine bone-scale map: 20 x 10.
    shape_basis: Vec<[f64; SHAPE_DIMS]>,
    /// Articulation basis: 45 x 15.
    artic_basis: Vec<[f64; ARTIC_DIMS]>,
}

pub const DEFAULT_HAND_SEED: u64 = 0x57d1a;

impl Default for StandardHand {
    fn default() -> Self {
        StandardHand::new(DEFAULT_HAND_SEED)
    }
}

impl StandardHand {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let small = |scale: f64, rng: &mut ChaCha8Rng| (rng.random::<f64>() * 2.0 - 1.0) * scale;

        // Right hand, flat pose: fingers along +x, palm spread along y,
        // palm plane z = 0, thumb toward -y.
        let finger_dirs = [
            normalize([0.68, -0.73, 0.0]), // thumb
            [1.0, 0.0, 0.0],               // index
            [1.0, 0.0, 0.0],               // middle
            [1.0, 0.0, 0.0],               // ring
            [1.0, 0.0, 0.0],               // pinky
        ];
        let mcp_offsets = [
            [0.025, -0.028, 0.0],
            [0.092, -0.022, 0.0],
            [0.098, 0.0, 0.0],
            [0.092, 0.022, 0.0],
            [0.082, 0.042, 0.0],
        ];
        let segment_lengths = [
            [0.036, 0.030, 0.026],
            [0.042, 0.026, 0.023],
            [0.046, 0.029, 0.024],
            [0.043, 0.027, 0.023],
            [0.033, 0.021, 0.019],
        ];

        // Bone scales respond linearly but weakly to shape coefficients.
        let shape_basis = (0..BONE_COUNT)
            .map(|_| {
                let mut row = [0.0; SHAPE_DIMS];
                for v in row.iter_mut() {
                    *v = small(0.015, &mut rng);
                }
                // The first shape coefficient is an overall size control.
                row[0] += 0.05;
                row
            })
            .collect();

        // Articulation: coefficients 0..4 curl one finger each, 5..9 spread
        // one finger each, 10..14 mix across joints; small seeded noise
        // everywhere keeps the basis generic.
        let mut artic_basis = vec![[0.0; ARTIC_DIMS]; ANGLE_COMPONENTS];
        for finger in 0..5 {
            for joint in 0..3 {
                let row_y = 3 * (3 * finger + joint) + 1; // flexion about y
                let curl = [1.0, 0.85, 0.55][joint];
                artic_basis[row_y][finger] = curl;
                if joint == 0 {
                    let row_z = 3 * (3 * finger) + 2; // abduction about z
                    artic_basis[row_z][5 + finger] = 0.45;
                }
            }
        }
        for row in artic_basis.iter_mut() {
            for (k, v) in row.iter_mut().enumerate() {
                if k >= 10 {
                    *v += small(0.12, &mut rng);
                }
                *v += small(0.01, &mut rng);
            }
        }

        StandardHand {
            finger_dirs,
            mcp_offsets,
            segment_lengths,
            shape_basis,
            artic_basis,
        }
    }

    /// Forward kinematics over any scalar implementing [`Real`].
    pub fn fk_generic<S: Real>(
        &self,
        orient: &[S; 3],
        translation: &[S; 3],
        articulation: &[S; ARTIC_DIMS],
        shape: &[S; SHAPE_DIMS],
        side: Side,
    ) -> [[S; 3]; JOINT_COUNT] {
        let one = S::from_f64(1.0);

        // Bone scale factors.
        let mut bone_scale = [one; BONE_COUNT];
        for (b, row) in self.shape_basis.iter().enumerate() {
            let mut acc = S::from_f64(0.0);
            for (k, &w) in row.iter().enumerate() {
                acc = acc + shape[k] * S::from_f64(w);
            }
            bone_scale[b] = one + acc;
        }

        // Joint angles.
        let mut angles = [S::from_f64(0.0); ANGLE_COMPONENTS];
        for (r, row) in self.artic_basis.iter().enumerate() {
            let mut acc = S::from_f64(0.0);
            for (k, &w) in row.iter().enumerate() {
                acc = acc + articulation[k] * S::from_f64(w);
            }
            angles[r] = acc;
        }

        // Local joints of the right-hand skeleton.
        let zero = [S::from_f64(0.0); 3];
        let mut local = [zero; JOINT_COUNT];
        for finger in 0..5 {
            let dir = self.finger_dirs[finger];
            let dir_s = [
                S::from_f64(dir[0]),
                S::from_f64(dir[1]),
                S::from_f64(dir[2]),
            ];
            let base_scale = bone_scale[finger * 4];
            let mut pos = [
                S::from_f64(self.mcp_offsets[finger][0]) * base_scale,
                S::from_f64(self.mcp_offsets[finger][1]) * base_scale,
                S::from_f64(self.mcp_offsets[finger][2]) * base_scale,
            ];
            local[1 + finger * 4] = pos;
            let mut cum = mat3_identity::<S>();
            for seg in 0..3 {
                let a = 3 * (3 * finger + seg);
                let rot = rodrigues([angles[a], angles[a + 1], angles[a + 2]]);
                cum = mat3_mul(&cum, &rot);
                let len = S::from_f64(self.segment_lengths[finger][seg])
                    * bone_scale[finger * 4 + 1 + seg];
                let seg_vec = [dir_s[0] * len, dir_s[1] * len, dir_s[2] * len];
                let step = mat3_apply(&cum, &seg_vec);
                pos = [pos[0] + step[0], pos[1] + step[1], pos[2] + step[2]];
                local[1 + finger * 4 + seg + 1] = pos;
            }
        }

        if side == Side::Left {
            for p in local.iter_mut() {
                p[0] = -p[0];
            }
        }

        // Global pose.
        let global = rodrigues(*orient);
        let mut out = [zero; JOINT_COUNT];
        for (o, p) in out.iter_mut().zip(local.iter()) {
            let rotated = mat3_apply(&global, p);
            *o = [
                rotated[0] + translation[0],
                rotated[1] + translation[1],
                rotated[2] + translation[2],
            ];
        }
        out
    }
}

impl KinematicHand for StandardHand {
    fn fk(&self, state: &HandState) -> [[f64; 3]; JOINT_COUNT] {
        self.fk_generic(
            &state.global_orient,
            &state.translation,
            &state.articulation,
            &state.shape,
            state.side,
        )
    }

    fn fk_jacobian(
        &self,
        state: &HandState,
    ) -> ([[f64; 3]; JOINT_COUNT], Vec<[f64; HAND_PARAM_DIMS]>) {
        type D = Dual<HAND_PARAM_DIMS>;
        let mut orient = [D::constant(0.0); 3];
        let mut trans = [D::constant(0.0); 3];
        let mut artic = [D::constant(0.0); ARTIC_DIMS];
        let mut shape = [D::constant(0.0); SHAPE_DIMS];
        for k in 0..3 {
            orient[k] = D::variable(state.global_orient[k], k);
            trans[k] = D::variable(state.translation[k], 3 + k);
        }
        for k in 0..ARTIC_DIMS {
            artic[k] = D::variable(state.articulation[k], 6 + k);
        }
        for k in 0..SHAPE_DIMS {
            shape[k] = D::variable(state.shape[k], 6 + ARTIC_DIMS + k);
        }
        let joints_d = self.fk_generic(&orient, &trans, &artic, &shape, state.side);
        let mut joints = [[0.0; 3]; JOINT_COUNT];
        let mut jac = vec![[0.0; HAND_PARAM_DIMS]; JOINT_COUNT * 3];
        for j in 0..JOINT_COUNT {
            for k in 0..3 {
                joints[j][k] = joints_d[j][k].re;
                jac[j * 3 + k] = joints_d[j][k].eps;
            }
        }
        (joints, jac)
    }
}

/// Convenience wrapper using the default hand.
pub fn hand_fk(hand: &dyn KinematicHand, state: &HandState) -> [[f64; 3]; JOINT_COUNT] {
    hand.fk(state)
}

pub fn hand_fk_jacobian(
    hand: &dyn KinematicHand,
    state: &HandState,
) -> ([[f64; 3]; JOINT_COUNT], Vec<[f64; HAND_PARAM_DIMS]>) {
    hand.fk_jacobian(state)
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

type Mat3<S> = [[S; 3]; 3];

fn mat3_identity<S: Real>() -> Mat3<S> {
    let o = S::from_f64(1.0);
    let z = S::from_f64(0.0);
    [[o, z, z], [z, o, z], [z, z, o]]
}

fn mat3_mul<S: Real>(a: &Mat3<S>, b: &Mat3<S>) -> Mat3<S> {
    let mut out = [[S::from_f64(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn mat3_apply<S: Real>(m: &Mat3<S>, v: &[S; 3]) -> [S; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Rodrigues rotation from an axis-angle vector, smooth through zero.
///
/// Uses R = I + A(t) [v]x + B(t) [v]x^2 with A = sin(t)/t and
/// B = (1 - cos(t))/t^2 evaluated by series near zero, so derivatives stay
/// exact for dual-number scalars.
fn rodrigues<S: Real>(v: [S; 3]) -> Mat3<S> {
    let theta_sq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let (a, b) = if theta_sq.value() < 1e-8 {
        let half = S::from_f64(0.5);
        let a = S::from_f64(1.0) - theta_sq / S::from_f64(6.0)
            + theta_sq * theta_sq / S::from_f64(120.0);
        let b = half - theta_sq / S::from_f64(24.0) + theta_sq * theta_sq / S::from_f64(720.0);
        (a, b)
    } else {
        let theta = theta_sq.sqrt();
        (theta.sin() / theta, (S::from_f64(1.0) - theta.cos()) / theta_sq)
    };
    let z = S::from_f64(0.0);
    let kx: Mat3<S> = [[z, -v[2], v[1]], [v[2], z, -v[0]], [-v[1], v[0], z]];
    let kx2 = mat3_mul(&kx, &kx);
    let mut out = mat3_identity::<S>();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = out[i][j] + kx[i][j] * a + kx2[i][j] * b;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn zero_parameters_give_flat_pose_at_translation() {
        let hand = StandardHand::default();
        let mut state = HandState::rest(Side::Right);
        state.translation = [0.4, -0.2, 0.9];
        let joints = hand.fk(&state);
        assert_eq!(joints[0], [0.4, -0.2, 0.9]);
        // Flat pose: everything in the palm plane.
        for j in &joints {
            assert_abs_diff_eq!(j[2], 0.9, epsilon = 1e-12);
        }
        // Fingers extend forward of the wrist.
        assert!(joints[8][0] > joints[0][0] + 0.1);
    }

    #[test]
    fn pure_translation_shifts_all_joints() {
        let hand = StandardHand::default();
        let mut state = HandState::rest(Side::Right);
        state.articulation[2] = 0.8;
        let a = hand.fk(&state);
        state.translation = [0.05, 0.02, -0.01];
        let b = hand.fk(&state);
        for (pa, pb) in a.iter().zip(b.iter()) {
            for k in 0..3 {
                assert_abs_diff_eq!(pb[k] - pa[k], state.translation[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn left_hand_is_mirrored_right() {
        let hand = StandardHand::default();
        let right = hand.fk(&HandState::rest(Side::Right));
        let left = hand.fk(&HandState::rest(Side::Left));
        for (r, l) in right.iter().zip(left.iter()) {
            assert_abs_diff_eq!(l[0], -r[0], epsilon = 1e-12);
            assert_abs_diff_eq!(l[1], r[1], epsilon = 1e-12);
            assert_abs_diff_eq!(l[2], r[2], epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let hand = StandardHand::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for side in Side::both() {
            for _ in 0..10 {
                let mut state = HandState::rest(side);
                for k in 0..3 {
                    state.global_orient[k] = rng.random::<f64>() - 0.5;
                    state.translation[k] = rng.random::<f64>() - 0.5;
                }
                for k in 0..ARTIC_DIMS {
                    state.articulation[k] = 2.0 * (rng.random::<f64>() - 0.5);
                }
                for k in 0..SHAPE_DIMS {
                    state.shape[k] = rng.random::<f64>() - 0.5;
                }
                let (_, jac) = hand.fk_jacobian(&state);
                let h = 1e-5;
                for p in 0..HAND_PARAM_DIMS {
                    let mut plus = state.clone();
                    let mut minus = state.clone();
                    param_mut(&mut plus, p, h);
                    param_mut(&mut minus, p, -h);
                    let jp = hand.fk(&plus);
                    let jm = hand.fk(&minus);
                    for j in 0..JOINT_COUNT {
                        for k in 0..3 {
                            let fd = (jp[j][k] - jm[j][k]) / (2.0 * h);
                            let an = jac[j * 3 + k][p];
                            assert!(
                                (an - fd).abs() <= 1e-4 * (1.0 + fd.abs()),
                                "param {p} joint {j}.{k}: analytic {an} vs fd {fd}"
                            );
                        }
                    }
                }
            }
        }
    }

    fn param_mut(state: &mut HandState, idx: usize, delta: f64) {
        match idx {
            0..=2 => state.global_orient[idx] += delta,
            3..=5 => state.translation[idx - 3] += delta,
            6..=20 => state.articulation[idx - 6] += delta,
            _ => state.shape[idx - 21] += delta,
        }
    }

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
}

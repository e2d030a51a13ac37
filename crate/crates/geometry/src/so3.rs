//! Nearest-rotation projection for the 9D rotation representation.

use nalgebra::{Matrix3, Vector3, SVD};

use crate::error::GeometryError;
use crate::se3::{mat3_from_rot9, skew};

/// Projects a 3x3 candidate onto SO(3): the nearest rotation under the
/// Frobenius norm, via symmetric orthogonalization with determinant sign
/// correction. Idempotent on valid rotations.
pub fn project_to_so3(rot9: &[f64; 9]) -> Result<Matrix3<f64>, GeometryError> {
    let m = mat3_from_rot9(rot9);
    let svd = SVD::new(m, true, true);
    let u = svd.u.ok_or(GeometryError::DegenerateRotation)?;
    let v_t = svd.v_t.ok_or(GeometryError::DegenerateRotation)?;
    let sigma = svd.singular_values;
    if !(sigma[2].is_finite() && sigma[2] > 1e-12 * sigma[0].max(1e-300)) {
        return Err(GeometryError::DegenerateRotation);
    }
    let sign = (u * v_t).determinant().signum();
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    Ok(u * d * v_t)
}

/// 9x9 Jacobian of `project_to_so3`, both sides row-major flattened.
///
/// Derivation: write M = R P with R the projected rotation and P = R^T M the
/// symmetric polar factor. Perturbing M by dM gives dR = R [w]_x where w
/// solves ((tr P) I - P) w = vee(B - B^T) with B = R^T dM.
pub fn project_to_so3_jacobian(rot9: &[f64; 9]) -> Result<[[f64; 9]; 9], GeometryError> {
    let m = mat3_from_rot9(rot9);
    let r = project_to_so3(rot9)?;
    let p = r.transpose() * m;
    let a = Matrix3::identity() * p.trace() - p;
    let a_inv = a.try_inverse().ok_or(GeometryError::DegenerateRotation)?;

    let mut jac = [[0.0; 9]; 9];
    for k in 0..3 {
        for l in 0..3 {
            // dM = E_kl; B = R^T E_kl has B[i][l] = R[k][i].
            let mut b = Matrix3::zeros();
            for i in 0..3 {
                b[(i, l)] = r[(k, i)];
            }
            let anti = b - b.transpose();
            let vee = Vector3::new(anti[(2, 1)], anti[(0, 2)], anti[(1, 0)]);
            let w = a_inv * vee;
            let dr = r * skew(&w);
            let col = k * 3 + l;
            for i in 0..3 {
                for j in 0..3 {
                    jac[i * 3 + j][col] = dr[(i, j)];
                }
            }
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::{rot9_from_mat3, rotation_from_axis_angle};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        // Uniform over SO(3) via normalized quaternions from Gaussian draws
        // (Box-Muller to avoid a rand_distr dependency here).
        let mut normal = || {
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let q = nalgebra::Quaternion::new(normal(), normal(), normal(), normal());
        let uq = nalgebra::UnitQuaternion::from_quaternion(q);
        *uq.to_rotation_matrix().matrix()
    }

    #[test]
    fn identity_projects_to_identity() {
        let r = project_to_so3(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(r, Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn scaled_identity_removes_scale() {
        let r = project_to_so3(&[2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(r, Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn singular_input_is_rejected() {
        let err = project_to_so3(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateRotation));
    }

    #[test]
    fn monte_carlo_oracle_confirms_trace_maximization() {
        // The nearest rotation maximizes trace(R^T M); no random rotation may
        // score higher.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut m9 = [0.0; 9];
        loop {
            for v in m9.iter_mut() {
                *v = rng.random::<f64>() * 2.0 - 1.0;
            }
            let det = mat3_from_rot9(&m9).determinant();
            if det > 0.05 {
                break;
            }
        }
        let m = mat3_from_rot9(&m9);
        let r = project_to_so3(&m9).unwrap();
        let best = (r.transpose() * m).trace();
        for _ in 0..100_000 {
            let cand = random_rotation(&mut rng);
            let score = (cand.transpose() * m).trace();
            assert!(
                score <= best + 1e-12,
                "random rotation scored {score} > projected {best}"
            );
        }
    }

    #[test]
    fn idempotent_on_valid_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let r = random_rotation(&mut rng);
            let r9 = rot9_from_mat3(&r);
            let p = project_to_so3(&r9).unwrap();
            let p9 = rot9_from_mat3(&p);
            let pp = project_to_so3(&p9).unwrap();
            assert_abs_diff_eq!(p, pp, epsilon = 1e-9);
            assert_abs_diff_eq!(p, r, epsilon = 1e-9);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let base = rotation_from_axis_angle(&[
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            ]);
            let mut m9 = rot9_from_mat3(&base);
            for v in m9.iter_mut() {
                *v += 0.3 * (rng.random::<f64>() - 0.5);
            }
            if mat3_from_rot9(&m9).determinant() < 0.1 {
                continue;
            }
            let jac = project_to_so3_jacobian(&m9).unwrap();
            let h = 1e-6;
            for col in 0..9 {
                let mut plus = m9;
                let mut minus = m9;
                plus[col] += h;
                minus[col] -= h;
                let rp = project_to_so3(&plus).unwrap();
                let rm = project_to_so3(&minus).unwrap();
                for row in 0..9 {
                    let fd = (rp[(row / 3, row % 3)] - rm[(row / 3, row % 3)]) / (2.0 * h);
                    assert!(
                        (jac[row][col] - fd).abs() < 1e-5 * (1.0 + fd.abs()),
                        "row {row} col {col}: analytic {} vs fd {fd}",
                        jac[row][col]
                    );
                }
            }
        }
    }
}

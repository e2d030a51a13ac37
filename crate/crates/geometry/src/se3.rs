//! Rigid transforms and rotation conversions.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

/// A rigid transform `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SE3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl SE3 {
    pub fn identity() -> Self {
        SE3 {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        SE3 {
            rotation,
            translation,
        }
    }

    pub fn from_rot9_trans(rot9: &[f64; 9], trans: &[f64; 3]) -> Self {
        SE3 {
            rotation: mat3_from_rot9(rot9),
            translation: Vector3::new(trans[0], trans[1], trans[2]),
        }
    }

    pub fn rot9(&self) -> [f64; 9] {
        rot9_from_mat3(&self.rotation)
    }

    pub fn trans3(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_arr(&self, p: &[f64; 3]) -> [f64; 3] {
        let q = self.apply(&Vector3::new(p[0], p[1], p[2]));
        [q.x, q.y, q.z]
    }

    pub fn inverse(&self) -> SE3 {
        let rt = self.rotation.transpose();
        SE3 {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &SE3) -> SE3 {
        SE3 {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Row-major flattening.
pub fn mat3_from_rot9(r: &[f64; 9]) -> Matrix3<f64> {
    Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8])
}

pub fn rot9_from_mat3(m: &Matrix3<f64>) -> [f64; 9] {
    [
        m[(0, 0)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(1, 1)],
        m[(1, 2)],
        m[(2, 0)],
        m[(2, 1)],
        m[(2, 2)],
    ]
}

/// Rodrigues formula; the zero vector maps to the identity.
pub fn rotation_from_axis_angle(v: &[f64; 3]) -> Matrix3<f64> {
    let theta = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if theta < 1e-12 {
        return Matrix3::identity();
    }
    let k = Vector3::new(v[0] / theta, v[1] / theta, v[2] / theta);
    let kx = skew(&k);
    Matrix3::identity() + kx * theta.sin() + kx * kx * (1.0 - theta.cos())
}

/// Logarithm map: axis-angle vector with angle in [0, pi].
pub fn axis_angle_from_rotation(m: &Matrix3<f64>) -> [f64; 3] {
    let trace = m.trace();
    let cos_theta = ((trace - 1.0) / 2.0).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    if theta < 1e-12 {
        return [0.0; 3];
    }
    if theta > std::f64::consts::PI - 1e-6 {
        // Near pi the antisymmetric part vanishes; recover the axis from the
        // symmetric part instead.
        let q = UnitQuaternion::from_matrix(m);
        let (axis, angle) = q
            .axis_angle()
            .map(|(a, ang)| (a.into_inner(), ang))
            .unwrap_or((Vector3::z(), 0.0));
        return [axis.x * angle, axis.y * angle, axis.z * angle];
    }
    let scale = theta / (2.0 * theta.sin());
    [
        scale * (m[(2, 1)] - m[(1, 2)]),
        scale * (m[(0, 2)] - m[(2, 0)]),
        scale * (m[(1, 0)] - m[(0, 1)]),
    ]
}

/// Geodesic angle between two rotations, in [0, pi].
pub fn geodesic_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a.transpose() * b;
    let cos_theta = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    cos_theta.acos()
}

/// Spherical-linear interpolation between two rotations at parameter `s`.
pub fn slerp(a: &Matrix3<f64>, b: &Matrix3<f64>, s: f64) -> Matrix3<f64> {
    let qa = UnitQuaternion::from_matrix(a);
    let qb = UnitQuaternion::from_matrix(b);
    let q = qa.try_slerp(&qb, s, 1e-12).unwrap_or(qa);
    *q.to_rotation_matrix().matrix()
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

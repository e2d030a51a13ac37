//! Least-squares similarity alignment (scale, rotation, translation).

use nalgebra::{Matrix3, Vector3, SVD};

use crate::error::EvalError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn identity() -> Self {
        Similarity {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }
}

/// Closed-form least-squares similarity mapping `src` onto `dst`
/// (Umeyama): applying the result to `src` minimizes the mean squared
/// error over all similarity transforms.
pub fn align_similarity(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
) -> Result<Similarity, EvalError> {
    if src.len() != dst.len() {
        return Err(EvalError::LengthMismatch(format!(
            "src {} vs dst {}",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(EvalError::Degenerate("need at least 3 point pairs".into()));
    }
    let n = src.len() as f64;
    let mean_src = src.iter().sum::<Vector3<f64>>() / n;
    let mean_dst = dst.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut var_src = 0.0;
    for (x, y) in src.iter().zip(dst) {
        let xc = x - mean_src;
        let yc = y - mean_dst;
        cov += yc * xc.transpose();
        var_src += xc.norm_squared();
    }
    cov /= n;
    var_src /= n;
    if var_src < 1e-18 {
        return Err(EvalError::Degenerate("source points are coincident".into()));
    }
    let svd = SVD::new(cov, true, true);
    let u = svd.u.ok_or_else(|| EvalError::Degenerate("svd failed".into()))?;
    let v_t = svd.v_t.ok_or_else(|| EvalError::Degenerate("svd failed".into()))?;
    let d = svd.singular_values;
    if d[1] < 1e-15 {
        return Err(EvalError::Degenerate("points are collinear".into()));
    }
    let mut s = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        s[2] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&s) * v_t;
    let scale = (d[0] * s[0] + d[1] * s[1] + d[2] * s[2]) / var_src;
    let translation = mean_dst - rotation * mean_src * scale;
    Ok(Similarity {
        scale,
        rotation,
        translation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use worldgrip_geometry::se3::rotation_from_axis_angle;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                )
            })
            .collect()
    }

    #[test]
    fn identical_points_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 12);
        let s = align_similarity(&pts, &pts).unwrap();
        assert_abs_diff_eq!(s.scale, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.translation, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn recovers_known_similarity_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = random_points(&mut rng, 20);
        let r = rotation_from_axis_angle(&[0.4, -0.2, 0.8]);
        let t = Vector3::new(0.3, -0.7, 1.1);
        let dst: Vec<Vector3<f64>> = src.iter().map(|p| r * p * 2.0 + t).collect();
        let s = align_similarity(&src, &dst).unwrap();
        assert_abs_diff_eq!(s.scale, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.rotation, r, epsilon = 1e-9);
        assert_abs_diff_eq!(s.translation, t, epsilon = 1e-9);
        for (a, b) in src.iter().zip(&dst) {
            assert_abs_diff_eq!(s.apply(a), *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn least_squares_beats_random_similarities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = random_points(&mut rng, 15);
        // Noisy correspondence.
        let r = rotation_from_axis_angle(&[0.1, 0.9, -0.4]);
        let dst: Vec<Vector3<f64>> = src
            .iter()
            .map(|p| {
                r * p * 1.3
                    + Vector3::new(0.2, 0.1, -0.3)
                    + Vector3::new(
                        0.02 * (rng.random::<f64>() - 0.5),
                        0.02 * (rng.random::<f64>() - 0.5),
                        0.02 * (rng.random::<f64>() - 0.5),
                    )
            })
            .collect();
        let best = align_similarity(&src, &dst).unwrap();
        let residual = |s: &Similarity| -> f64 {
            src.iter()
                .zip(&dst)
                .map(|(a, b)| (s.apply(a) - b).norm_squared())
                .sum::<f64>()
        };
        let best_res = residual(&best);
        for _ in 0..10_000 {
            let cand = Similarity {
                scale: 0.5 + rng.random::<f64>() * 2.0,
                rotation: rotation_from_axis_angle(&[
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                ]),
                translation: Vector3::new(
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                ),
            };
            assert!(
                residual(&cand) >= best_res - 1e-12,
                "random similarity beat the closed form"
            );
        }
    }

    #[test]
    fn degenerate_inputs_error() {
        let p = Vector3::new(0.1, 0.2, 0.3);
        assert!(align_similarity(&[p, p, p], &[p, p, p]).is_err());
        // Collinear points.
        let src: Vec<Vector3<f64>> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        assert!(align_similarity(&src, &src).is_err());
    }
}

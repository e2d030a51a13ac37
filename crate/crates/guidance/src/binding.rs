//! Observations bound to a reconstruction range: mask pixels, 2D joints, and
//! contact labels per labeled frame, with canonical cameras.

use nalgebra::Vector3;

use worldgrip_core::{CameraTrack, Intrinsics, Observations, JOINT_COUNT};
use worldgrip_geometry::SE3;

/// One labeled frame prepared for objective evaluation.
pub struct BoundFrame {
    /// Frame index relative to the reconstruction range start.
    pub local_index: usize,
    /// Mask pixel centers, pixels.
    pub mask_pixels: Vec<[f64; 2]>,
    pub joints_2d: [[[f64; 2]; JOINT_COUNT]; 2],
    pub visibility: [[bool; JOINT_COUNT]; 2],
    pub contact: [f64; 2],
    /// World-from-camera pose in the reconstruction (canonical) frame.
    pub camera: SE3,
}

/// All observations overlapping `[start, start + len)`.
pub struct ObservationBinding {
    pub frames: Vec<BoundFrame>,
    pub intrinsics: Intrinsics,
    /// True when no labeled frame fell inside the range.
    pub empty: bool,
}

impl ObservationBinding {
    pub fn new(
        observations: &Observations,
        camera: &CameraTrack,
        start: usize,
        len: usize,
    ) -> ObservationBinding {
        let mut frames = Vec::new();
        for obs in &observations.frames {
            if obs.frame_index < start || obs.frame_index >= start + len {
                continue;
            }
            if obs.frame_index >= camera.len() {
                continue;
            }
            let cam = &camera.frames[obs.frame_index];
            let mask_pixels = obs
                .object_mask
                .as_ref()
                .map(|m| {
                    m.pixels()
                        .into_iter()
                        .map(|(x, y)| [x as f64 + 0.5, y as f64 + 0.5])
                        .collect()
                })
                .unwrap_or_default();
            frames.push(BoundFrame {
                local_index: obs.frame_index - start,
                mask_pixels,
                joints_2d: obs.hand_joints_2d,
                visibility: obs.visibility,
                contact: obs.contact,
                camera: SE3::from_rot9_trans(&cam.rotation, &cam.translation),
            });
        }
        let empty = frames.is_empty();
        ObservationBinding {
            frames,
            intrinsics: camera.intrinsics,
            empty,
        }
    }
}

/// Uniform-grid nearest-neighbor index over 2D points.
pub struct PixelGrid {
    cell: f64,
    min: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
    points: Vec<[f64; 2]>,
}

impl PixelGrid {
    pub fn build(points: Vec<[f64; 2]>, cell: f64) -> Option<PixelGrid> {
        if points.is_empty() {
            return None;
        }
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in &points {
            for k in 0..2 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        let dims = [
            (((max[0] - min[0]) / cell).floor() as usize + 1).max(1),
            (((max[1] - min[1]) / cell).floor() as usize + 1).max(1),
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        for (i, p) in points.iter().enumerate() {
            let cx = (((p[0] - min[0]) / cell) as usize).min(dims[0] - 1);
            let cy = (((p[1] - min[1]) / cell) as usize).min(dims[1] - 1);
            buckets[cy * dims[0] + cx].push(i);
        }
        Some(PixelGrid {
            cell,
            min,
            dims,
            buckets,
            points,
        })
    }

    /// Index and squared distance of the nearest point to `q`.
    pub fn nearest(&self, q: &[f64; 2]) -> (usize, f64) {
        let cx = (((q[0] - self.min[0]) / self.cell).floor().max(0.0) as usize).min(self.dims[0] - 1);
        let cy = (((q[1] - self.min[1]) / self.cell).floor().max(0.0) as usize).min(self.dims[1] - 1);
        let mut best = (usize::MAX, f64::INFINITY);
        let max_ring = self.dims[0].max(self.dims[1]);
        for ring in 0..=max_ring {
            // Once a hit exists, stop as soon as the ring cannot improve it.
            if best.0 != usize::MAX {
                let safe = (ring as f64 - 1.0) * self.cell;
                if safe > 0.0 && safe * safe > best.1 {
                    break;
                }
            }
            let r = ring as isize;
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx.abs() != r && dy.abs() != r {
                        continue; // ring boundary only
                    }
                    let x = cx as isize + dx;
                    let y = cy as isize + dy;
                    if x < 0 || y < 0 || x >= self.dims[0] as isize || y >= self.dims[1] as isize {
                        continue;
                    }
                    for &i in &self.buckets[y as usize * self.dims[0] + x as usize] {
                        let p = self.points[i];
                        let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                        if d < best.1 {
                            best = (i, d);
                        }
                    }
                }
            }
        }
        best
    }
}

/// Seeded surface samples of a template, canonical coordinates.
pub fn template_surface_points(
    template: &worldgrip_core::ObjectTemplate,
    count: usize,
    seed: u64,
) -> Vec<Vector3<f64>> {
    let mesh = worldgrip_geometry::mesh::TriMesh::from_template(template).expect("template mesh");
    mesh.surface_samples(count, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nearest_matches_brute_force() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let points: Vec<[f64; 2]> = (0..500)
            .map(|_| [rng.random::<f64>() * 200.0, rng.random::<f64>() * 100.0])
            .collect();
        let grid = PixelGrid::build(points.clone(), 8.0).unwrap();
        for _ in 0..200 {
            let q = [rng.random::<f64>() * 240.0 - 20.0, rng.random::<f64>() * 140.0 - 20.0];
            let (gi, gd) = grid.nearest(&q);
            let (bi, bd) = points
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assert_eq!(gi, bi);
            assert!((gd - bd).abs() < 1e-9);
        }
    }
}

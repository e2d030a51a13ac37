//! Depth-sorted silhouette rendering for masks.
//!
//! The object is splatted from dense seeded surface samples; hands are drawn
//! as capsules along the skeleton bones. A shared z-buffer resolves
//! hand-object occlusion, and the image border truncates everything.

use nalgebra::Vector3;

use worldgrip_core::{ObjectTemplate, RleMask, SequenceBundle};
use worldgrip_geometry::camera::project_point;
use worldgrip_geometry::hand::BONES;
use worldgrip_geometry::mesh::TriMesh;
use worldgrip_geometry::se3::SE3;

/// Sample count used for rendering silhouettes (much denser than the
/// guidance point set so rendered masks hug the true silhouette).
pub const RENDER_SAMPLE_COUNT: usize = 20_000;
pub const RENDER_SAMPLE_SEED: u64 = 0x9e37;

/// Capsule radius along hand bones, meters.
const HAND_BONE_RADIUS: f64 = 0.010;
const WRIST_BONE_RADIUS: f64 = 0.016;

#[derive(Debug, Clone)]
pub struct RenderedMasks {
    pub object: RleMask,
    pub left_hand: RleMask,
    pub right_hand: RleMask,
}

#[derive(Clone, Copy, PartialEq)]
enum Owner {
    None,
    Object,
    Left,
    Right,
}

/// Renders object and hand silhouettes for one frame.
pub fn render_masks(bundle: &SequenceBundle, template: &ObjectTemplate, frame: usize) -> RenderedMasks {
    let (w, h) = (bundle.camera.width, bundle.camera.height);
    let cam = &bundle.camera.frames[frame];
    let cam_pose = SE3::from_rot9_trans(&cam.rotation, &cam.translation);
    let intr = &bundle.camera.intrinsics;

    let mut depth = vec![f64::INFINITY; (w * h) as usize];
    let mut owner = vec![Owner::None; (w * h) as usize];

    // Object splats.
    let mesh = TriMesh::from_template(template).expect("template mesh");
    let samples = mesh.surface_samples(RENDER_SAMPLE_COUNT, RENDER_SAMPLE_SEED);
    let spacing = (mesh.total_area().max(1e-9) / RENDER_SAMPLE_COUNT as f64).sqrt();
    let pose = &bundle.object.poses[frame];
    let object_pose = SE3::from_rot9_trans(&pose.rot9, &pose.translation);
    for s in &samples {
        let world = object_pose.apply(s);
        let proj = project_point(&world, &cam_pose, intr);
        if !proj.valid {
            continue;
        }
        // Tight splats: just enough to close inter-sample gaps without
        // dilating the silhouette.
        let radius = (0.75 * spacing * intr.fx / proj.depth).max(0.35);
        splat(
            &mut depth,
            &mut owner,
            w,
            h,
            proj.uv,
            proj.depth,
            radius,
            Owner::Object,
        );
    }

    // Hand capsules.
    for (side, who) in [(0usize, Owner::Left), (1usize, Owner::Right)] {
        let joints = &bundle.hands.joints[frame][side];
        for (a, b) in BONES {
            let radius = if a == 0 { WRIST_BONE_RADIUS } else { HAND_BONE_RADIUS };
            capsule(
                &mut depth,
                &mut owner,
                w,
                h,
                &Vector3::new(joints[a][0], joints[a][1], joints[a][2]),
                &Vector3::new(joints[b][0], joints[b][1], joints[b][2]),
                radius,
                &cam_pose,
                intr,
                who,
            );
        }
    }

    let collect = |who: Owner| {
        let bits: Vec<bool> = owner.iter().map(|o| *o == who).collect();
        RleMask::from_bitmap(w, h, &bits)
    };
    RenderedMasks {
        object: collect(Owner::Object),
        left_hand: collect(Owner::Left),
        right_hand: collect(Owner::Right),
    }
}

#[allow(clippy::too_many_arguments)]
fn splat(
    depth: &mut [f64],
    owner: &mut [Owner],
    w: u32,
    h: u32,
    uv: [f64; 2],
    z: f64,
    radius: f64,
    who: Owner,
) {
    let x0 = (uv[0] - radius).floor().max(0.0) as i64;
    let x1 = (uv[0] + radius).ceil().min(w as f64 - 1.0) as i64;
    let y0 = (uv[1] - radius).floor().max(0.0) as i64;
    let y1 = (uv[1] + radius).ceil().min(h as f64 - 1.0) as i64;
    if x1 < x0 || y1 < y0 {
        return;
    }
    let r2 = radius * radius;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 + 0.5 - uv[0];
            let dy = y as f64 + 0.5 - uv[1];
            if dx * dx + dy * dy > r2 {
                continue;
            }
            let idx = (y as u32 * w + x as u32) as usize;
            if z < depth[idx] {
                depth[idx] = z;
                owner[idx] = who;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn capsule(
    depth: &mut [f64],
    owner: &mut [Owner],
    w: u32,
    h: u32,
    a_world: &Vector3<f64>,
    b_world: &Vector3<f64>,
    radius_world: f64,
    cam_pose: &SE3,
    intr: &worldgrip_core::Intrinsics,
    who: Owner,
) {
    let pa = project_point(a_world, cam_pose, intr);
    let pb = project_point(b_world, cam_pose, intr);
    if !pa.valid || !pb.valid {
        return;
    }
    let ra = radius_world * intr.fx / pa.depth;
    let rb = radius_world * intr.fx / pb.depth;
    let rmax = ra.max(rb);
    let x0 = (pa.uv[0].min(pb.uv[0]) - rmax).floor().max(0.0) as i64;
    let x1 = (pa.uv[0].max(pb.uv[0]) + rmax).ceil().min(w as f64 - 1.0) as i64;
    let y0 = (pa.uv[1].min(pb.uv[1]) - rmax).floor().max(0.0) as i64;
    let y1 = (pa.uv[1].max(pb.uv[1]) + rmax).ceil().min(h as f64 - 1.0) as i64;
    if x1 < x0 || y1 < y0 {
        return;
    }
    let seg = [pb.uv[0] - pa.uv[0], pb.uv[1] - pa.uv[1]];
    let len2 = seg[0] * seg[0] + seg[1] * seg[1];
    for y in y0..=y1 {
        for x in x0..=x1 {
            let px = x as f64 + 0.5;
            let py = y as f64 + 0.5;
            let t = if len2 > 1e-12 {
                (((px - pa.uv[0]) * seg[0] + (py - pa.uv[1]) * seg[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let cx = pa.uv[0] + seg[0] * t;
            let cy = pa.uv[1] + seg[1] * t;
            let r = ra + (rb - ra) * t;
            let dx = px - cx;
            let dy = py - cy;
            if dx * dx + dy * dy > r * r {
                continue;
            }
            let z = pa.depth + (pb.depth - pa.depth) * t;
            let idx = (y as u32 * w + x as u32) as usize;
            if z < depth[idx] {
                depth[idx] = z;
                owner[idx] = who;
            }
        }
    }
}

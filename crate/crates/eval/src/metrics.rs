//! MPJPE family, ADD/ADD-S, AUC, and the interaction metric.

use nalgebra::Vector3;

use worldgrip_core::{HandTrack, ObjectTrack, JOINT_COUNT};
use worldgrip_geometry::SE3;

use crate::align::{align_similarity, Similarity};
use crate::error::EvalError;

/// Permissive AUC threshold for egocentric interaction scenes, meters.
pub const AUC_MAX_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpjpeSuite {
    /// First-two-frame alignment, all-frame error, centimeters.
    pub w_mpjpe_cm: f64,
    /// Whole-trajectory alignment, centimeters.
    pub wa_mpjpe_cm: f64,
    /// Per-frame Procrustes alignment, millimeters.
    pub pa_mpjpe_mm: f64,
    /// Mean joint acceleration error, millimeters per frame squared.
    pub acc_norm_mm: f64,
}

fn all_joints(track: &HandTrack, frames: std::ops::Range<usize>) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for t in frames {
        for s in 0..2 {
            for j in 0..JOINT_COUNT {
                let p = track.joints[t][s][j];
                out.push(Vector3::new(p[0], p[1], p[2]));
            }
        }
    }
    out
}

fn mean_error(pred: &[Vector3<f64>], gt: &[Vector3<f64>], transform: &Similarity) -> f64 {
    pred.iter()
        .zip(gt)
        .map(|(p, g)| (transform.apply(p) - g).norm())
        .sum::<f64>()
        / pred.len() as f64
}

/// The MPJPE family over a bimanual track pair.
pub fn mpjpe_suite(pred: &HandTrack, gt: &HandTrack) -> Result<MpjpeSuite, EvalError> {
    let n = pred.len();
    if n != gt.len() {
        return Err(EvalError::LengthMismatch(format!(
            "pred {} vs gt {}",
            n,
            gt.len()
        )));
    }
    if n == 0 {
        return Err(EvalError::Degenerate("empty track".into()));
    }
    let pred_all = all_joints(pred, 0..n);
    let gt_all = all_joints(gt, 0..n);

    // WA: align with all joints from all frames.
    let wa_transform = align_similarity(&pred_all, &gt_all)?;
    let wa = mean_error(&pred_all, &gt_all, &wa_transform);

    // W: align with the joints of the first two frames only.
    let head = n.min(2);
    let w_transform = align_similarity(
        &all_joints(pred, 0..head),
        &all_joints(gt, 0..head),
    )?;
    let w = mean_error(&pred_all, &gt_all, &w_transform);

    // PA: Procrustes per frame, millimeters.
    let mut pa_sum = 0.0;
    for t in 0..n {
        let p = all_joints(pred, t..t + 1);
        let g = all_joints(gt, t..t + 1);
        let transform = align_similarity(&p, &g)?;
        pa_sum += mean_error(&p, &g, &transform);
    }
    let pa = pa_sum / n as f64;

    // ACC-NORM: joint acceleration error against ground truth.
    let mut acc_sum = 0.0;
    let mut acc_count = 0usize;
    for t in 1..n.saturating_sub(1) {
        for s in 0..2 {
            for j in 0..JOINT_COUNT {
                let a_pred = second_diff(&pred.joints, t, s, j);
                let a_gt = second_diff(&gt.joints, t, s, j);
                acc_sum += (a_pred - a_gt).norm();
                acc_count += 1;
            }
        }
    }
    let acc = if acc_count > 0 {
        acc_sum / acc_count as f64
    } else {
        0.0
    };

    Ok(MpjpeSuite {
        w_mpjpe_cm: w * 100.0,
        wa_mpjpe_cm: wa * 100.0,
        pa_mpjpe_mm: pa * 1000.0,
        acc_norm_mm: acc * 1000.0,
    })
}

fn second_diff(
    joints: &[[[[f64; 3]; JOINT_COUNT]; 2]],
    t: usize,
    s: usize,
    j: usize,
) -> Vector3<f64> {
    let f = |tt: usize| {
        let p = joints[tt][s][j];
        Vector3::new(p[0], p[1], p[2])
    };
    f(t + 1) - 2.0 * f(t) + f(t - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AddAdds {
    /// Per-frame mean corresponding-point distance, meters.
    pub add: Vec<f64>,
    /// Per-frame mean nearest-point distance, meters.
    pub adds: Vec<f64>,
}

/// ADD and ADD-S per frame between two pose tracks over a model point set.
pub fn add_adds(
    pred: &ObjectTrack,
    gt: &ObjectTrack,
    points: &[Vector3<f64>],
) -> Result<AddAdds, EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch(format!(
            "pred {} vs gt {}",
            pred.len(),
            gt.len()
        )));
    }
    if points.is_empty() {
        return Err(EvalError::EmptyPoints);
    }
    let mut add = Vec::with_capacity(pred.len());
    let mut adds = Vec::with_capacity(pred.len());
    for (p, g) in pred.poses.iter().zip(&gt.poses) {
        let tp = SE3::from_rot9_trans(&p.rot9, &p.translation);
        let tg = SE3::from_rot9_trans(&g.rot9, &g.translation);
        let pred_pts: Vec<Vector3<f64>> = points.iter().map(|x| tp.apply(x)).collect();
        let gt_pts: Vec<Vector3<f64>> = points.iter().map(|x| tg.apply(x)).collect();
        add.push(add_between(&pred_pts, &gt_pts));
        adds.push(adds_between(&pred_pts, &gt_pts));
    }
    Ok(AddAdds { add, adds })
}

/// ADD/ADD-S between already-transformed point sets (used by the
/// interaction metric where a similarity is composed in).
pub fn add_between(pred_pts: &[Vector3<f64>], gt_pts: &[Vector3<f64>]) -> f64 {
    pred_pts
        .iter()
        .zip(gt_pts)
        .map(|(a, b)| (a - b).norm())
        .sum::<f64>()
        / pred_pts.len() as f64
}

pub fn adds_between(pred_pts: &[Vector3<f64>], gt_pts: &[Vector3<f64>]) -> f64 {
    gt_pts
        .iter()
        .map(|g| {
            pred_pts
                .iter()
                .map(|p| (p - g).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / gt_pts.len() as f64
}

/// Area under the accuracy-versus-threshold curve on `[0, max_threshold]`,
/// normalized to [0, 1]. Exact step integration over the sorted errors.
pub fn auc(errors: &[f64], max_threshold: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    errors
        .iter()
        .map(|e| (1.0 - (e / max_threshold).min(1.0)).max(0.0))
        .sum::<f64>()
        / errors.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionAuc {
    pub add_auc: f64,
    pub adds_auc: f64,
}

/// Object pose error after globally aligning the scene with the predicted
/// hand trajectories (the whole-trajectory alignment of WA-MPJPE), reported
/// as ADD/ADD-S AUC.
pub fn interaction_metric(
    pred_hands: &HandTrack,
    pred_object: &ObjectTrack,
    gt_hands: &HandTrack,
    gt_object: &ObjectTrack,
    points: &[Vector3<f64>],
    max_threshold: f64,
) -> Result<InteractionAuc, EvalError> {
    if points.is_empty() {
        return Err(EvalError::EmptyPoints);
    }
    let n = pred_hands.len();
    if n != gt_hands.len() || pred_object.len() != n || gt_object.len() != n {
        return Err(EvalError::LengthMismatch("interaction tracks".into()));
    }
    let transform = align_similarity(
        &all_joints(pred_hands, 0..n),
        &all_joints(gt_hands, 0..n),
    )?;
    let mut add_errors = Vec::with_capacity(n);
    let mut adds_errors = Vec::with_capacity(n);
    for (p, g) in pred_object.poses.iter().zip(&gt_object.poses) {
        let tp = SE3::from_rot9_trans(&p.rot9, &p.translation);
        let tg = SE3::from_rot9_trans(&g.rot9, &g.translation);
        let pred_pts: Vec<Vector3<f64>> =
            points.iter().map(|x| transform.apply(&tp.apply(x))).collect();
        let gt_pts: Vec<Vector3<f64>> = points.iter().map(|x| tg.apply(x)).collect();
        add_errors.push(add_between(&pred_pts, &gt_pts));
        adds_errors.push(adds_between(&pred_pts, &gt_pts));
    }
    Ok(InteractionAuc {
        add_auc: auc(&add_errors, max_threshold),
        adds_auc: auc(&adds_errors, max_threshold),
    })
}

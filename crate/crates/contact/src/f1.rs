//! Binary contact-detection scores.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl F1Scores {
    fn from_counts(tp: usize, fp: usize, fnn: usize) -> F1Scores {
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fnn == 0 {
            0.0
        } else {
            tp as f64 / (tp + fnn) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        F1Scores {
            precision,
            recall,
            f1,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fnn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Report {
    pub left: F1Scores,
    pub right: F1Scores,
    pub pooled: F1Scores,
}

/// Standard binary precision/recall/F1 over labeled frames, per hand and
/// pooled. Inputs are `(prediction, ground truth)` pairs per frame.
pub fn labeler_f1(pairs: &[([bool; 2], [bool; 2])]) -> F1Report {
    let mut counts = [[0usize; 3]; 2]; // [hand][tp, fp, fn]
    for (pred, gt) in pairs {
        for s in 0..2 {
            match (pred[s], gt[s]) {
                (true, true) => counts[s][0] += 1,
                (true, false) => counts[s][1] += 1,
                (false, true) => counts[s][2] += 1,
                (false, false) => {}
            }
        }
    }
    let left = F1Scores::from_counts(counts[0][0], counts[0][1], counts[0][2]);
    let right = F1Scores::from_counts(counts[1][0], counts[1][1], counts[1][2]);
    let pooled = F1Scores::from_counts(
        counts[0][0] + counts[1][0],
        counts[0][1] + counts[1][1],
        counts[0][2] + counts[1][2],
    );
    F1Report {
        left,
        right,
        pooled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_labels_score_one() {
        let pairs = vec![([true, false], [true, false]), ([false, true], [false, true])];
        let r = labeler_f1(&pairs);
        assert_eq!(r.pooled.f1, 1.0);
        assert_eq!(r.left.f1, 1.0);
        assert_eq!(r.right.f1, 1.0);
    }

    #[test]
    fn all_zero_predictions_have_zero_recall() {
        let pairs = vec![
            ([false, false], [true, false]),
            ([false, false], [false, false]),
            ([false, false], [true, true]),
        ];
        let r = labeler_f1(&pairs);
        assert_eq!(r.pooled.recall, 0.0);
        assert_eq!(r.pooled.f1, 0.0);
    }

    #[test]
    fn hand_computed_ten_frame_fixture() {
        // Left hand: tp=3, fp=1, fn=2; right hand: tp=2, fp=2, fn=1.
        let pairs = vec![
            ([true, true], [true, true]),    // L tp, R tp
            ([true, false], [true, false]),  // L tp
            ([true, false], [true, true]),   // L tp, R fn
            ([true, false], [false, false]), // L fp
            ([false, true], [true, true]),   // L fn, R tp
            ([false, true], [false, false]), // R fp
            ([false, true], [false, false]), // R fp
            ([false, false], [true, false]), // L fn
            ([false, false], [false, false]),
            ([false, false], [false, false]),
        ];
        let r = labeler_f1(&pairs);
        assert_eq!(
            (r.left.true_positives, r.left.false_positives, r.left.false_negatives),
            (3, 1, 2)
        );
        assert_eq!(
            (r.right.true_positives, r.right.false_positives, r.right.false_negatives),
            (2, 2, 1)
        );
        // Left: P = 3/4, R = 3/5, F1 = 2*0.75*0.6/1.35 = 2/3.
        assert!((r.left.precision - 0.75).abs() < 1e-12);
        assert!((r.left.recall - 0.6).abs() < 1e-12);
        assert!((r.left.f1 - 2.0 / 3.0).abs() < 1e-12);
        // Pooled: tp=5, fp=3, fn=3 -> P = R = 5/8, F1 = 5/8.
        assert!((r.pooled.f1 - 0.625).abs() < 1e-12);
    }
}

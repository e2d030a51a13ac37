//! Sliding-window extraction over a sequence bundle.

use crate::error::CoreError;
use crate::types::*;

/// Where the windows sit in the source sequence and how they overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPlan {
    pub window_len: usize,
    pub stride: usize,
    pub source_len: usize,
    /// Window start frames, ascending; the last window is end-aligned.
    pub starts: Vec<usize>,
    /// True when the source was shorter than one window.
    pub padded: bool,
    /// Half-open `[begin, end)` frame ranges covered by two consecutive
    /// windows.
    pub overlaps: Vec<(usize, usize)>,
}

const IDENTITY_ROT9: [f64; 9] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];

/// Splits a sequence into overlapping windows of length `window_len`.
///
/// Starts advance by `stride`; the final window is end-aligned so the union
/// of windows covers `[0, L)`. A source shorter than one window yields a
/// single window padded by repeating the last frame (or rest frames when the
/// source is empty), flagged `padded`.
pub fn window_split(
    seq: &SequenceBundle,
    window_len: usize,
    stride: usize,
) -> Result<(Vec<MotionWindow>, WindowPlan), CoreError> {
    if window_len < 2 {
        return Err(CoreError::invariant("window_len", "must be at least 2"));
    }
    if stride == 0 || stride > window_len {
        return Err(CoreError::invariant(
            "stride",
            format!("must satisfy 1 <= stride <= {window_len}"),
        ));
    }
    let source_len = seq.len();

    if source_len < window_len {
        let window = padded_window(seq, window_len);
        let plan = WindowPlan {
            window_len,
            stride,
            source_len,
            starts: vec![0],
            padded: true,
            overlaps: vec![],
        };
        return Ok((vec![window], plan));
    }

    let mut starts = Vec::new();
    let mut s = 0usize;
    while s + window_len < source_len {
        starts.push(s);
        s += stride;
    }
    let last = source_len - window_len;
    if starts.last() != Some(&last) {
        starts.push(last);
    }

    let overlaps = starts
        .windows(2)
        .filter_map(|pair| {
            let (a, b) = (pair[0], pair[1]);
            let end_a = a + window_len;
            (b < end_a).then_some((b, end_a))
        })
        .collect();

    let windows = starts
        .iter()
        .map(|&start| MotionWindow {
            start,
            len: window_len,
            padded: false,
            valid_len: window_len,
            hands: seq.hands.slice(start, window_len),
            object: seq.object.slice(start, window_len),
            contact: seq.contact.slice(start, window_len),
            anchor_rotation: IDENTITY_ROT9,
            anchor_translation: [0.0; 3],
        })
        .collect();

    let plan = WindowPlan {
        window_len,
        stride,
        source_len,
        starts,
        padded: false,
        overlaps,
    };
    Ok((windows, plan))
}

fn padded_window(seq: &SequenceBundle, window_len: usize) -> MotionWindow {
    let valid = seq.len();
    let mut frames = seq.hands.frames.clone();
    let mut joints = seq.hands.joints.clone();
    let mut poses = seq.object.poses.clone();
    let mut contact = seq.contact.frames.clone();
    for _ in valid..window_len {
        frames.push(
            frames
                .last()
                .cloned()
                .unwrap_or([HandState::rest(Side::Left), HandState::rest(Side::Right)]),
        );
        joints.push(joints.last().cloned().unwrap_or([[[0.0; 3]; JOINT_COUNT]; 2]));
        poses.push(poses.last().cloned().unwrap_or_else(ObjectPose::identity));
        contact.push(contact.last().cloned().unwrap_or([0.0, 0.0]));
    }
    MotionWindow {
        start: 0,
        len: window_len,
        padded: true,
        valid_len: valid,
        hands: HandTrack::with_derived_velocities(frames, joints, seq.hands.fps),
        object: ObjectTrack { poses },
        contact: ContactTrack {
            frames: contact,
            binary_threshold: seq.contact.binary_threshold,
        },
        anchor_rotation: IDENTITY_ROT9,
        anchor_translation: [0.0; 3],
    }
}

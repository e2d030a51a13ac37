//! Driving a labeler over a video at a subsampled rate.

use crate::client::VlmClient;
use crate::error::ContactError;
use crate::parse::parse_response;
use crate::prompt::{build_prompt, FrameMasks};
use crate::validate::validate;

/// Where a frame's label came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// First response parsed and validated.
    Parsed,
    /// Accepted after a validation re-query with a correction message.
    CorrectedAfterViolation,
    /// Validation kept failing; fell back to the all-zeros safe default.
    ZeroFallback,
    /// Responses never parsed (or the client failed); no label.
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub frame_index: usize,
    /// Relaxed `[left, right]` contact for the tracked candidate; `None`
    /// when the frame is missing.
    pub contact: Option<[f64; 2]>,
    pub provenance: Provenance,
    /// Labels for every candidate when available.
    pub all_candidates: Option<Vec<[u8; 2]>>,
}

#[derive(Debug, Clone, Default)]
pub struct LabelOutcome {
    pub frames: Vec<LabeledFrame>,
}

impl LabelOutcome {
    /// Frames with usable labels, as `(frame_index, [left, right])`.
    pub fn present(&self) -> Vec<(usize, [f64; 2])> {
        self.frames
            .iter()
            .filter_map(|f| f.contact.map(|c| (f.frame_index, c)))
            .collect()
    }
}

/// Labels a video at `rate_fps` using the given client.
///
/// Queries run at every `source_fps / rate_fps`-th frame. Unparseable
/// responses get one retry and are then marked missing; one-out-of-k
/// violations trigger a single corrected re-query and then fall back to
/// all-zeros (the safe default for guidance). The pipeline always continues.
pub fn label_video(
    masks: &[FrameMasks],
    candidates: &[String],
    target_candidate: usize,
    client: &dyn VlmClient,
    source_fps: f64,
    rate_fps: f64,
) -> Result<LabelOutcome, ContactError> {
    if candidates.is_empty() {
        return Err(ContactError::NoCandidates);
    }
    let step = (source_fps / rate_fps).round().max(1.0) as usize;
    let mut frames = Vec::new();
    for frame_index in (0..masks.len()).step_by(step) {
        frames.push(label_one_frame(
            frame_index,
            &masks[frame_index],
            candidates,
            target_candidate,
            client,
        ));
    }
    Ok(LabelOutcome { frames })
}

const CORRECTION_PREFIX: &str = "\n\nVALIDATION ERROR: the previous answer broke the constraints: ";
const CORRECTION_SUFFIX: &str =
    ". Each hand can touch AT MOST ONE object. Return only a corrected JSON object in the exact format above.";

fn label_one_frame(
    frame_index: usize,
    masks: &FrameMasks,
    candidates: &[String],
    target: usize,
    client: &dyn VlmClient,
) -> LabeledFrame {
    let missing = |_: &str| LabeledFrame {
        frame_index,
        contact: None,
        provenance: Provenance::Missing,
        all_candidates: None,
    };
    let Ok(mut query) = build_prompt(frame_index, masks, candidates) else {
        return missing("prompt");
    };

    let mut parse_retries = 1usize;
    let mut corrected = false;
    loop {
        let response = match client.send(&query) {
            Ok(r) => r,
            Err(_) => return missing("client"),
        };
        match parse_response(&response, candidates) {
            Err(_) => {
                if parse_retries > 0 {
                    parse_retries -= 1;
                    continue;
                }
                return missing("parse");
            }
            Ok(labels) => {
                let violations = validate(candidates, &labels);
                if violations.is_empty() {
                    let pair = labels[target];
                    return LabeledFrame {
                        frame_index,
                        contact: Some([pair[0] as f64, pair[1] as f64]),
                        provenance: if corrected {
                            Provenance::CorrectedAfterViolation
                        } else {
                            Provenance::Parsed
                        },
                        all_candidates: Some(labels),
                    };
                }
                if !corrected {
                    corrected = true;
                    let detail = violations
                        .iter()
                        .map(|v| format!("{} hand touched {:?}", v.hand, v.objects))
                        .collect::<Vec<_>>()
                        .join("; ");
                    query.user = format!("{}{CORRECTION_PREFIX}{detail}{CORRECTION_SUFFIX}", query.user);
                    continue;
                }
                // Still violating after the corrected re-query: safe zeros.
                return LabeledFrame {
                    frame_index,
                    contact: Some([0.0, 0.0]),
                    provenance: Provenance::ZeroFallback,
                    all_candidates: Some(vec![[0, 0]; candidates.len()]),
                };
            }
        }
    }
}

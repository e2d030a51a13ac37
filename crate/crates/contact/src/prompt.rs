//! Visual-prompt construction: annotated images and prompt text.

use worldgrip_core::RleMask;

use crate::error::ContactError;
use crate::templates::{SYSTEM_PROMPT, USER_MID, USER_POST, USER_PRE};

/// Fixed mask palette indexed by candidate order (RGB).
pub const CANDIDATE_PALETTE: [[u8; 3]; 8] = [
    [255, 200, 0],
    [0, 128, 255],
    [255, 0, 255],
    [0, 200, 120],
    [140, 0, 255],
    [255, 120, 0],
    [0, 255, 255],
    [160, 82, 45],
];

pub const LEFT_DOT: [u8; 3] = [0, 255, 0]; // GREEN dot = Left hand
pub const RIGHT_DOT: [u8; 3] = [255, 0, 0]; // RED dot = Right hand
const DOT_RADIUS: i64 = 3;

/// Plain RGB8 image buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedImage {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
}

impl AnnotatedImage {
    pub fn blank(width: u32, height: u32) -> Self {
        AnnotatedImage {
            width,
            height,
            rgb: vec![30; (width * height * 3) as usize],
        }
    }

    fn paint_mask(&mut self, mask: &RleMask, color: [u8; 3]) {
        for (x, y) in mask.pixels() {
            if x < self.width && y < self.height {
                let i = ((y * self.width + x) * 3) as usize;
                self.rgb[i..i + 3].copy_from_slice(&color);
            }
        }
    }

    fn paint_dot(&mut self, cx: i64, cy: i64, color: [u8; 3]) {
        for dy in -DOT_RADIUS..=DOT_RADIUS {
            for dx in -DOT_RADIUS..=DOT_RADIUS {
                if dx * dx + dy * dy > DOT_RADIUS * DOT_RADIUS {
                    continue;
                }
                let (x, y) = (cx + dx, cy + dy);
                if x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height {
                    let i = ((y as u32 * self.width + x as u32) * 3) as usize;
                    self.rgb[i..i + 3].copy_from_slice(&color);
                }
            }
        }
    }
}

fn centroid(mask: &RleMask) -> Option<(i64, i64)> {
    let pixels = mask.pixels();
    if pixels.is_empty() {
        return None;
    }
    let (sx, sy) = pixels
        .iter()
        .fold((0i64, 0i64), |(ax, ay), (x, y)| (ax + *x as i64, ay + *y as i64));
    let n = pixels.len() as i64;
    Some((sx / n, sy / n))
}

/// Segmentation masks for one frame, inputs to the prompt.
#[derive(Debug, Clone)]
pub struct FrameMasks {
    pub width: u32,
    pub height: u32,
    pub left_hand: RleMask,
    pub right_hand: RleMask,
    /// One mask per candidate object, in candidate order.
    pub objects: Vec<RleMask>,
}

/// An in-context calibration example: an annotated image with its expected
/// answer.
#[derive(Debug, Clone)]
pub struct InContextExample {
    pub image: AnnotatedImage,
    pub expected_json: String,
}

/// A fully-assembled query.
#[derive(Debug, Clone)]
pub struct ContactQuery {
    pub frame_index: usize,
    pub system: String,
    pub user: String,
    pub image: AnnotatedImage,
    /// Candidate order here equals the order of keys expected in the
    /// response JSON.
    pub candidates: Vec<String>,
    pub examples: Vec<InContextExample>,
}

/// Builds the annotated image and prompt text for one frame.
///
/// The prompt text matches the fixed templates byte-for-byte, with the
/// candidate list and the output-format illustration as the substitution
/// points. Color assignment is deterministic by candidate index.
pub fn build_prompt(
    frame_index: usize,
    masks: &FrameMasks,
    candidates: &[String],
) -> Result<ContactQuery, ContactError> {
    if candidates.is_empty() {
        return Err(ContactError::NoCandidates);
    }
    let mut image = AnnotatedImage::blank(masks.width, masks.height);
    for (i, mask) in masks.objects.iter().enumerate() {
        image.paint_mask(mask, CANDIDATE_PALETTE[i % CANDIDATE_PALETTE.len()]);
    }
    image.paint_mask(&masks.left_hand, [200, 255, 200]);
    image.paint_mask(&masks.right_hand, [255, 200, 200]);
    if let Some((cx, cy)) = centroid(&masks.left_hand) {
        image.paint_dot(cx, cy, LEFT_DOT);
    }
    if let Some((cx, cy)) = centroid(&masks.right_hand) {
        image.paint_dot(cx, cy, RIGHT_DOT);
    }

    let mut user = String::with_capacity(USER_PRE.len() + USER_MID.len() + USER_POST.len() + 256);
    user.push_str(USER_PRE);
    for (i, name) in candidates.iter().enumerate() {
        user.push_str(&format!("{}. {}\n", i + 1, name));
    }
    user.push_str(USER_MID);
    user.push_str(&format_output_illustration(candidates));
    user.push_str(USER_POST);

    Ok(ContactQuery {
        frame_index,
        system: SYSTEM_PROMPT.to_string(),
        user,
        image,
        candidates: candidates.to_vec(),
        examples: default_examples(),
    })
}

/// The output-format illustration: the right hand touches the first
/// candidate and, when there are at least two, the left hand touches the
/// last; everything else is zero. For three candidates named obj1..obj3
/// this reproduces the reference template exactly.
fn format_output_illustration(candidates: &[String]) -> String {
    let n = candidates.len();
    let mut out = String::from("{\n");
    for (i, name) in candidates.iter().enumerate() {
        let right = u8::from(i == 0);
        let left = u8::from(n >= 2 && i == n - 1);
        out.push_str(&format!("  \"{name}\": {{\"left\": {left}, \"right\": {right}}}"));
        if i + 1 < n {
            out.push(',');
        }
        out.push('\n');
    }
    out.push('}');
    out
}

/// Five deterministic in-context calibration examples: small synthetic
/// annotated frames with their expected answers.
pub fn default_examples() -> Vec<InContextExample> {
    (0..5)
        .map(|i| {
            let mut image = AnnotatedImage::blank(64, 64);
            // A candidate blob and a hand blob; they touch in odd examples.
            let mut bits = vec![false; 64 * 64];
            for y in 20..36u32 {
                for x in 10..26u32 {
                    bits[(y * 64 + x) as usize] = true;
                }
            }
            let object = RleMask::from_bitmap(64, 64, &bits);
            let mut hand_bits = vec![false; 64 * 64];
            let hx = if i % 2 == 1 { 24 } else { 40 };
            for y in 22..34u32 {
                for x in hx..hx + 12 {
                    hand_bits[(y * 64 + x) as usize] = true;
                }
            }
            let hand = RleMask::from_bitmap(64, 64, &hand_bits);
            image.paint_mask(&object, CANDIDATE_PALETTE[0]);
            image.paint_mask(&hand, [255, 200, 200]);
            if let Some((cx, cy)) = centroid(&hand) {
                image.paint_dot(cx, cy, RIGHT_DOT);
            }
            let touching = i % 2 == 1;
            InContextExample {
                image,
                expected_json: format!(
                    "{{\n  \"obj1\": {{\"left\": 0, \"right\": {}}}\n}}",
                    u8::from(touching)
                ),
            }
        })
        .collect()
}

//! Scenario scripts and dataset assembly.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use worldgrip_core::{
    window_split, CameraFrame, CameraTrack, ContactTrack, HandState, HandTrack, Intrinsics,
    MotionWindow, ObjectPose, ObjectTemplate, ObjectTrack, ObsFrame, Observations,
    SequenceBundle, Side, ARTIC_DIMS, JOINT_COUNT,
};
use worldgrip_geometry::bps::BPS_DEFAULT_K;
use worldgrip_geometry::canonical::canonicalize_window;
use worldgrip_geometry::camera::{in_image, project_point};
use worldgrip_geometry::mesh::{box_mesh, icosphere, TriMesh};
use worldgrip_geometry::se3::{rot9_from_mat3, rotation_from_axis_angle, SE3};
use worldgrip_geometry::{bps_encode, KinematicHand, StandardHand};

use crate::render::render_masks;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    PickPlace,
    Carry,
    Handoff,
    Idle,
}

impl Scenario {
    pub fn parse(name: &str) -> Option<Scenario> {
        match name {
            "pick_place" => Some(Scenario::PickPlace),
            "carry" => Some(Scenario::Carry),
            "handoff" => Some(Scenario::Handoff),
            "idle" => Some(Scenario::Idle),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::PickPlace => "pick_place",
            Scenario::Carry => "carry",
            Scenario::Handoff => "handoff",
            Scenario::Idle => "idle",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub length: usize,
    pub fps: f64,
    pub labeled_rate_fps: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub render_observations: bool,
    /// Pre-grasp dwell length in frames for pick-style scenarios; the hand
    /// hovers just above the latch range, so grasp timing stays ambiguous
    /// under conditioning noise. `None` draws it from the seed.
    pub pick_dwell: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            length: 150,
            fps: 30.0,
            labeled_rate_fps: 3.0,
            image_width: 240,
            image_height: 180,
            render_observations: true,
            pick_dwell: None,
        }
    }
}

/// A scripted contact span: the hand holds the object rigidly over
/// `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraspSpan {
    pub side: Side,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct SynthSequence {
    pub bundle: SequenceBundle,
    pub template: ObjectTemplate,
    pub spans: Vec<GraspSpan>,
    pub scenario: Scenario,
}

const WORKSPACE: [f64; 3] = [0.6, 0.0, 0.75];
/// Clearance between hand and object outside contact spans, meters.
const PREGRASP_BACKOFF: f64 = 0.03;
/// Approach paths aim slightly past the surface so the proximity latch
/// always triggers on a slow, ambiguous final approach.
const APPROACH_OVERSHOOT: f64 = 0.002;
/// Contact latches when the closest joint comes within this distance,
/// matching the proximity oracle exactly.
const CONTACT_LATCH: f64 = 0.005;
/// Upper bound of the seeded pre-grasp dwell, frames.
pub const MAX_DWELL: usize = 18;
/// Stationary-object jitter amplitude, meters (well under the 5 mm oracle).
const REST_NOISE: f64 = 0.0004;

/// Generates one fully-scripted sequence with ground truth and observations.
pub fn generate_sequence(scenario: Scenario, seed: u64, config: &SynthConfig) -> SynthSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
    let hand = StandardHand::default();
    let n = config.length;

    let template = make_template(&mut rng, seed);
    let mesh = TriMesh::from_template(&template).unwrap();
    let half_height = mesh
        .vertices
        .iter()
        .map(|v| v.z.abs())
        .fold(0.0f64, f64::max);

    // Object rest poses.
    let rest_a = Vector3::new(
        WORKSPACE[0] + rng.random::<f64>() * 0.08 - 0.04,
        WORKSPACE[1] + rng.random::<f64>() * 0.2 - 0.1,
        WORKSPACE[2] + half_height,
    );
    let move_dir = {
        let a = rng.random::<f64>() * std::f64::consts::TAU;
        Vector3::new(0.25 * a.cos(), 0.25 * a.sin(), 0.0)
    };
    let rest_b = rest_a + move_dir + Vector3::new(0.0, 0.0, 0.0);
    let rest_rot = rotation_from_axis_angle(&[0.0, 0.0, rng.random::<f64>() * 1.2 - 0.6]);

    let dwell = config
        .pick_dwell
        .unwrap_or_else(|| (rng.random::<f64>() * MAX_DWELL as f64) as usize);
    let script = build_script(scenario, n, &rest_a, &rest_b, &rest_rot, dwell);
    let query = worldgrip_geometry::mesh::MeshQuery::new(mesh.clone());

    // Grasp geometry: the curled fingertip leads the approach and lands on
    // the object's top surface.
    let grasp_artic = grasp_articulation();
    let mut tracks = ScriptedTracks::new(n, config.fps);
    let mut object_world = Vec::with_capacity(n);

    // Hand hover anchors.
    let hover = [
        rest_a + Vector3::new(-0.12, -0.16, 0.18),
        rest_a + Vector3::new(-0.12, 0.16, 0.18),
    ];

    // Per-hand grasp orientation: palm roughly facing down.
    let grasp_orient = [
        [-0.35, 0.5, 2.6], // left
        [0.35, 0.5, -2.6], // right
    ];

    // Grasp anchor: the lowest joint of the fully-curled hand leads the
    // approach and is what lands on the surface (anchoring on any other
    // joint would let a longer finger cross the contact latch early or
    // penetrate the mesh during carries).
    let grasp_anchor: [Vector3<f64>; 2] = std::array::from_fn(|s| {
        let probe = HandState {
            side: if s == 0 { Side::Left } else { Side::Right },
            global_orient: grasp_orient[s],
            translation: [0.0; 3],
            articulation: grasp_articulation(),
            shape: [0.0; 10],
        };
        let joints = hand.fk(&probe);
        let lowest = joints
            .iter()
            .min_by(|a, b| a[2].partial_cmp(&b[2]).unwrap())
            .unwrap();
        Vector3::new(lowest[0], lowest[1], lowest[2])
    });

    let mut rel_pose: [Option<SE3>; 2] = [None, None];
    // Proximity-latched contact state: a grasp begins exactly when the
    // closest joint of a reaching hand crosses the oracle threshold, and
    // ends when the schedule switches the hand away from a grasp intent.
    // While latched, the wrist and articulation freeze relative to the
    // object so every contact span is exactly rigid.
    let mut latched = [false; 2];
    let mut latch_start = [0usize; 2];
    let mut held_wrist: [Option<Vector3<f64>>; 2] = [None, None];
    let mut held_artic: [Option<[f64; ARTIC_DIMS]>; 2] = [None, None];
    let mut spans: Vec<GraspSpan> = Vec::new();

    for t in 0..n {
        let frame = script.frame(t);

        // Release hands whose schedule left the grasp intent.
        for s in 0..2 {
            if latched[s] && !grasp_intent(&frame.hands[s].mode) {
                spans.push(GraspSpan {
                    side: if s == 0 { Side::Left } else { Side::Right },
                    start: latch_start[s],
                    end: t,
                });
                latched[s] = false;
                held_wrist[s] = None;
                held_artic[s] = None;
                rel_pose[s] = None;
            }
        }

        // Scheduled hand states (frozen articulation while latched, frozen
        // wrist for a latched hand still in its approach window).
        let mut states = [HandState::rest(Side::Left), HandState::rest(Side::Right)];
        for (s, side) in Side::both().iter().enumerate() {
            let phase = frame.hands[s];
            let artic = held_artic[s].unwrap_or_else(|| blend_artic(&grasp_artic, phase.curl));
            let orient = grasp_orient[s];
            let mut state = HandState {
                side: *side,
                global_orient: orient,
                translation: [0.0; 3],
                articulation: artic,
                shape: [0.0; 10],
            };
            let tip_offset = grasp_anchor[s];

            let wrist = match phase.mode {
                HandMode::Hover { sway } => {
                    hover[s]
                        + Vector3::new(
                            0.015 * (t as f64 * 0.11 + sway).sin(),
                            0.015 * (t as f64 * 0.07 + sway * 1.7).cos(),
                            0.01 * (t as f64 * 0.05 + sway).sin(),
                        )
                }
                HandMode::Approach { target, progress } => {
                    // Two segments: a reach to a staging point directly
                    // above the grasp, then a slow vertical descent. The
                    // vertical tail keeps lateral joints clear of the mesh
                    // and makes the touch moment ambiguous under
                    // conditioning noise. Once latched the wrist holds.
                    if let Some(held) = held_wrist[s] {
                        held
                    } else {
                        let surface =
                            grasp_surface_point(&SE3::new(rest_rot, target), half_height);
                        let touch =
                            surface - Vector3::new(0.0, 0.0, APPROACH_OVERSHOOT) - tip_offset;
                        approach_path(&hover[s], &touch, progress)
                    }
                }
                HandMode::Retreat { anchor, progress } => {
                    let surface = grasp_surface_point(&SE3::new(rest_rot, anchor), half_height);
                    let pregrasp = surface + Vector3::new(0.0, 0.0, PREGRASP_BACKOFF) - tip_offset;
                    lerp_minjerk(&pregrasp, &hover[s], progress)
                }
                HandMode::CarryTo { from, to, progress } => {
                    let surface_from =
                        grasp_surface_point(&SE3::new(rest_rot, from), half_height);
                    let surface_to = grasp_surface_point(&SE3::new(rest_rot, to), half_height);
                    let start = surface_from - tip_offset;
                    let end = surface_to - tip_offset;
                    let mut p = lerp_minjerk(&start, &end, progress);
                    // Arc upward while carrying.
                    p.z += 0.06 * (progress * std::f64::consts::PI).sin();
                    p
                }
            };
            state.translation = [wrist.x, wrist.y, wrist.z];
            states[s] = state;
        }

        // The earliest-latched hand drives the object.
        let driver = (0..2)
            .filter(|&s| latched[s])
            .min_by_key(|&s| latch_start[s]);
        let object_pose = match driver {
            Some(s) => {
                let wrist_pose = wrist_se3(&states[s]);
                let rel = rel_pose[s].expect("driver has a recorded grasp pose");
                wrist_pose.compose(&rel)
            }
            None => {
                // Sub-millimeter jitter while resting.
                let jitter = Vector3::new(
                    (rng.random::<f64>() - 0.5) * 2.0 * REST_NOISE,
                    (rng.random::<f64>() - 0.5) * 2.0 * REST_NOISE,
                    (rng.random::<f64>() - 0.5) * 2.0 * REST_NOISE,
                );
                SE3::new(rest_rot, frame.object_rest + jitter)
            }
        };

        // Hands latched to a driven object ride along rigidly.
        for s in 0..2 {
            if latched[s] && driver != Some(s) {
                if let Some(rel) = rel_pose[s] {
                    let wrist_pose = object_pose.compose(&rel.inverse());
                    states[s].translation = wrist_pose.trans3();
                }
            }
        }

        // New latches: measured against the object pose of this frame, so
        // the scripted contact equals the proximity oracle exactly.
        let inv_pose = object_pose.inverse();
        for s in 0..2 {
            if latched[s] || !grasp_intent(&frame.hands[s].mode) {
                continue;
            }
            let joints = hand.fk(&states[s]);
            let min_d = joints
                .iter()
                .map(|j| query.distance(&inv_pose.apply(&Vector3::new(j[0], j[1], j[2]))))
                .fold(f64::INFINITY, f64::min);
            if min_d < CONTACT_LATCH {
                latched[s] = true;
                latch_start[s] = t;
                rel_pose[s] = Some(wrist_se3(&states[s]).inverse().compose(&object_pose));
                held_artic[s] = Some(states[s].articulation);
                if matches!(frame.hands[s].mode, HandMode::Approach { .. }) {
                    held_wrist[s] = Some(Vector3::from_column_slice(&states[s].translation));
                }
            }
        }

        let contact = [
            if latched[0] { 1.0 } else { 0.0 },
            if latched[1] { 1.0 } else { 0.0 },
        ];
        tracks.push(states, contact, &hand);
        object_world.push(object_pose);
    }
    for s in 0..2 {
        if latched[s] {
            spans.push(GraspSpan {
                side: if s == 0 { Side::Left } else { Side::Right },
                start: latch_start[s],
                end: n,
            });
        }
    }
    spans.sort_by_key(|sp| (sp.start, sp.side.index()));

    let camera = make_camera(config, seed, n, scenario, &object_world);

    let object = ObjectTrack {
        poses: object_world
            .iter()
            .map(|p| ObjectPose {
                rot9: p.rot9(),
                translation: p.trans3(),
            })
            .collect(),
    };

    let hands = HandTrack::with_derived_velocities(tracks.frames, tracks.joints, config.fps);
    let contact = ContactTrack::new(tracks.contact);

    let mut bundle = SequenceBundle {
        fps: config.fps,
        hands,
        object,
        contact,
        camera,
        observations: Observations {
            frames: vec![],
            rate_fps: config.labeled_rate_fps,
        },
    };

    if config.render_observations {
        bundle.observations = make_observations(&bundle, &template, config);
    }

    SynthSequence {
        bundle,
        template,
        spans,
        scenario,
    }
}

fn grasp_intent(mode: &HandMode) -> bool {
    matches!(mode, HandMode::Approach { .. } | HandMode::CarryTo { .. })
}

fn make_template(rng: &mut ChaCha8Rng, seed: u64) -> ObjectTemplate {
    let mesh = if seed % 2 == 0 {
        let sx = 0.05 + rng.random::<f64>() * 0.05;
        let sy = 0.04 + rng.random::<f64>() * 0.04;
        let sz = 0.08 + rng.random::<f64>() * 0.06;
        box_mesh(sx, sy, sz)
    } else {
        icosphere(0.035 + rng.random::<f64>() * 0.02, 2)
    };
    let bps_basis_seed = seed ^ 0xb5_0000;
    let bps = bps_encode(&mesh, bps_basis_seed, BPS_DEFAULT_K).unwrap();
    ObjectTemplate {
        vertices: mesh.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
        faces: mesh.faces.clone(),
        bps,
        bps_basis_seed,
    }
}

/// Top-center surface point of the posed object.
fn grasp_surface_point(pose: &SE3, half_height: f64) -> Vector3<f64> {
    pose.translation + Vector3::new(0.0, 0.0, half_height)
}

fn wrist_se3(state: &HandState) -> SE3 {
    SE3::new(
        rotation_from_axis_angle(&state.global_orient),
        Vector3::new(
            state.translation[0],
            state.translation[1],
            state.translation[2],
        ),
    )
}

fn grasp_articulation() -> [f64; ARTIC_DIMS] {
    let mut artic = [0.0; ARTIC_DIMS];
    for f in 0..5 {
        artic[f] = 1.1; // curl every finger
    }
    artic[5] = 0.2;
    artic
}

fn blend_artic(target: &[f64; ARTIC_DIMS], amount: f64) -> [f64; ARTIC_DIMS] {
    let mut out = [0.0; ARTIC_DIMS];
    for k in 0..ARTIC_DIMS {
        out[k] = target[k] * amount;
    }
    out
}

fn lerp_minjerk(a: &Vector3<f64>, b: &Vector3<f64>, s: f64) -> Vector3<f64> {
    let s = s.clamp(0.0, 1.0);
    let w = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
    a + (b - a) * w
}

/// Fraction of the approach spent reaching the staging point above the
/// grasp; the remainder is a vertical descent.
const APPROACH_SPLIT: f64 = 0.8;
/// Height of the staging point above the touch pose, meters.
const APPROACH_CLEARANCE: f64 = 0.08;
/// Approach progress whose descent height sits just above the contact
/// latch (about 12 mm over the touch pose).
const HOLD_PROGRESS: f64 = 0.943;

fn approach_path(hover: &Vector3<f64>, touch: &Vector3<f64>, s: f64) -> Vector3<f64> {
    let above = touch + Vector3::new(0.0, 0.0, APPROACH_CLEARANCE);
    if s <= APPROACH_SPLIT {
        lerp_minjerk(hover, &above, s / APPROACH_SPLIT)
    } else {
        lerp_minjerk(&above, touch, (s - APPROACH_SPLIT) / (1.0 - APPROACH_SPLIT))
    }
}

#[derive(Debug, Clone, Copy)]
enum HandMode {
    Hover {
        sway: f64,
    },
    /// Move from hover toward the pre-grasp point above the object
    /// anchored at `target`.
    Approach {
        target: Vector3<f64>,
        progress: f64,
    },
    /// Back away from the object anchored at `anchor` toward hover.
    Retreat {
        anchor: Vector3<f64>,
        progress: f64,
    },
    /// Carry the grasped object from one anchor to another.
    CarryTo {
        from: Vector3<f64>,
        to: Vector3<f64>,
        progress: f64,
    },
}

#[derive(Debug, Clone, Copy)]
struct HandPhase {
    mode: HandMode,
    curl: f64,
}

struct FramePlan {
    hands: [HandPhase; 2],
    object_rest: Vector3<f64>,
}

struct Script {
    frames: Vec<FramePlan>,
}

impl Script {
    fn frame(&self, t: usize) -> &FramePlan {
        &self.frames[t]
    }
}

fn build_script(
    scenario: Scenario,
    n: usize,
    rest_a: &Vector3<f64>,
    rest_b: &Vector3<f64>,
    _rest_rot: &Matrix3<f64>,
    dwell: usize,
) -> Script {
    let frac = |f: f64| ((n as f64 * f) as usize).min(n.saturating_sub(1));
    let mut frames = Vec::with_capacity(n);

    let hover_phase = |sway: f64| HandPhase {
        mode: HandMode::Hover { sway },
        curl: 0.1,
    };

    match scenario {
        Scenario::Idle => {
            for _t in 0..n {
                frames.push(FramePlan {
                    hands: [hover_phase(0.0), hover_phase(2.0)],
                    object_rest: *rest_a,
                });
            }
        }
        Scenario::PickPlace => {
            // Right hand: reach to just above the object, dwell there for
            // the configured number of frames, descend onto it, hold until
            // a fixed carry start, then carry, release, retreat. Only the
            // touch moment moves with `dwell` (by roughly a centimeter of
            // hand height inside a fixed window), so grasp timing stays
            // ambiguous under conditioning noise while everything before
            // and after is unchanged.
            let t_reach = frac(0.05);
            let t_hold = frac(0.16);
            let descent = 6usize;
            let dwell = dwell.min(MAX_DWELL);
            let t_descend = t_hold + dwell;
            let t_carry = (t_hold + MAX_DWELL + descent).min(n.saturating_sub(20));
            let (t_release, t_away) = (frac(0.70), frac(0.90));
            for t in 0..n {
                let right = if t < t_reach {
                    hover_phase(2.0)
                } else if t < t_hold {
                    let p = (t - t_reach) as f64 / (t_hold - t_reach) as f64;
                    HandPhase {
                        mode: HandMode::Approach {
                            target: *rest_a,
                            progress: p * HOLD_PROGRESS,
                        },
                        // Fully curled halfway down, so the grasp anchor
                        // geometry is settled long before the latch range.
                        curl: 0.1 + 0.9 * (2.0 * p).min(1.0),
                    }
                } else if t < t_descend {
                    HandPhase {
                        mode: HandMode::Approach {
                            target: *rest_a,
                            progress: HOLD_PROGRESS,
                        },
                        curl: 1.0,
                    }
                } else if t < t_carry {
                    // Descend and then hold on the object (the latch freezes
                    // the wrist) until the shared carry start.
                    let p = ((t - t_descend) as f64 / descent as f64).min(1.0);
                    HandPhase {
                        mode: HandMode::Approach {
                            target: *rest_a,
                            progress: HOLD_PROGRESS + (1.0 - HOLD_PROGRESS) * p,
                        },
                        curl: 1.0,
                    }
                } else if t < t_release {
                    let p = (t - t_carry) as f64 / (t_release - 1 - t_carry) as f64;
                    HandPhase {
                        mode: HandMode::CarryTo {
                            from: *rest_a,
                            to: *rest_b,
                            progress: p.min(1.0),
                        },
                        curl: 1.0,
                    }
                } else if t < t_away {
                    let p = (t - t_release) as f64 / (t_away - t_release) as f64;
                    HandPhase {
                        mode: HandMode::Retreat {
                            anchor: *rest_b,
                            progress: p,
                        },
                        curl: 1.0 - 0.9 * p,
                    }
                } else {
                    hover_phase(2.0)
                };
                let object_rest = if t < t_carry { *rest_a } else { *rest_b };
                frames.push(FramePlan {
                    hands: [hover_phase(0.0), right],
                    object_rest,
                });
            }
        }
        Scenario::Carry => {
            // Right hand grasps early and swings the object out and back.
            let (t_grasp, t_release) = (frac(0.08), frac(0.92));
            for t in 0..n {
                let right = if t < t_grasp {
                    let p = t as f64 / t_grasp.max(1) as f64;
                    HandPhase {
                        mode: HandMode::Approach {
                            target: *rest_a,
                            progress: p,
                        },
                        curl: 0.1 + 0.9 * (2.0 * p).min(1.0),
                    }
                } else if t < t_release {
                    let p = (t - t_grasp) as f64 / (t_release - t_grasp) as f64;
                    let swing = (p * std::f64::consts::PI).sin();
                    let to = rest_a + (rest_b - rest_a) * swing + Vector3::new(0.0, 0.0, 0.05 * swing);
                    HandPhase {
                        mode: HandMode::CarryTo {
                            from: *rest_a,
                            to,
                            progress: 1.0,
                        },
                        curl: 1.0,
                    }
                } else {
                    let p = (t - t_release) as f64 / (n - t_release).max(1) as f64;
                    HandPhase {
                        mode: HandMode::Retreat {
                            anchor: *rest_a,
                            progress: p,
                        },
                        curl: 1.0 - 0.9 * p,
                    }
                };
                frames.push(FramePlan {
                    hands: [hover_phase(0.0), right],
                    object_rest: *rest_a,
                });
            }
        }
        Scenario::Handoff => {
            // Left carries to the middle, both hold during the overlap, the
            // right takes over.
            let mid = (rest_a + rest_b) / 2.0;
            let (l_grasp, overlap_start, l_release, r_release) =
                (frac(0.15), frac(0.45), frac(0.52), frac(0.85));
            for t in 0..n {
                let left = if t < l_grasp {
                    let p = t as f64 / l_grasp.max(1) as f64;
                    HandPhase {
                        mode: HandMode::Approach {
                            target: *rest_a,
                            progress: p,
                        },
                        curl: 0.1 + 0.9 * (2.0 * p).min(1.0),
                    }
                } else if t < overlap_start {
                    let p = (t - l_grasp) as f64 / (overlap_start - 1 - l_grasp) as f64;
                    HandPhase {
                        mode: HandMode::CarryTo {
                            from: *rest_a,
                            to: mid,
                            progress: p.min(1.0),
                        },
                        curl: 1.0,
                    }
                } else if t < l_release {
                    // Hold still through the exchange.
                    HandPhase {
                        mode: HandMode::CarryTo {
                            from: *rest_a,
                            to: mid,
                            progress: 1.0,
                        },
                        curl: 1.0,
                    }
                } else {
                    let p = (t - l_release) as f64 / (n - l_release).max(1) as f64;
                    HandPhase {
                        mode: HandMode::Retreat {
                            anchor: mid,
                            progress: p.min(1.0),
                        },
                        curl: 1.0 - 0.9 * p.min(1.0),
                    }
                };
                let right = if t < overlap_start.saturating_sub(12) {
                    hover_phase(2.0)
                } else if t < overlap_start {
                    let window = 12.0;
                    let p = (t + 12 - overlap_start) as f64 / window;
                    HandPhase {
                        mode: HandMode::Approach {
                            target: mid,
                            progress: p,
                        },
                        curl: 0.1 + 0.9 * (2.0 * p).min(1.0),
                    }
                } else if t < r_release {
                    let p = if t < l_release {
                        0.0
                    } else {
                        (t - l_release) as f64 / (r_release - l_release) as f64
                    };
                    HandPhase {
                        mode: HandMode::CarryTo {
                            from: mid,
                            to: *rest_b,
                            progress: p,
                        },
                        curl: 1.0,
                    }
                } else {
                    let p = (t - r_release) as f64 / (n - r_release).max(1) as f64;
                    HandPhase {
                        mode: HandMode::Retreat {
                            anchor: *rest_b,
                            progress: p.min(1.0),
                        },
                        curl: 1.0 - 0.9 * p.min(1.0),
                    }
                };
                let object_rest = if t < l_grasp { *rest_a } else { *rest_b };
                frames.push(FramePlan {
                    hands: [left, right],
                    object_rest,
                });
            }
        }
    }

    Script { frames }
}

struct ScriptedTracks {
    frames: Vec<[HandState; 2]>,
    joints: Vec<[[[f64; 3]; JOINT_COUNT]; 2]>,
    contact: Vec<[f64; 2]>,
}

impl ScriptedTracks {
    fn new(n: usize, _fps: f64) -> Self {
        ScriptedTracks {
            frames: Vec::with_capacity(n),
            joints: Vec::with_capacity(n),
            contact: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, states: [HandState; 2], contact: [f64; 2], hand: &StandardHand) {
        let joints = [hand.fk(&states[0]), hand.fk(&states[1])];
        self.frames.push(states);
        self.joints.push(joints);
        self.contact.push(contact);
    }
}

fn make_camera(
    config: &SynthConfig,
    seed: u64,
    n: usize,
    scenario: Scenario,
    object_world: &[SE3],
) -> CameraTrack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xca0_0002);
    let base_yaw = rng.random::<f64>() * 0.6 - 0.3;
    let mut frames = Vec::with_capacity(n);
    let workspace = Vector3::new(WORKSPACE[0], WORKSPACE[1], WORKSPACE[2]);
    for t in 0..n {
        let sway = t as f64 * 0.02;
        let yaw = base_yaw + 0.12 * sway.sin();
        // Head position behind and above the desk.
        let eye = Vector3::new(
            -0.15 + 0.04 * (sway * 0.7).cos(),
            0.25 * yaw.sin(),
            1.35 + 0.03 * (sway * 0.5).sin(),
        );
        // Carry scenarios sweep the gaze away mid-sequence so the object
        // leaves the view.
        let mut look_at = object_world
            .get(t)
            .map(|p| p.translation)
            .unwrap_or(workspace);
        if scenario == Scenario::Carry {
            let sweep = sweep_amount(t, n);
            look_at += Vector3::new(-0.9 * sweep, 1.4 * sweep, 0.6 * sweep);
        }
        frames.push(look_at_camera(&eye, &look_at));
    }
    CameraTrack {
        frames,
        intrinsics: Intrinsics {
            fx: 210.0,
            fy: 210.0,
            cx: config.image_width as f64 / 2.0,
            cy: config.image_height as f64 / 2.0,
        },
        width: config.image_width,
        height: config.image_height,
        gravity_world: [0.0, 0.0, -1.0],
    }
}

fn sweep_amount(t: usize, n: usize) -> f64 {
    let (start, peak, end) = (n * 2 / 5, n / 2, n * 3 / 5);
    if t < start || t > end {
        0.0
    } else if t <= peak {
        (t - start) as f64 / (peak - start).max(1) as f64
    } else {
        1.0 - (t - peak) as f64 / (end - peak).max(1) as f64
    }
}

/// Builds a world-from-camera pose looking from `eye` toward `target`
/// (camera +z forward, +x right, +y down; world up is +z).
fn look_at_camera(eye: &Vector3<f64>, target: &Vector3<f64>) -> CameraFrame {
    let forward = (target - eye).normalize();
    let world_up = Vector3::new(0.0, 0.0, 1.0);
    let right = forward.cross(&world_up).normalize();
    let down = forward.cross(&right).normalize();
    let rotation = Matrix3::from_columns(&[right, down, forward]);
    CameraFrame {
        rotation: rot9_from_mat3(&rotation),
        translation: [eye.x, eye.y, eye.z],
    }
}

fn make_observations(
    bundle: &SequenceBundle,
    template: &ObjectTemplate,
    config: &SynthConfig,
) -> Observations {
    let step = (config.fps / config.labeled_rate_fps).round().max(1.0) as usize;
    let mut frames = Vec::new();
    let hand = StandardHand::default();
    let _ = &hand;
    for t in (0..bundle.len()).step_by(step) {
        let masks = render_masks(bundle, template, t);
        let cam = &bundle.camera.frames[t];
        let cam_pose = SE3::from_rot9_trans(&cam.rotation, &cam.translation);
        let mut joints_2d = [[[0.0; 2]; JOINT_COUNT]; 2];
        let mut visibility = [[false; JOINT_COUNT]; 2];
        for s in 0..2 {
            for j in 0..JOINT_COUNT {
                let p = bundle.hands.joints[t][s][j];
                let proj = project_point(
                    &Vector3::new(p[0], p[1], p[2]),
                    &cam_pose,
                    &bundle.camera.intrinsics,
                );
                joints_2d[s][j] = proj.uv;
                visibility[s][j] = proj.valid
                    && in_image(&proj.uv, bundle.camera.width, bundle.camera.height);
            }
        }
        let object_mask = if masks.object.is_empty() {
            None
        } else {
            Some(masks.object)
        };
        frames.push(ObsFrame {
            frame_index: t,
            object_mask,
            hand_joints_2d: joints_2d,
            visibility,
            contact: bundle.contact.frames[t],
        });
    }
    Observations {
        frames,
        rate_fps: config.labeled_rate_fps,
    }
}

/// A canonicalized training window plus its template.
#[derive(Debug, Clone)]
pub struct TrainingItem {
    pub window: MotionWindow,
    pub template: ObjectTemplate,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    pub items: Vec<TrainingItem>,
}

const SCENARIO_MIX: [Scenario; 4] = [
    Scenario::PickPlace,
    Scenario::Carry,
    Scenario::Handoff,
    Scenario::Idle,
];

/// Generates `n_sequences` sequences (scenario mix cycled), canonicalizes
/// each, and windows them at T=120 stride 60.
pub fn make_dataset(n_sequences: usize, seed: u64, window_len: usize, stride: usize) -> TrainingSet {
    let mut items = Vec::new();
    let config = SynthConfig {
        render_observations: false,
        ..SynthConfig::default()
    };
    for i in 0..n_sequences {
        let scenario = SCENARIO_MIX[i % SCENARIO_MIX.len()];
        let seq = generate_sequence(scenario, seed.wrapping_add(i as u64), &config);
        let (windows, _plan) =
            window_split(&seq.bundle, window_len, stride).expect("window split");
        for window in windows {
            let (canonical, _camera, _frame) =
                canonicalize_window(&window, &seq.bundle.camera).expect("canonicalize");
            items.push(TrainingItem {
                window: canonical,
                template: seq.template.clone(),
            });
        }
    }
    TrainingSet { items }
}

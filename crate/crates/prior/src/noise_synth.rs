//! Synthesis of imperfect conditioning hand tracks.
//!
//! Perturbs ground-truth hand parameters with one trajectory-level draw plus
//! per-frame draws, recomputes forward kinematics, and drops random frame
//! spans to mimic occlusion and truncation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use worldgrip_core::{HandTrack, ARTIC_DIMS};
use worldgrip_geometry::KinematicHand;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSynthConfig {
    /// Trajectory-level sigma: rotation (rad), translation (m), articulation.
    pub traj_sigma: [f64; 3],
    /// Per-frame sigma triple.
    pub frame_sigma: [f64; 3],
    /// Probability that a new drop span starts at a given frame.
    pub drop_prob: f64,
    /// Geometric continuation parameter; mean span length is 1/p.
    pub drop_span_p: f64,
}

impl Default for NoiseSynthConfig {
    fn default() -> Self {
        NoiseSynthConfig {
            traj_sigma: [0.1, 0.05, 0.2],
            frame_sigma: [0.02, 0.01, 0.05],
            drop_prob: 0.02,
            drop_span_p: 0.1,
        }
    }
}

impl NoiseSynthConfig {
    pub fn zero() -> Self {
        NoiseSynthConfig {
            traj_sigma: [0.0; 3],
            frame_sigma: [0.0; 3],
            drop_prob: 0.0,
            drop_span_p: 0.1,
        }
    }
}

/// A noisy conditioning track plus per-frame per-hand drop flags.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyHands {
    pub track: HandTrack,
    /// `dropped[t][side]`: the frame is flagged missing for that hand.
    pub dropped: Vec<[bool; 2]>,
}

impl NoisyHands {
    pub fn slice(&self, start: usize, len: usize) -> NoisyHands {
        NoisyHands {
            track: self.track.slice(start, len),
            dropped: self.dropped[start..start + len].to_vec(),
        }
    }

    /// Wraps an exact track as perfect conditioning (no noise, no drops).
    pub fn exact(track: HandTrack) -> NoisyHands {
        let dropped = vec![[false; 2]; track.len()];
        NoisyHands { track, dropped }
    }
}

/// Perturbs a ground-truth track; deterministic given the seed.
pub fn synthesize_noisy_hands(
    gt: &HandTrack,
    cfg: &NoiseSynthConfig,
    hand_model: &dyn KinematicHand,
    seed: u64,
) -> NoisyHands {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = gt.len();
    let normal = move |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    // One trajectory-level offset per hand.
    let mut traj_orient = [[0.0; 3]; 2];
    let mut traj_trans = [[0.0; 3]; 2];
    let mut traj_artic = [[0.0; ARTIC_DIMS]; 2];
    for s in 0..2 {
        for k in 0..3 {
            traj_orient[s][k] = normal(&mut rng) * cfg.traj_sigma[0];
            traj_trans[s][k] = normal(&mut rng) * cfg.traj_sigma[1];
        }
        for k in 0..ARTIC_DIMS {
            traj_artic[s][k] = normal(&mut rng) * cfg.traj_sigma[2];
        }
    }

    let mut frames = Vec::with_capacity(n);
    let mut joints = Vec::with_capacity(n);
    for t in 0..n {
        let mut pair = gt.frames[t].clone();
        for (s, state) in pair.iter_mut().enumerate() {
            for k in 0..3 {
                state.global_orient[k] +=
                    traj_orient[s][k] + normal(&mut rng) * cfg.frame_sigma[0];
                state.translation[k] += traj_trans[s][k] + normal(&mut rng) * cfg.frame_sigma[1];
            }
            // Keep the axis-angle inside its invariant bound.
            let norm = state
                .global_orient
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if norm >= 2.0 * std::f64::consts::PI {
                let scale = (2.0 * std::f64::consts::PI - 1e-9) / norm;
                for v in state.global_orient.iter_mut() {
                    *v *= scale;
                }
            }
            for k in 0..ARTIC_DIMS {
                state.articulation[k] += traj_artic[s][k] + normal(&mut rng) * cfg.frame_sigma[2];
            }
        }
        joints.push([hand_model.fk(&pair[0]), hand_model.fk(&pair[1])]);
        frames.push(pair);
    }

    // Drop spans, drawn independently per hand.
    let mut dropped = vec![[false; 2]; n];
    for s in 0..2 {
        let mut remaining = 0usize;
        for t in 0..n {
            if remaining > 0 {
                dropped[t][s] = true;
                remaining -= 1;
            } else if rng.random::<f64>() < cfg.drop_prob {
                dropped[t][s] = true;
                // Geometric continuation: mean span 1/p.
                remaining = 0;
                while rng.random::<f64>() > cfg.drop_span_p {
                    remaining += 1;
                }
            }
        }
    }

    NoisyHands {
        track: HandTrack::with_derived_velocities(frames, joints, gt.fps),
        dropped,
    }
}

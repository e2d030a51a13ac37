//! The training loop: DDPM objective with warm-up, auxiliary losses, seeded
//! template augmentation, and deterministic batching.

use nalgebra::Vector3;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use worldgrip_core::{ContactTrack, HandTrack, ObjectPose, ObjectTemplate, ObjectTrack};
use worldgrip_geometry::bps::bps_encode;
use worldgrip_geometry::mesh::{MeshQuery, TriMesh};
use worldgrip_geometry::se3::{rot9_from_mat3, SE3};
use worldgrip_geometry::{KinematicHand, StandardHand};

use crate::checkpoint::{Checkpoint, CheckpointHeader};
use crate::decoded::decode_normalized;
use crate::denoiser::{
    ambient_features, assemble_frame_inputs, conditioning_features, Denoiser, DenoiserConfig,
};
use crate::error::PriorError;
use crate::losses::{loss_consistency, loss_ddpm, loss_interaction, loss_smooth, snapshot_interaction};
use crate::nn::{AdamW, GradStore};
use crate::noise_synth::{synthesize_noisy_hands, NoiseSynthConfig};
use crate::schedule::{forward_diffuse, NoiseSchedule};
use crate::state::{pack_state, write_raw_frame, NormStats};

/// One canonicalized training window.
#[derive(Debug, Clone)]
pub struct TrainWindow {
    pub hands: HandTrack,
    pub object: ObjectTrack,
    pub contact: ContactTrack,
    pub template: ObjectTemplate,
}

#[derive(Debug, Clone, Default)]
pub struct TrainSet {
    pub windows: Vec<TrainWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Auxiliary loss weights are exactly zero for steps below this.
    pub warmup_steps: u64,
    pub lambda_inter: f64,
    pub lambda_const: f64,
    pub lambda_smooth: f64,
    /// Template augmentation: random canonical rotation plus translation
    /// jitter bounded by this many meters.
    pub template_jitter: f64,
    pub augment_template: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 1_000_000,
            batch_size: 4,
            lr: 2e-4,
            weight_decay: 0.01,
            warmup_steps: 10_000,
            lambda_inter: 1.0,
            lambda_const: 1.0,
            lambda_smooth: 0.1,
            template_jitter: 0.02,
            augment_template: true,
        }
    }
}

/// Auxiliary-loss weight multiplier for a given step: exactly zero during
/// warm-up, one afterwards.
pub fn aux_weight(step: u64, config: &TrainConfig) -> f64 {
    if step < config.warmup_steps {
        0.0
    } else {
        1.0
    }
}

/// Derives a per-purpose RNG stream; the complete training RNG state is
/// (seed, step), so resuming from a checkpoint is bit-exact.
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mixed = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(domain.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(index.wrapping_mul(0x94d0_49bb_1331_11eb));
    ChaCha8Rng::seed_from_u64(mixed)
}

pub struct TrainReport {
    pub losses: Vec<f64>,
    pub ddpm_losses: Vec<f64>,
}

/// Pooled normalization statistics over every frame of the training set.
pub fn compute_stats(set: &TrainSet, config: &DenoiserConfig) -> NormStats {
    let dims = config.layout.dims();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for w in &set.windows {
        for f in 0..w.hands.len() {
            let mut row = vec![0.0; dims];
            write_raw_frame(
                &mut row,
                &w.hands.frames[f],
                &w.object.poses[f],
                &w.contact.frames[f],
                config.layout,
            );
            rows.push(row);
        }
    }
    NormStats::from_rows(rows.iter().map(|r| r.as_slice()), dims)
}

/// Augmentation copies pooled into the statistics so normalized training
/// targets stay O(1) under random template poses.
const STATS_AUG_COPIES: usize = 4;

/// Statistics over the training distribution the model actually sees: when
/// template augmentation is on, object poses are pooled over several random
/// canonical template poses per window.
pub fn compute_training_stats(
    set: &TrainSet,
    config: &DenoiserConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<NormStats, PriorError> {
    if !train.augment_template {
        return Ok(compute_stats(set, config));
    }
    let dims = config.layout.dims();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (w_idx, w) in set.windows.iter().enumerate() {
        for copy in 0..STATS_AUG_COPIES {
            let mut rng = stream_rng(seed, 4, (w_idx * STATS_AUG_COPIES + copy) as u64);
            let aug = random_canonical_pose(&mut rng, train.template_jitter);
            let inv = aug.inverse();
            for f in 0..w.hands.len() {
                let p = &w.object.poses[f];
                let pose = SE3::from_rot9_trans(&p.rot9, &p.translation).compose(&inv);
                let adjusted = ObjectPose {
                    rot9: rot9_from_mat3(&pose.rotation),
                    translation: pose.trans3(),
                };
                let mut row = vec![0.0; dims];
                write_raw_frame(
                    &mut row,
                    &w.hands.frames[f],
                    &adjusted,
                    &w.contact.frames[f],
                    config.layout,
                );
                rows.push(row);
            }
        }
    }
    Ok(NormStats::from_rows(rows.iter().map(|r| r.as_slice()), dims))
}

struct ItemOutcome {
    loss: f64,
    ddpm: f64,
    grads: GradStore,
}

/// Trains a fresh model on the windows.
pub fn train(
    set: &TrainSet,
    denoiser_config: DenoiserConfig,
    train_config: TrainConfig,
    noise_synth: NoiseSynthConfig,
    seed: u64,
) -> Result<(Checkpoint, TrainReport), PriorError> {
    let init_seed = seed ^ 0x11e7;
    let model = Denoiser::new(denoiser_config.clone(), init_seed);
    let schedule = NoiseSchedule::cosine(1000);
    let stats = compute_training_stats(set, &denoiser_config, &train_config, seed)?;
    let optimizer = AdamW::new(
        &model.params,
        train_config.lr as f32,
        train_config.weight_decay as f32,
    );
    let checkpoint = Checkpoint {
        header: CheckpointHeader {
            denoiser: denoiser_config,
            schedule,
            stats,
            train: train_config,
            noise_synth,
            step: 0,
            seed,
            init_seed,
            tensors: vec![],
        },
        adam_m: optimizer.m.clone(),
        adam_v: optimizer.v.clone(),
        model,
    };
    resume(checkpoint, set, None)
}

/// Continues training an existing checkpoint up to `header.train.steps`
/// total steps (or `until` when given). Deterministic: a run interrupted and
/// resumed produces the same weights as an uninterrupted one.
pub fn resume(
    checkpoint: Checkpoint,
    set: &TrainSet,
    until: Option<u64>,
) -> Result<(Checkpoint, TrainReport), PriorError> {
    if set.windows.is_empty() {
        return Err(PriorError::EmptyDataset);
    }
    let Checkpoint {
        mut header,
        mut model,
        adam_m,
        adam_v,
    } = checkpoint;
    let mut optimizer = AdamW::new(
        &model.params,
        header.train.lr as f32,
        header.train.weight_decay as f32,
    );
    optimizer.m = adam_m;
    optimizer.v = adam_v;
    optimizer.step = header.step;

    let hand_model = StandardHand::default();
    let target_steps = until.unwrap_or(header.train.steps);
    let mut losses = Vec::new();
    let mut ddpm_losses = Vec::new();

    let mut step = header.step;
    while step < target_steps {
        let aux = aux_weight(step, &header.train);
        // Deterministic batch selection.
        let mut batch_rng = stream_rng(header.seed, 1, step);
        let batch: Vec<usize> = (0..header.train.batch_size)
            .map(|_| batch_rng.random_range(0..set.windows.len()))
            .collect();

        let model_ref = &model;
        let header_ref = &header;
        let outcomes: Vec<ItemOutcome> = batch
            .par_iter()
            .enumerate()
            .map(|(slot, &idx)| {
                train_item(
                    model_ref,
                    header_ref,
                    set,
                    idx,
                    step,
                    slot as u64,
                    aux,
                    &hand_model,
                )
            })
            .collect::<Result<Vec<_>, PriorError>>()?;

        // Deterministic reduction in slot order.
        let mut grads = GradStore::zeros_like(&model.params);
        let mut total = 0.0;
        let mut total_ddpm = 0.0;
        for o in &outcomes {
            grads.add_assign(&o.grads);
            total += o.loss;
            total_ddpm += o.ddpm;
        }
        let inv = 1.0 / header.train.batch_size as f64;
        grads.scale(inv as f32);
        total *= inv;
        total_ddpm *= inv;
        if !total.is_finite() {
            return Err(PriorError::NonFiniteLoss { step, value: total });
        }

        optimizer.apply(&mut model.params, &grads);
        losses.push(total);
        ddpm_losses.push(total_ddpm);
        step += 1;
    }

    header.step = step;
    Ok((
        Checkpoint {
            header,
            model,
            adam_m: optimizer.m.clone(),
            adam_v: optimizer.v.clone(),
        },
        TrainReport {
            losses,
            ddpm_losses,
        },
    ))
}

#[allow(clippy::too_many_arguments)]
fn train_item(
    model: &Denoiser,
    header: &CheckpointHeader,
    set: &TrainSet,
    idx: usize,
    step: u64,
    slot: u64,
    aux: f64,
    hand_model: &dyn KinematicHand,
) -> Result<ItemOutcome, PriorError> {
    let item = &set.windows[idx];
    let per_item = step.wrapping_mul(1024).wrapping_add(slot);

    // Template augmentation: a random canonical pose for the template, with
    // object poses counter-rotated so world geometry is unchanged.
    let (mesh, bps, object) = if header.train.augment_template {
        let mut rng = stream_rng(header.seed, 2, per_item);
        let aug = random_canonical_pose(&mut rng, header.train.template_jitter);
        augment_template(&item.template, &item.object, &aug)?
    } else {
        let mesh = TriMesh::from_template(&item.template)
            .map_err(|e| PriorError::Decode(e.to_string()))?;
        (mesh, item.template.bps.clone(), item.object.clone())
    };
    let query = MeshQuery::new(mesh);
    let bps_arr = ndarray::Array1::from_vec(bps.iter().map(|v| *v as f32).collect());

    // Clean state.
    let x0 = pack_state(
        &item.hands,
        &object,
        &item.contact,
        header.denoiser.layout,
        &header.stats,
    )?;

    // Conditioning.
    let noisy = synthesize_noisy_hands(
        &item.hands,
        &header.noise_synth,
        hand_model,
        splitmix(header.seed ^ 0xc0d, per_item),
    );
    let cond = conditioning_features(&noisy);

    // Diffusion.
    let mut step_rng = stream_rng(header.seed, 3, per_item);
    let n = step_rng.random_range(0..header.schedule.steps);
    let x0_f32 = x0.to_f32();
    let x_n = forward_diffuse(
        &x0_f32,
        n,
        &header.schedule,
        splitmix(header.seed ^ 0xd1f, per_item),
    )?;

    let ambient = ambient_features(
        &x_n,
        &header.stats,
        header.denoiser.layout,
        hand_model,
        &query,
    );
    let inputs = assemble_frame_inputs(&x_n, &cond, &ambient);
    let (x0_pred, head, cache) = model.forward(&inputs, n, &bps_arr);

    let (ddpm, mut grad_state) = loss_ddpm(&x0_pred, &x0_f32, header.schedule.loss_weights[n]);
    let mut total = ddpm;
    let mut grad_head = Array2::<f32>::zeros(head.raw_dim());

    if aux > 0.0 {
        let window = decode_normalized(
            &x0_pred,
            &header.stats,
            header.denoiser.layout,
            hand_model,
            true,
        );
        let snapshot = snapshot_interaction(&window, &query);
        let contact: Vec<[f64; 2]> = window
            .contact
            .iter()
            .map(|c| [c[0].clamp(0.0, 1.0), c[1].clamp(0.0, 1.0)])
            .collect();
        let (l_inter, g_inter) = loss_interaction(&window, &snapshot, &contact);
        let head_f64 = head.mapv(|v| v as f64);
        let (l_const, g_const_state, g_const_head) = loss_consistency(&window, &head_f64);
        let (l_smooth, g_smooth) = loss_smooth(&window);

        let li = aux * header.train.lambda_inter;
        let lc = aux * header.train.lambda_const;
        let ls = aux * header.train.lambda_smooth;
        total += li * l_inter + lc * l_const + ls * l_smooth;

        let gi = g_inter.to_normalized(&header.stats);
        let gc = g_const_state.to_normalized(&header.stats);
        let gs = g_smooth.to_normalized(&header.stats);
        grad_state = grad_state + gi * (li as f32) + gc * (lc as f32) + gs * (ls as f32);
        grad_head = g_const_head.mapv(|v| (v * lc) as f32);
    }

    let mut grads = GradStore::zeros_like(&model.params);
    model.backward(&cache, &inputs, &bps_arr, &grad_state, &grad_head, &mut grads);
    Ok(ItemOutcome {
        loss: total,
        ddpm,
        grads,
    })
}

fn splitmix(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform random rotation plus a small translation jitter.
pub fn random_canonical_pose(rng: &mut ChaCha8Rng, jitter: f64) -> SE3 {
    let normal = |rng: &mut ChaCha8Rng| -> f64 {
        let u1: f64 = rng.random::<f64>().max(1e-16);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let q = nalgebra::Quaternion::new(
        normal(rng),
        normal(rng),
        normal(rng),
        normal(rng),
    );
    let rotation = *nalgebra::UnitQuaternion::from_quaternion(q)
        .to_rotation_matrix()
        .matrix();
    let translation = Vector3::new(
        (rng.random::<f64>() * 2.0 - 1.0) * jitter,
        (rng.random::<f64>() * 2.0 - 1.0) * jitter,
        (rng.random::<f64>() * 2.0 - 1.0) * jitter,
    );
    SE3::new(rotation, translation)
}

/// Re-expresses the template in a new canonical pose and counter-adjusts the
/// object trajectory so world-space geometry is unchanged.
pub fn augment_template(
    template: &ObjectTemplate,
    object: &ObjectTrack,
    aug: &SE3,
) -> Result<(TriMesh, Vec<f64>, ObjectTrack), PriorError> {
    let mesh = TriMesh::from_template(template).map_err(|e| PriorError::Decode(e.to_string()))?;
    let vertices = mesh.vertices.iter().map(|v| aug.apply(v)).collect();
    let mesh = TriMesh::new(vertices, mesh.faces).map_err(|e| PriorError::Decode(e.to_string()))?;
    let bps = bps_encode(&mesh, template.bps_basis_seed, template.bps.len())
        .map_err(|e| PriorError::Decode(e.to_string()))?;
    let inv = aug.inverse();
    let poses = object
        .poses
        .iter()
        .map(|p| {
            let pose = SE3::from_rot9_trans(&p.rot9, &p.translation);
            let out = pose.compose(&inv);
            ObjectPose {
                rot9: rot9_from_mat3(&out.rotation),
                translation: out.trans3(),
            }
        })
        .collect();
    Ok((mesh, bps, ObjectTrack { poses }))
}

//! Long-sequence reconstruction: denoise overlapping windows in parallel,
//! blend them each diffusion step in the world frame, share shape
//! coefficients, refine the blended estimate under the guidance objective,
//! and update every window's posterior from it.

use nalgebra::Vector3;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use worldgrip_core::{CameraTrack, ObjectTemplate, Observations, Side};
use worldgrip_geometry::canonical::transform_camera_track;
use worldgrip_geometry::se3::{
    axis_angle_from_rotation, mat3_from_rot9, rot9_from_mat3, rotation_from_axis_angle,
};
use worldgrip_geometry::{GravityFrame, KinematicHand, SE3};
use worldgrip_prior::decoded::DecodedWindow;
use worldgrip_prior::sample::{posterior_mean_sigma, posterior_variance, selected_steps};
use worldgrip_prior::schedule::noise_like;
use worldgrip_prior::state::{denormalize, NormStats, StateLayout, CONTACT_OFFSET, OBJ_TRANS_OFFSET, ROT9_OFFSET};
use worldgrip_prior::{Checkpoint, NoisyHands, SamplerContext};

use crate::binding::{template_surface_points, ObservationBinding};
use crate::config::GuidanceConfig;
use crate::error::GuidanceError;
use crate::sampler::{
    clip_gradient, guided_sample, GuidanceReport, ObjectiveSet, Reconstruction, StepTrace,
};
use crate::{GUIDANCE_SURFACE_SAMPLES, GUIDANCE_SURFACE_SEED};

/// One window of the long sequence, ready for blending.
pub struct BlendInput {
    pub start: usize,
    pub len: usize,
    /// Conditioning hands in this window's own canonical frame.
    pub conditioning: NoisyHands,
    /// World-from-local anchor of the window's canonical frame.
    pub anchor: GravityFrame,
}

/// Reconstructs a full-length sequence from overlapping windows.
///
/// A single window degenerates to [`guided_sample`]; two or more windows
/// must overlap pairwise or the call fails with [`GuidanceError::NoOverlap`].
#[allow(clippy::too_many_arguments)]
pub fn blend_guided_sample(
    checkpoint: &Checkpoint,
    hand_model: &dyn KinematicHand,
    windows: Vec<BlendInput>,
    template: &ObjectTemplate,
    observations: &Observations,
    camera_world: &CameraTrack,
    config: &GuidanceConfig,
    seed: u64,
    fps: f64,
) -> Result<(Reconstruction, GuidanceReport), GuidanceError> {
    config.validate()?;
    if windows.is_empty() {
        return Err(GuidanceError::Config("no windows".into()));
    }
    if windows.len() == 1 {
        // Degenerate case: exactly the single-window guided sampler.
        let w = windows.into_iter().next().unwrap();
        let canonical_camera =
            transform_camera_track(camera_world, &w.anchor.local_from_world());
        let binding = ObservationBinding::new(observations, &canonical_camera, w.start, w.len);
        return guided_sample(
            checkpoint,
            hand_model,
            &w.conditioning,
            template,
            &binding,
            w.anchor,
            config,
            seed,
            fps,
        );
    }
    for pair in windows.windows(2) {
        if pair[1].start >= pair[0].start + pair[0].len {
            return Err(GuidanceError::NoOverlap);
        }
    }
    let started = std::time::Instant::now();
    let length = windows.last().map(|w| w.start + w.len).unwrap_or(0);
    let layout = checkpoint.header.denoiser.layout;
    let stats = &checkpoint.header.stats;
    let dims = layout.dims();

    // Per-frame normalized ramp weights.
    let ramp = |w: &BlendInput, local: usize| -> f64 {
        ((local + 1).min(w.len - local)) as f64
    };
    let mut weight_sum = vec![0.0f64; length];
    for w in &windows {
        for local in 0..w.len {
            weight_sum[w.start + local] += ramp(w, local);
        }
    }
    if weight_sum.iter().any(|&s| s <= 0.0) {
        return Err(GuidanceError::Config("uncovered frame in blend".into()));
    }

    // World-frame observation binding over the whole sequence.
    let binding = ObservationBinding::new(observations, camera_world, 0, length);
    let mesh = worldgrip_geometry::mesh::TriMesh::from_template(template)
        .map_err(GuidanceError::Geometry)?;
    let template_query = worldgrip_geometry::mesh::MeshQuery::new(mesh);
    let surface_points =
        template_surface_points(template, GUIDANCE_SURFACE_SAMPLES, GUIDANCE_SURFACE_SEED);
    let objectives = ObjectiveSet {
        config: *config,
        binding: Some(&binding),
        surface_points,
        template_query: &template_query,
        contact_target: None,
    };

    let contexts: Vec<SamplerContext> = windows
        .iter()
        .map(|w| SamplerContext::new(checkpoint, hand_model, &w.conditioning, template))
        .collect::<Result<_, _>>()?;

    let schedule = &checkpoint.header.schedule;
    let steps = selected_steps(schedule, config.sample_steps);
    let mut states: Vec<Array2<f32>> = windows
        .iter()
        .enumerate()
        .map(|(i, w)| noise_like((w.len, dims), seed ^ mix(i as u64) ^ 0x1257))
        .collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..windows.len())
        .map(|i| ChaCha8Rng::seed_from_u64(seed ^ mix(i as u64) ^ 0x9a1e))
        .collect();

    let mut trace = Vec::new();
    let mut incidents = Vec::new();
    let mut final_blend: Option<Array2<f64>> = None;

    for (i, idx) in (0..steps.len()).rev().enumerate() {
        let n = steps[idx];
        // Denoise every window and lift predictions to the world frame.
        let mut blended = Array2::<f64>::zeros((length, dims));
        for ((w, ctx), x) in windows.iter().zip(&contexts).zip(&states) {
            let x0 = ctx.predict_x0(x, n);
            let raw = denormalize(&x0, stats);
            for local in 0..w.len {
                let world_row =
                    transform_raw_row(raw.row(local).as_slice().unwrap(), &w.anchor.world_from_local, layout);
                let weight = ramp(w, local) / weight_sum[w.start + local];
                for d in 0..dims {
                    blended[(w.start + local, d)] += weight * world_row[d];
                }
            }
        }
        share_shape(&mut blended, layout);

        // Guidance on the blended full sequence.
        let window_view = DecodedWindow::decode(blended.clone(), layout, hand_model, true);
        let (values, grad) = objectives.evaluate(&window_view);
        let mut grad_norm = grad.to_normalized(stats);
        let finite = grad_norm.iter().all(|v| v.is_finite()) && values.total.is_finite();
        let (norm, clipped) = if finite {
            clip_gradient(&mut grad_norm, config.clip_norm)
        } else {
            (f64::NAN, false)
        };
        trace.push(StepTrace {
            step_index: i,
            schedule_step: n,
            g_total: values.total,
            g_reproj: values.reproj,
            g_inter: values.inter,
            g_temp: values.temp,
            g_contact: values.contact,
            grad_norm: norm,
            clipped,
        });
        if !finite {
            incidents.push(format!(
                "non-finite guidance gradient at blend step {i} (n={n}); guidance skipped"
            ));
        }

        if idx == 0 {
            final_blend = Some(blended);
            break;
        }
        let prev = steps[idx - 1];
        let var = posterior_variance(schedule, n, prev);
        // The posterior mean is linear in x0 with this coefficient, so a
        // shift of -(var/c0) on x0 shifts the mean by -var * grad.
        let a_n = schedule.alpha_bar[n];
        let a_p = schedule.alpha_bar[prev];
        let c0 = a_p.sqrt() * (1.0 - a_n / a_p) / (1.0 - a_n);
        let refined = if finite {
            let mut r = blended;
            let scale = var / c0;
            for ((t, d), v) in r.indexed_iter_mut() {
                *v -= scale * stats.std[d] * grad_norm[(t, d)] as f64;
            }
            r
        } else {
            blended
        };

        // Update each window's posterior from the refined blended estimate.
        for (((w, x), rng), _ctx) in windows
            .iter()
            .zip(states.iter_mut())
            .zip(rngs.iter_mut())
            .zip(&contexts)
        {
            let mut local_norm = Array2::<f32>::zeros((w.len, dims));
            let inv_anchor = w.anchor.local_from_world();
            for local in 0..w.len {
                let world_row: Vec<f64> = (0..dims)
                    .map(|d| refined[(w.start + local, d)])
                    .collect();
                let local_row = transform_raw_row(&world_row, &inv_anchor, layout);
                for d in 0..dims {
                    local_norm[(local, d)] = stats.normalize_value(d, local_row[d]) as f32;
                }
            }
            let (mean, sigma) = posterior_mean_sigma(x, &local_norm, schedule, n, prev);
            let z = Array2::from_shape_fn((w.len, dims), |_| {
                let v: f64 = StandardNormal.sample(rng);
                v as f32
            });
            *x = mean + z * (sigma as f32);
        }
    }

    let blended = final_blend.expect("sampling loop ran");
    let recon = decode_world_raw(&blended, checkpoint, hand_model, fps)?;
    let report = GuidanceReport {
        steps: trace,
        incidents,
        timing_ms: started.elapsed().as_secs_f64() * 1e3,
        no_observations: binding.empty,
    };
    Ok((recon, report))
}

/// Builds per-window blend inputs from a world-frame conditioning track:
/// each window is canonicalized to its own first camera, matching training.
pub fn prepare_blend_inputs(
    conditioning_world: &NoisyHands,
    camera_world: &CameraTrack,
    starts: &[usize],
    window_len: usize,
) -> Result<Vec<BlendInput>, GuidanceError> {
    let mut out = Vec::with_capacity(starts.len());
    for &start in starts {
        let cam_slice = camera_world.slice(start, window_len.min(camera_world.len() - start));
        let (frame, _canonical) = worldgrip_geometry::canonicalize(&cam_slice)?;
        let slice = conditioning_world.slice(start, window_len);
        let local = worldgrip_geometry::canonical::transform_hand_track(
            &slice.track,
            &frame.local_from_world(),
        );
        out.push(BlendInput {
            start,
            len: window_len,
            conditioning: NoisyHands {
                track: local,
                dropped: slice.dropped,
            },
            anchor: frame,
        });
    }
    Ok(out)
}

fn mix(v: u64) -> u64 {
    let mut z = v.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^ (z >> 31)
}

/// Applies a rigid transform to one raw state row.
pub fn transform_raw_row(row: &[f64], transform: &SE3, layout: StateLayout) -> Vec<f64> {
    let mut out = row.to_vec();
    // Object rotation: linear action on the (possibly unprojected) matrix.
    let mut m = [0.0; 9];
    m.copy_from_slice(&row[ROT9_OFFSET..ROT9_OFFSET + 9]);
    let rotated = transform.rotation * mat3_from_rot9(&m);
    out[ROT9_OFFSET..ROT9_OFFSET + 9].copy_from_slice(&rot9_from_mat3(&rotated));
    // Hands.
    for side in Side::both() {
        let base = layout.hand_offset(side);
        let orient = [row[base], row[base + 1], row[base + 2]];
        let rotated = transform.rotation * rotation_from_axis_angle(&orient);
        let new_orient = axis_angle_from_rotation(&rotated);
        out[base..base + 3].copy_from_slice(&new_orient);
        let trans = Vector3::new(row[base + 3], row[base + 4], row[base + 5]);
        let moved = transform.apply(&trans);
        out[base + 3] = moved.x;
        out[base + 4] = moved.y;
        out[base + 5] = moved.z;
    }
    if layout.include_object_translation {
        let t = Vector3::new(
            row[OBJ_TRANS_OFFSET],
            row[OBJ_TRANS_OFFSET + 1],
            row[OBJ_TRANS_OFFSET + 2],
        );
        let moved = transform.apply(&t);
        out[OBJ_TRANS_OFFSET] = moved.x;
        out[OBJ_TRANS_OFFSET + 1] = moved.y;
        out[OBJ_TRANS_OFFSET + 2] = moved.z;
    }
    let _ = CONTACT_OFFSET; // contact values are frame-invariant
    out
}

/// Replaces per-frame shape coefficients with their global mean.
pub fn share_shape(raw: &mut Array2<f64>, layout: StateLayout) {
    let t = raw.nrows();
    if t == 0 {
        return;
    }
    for side in Side::both() {
        let base = layout.hand_offset(side) + 21;
        for k in 0..10 {
            let mean = (0..t).map(|f| raw[(f, base + k)]).sum::<f64>() / t as f64;
            for f in 0..t {
                raw[(f, base + k)] = mean;
            }
        }
    }
}

fn decode_world_raw(
    raw: &Array2<f64>,
    checkpoint: &Checkpoint,
    hand_model: &dyn KinematicHand,
    fps: f64,
) -> Result<Reconstruction, GuidanceError> {
    // Full-precision path: decode the raw world state directly.
    let stats_identity = NormStats::identity(raw.ncols());
    let layout = checkpoint.header.denoiser.layout;
    let state = worldgrip_prior::DiffusionState {
        data: raw.clone(),
        layout,
    };
    let (hands, object, contact) =
        worldgrip_prior::unpack_state(&state, &stats_identity, hand_model, fps)?;
    Ok(Reconstruction {
        hands: hands.clone(),
        object: object.clone(),
        contact: contact.clone(),
        canonical_hands: hands,
        canonical_object: object,
        frame: GravityFrame::identity(),
    })
}

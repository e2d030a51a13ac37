//! The transformer denoiser D(x_n | n, conditioning hands, object template).
//!
//! Non-autoregressive: the whole window is processed jointly. Token 0 is the
//! diffusion-step embedding, token 1 the template BPS descriptor, and tokens
//! 2..T+2 the per-frame features: the noisy state, the conditioning hand
//! features, and a per-frame ambient-sensor block recomputed from the
//! denoiser input each call. Outputs are the predicted clean state and an
//! auxiliary linear joint head.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use worldgrip_core::JOINT_COUNT;
use worldgrip_geometry::ambient::ambient_sensor;
use worldgrip_geometry::mesh::MeshQuery;
use worldgrip_geometry::{KinematicHand, SE3};

use crate::decoded::decode_normalized;
use crate::nn::{
    sinusoidal_embedding, EncoderLayer, EncoderLayerCache, GradStore, Linear, LayerNorm,
    LayerNormCache, Param, ParamBuilder, StepMlp, StepMlpCache,
};
use crate::noise_synth::NoisyHands;
use crate::state::{NormStats, StateLayout};

/// Per-frame conditioning feature width: two hands of 31 parameters, 63
/// joint coordinates, 63 velocity coordinates, and a drop flag.
pub const COND_DIMS: usize = 2 * (31 + 3 * JOINT_COUNT + 3 * JOINT_COUNT + 1);
/// Ambient-sensor block: displacement vectors for all 42 joints.
pub const AMBIENT_DIMS: usize = 2 * JOINT_COUNT * 3;
/// Ambient displacements are clamped to this magnitude, meters.
const AMBIENT_CLAMP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub latent: usize,
    pub ffn: usize,
    pub heads: usize,
    pub layers: usize,
    pub bps_dims: usize,
    pub window: usize,
    pub layout: StateLayout,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        DenoiserConfig {
            latent: 512,
            ffn: 2048,
            heads: 4,
            layers: 4,
            bps_dims: 512,
            window: 120,
            layout: StateLayout::default(),
        }
    }
}

impl DenoiserConfig {
    /// Reduced-width configuration for CPU-scale tests.
    pub fn reduced(window: usize) -> Self {
        DenoiserConfig {
            latent: 64,
            ffn: 192,
            heads: 4,
            layers: 4,
            bps_dims: 512,
            window,
            layout: StateLayout::default(),
        }
    }

    pub fn state_dims(&self) -> usize {
        self.layout.dims()
    }

    pub fn in_dims(&self) -> usize {
        self.state_dims() + COND_DIMS + AMBIENT_DIMS
    }

    pub fn out_dims(&self) -> usize {
        self.state_dims() + AMBIENT_DIMS
    }
}

pub struct Denoiser {
    pub config: DenoiserConfig,
    pub params: Vec<Param>,
    in_proj: Linear,
    bps_proj: Linear,
    step_mlp: StepMlp,
    layers: Vec<EncoderLayer>,
    final_ln: LayerNorm,
    out_proj: Linear,
    /// Fixed sinusoidal positional encodings, (window + 2, latent).
    pos: Array2<f32>,
}

pub struct ForwardCache {
    tokens_in: Array2<f32>,
    step_cache: StepMlpCache,
    layer_caches: Vec<(Array2<f32>, EncoderLayerCache)>,
    final_cache: LayerNormCache,
    final_out: Array2<f32>,
}

impl Denoiser {
    pub fn new(config: DenoiserConfig, seed: u64) -> Self {
        let mut params = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pb = ParamBuilder {
            params: &mut params,
            rng: &mut rng,
        };
        let in_proj = Linear::new(&mut pb, "in_proj", config.in_dims(), config.latent);
        let bps_proj = Linear::new(&mut pb, "bps_proj", config.bps_dims, config.latent);
        let step_mlp = StepMlp::new(&mut pb, "step_mlp", config.latent);
        let layers = (0..config.layers)
            .map(|i| {
                EncoderLayer::new(
                    &mut pb,
                    &format!("layer{i}"),
                    config.latent,
                    config.heads,
                    config.ffn,
                )
            })
            .collect();
        let final_ln = LayerNorm::new(&mut pb, "final_ln", config.latent);
        let out_proj = Linear::new(&mut pb, "out_proj", config.latent, config.out_dims());
        let tokens = config.window + 2;
        let mut pos = Array2::zeros((tokens, config.latent));
        for t in 0..tokens {
            pos.row_mut(t)
                .assign(&sinusoidal_embedding(t as f32, config.latent));
        }
        Denoiser {
            config,
            params,
            in_proj,
            bps_proj,
            step_mlp,
            layers,
            final_ln,
            out_proj,
            pos,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Raw network pass on pre-assembled per-frame inputs.
    ///
    /// `frame_inputs` is (T, in_dims); returns the predicted clean state
    /// (T, state_dims) and the joint head (T, 126).
    pub fn forward(
        &self,
        frame_inputs: &Array2<f32>,
        step: usize,
        bps: &Array1<f32>,
    ) -> (Array2<f32>, Array2<f32>, ForwardCache) {
        let t = frame_inputs.nrows();
        assert_eq!(frame_inputs.ncols(), self.config.in_dims());
        assert_eq!(bps.len(), self.config.bps_dims);
        let d = self.config.latent;

        let step_emb = sinusoidal_embedding(step as f32, d);
        let step_in = step_emb.insert_axis(ndarray::Axis(0));
        let (step_tok, step_cache) = self.step_mlp.forward(&self.params, &step_in);

        let bps_in = bps.clone().insert_axis(ndarray::Axis(0));
        let bps_tok = self.bps_proj.forward(&self.params, &bps_in);

        let frame_tok = self.in_proj.forward(&self.params, frame_inputs);

        let mut tokens = Array2::zeros((t + 2, d));
        tokens.row_mut(0).assign(&step_tok.row(0));
        tokens.row_mut(1).assign(&bps_tok.row(0));
        for f in 0..t {
            tokens.row_mut(f + 2).assign(&frame_tok.row(f));
        }
        tokens += &self.pos.slice(ndarray::s![..t + 2, ..]);

        let tokens_in = tokens.clone();
        let mut layer_caches = Vec::with_capacity(self.layers.len());
        let mut x = tokens;
        for layer in &self.layers {
            let (y, cache) = layer.forward(&self.params, &x);
            layer_caches.push((x, cache));
            x = y;
        }
        let (normed, final_cache) = self.final_ln.forward(&self.params, &x);
        let out = self.out_proj.forward(&self.params, &normed);

        let state_dims = self.config.state_dims();
        let x0 = out
            .slice(ndarray::s![2.., ..state_dims])
            .to_owned();
        let head = out
            .slice(ndarray::s![2.., state_dims..])
            .to_owned();
        (
            x0,
            head,
            ForwardCache {
                tokens_in,
                step_cache,
                layer_caches,
                final_cache,
                final_out: normed,
            },
        )
    }

    /// Backpropagates output gradients into the parameter store.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        frame_inputs: &Array2<f32>,
        bps: &Array1<f32>,
        grad_x0: &Array2<f32>,
        grad_head: &Array2<f32>,
        grads: &mut GradStore,
    ) {
        let t = frame_inputs.nrows();
        let state_dims = self.config.state_dims();
        let mut grad_out = Array2::zeros((t + 2, self.config.out_dims()));
        grad_out
            .slice_mut(ndarray::s![2.., ..state_dims])
            .assign(grad_x0);
        grad_out
            .slice_mut(ndarray::s![2.., state_dims..])
            .assign(grad_head);

        let grad_normed = self
            .out_proj
            .backward(&self.params, grads, &cache.final_out, &grad_out);
        let mut grad_x =
            self.final_ln
                .backward(&self.params, grads, &cache.final_cache, &grad_normed);
        for (layer, (_x_in, layer_cache)) in
            self.layers.iter().zip(cache.layer_caches.iter()).rev()
        {
            grad_x = layer.backward(&self.params, grads, layer_cache, &grad_x);
        }
        let _ = &cache.tokens_in;
        // Split token gradients back to the three projections.
        let grad_step = grad_x.slice(ndarray::s![0..1, ..]).to_owned();
        let grad_bps = grad_x.slice(ndarray::s![1..2, ..]).to_owned();
        let grad_frames = grad_x.slice(ndarray::s![2.., ..]).to_owned();
        self.step_mlp
            .backward(&self.params, grads, &cache.step_cache, &grad_step);
        let bps_in = bps.clone().insert_axis(ndarray::Axis(0));
        self.bps_proj.backward(&self.params, grads, &bps_in, &grad_bps);
        self.in_proj
            .backward(&self.params, grads, frame_inputs, &grad_frames);
    }
}

/// Conditioning features assembled from a noisy hand track.
pub fn conditioning_features(noisy: &NoisyHands) -> Array2<f32> {
    let t = noisy.track.len();
    let mut out = Array2::zeros((t, COND_DIMS));
    for f in 0..t {
        let mut col = 0usize;
        for s in 0..2 {
            let dropped = noisy.dropped[f][s];
            let zero = if dropped { 0.0f32 } else { 1.0f32 };
            let state = &noisy.track.frames[f][s];
            for v in state
                .global_orient
                .iter()
                .chain(state.translation.iter())
                .chain(state.articulation.iter())
                .chain(state.shape.iter())
            {
                out[(f, col)] = *v as f32 * zero;
                col += 1;
            }
            for j in 0..JOINT_COUNT {
                for k in 0..3 {
                    out[(f, col)] = noisy.track.joints[f][s][j][k] as f32 * zero;
                    col += 1;
                }
            }
            for j in 0..JOINT_COUNT {
                for k in 0..3 {
                    out[(f, col)] = noisy.track.joint_velocities[f][s][j][k] as f32 * zero;
                    col += 1;
                }
            }
            out[(f, col)] = if dropped { 1.0 } else { 0.0 };
            col += 1;
        }
        debug_assert_eq!(col, COND_DIMS);
    }
    out
}

/// Ambient-sensor features recomputed from the denoiser input state: for
/// each hand joint of the (noisy) state, the displacement to the nearest
/// surface point of the template under the state's diffused object pose.
pub fn ambient_features(
    x_state: &Array2<f32>,
    stats: &NormStats,
    layout: StateLayout,
    hand_model: &dyn KinematicHand,
    template: &MeshQuery,
) -> Array2<f32> {
    let window = decode_normalized(x_state, stats, layout, hand_model, false);
    let t = window.frames();
    let mut out = Array2::zeros((t, AMBIENT_DIMS));
    for f in 0..t {
        let pose = SE3::new(window.rot[f], window.trans[f]);
        let mut joints = Vec::with_capacity(2 * JOINT_COUNT);
        for s in 0..2 {
            for j in 0..JOINT_COUNT {
                let p = window.joints[f][s][j];
                joints.push(nalgebra::Vector3::new(p[0], p[1], p[2]));
            }
        }
        let displacements = ambient_sensor(&joints, template, &pose);
        for (i, d) in displacements.iter().enumerate() {
            for k in 0..3 {
                out[(f, i * 3 + k)] = d[k].clamp(-AMBIENT_CLAMP, AMBIENT_CLAMP) as f32;
            }
        }
    }
    out
}

/// Frame inputs: `[state | conditioning | ambient]`.
pub fn assemble_frame_inputs(
    x_state: &Array2<f32>,
    cond: &Array2<f32>,
    ambient: &Array2<f32>,
) -> Array2<f32> {
    let t = x_state.nrows();
    assert_eq!(cond.nrows(), t);
    assert_eq!(ambient.nrows(), t);
    let mut out = Array2::zeros((t, x_state.ncols() + cond.ncols() + ambient.ncols()));
    out.slice_mut(ndarray::s![.., ..x_state.ncols()]).assign(x_state);
    out.slice_mut(ndarray::s![.., x_state.ncols()..x_state.ncols() + cond.ncols()])
        .assign(cond);
    out.slice_mut(ndarray::s![.., x_state.ncols() + cond.ncols()..])
        .assign(ambient);
    out
}

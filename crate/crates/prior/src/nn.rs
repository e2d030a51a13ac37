//! Minimal deterministic neural-network layers with hand-written backward
//! passes.
//!
//! Everything operates on `Array2<f32>` with rows as tokens. Parameters live
//! in a flat registry so the optimizer and checkpoints can address them by
//! name; gradients accumulate into a parallel registry in a fixed order, so
//! training is bit-reproducible.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One named parameter tensor (matrices use row-major shapes, vectors have
/// `cols == 0`).
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: ParamValue,
}

#[derive(Debug, Clone)]
pub enum ParamValue {
    Matrix(Array2<f32>),
    Vector(Array1<f32>),
}

impl ParamValue {
    pub fn len(&self) -> usize {
        match self {
            ParamValue::Matrix(m) => m.len(),
            ParamValue::Vector(v) => v.len(),
        }
    }

    pub fn as_slice(&self) -> &[f32] {
        match self {
            ParamValue::Matrix(m) => m.as_slice().unwrap(),
            ParamValue::Vector(v) => v.as_slice().unwrap(),
        }
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        match self {
            ParamValue::Matrix(m) => m.as_slice_mut().unwrap(),
            ParamValue::Vector(v) => v.as_slice_mut().unwrap(),
        }
    }

    pub fn zeros_like(&self) -> ParamValue {
        match self {
            ParamValue::Matrix(m) => ParamValue::Matrix(Array2::zeros(m.dim())),
            ParamValue::Vector(v) => ParamValue::Vector(Array1::zeros(v.len())),
        }
    }
}

/// Gradients mirroring a parameter list, addressed by index.
#[derive(Debug, Clone)]
pub struct GradStore {
    pub grads: Vec<ParamValue>,
}

impl GradStore {
    pub fn zeros_like(params: &[Param]) -> Self {
        GradStore {
            grads: params.iter().map(|p| p.value.zeros_like()).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &GradStore) {
        for (a, b) in self.grads.iter_mut().zip(other.grads.iter()) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, s: f32) {
        for g in self.grads.iter_mut() {
            for x in g.as_mut_slice() {
                *x *= s;
            }
        }
    }
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f32> {
    let bound = (6.0 / (rows + cols) as f64).sqrt() as f32;
    Array2::from_shape_fn((rows, cols), |_| (rng.random::<f32>() * 2.0 - 1.0) * bound)
}

/// Builder that registers parameters while layers are constructed.
pub struct ParamBuilder<'a> {
    pub params: &'a mut Vec<Param>,
    pub rng: &'a mut ChaCha8Rng,
}

impl<'a> ParamBuilder<'a> {
    pub fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> usize {
        let value = ParamValue::Matrix(xavier(self.rng, rows, cols));
        self.params.push(Param {
            name: name.to_string(),
            value,
        });
        self.params.len() - 1
    }

    pub fn zero_vector(&mut self, name: &str, len: usize) -> usize {
        self.params.push(Param {
            name: name.to_string(),
            value: ParamValue::Vector(Array1::zeros(len)),
        });
        self.params.len() - 1
    }

    pub fn one_vector(&mut self, name: &str, len: usize) -> usize {
        self.params.push(Param {
            name: name.to_string(),
            value: ParamValue::Vector(Array1::ones(len)),
        });
        self.params.len() - 1
    }
}

fn mat<'p>(params: &'p [Param], idx: usize) -> &'p Array2<f32> {
    match &params[idx].value {
        ParamValue::Matrix(m) => m,
        _ => unreachable!("parameter {idx} is not a matrix"),
    }
}

fn vec1<'p>(params: &'p [Param], idx: usize) -> &'p Array1<f32> {
    match &params[idx].value {
        ParamValue::Vector(v) => v,
        _ => unreachable!("parameter {idx} is not a vector"),
    }
}

fn grad_mat<'g>(grads: &'g mut GradStore, idx: usize) -> &'g mut Array2<f32> {
    match &mut grads.grads[idx] {
        ParamValue::Matrix(m) => m,
        _ => unreachable!(),
    }
}

fn grad_vec<'g>(grads: &'g mut GradStore, idx: usize) -> &'g mut Array1<f32> {
    match &mut grads.grads[idx] {
        ParamValue::Vector(v) => v,
        _ => unreachable!(),
    }
}

/// y = x W + b
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(pb: &mut ParamBuilder, name: &str, in_dim: usize, out_dim: usize) -> Self {
        Linear {
            w: pb.matrix(&format!("{name}.w"), in_dim, out_dim),
            b: pb.zero_vector(&format!("{name}.b"), out_dim),
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, params: &[Param], x: &Array2<f32>) -> Array2<f32> {
        x.dot(mat(params, self.w)) + vec1(params, self.b)
    }

    /// Returns grad wrt x; accumulates parameter grads.
    pub fn backward(
        &self,
        params: &[Param],
        grads: &mut GradStore,
        x: &Array2<f32>,
        grad_y: &Array2<f32>,
    ) -> Array2<f32> {
        *grad_mat(grads, self.w) += &x.t().dot(grad_y);
        *grad_vec(grads, self.b) += &grad_y.sum_axis(Axis(0));
        grad_y.dot(&mat(params, self.w).t())
    }

    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

/// Row-wise layer normalization with learned gain and bias.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: usize,
    pub beta: usize,
    pub dim: usize,
}

pub struct LayerNormCache {
    normalized: Array2<f32>,
    inv_std: Array1<f32>,
}

const LN_EPS: f32 = 1e-5;

impl LayerNorm {
    pub fn new(pb: &mut ParamBuilder, name: &str, dim: usize) -> Self {
        LayerNorm {
            gamma: pb.one_vector(&format!("{name}.gamma"), dim),
            beta: pb.zero_vector(&format!("{name}.beta"), dim),
            dim,
        }
    }

    pub fn forward(&self, params: &[Param], x: &Array2<f32>) -> (Array2<f32>, LayerNormCache) {
        let n = x.nrows();
        let mut normalized = Array2::zeros(x.raw_dim());
        let mut inv_std = Array1::zeros(n);
        for (i, row) in x.outer_iter().enumerate() {
            let mean = row.sum() / self.dim as f32;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / self.dim as f32;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std[i] = is;
            for (j, v) in row.iter().enumerate() {
                normalized[(i, j)] = (v - mean) * is;
            }
        }
        let gamma = vec1(params, self.gamma);
        let beta = vec1(params, self.beta);
        let y = &normalized * gamma + beta;
        (y, LayerNormCache { normalized, inv_std })
    }

    pub fn backward(
        &self,
        params: &[Param],
        grads: &mut GradStore,
        cache: &LayerNormCache,
        grad_y: &Array2<f32>,
    ) -> Array2<f32> {
        let gamma = vec1(params, self.gamma).clone();
        {
            let gg = grad_vec(grads, self.gamma);
            for (i, row) in grad_y.outer_iter().enumerate() {
                for (j, g) in row.iter().enumerate() {
                    gg[j] += g * cache.normalized[(i, j)];
                }
            }
        }
        {
            let gb = grad_vec(grads, self.beta);
            *gb += &grad_y.sum_axis(Axis(0));
        }
        let d = self.dim as f32;
        let mut grad_x = Array2::zeros(grad_y.raw_dim());
        for i in 0..grad_y.nrows() {
            // dL/dxhat_j = grad_y_j * gamma_j
            let mut sum_g = 0.0f32;
            let mut sum_gx = 0.0f32;
            for j in 0..self.dim {
                let gh = grad_y[(i, j)] * gamma[j];
                sum_g += gh;
                sum_gx += gh * cache.normalized[(i, j)];
            }
            for j in 0..self.dim {
                let gh = grad_y[(i, j)] * gamma[j];
                grad_x[(i, j)] =
                    cache.inv_std[i] * (gh - sum_g / d - cache.normalized[(i, j)] * sum_gx / d);
            }
        }
        grad_x
    }

    pub fn param_count(&self) -> usize {
        2 * self.dim
    }
}

/// Multi-head self-attention over token rows; heads are column blocks.
#[derive(Debug, Clone)]
pub struct SelfAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
    pub dim: usize,
}

pub struct AttentionCache {
    q: Array2<f32>,
    k: Array2<f32>,
    v: Array2<f32>,
    /// Softmax probabilities per head, each (n, n).
    probs: Vec<Array2<f32>>,
    ctx: Array2<f32>,
}

impl SelfAttention {
    pub fn new(pb: &mut ParamBuilder, name: &str, dim: usize, heads: usize) -> Self {
        assert_eq!(dim % heads, 0);
        SelfAttention {
            wq: Linear::new(pb, &format!("{name}.q"), dim, dim),
            wk: Linear::new(pb, &format!("{name}.k"), dim, dim),
            wv: Linear::new(pb, &format!("{name}.v"), dim, dim),
            wo: Linear::new(pb, &format!("{name}.o"), dim, dim),
            heads,
            dim,
        }
    }

    pub fn forward(&self, params: &[Param], x: &Array2<f32>) -> (Array2<f32>, AttentionCache) {
        let n = x.nrows();
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f32).sqrt();
        let q = self.wq.forward(params, x);
        let k = self.wk.forward(params, x);
        let v = self.wv.forward(params, x);
        let mut ctx = Array2::zeros((n, self.dim));
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let cols = h * dh..(h + 1) * dh;
            let qh = q.slice(ndarray::s![.., cols.clone()]);
            let kh = k.slice(ndarray::s![.., cols.clone()]);
            let vh = v.slice(ndarray::s![.., cols.clone()]);
            let mut scores = qh.dot(&kh.t());
            scores *= scale;
            // Row softmax.
            for mut row in scores.outer_iter_mut() {
                let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
                let mut sum = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for v in row.iter_mut() {
                    *v /= sum;
                }
            }
            let ctx_h = scores.dot(&vh);
            ctx.slice_mut(ndarray::s![.., cols]).assign(&ctx_h);
            probs.push(scores);
        }
        let y = self.wo.forward(params, &ctx);
        (y, AttentionCache { q, k, v, probs, ctx })
    }

    pub fn backward(
        &self,
        params: &[Param],
        grads: &mut GradStore,
        x: &Array2<f32>,
        cache: &AttentionCache,
        grad_y: &Array2<f32>,
    ) -> Array2<f32> {
        let dh = self.dim / self.heads;
        let scale = 1.0 / (dh as f32).sqrt();
        let grad_ctx = self.wo.backward(params, grads, &cache.ctx, grad_y);
        let mut grad_q = Array2::zeros(cache.q.raw_dim());
        let mut grad_k = Array2::zeros(cache.k.raw_dim());
        let mut grad_v = Array2::zeros(cache.v.raw_dim());
        for h in 0..self.heads {
            let cols = h * dh..(h + 1) * dh;
            let p = &cache.probs[h];
            let qh = cache.q.slice(ndarray::s![.., cols.clone()]);
            let kh = cache.k.slice(ndarray::s![.., cols.clone()]);
            let vh = cache.v.slice(ndarray::s![.., cols.clone()]);
            let g_ctx_h = grad_ctx.slice(ndarray::s![.., cols.clone()]);
            // ctx = P V
            let grad_p = g_ctx_h.dot(&vh.t());
            let g_vh = p.t().dot(&g_ctx_h);
            // softmax backward per row: dS = P * (dP - rowsum(dP * P))
            let mut grad_scores = Array2::zeros(p.raw_dim());
            for i in 0..p.nrows() {
                let mut dot = 0.0f32;
                for j in 0..p.ncols() {
                    dot += grad_p[(i, j)] * p[(i, j)];
                }
                for j in 0..p.ncols() {
                    grad_scores[(i, j)] = p[(i, j)] * (grad_p[(i, j)] - dot) * scale;
                }
            }
            let g_qh = grad_scores.dot(&kh);
            let g_kh = grad_scores.t().dot(&qh);
            grad_q.slice_mut(ndarray::s![.., cols.clone()]).assign(&g_qh);
            grad_k.slice_mut(ndarray::s![.., cols.clone()]).assign(&g_kh);
            grad_v.slice_mut(ndarray::s![.., cols]).assign(&g_vh);
        }
        let gx_q = self.wq.backward(params, grads, x, &grad_q);
        let gx_k = self.wk.backward(params, grads, x, &grad_k);
        let gx_v = self.wv.backward(params, grads, x, &grad_v);
        gx_q + gx_k + gx_v
    }

    pub fn param_count(&self) -> usize {
        self.wq.param_count() + self.wk.param_count() + self.wv.param_count() + self.wo.param_count()
    }
}

/// GELU (tanh approximation) applied element-wise.
pub fn gelu(x: &Array2<f32>) -> Array2<f32> {
    x.mapv(gelu_scalar)
}

fn gelu_scalar(v: f32) -> f32 {
    const C: f32 = 0.7978845608; // sqrt(2/pi)
    0.5 * v * (1.0 + (C * (v + 0.044715 * v * v * v)).tanh())
}

fn gelu_grad_scalar(v: f32) -> f32 {
    const C: f32 = 0.7978845608;
    let u = C * (v + 0.044715 * v * v * v);
    let t = u.tanh();
    let du = C * (1.0 + 3.0 * 0.044715 * v * v);
    0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du
}

pub fn silu(x: &Array2<f32>) -> Array2<f32> {
    x.mapv(|v| v / (1.0 + (-v).exp()))
}

fn silu_grad_scalar(v: f32) -> f32 {
    let s = 1.0 / (1.0 + (-v).exp());
    s * (1.0 + v * (1.0 - s))
}

/// Two-layer feed-forward block with GELU.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub fc1: Linear,
    pub fc2: Linear,
}

pub struct FeedForwardCache {
    pre_act: Array2<f32>,
    act: Array2<f32>,
}

impl FeedForward {
    pub fn new(pb: &mut ParamBuilder, name: &str, dim: usize, hidden: usize) -> Self {
        FeedForward {
            fc1: Linear::new(pb, &format!("{name}.fc1"), dim, hidden),
            fc2: Linear::new(pb, &format!("{name}.fc2"), hidden, dim),
        }
    }

    pub fn forward(&self, params: &[Param], x: &Array2<f32>) -> (Array2<f32>, FeedForwardCache) {
        let pre_act = self.fc1.forward(params, x);
        let act = gelu(&pre_act);
        let y = self.fc2.forward(params, &act);
        (y, FeedForwardCache { pre_act, act })
    }

    pub fn backward(
        &self,
        params: &[Param],
        grads: &mut GradStore,
        x: &Array2<f32>,
        cache: &FeedForwardCache,
        grad_y: &Array2<f32>,
    ) -> Array2<f32> {
        let grad_act = self.fc2.backward(params, grads, &cache.act, grad_y);
        let grad_pre = &grad_act * &cache.pre_act.mapv(gelu_grad_scalar);
        self.fc1.backward(params, grads, x, &grad_pre)
    }

    pub fn param_count(&self) -> usize {
        self.fc1.param_count() + self.fc2.param_count()
    }
}

/// Pre-norm transformer encoder layer.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub ln1: LayerNorm,
    pub attn: SelfAttention,
    pub ln2: LayerNorm,
    pub ffn: FeedForward,
}

pub struct EncoderLayerCache {
    ln1_out: Array2<f32>,
    ln1_cache: LayerNormCache,
    attn_cache: AttentionCache,
    ln2_out: Array2<f32>,
    ln2_cache: LayerNormCache,
    ffn_cache: FeedForwardCache,
}

impl EncoderLayer {
    pub fn new(pb: &mut ParamBuilder, name: &str, dim: usize, heads: usize, hidden: usize) -> Self {
        EncoderLayer {
            ln1: LayerNorm::new(pb, &format!("{name}.ln1"), dim),
            attn: SelfAttention::new(pb, &format!("{name}.attn"), dim, heads),
            ln2: LayerNorm::new(pb, &format!("{name}.ln2"), dim),
            ffn: FeedForward::new(pb, &format!("{name}.ffn"), dim, hidden),
        }
    }

    pub fn forward(&self, params: &[Param], x: &Array2<f32>) -> (Array2<f32>, EncoderLayerCache) {
        let (ln1_out, ln1_cache) = self.ln1.forward(params, x);
        let (attn_out, attn_cache) = self.attn.forward(params, &ln1_out);
        let mid = x + &attn_out;
        let (ln2_out, ln2_cache) = self.ln2.forward(params, &mid);
        let (ffn_out, ffn_cache) = self.ffn.forward(params, &ln2_out);
        let y = &mid + &ffn_out;
        (
            y,
            EncoderLayerCache {
                ln1_out,
                ln1_cache,
                attn_cache,
                ln2_out,
                ln2_cache,
                ffn_cache,
            },
        )
    }

    pub fn backward(
        &self,
        params: &[Param],
        grads: &mut GradStore,
        cache: &EncoderLayerCache,
        grad_y: &Array2<f32>,
    ) -> Array2<f32> {
        let grad_ffn_out = grad_y;
        let grad_ln2_out =
            self.ffn
                .backward(params, grads, &cache.ln2_out, &cache.ffn_cache, grad_ffn_out);
        let grad_mid_from_ffn = self.ln2.backward(params, grads, &cache.ln2_cache, &grad_ln2_out);
        let grad_mid = grad_y + &grad_mid_from_ffn;
        let grad_attn_out = &grad_mid;
        let grad_ln1_out = self.attn.backward(
            params,
            grads,
            &cache.ln1_out,
            &cache.attn_cache,
            grad_attn_out,
        );
        let grad_x_from_attn = self.ln1.backward(params, grads, &cache.ln1_cache, &grad_ln1_out);
        grad_mid + grad_x_from_attn
    }

    pub fn param_count(&self) -> usize {
        self.ln1.param_count()
            + self.attn.param_count()
            + self.ln2.param_count()
            + self.ffn.param_count()
    }
}

/// Step-embedding MLP: Linear, SiLU, Linear.
#[derive(Debug, Clone)]
pub struct StepMlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

pub struct StepMlpCache {
    x: Array2<f32>,
    pre: Array2<f32>,
    act: Array2<f32>,
}

impl StepMlp {
    pub fn new(pb: &mut ParamBuilder, name: &str, dim: usize) -> Self {
        StepMlp {
            fc1: Linear::new(pb, &format!("{name}.fc1"), dim, dim),
            fc2: Linear::new(pb, &format!("{name}.fc2"), dim, dim),
        }
    }

    pub fn forward(&self, params: &[Param], x: &Array2<f32>) -> (Array2<f32>, StepMlpCache) {
        let pre = self.fc1.forward(params, x);
        let act = silu(&pre);
        let y = self.fc2.forward(params, &act);
        (
            y,
            StepMlpCache {
                x: x.clone(),
                pre,
                act,
            },
        )
    }

    pub fn backward(
        &self,
        params: &[Param],
        grads: &mut GradStore,
        cache: &StepMlpCache,
        grad_y: &Array2<f32>,
    ) -> Array2<f32> {
        let grad_act = self.fc2.backward(params, grads, &cache.act, grad_y);
        let grad_pre = &grad_act * &cache.pre.mapv(silu_grad_scalar);
        self.fc1.backward(params, grads, &cache.x, &grad_pre)
    }

    pub fn param_count(&self) -> usize {
        self.fc1.param_count() + self.fc2.param_count()
    }
}

/// Sinusoidal embedding of a scalar (diffusion step or token position).
pub fn sinusoidal_embedding(value: f32, dim: usize) -> Array1<f32> {
    let half = dim / 2;
    let mut out = Array1::zeros(dim);
    for i in 0..half {
        let freq = (10_000f32).powf(-(i as f32) / half as f32);
        out[i] = (value * freq).sin();
        out[half + i] = (value * freq).cos();
    }
    out
}

/// Decoupled-weight-decay Adam.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
    pub m: Vec<ParamValue>,
    pub v: Vec<ParamValue>,
    pub step: u64,
}

impl AdamW {
    pub fn new(params: &[Param], lr: f32, weight_decay: f32) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: params.iter().map(|p| p.value.zeros_like()).collect(),
            v: params.iter().map(|p| p.value.zeros_like()).collect(),
            step: 0,
        }
    }

    pub fn apply(&mut self, params: &mut [Param], grads: &GradStore) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads.grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let w = param.value.as_mut_slice();
            let g = grad.as_slice();
            let ms = m.as_mut_slice();
            let vs = v.as_mut_slice();
            for i in 0..w.len() {
                ms[i] = self.beta1 * ms[i] + (1.0 - self.beta1) * g[i];
                vs[i] = self.beta2 * vs[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = ms[i] / bc1;
                let vh = vs[i] / bc2;
                w[i] -= self.lr * (mh / (vh.sqrt() + self.eps) + self.weight_decay * w[i]);
            }
        }
    }
}

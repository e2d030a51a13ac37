//! Single-file checkpoint container: a JSON header followed by raw
//! little-endian f32 tensor blobs.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::denoiser::{Denoiser, DenoiserConfig};
use crate::error::PriorError;
use crate::nn::{AdamW, ParamValue};
use crate::noise_synth::NoiseSynthConfig;
use crate::schedule::NoiseSchedule;
use crate::state::NormStats;
use crate::train::TrainConfig;

const MAGIC: &[u8; 8] = b"WGRIPCK1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorMeta {
    pub name: String,
    pub rows: usize,
    /// 0 marks a vector.
    pub cols: usize,
    /// Offset in f32 units from the start of the blob section.
    pub offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub denoiser: DenoiserConfig,
    pub schedule: NoiseSchedule,
    pub stats: NormStats,
    pub train: TrainConfig,
    pub noise_synth: NoiseSynthConfig,
    /// Training steps completed.
    pub step: u64,
    /// Base seed; per-step randomness derives from (seed, step), which is
    /// the complete RNG state needed for bit-exact resume.
    pub seed: u64,
    pub init_seed: u64,
    pub tensors: Vec<TensorMeta>,
}

/// A trained (or in-progress) model with everything needed to resume.
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: Denoiser,
    pub adam_m: Vec<ParamValue>,
    pub adam_v: Vec<ParamValue>,
}

impl Checkpoint {
    pub fn optimizer(&self) -> AdamW {
        let mut opt = AdamW::new(
            &self.model.params,
            self.header.train.lr as f32,
            self.header.train.weight_decay as f32,
        );
        opt.m = self.adam_m.clone();
        opt.v = self.adam_v.clone();
        opt.step = self.header.step;
        opt
    }

    pub fn save(&self, path: &Path) -> Result<(), PriorError> {
        let mut tensors = Vec::new();
        let mut blob: Vec<f32> = Vec::new();
        let push = |name: String, value: &ParamValue, tensors: &mut Vec<TensorMeta>, blob: &mut Vec<f32>| {
            let (rows, cols) = match value {
                ParamValue::Matrix(m) => (m.nrows(), m.ncols()),
                ParamValue::Vector(v) => (v.len(), 0),
            };
            tensors.push(TensorMeta {
                name,
                rows,
                cols,
                offset: blob.len(),
            });
            blob.extend_from_slice(value.as_slice());
        };
        for p in &self.model.params {
            push(p.name.clone(), &p.value, &mut tensors, &mut blob);
        }
        for (p, m) in self.model.params.iter().zip(&self.adam_m) {
            push(format!("adam.m.{}", p.name), m, &mut tensors, &mut blob);
        }
        for (p, v) in self.model.params.iter().zip(&self.adam_v) {
            push(format!("adam.v.{}", p.name), v, &mut tensors, &mut blob);
        }
        let mut header = self.header.clone();
        header.tensors = tensors;
        let header_bytes = serde_json::to_vec(&header)?;

        let mut file = std::fs::File::create(path)?;
        file.write_all(MAGIC)?;
        file.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
        file.write_all(&header_bytes)?;
        let mut bytes = Vec::with_capacity(blob.len() * 4);
        for v in &blob {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        file.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, PriorError> {
        let mut file = std::fs::File::open(path)?;
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(PriorError::Checkpoint("bad magic".into()));
        }
        let mut len_bytes = [0u8; 8];
        file.read_exact(&mut len_bytes)?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        file.read_exact(&mut header_bytes)?;
        let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;
        let mut rest = Vec::new();
        file.read_to_end(&mut rest)?;
        if rest.len() % 4 != 0 {
            return Err(PriorError::Checkpoint("blob length not f32-aligned".into()));
        }
        let blob: Vec<f32> = rest
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();

        let fetch = |meta: &TensorMeta| -> Result<ParamValue, PriorError> {
            let len = if meta.cols == 0 {
                meta.rows
            } else {
                meta.rows * meta.cols
            };
            let slice = blob
                .get(meta.offset..meta.offset + len)
                .ok_or_else(|| PriorError::Checkpoint(format!("tensor {} out of range", meta.name)))?;
            Ok(if meta.cols == 0 {
                ParamValue::Vector(Array1::from_vec(slice.to_vec()))
            } else {
                ParamValue::Matrix(
                    Array2::from_shape_vec((meta.rows, meta.cols), slice.to_vec())
                        .map_err(|e| PriorError::Checkpoint(e.to_string()))?,
                )
            })
        };

        let mut model = Denoiser::new(header.denoiser.clone(), header.init_seed);
        let mut adam_m = Vec::new();
        let mut adam_v = Vec::new();
        for param in model.params.iter_mut() {
            let meta = header
                .tensors
                .iter()
                .find(|t| t.name == param.name)
                .ok_or_else(|| PriorError::Checkpoint(format!("missing tensor {}", param.name)))?;
            param.value = fetch(meta)?;
        }
        for param in &model.params {
            let m_meta = header
                .tensors
                .iter()
                .find(|t| t.name == format!("adam.m.{}", param.name))
                .ok_or_else(|| PriorError::Checkpoint(format!("missing adam.m.{}", param.name)))?;
            let v_meta = header
                .tensors
                .iter()
                .find(|t| t.name == format!("adam.v.{}", param.name))
                .ok_or_else(|| PriorError::Checkpoint(format!("missing adam.v.{}", param.name)))?;
            adam_m.push(fetch(m_meta)?);
            adam_v.push(fetch(v_meta)?);
        }
        Ok(Checkpoint {
            header,
            model,
            adam_m,
            adam_v,
        })
    }
}

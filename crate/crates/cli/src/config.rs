//! Configuration loading, precedence, and run manifests.
//!
//! Precedence: CLI flag > config file > built-in default. Every command
//! writes a manifest recording the resolved values, the config hash, the
//! seed, and package versions.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use worldgrip_guidance::GuidanceConfig;
use worldgrip_prior::denoiser::DenoiserConfig;
use worldgrip_prior::train::TrainConfig;
use worldgrip_prior::NoiseSynthConfig;

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(default)]
pub struct FileConfig {
    pub synth: SynthSection,
    pub train: TrainSection,
    pub guidance: GuidanceSection,
    pub sample: SampleSection,
    pub noise: NoiseSection,
    pub vlm: VlmSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default)]
pub struct SynthSection {
    pub sequences: usize,
    pub length: usize,
    pub window: usize,
    pub stride: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            sequences: 5,
            length: 150,
            window: 120,
            stride: 60,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default)]
pub struct TrainSection {
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub warmup_steps: u64,
    pub lambda_inter: f64,
    pub lambda_const: f64,
    pub lambda_smooth: f64,
    pub augment_template: bool,
    /// "paper" (512-wide) or "reduced" (64-wide) denoiser.
    pub width: String,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            steps: t.steps,
            batch_size: t.batch_size,
            lr: t.lr,
            warmup_steps: t.warmup_steps,
            lambda_inter: t.lambda_inter,
            lambda_const: t.lambda_const,
            lambda_smooth: t.lambda_smooth,
            augment_template: t.augment_template,
            width: "paper".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default)]
pub struct GuidanceSection {
    pub w_reproj: f64,
    pub w_inter: f64,
    pub w_temp: f64,
    pub w_contact: f64,
    pub clip_norm: f64,
}

impl Default for GuidanceSection {
    fn default() -> Self {
        let g = GuidanceConfig::default();
        GuidanceSection {
            w_reproj: g.w_reproj,
            w_inter: g.w_inter,
            w_temp: g.w_temp,
            w_contact: g.w_contact,
            clip_norm: g.clip_norm,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default)]
pub struct SampleSection {
    pub steps: usize,
}

impl Default for SampleSection {
    fn default() -> Self {
        SampleSection { steps: 50 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default)]
pub struct NoiseSection {
    pub traj_sigma: [f64; 3],
    pub frame_sigma: [f64; 3],
    pub drop_prob: f64,
    pub drop_span_p: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseSynthConfig::default();
        NoiseSection {
            traj_sigma: n.traj_sigma,
            frame_sigma: n.frame_sigma,
            drop_prob: n.drop_prob,
            drop_span_p: n.drop_span_p,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default)]
pub struct VlmSection {
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub retries: usize,
}

impl Default for VlmSection {
    fn default() -> Self {
        let c = worldgrip_contact::LiveConfig::default();
        VlmSection {
            base_url: c.base_url,
            model: c.model,
            api_key_env: c.api_key_env,
            timeout_secs: c.timeout_secs,
            retries: c.retries,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn noise_synth(&self) -> NoiseSynthConfig {
        NoiseSynthConfig {
            traj_sigma: self.noise.traj_sigma,
            frame_sigma: self.noise.frame_sigma,
            drop_prob: self.noise.drop_prob,
            drop_span_p: self.noise.drop_span_p,
        }
    }

    pub fn guidance(&self, steps_flag: Option<usize>) -> GuidanceConfig {
        GuidanceConfig {
            w_reproj: self.guidance.w_reproj,
            w_inter: self.guidance.w_inter,
            w_temp: self.guidance.w_temp,
            w_contact: self.guidance.w_contact,
            clip_norm: self.guidance.clip_norm,
            sample_steps: steps_flag.unwrap_or(self.sample.steps),
        }
    }

    pub fn denoiser(&self, window: usize) -> Result<DenoiserConfig> {
        match self.train.width.as_str() {
            "paper" => Ok(DenoiserConfig {
                window,
                ..DenoiserConfig::default()
            }),
            "reduced" => Ok(DenoiserConfig::reduced(window)),
            other => anyhow::bail!("unknown train.width {other:?}; use \"paper\" or \"reduced\""),
        }
    }

    pub fn train_config(&self, steps_flag: Option<u64>) -> TrainConfig {
        TrainConfig {
            steps: steps_flag.unwrap_or(self.train.steps),
            batch_size: self.train.batch_size,
            lr: self.train.lr,
            warmup_steps: self.train.warmup_steps,
            lambda_inter: self.train.lambda_inter,
            lambda_const: self.train.lambda_const,
            lambda_smooth: self.train.lambda_smooth,
            augment_template: self.train.augment_template,
            ..TrainConfig::default()
        }
    }
}

/// FNV-1a 64 over the canonical JSON encoding of the resolved config.
pub fn config_hash(resolved: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(resolved).expect("config serializes");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub resolved_config: serde_json::Value,
    pub versions: Versions,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub package: String,
}

pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    seed: u64,
    resolved: serde_json::Value,
    artifacts: Vec<String>,
) -> Result<()> {
    let manifest = Manifest {
        command: command.to_string(),
        seed,
        config_hash: config_hash(&resolved),
        resolved_config: resolved,
        versions: Versions {
            package: env!("CARGO_PKG_VERSION").to_string(),
        },
        artifacts,
    };
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn ensure_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path)?;
    Ok(path.to_path_buf())
}

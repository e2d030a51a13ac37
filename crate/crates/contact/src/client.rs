//! VLM client implementations: a live HTTP client, a replay-from-disk mock,
//! and a proximity-oracle mock.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::ClientError;
use crate::parse::format_labels;
use crate::prompt::{AnnotatedImage, ContactQuery};

/// Anything that can answer a contact query with raw text.
pub trait VlmClient: Send + Sync {
    fn send(&self, query: &ContactQuery) -> Result<String, ClientError>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiveConfig {
    /// Chat-completions style endpoint base, e.g. `https://api.example.com/v1`.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Transport retry budget per request.
    pub retries: usize,
    /// When set, request/response bodies are logged here for offline replay.
    pub replay_dir: Option<PathBuf>,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-5".into(),
            api_key_env: "WORLDGRIP_VLM_API_KEY".into(),
            timeout_secs: 60,
            retries: 2,
            replay_dir: None,
        }
    }
}

/// Live HTTP JSON client.
pub struct LiveClient {
    config: LiveConfig,
    api_key: String,
    agent: ureq::Agent,
    attempts: Mutex<BTreeMap<usize, usize>>,
}

impl LiveClient {
    pub fn new(config: LiveConfig) -> Result<Self, ClientError> {
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| ClientError::MissingApiKey(config.api_key_env.clone()))?;
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_secs(config.timeout_secs)))
            .build();
        Ok(LiveClient {
            config,
            api_key,
            agent: ureq::Agent::new_with_config(agent_config),
            attempts: Mutex::new(BTreeMap::new()),
        })
    }

    fn request_body(&self, query: &ContactQuery) -> serde_json::Value {
        let mut messages = vec![serde_json::json!({
            "role": "system",
            "content": query.system,
        })];
        for (i, example) in query.examples.iter().enumerate() {
            messages.push(serde_json::json!({
                "role": "user",
                "content": [
                    {"type": "text", "text": format!("Calibration example {}.", i + 1)},
                    {"type": "image_url", "image_url": {"url": image_data_url(&example.image)}},
                ],
            }));
            messages.push(serde_json::json!({
                "role": "assistant",
                "content": example.expected_json,
            }));
        }
        messages.push(serde_json::json!({
            "role": "user",
            "content": [
                {"type": "text", "text": query.user},
                {"type": "image_url", "image_url": {"url": image_data_url(&query.image)}},
            ],
        }));
        serde_json::json!({
            "model": self.config.model,
            "messages": messages,
        })
    }
}

impl VlmClient for LiveClient {
    fn send(&self, query: &ContactQuery) -> Result<String, ClientError> {
        let body = self.request_body(query);
        let url = format!("{}/chat/completions", self.config.base_url);
        let mut last_err = None;
        for _ in 0..=self.config.retries {
            let result = self
                .agent
                .post(&url)
                .header("Authorization", &format!("Bearer {}", self.api_key))
                .send_json(&body);
            match result {
                Ok(mut response) => {
                    let value: serde_json::Value = response
                        .body_mut()
                        .read_json()
                        .map_err(|e| ClientError::Transport(e.to_string()))?;
                    let text = value["choices"][0]["message"]["content"]
                        .as_str()
                        .ok_or_else(|| {
                            ClientError::Transport("response missing message content".into())
                        })?
                        .to_string();
                    if let Some(dir) = &self.config.replay_dir {
                        let attempt = {
                            let mut map = self.attempts.lock().unwrap();
                            let a = map.entry(query.frame_index).or_insert(0);
                            let current = *a;
                            *a += 1;
                            current
                        };
                        log_replay(dir, query, attempt, &text)?;
                    }
                    return Ok(text);
                }
                Err(e) => last_err = Some(ClientError::Transport(e.to_string())),
            }
        }
        Err(last_err.unwrap_or_else(|| ClientError::Transport("no attempts made".into())))
    }
}

#[derive(Serialize, Deserialize)]
struct ReplayRecord {
    frame_index: usize,
    attempt: usize,
    system: String,
    user: String,
    image_png_base64: String,
    response: String,
}

fn replay_path(dir: &std::path::Path, frame: usize, attempt: usize) -> PathBuf {
    dir.join(format!("frame_{frame:06}_attempt_{attempt}.json"))
}

fn log_replay(
    dir: &std::path::Path,
    query: &ContactQuery,
    attempt: usize,
    response: &str,
) -> Result<(), ClientError> {
    std::fs::create_dir_all(dir)?;
    let record = ReplayRecord {
        frame_index: query.frame_index,
        attempt,
        system: query.system.clone(),
        user: query.user.clone(),
        image_png_base64: BASE64.encode(encode_png(&query.image)),
        response: response.to_string(),
    };
    let mut file = std::fs::File::create(replay_path(dir, query.frame_index, attempt))?;
    file.write_all(serde_json::to_string_pretty(&record).unwrap().as_bytes())?;
    Ok(())
}

/// Replays previously logged responses from disk; each frame's attempts are
/// consumed in order.
pub struct ReplayClient {
    dir: PathBuf,
    attempts: Mutex<BTreeMap<usize, usize>>,
}

impl ReplayClient {
    pub fn new(dir: PathBuf) -> Self {
        ReplayClient {
            dir,
            attempts: Mutex::new(BTreeMap::new()),
        }
    }

    /// Writes a replay record (lets tests and offline tools seed a replay
    /// directory without a live run).
    pub fn record(
        dir: &std::path::Path,
        query: &ContactQuery,
        attempt: usize,
        response: &str,
    ) -> Result<(), ClientError> {
        log_replay(dir, query, attempt, response)
    }
}

impl VlmClient for ReplayClient {
    fn send(&self, query: &ContactQuery) -> Result<String, ClientError> {
        let attempt = {
            let mut map = self.attempts.lock().unwrap();
            let a = map.entry(query.frame_index).or_insert(0);
            let current = *a;
            *a += 1;
            current
        };
        let path = replay_path(&self.dir, query.frame_index, attempt);
        let bytes = std::fs::read(&path).map_err(|_| ClientError::MissingReplay {
            frame: query.frame_index,
            attempt,
        })?;
        let record: ReplayRecord = serde_json::from_slice(&bytes)
            .map_err(|e| ClientError::Transport(format!("bad replay record: {e}")))?;
        Ok(record.response)
    }
}

/// Answers from a precomputed per-frame contact table (the proximity
/// oracle), formatted exactly like a well-behaved model.
pub struct OracleClient {
    /// `frame -> per-candidate [left, right]`.
    pub answers: BTreeMap<usize, Vec<[u8; 2]>>,
}

impl OracleClient {
    /// Builds the table for a single tracked candidate from a contact track.
    pub fn single_candidate(track: &worldgrip_core::ContactTrack) -> Self {
        let answers = track
            .binarized()
            .iter()
            .enumerate()
            .map(|(t, c)| (t, vec![[u8::from(c[0]), u8::from(c[1])]]))
            .collect();
        OracleClient { answers }
    }
}

impl VlmClient for OracleClient {
    fn send(&self, query: &ContactQuery) -> Result<String, ClientError> {
        let labels = self
            .answers
            .get(&query.frame_index)
            .cloned()
            .unwrap_or_else(|| vec![[0, 0]; query.candidates.len()]);
        Ok(format_labels(&query.candidates, &labels))
    }
}

/// PNG-encodes an annotated image (live requests and replay logs).
pub fn encode_png(image: &AnnotatedImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width, image.height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().expect("png header");
        writer.write_image_data(&image.rgb).expect("png data");
    }
    out
}

fn image_data_url(image: &AnnotatedImage) -> String {
    format!("data:image/png;base64,{}", BASE64.encode(encode_png(image)))
}

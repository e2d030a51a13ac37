//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use worldgrip_contact::{
    label_video, oracle_contacts, FrameMasks, LiveClient, LiveConfig, OracleClient, Provenance,
    ReplayClient, VlmClient, ORACLE_THRESHOLD,
};
use worldgrip_core::{window_split, Observations, SequenceBundle};
use worldgrip_eval::{
    add_adds, auc, interaction_metric, interpolate_poses, mpjpe_suite, split_subsets, EvalReport,
    SequenceMetrics, SubsetMetrics, AUC_MAX_THRESHOLD,
};
use worldgrip_geometry::mesh::TriMesh;
use worldgrip_geometry::StandardHand;
use worldgrip_guidance::blend::{blend_guided_sample, prepare_blend_inputs};
use worldgrip_guidance::{GuidanceConfig, GUIDANCE_SURFACE_SAMPLES, GUIDANCE_SURFACE_SEED};
use worldgrip_prior::sample::{sample_unconditional_window, SampleConfig};
use worldgrip_prior::train::{resume as train_resume, train as train_fresh, TrainReport};
use worldgrip_prior::{synthesize_noisy_hands, Checkpoint};
use worldgrip_synthdata::{generate_sequence, render_masks, Scenario, SynthConfig};

use crate::config::{ensure_dir, write_manifest, FileConfig};
use crate::data;

pub struct Ctx {
    pub config: FileConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub steps: Option<u64>,
}

const SCENARIO_MIX: [Scenario; 4] = [
    Scenario::PickPlace,
    Scenario::Carry,
    Scenario::Handoff,
    Scenario::Idle,
];

pub fn synth(ctx: &Ctx, sequences: Option<usize>, length: Option<usize>) -> Result<()> {
    let out = ensure_dir(&ctx.out)?;
    let n = sequences.unwrap_or(ctx.config.synth.sequences);
    let synth_config = SynthConfig {
        length: length.unwrap_or(ctx.config.synth.length),
        ..SynthConfig::default()
    };
    let mut artifacts = Vec::new();
    for i in 0..n {
        let scenario = SCENARIO_MIX[i % SCENARIO_MIX.len()];
        let seq = generate_sequence(scenario, ctx.seed.wrapping_add(i as u64), &synth_config);
        let seq_path = data::sequence_path(&out, i);
        data::save_sequence(&seq_path, &seq.bundle)?;
        let tpl_path = data::template_path(&out, i);
        data::save_template(&tpl_path, &seq.template)?;
        artifacts.push(seq_path.display().to_string());
        artifacts.push(tpl_path.display().to_string());
        println!(
            "seq_{i:03}: {} ({} frames, {} labeled)",
            scenario.name(),
            seq.bundle.len(),
            seq.bundle.observations.frames.len()
        );
    }
    let resolved = serde_json::json!({
        "synth": {"sequences": n, "length": synth_config.length},
    });
    write_manifest(&out, "synth", ctx.seed, resolved, artifacts)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainLog {
    steps: u64,
    final_loss: Option<f64>,
    losses_every: usize,
    losses: Vec<f64>,
}

pub fn train(ctx: &Ctx, data_dir: &Path, resume_from: Option<&Path>) -> Result<()> {
    let out = ensure_dir(&ctx.out)?;
    let window = ctx.config.synth.window;
    let stride = ctx.config.synth.stride;
    let set = data::training_set_from_dir(data_dir, window, stride)?;
    println!("training on {} windows", set.windows.len());

    let (checkpoint, report): (Checkpoint, TrainReport) = match resume_from {
        None => {
            let denoiser = ctx.config.denoiser(window)?;
            let train_cfg = ctx.config.train_config(ctx.steps);
            train_fresh(&set, denoiser, train_cfg, ctx.config.noise_synth(), ctx.seed)
                .map_err(|e| anyhow::anyhow!("training failed: {e}"))?
        }
        Some(path) => {
            let ckpt =
                Checkpoint::load(path).map_err(|e| anyhow::anyhow!("loading checkpoint: {e}"))?;
            let until = ctx.steps.map(|s| ckpt.header.step + s);
            train_resume(ckpt, &set, until)
                .map_err(|e| anyhow::anyhow!("training failed: {e}"))?
        }
    };

    let ckpt_path = out.join("checkpoint.ckpt");
    checkpoint
        .save(&ckpt_path)
        .map_err(|e| anyhow::anyhow!("saving checkpoint: {e}"))?;

    let thin: Vec<f64> = report
        .losses
        .iter()
        .step_by((report.losses.len() / 200).max(1))
        .cloned()
        .collect();
    let log = TrainLog {
        steps: checkpoint.header.step,
        final_loss: report.losses.last().cloned(),
        losses_every: (report.losses.len() / 200).max(1),
        losses: thin,
    };
    std::fs::write(out.join("train_log.json"), serde_json::to_string_pretty(&log)?)?;
    if let Some(l) = report.losses.last() {
        println!("trained to step {} (final loss {l:.5})", checkpoint.header.step);
    }

    let resolved = serde_json::json!({
        "train": serde_json::to_value(&ctx.config.train)?,
        "steps_flag": ctx.steps,
        "noise": serde_json::to_value(&ctx.config.noise)?,
        "window": window,
        "stride": stride,
    });
    write_manifest(
        &out,
        "train",
        ctx.seed,
        resolved,
        vec![ckpt_path.display().to_string()],
    )?;
    Ok(())
}

pub fn sample(
    ctx: &Ctx,
    checkpoint: &Path,
    sequence: &Path,
    template: &Path,
    count: usize,
) -> Result<()> {
    let out = ensure_dir(&ctx.out)?;
    let ckpt = Checkpoint::load(checkpoint).map_err(|e| anyhow::anyhow!("checkpoint: {e}"))?;
    let bundle = data::load_sequence(sequence)?;
    let tpl = data::load_template(template, 0)?;
    let hand = StandardHand::default();
    let window = ckpt.header.denoiser.window.min(bundle.len());

    // Conditioning: the first window of the sequence, canonicalized, with
    // synthesized estimator noise.
    let (windows, _plan) = window_split(&bundle, window, (window / 2).max(1))
        .map_err(|e| anyhow::anyhow!("window split: {e}"))?;
    let (canonical, _cam, frame) =
        worldgrip_geometry::canonical::canonicalize_window(&windows[0], &bundle.camera)
            .map_err(|e| anyhow::anyhow!("canonicalize: {e}"))?;
    let noisy = synthesize_noisy_hands(
        &canonical.hands,
        &ckpt.header.noise_synth,
        &hand,
        ctx.seed ^ 0xabc,
    );

    let sample_cfg = SampleConfig {
        steps: ctx.steps.map(|s| s as usize).unwrap_or(ctx.config.sample.steps),
    };
    let mut artifacts = Vec::new();
    for k in 0..count {
        let (hands, object, contact) = sample_unconditional_window(
            &ckpt,
            &hand,
            &noisy,
            &tpl,
            &sample_cfg,
            ctx.seed.wrapping_add(k as u64),
            bundle.fps,
        )
        .map_err(|e| anyhow::anyhow!("sampling: {e}"))?;
        // Express the sample in world coordinates through the window anchor.
        let world_hands =
            worldgrip_geometry::canonical::transform_hand_track(&hands, &frame.world_from_local);
        let world_object = worldgrip_geometry::canonical::transform_object_track(
            &object,
            &frame.world_from_local,
        );
        let out_bundle = SequenceBundle {
            fps: bundle.fps,
            hands: world_hands,
            object: world_object,
            contact,
            camera: bundle.camera.slice(windows[0].start, window),
            observations: Observations::default(),
        };
        let path = out.join(format!("sample_{k:03}.json"));
        data::save_sequence(&path, &out_bundle)?;
        artifacts.push(path.display().to_string());
    }
    println!("wrote {count} samples to {}", out.display());
    let resolved = serde_json::json!({
        "sample": {"steps": sample_cfg.steps, "count": count},
        "checkpoint": checkpoint.display().to_string(),
    });
    write_manifest(&out, "sample", ctx.seed, resolved, artifacts)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelFile {
    pub frames: Vec<LabelEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelEntry {
    pub frame_index: usize,
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub provenance: String,
}

pub fn label_contacts(
    ctx: &Ctx,
    sequence: &Path,
    template: &Path,
    client_spec: &str,
    rate: f64,
) -> Result<()> {
    let out = ensure_dir(&ctx.out)?;
    let bundle = data::load_sequence(sequence)?;
    let tpl = data::load_template(template, 0)?;

    let client: Box<dyn VlmClient> = if client_spec == "oracle" {
        let gt = oracle_contacts(&bundle.hands, &bundle.object, &tpl, ORACLE_THRESHOLD);
        Box::new(OracleClient::single_candidate(&gt))
    } else if let Some(dir) = client_spec.strip_prefix("replay:") {
        Box::new(ReplayClient::new(PathBuf::from(dir)))
    } else if client_spec == "live" {
        let config = LiveConfig {
            base_url: ctx.config.vlm.base_url.clone(),
            model: ctx.config.vlm.model.clone(),
            api_key_env: ctx.config.vlm.api_key_env.clone(),
            timeout_secs: ctx.config.vlm.timeout_secs,
            retries: ctx.config.vlm.retries,
            replay_dir: Some(out.join("replay")),
        };
        Box::new(LiveClient::new(config).map_err(|e| anyhow::anyhow!("live client: {e}"))?)
    } else {
        bail!("unknown client {client_spec:?}; use oracle, replay:<dir>, or live");
    };

    let masks: Vec<FrameMasks> = (0..bundle.len())
        .map(|t| {
            let m = render_masks(&bundle, &tpl, t);
            FrameMasks {
                width: bundle.camera.width,
                height: bundle.camera.height,
                left_hand: m.left_hand,
                right_hand: m.right_hand,
                objects: vec![m.object],
            }
        })
        .collect();
    let outcome = label_video(
        &masks,
        &["object".to_string()],
        0,
        client.as_ref(),
        bundle.fps,
        rate,
    )
    .map_err(|e| anyhow::anyhow!("labeling: {e}"))?;

    let file = LabelFile {
        frames: outcome
            .frames
            .iter()
            .map(|f| LabelEntry {
                frame_index: f.frame_index,
                left: f.contact.map(|c| c[0]),
                right: f.contact.map(|c| c[1]),
                provenance: match f.provenance {
                    Provenance::Parsed => "parsed".into(),
                    Provenance::CorrectedAfterViolation => "corrected".into(),
                    Provenance::ZeroFallback => "zero_fallback".into(),
                    Provenance::Missing => "missing".into(),
                },
            })
            .collect(),
    };
    let path = out.join("labels.json");
    std::fs::write(&path, serde_json::to_string_pretty(&file)?)?;
    let present = file.frames.iter().filter(|f| f.left.is_some()).count();
    println!(
        "labeled {present}/{} frames to {}",
        file.frames.len(),
        path.display()
    );
    let resolved = serde_json::json!({"client": client_spec, "rate": rate});
    write_manifest(
        &out,
        "label-contacts",
        ctx.seed,
        resolved,
        vec![path.display().to_string()],
    )?;
    Ok(())
}

pub fn reconstruct(
    ctx: &Ctx,
    checkpoint: &Path,
    sequence: &Path,
    template: &Path,
    labels: Option<&Path>,
) -> Result<()> {
    let out = ensure_dir(&ctx.out)?;
    let ckpt = Checkpoint::load(checkpoint).map_err(|e| anyhow::anyhow!("checkpoint: {e}"))?;
    let mut bundle = data::load_sequence(sequence)?;
    let tpl = data::load_template(template, 0)?;
    let hand = StandardHand::default();

    // Optional external contact labels replace the stored observation
    // contacts at matching frames.
    if let Some(path) = labels {
        let text = std::fs::read_to_string(path)?;
        let file: LabelFile = serde_json::from_str(&text)?;
        for obs in bundle.observations.frames.iter_mut() {
            if let Some(entry) = file
                .frames
                .iter()
                .find(|f| f.frame_index == obs.frame_index)
            {
                if let (Some(l), Some(r)) = (entry.left, entry.right) {
                    obs.contact = [l, r];
                }
            }
        }
    }

    let window = ckpt.header.denoiser.window.min(bundle.len());
    let stride = (window / 2).max(1);
    let (_, plan) = window_split(&bundle, window, stride)
        .map_err(|e| anyhow::anyhow!("window split: {e}"))?;
    anyhow::ensure!(!plan.padded, "sequence shorter than one window");

    // Conditioning: noisy world-frame hands standing in for an upstream
    // estimator (noise magnitudes from the run configuration).
    let noisy_world = synthesize_noisy_hands(
        &bundle.hands,
        &ctx.config.noise_synth(),
        &hand,
        ctx.seed ^ 0x7e57,
    );
    let inputs = prepare_blend_inputs(&noisy_world, &bundle.camera, &plan.starts, window)
        .map_err(|e| anyhow::anyhow!("blend inputs: {e}"))?;

    let guidance: GuidanceConfig = ctx.config.guidance(ctx.steps.map(|s| s as usize));
    let (recon, report) = blend_guided_sample(
        &ckpt,
        &hand,
        inputs,
        &tpl,
        &bundle.observations,
        &bundle.camera,
        &guidance,
        ctx.seed,
        bundle.fps,
    )
    .map_err(|e| anyhow::anyhow!("guided reconstruction: {e}"))?;

    let covered = recon.hands.len();
    let out_bundle = SequenceBundle {
        fps: bundle.fps,
        hands: recon.hands,
        object: recon.object,
        contact: recon.contact,
        camera: bundle.camera.slice(0, covered),
        observations: Observations::default(),
    };
    let recon_path = out.join("reconstruction.json");
    data::save_sequence(&recon_path, &out_bundle)?;
    let report_path = out.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    println!(
        "reconstructed {} frames over {} windows; g: {:.3} -> {:.3}",
        covered,
        plan.starts.len(),
        report.steps.first().map(|s| s.g_total).unwrap_or(0.0),
        report.steps.last().map(|s| s.g_total).unwrap_or(0.0),
    );
    let resolved = serde_json::json!({
        "guidance": serde_json::to_value(&guidance)?,
        "noise": serde_json::to_value(&ctx.config.noise)?,
        "window": window,
        "stride": stride,
        "labels": labels.map(|p| p.display().to_string()),
    });
    write_manifest(
        &out,
        "reconstruct",
        ctx.seed,
        resolved,
        vec![recon_path.display().to_string(), report_path.display().to_string()],
    )?;
    Ok(())
}

pub fn evaluate(
    ctx: &Ctx,
    pred: &Path,
    gt: &Path,
    template: &Path,
    interpolate_oov: bool,
) -> Result<()> {
    let out = ensure_dir(&ctx.out)?;
    let pred_bundle = data::load_sequence(pred)?;
    let gt_bundle = data::load_sequence(gt)?;
    let tpl = data::load_template(template, 0)?;
    let n = pred_bundle.len().min(gt_bundle.len());
    anyhow::ensure!(n > 2, "need at least 3 overlapping frames");

    let mesh = TriMesh::from_template(&tpl).map_err(|e| anyhow::anyhow!("{e}"))?;
    let samples = mesh.surface_samples(GUIDANCE_SURFACE_SAMPLES, GUIDANCE_SURFACE_SEED);

    let gt_contact = oracle_contacts(&gt_bundle.hands, &gt_bundle.object, &tpl, ORACLE_THRESHOLD);
    let masks = split_subsets(
        &gt_contact,
        &gt_bundle.object,
        &gt_bundle.camera,
        &samples,
    );

    let mut pred_object = pred_bundle.object.slice(0, n);
    if interpolate_oov {
        let visible: Vec<bool> = masks.out_of_view.iter().map(|o| !o).collect();
        pred_object = interpolate_poses(&pred_object, &visible[..n]);
    }
    let pred_hands = pred_bundle.hands.slice(0, n);
    let gt_hands = gt_bundle.hands.slice(0, n);
    let gt_object = gt_bundle.object.slice(0, n);

    let hand_metrics =
        mpjpe_suite(&pred_hands, &gt_hands).map_err(|e| anyhow::anyhow!("mpjpe: {e}"))?;
    let object_pairs =
        add_adds(&pred_object, &gt_object, &samples).map_err(|e| anyhow::anyhow!("add: {e}"))?;
    let interaction = interaction_metric(
        &pred_hands,
        &pred_object,
        &gt_hands,
        &gt_object,
        &samples,
        AUC_MAX_THRESHOLD,
    )
    .map_err(|e| anyhow::anyhow!("interaction: {e}"))?;

    // Object translation acceleration error, mm per frame^2.
    let mut obj_acc = 0.0;
    let mut acc_count = 0usize;
    for t in 1..n.saturating_sub(1) {
        let a = |track: &worldgrip_core::ObjectTrack, k: usize| {
            nalgebra::Vector3::from_column_slice(&track.poses[k].translation)
        };
        let pa = a(&pred_object, t + 1) - 2.0 * a(&pred_object, t) + a(&pred_object, t - 1);
        let ga = a(&gt_object, t + 1) - 2.0 * a(&gt_object, t) + a(&gt_object, t - 1);
        obj_acc += (pa - ga).norm();
        acc_count += 1;
    }
    let obj_acc_mm = if acc_count > 0 {
        obj_acc / acc_count as f64 * 1000.0
    } else {
        0.0
    };

    let subset_metrics = |keep: &[bool]| -> SubsetMetrics {
        let add: Vec<f64> = object_pairs
            .add
            .iter()
            .zip(keep)
            .filter(|(_, k)| **k)
            .map(|(v, _)| *v)
            .collect();
        let adds: Vec<f64> = object_pairs
            .adds
            .iter()
            .zip(keep)
            .filter(|(_, k)| **k)
            .map(|(v, _)| *v)
            .collect();
        SubsetMetrics {
            add_auc: auc(&add, AUC_MAX_THRESHOLD),
            adds_auc: auc(&adds, AUC_MAX_THRESHOLD),
            frames: add.len(),
        }
    };

    let mut metrics = SequenceMetrics {
        wa_mpjpe_cm: hand_metrics.wa_mpjpe_cm,
        w_mpjpe_cm: hand_metrics.w_mpjpe_cm,
        pa_mpjpe_mm: hand_metrics.pa_mpjpe_mm,
        acc_norm_mm: hand_metrics.acc_norm_mm,
        object_add_auc: auc(&object_pairs.add, AUC_MAX_THRESHOLD),
        object_adds_auc: auc(&object_pairs.adds, AUC_MAX_THRESHOLD),
        object_acc_mm: obj_acc_mm,
        interaction_add_auc: interaction.add_auc,
        interaction_adds_auc: interaction.adds_auc,
        subsets: Default::default(),
    };
    metrics
        .subsets
        .insert("contact".into(), subset_metrics(&masks.contact[..n]));
    metrics
        .subsets
        .insert("truncated".into(), subset_metrics(&masks.truncated[..n]));
    metrics
        .subsets
        .insert("out_of_view".into(), subset_metrics(&masks.out_of_view[..n]));

    let mut report = EvalReport::default();
    let name = pred
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "sequence".into());
    report.sequences.insert(name, metrics);

    let json_path = out.join("report.json");
    std::fs::write(&json_path, report.to_json())?;
    let csv_path = out.join("summary.csv");
    std::fs::write(&csv_path, report.to_csv())?;
    let mean = report.mean();
    println!(
        "WA {:.2} cm | W {:.2} cm | PA {:.2} mm | ACC {:.2} | ADD AUC {:.3} | ADD-S AUC {:.3} | HOI ADD AUC {:.3}",
        mean.wa_mpjpe_cm,
        mean.w_mpjpe_cm,
        mean.pa_mpjpe_mm,
        mean.acc_norm_mm,
        mean.object_add_auc,
        mean.object_adds_auc,
        mean.interaction_add_auc,
    );
    let resolved = serde_json::json!({
        "interpolate_out_of_view": interpolate_oov,
        "auc_threshold": AUC_MAX_THRESHOLD,
    });
    write_manifest(
        &out,
        "evaluate",
        ctx.seed,
        resolved,
        vec![json_path.display().to_string(), csv_path.display().to_string()],
    )?;
    Ok(())
}

/// Parses "left:10-40,right:35-100" into a relaxed contact schedule.
fn parse_schedule(spec: &str, frames: usize) -> Result<Vec<[f64; 2]>> {
    let mut schedule = vec![[0.0, 0.0]; frames];
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (hand, range) = part
            .split_once(':')
            .with_context(|| format!("bad schedule part {part:?}"))?;
        let side = match hand {
            "left" => 0usize,
            "right" => 1,
            other => bail!("unknown hand {other:?} in schedule"),
        };
        let (a, b) = range
            .split_once('-')
            .with_context(|| format!("bad range {range:?}"))?;
        let start: usize = a.trim().parse()?;
        let end: usize = b.trim().parse()?;
        anyhow::ensure!(start <= end, "schedule range {start}-{end} inverted");
        for t in start..end.min(frames) {
            schedule[t][side] = 1.0;
        }
    }
    Ok(schedule)
}

pub fn plan(
    ctx: &Ctx,
    checkpoint: &Path,
    sequence: &Path,
    template: &Path,
    schedule_spec: &str,
) -> Result<()> {
    let out = ensure_dir(&ctx.out)?;
    let ckpt = Checkpoint::load(checkpoint).map_err(|e| anyhow::anyhow!("checkpoint: {e}"))?;
    let bundle = data::load_sequence(sequence)?;
    let tpl = data::load_template(template, 0)?;
    let hand = StandardHand::default();
    let window = ckpt.header.denoiser.window.min(bundle.len());

    let (windows, _plan) = window_split(&bundle, window, (window / 2).max(1))
        .map_err(|e| anyhow::anyhow!("window split: {e}"))?;
    let (canonical, _cam, frame) =
        worldgrip_geometry::canonical::canonicalize_window(&windows[0], &bundle.camera)
            .map_err(|e| anyhow::anyhow!("canonicalize: {e}"))?;
    // Coarse hands: the sequence's track with estimator noise.
    let noisy = synthesize_noisy_hands(
        &canonical.hands,
        &ckpt.header.noise_synth,
        &hand,
        ctx.seed ^ 0x91a,
    );
    let schedule = parse_schedule(schedule_spec, window)?;

    // Planner guidance: contact schedule + interaction + smoothness; no
    // reprojection and no observations.
    let guidance = GuidanceConfig {
        w_reproj: 0.0,
        w_contact: 1.0,
        sample_steps: ctx
            .steps
            .map(|s| s as usize)
            .unwrap_or(ctx.config.sample.steps),
        ..ctx.config.guidance(None)
    };
    let (recon, report) = worldgrip_guidance::plan_sample(
        &ckpt,
        &hand,
        &noisy,
        &tpl,
        schedule,
        &guidance,
        ctx.seed,
        bundle.fps,
    )
    .map_err(|e| anyhow::anyhow!("planning: {e}"))?;

    let world_hands = worldgrip_geometry::canonical::transform_hand_track(
        &recon.canonical_hands,
        &frame.world_from_local,
    );
    let world_object = worldgrip_geometry::canonical::transform_object_track(
        &recon.canonical_object,
        &frame.world_from_local,
    );
    let out_bundle = SequenceBundle {
        fps: bundle.fps,
        hands: world_hands,
        object: world_object,
        contact: recon.contact,
        camera: bundle.camera.slice(windows[0].start, window),
        observations: Observations::default(),
    };
    let plan_path = out.join("plan.json");
    data::save_sequence(&plan_path, &out_bundle)?;
    let report_path = out.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    println!(
        "planned {} frames; contact objective {:.4} -> {:.4}",
        window,
        report.steps.first().map(|s| s.g_contact).unwrap_or(0.0),
        report.steps.last().map(|s| s.g_contact).unwrap_or(0.0),
    );
    let resolved = serde_json::json!({
        "schedule": schedule_spec,
        "guidance": serde_json::to_value(&guidance)?,
    });
    write_manifest(
        &out,
        "plan",
        ctx.seed,
        resolved,
        vec![plan_path.display().to_string(), report_path.display().to_string()],
    )?;
    Ok(())
}


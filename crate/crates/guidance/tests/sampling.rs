//! Guided-sampler mechanics on a briefly-trained model: degenerate configs,
//! blending structure, and reporting.

use worldgrip_core::{window_split, Side};
use worldgrip_geometry::StandardHand;
use worldgrip_guidance::blend::{blend_guided_sample, prepare_blend_inputs};
use worldgrip_guidance::{GuidanceConfig, GuidanceError};
use worldgrip_prior::denoiser::DenoiserConfig;
use worldgrip_prior::sample::{sample_unconditional_window, SampleConfig};
use worldgrip_prior::train::{train, TrainConfig, TrainSet, TrainWindow};
use worldgrip_prior::{Checkpoint, NoiseSynthConfig, NoisyHands};
use worldgrip_synthdata::{generate_sequence, Scenario, SynthConfig, SynthSequence};

const WINDOW: usize = 40;

fn scene() -> SynthSequence {
    let config = SynthConfig {
        length: 60,
        ..SynthConfig::default()
    };
    generate_sequence(Scenario::PickPlace, 5, &config)
}

fn quick_checkpoint(seq: &SynthSequence) -> Checkpoint {
    let (windows, _) = window_split(&seq.bundle, WINDOW, WINDOW / 2).unwrap();
    let set = TrainSet {
        windows: windows
            .iter()
            .map(|w| {
                let (canonical, _, _) =
                    worldgrip_geometry::canonical::canonicalize_window(w, &seq.bundle.camera)
                        .unwrap();
                TrainWindow {
                    hands: canonical.hands,
                    object: canonical.object,
                    contact: canonical.contact,
                    template: seq.template.clone(),
                }
            })
            .collect(),
    };
    let config = DenoiserConfig {
        latent: 16,
        ffn: 32,
        heads: 2,
        layers: 1,
        bps_dims: 512,
        window: WINDOW,
        layout: Default::default(),
    };
    let train_cfg = TrainConfig {
        steps: 4,
        batch_size: 1,
        warmup_steps: u64::MAX,
        augment_template: false,
        ..TrainConfig::default()
    };
    train(&set, config, train_cfg, NoiseSynthConfig::zero(), 3)
        .unwrap()
        .0
}

#[test]
fn zero_weight_guidance_reproduces_unguided_sampling_bitwise() {
    let seq = scene();
    let ckpt = quick_checkpoint(&seq);
    let hand = StandardHand::default();
    let conditioning_world = NoisyHands::exact(seq.bundle.hands.slice(0, WINDOW));
    let inputs =
        prepare_blend_inputs(&conditioning_world, &seq.bundle.camera, &[0], WINDOW).unwrap();
    let canonical_conditioning = inputs[0].conditioning.clone();

    let config = GuidanceConfig::default().zero_weights();
    let (recon, report) = blend_guided_sample(
        &ckpt,
        &hand,
        inputs,
        &seq.template,
        &seq.bundle.observations,
        &seq.bundle.camera,
        &config,
        99,
        30.0,
    )
    .unwrap();
    assert_eq!(report.steps.len(), config.sample_steps);

    let (hands, object, contact) = sample_unconditional_window(
        &ckpt,
        &hand,
        &canonical_conditioning,
        &seq.template,
        &SampleConfig {
            steps: config.sample_steps,
        },
        99,
        30.0,
    )
    .unwrap();
    // The guided path decodes in the canonical frame before mapping to
    // world; its canonical tracks must equal the unguided sample exactly.
    assert_eq!(recon.canonical_hands, hands);
    assert_eq!(recon.canonical_object, object);
    assert_eq!(recon.contact.frames, contact.frames);
}

#[test]
fn single_window_blend_delegates_to_guided_sample() {
    let seq = scene();
    let ckpt = quick_checkpoint(&seq);
    let hand = StandardHand::default();
    let conditioning_world = NoisyHands::exact(seq.bundle.hands.slice(0, WINDOW));
    let inputs =
        prepare_blend_inputs(&conditioning_world, &seq.bundle.camera, &[0], WINDOW).unwrap();
    let inputs2 =
        prepare_blend_inputs(&conditioning_world, &seq.bundle.camera, &[0], WINDOW).unwrap();
    let config = GuidanceConfig {
        sample_steps: 8,
        ..GuidanceConfig::default()
    };
    let (a, ra) = blend_guided_sample(
        &ckpt,
        &hand,
        inputs,
        &seq.template,
        &seq.bundle.observations,
        &seq.bundle.camera,
        &config,
        7,
        30.0,
    )
    .unwrap();
    let (b, rb) = blend_guided_sample(
        &ckpt,
        &hand,
        inputs2,
        &seq.template,
        &seq.bundle.observations,
        &seq.bundle.camera,
        &config,
        7,
        30.0,
    )
    .unwrap();
    assert_eq!(a.hands, b.hands);
    assert_eq!(a.object, b.object);
    assert_eq!(ra.steps.len(), rb.steps.len());
}

#[test]
fn non_overlapping_windows_are_rejected() {
    let seq = scene();
    let ckpt = quick_checkpoint(&seq);
    let hand = StandardHand::default();
    let conditioning_world = NoisyHands::exact(seq.bundle.hands.clone());
    // Starts 0 and 40 with window 20: disjoint.
    let mut inputs =
        prepare_blend_inputs(&conditioning_world, &seq.bundle.camera, &[0, 40], 20).unwrap();
    inputs[1].start = 40;
    let config = GuidanceConfig {
        sample_steps: 4,
        ..GuidanceConfig::default()
    };
    let err = blend_guided_sample(
        &ckpt,
        &hand,
        inputs,
        &seq.template,
        &seq.bundle.observations,
        &seq.bundle.camera,
        &config,
        1,
        30.0,
    )
    .err()
    .expect("must fail");
    assert!(matches!(err, GuidanceError::NoOverlap));
}

#[test]
fn multi_window_blend_shares_shape_exactly_and_covers_all_frames() {
    let seq = scene();
    let ckpt = quick_checkpoint(&seq);
    let hand = StandardHand::default();
    let conditioning_world = NoisyHands::exact(seq.bundle.hands.clone());
    let (_, plan) = window_split(&seq.bundle, WINDOW, WINDOW / 2).unwrap();
    let inputs =
        prepare_blend_inputs(&conditioning_world, &seq.bundle.camera, &plan.starts, WINDOW)
            .unwrap();
    assert!(inputs.len() >= 2);
    let config = GuidanceConfig {
        sample_steps: 6,
        ..GuidanceConfig::default()
    };
    let (recon, report) = blend_guided_sample(
        &ckpt,
        &hand,
        inputs,
        &seq.template,
        &seq.bundle.observations,
        &seq.bundle.camera,
        &config,
        21,
        30.0,
    )
    .unwrap();
    assert_eq!(recon.hands.len(), 60, "every frame assigned");
    assert_eq!(recon.object.len(), 60);
    // Shape coefficients exactly constant across frames.
    for s in 0..2 {
        let side = [Side::Left, Side::Right][s];
        let first = recon.hands.frames[0][side.index()].shape;
        for f in 1..recon.hands.len() {
            assert_eq!(
                recon.hands.frames[f][side.index()].shape, first,
                "shape varies at frame {f}"
            );
        }
    }
    assert_eq!(report.steps.len(), 6);
    assert!(report.steps.iter().all(|s| s.g_total.is_finite()));
}

#[test]
fn guidance_gradients_are_recorded_per_step() {
    let seq = scene();
    let ckpt = quick_checkpoint(&seq);
    let hand = StandardHand::default();
    let conditioning_world = NoisyHands::exact(seq.bundle.hands.slice(0, WINDOW));
    let inputs =
        prepare_blend_inputs(&conditioning_world, &seq.bundle.camera, &[0], WINDOW).unwrap();
    let config = GuidanceConfig {
        sample_steps: 5,
        ..GuidanceConfig::default()
    };
    let (_, report) = blend_guided_sample(
        &ckpt,
        &hand,
        inputs,
        &seq.template,
        &seq.bundle.observations,
        &seq.bundle.camera,
        &config,
        31,
        30.0,
    )
    .unwrap();
    assert_eq!(report.steps.len(), 5);
    for s in &report.steps {
        assert!(s.grad_norm.is_finite());
        assert!(s.g_total >= 0.0);
    }
    assert!(!report.no_observations);
}

//! Contact pipeline integration: golden prompt bytes, oracle labeling,
//! fault injection, correction, and replay.

use std::collections::BTreeMap;
use std::sync::Mutex;

use worldgrip_contact::client::ReplayClient;
use worldgrip_contact::parse::format_labels;
use worldgrip_contact::{
    build_prompt, label_video, labeler_f1, oracle_contacts, ClientError, FrameMasks,
    OracleClient, Provenance, VlmClient, ORACLE_THRESHOLD, SYSTEM_PROMPT,
};
use worldgrip_core::RleMask;
use worldgrip_synthdata::{generate_sequence, render_masks, Scenario, SynthConfig};

fn simple_masks(n_objects: usize) -> FrameMasks {
    let blank = RleMask::from_bitmap(48, 48, &vec![false; 48 * 48]);
    let mut objects = Vec::new();
    for i in 0..n_objects {
        let mut bits = vec![false; 48 * 48];
        for y in 4..10u32 {
            for x in 0..6u32 {
                bits[(y * 48 + x + 8 * i as u32) as usize] = true;
            }
        }
        objects.push(RleMask::from_bitmap(48, 48, &bits));
    }
    FrameMasks {
        width: 48,
        height: 48,
        left_hand: blank.clone(),
        right_hand: blank,
        objects,
    }
}

#[test]
fn prompt_bytes_match_golden_templates() {
    let golden_system = include_str!("golden/system_prompt.txt");
    let golden_user_template = include_str!("golden/user_prompt_template.txt");
    assert_eq!(SYSTEM_PROMPT, golden_system);

    // The reference user template shows three candidates named obj1..obj3
    // followed by a continuation marker; the generated prompt for exactly
    // those candidates equals the template minus the marker line.
    let names: Vec<String> = (1..=3).map(|i| format!("obj{i}")).collect();
    let query = build_prompt(0, &simple_masks(3), &names).unwrap();
    let expected = golden_user_template.replacen("3. obj3\n...\n", "3. obj3\n", 1);
    assert_eq!(query.user, expected, "user prompt bytes diverge from the template");
}

#[test]
fn oracle_mock_reaches_perfect_f1_on_synthetic_scenes() {
    for (scenario, seed) in [(Scenario::PickPlace, 3u64), (Scenario::Handoff, 5)] {
        let config = SynthConfig {
            render_observations: false,
            ..SynthConfig::default()
        };
        let seq = generate_sequence(scenario, seed, &config);
        let gt = oracle_contacts(
            &seq.bundle.hands,
            &seq.bundle.object,
            &seq.template,
            ORACLE_THRESHOLD,
        );
        let client = OracleClient::single_candidate(&gt);

        // Masks for every frame (only the labeled ones get queried).
        let masks: Vec<FrameMasks> = (0..seq.bundle.len())
            .map(|t| {
                let m = render_masks(&seq.bundle, &seq.template, t);
                FrameMasks {
                    width: seq.bundle.camera.width,
                    height: seq.bundle.camera.height,
                    left_hand: m.left_hand,
                    right_hand: m.right_hand,
                    objects: vec![m.object],
                }
            })
            .collect();
        let out = label_video(&masks, &["target".to_string()], 0, &client, 30.0, 3.0).unwrap();
        // 30 fps at rate 3 queries every 10th frame.
        let indices: Vec<usize> = out.frames.iter().map(|f| f.frame_index).collect();
        assert_eq!(indices, (0..seq.bundle.len()).step_by(10).collect::<Vec<_>>());

        let gt_bits = gt.binarized();
        let pairs: Vec<([bool; 2], [bool; 2])> = out
            .present()
            .iter()
            .map(|(t, c)| ([c[0] > 0.5, c[1] > 0.5], gt_bits[*t]))
            .collect();
        let report = labeler_f1(&pairs);
        assert_eq!(report.pooled.f1, 1.0, "{scenario:?}");
    }
}

/// Corrupts every fifth frame's response into non-JSON garbage.
struct CorruptingClient {
    inner: OracleClient,
}

impl VlmClient for CorruptingClient {
    fn send(
        &self,
        query: &worldgrip_contact::ContactQuery,
    ) -> Result<String, ClientError> {
        if query.frame_index % 50 == 0 {
            return Ok("garbage <<<not json>>>".to_string());
        }
        self.inner.send(query)
    }
}

#[test]
fn corrupted_responses_leave_other_frames_intact() {
    let config = SynthConfig {
        render_observations: false,
        ..SynthConfig::default()
    };
    let seq = generate_sequence(Scenario::Carry, 7, &config);
    let gt = oracle_contacts(
        &seq.bundle.hands,
        &seq.bundle.object,
        &seq.template,
        ORACLE_THRESHOLD,
    );
    let client = CorruptingClient {
        inner: OracleClient::single_candidate(&gt),
    };
    let masks: Vec<FrameMasks> = (0..seq.bundle.len()).map(|_| simple_masks(1)).collect();
    let out = label_video(&masks, &["obj".to_string()], 0, &client, 30.0, 3.0).unwrap();
    let gt_bits = gt.binarized();
    let mut missing = 0;
    for frame in &out.frames {
        if frame.frame_index % 50 == 0 {
            assert_eq!(frame.provenance, Provenance::Missing);
            assert!(frame.contact.is_none());
            missing += 1;
        } else {
            assert_eq!(frame.provenance, Provenance::Parsed);
            let c = frame.contact.unwrap();
            assert_eq!([c[0] > 0.5, c[1] > 0.5], gt_bits[frame.frame_index]);
        }
    }
    assert!(missing >= 2, "fault injection hit {missing} frames");
}

/// Violates the one-out-of-k rule first, answers correctly on the re-query.
struct ViolatingOnceClient {
    calls: Mutex<BTreeMap<usize, usize>>,
    stubborn: bool,
}

impl VlmClient for ViolatingOnceClient {
    fn send(
        &self,
        query: &worldgrip_contact::ContactQuery,
    ) -> Result<String, ClientError> {
        let mut calls = self.calls.lock().unwrap();
        let count = calls.entry(query.frame_index).or_insert(0);
        *count += 1;
        let violating = format_labels(&query.candidates, &[[1, 0], [1, 1]]);
        if *count == 1 || self.stubborn {
            Ok(violating)
        } else {
            assert!(
                query.user.contains("VALIDATION ERROR"),
                "re-query must carry the correction"
            );
            Ok(format_labels(&query.candidates, &[[1, 0], [0, 1]]))
        }
    }
}

#[test]
fn violation_triggers_corrected_requery_then_zero_fallback() {
    let masks = vec![simple_masks(2)];
    let names = vec!["a".to_string(), "b".to_string()];

    let client = ViolatingOnceClient {
        calls: Mutex::new(BTreeMap::new()),
        stubborn: false,
    };
    let out = label_video(&masks, &names, 0, &client, 30.0, 30.0).unwrap();
    assert_eq!(out.frames[0].provenance, Provenance::CorrectedAfterViolation);
    assert_eq!(out.frames[0].contact, Some([1.0, 0.0]));

    let stubborn = ViolatingOnceClient {
        calls: Mutex::new(BTreeMap::new()),
        stubborn: true,
    };
    let out = label_video(&masks, &names, 0, &stubborn, 30.0, 30.0).unwrap();
    assert_eq!(out.frames[0].provenance, Provenance::ZeroFallback);
    assert_eq!(out.frames[0].contact, Some([0.0, 0.0]));
}

#[test]
fn replay_round_trips_recorded_responses() {
    let dir = std::env::temp_dir().join("worldgrip_replay_test");
    let _ = std::fs::remove_dir_all(&dir);
    let names = vec!["obj".to_string()];
    let query = build_prompt(4, &simple_masks(1), &names).unwrap();
    let response = format_labels(&names, &[[0, 1]]);
    ReplayClient::record(&dir, &query, 0, &response).unwrap();

    let client = ReplayClient::new(dir.clone());
    let replayed = client.send(&query).unwrap();
    assert_eq!(replayed, response);
    // A second attempt has no recorded entry.
    let err = client.send(&query).unwrap_err();
    assert!(matches!(err, ClientError::MissingReplay { frame: 4, attempt: 1 }));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn parse_format_round_trip_over_all_label_sets() {
    let names: Vec<String> = vec!["x".into(), "y".into(), "z".into()];
    for bits in 0..64u32 {
        let labels: Vec<[u8; 2]> = (0..3)
            .map(|i| [(bits >> (2 * i)) as u8 & 1, (bits >> (2 * i + 1)) as u8 & 1])
            .collect();
        let text = format_labels(&names, &labels);
        let parsed = worldgrip_contact::parse_response(&text, &names).unwrap();
        assert_eq!(parsed, labels);
    }
}

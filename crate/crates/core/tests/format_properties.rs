use proptest::prelude::*;
use worldgrip_core::json::{deserialize_sequence, serialize_sequence};
use worldgrip_core::*;

fn finite_real() -> impl Strategy<Value = f64> {
    // Exercises exponents well beyond the desk scale to stress the
    // shortest-round-trip writer.
    prop_oneof![
        -1.0e6..1.0e6f64,
        -1.0e-6..1.0e-6f64,
        Just(0.0),
        Just(-0.0),
    ]
}

fn arb_hand_state(side: Side) -> impl Strategy<Value = HandState> {
    (
        prop::array::uniform3(-1.5..1.5f64),
        prop::array::uniform3(finite_real()),
        prop::array::uniform::<_, 15>(-3.0..3.0f64),
        prop::array::uniform::<_, 10>(-2.0..2.0f64),
    )
        .prop_map(move |(orient, trans, artic, shape)| HandState {
            side,
            global_orient: orient,
            translation: trans,
            articulation: artic,
            shape,
        })
}

fn arb_sequence(max_len: usize) -> impl Strategy<Value = SequenceBundle> {
    (0..=max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(
                (arb_hand_state(Side::Left), arb_hand_state(Side::Right)),
                n,
            ),
            prop::collection::vec(
                prop::array::uniform::<_, { 2 * 21 * 3 }>(finite_real()),
                n,
            ),
            prop::collection::vec(prop::array::uniform3(finite_real()), n),
            prop::collection::vec(prop::array::uniform2(0.0..=1.0f64), n),
        )
            .prop_map(move |(hand_pairs, joint_flat, trans, contact)| {
                let frames: Vec<[HandState; 2]> =
                    hand_pairs.into_iter().map(|(l, r)| [l, r]).collect();
                let joints: Vec<[[[f64; 3]; 21]; 2]> = joint_flat
                    .iter()
                    .map(|flat| {
                        let mut j = [[[0.0; 3]; 21]; 2];
                        for s in 0..2 {
                            for q in 0..21 {
                                for k in 0..3 {
                                    j[s][q][k] = flat[s * 63 + q * 3 + k];
                                }
                            }
                        }
                        j
                    })
                    .collect();
                let poses = trans
                    .into_iter()
                    .map(|t| ObjectPose {
                        rot9: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                        translation: t,
                    })
                    .collect();
                let cam = CameraFrame {
                    rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                    translation: [0.0; 3],
                };
                SequenceBundle {
                    fps: 30.0,
                    hands: HandTrack::with_derived_velocities(frames, joints, 30.0),
                    object: ObjectTrack { poses },
                    contact: ContactTrack::new(contact),
                    camera: CameraTrack {
                        frames: vec![cam; n],
                        intrinsics: Intrinsics {
                            fx: 200.0,
                            fy: 200.0,
                            cx: 120.0,
                            cy: 90.0,
                        },
                        width: 240,
                        height: 180,
                        gravity_world: [0.0, 0.0, -1.0],
                    },
                    observations: Observations::default(),
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn round_trip_identity(seq in arb_sequence(6)) {
        let bytes = serialize_sequence(&seq).unwrap();
        let back = deserialize_sequence(&bytes).unwrap();
        prop_assert_eq!(&back, &seq);
        // Serializing again yields identical bytes.
        let bytes2 = serialize_sequence(&back).unwrap();
        prop_assert_eq!(bytes, bytes2);
    }

    #[test]
    fn window_split_covers_source(len in 2usize..400, window in 2usize..130, stride_frac in 1usize..130) {
        let stride = stride_frac.min(window);
        let frames = vec![[HandState::rest(Side::Left), HandState::rest(Side::Right)]; len];
        let joints = vec![[[[0.0; 3]; 21]; 2]; len];
        let seq = SequenceBundle {
            fps: 30.0,
            hands: HandTrack::with_derived_velocities(frames, joints, 30.0),
            object: ObjectTrack { poses: vec![ObjectPose::identity(); len] },
            contact: ContactTrack::new(vec![[0.0, 0.0]; len]),
            camera: CameraTrack {
                frames: vec![CameraFrame { rotation: [1.0,0.0,0.0,0.0,1.0,0.0,0.0,0.0,1.0], translation: [0.0;3] }; len],
                intrinsics: Intrinsics { fx: 200.0, fy: 200.0, cx: 120.0, cy: 90.0 },
                width: 240,
                height: 180,
                gravity_world: [0.0, 0.0, -1.0],
            },
            observations: Observations::default(),
        };
        let (windows, plan) = window_split(&seq, window, stride).unwrap();
        if len < window {
            prop_assert!(plan.padded);
            prop_assert_eq!(windows.len(), 1);
        } else {
            let mut coverage = vec![0usize; len];
            for w in &windows {
                prop_assert_eq!(w.len, window);
                for f in w.start..w.start + window {
                    coverage[f] += 1;
                }
            }
            prop_assert!(coverage.iter().all(|&c| c >= 1));
            // With stride <= T/2 every frame beyond the T/2 boundary margins
            // is covered at least twice.
            if stride * 2 <= window && len > window {
                let margin = window / 2;
                for f in margin..len.saturating_sub(margin) {
                    prop_assert!(coverage[f] >= 2, "frame {} covered {}", f, coverage[f]);
                }
            }
        }
    }
}

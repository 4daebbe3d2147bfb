use manipulant_core::kinematics::{Anthropometry, AnthropomorphicArm};
use manipulant_core::mocap::synth::synth_trial;
use manipulant_core::mocap::*;
use nalgebra::Isometry3;
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(cases)
    }
}

fn labeled(labels: &[Option<Action>]) -> TrialRecording {
    let frames = labels
        .iter()
        .enumerate()
        .map(|(i, l)| Frame {
            t: i as f64 / 60.0,
            left_wrist: Isometry3::identity(),
            right_wrist: Isometry3::identity(),
            left_joints: None,
            right_joints: None,
            shoulder_z: None,
            label: l.map(|a| a.code().to_string()),
        })
        .collect();
    TrialRecording::new(
        TrialHeader {
            participant_id: "p".into(),
            task: Task::SM,
            sample_rate: 60.0,
            anthropometry: Default::default(),
            provenance: None,
        },
        frames,
    )
    .unwrap()
}

fn label() -> impl Strategy<Value = Option<Action>> {
    prop_oneof![Just(None), (0usize..7).prop_map(|i| Some(Action::ALL[i]))]
}

fn subset() -> impl Strategy<Value = Vec<Action>> {
    prop::sample::subsequence(Action::ALL.to_vec(), 1..=7)
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn segments_are_disjoint_sorted_and_cover_the_subset(
        runs in prop::collection::vec((label(), 1usize..6), 1..25),
        subset in subset(),
    ) {
        let labels: Vec<Option<Action>> = runs.iter().flat_map(|(l, n)| std::iter::repeat_n(*l, *n)).collect();
        let trial = labeled(&labels);
        let seg = segment_actions(&trial, &subset);
        for w in seg.segments.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
            // maximal runs: adjacent segments of the same action must be separated
            if w[0].action == w[1].action {
                prop_assert!(w[0].end < w[1].start);
            }
        }
        let mut covered = vec![false; labels.len()];
        for s in &seg.segments {
            prop_assert!(!s.is_empty());
            for (i, c) in covered.iter_mut().enumerate().take(s.end).skip(s.start) {
                prop_assert_eq!(labels[i], Some(s.action));
                *c = true;
            }
        }
        for (i, l) in labels.iter().enumerate() {
            let wanted = l.is_some_and(|a| subset.contains(&a));
            prop_assert_eq!(covered[i], wanted);
        }
        for a in &subset {
            let present = labels.contains(&Some(*a));
            prop_assert_eq!(seg.missing.contains(a), !present);
        }
    }

    #[test]
    fn subsampling_keeps_endpoints_and_spacing(
        lens in prop::collection::vec(1usize..80, 1..8),
        k in 2usize..25,
    ) {
        let mut start = 0;
        let segments: Vec<ActionSegment> = lens
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let s = ActionSegment { action: Action::ALL[i % 7], start, end: start + n };
                start += n + 3;
                s
            })
            .collect();
        let sub = subsample_segments(&segments, k).unwrap();
        prop_assert_eq!(sub.samples.len(), k * segments.len());
        for (si, seg) in segments.iter().enumerate() {
            let idx: Vec<usize> = sub.samples.iter().filter(|s| s.segment == si).map(|s| s.frame_index).collect();
            prop_assert_eq!(idx.len(), k);
            prop_assert_eq!(idx[0], seg.start);
            prop_assert_eq!(*idx.last().unwrap(), seg.end - 1);
            let step = (seg.len() - 1) as f64 / (k - 1) as f64;
            for w in idx.windows(2) {
                prop_assert!(w[1] >= w[0]);
                prop_assert!(((w[1] - w[0]) as f64 - step).abs() <= 1.0);
            }
            prop_assert_eq!(sub.short_segments.contains(&si), seg.len() < k);
        }
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn synthetic_trials_are_valid_reachable_and_deterministic(
        task in prop::sample::select(vec![Task::SL, Task::SM, Task::SH, Task::C5, Task::C10]),
        seed in 0u64..10_000,
        noise in 0.0f64..0.03,
    ) {
        let trial = synth_trial(task, seed, noise);
        trial.validate().unwrap();
        prop_assert_eq!(&trial, &synth_trial(task, seed, noise));
        let seg = segment_actions(&trial, task.action_sequence());
        prop_assert!(seg.missing.is_empty());
        let arm = AnthropomorphicArm::new(Anthropometry::default(), Isometry3::identity()).unwrap();
        for f in &trial.frames {
            prop_assert!(arm.inverse_kinematics(&f.right_wrist, 0.0).is_ok());
            prop_assert!(arm.inverse_kinematics(&f.left_wrist, 0.0).is_ok());
        }
        let mut buf = Vec::new();
        trial.write(&mut buf).unwrap();
        let back = TrialRecording::read(buf.as_slice()).unwrap();
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        prop_assert_eq!(again, buf);
        if task.is_screwing() {
            let sc = segment_actions(&trial, &[Action::Sc]).segments[0];
            let mean = trial.frames[sc.start..sc.end]
                .iter()
                .map(|f| f.shoulder_z.unwrap() + f.right_wrist.translation.z)
                .sum::<f64>()
                / sc.len() as f64;
            prop_assert!((mean - task_metadata::target_height(task)).abs() < 0.05, "{}", mean);
        }
    }
}

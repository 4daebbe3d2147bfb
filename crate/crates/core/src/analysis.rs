//! Trials → per-frame ellipsoids → inter-trial profile.
//!
//! Each trial is segmented into the task's analysed actions, subsampled to
//! the same number of frames per action, and every sampled wrist pose is
//! turned into joint angles (unless the trial carries them), a Jacobian and a
//! velocity ellipsoid. Ellipsoids of all trials are then aligned on the
//! action-uniform time grid and reduced to a [`ManipulabilityProfile`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{Isometry3, Matrix3, Translation3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{Anthropometry, AnthropomorphicArm, GraspModel, JointConfig, TaskSpace};
use crate::manipulability::{
    reframe, velocity_manipulability, DualArmSystem, EllipsoidKind, EllipsoidRecord, ManipulabilityEllipsoid,
};
use crate::mocap::{
    segment_actions, shoulder_offsets, subsample_segments, Action, Frame, Task, TrialRecording,
    DEFAULT_FRAMES_PER_ACTION,
};
use crate::profile::{action_time, build_profile, ManipulabilityProfile};
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArmSelection {
    #[default]
    Right,
    Left,
    /// Both arms holding one object (tight grasp at the hands).
    Dual,
}

impl FromStr for ArmSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right" => Ok(ArmSelection::Right),
            "left" => Ok(ArmSelection::Left),
            "dual" => Ok(ArmSelection::Dual),
            _ => Err(Error::Parse(format!("unknown arm selection {s:?} (right, left, dual)"))),
        }
    }
}

impl fmt::Display for ArmSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArmSelection::Right => "right",
            ArmSelection::Left => "left",
            ArmSelection::Dual => "dual",
        })
    }
}

/// Frame the ellipsoids are expressed in. Shoulder and neck frames share
/// their axes in the trial format, so reframing between them is a pure
/// relabelling; the rotation is still applied through [`reframe`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrameTag {
    #[default]
    Shoulder,
    Neck,
}

impl FrameTag {
    pub fn name(self) -> &'static str {
        match self {
            FrameTag::Shoulder => "shoulder",
            FrameTag::Neck => "neck",
        }
    }

    fn rotation(self) -> Matrix3<f64> {
        Matrix3::identity()
    }
}

impl FromStr for FrameTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shoulder" => Ok(FrameTag::Shoulder),
            "neck" => Ok(FrameTag::Neck),
            _ => Err(Error::Parse(format!("unknown frame tag {s:?} (shoulder, neck)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub arm: ArmSelection,
    pub frame: FrameTag,
    pub frames_per_action: usize,
    /// Elbow swivel used to resolve the arm-triangle redundancy (radians).
    pub swivel: f64,
    /// Default body dimensions; per-trial overrides take precedence.
    pub anthropometry: Anthropometry,
    /// Actions to analyse; `None` uses the task's analysis subset.
    pub actions: Option<Vec<Action>>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            arm: ArmSelection::Right,
            frame: FrameTag::Shoulder,
            frames_per_action: DEFAULT_FRAMES_PER_ACTION,
            swivel: 0.0,
            anthropometry: Anthropometry::default(),
            actions: None,
        }
    }
}

impl AnalysisOptions {
    pub fn actions_for(&self, task: Task) -> Vec<Action> {
        self.actions.clone().unwrap_or_else(|| task.analysis_subset().to_vec())
    }
}

/// Ellipsoids of one trial on the aligned time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialEllipsoids {
    pub participant_id: String,
    pub records: Vec<EllipsoidRecord>,
    /// Frames repeated because their segment was shorter than requested.
    pub short_segments: usize,
    /// Ellipsoids flagged singular (kept).
    pub singular: usize,
}

#[derive(Debug)]
pub struct TrialFailure {
    pub participant_id: String,
    pub error: Error,
}

#[derive(Debug)]
pub struct Analysis {
    pub actions: Vec<Action>,
    pub trials: Vec<TrialEllipsoids>,
    pub failures: Vec<TrialFailure>,
    pub profile: ManipulabilityProfile,
}

fn arm_for(dims: Anthropometry, origin: nalgebra::Vector3<f64>) -> Result<AnthropomorphicArm> {
    AnthropomorphicArm::new(
        dims,
        Isometry3::from_parts(Translation3::from(origin), Default::default()),
    )
}

fn joints(
    arm: &AnthropomorphicArm,
    wrist: &Isometry3<f64>,
    given: Option<&Vec<f64>>,
    swivel: f64,
) -> Result<JointConfig> {
    match given {
        Some(q) if q.len() == 7 => Ok(JointConfig::from_slice(q)),
        Some(q) => Err(Error::DimensionMismatch {
            expected: 7,
            got: q.len(),
        }),
        None => arm.inverse_kinematics(&(arm.shoulder() * wrist), swivel),
    }
}

/// Velocity ellipsoid of one frame for the selected arm(s), in the shoulder
/// (single arm) or neck (dual) frame before reframing.
pub fn frame_ellipsoid(
    trial: &TrialRecording,
    frame: &Frame,
    opts: &AnalysisOptions,
) -> Result<ManipulabilityEllipsoid> {
    let dims = trial.header.anthropometry.resolve(&opts.anthropometry);
    match opts.arm {
        ArmSelection::Right | ArmSelection::Left => {
            let arm = arm_for(dims, nalgebra::Vector3::zeros())?;
            let (wrist, given) = if opts.arm == ArmSelection::Right {
                (&frame.right_wrist, frame.right_joints.as_ref())
            } else {
                (&frame.left_wrist, frame.left_joints.as_ref())
            };
            let q = joints(&arm, wrist, given, opts.swivel)?;
            velocity_manipulability(arm.chain(), &q, TaskSpace::Position)
        }
        ArmSelection::Dual => {
            let (ol, or) = shoulder_offsets(trial.header.anthropometry.shoulder_width());
            let left = arm_for(dims, ol)?;
            let right = arm_for(dims, or)?;
            // mirror the swivel so both elbows open outwards symmetrically
            let ql = joints(&left, &frame.left_wrist, frame.left_joints.as_ref(), -opts.swivel)?;
            let qr = joints(&right, &frame.right_wrist, frame.right_joints.as_ref(), opts.swivel)?;
            let pl = left.chain().end_position(&ql)?;
            let pr = right.chain().end_position(&qr)?;
            let sys = DualArmSystem::new(
                left.chain().clone(),
                right.chain().clone(),
                GraspModel::from_world_contacts(pl, pr)?,
            );
            sys.velocity_manipulability(&ql, &qr, crate::kinematics::GraspVariant::Positional)
        }
    }
}

/// Ellipsoids of one trial at the subsampled frames, tagged with their
/// normalized time.
pub fn trial_ellipsoids(trial: &TrialRecording, opts: &AnalysisOptions) -> Result<TrialEllipsoids> {
    let actions = opts.actions_for(trial.header.task);
    let seg = segment_actions(trial, &actions);
    if !seg.missing.is_empty() {
        let names: Vec<&str> = seg.missing.iter().map(|a| a.code()).collect();
        return Err(Error::InvalidTrial(format!("missing actions: {}", names.join(", "))));
    }
    let found: Vec<Action> = seg.segments.iter().map(|s| s.action).collect();
    if found != actions {
        let names: Vec<&str> = found.iter().map(|a| a.code()).collect();
        return Err(Error::InvalidTrial(format!(
            "expected one segment per action in task order, found [{}]",
            names.join(", ")
        )));
    }
    let sub = subsample_segments(&seg.segments, opts.frames_per_action)?;
    let frame_name = match opts.arm {
        ArmSelection::Dual => FrameTag::Neck.name(),
        _ => opts.frame.name(),
    };
    let mut records = Vec::with_capacity(sub.samples.len());
    let mut singular = 0;
    for (i, s) in sub.samples.iter().enumerate() {
        let frame = &trial.frames[s.frame_index];
        let m = frame_ellipsoid(trial, frame, opts)
            .map_err(|e| Error::InvalidTrial(format!("frame {}: {e}", s.frame_index)))?;
        let m = reframe(&m, &opts.frame.rotation(), frame_name)?;
        if m.is_singular() {
            singular += 1;
        }
        let j = i % opts.frames_per_action;
        records.push(EllipsoidRecord {
            t: frame.t,
            frame_tag: m.frame.clone(),
            kind: EllipsoidKind::Velocity,
            spd: SpdMatrix::new(m.matrix().clone())
                .map_err(|e| Error::InvalidTrial(format!("frame {}: {e}", s.frame_index)))?,
            u: Some(action_time(s.segment, j, actions.len(), opts.frames_per_action)),
            trial: Some(trial.header.participant_id.clone()),
            action: Some(s.action.code().to_string()),
        });
    }
    Ok(TrialEllipsoids {
        participant_id: trial.header.participant_id.clone(),
        records,
        short_segments: sub.short_segments.len(),
        singular,
    })
}

/// Runs the pipeline over all trials. A failing trial is reported and
/// skipped; the call errors only when no trial survives or the surviving
/// trials disagree on the task.
pub fn analyze_trials(trials: &[TrialRecording], opts: &AnalysisOptions) -> Result<Analysis> {
    if trials.is_empty() {
        return Err(Error::InvalidTrial("no trials".into()));
    }
    let task = trials[0].header.task;
    if let Some(t) = trials.iter().find(|t| t.header.task != task) {
        return Err(Error::InvalidTrial(format!(
            "mixed tasks: {} and {}",
            task, t.header.task
        )));
    }
    let actions = opts.actions_for(task);
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for trial in trials {
        match trial_ellipsoids(trial, opts) {
            Ok(e) => ok.push(e),
            Err(error) => failures.push(TrialFailure {
                participant_id: trial.header.participant_id.clone(),
                error,
            }),
        }
    }
    if ok.is_empty() {
        let first = failures.remove(0);
        return Err(Error::InvalidTrial(format!(
            "all {} trials failed; first ({}): {}",
            trials.len(),
            first.participant_id,
            first.error
        )));
    }
    let steps = actions.len() * opts.frames_per_action;
    let aligned: Vec<Vec<SpdMatrix>> = (0..steps)
        .map(|i| ok.iter().map(|t| t.records[i].spd.clone()).collect())
        .collect();
    let profile = build_profile(&aligned)?.with_actions(&actions, opts.frames_per_action)?;
    Ok(Analysis {
        actions,
        trials: ok,
        failures,
        profile,
    })
}

/// Normalized-time samples of all trials, the learning set for the mixture.
pub fn timed_samples(trials: &[TrialEllipsoids]) -> Vec<crate::profile::TimedSpd> {
    trials
        .iter()
        .flat_map(|t| t.records.iter())
        .map(|r| crate::profile::TimedSpd {
            u: r.u.unwrap_or(0.0),
            m: r.spd.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mocap::synth_trial;

    fn trials(task: Task, n: u64) -> Vec<TrialRecording> {
        (0..n).map(|s| synth_trial(task, s, 0.01)).collect()
    }

    #[test]
    fn screwing_profile_has_seven_actions_of_twenty_steps() {
        let a = analyze_trials(&trials(Task::SM, 3), &AnalysisOptions::default()).unwrap();
        assert!(a.failures.is_empty());
        assert_eq!(a.profile.len(), 7 * 20);
        assert_eq!(a.trials.len(), 3);
        assert_eq!(a.profile.steps[0].n_samples, 3);
        assert_eq!(a.profile.steps[0].action, Some(Action::Re));
        assert_eq!(a.profile.steps[139].action, Some(Action::Rl));
        let r = &a.trials[0].records;
        assert_eq!(r[0].u, Some(0.0));
        assert_eq!(r[139].u, Some(1.0));
        assert!(r.iter().all(|r| r.frame_tag == "shoulder"));
    }

    #[test]
    fn carrying_uses_dual_arm_subset() {
        let opts = AnalysisOptions {
            arm: ArmSelection::Dual,
            ..Default::default()
        };
        let a = analyze_trials(&trials(Task::C5, 2), &opts).unwrap();
        assert_eq!(a.actions, vec![Action::Pi, Action::Ca, Action::Pl]);
        assert_eq!(a.profile.len(), 60);
        assert_eq!(a.trials[0].records[0].frame_tag, "neck");
    }

    #[test]
    fn failing_trial_is_isolated() {
        let mut ts = trials(Task::SM, 3);
        for f in ts[1].frames.iter_mut() {
            if f.action() == Some(Action::Sc) {
                f.label = Some("Fm".into());
            }
        }
        let a = analyze_trials(&ts, &AnalysisOptions::default()).unwrap();
        assert_eq!(a.trials.len(), 2);
        assert_eq!(a.failures.len(), 1);
        assert_eq!(a.failures[0].participant_id, "synth-0001");
        assert!(a.failures[0].error.to_string().contains("Sc"));
        // a profile needs two samples per timestep
        let one = &ts[..1];
        assert!(analyze_trials(one, &AnalysisOptions::default()).is_err());
        assert!(analyze_trials(&[], &AnalysisOptions::default())
            .unwrap_err()
            .to_string()
            .contains("no trials"));
    }

    #[test]
    fn analysis_is_deterministic() {
        let ts = trials(Task::SM, 2);
        let a = analyze_trials(&ts, &AnalysisOptions::default()).unwrap();
        let b = analyze_trials(&ts, &AnalysisOptions::default()).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.profile, b.profile);
    }

    #[test]
    fn given_joint_angles_bypass_inverse_kinematics() {
        let mut trial = synth_trial(Task::SM, 4, 0.0);
        let opts = AnalysisOptions::default();
        let arm = arm_for(Anthropometry::default(), nalgebra::Vector3::zeros()).unwrap();
        let frame = trial.frames[100].clone();
        let q = arm.inverse_kinematics(&frame.right_wrist, 0.0).unwrap();
        let direct = frame_ellipsoid(&trial, &frame, &opts).unwrap();
        trial.frames[100].right_joints = Some(q.as_slice().to_vec());
        let given = frame_ellipsoid(&trial, &trial.frames[100], &opts).unwrap();
        approx::assert_relative_eq!(direct.matrix(), given.matrix(), epsilon = 1e-12);
    }
}

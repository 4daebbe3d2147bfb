//! Motion-capture trials: data model, JSON-lines format, action segmentation
//! and per-action subsampling.
//!
//! Trial files are JSON lines. The first line is a header
//! `{participant_id, task, sample_rate, anthropometry?}`; every following
//! line is one frame
//! `{t, lw_pos[3], lw_quat[4], rw_pos[3], rw_quat[4], label}` with wrist
//! poses in the corresponding shoulder frame (x forward, y left, z up) and
//! quaternions ordered `[w, x, y, z]`. `label` is either one string or a list
//! of annotator labels resolved by majority vote. Optional frame fields:
//! `lq`/`rq` (7 joint angles per arm) and `shoulder_z` (shoulder height above
//! the floor, meters).

pub mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::Anthropometry;

pub use synth::{synth_trial, SynthOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    SL,
    SM,
    SH,
    C5,
    C10,
    #[serde(rename = "custom")]
    Custom,
}

impl Task {
    pub fn is_screwing(self) -> bool {
        matches!(self, Task::SL | Task::SM | Task::SH)
    }

    pub fn is_carrying(self) -> bool {
        matches!(self, Task::C5 | Task::C10)
    }

    /// Declared action sequence of the task.
    pub fn action_sequence(self) -> &'static [Action] {
        use Action::*;
        match self {
            Task::SL | Task::SM | Task::SH => &[Re, Pi, Ca, Pl, Fm, Sc, Rl],
            Task::C5 | Task::C10 => &[Re, Pi, Ca, Pl, Rl],
            Task::Custom => &[Re, Pi, Ca, Pl, Fm, Sc, Rl],
        }
    }

    /// Actions analysed for the task.
    pub fn analysis_subset(self) -> &'static [Action] {
        use Action::*;
        match self {
            Task::C5 | Task::C10 => &[Pi, Ca, Pl],
            _ => &[Re, Pi, Ca, Pl, Fm, Sc, Rl],
        }
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SL" => Ok(Task::SL),
            "SM" => Ok(Task::SM),
            "SH" => Ok(Task::SH),
            "C5" => Ok(Task::C5),
            "C10" => Ok(Task::C10),
            "custom" => Ok(Task::Custom),
            _ => Err(Error::Parse(format!("unknown task {s:?}"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Task::SL => "SL",
            Task::SM => "SM",
            Task::SH => "SH",
            Task::C5 => "C5",
            Task::C10 => "C10",
            Task::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Re,
    Pi,
    Ca,
    Pl,
    Fm,
    Sc,
    Rl,
}

impl Action {
    pub const ALL: [Action; 7] = [
        Action::Re,
        Action::Pi,
        Action::Ca,
        Action::Pl,
        Action::Fm,
        Action::Sc,
        Action::Rl,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Action::Re => "Re",
            Action::Pi => "Pi",
            Action::Ca => "Ca",
            Action::Pl => "Pl",
            Action::Fm => "Fm",
            Action::Sc => "Sc",
            Action::Rl => "Rl",
        }
    }

    pub fn from_label(label: &str) -> Option<Action> {
        Action::ALL.iter().copied().find(|a| a.code() == label)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Action {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Action::from_label(s).ok_or_else(|| Error::Parse(format!("unknown action {s:?}")))
    }
}

/// Heights (m) and loads (kg) of the recorded activities.
pub mod task_metadata {
    use super::Task;

    pub const SCREW_HEIGHT_SL: f64 = 0.60;
    pub const SCREW_HEIGHT_SM: f64 = 1.15;
    pub const SCREW_HEIGHT_SH: f64 = 1.75;
    pub const PICK_TABLE_SCREW: f64 = 0.75;
    pub const PICK_TABLE_CARRY: f64 = 0.55;
    pub const LOAD_C5: f64 = 5.0;
    pub const LOAD_C10: f64 = 10.0;
    pub const SHELF_C5: f64 = 0.20;
    pub const SHELF_C10: f64 = 1.10;

    /// Height of the screwing point or of the shelf the load goes on.
    pub fn target_height(task: Task) -> f64 {
        match task {
            Task::SL => SCREW_HEIGHT_SL,
            Task::SM | Task::Custom => SCREW_HEIGHT_SM,
            Task::SH => SCREW_HEIGHT_SH,
            Task::C5 => SHELF_C5,
            Task::C10 => SHELF_C10,
        }
    }

    pub fn pick_height(task: Task) -> f64 {
        if task.is_carrying() {
            PICK_TABLE_CARRY
        } else {
            PICK_TABLE_SCREW
        }
    }

    pub fn load(task: Task) -> Option<f64> {
        match task {
            Task::C5 => Some(LOAD_C5),
            Task::C10 => Some(LOAD_C10),
            _ => None,
        }
    }
}

/// Per-participant overrides of the default body dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnthropometryOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_arm_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forearm_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shoulder_width: Option<f64>,
}

pub const DEFAULT_SHOULDER_WIDTH: f64 = 0.36;

impl AnthropometryOverrides {
    pub fn resolve(&self, defaults: &Anthropometry) -> Anthropometry {
        Anthropometry {
            upper_arm_length: self.upper_arm_length.unwrap_or(defaults.upper_arm_length),
            forearm_length: self.forearm_length.unwrap_or(defaults.forearm_length),
            hand_length: self.hand_length.unwrap_or(defaults.hand_length),
        }
    }

    pub fn shoulder_width(&self) -> f64 {
        self.shoulder_width.unwrap_or(DEFAULT_SHOULDER_WIDTH)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialHeader {
    pub participant_id: String,
    pub task: Task,
    pub sample_rate: f64,
    #[serde(default)]
    pub anthropometry: AnthropometryOverrides,
    /// Opaque record of how the file was produced; carried through unchanged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub left_wrist: Isometry3<f64>,
    pub right_wrist: Isometry3<f64>,
    pub left_joints: Option<Vec<f64>>,
    pub right_joints: Option<Vec<f64>>,
    pub shoulder_z: Option<f64>,
    /// Resolved action label; `None` when annotators tied.
    pub label: Option<String>,
}

impl Frame {
    pub fn action(&self) -> Option<Action> {
        self.label.as_deref().and_then(Action::from_label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecording {
    pub header: TrialHeader,
    pub frames: Vec<Frame>,
    /// Frames whose annotators tied; their label is dropped.
    pub tied_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum LabelWire {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameWire {
    t: f64,
    lw_pos: [f64; 3],
    lw_quat: [f64; 4],
    rw_pos: [f64; 3],
    rw_quat: [f64; 4],
    label: LabelWire,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lq: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rq: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shoulder_z: Option<f64>,
}

/// Majority vote over annotator labels; `None` on a tie for first place.
pub fn majority_label(labels: &[String]) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.as_str()).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    let mut winners = counts.iter().filter(|(_, &c)| c == best);
    let first = winners.next()?;
    if winners.next().is_some() {
        None
    } else {
        Some(first.0.to_string())
    }
}

fn pose_from_wire(pos: [f64; 3], quat: [f64; 4], line: usize) -> Result<Isometry3<f64>> {
    let q = Quaternion::new(quat[0], quat[1], quat[2], quat[3]);
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 || pos.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidTrial(format!(
            "line {line}: quaternion norm {norm} is not unit"
        )));
    }
    Ok(Isometry3::from_parts(
        Translation3::new(pos[0], pos[1], pos[2]),
        // values already unit to rounding are kept bit-for-bit so rewrites are stable
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        },
    ))
}

fn pose_to_wire(p: &Isometry3<f64>) -> ([f64; 3], [f64; 4]) {
    let t = p.translation.vector;
    let q = p.rotation.quaternion();
    ([t.x, t.y, t.z], [q.w, q.i, q.j, q.k])
}

impl TrialRecording {
    pub fn new(header: TrialHeader, frames: Vec<Frame>) -> Result<Self> {
        let trial = TrialRecording {
            header,
            frames,
            tied_frames: 0,
        };
        trial.validate()?;
        Ok(trial)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::InvalidTrial("trial has no frames".into()));
        }
        if !(self.header.sample_rate > 0.0) {
            return Err(Error::InvalidTrial("sample_rate must be positive".into()));
        }
        for (i, w) in self.frames.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::InvalidTrial(format!(
                    "timestamps not strictly increasing at frame {}",
                    i + 1
                )));
            }
        }
        for (i, f) in self.frames.iter().enumerate() {
            for pose in [&f.left_wrist, &f.right_wrist] {
                let r = pose.rotation.to_rotation_matrix().into_inner();
                let err = (r * r.transpose() - nalgebra::Matrix3::identity()).abs().max();
                if err > 1e-8 {
                    return Err(Error::InvalidTrial(format!("frame {i}: rotation not orthonormal")));
                }
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter_map(|(n, l)| match l {
            Ok(s) if s.trim().is_empty() => None,
            other => Some((n + 1, other)),
        });
        let (n, first) = lines
            .next()
            .ok_or_else(|| Error::InvalidTrial("empty trial file".into()))?;
        let header: TrialHeader =
            serde_json::from_str(&first?).map_err(|e| Error::InvalidTrial(format!("line {n}: header: {e}")))?;
        let mut frames = Vec::new();
        let mut tied = 0;
        for (n, line) in lines {
            let wire: FrameWire =
                serde_json::from_str(&line?).map_err(|e| Error::InvalidTrial(format!("line {n}: {e}")))?;
            let label = match wire.label {
                LabelWire::One(s) => Some(s),
                LabelWire::Many(v) => {
                    let l = majority_label(&v);
                    if l.is_none() {
                        tied += 1;
                    }
                    l
                }
            };
            frames.push(Frame {
                t: wire.t,
                left_wrist: pose_from_wire(wire.lw_pos, wire.lw_quat, n)?,
                right_wrist: pose_from_wire(wire.rw_pos, wire.rw_quat, n)?,
                left_joints: wire.lq,
                right_joints: wire.rq,
                shoulder_z: wire.shoulder_z,
                label,
            });
        }
        let mut trial = TrialRecording::new(header, frames)?;
        trial.tied_frames = tied;
        Ok(trial)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for f in &self.frames {
            let (lw_pos, lw_quat) = pose_to_wire(&f.left_wrist);
            let (rw_pos, rw_quat) = pose_to_wire(&f.right_wrist);
            let wire = FrameWire {
                t: f.t,
                lw_pos,
                lw_quat,
                rw_pos,
                rw_quat,
                label: LabelWire::One(f.label.clone().unwrap_or_default()),
                lq: f.left_joints.clone(),
                rq: f.right_joints.clone(),
                shoulder_z: f.shoulder_z,
            };
            serde_json::to_writer(&mut w, &wire)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.frames.last().map_or(0.0, |l| l.t) - self.frames[0].t
    }
}

/// Maximal run of one action label: frames `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSegment {
    pub action: Action,
    pub start: usize,
    pub end: usize,
}

impl ActionSegment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Segmentation {
    pub segments: Vec<ActionSegment>,
    /// Requested actions that never occur in the trial.
    pub missing: Vec<Action>,
}

/// Maximal contiguous runs of the requested actions, in temporal order.
pub fn segment_actions(trial: &TrialRecording, subset: &[Action]) -> Segmentation {
    let mut segments: Vec<ActionSegment> = Vec::new();
    let mut current: Option<ActionSegment> = None;
    for (i, f) in trial.frames.iter().enumerate() {
        let action = f.action().filter(|a| subset.contains(a));
        match (&mut current, action) {
            (Some(seg), Some(a)) if seg.action == a => seg.end = i + 1,
            (cur, a) => {
                if let Some(seg) = cur.take() {
                    segments.push(seg);
                }
                *cur = a.map(|action| ActionSegment {
                    action,
                    start: i,
                    end: i + 1,
                });
            }
        }
    }
    if let Some(seg) = current {
        segments.push(seg);
    }
    let mut missing = Vec::new();
    for a in subset {
        if !segments.iter().any(|s| s.action == *a) && !missing.contains(a) {
            missing.push(*a);
        }
    }
    Segmentation { segments, missing }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampledFrame {
    pub segment: usize,
    pub action: Action,
    pub frame_index: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Subsample {
    pub samples: Vec<SampledFrame>,
    /// Segments shorter than the requested count (frames were repeated).
    pub short_segments: Vec<usize>,
}

impl Subsample {
    pub fn frames<'a>(&self, trial: &'a TrialRecording) -> Vec<&'a Frame> {
        self.samples.iter().map(|s| &trial.frames[s.frame_index]).collect()
    }
}

pub const DEFAULT_FRAMES_PER_ACTION: usize = 20;

/// Equally spaced frame indices per segment, endpoints included.
pub fn subsample_segments(segments: &[ActionSegment], frames_per_action: usize) -> Result<Subsample> {
    if frames_per_action < 2 {
        return Err(Error::OutOfRange {
            value: frames_per_action as f64,
            range: "frames_per_action >= 2",
        });
    }
    let mut out = Subsample::default();
    for (si, seg) in segments.iter().enumerate() {
        if seg.is_empty() {
            return Err(Error::InvalidTrial(format!("segment {si} is empty")));
        }
        if seg.len() < frames_per_action {
            out.short_segments.push(si);
        }
        let span = (seg.len() - 1) as f64;
        for i in 0..frames_per_action {
            let offset = (i as f64 * span / (frames_per_action - 1) as f64).round() as usize;
            out.samples.push(SampledFrame {
                segment: si,
                action: seg.action,
                frame_index: seg.start + offset,
            });
        }
    }
    Ok(out)
}

/// Shoulder-frame origins in the neck frame for the left and right arm.
pub fn shoulder_offsets(shoulder_width: f64) -> (Vector3<f64>, Vector3<f64>) {
    let h = 0.5 * shoulder_width;
    (Vector3::new(0.0, h, 0.0), Vector3::new(0.0, -h, 0.0))
}

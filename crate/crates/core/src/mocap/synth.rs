//! Seeded synthetic trials.
//!
//! The right wrist moves through a fixed list of waypoints (rest, pick table,
//! carry pose, placing/screwing point, rest) with smoothstep interpolation;
//! each action label covers one leg of the path. The shoulder height drops
//! (a squat) whenever a waypoint would otherwise be out of reach. The left
//! wrist mirrors the right one across the sagittal plane. Noise is a
//! per-trial waypoint offset plus a few low-frequency sinusoids, both scaled
//! by `noise_level` (meters); with zero noise every phase starts exactly on
//! its waypoint.

use std::f64::consts::{PI, TAU};

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{task_metadata, Action, AnthropometryOverrides, Frame, Task, TrialHeader, TrialRecording};
use crate::kinematics::Anthropometry;

pub const STANDING_SHOULDER_Z: f64 = 1.40;
pub const DEFAULT_SAMPLE_RATE: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub sample_rate: f64,
    pub anthropometry: AnthropometryOverrides,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            sample_rate: DEFAULT_SAMPLE_RATE,
            anthropometry: AnthropometryOverrides::default(),
        }
    }
}

/// Right-wrist target in the shoulder frame plus the shoulder height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Vector3<f64>,
    pub shoulder_z: f64,
    /// Rotation about y tilting the fingers forward (0 = pointing down).
    pub pitch: f64,
}

impl Waypoint {
    /// Wrist at world height `z`, `forward` meters in front of the shoulder;
    /// the shoulder is lowered so the wrist sits at most `drop` below it.
    fn at_height(z: f64, forward: f64, lateral: f64, drop: f64, pitch: f64) -> Self {
        let shoulder_z = STANDING_SHOULDER_Z.min(z + drop);
        Waypoint {
            position: Vector3::new(forward, lateral, z - shoulder_z),
            shoulder_z,
            pitch,
        }
    }

    pub fn world_height(&self) -> f64 {
        self.shoulder_z + self.position.z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub action: Action,
    pub duration: f64,
    pub from: Waypoint,
    pub to: Waypoint,
}

fn nominal_duration(action: Action) -> f64 {
    match action {
        Action::Re => 1.2,
        Action::Pi => 0.8,
        Action::Ca => 1.6,
        Action::Pl => 1.2,
        Action::Fm => 1.0,
        Action::Sc => 3.0,
        Action::Rl => 1.2,
    }
}

/// Nominal path of the right wrist for a task, one phase per action.
pub fn task_phases(task: Task) -> Vec<Phase> {
    let lateral = if task.is_carrying() { 0.10 } else { -0.04 };
    let rest = Waypoint {
        position: Vector3::new(0.05, -0.05, -0.50),
        shoulder_z: STANDING_SHOULDER_Z,
        pitch: 0.0,
    };
    let pick_z = task_metadata::pick_height(task) + 0.10;
    let pick = Waypoint::at_height(pick_z, 0.32, lateral, 0.35, -0.9);
    let lifted = Waypoint {
        position: pick.position + Vector3::new(-0.02, 0.0, 0.05),
        ..pick
    };
    let carry = Waypoint {
        position: Vector3::new(0.28, lateral, -0.22),
        shoulder_z: STANDING_SHOULDER_Z,
        pitch: -0.6,
    };
    let target = task_metadata::target_height(task);
    let mut phases = Vec::new();
    let mut push = |action, from, to| {
        phases.push(Phase {
            action,
            duration: nominal_duration(action),
            from,
            to,
        })
    };
    push(Action::Re, rest, pick);
    push(Action::Pi, pick, lifted);
    push(Action::Ca, lifted, carry);
    if task.is_carrying() {
        let place = Waypoint::at_height(target + 0.10, 0.30, lateral, 0.30, -0.9);
        push(Action::Pl, carry, place);
        push(Action::Rl, place, rest);
    } else {
        let approach = Waypoint::at_height(target, 0.30, lateral, 0.30, -1.2);
        let screw = Waypoint {
            position: approach.position + Vector3::new(0.08, 0.0, 0.0),
            pitch: -PI / 2.0,
            ..approach
        };
        push(Action::Pl, carry, approach);
        push(Action::Fm, approach, screw);
        push(Action::Sc, screw, screw);
        push(Action::Rl, screw, rest);
    }
    phases
}

fn smoothstep(s: f64) -> f64 {
    s * s * (3.0 - 2.0 * s)
}

struct SmoothNoise {
    terms: Vec<(f64, f64, f64)>,
}

impl SmoothNoise {
    fn new(rng: &mut ChaCha8Rng, amplitude: f64) -> Self {
        let terms = (0..3)
            .map(|_| {
                let a = amplitude * rng.random_range(0.3..1.0) / 3f64.sqrt();
                let f = rng.random_range(0.2..1.2);
                let phi = rng.random_range(0.0..TAU);
                (a, f, phi)
            })
            .collect();
        SmoothNoise { terms }
    }

    fn at(&self, t: f64) -> f64 {
        self.terms.iter().map(|(a, f, phi)| a * (TAU * f * t + phi).sin()).sum()
    }
}

fn perturb(w: &Waypoint, rng: &mut ChaCha8Rng, noise: f64) -> Waypoint {
    let d = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    Waypoint {
        position: w.position + d * noise,
        shoulder_z: w.shoulder_z,
        pitch: w.pitch + rng.random_range(-1.0..1.0) * 2.0 * noise,
    }
}

fn mirror(p: &Isometry3<f64>) -> Isometry3<f64> {
    let s = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
    let t = s * p.translation.vector;
    let r = s * p.rotation.to_rotation_matrix().into_inner() * s;
    Isometry3::from_parts(
        Translation3::from(t),
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r)),
    )
}

fn hand_pose(position: Vector3<f64>, pitch: f64, roll: f64) -> Isometry3<f64> {
    let rot = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), pitch)
        * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), roll);
    Isometry3::from_parts(Translation3::from(position), rot)
}

fn task_salt(task: Task) -> u64 {
    match task {
        Task::SL => 1,
        Task::SM => 2,
        Task::SH => 3,
        Task::C5 => 4,
        Task::C10 => 5,
        Task::Custom => 6,
    }
}

pub fn synth_trial(task: Task, participant_seed: u64, noise_level: f64) -> TrialRecording {
    synth_trial_with(task, participant_seed, noise_level, &SynthOptions::default())
}

pub fn synth_trial_with(task: Task, participant_seed: u64, noise_level: f64, opts: &SynthOptions) -> TrialRecording {
    let noise = noise_level.max(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(participant_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ task_salt(task));
    let dims: Anthropometry = opts.anthropometry.resolve(&Anthropometry::default());
    let max_reach = 0.95 * (dims.upper_arm_length + dims.forearm_length);
    let min_reach = (dims.upper_arm_length - dims.forearm_length).abs() + 0.05;

    let mut phases = task_phases(task);
    // per-trial offsets: one draw per distinct waypoint so consecutive phases stay joined
    let mut joined: Vec<Waypoint> = vec![perturb(&phases[0].from, &mut rng, noise)];
    for p in &phases {
        let next = if p.to == p.from {
            *joined.last().unwrap()
        } else {
            perturb(&p.to, &mut rng, noise)
        };
        joined.push(next);
    }
    let last = joined.len() - 1;
    joined[last] = joined[0];
    for (i, p) in phases.iter_mut().enumerate() {
        p.from = joined[i];
        p.to = joined[i + 1];
        p.duration *= 1.0 + 0.15 * rng.random_range(-1.0..1.0);
    }
    let pos_noise: Vec<SmoothNoise> = (0..3).map(|_| SmoothNoise::new(&mut rng, noise)).collect();
    let ang_noise = SmoothNoise::new(&mut rng, 2.0 * noise);
    let screw_rate = rng.random_range(0.8..1.2);

    let dt = 1.0 / opts.sample_rate;
    let mut frames = Vec::new();
    let mut k = 0usize;
    for (pi, phase) in phases.iter().enumerate() {
        let n = ((phase.duration * opts.sample_rate).round() as usize).max(2);
        let closing = pi + 1 == phases.len();
        for j in 0..n {
            let s = if closing {
                j as f64 / (n - 1) as f64
            } else {
                j as f64 / n as f64
            };
            let tau = j as f64 * dt;
            let t = k as f64 * dt;
            let e = smoothstep(s);
            let mut pos = phase.from.position.lerp(&phase.to.position, e);
            let shoulder_z = phase.from.shoulder_z + (phase.to.shoulder_z - phase.from.shoulder_z) * e;
            let pitch = phase.from.pitch + (phase.to.pitch - phase.from.pitch) * e;
            let mut roll = 0.0;
            if phase.action == Action::Sc {
                let w = TAU * screw_rate * tau;
                roll = 0.8 * w.sin();
                pos += Vector3::new(0.0, 0.005 * w.sin(), 0.005 * (1.0 - w.cos()));
            }
            pos += Vector3::new(pos_noise[0].at(t), pos_noise[1].at(t), pos_noise[2].at(t));
            let pitch = pitch + ang_noise.at(t);
            let d = pos.norm();
            if d > max_reach {
                pos *= max_reach / d;
            } else if d < min_reach {
                pos *= min_reach / d;
            }
            let right = hand_pose(pos, pitch, roll);
            frames.push(Frame {
                t,
                left_wrist: mirror(&right),
                right_wrist: right,
                left_joints: None,
                right_joints: None,
                shoulder_z: Some(shoulder_z),
                label: Some(phase.action.code().to_string()),
            });
            k += 1;
        }
    }
    TrialRecording {
        header: TrialHeader {
            participant_id: format!("synth-{participant_seed:04}"),
            task,
            sample_rate: opts.sample_rate,
            anthropometry: opts.anthropometry,
            provenance: None,
        },
        frames,
        tied_frames: 0,
    }
}

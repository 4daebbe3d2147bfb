//! JSON robot descriptions.
//!
//! ```json
//! {
//!   "name": "planar2",
//!   "task_space": "planar",
//!   "model": {
//!     "kind": "serial",
//!     "base": { "xyz": [0, 0, 0], "rpy": [0, 0, 0] },
//!     "joints": [ { "name": "j1", "axis": [0, 0, 1], "xyz": [0, 0, 0] } ],
//!     "end": { "xyz": [1, 0, 0] }
//!   }
//! }
//! ```
//!
//! `kind: "anthropomorphic"` takes `upper_arm_length`, `forearm_length`,
//! `hand_length` (meters) and a `shoulder` pose instead of a joint list.
//! Angles are radians; `rpy` is roll-pitch-yaw about fixed x, y, z.

use std::path::Path;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::arm::{Anthropometry, AnthropomorphicArm, DEFAULT_FOREARM, DEFAULT_HAND, DEFAULT_UPPER_ARM};
use super::chain::{Joint, KinematicChain, TaskSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl PoseSpec {
    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::new(self.xyz[0], self.xyz[1], self.xyz[2]),
            UnitQuaternion::from_euler_angles(self.rpy[0], self.rpy[1], self.rpy[2]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub axis: [f64; 3],
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

fn default_upper() -> f64 {
    DEFAULT_UPPER_ARM
}
fn default_forearm() -> f64 {
    DEFAULT_FOREARM
}
fn default_hand() -> f64 {
    DEFAULT_HAND
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RobotModel {
    Serial {
        #[serde(default)]
        base: PoseSpec,
        joints: Vec<JointSpec>,
        #[serde(default)]
        end: PoseSpec,
    },
    Anthropomorphic {
        #[serde(default = "default_upper")]
        upper_arm_length: f64,
        #[serde(default = "default_forearm")]
        forearm_length: f64,
        #[serde(default = "default_hand")]
        hand_length: f64,
        #[serde(default)]
        shoulder: PoseSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDescription {
    pub name: String,
    #[serde(default)]
    pub task_space: TaskSpace,
    pub model: RobotModel,
}

/// A loaded robot: the chain used for Jacobians plus the arm model when the
/// description is anthropomorphic.
#[derive(Debug, Clone)]
pub struct Robot {
    pub name: String,
    pub task_space: TaskSpace,
    pub chain: KinematicChain,
    pub arm: Option<AnthropomorphicArm>,
}

const BUNDLED: &[(&str, &str)] = &[
    ("planar2", include_str!("../../robots/planar2.json")),
    ("planar3", include_str!("../../robots/planar3.json")),
    ("arm7", include_str!("../../robots/arm7.json")),
];

impl RobotDescription {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::InvalidChain(format!("no bundled robot named {name:?}")))?;
        Self::from_json(text)
    }

    pub fn bundled_json(name: &str) -> Option<&'static str> {
        BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
    }

    pub fn build(&self) -> Result<Robot> {
        let (chain, arm) = match &self.model {
            RobotModel::Serial { base, joints, end } => {
                let joints = joints
                    .iter()
                    .map(|j| {
                        let origin = PoseSpec { xyz: j.xyz, rpy: j.rpy }.isometry();
                        Joint::with_origin(j.name.clone(), origin, Vector3::from(j.axis))
                    })
                    .collect::<Result<Vec<_>>>()?;
                (KinematicChain::new(joints, base.isometry(), end.isometry())?, None)
            }
            RobotModel::Anthropomorphic {
                upper_arm_length,
                forearm_length,
                hand_length,
                shoulder,
            } => {
                let arm = AnthropomorphicArm::new(
                    Anthropometry {
                        upper_arm_length: *upper_arm_length,
                        forearm_length: *forearm_length,
                        hand_length: *hand_length,
                    },
                    shoulder.isometry(),
                )?;
                (arm.chain().clone(), Some(arm))
            }
        };
        Ok(Robot {
            name: self.name.clone(),
            task_space: self.task_space,
            chain,
            arm,
        })
    }
}

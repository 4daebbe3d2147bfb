//! 7-DoF anthropomorphic arm and the arm-triangle parameterization.
//!
//! Shoulder frame: x forward, y left, z up, origin at the shoulder centre. At
//! zero joint angles the arm hangs straight down with the elbow fully
//! extended. Joint layout:
//!
//! | joint | origin            | axis |
//! |-------|-------------------|------|
//! | q1    | shoulder          | +y   |
//! | q2    | shoulder          | +x   |
//! | q3    | shoulder          | +z (humeral rotation) |
//! | q4    | elbow (0,0,-L1)   | -y (flexion, `q4 = π − α`) |
//! | q5    | wrist (0,0,-L2)   | +z (pronation) |
//! | q6    | wrist             | +y |
//! | q7    | wrist             | +x |
//!
//! The end frame sits `hand_length` below the wrist along the hand axis.

use nalgebra::{DMatrix, Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::chain::{Joint, JointConfig, KinematicChain};
use crate::error::{Error, Result};

pub const DEFAULT_UPPER_ARM: f64 = 0.30;
pub const DEFAULT_FOREARM: f64 = 0.25;
pub const DEFAULT_HAND: f64 = 0.10;

const DEGENERATE_ALPHA_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Anthropometry {
    pub upper_arm_length: f64,
    pub forearm_length: f64,
    pub hand_length: f64,
}

impl Default for Anthropometry {
    fn default() -> Self {
        Anthropometry {
            upper_arm_length: DEFAULT_UPPER_ARM,
            forearm_length: DEFAULT_FOREARM,
            hand_length: DEFAULT_HAND,
        }
    }
}

/// Shoulder-elbow-wrist triangle plus hand orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmTriangle {
    /// Upper-arm direction.
    pub r: Vector3<f64>,
    /// Normal of the triangle plane (the elbow flexion axis).
    pub l: Vector3<f64>,
    /// Elbow angle between upper arm and forearm.
    pub alpha: f64,
    /// Palm normal.
    pub p: Vector3<f64>,
    /// Finger direction.
    pub f: Vector3<f64>,
}

impl ArmTriangle {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r", self.r), ("l", self.l), ("p", self.p), ("f", self.f)] {
            if (v.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidTriangle(format!("{name} is not unit norm")));
            }
        }
        if self.l.dot(&self.r).abs() > 1e-8 {
            return Err(Error::InvalidTriangle("l is not orthogonal to r".into()));
        }
        if self.p.dot(&self.f).abs() > 1e-8 {
            return Err(Error::InvalidTriangle("p is not orthogonal to f".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= std::f64::consts::PI + 1e-12) {
            return Err(Error::InvalidTriangle(format!(
                "elbow angle {} outside (0, π]",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Hand orientation from palm normal and finger direction (columns p, (−f)×p, −f).
fn hand_rotation(p: &Vector3<f64>, f: &Vector3<f64>) -> Matrix3<f64> {
    let z = -f;
    Matrix3::from_columns(&[*p, z.cross(p), z])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnthropomorphicArm {
    dims: Anthropometry,
    shoulder: Isometry3<f64>,
    chain: KinematicChain,
    wrist_chain: KinematicChain,
}

impl AnthropomorphicArm {
    pub fn new(dims: Anthropometry, shoulder: Isometry3<f64>) -> Result<Self> {
        for (name, v) in [
            ("upper_arm_length", dims.upper_arm_length),
            ("forearm_length", dims.forearm_length),
            ("hand_length", dims.hand_length),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidChain(format!("{name} must be positive, got {v}")));
            }
        }
        let zero = Vector3::zeros();
        let joints = vec![
            Joint::new("shoulder_y", zero, Vector3::y())?,
            Joint::new("shoulder_x", zero, Vector3::x())?,
            Joint::new("shoulder_z", zero, Vector3::z())?,
            Joint::new("elbow", Vector3::new(0.0, 0.0, -dims.upper_arm_length), -Vector3::y())?,
            Joint::new("wrist_z", Vector3::new(0.0, 0.0, -dims.forearm_length), Vector3::z())?,
            Joint::new("wrist_y", zero, Vector3::y())?,
            Joint::new("wrist_x", zero, Vector3::x())?,
        ];
        let wrist_chain = KinematicChain::new(joints, shoulder, Isometry3::identity())?;
        let chain = wrist_chain
            .clone()
            .with_end(Isometry3::translation(0.0, 0.0, -dims.hand_length));
        Ok(AnthropomorphicArm {
            dims,
            shoulder,
            chain,
            wrist_chain,
        })
    }

    pub fn dims(&self) -> &Anthropometry {
        &self.dims
    }

    pub fn shoulder(&self) -> &Isometry3<f64> {
        &self.shoulder
    }

    /// Chain ending at the hand tip.
    pub fn chain(&self) -> &KinematicChain {
        &self.chain
    }

    /// Chain ending at the wrist centre.
    pub fn wrist_chain(&self) -> &KinematicChain {
        &self.wrist_chain
    }

    pub fn wrist_pose(&self, q: &JointConfig) -> Result<Isometry3<f64>> {
        self.wrist_chain.forward_kinematics(q)
    }

    pub fn reach(&self) -> (f64, f64) {
        let (a, b) = (self.dims.upper_arm_length, self.dims.forearm_length);
        ((a - b).abs(), a + b)
    }

    /// Joint angles realizing the triangle (analytic inverse kinematics).
    pub fn arm_triangle_to_joints(&self, tri: &ArmTriangle) -> Result<JointConfig> {
        tri.validate()?;
        let shoulder_rot = Matrix3::from_columns(&[tri.l.cross(&tri.r), -tri.l, -tri.r]);
        let (q1, q2, q3) = decompose_yxz(&shoulder_rot);
        let q4 = std::f64::consts::PI - tri.alpha;
        let elbow_rot = shoulder_rot * Rotation3::from_axis_angle(&Vector3::y_axis(), -q4).into_inner();
        let wrist_rel = elbow_rot.transpose() * hand_rotation(&tri.p, &tri.f);
        let (q7, q6, q5) = Rotation3::from_matrix_unchecked(wrist_rel).euler_angles();
        Ok(JointConfig::from_slice(&[q1, q2, q3, q4, q5, q6, q7]))
    }

    /// Triangle parameters of a joint configuration.
    pub fn joints_to_arm_triangle(&self, q: &JointConfig) -> Result<ArmTriangle> {
        let frames = self.wrist_chain.frames(q)?;
        let shoulder_inv = self.shoulder.rotation.inverse();
        let local_rot = (shoulder_inv * frames.end.rotation).to_rotation_matrix().into_inner();
        let r = shoulder_inv * (frames.origins[3] - frames.origins[0]).normalize();
        let l = shoulder_inv * frames.axes[3];
        Ok(ArmTriangle {
            r,
            l,
            alpha: std::f64::consts::PI - q.0[3],
            p: local_rot.column(0).into_owned(),
            f: -local_rot.column(2).into_owned(),
        })
    }

    /// Infers the triangle from a wrist pose given in the arm's parent frame.
    ///
    /// The elbow lies on a circle around the shoulder-wrist axis; `swivel` is
    /// its angle measured from the lowest point of the circle (or from the
    /// forward direction when the wrist is directly above or below the
    /// shoulder). At full extension the triangle plane is taken from the
    /// swivel reference plane.
    pub fn wrist_pose_to_arm_triangle(&self, wrist: &Isometry3<f64>, swivel: f64) -> Result<ArmTriangle> {
        let local = self.shoulder.inverse() * wrist;
        let w = local.translation.vector;
        let (l1, l2) = (self.dims.upper_arm_length, self.dims.forearm_length);
        let (min, max) = self.reach();
        let d = w.norm();
        let slack = 1e-9;
        if d < min - slack || d > max + slack || d < 1e-12 {
            return Err(Error::Unreachable { distance: d, min, max });
        }
        let cos_alpha = ((l1 * l1 + l2 * l2 - d * d) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
        let alpha = cos_alpha.acos();
        let cos_beta = ((l1 * l1 + d * d - l2 * l2) / (2.0 * l1 * d)).clamp(-1.0, 1.0);
        let beta = cos_beta.acos();

        let axis = w / d;
        let down = -Vector3::z();
        let reference = if axis.dot(&down).abs() < 1.0 - 1e-9 {
            down
        } else {
            Vector3::x()
        };
        let u0 = (reference - axis * axis.dot(&reference)).normalize();
        let u = u0 * swivel.cos() + axis.cross(&u0) * swivel.sin();

        let r = (axis * beta.cos() + u * beta.sin()).normalize();
        let l = if std::f64::consts::PI - alpha < DEGENERATE_ALPHA_TOL {
            u.cross(&axis).normalize()
        } else {
            let elbow = r * l1;
            r.cross(&(w - elbow)).normalize()
        };
        let rot = local.rotation.to_rotation_matrix().into_inner();
        Ok(ArmTriangle {
            r,
            l,
            alpha,
            p: rot.column(0).into_owned(),
            f: -rot.column(2).into_owned(),
        })
    }

    /// Wrist pose → joints through the triangle parameterization.
    pub fn inverse_kinematics(&self, wrist: &Isometry3<f64>, swivel: f64) -> Result<JointConfig> {
        let tri = self.wrist_pose_to_arm_triangle(wrist, swivel)?;
        self.arm_triangle_to_joints(&tri)
    }

    pub fn jacobian(&self, q: &JointConfig, space: super::TaskSpace) -> Result<DMatrix<f64>> {
        self.chain.jacobian(q, space)
    }
}

/// `R = Ry(a) Rx(b) Rz(c)`.
fn decompose_yxz(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let sb = (-r[(1, 2)]).clamp(-1.0, 1.0);
    let b = sb.asin();
    if b.cos() > 1e-9 {
        let a = r[(0, 2)].atan2(r[(2, 2)]);
        let c = r[(1, 0)].atan2(r[(1, 1)]);
        (a, b, c)
    } else {
        // gimbal lock: fix a = 0, then R = Rx(±π/2) Rz(c)
        let c = (-r[(0, 1)]).atan2(r[(0, 0)]);
        (0.0, b, c)
    }
}

/// Pose helper for wrist targets given as position and rotation.
pub fn pose(position: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::from(position), rotation)
}

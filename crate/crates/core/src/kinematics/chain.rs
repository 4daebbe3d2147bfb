use nalgebra::{DMatrix, DVector, Isometry3, Matrix3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which rows of the geometric Jacobian a task uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TaskSpace {
    /// Linear velocity, 3 rows.
    #[default]
    Position,
    /// Linear velocity in the base xy-plane, 2 rows.
    Planar,
    /// Linear then angular velocity, 6 rows.
    Full,
}

impl TaskSpace {
    pub fn rows(self) -> &'static [usize] {
        match self {
            TaskSpace::Position => &[0, 1, 2],
            TaskSpace::Planar => &[0, 1],
            TaskSpace::Full => &[0, 1, 2, 3, 4, 5],
        }
    }

    pub fn dim(self) -> usize {
        self.rows().len()
    }

    /// Position rows only (used for position tracking).
    pub fn position_rows(self) -> &'static [usize] {
        match self {
            TaskSpace::Planar => &[0, 1],
            _ => &[0, 1, 2],
        }
    }
}

/// A revolute joint: a fixed transform from the parent frame followed by a
/// rotation about `axis` (expressed in the joint frame).
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub origin: Isometry3<f64>,
    pub axis: Unit<Vector3<f64>>,
}

impl Joint {
    pub fn new(name: impl Into<String>, offset: Vector3<f64>, axis: Vector3<f64>) -> Result<Self> {
        Self::with_origin(
            name,
            Isometry3::from_parts(Translation3::from(offset), UnitQuaternion::identity()),
            axis,
        )
    }

    pub fn with_origin(name: impl Into<String>, origin: Isometry3<f64>, axis: Vector3<f64>) -> Result<Self> {
        let norm = axis.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidChain(format!("joint axis {axis:?} is not unit norm")));
        }
        Ok(Joint {
            name: name.into(),
            origin,
            axis: Unit::new_unchecked(axis),
        })
    }
}

/// Joint angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig(pub DVector<f64>);

impl Serialize for JointConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for JointConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(JointConfig(DVector::from_vec(Vec::<f64>::deserialize(d)?)))
    }
}

impl JointConfig {
    pub fn zeros(n: usize) -> Self {
        JointConfig(DVector::zeros(n))
    }

    pub fn from_slice(q: &[f64]) -> Self {
        JointConfig(DVector::from_row_slice(q))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Serial chain of revolute joints.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    joints: Vec<Joint>,
    base: Isometry3<f64>,
    end: Isometry3<f64>,
}

/// World-frame joint axes and origins for one configuration.
#[derive(Debug, Clone)]
pub struct ChainFrames {
    pub axes: Vec<Vector3<f64>>,
    pub origins: Vec<Vector3<f64>>,
    pub end: Isometry3<f64>,
}

impl KinematicChain {
    pub fn new(joints: Vec<Joint>, base: Isometry3<f64>, end: Isometry3<f64>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::InvalidChain("chain needs at least one joint".into()));
        }
        Ok(KinematicChain { joints, base, end })
    }

    /// Planar chain in the xy-plane with z-axis joints and links along x.
    pub fn planar(link_lengths: &[f64]) -> Result<Self> {
        let mut joints = Vec::with_capacity(link_lengths.len());
        for (i, _) in link_lengths.iter().enumerate() {
            let offset = if i == 0 {
                Vector3::zeros()
            } else {
                Vector3::new(link_lengths[i - 1], 0.0, 0.0)
            };
            joints.push(Joint::new(format!("j{}", i + 1), offset, Vector3::z())?);
        }
        let last = *link_lengths
            .last()
            .ok_or_else(|| Error::InvalidChain("chain needs at least one joint".into()))?;
        Self::new(joints, Isometry3::identity(), Isometry3::translation(last, 0.0, 0.0))
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn base(&self) -> &Isometry3<f64> {
        &self.base
    }

    pub fn end(&self) -> &Isometry3<f64> {
        &self.end
    }

    pub fn with_base(mut self, base: Isometry3<f64>) -> Self {
        self.base = base;
        self
    }

    pub fn with_end(mut self, end: Isometry3<f64>) -> Self {
        self.end = end;
        self
    }

    fn check(&self, q: &JointConfig) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    pub fn frames(&self, q: &JointConfig) -> Result<ChainFrames> {
        self.check(q)?;
        let mut t = self.base;
        let mut axes = Vec::with_capacity(self.dof());
        let mut origins = Vec::with_capacity(self.dof());
        for (joint, &angle) in self.joints.iter().zip(q.0.iter()) {
            t *= joint.origin;
            axes.push(t.rotation * joint.axis.into_inner());
            origins.push(t.translation.vector);
            t *= Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_axis_angle(&joint.axis, angle),
            );
        }
        Ok(ChainFrames {
            axes,
            origins,
            end: t * self.end,
        })
    }

    pub fn forward_kinematics(&self, q: &JointConfig) -> Result<Isometry3<f64>> {
        Ok(self.frames(q)?.end)
    }

    pub fn end_position(&self, q: &JointConfig) -> Result<Vector3<f64>> {
        Ok(self.forward_kinematics(q)?.translation.vector)
    }

    /// Geometric Jacobian restricted to the rows of `space`.
    pub fn jacobian(&self, q: &JointConfig, space: TaskSpace) -> Result<DMatrix<f64>> {
        let frames = self.frames(q)?;
        Ok(select_rows(&full_jacobian(&frames), space.rows()))
    }

    /// `∂J/∂q_k` for every joint `k`, each restricted to the rows of `space`.
    ///
    /// For column `i` with axis `z_i` and origin `p_i`, the axis derivative is
    /// `z_k × z_i` when `k < i` (zero otherwise) and
    /// `∂(p_e − p_i)/∂q_k = z_k × (p_e − p_max(i,k))`.
    pub fn jacobian_derivatives(&self, q: &JointConfig, space: TaskSpace) -> Result<Vec<DMatrix<f64>>> {
        let frames = self.frames(q)?;
        let n = self.dof();
        let pe = frames.end.translation.vector;
        let rows = space.rows();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let zk = frames.axes[k];
            let mut d = DMatrix::zeros(6, n);
            for i in 0..n {
                let zi = frames.axes[i];
                let dz = if k < i { zk.cross(&zi) } else { Vector3::zeros() };
                let lever = pe - frames.origins[i.max(k)];
                let dlin = dz.cross(&(pe - frames.origins[i])) + zi.cross(&zk.cross(&lever));
                for r in 0..3 {
                    d[(r, i)] = dlin[r];
                    d[(r + 3, i)] = dz[r];
                }
            }
            out.push(select_rows(&d, rows));
        }
        Ok(out)
    }

    /// Concatenates `child` after this chain's end frame.
    pub fn attach(&self, child: &KinematicChain) -> KinematicChain {
        let mut joints = self.joints.clone();
        for (i, j) in child.joints.iter().enumerate() {
            let mut j = j.clone();
            if i == 0 {
                j.origin = self.end * child.base * j.origin;
            }
            joints.push(j);
        }
        KinematicChain {
            joints,
            base: self.base,
            end: child.end,
        }
    }

    /// Mirror image of the chain through the plane with the given unit normal
    /// (passing through the world origin). For the same joint angles the
    /// mirrored chain's end position is the reflection of the original.
    pub fn mirrored(&self, normal: &Vector3<f64>) -> KinematicChain {
        let n = normal.normalize();
        let refl = Matrix3::identity() - 2.0 * n * n.transpose();
        let conj = |iso: &Isometry3<f64>| -> Isometry3<f64> {
            let r = refl * iso.rotation.to_rotation_matrix().into_inner() * refl;
            Isometry3::from_parts(
                Translation3::from(refl * iso.translation.vector),
                UnitQuaternion::from_matrix(&r),
            )
        };
        KinematicChain {
            joints: self
                .joints
                .iter()
                .map(|j| Joint {
                    name: j.name.clone(),
                    origin: conj(&j.origin),
                    axis: Unit::new_normalize(-(refl * j.axis.into_inner())),
                })
                .collect(),
            base: conj(&self.base),
            end: conj(&self.end),
        }
    }
}

/// 6×n geometric Jacobian, linear rows first.
pub fn full_jacobian(frames: &ChainFrames) -> DMatrix<f64> {
    let n = frames.axes.len();
    let pe = frames.end.translation.vector;
    let mut j = DMatrix::zeros(6, n);
    for i in 0..n {
        let z = frames.axes[i];
        let lin = z.cross(&(pe - frames.origins[i]));
        for r in 0..3 {
            j[(r, i)] = lin[r];
            j[(r + 3, i)] = z[r];
        }
    }
    j
}

pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

//! Velocity and force manipulability ellipsoids for single and dual-arm
//! systems, their scalar indices, and the manipulability Jacobian `∂(JJᵀ)/∂q`.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, Isometry3, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{GraspModel, GraspVariant, JointConfig, KinematicChain, TaskSpace};
use crate::linalg::{self, SvdParts};
use crate::spd::{sym_vec_len, sym_vec_unchecked, SpdMatrix};

/// Smallest eigenvalue below which an ellipsoid is flagged singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

/// Tolerance between grasp contacts and end-effector positions (meters).
pub const GRASP_CONSISTENCY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllipsoidKind {
    Velocity,
    Force,
}

/// `JJᵀ` (velocity) or its inverse (force), tagged with the frame it is
/// expressed in.
///
/// Velocity ellipsoids at singular postures are kept as positive
/// semi-definite matrices with `singular` set.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulabilityEllipsoid {
    matrix: DMatrix<f64>,
    pub kind: EllipsoidKind,
    pub frame: String,
    singular: bool,
    min_eigenvalue: f64,
}

impl ManipulabilityEllipsoid {
    pub fn from_matrix(matrix: DMatrix<f64>, kind: EllipsoidKind, frame: impl Into<String>) -> Self {
        let matrix = linalg::symmetrize(&matrix);
        let min_eigenvalue = linalg::sym_eigenvalues(&matrix)[0];
        ManipulabilityEllipsoid {
            matrix,
            kind,
            frame: frame.into(),
            singular: min_eigenvalue < SINGULAR_THRESHOLD,
            min_eigenvalue,
        }
    }

    pub fn from_spd(m: &SpdMatrix, kind: EllipsoidKind, frame: impl Into<String>) -> Self {
        Self::from_matrix(m.matrix().clone(), kind, frame)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn spd(&self) -> Result<SpdMatrix> {
        if self.singular {
            return Err(Error::SingularEllipsoid {
                min_eigenvalue: self.min_eigenvalue,
            });
        }
        SpdMatrix::new(self.matrix.clone())
    }

    /// Dual ellipsoid: same principal axes, reciprocal eigenvalues.
    pub fn dual(&self) -> Result<ManipulabilityEllipsoid> {
        let spd = self.spd()?;
        let kind = match self.kind {
            EllipsoidKind::Velocity => EllipsoidKind::Force,
            EllipsoidKind::Force => EllipsoidKind::Velocity,
        };
        Ok(Self::from_spd(&spd.inverse(), kind, self.frame.clone()))
    }
}

/// `J diag(w)`: optional per-joint velocity scaling, identity by default.
fn weighted(j: DMatrix<f64>, weights: Option<&[f64]>) -> Result<DMatrix<f64>> {
    match weights {
        None => Ok(j),
        Some(w) => {
            if w.len() != j.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: j.ncols(),
                    got: w.len(),
                });
            }
            Ok(j * DMatrix::from_diagonal(&DVector::from_row_slice(w)))
        }
    }
}

/// `M = JJᵀ` from the chain's Jacobian rows selected by `space`.
pub fn velocity_manipulability(
    chain: &KinematicChain,
    q: &JointConfig,
    space: TaskSpace,
) -> Result<ManipulabilityEllipsoid> {
    velocity_manipulability_weighted(chain, q, space, None)
}

pub fn velocity_manipulability_weighted(
    chain: &KinematicChain,
    q: &JointConfig,
    space: TaskSpace,
    joint_weights: Option<&[f64]>,
) -> Result<ManipulabilityEllipsoid> {
    let j = weighted(chain.jacobian(q, space)?, joint_weights)?;
    Ok(ManipulabilityEllipsoid::from_matrix(
        &j * j.transpose(),
        EllipsoidKind::Velocity,
        "base",
    ))
}

/// `M^F = (JJᵀ)⁻¹`.
pub fn force_manipulability(
    chain: &KinematicChain,
    q: &JointConfig,
    space: TaskSpace,
) -> Result<ManipulabilityEllipsoid> {
    velocity_manipulability(chain, q, space)?.dual()
}

/// Two arms on independent chains holding one rigid object.
#[derive(Debug, Clone)]
pub struct DualArmSystem {
    pub left: KinematicChain,
    pub right: KinematicChain,
    pub grasp: GraspModel,
}

fn grasp_space(variant: GraspVariant) -> TaskSpace {
    match variant {
        GraspVariant::Positional => TaskSpace::Position,
        GraspVariant::Full => TaskSpace::Full,
    }
}

fn check_grasp(grasp: &GraspModel, left: &Isometry3<f64>, right: &Isometry3<f64>) -> Result<()> {
    let (cl, cr) = grasp.world_contacts();
    let el = (cl - left.translation.vector).norm();
    let er = (cr - right.translation.vector).norm();
    if el > GRASP_CONSISTENCY_TOL || er > GRASP_CONSISTENCY_TOL {
        return Err(Error::InvalidGrasp(format!(
            "contacts are {el:.4e} m / {er:.4e} m away from the end effectors"
        )));
    }
    Ok(())
}

/// `(G_d†)ᵀ`, failing when `G_d` is rank deficient.
fn grasp_transpose_pinv(grasp: &GraspModel, variant: GraspVariant) -> Result<DMatrix<f64>> {
    let g = grasp.grasp_matrix(variant);
    let svd = SvdParts::new(&g);
    if svd.rank() < g.nrows() {
        return Err(Error::InvalidGrasp("grasp matrix is rank deficient".into()));
    }
    Ok(svd.pinv(0.0).transpose())
}

impl DualArmSystem {
    pub fn new(left: KinematicChain, right: KinematicChain, grasp: GraspModel) -> Self {
        DualArmSystem { left, right, grasp }
    }

    /// `J_d = diag(J_l, J_r)`.
    pub fn block_jacobian(&self, q_l: &JointConfig, q_r: &JointConfig, variant: GraspVariant) -> Result<DMatrix<f64>> {
        let space = grasp_space(variant);
        let jl = self.left.jacobian(q_l, space)?;
        let jr = self.right.jacobian(q_r, space)?;
        let rows = space.dim();
        let mut j = DMatrix::zeros(2 * rows, jl.ncols() + jr.ncols());
        j.view_mut((0, 0), (rows, jl.ncols())).copy_from(&jl);
        j.view_mut((rows, jl.ncols()), (rows, jr.ncols())).copy_from(&jr);
        Ok(j)
    }

    /// `M_d = G_d^{†ᵀ} J_d J_dᵀ G_d^†` with block-diagonal `J_d`.
    pub fn velocity_manipulability(
        &self,
        q_l: &JointConfig,
        q_r: &JointConfig,
        variant: GraspVariant,
    ) -> Result<ManipulabilityEllipsoid> {
        check_grasp(
            &self.grasp,
            &self.left.forward_kinematics(q_l)?,
            &self.right.forward_kinematics(q_r)?,
        )?;
        let gt = grasp_transpose_pinv(&self.grasp, variant)?;
        let j = self.block_jacobian(q_l, q_r, variant)?;
        let a = gt * j;
        Ok(ManipulabilityEllipsoid::from_matrix(
            &a * a.transpose(),
            EllipsoidKind::Velocity,
            "base",
        ))
    }
}

pub fn dual_arm_velocity_manipulability(
    sys: &DualArmSystem,
    q_l: &JointConfig,
    q_r: &JointConfig,
) -> Result<ManipulabilityEllipsoid> {
    sys.velocity_manipulability(q_l, q_r, GraspVariant::Positional)
}

/// Two arms mounted on a shared torso chain. Joint vector layout is
/// `(torso, left arm, right arm)`; both hands use every joint that moves them,
/// so the dual-arm Jacobian is the stacked `(J_lᵀ, J_rᵀ)ᵀ`.
#[derive(Debug, Clone)]
pub struct SharedBaseDualArm {
    torso_dof: usize,
    left_dof: usize,
    right_dof: usize,
    left: KinematicChain,
    right: KinematicChain,
    grasp_pinv_t: DMatrix<f64>,
}

impl SharedBaseDualArm {
    /// The grasp object sits between the hands; its frame is fixed at the
    /// midpoint of the hand positions at `q0`.
    pub fn new(
        torso: &KinematicChain,
        left_arm: &KinematicChain,
        right_arm: &KinematicChain,
        q0: &JointConfig,
    ) -> Result<Self> {
        let left = torso.attach(left_arm);
        let right = torso.attach(right_arm);
        let mut sys = SharedBaseDualArm {
            torso_dof: torso.dof(),
            left_dof: left_arm.dof(),
            right_dof: right_arm.dof(),
            left,
            right,
            grasp_pinv_t: DMatrix::zeros(3, 6),
        };
        let (pl, pr) = sys.hand_positions(q0)?;
        let grasp = GraspModel::from_world_contacts(pl, pr)?;
        sys.grasp_pinv_t = grasp_transpose_pinv(&grasp, GraspVariant::Positional)?;
        Ok(sys)
    }

    pub fn dof(&self) -> usize {
        self.torso_dof + self.left_dof + self.right_dof
    }

    pub fn torso_dof(&self) -> usize {
        self.torso_dof
    }

    fn split(&self, q: &JointConfig) -> Result<(JointConfig, JointConfig)> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        let t = self.torso_dof;
        let mut ql = Vec::with_capacity(t + self.left_dof);
        ql.extend_from_slice(&q.as_slice()[..t + self.left_dof]);
        let mut qr = Vec::with_capacity(t + self.right_dof);
        qr.extend_from_slice(&q.as_slice()[..t]);
        qr.extend_from_slice(&q.as_slice()[t + self.left_dof..]);
        Ok((JointConfig::from_slice(&ql), JointConfig::from_slice(&qr)))
    }

    pub fn hand_positions(&self, q: &JointConfig) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let (ql, qr) = self.split(q)?;
        Ok((self.left.end_position(&ql)?, self.right.end_position(&qr)?))
    }

    fn scatter(&self, jl: &DMatrix<f64>, jr: &DMatrix<f64>) -> DMatrix<f64> {
        let t = self.torso_dof;
        let rows = jl.nrows();
        let mut j = DMatrix::zeros(2 * rows, self.dof());
        j.view_mut((0, 0), (rows, t + self.left_dof)).copy_from(jl);
        j.view_mut((rows, 0), (rows, t)).copy_from(&jr.columns(0, t));
        j.view_mut((rows, t + self.left_dof), (rows, self.right_dof))
            .copy_from(&jr.columns(t, self.right_dof));
        j
    }

    /// Stacked 6×n positional Jacobian of both hands.
    pub fn stacked_jacobian(&self, q: &JointConfig) -> Result<DMatrix<f64>> {
        let (ql, qr) = self.split(q)?;
        Ok(self.scatter(
            &self.left.jacobian(&ql, TaskSpace::Position)?,
            &self.right.jacobian(&qr, TaskSpace::Position)?,
        ))
    }

    /// `∂J_d/∂q_k` for every joint.
    pub fn stacked_jacobian_derivatives(&self, q: &JointConfig) -> Result<Vec<DMatrix<f64>>> {
        let (ql, qr) = self.split(q)?;
        let dl = self.left.jacobian_derivatives(&ql, TaskSpace::Position)?;
        let dr = self.right.jacobian_derivatives(&qr, TaskSpace::Position)?;
        let zl = DMatrix::zeros(3, self.torso_dof + self.left_dof);
        let zr = DMatrix::zeros(3, self.torso_dof + self.right_dof);
        let t = self.torso_dof;
        Ok((0..self.dof())
            .map(|k| {
                let (a, b) = if k < t {
                    (&dl[k], &dr[k])
                } else if k < t + self.left_dof {
                    (&dl[k], &zr)
                } else {
                    (&zl, &dr[k - self.left_dof])
                };
                self.scatter(a, b)
            })
            .collect())
    }

    /// `(G_d†)ᵀ`, 3×6.
    pub fn grasp_map(&self) -> &DMatrix<f64> {
        &self.grasp_pinv_t
    }

    pub fn velocity_manipulability(&self, q: &JointConfig) -> Result<ManipulabilityEllipsoid> {
        let a = &self.grasp_pinv_t * self.stacked_jacobian(q)?;
        Ok(ManipulabilityEllipsoid::from_matrix(
            &a * a.transpose(),
            EllipsoidKind::Velocity,
            "base",
        ))
    }

    pub fn manipulability_jacobian(&self, q: &JointConfig) -> Result<ManipulabilityJacobian> {
        let j = self.stacked_jacobian(q)?;
        let dj = self.stacked_jacobian_derivatives(q)?;
        Ok(ManipulabilityJacobian::from_parts(&j, &dj, Some(&self.grasp_pinv_t)))
    }
}

/// Third-order tensor `𝓙[:, :, k] = ∂M/∂q_k` for `M = P J Jᵀ Pᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulabilityJacobian {
    slices: Vec<DMatrix<f64>>,
}

impl ManipulabilityJacobian {
    /// Product rule on `(PJ)(PJ)ᵀ`; `P` defaults to the identity.
    pub fn from_parts(j: &DMatrix<f64>, dj: &[DMatrix<f64>], pre: Option<&DMatrix<f64>>) -> Self {
        let a = match pre {
            Some(p) => p * j,
            None => j.clone(),
        };
        let slices = dj
            .iter()
            .map(|d| {
                let da = match pre {
                    Some(p) => p * d,
                    None => d.clone(),
                };
                let s = &da * a.transpose();
                &s + s.transpose()
            })
            .collect();
        ManipulabilityJacobian { slices }
    }

    pub fn slices(&self) -> &[DMatrix<f64>] {
        &self.slices
    }

    pub fn dof(&self) -> usize {
        self.slices.len()
    }

    pub fn dim(&self) -> usize {
        self.slices.first().map_or(0, |s| s.nrows())
    }

    /// Mode-3 matricization: row `k` is `sym_vec(𝓙[:, :, k])`, so the matrix is n×d.
    pub fn matricized(&self) -> DMatrix<f64> {
        self.task_matrix().transpose()
    }

    /// d×n map from joint velocities to `sym_vec(Ṁ)` (the transpose of the
    /// mode-3 matricization).
    pub fn task_matrix(&self) -> DMatrix<f64> {
        let d = sym_vec_len(self.dim());
        let mut m = DMatrix::zeros(d, self.dof());
        for (k, s) in self.slices.iter().enumerate() {
            m.set_column(k, sym_vec_unchecked(s).values());
        }
        m
    }
}

pub fn manipulability_jacobian(
    chain: &KinematicChain,
    q: &JointConfig,
    space: TaskSpace,
) -> Result<ManipulabilityJacobian> {
    let j = chain.jacobian(q, space)?;
    let dj = chain.jacobian_derivatives(q, space)?;
    Ok(ManipulabilityJacobian::from_parts(&j, &dj, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalIndices {
    pub determinant: f64,
    pub condition_number: f64,
}

/// Determinant and eigenvalue ratio `λ_max / λ_min` (infinite when singular).
pub fn classical_indices(m: &ManipulabilityEllipsoid) -> ClassicalIndices {
    let mut idx = indices_of(m.matrix());
    if m.is_singular() {
        idx.condition_number = f64::INFINITY;
    }
    idx
}

pub fn indices_of(m: &DMatrix<f64>) -> ClassicalIndices {
    let eig = linalg::sym_eigenvalues(m);
    let lo = eig[0];
    let hi = eig[eig.len() - 1];
    ClassicalIndices {
        determinant: eig.iter().product(),
        condition_number: if lo > 0.0 { hi / lo } else { f64::INFINITY },
    }
}

/// `R M Rᵀ`, retagged.
pub fn reframe(
    m: &ManipulabilityEllipsoid,
    rotation: &Matrix3<f64>,
    frame: impl Into<String>,
) -> Result<ManipulabilityEllipsoid> {
    let err = (rotation * rotation.transpose() - Matrix3::identity()).abs().max();
    if err > 1e-10 || (rotation.determinant() - 1.0).abs() > 1e-10 {
        return Err(Error::NotOrthonormal { error: err });
    }
    if m.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: m.dim(),
        });
    }
    let r = DMatrix::from_iterator(3, 3, rotation.iter().copied());
    let mut out = ManipulabilityEllipsoid::from_matrix(&r * m.matrix() * r.transpose(), m.kind, frame);
    out.singular = m.singular;
    Ok(out)
}

/// One line of an ellipsoid JSON-lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidRecord {
    pub t: f64,
    pub frame_tag: String,
    pub kind: EllipsoidKind,
    pub spd: SpdMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
}

pub fn write_ellipsoid_records<W: Write>(mut w: W, records: &[EllipsoidRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads ellipsoid records, skipping blank lines and lines that are not
/// ellipsoid records (such as a provenance header).
pub fn read_ellipsoid_records<R: BufRead>(r: R) -> Result<Vec<EllipsoidRecord>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        if value.get("spd").is_none() {
            continue;
        }
        out.push(serde_json::from_value(value).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn planar2() -> KinematicChain {
        KinematicChain::planar(&[1.0, 1.0]).unwrap()
    }

    #[test]
    fn planar_velocity_ellipsoid() {
        // J = [[-1, -1], [1, 0]] at q = (0, π/2)
        let m = velocity_manipulability(
            &planar2(),
            &JointConfig::from_slice(&[0.0, FRAC_PI_2]),
            TaskSpace::Planar,
        )
        .unwrap();
        assert_relative_eq!(
            m.matrix(),
            &DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]),
            epsilon = 1e-12
        );
        // J = [[1, 1], [1, 0]] at the mirrored elbow q = (0, -π/2)
        let m = velocity_manipulability(
            &planar2(),
            &JointConfig::from_slice(&[0.0, -FRAC_PI_2]),
            TaskSpace::Planar,
        )
        .unwrap();
        assert_relative_eq!(
            m.matrix(),
            &DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]),
            epsilon = 1e-12
        );
        assert!(!m.is_singular());
        let idx = classical_indices(&m);
        assert_relative_eq!(idx.determinant, 1.0, epsilon = 1e-12);
        let expected = (3.0 + 5f64.sqrt()) / (3.0 - 5f64.sqrt());
        assert_relative_eq!(idx.condition_number, expected, epsilon = 1e-9);
        assert_relative_eq!(idx.condition_number, 6.8541, epsilon = 1e-4);
    }

    #[test]
    fn stretched_arm_is_flagged_singular() {
        let m = velocity_manipulability(&planar2(), &JointConfig::from_slice(&[0.0, 0.0]), TaskSpace::Planar).unwrap();
        assert!(m.is_singular());
        assert!(classical_indices(&m).determinant.abs() < 1e-12);
        assert!(matches!(
            force_manipulability(&planar2(), &JointConfig::from_slice(&[0.0, 0.0]), TaskSpace::Planar),
            Err(Error::SingularEllipsoid { .. })
        ));
    }

    #[test]
    fn one_link_spectrum() {
        let arm = KinematicChain::planar(&[1.0]).unwrap();
        let m = velocity_manipulability(&arm, &JointConfig::from_slice(&[0.7]), TaskSpace::Position).unwrap();
        let eig = linalg::sym_eigenvalues(m.matrix());
        assert_relative_eq!(eig[2], 1.0, epsilon = 1e-12);
        assert!(eig[0].abs() < 1e-12 && eig[1].abs() < 1e-12);
    }

    #[test]
    fn force_ellipsoid_is_inverse() {
        let f = force_manipulability(
            &planar2(),
            &JointConfig::from_slice(&[0.0, -FRAC_PI_2]),
            TaskSpace::Planar,
        )
        .unwrap();
        assert_eq!(f.kind, EllipsoidKind::Force);
        assert_relative_eq!(
            f.matrix(),
            &DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 2.0]),
            epsilon = 1e-12
        );
        let i = ManipulabilityEllipsoid::from_matrix(DMatrix::identity(3, 3), EllipsoidKind::Velocity, "x");
        assert_relative_eq!(i.dual().unwrap().matrix(), &DMatrix::identity(3, 3), epsilon = 1e-14);
    }

    #[test]
    fn indices_of_diagonal() {
        let m = ManipulabilityEllipsoid::from_matrix(
            DMatrix::from_diagonal(&DVector::from_row_slice(&[4.0, 1.0])),
            EllipsoidKind::Velocity,
            "x",
        );
        let idx = classical_indices(&m);
        assert_relative_eq!(idx.determinant, 4.0);
        assert_relative_eq!(idx.condition_number, 4.0);
        let idx = indices_of(&DMatrix::identity(3, 3));
        assert_eq!((idx.determinant, idx.condition_number), (1.0, 1.0));
    }

    #[test]
    fn reframe_examples() {
        let m = ManipulabilityEllipsoid::from_matrix(
            DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0, 3.0])),
            EllipsoidKind::Velocity,
            "base",
        );
        let same = reframe(&m, &Matrix3::identity(), "shoulder").unwrap();
        assert_eq!(same.matrix(), m.matrix());
        assert_eq!(same.frame, "shoulder");
        let rz = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2).into_inner();
        let rot = reframe(&m, &rz, "neck").unwrap();
        assert_relative_eq!(
            rot.matrix(),
            &DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 1.0, 3.0])),
            epsilon = 1e-12
        );
        let bad = Matrix3::identity() * 1.1;
        assert!(matches!(reframe(&m, &bad, "x"), Err(Error::NotOrthonormal { .. })));
    }

    #[test]
    fn manipulability_jacobian_one_dof() {
        let arm = KinematicChain::planar(&[0.8]).unwrap();
        let q = JointConfig::from_slice(&[0.3]);
        let mj = manipulability_jacobian(&arm, &q, TaskSpace::Position).unwrap();
        assert_eq!(mj.dof(), 1);
        let h = 1e-6;
        let mp = velocity_manipulability(&arm, &JointConfig::from_slice(&[0.3 + h]), TaskSpace::Position).unwrap();
        let mm = velocity_manipulability(&arm, &JointConfig::from_slice(&[0.3 - h]), TaskSpace::Position).unwrap();
        let fd = (mp.matrix() - mm.matrix()) / (2.0 * h);
        assert!((&mj.slices()[0] - fd).abs().max() < 1e-8);
        assert_eq!(mj.matricized().shape(), (1, 6));
        assert_eq!(mj.task_matrix().shape(), (6, 1));
    }

    #[test]
    fn records_round_trip_and_skip_headers() {
        let rec = EllipsoidRecord {
            t: 0.5,
            frame_tag: "shoulder".into(),
            kind: EllipsoidKind::Velocity,
            spd: SpdMatrix::identity(2),
            u: Some(0.25),
            trial: None,
            action: Some("Re".into()),
        };
        let mut buf = b"{\"provenance\":{}}\n".to_vec();
        write_ellipsoid_records(&mut buf, std::slice::from_ref(&rec)).unwrap();
        let back = read_ellipsoid_records(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec]);
    }

    #[test]
    fn dual_arm_identical_arms_at_common_contact_point() {
        // identical arms reaching the same point with the object origin there:
        // positional G_d† averages, so M_d = (M_l + M_r) / 4
        let arm = KinematicChain::planar(&[0.5, 0.4]).unwrap();
        let q = JointConfig::from_slice(&[0.3, 0.9]);
        let p = arm.end_position(&q).unwrap();
        let grasp = GraspModel::new(
            Vector3::new(1e-4, 0.0, 0.0),
            Vector3::new(-1e-4, 0.0, 0.0),
            Isometry3::translation(p.x, p.y, p.z),
        )
        .unwrap();
        let sys = DualArmSystem::new(arm.clone(), arm.clone(), grasp);
        let md = dual_arm_velocity_manipulability(&sys, &q, &q).unwrap();
        let m = velocity_manipulability(&arm, &q, TaskSpace::Position).unwrap();
        assert_relative_eq!(md.matrix(), &((m.matrix() + m.matrix()) * 0.25), epsilon = 1e-12);

        let far = JointConfig::from_slice(&[1.3, 0.1]);
        assert!(matches!(
            dual_arm_velocity_manipulability(&sys, &q, &far),
            Err(Error::InvalidGrasp(_))
        ));
    }
}

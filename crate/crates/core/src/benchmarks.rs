//! Bundled tracking fixtures shared by the CLI and the test suites.

use nalgebra::{DMatrix, DVector, Isometry3, Vector3};

use crate::control::{SingleChain, TrackingSystem};
use crate::error::{Error, Result};
use crate::kinematics::{Anthropometry, AnthropomorphicArm, Joint, JointConfig, KinematicChain, TaskSpace};
use crate::linalg::SvdParts;
use crate::manipulability::SharedBaseDualArm;
use crate::spd::SpdMatrix;

/// A system, an initial configuration and constant targets.
pub struct Fixture<S> {
    pub system: S,
    pub q0: JointConfig,
    pub target_m: SpdMatrix,
    pub target_x: DVector<f64>,
}

fn current_m(sys: &dyn TrackingSystem, q: &JointConfig) -> Result<SpdMatrix> {
    SpdMatrix::new(sys.manipulability(q)?)
}

/// Planar 3-link arm (0.4, 0.35, 0.25 m) with a reachable constant target
/// `M̂ = M(q*)`; the position target is the initial hand position.
pub fn planar3_constant_target() -> Result<Fixture<SingleChain>> {
    let system = SingleChain::new(KinematicChain::planar(&[0.4, 0.35, 0.25])?, TaskSpace::Planar);
    let q0 = JointConfig::from_slice(&[0.3, 0.9, 0.6]);
    let q_star = JointConfig::from_slice(&[0.1, 1.5, -0.4]);
    Ok(Fixture {
        target_m: current_m(&system, &q_star)?,
        target_x: system.position(&q0)?,
        q0,
        system,
    })
}

/// 7-DoF arm whose manipulability and hand position targets are both taken
/// from another configuration `q*`.
pub fn arm7_transfer() -> Result<Fixture<SingleChain>> {
    let arm = AnthropomorphicArm::new(Anthropometry::default(), Isometry3::identity())?;
    let system = SingleChain::new(arm.chain().clone(), TaskSpace::Position);
    let q0 = JointConfig::from_slice(&[-0.5, 0.2, 0.1, 1.3, 0.1, 0.2, 0.0]);
    let q_star = JointConfig::from_slice(&[-0.407, -0.021, 0.281, 1.102, 0.196, 0.299, -0.209]);
    Ok(Fixture {
        target_m: current_m(&system, &q_star)?,
        target_x: system.position(&q_star)?,
        q0,
        system,
    })
}

/// Two 7-DoF arms on a 2-DoF torso (yaw, pitch) holding an object in front
/// of the chest with elbows raised; the initial dual-arm ellipsoid is
/// elongated horizontally.
pub fn dual_arm_system() -> Result<(SharedBaseDualArm, JointConfig)> {
    let arm = [-1.14, -0.68, -0.75, -1.14, 0.52, 1.05, 0.50];
    let mirror = [1.0, -1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
    let mut q = vec![0.0, 0.37];
    q.extend_from_slice(&arm);
    q.extend(arm.iter().zip(mirror).map(|(a, s)| a * s));
    let q0 = JointConfig::from_slice(&q);
    Ok((dual_arm_system_at(&q0)?, q0))
}

/// The default torso and arms with the grasp frame fixed at `q0`.
pub fn dual_arm_system_at(q0: &JointConfig) -> Result<SharedBaseDualArm> {
    let torso = KinematicChain::new(
        vec![
            Joint::new("torso_yaw", Vector3::new(0.0, 0.0, 1.0), Vector3::z())?,
            Joint::new("torso_pitch", Vector3::zeros(), Vector3::y())?,
        ],
        Isometry3::identity(),
        Isometry3::translation(0.0, 0.0, 0.45),
    )?;
    let dims = Anthropometry::default();
    let left = AnthropomorphicArm::new(dims, Isometry3::translation(0.0, 0.2, 0.0))?;
    let right = AnthropomorphicArm::new(dims, Isometry3::translation(0.0, -0.2, 0.0))?;
    SharedBaseDualArm::new(&torso, left.chain(), right.chain(), q0)
}

/// Volume-normalized vertical extent `ln M_zz − ln det(M)/3`.
pub fn vertical_elongation(m: &DMatrix<f64>) -> f64 {
    m[(2, 2)].ln() - m.determinant().ln() / 3.0
}

/// Walks the self-motion manifold of the hands (positions held fixed) uphill
/// in [`vertical_elongation`]: `steps` projected-gradient steps of joint-space
/// length `step`, each followed by Newton corrections of both hand positions.
/// Returns the final configuration, whose ellipsoid is reachable by
/// nullspace motion by construction.
pub fn elongate_in_self_motion(
    sys: &SharedBaseDualArm,
    q0: &JointConfig,
    steps: usize,
    step: f64,
) -> Result<JointConfig> {
    let hold = TrackingSystem::position(sys, q0)?;
    let mut q = q0.clone();
    for _ in 0..steps {
        let m = TrackingSystem::manipulability(sys, &q)?;
        let m_inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Infeasible("singular dual-arm ellipsoid".into()))?;
        let jm = sys.manipulability_jacobian(&q)?;
        let grad = DVector::from_iterator(
            sys.dof(),
            jm.slices()
                .iter()
                .map(|s| s[(2, 2)] / m[(2, 2)] - (&m_inv * s).trace() / 3.0),
        );
        let dir = SvdParts::new(&sys.stacked_jacobian(&q)?).nullspace_projector() * grad;
        let norm = dir.norm();
        if norm < 1e-12 {
            break;
        }
        q.0 += dir * (step / norm);
        for _ in 0..5 {
            let err = &hold - TrackingSystem::position(sys, &q)?;
            q.0 += SvdParts::new(&sys.stacked_jacobian(&q)?).pinv(0.0) * err;
        }
    }
    Ok(q)
}

/// Dual-arm fixture: hold both hands while reshaping the ellipsoid towards a
/// vertically elongated one found on the hands' self-motion manifold.
pub fn dual_arm_fixture() -> Result<Fixture<SharedBaseDualArm>> {
    let (system, q0) = dual_arm_system()?;
    let q_star = elongate_in_self_motion(&system, &q0, 300, 0.005)?;
    Ok(Fixture {
        target_m: current_m(&system, &q_star)?,
        target_x: TrackingSystem::position(&system, &q0)?,
        q0,
        system,
    })
}

/// Angle in degrees between the major axis of `m` and the vertical.
pub fn major_axis_tilt(m: &DMatrix<f64>) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let axis = eig.eigenvectors.column(eig.eigenvalues.imax());
    axis[2].abs().min(1.0).acos().to_degrees()
}

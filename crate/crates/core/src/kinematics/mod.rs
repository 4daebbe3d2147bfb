//! Serial-chain kinematics, the anthropomorphic arm model and two-arm grasps.

pub mod arm;
pub mod chain;
pub mod description;
pub mod grasp;

pub use arm::{Anthropometry, AnthropomorphicArm, ArmTriangle};
pub use chain::{Joint, JointConfig, KinematicChain, TaskSpace};
pub use description::{Robot, RobotDescription};
pub use grasp::{GraspModel, GraspVariant};

use nalgebra::DMatrix;

/// `Jᵀ(JJᵀ + λ²I)⁻¹`; with zero damping, the Moore-Penrose pseudoinverse.
pub fn damped_pseudoinverse(m: &DMatrix<f64>, damping: f64) -> DMatrix<f64> {
    crate::linalg::damped_pinv(m, damping)
}

/// `I − J⁺J` built from the exact pseudoinverse.
pub fn nullspace_projector(m: &DMatrix<f64>) -> DMatrix<f64> {
    crate::linalg::nullspace_projector(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pseudoinverse_examples() {
        let i = DMatrix::<f64>::identity(3, 3);
        assert_relative_eq!(damped_pseudoinverse(&i, 0.0), i, epsilon = 1e-14);
        let j = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert_relative_eq!(
            damped_pseudoinverse(&j, 0.0),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            epsilon = 1e-14
        );
    }

    #[test]
    fn damped_inverse_is_bounded_on_rank_deficient_input() {
        // rank one: second row is a multiple of the first
        let j = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, 2.0, 4.0, 1.0]);
        let lambda = 1e-2;
        let p = damped_pseudoinverse(&j, lambda);
        let norm = p.clone().svd(false, false).singular_values.max();
        assert!(norm <= 1.0 / (2.0 * lambda) + 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
        // along the null direction of JJᵀ the damped inverse is ~0 since σ = 0 there
        let svd = j.clone().svd(true, true);
        let u = svd.u.unwrap();
        let null_dir = u.column(1).into_owned();
        assert!((&p * null_dir).norm() <= 1.0 / (2.0 * lambda));
    }
}

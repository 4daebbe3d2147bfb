//! Balance-style primary task on a floating base.
//!
//! The full velocity vector is `(q̇_actuated, q̇_virtual)` with six virtual
//! joints (base linear then angular velocity, world frame, about the base
//! origin). The primary task stacks a feet block, which pins the base, and
//! the horizontal velocity of the centre of mass. Tracking velocities run in
//! its nullspace, and only the actuated part is returned.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, KinematicChain};
use crate::linalg::{skew, SvdParts};

pub const VIRTUAL_JOINTS: usize = 6;

/// Primary task `J_b q̇ = ẋ_b` over actuated plus virtual joints.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceTask {
    pub j_b: DMatrix<f64>,
    pub xdot_b: DVector<f64>,
}

impl BalanceTask {
    pub fn new(j_b: DMatrix<f64>, xdot_b: DVector<f64>) -> Result<Self> {
        if j_b.nrows() != xdot_b.len() {
            return Err(Error::DimensionMismatch {
                expected: j_b.nrows(),
                got: xdot_b.len(),
            });
        }
        if j_b.ncols() <= VIRTUAL_JOINTS {
            return Err(Error::DimensionMismatch {
                expected: VIRTUAL_JOINTS + 1,
                got: j_b.ncols(),
            });
        }
        Ok(BalanceTask { j_b, xdot_b })
    }

    pub fn actuated(&self) -> usize {
        self.j_b.ncols() - VIRTUAL_JOINTS
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancedVelocity {
    /// Actuated joint velocities.
    pub qdot: DVector<f64>,
    /// Actuated and virtual velocities before selection.
    pub full: DVector<f64>,
    /// `J_b` lost row rank and the primary solve was damped.
    pub rank_deficient: bool,
}

/// `q̇ = S (J_b† ẋ_b + N_b q̇_N)` where `S` keeps the actuated joints.
///
/// `secondary` may cover only the actuated joints, in which case the virtual
/// joints get zero secondary velocity.
pub fn balanced_step(balance: &BalanceTask, secondary: &DVector<f64>, damping: f64) -> Result<BalancedVelocity> {
    let n = balance.actuated();
    let total = n + VIRTUAL_JOINTS;
    let sec = if secondary.len() == total {
        secondary.clone()
    } else if secondary.len() == n {
        let mut s = DVector::zeros(total);
        s.rows_mut(0, n).copy_from(secondary);
        s
    } else {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: secondary.len(),
        });
    };
    let svd = SvdParts::new(&balance.j_b);
    let rank_deficient = svd.rank() < balance.j_b.nrows();
    let pinv = svd.pinv(if rank_deficient { damping } else { 0.0 });
    let full = pinv * &balance.xdot_b + svd.nullspace_projector() * sec;
    Ok(BalancedVelocity {
        qdot: full.rows(0, n).into_owned(),
        full,
        rank_deficient,
    })
}

/// Synthetic feet + horizontal-CoM model for a serial chain on a floating
/// base. Link masses are lumped equally at the joint origins and the end point.
#[derive(Debug, Clone)]
pub struct BalanceModel {
    pub chain: KinematicChain,
    /// Desired horizontal CoM position.
    pub com_target: Vector2<f64>,
    pub k_com: f64,
}

impl BalanceModel {
    pub fn new(chain: KinematicChain, q0: &JointConfig, k_com: f64) -> Result<Self> {
        let mut model = BalanceModel {
            chain,
            com_target: Vector2::zeros(),
            k_com,
        };
        let c = model.com(q0)?;
        model.com_target = Vector2::new(c.x, c.y);
        Ok(model)
    }

    fn points(&self, q: &JointConfig) -> Result<(Vec<Vector3<f64>>, DMatrix<f64>)> {
        let frames = self.chain.frames(q)?;
        let n = self.chain.dof();
        let mut points: Vec<Vector3<f64>> = frames.origins.clone();
        points.push(frames.end.translation.vector);
        let w = 1.0 / points.len() as f64;
        let mut jac = DMatrix::zeros(3, n);
        for (m, p) in points.iter().enumerate() {
            // a point moves with every joint before it
            for i in 0..m.min(n) {
                let v = frames.axes[i].cross(&(p - frames.origins[i])) * w;
                for r in 0..3 {
                    jac[(r, i)] += v[r];
                }
            }
        }
        Ok((points, jac))
    }

    pub fn com(&self, q: &JointConfig) -> Result<Vector3<f64>> {
        let (points, _) = self.points(q)?;
        Ok(points.iter().sum::<Vector3<f64>>() / points.len() as f64)
    }

    /// 3×n Jacobian of the CoM with respect to the actuated joints.
    pub fn com_jacobian(&self, q: &JointConfig) -> Result<DMatrix<f64>> {
        Ok(self.points(q)?.1)
    }

    pub fn task(&self, q: &JointConfig) -> Result<BalanceTask> {
        let n = self.chain.dof();
        let total = n + VIRTUAL_JOINTS;
        let (points, jc) = self.points(q)?;
        let c = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
        let base = self.chain.base().translation.vector;
        let mut j_b = DMatrix::zeros(VIRTUAL_JOINTS + 2, total);
        j_b.view_mut((0, n), (VIRTUAL_JOINTS, VIRTUAL_JOINTS))
            .copy_from(&DMatrix::identity(VIRTUAL_JOINTS, VIRTUAL_JOINTS));
        // CoM row block: actuated contribution, base translation, base rotation ω × (c − b)
        let rot = -skew(&(c - base));
        for r in 0..2 {
            for i in 0..n {
                j_b[(VIRTUAL_JOINTS + r, i)] = jc[(r, i)];
            }
            j_b[(VIRTUAL_JOINTS + r, n + r)] = 1.0;
            for a in 0..3 {
                j_b[(VIRTUAL_JOINTS + r, n + 3 + a)] = rot[(r, a)];
            }
        }
        let mut xdot_b = DVector::zeros(VIRTUAL_JOINTS + 2);
        xdot_b[VIRTUAL_JOINTS] = self.k_com * (self.com_target.x - c.x);
        xdot_b[VIRTUAL_JOINTS + 1] = self.k_com * (self.com_target.y - c.y);
        BalanceTask::new(j_b, xdot_b)
    }
}

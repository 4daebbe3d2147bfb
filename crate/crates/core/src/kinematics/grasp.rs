use nalgebra::{DMatrix, Isometry3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::skew;

/// Which twist components the grasp map relates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GraspVariant {
    /// Linear velocities only: 3×6.
    #[default]
    Positional,
    /// Full twists: 6×12.
    Full,
}

/// Two-handed tight grasp of a rigid object.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspModel {
    left_contact: Vector3<f64>,
    right_contact: Vector3<f64>,
    object_frame: Isometry3<f64>,
}

impl GraspModel {
    pub fn new(left_contact: Vector3<f64>, right_contact: Vector3<f64>, object_frame: Isometry3<f64>) -> Result<Self> {
        if (left_contact - right_contact).norm() < 1e-9 {
            return Err(Error::InvalidGrasp("contacts must be distinct".into()));
        }
        Ok(GraspModel {
            left_contact,
            right_contact,
            object_frame,
        })
    }

    /// Grasp with the object frame at the midpoint between two world-frame
    /// contact points (axes aligned with the world).
    pub fn from_world_contacts(left: Vector3<f64>, right: Vector3<f64>) -> Result<Self> {
        let mid = (left + right) * 0.5;
        Self::new(left - mid, right - mid, Isometry3::translation(mid.x, mid.y, mid.z))
    }

    pub fn left_contact(&self) -> &Vector3<f64> {
        &self.left_contact
    }

    pub fn right_contact(&self) -> &Vector3<f64> {
        &self.right_contact
    }

    pub fn object_frame(&self) -> &Isometry3<f64> {
        &self.object_frame
    }

    pub fn world_contacts(&self) -> (Vector3<f64>, Vector3<f64>) {
        (
            self.object_frame.transform_point(&self.left_contact.into()).coords,
            self.object_frame.transform_point(&self.right_contact.into()).coords,
        )
    }

    /// `G_d = (G_l, G_r)`.
    ///
    /// Each partial grasp matrix satisfies `ẋ_i = G_iᵀ ẋ_o` for a tight grasp,
    /// so the object twist seen through the arms is `ẋ_o = G_d^{†ᵀ} ẋ_d`. In the
    /// full variant `G_i = [[I, 0], [S(r_i), I]]` with `r_i` the world-frame
    /// lever from the object origin to contact `i`; the positional variant
    /// keeps only the identity blocks.
    pub fn grasp_matrix(&self, variant: GraspVariant) -> DMatrix<f64> {
        match variant {
            GraspVariant::Positional => {
                let mut g = DMatrix::zeros(3, 6);
                for i in 0..3 {
                    g[(i, i)] = 1.0;
                    g[(i, i + 3)] = 1.0;
                }
                g
            }
            GraspVariant::Full => {
                let rot = self.object_frame.rotation;
                let mut g = DMatrix::zeros(6, 12);
                for (block, contact) in [self.left_contact, self.right_contact].iter().enumerate() {
                    let lever = rot * contact;
                    let s = skew(&lever);
                    let c0 = block * 6;
                    for i in 0..3 {
                        g[(i, c0 + i)] = 1.0;
                        g[(i + 3, c0 + i + 3)] = 1.0;
                        for j in 0..3 {
                            g[(i + 3, c0 + j)] = s[(i, j)];
                        }
                    }
                }
                g
            }
        }
    }
}

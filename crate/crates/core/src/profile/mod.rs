//! Manipulability profiles: per-timestep statistics over aligned ellipsoid
//! sequences, and a time-driven mixture model for retrieving a desired profile.

pub mod gmm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manipulability::indices_of;
use crate::mocap::Action;
use crate::spd::{frechet_mean, spd_covariance, CovarianceWire, FrechetOptions, SpdCovariance, SpdMatrix};

pub use gmm::{fit_gmm, retrieve_profile, GmmComponent, GmmInit, GmmOptions, SpdGmm, TimedSpd};

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileStep {
    /// Normalized time in `[0, 1]`.
    pub u: f64,
    pub action: Option<Action>,
    pub mean: SpdMatrix,
    pub covariance: SpdCovariance,
    /// `sqrt(S[i,i,i,i])` per axis.
    pub axis_std: Vec<f64>,
    pub det: f64,
    pub cond: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ManipulabilityProfile {
    pub steps: Vec<ProfileStep>,
}

/// Normalized time of sample `j` of action number `a` when every one of the
/// `actions` actions contributes `per_action` equally spaced samples.
pub fn action_time(a: usize, j: usize, actions: usize, per_action: usize) -> f64 {
    let total = actions * per_action;
    if total <= 1 {
        0.0
    } else {
        (a * per_action + j) as f64 / (total - 1) as f64
    }
}

/// Statistics per timestep of a timestep-major collection of ellipsoids.
pub fn build_profile(aligned: &[Vec<SpdMatrix>]) -> Result<ManipulabilityProfile> {
    let n_steps = aligned.len();
    if n_steps == 0 {
        return Err(Error::TooFewSamples { required: 1, got: 0 });
    }
    let n_samples = aligned[0].len();
    let dim = aligned[0].first().map_or(0, |m| m.dim());
    let mut steps = Vec::with_capacity(n_steps);
    for (index, samples) in aligned.iter().enumerate() {
        let at = |source: Error| Error::AtTimestep {
            index,
            source: Box::new(source),
        };
        if samples.len() < 2 {
            return Err(at(Error::TooFewSamples {
                required: 2,
                got: samples.len(),
            }));
        }
        if samples.len() != n_samples {
            return Err(at(Error::DimensionMismatch {
                expected: n_samples,
                got: samples.len(),
            }));
        }
        if let Some(m) = samples.iter().find(|m| m.dim() != dim) {
            return Err(at(Error::DimensionMismatch {
                expected: dim,
                got: m.dim(),
            }));
        }
        let mean = frechet_mean(samples, FrechetOptions::default()).map_err(at)?;
        let covariance = spd_covariance(samples, &mean).map_err(at)?;
        let idx = indices_of(mean.matrix());
        steps.push(ProfileStep {
            u: if n_steps > 1 {
                index as f64 / (n_steps - 1) as f64
            } else {
                0.0
            },
            action: None,
            axis_std: covariance.axis_std(),
            det: idx.determinant,
            cond: idx.condition_number,
            mean,
            covariance,
            n_samples,
        });
    }
    Ok(ManipulabilityProfile { steps })
}

impl ManipulabilityProfile {
    /// Tags consecutive blocks of `per_action` steps with the given actions.
    pub fn with_actions(mut self, actions: &[Action], per_action: usize) -> Result<Self> {
        if actions.len() * per_action != self.steps.len() {
            return Err(Error::DimensionMismatch {
                expected: self.steps.len(),
                got: actions.len() * per_action,
            });
        }
        for (i, step) in self.steps.iter_mut().enumerate() {
            step.action = Some(actions[i / per_action]);
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn to_wire(&self) -> ProfileWire {
        ProfileWire {
            steps: self
                .steps
                .iter()
                .map(|s| ProfileStepWire {
                    u: s.u,
                    action: s.action,
                    mean: s.mean.clone(),
                    covariance: s.covariance.to_wire(),
                    axis_std: s.axis_std.clone(),
                    det: s.det,
                    cond: s.cond,
                    n_samples: s.n_samples,
                })
                .collect(),
        }
    }

    pub fn from_wire(wire: ProfileWire) -> Result<Self> {
        let steps = wire
            .steps
            .into_iter()
            .map(|s| {
                Ok(ProfileStep {
                    covariance: SpdCovariance::from_wire(s.mean.clone(), &s.covariance)?,
                    u: s.u,
                    action: s.action,
                    mean: s.mean,
                    axis_std: s.axis_std,
                    det: s.det,
                    cond: s.cond,
                    n_samples: s.n_samples,
                })
            })
            .collect::<Result<_>>()?;
        Ok(ManipulabilityProfile { steps })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileStepWire {
    pub u: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    pub mean: SpdMatrix,
    pub covariance: CovarianceWire,
    pub axis_std: Vec<f64>,
    #[serde(with = "nonfinite")]
    pub det: f64,
    #[serde(with = "nonfinite")]
    pub cond: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProfileWire {
    pub steps: Vec<ProfileStepWire>,
}

/// JSON has no infinity; infinite values are written as `null`.
pub(crate) mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

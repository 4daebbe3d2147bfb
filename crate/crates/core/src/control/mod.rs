//! Prioritized joint-velocity control tracking a manipulability profile
//! together with an end-effector position, integrated with explicit Euler.

pub mod balance;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, KinematicChain, TaskSpace};
use crate::linalg::SvdParts;
use crate::manipulability::{manipulability_jacobian, ManipulabilityJacobian, SharedBaseDualArm};
use crate::profile::SpdGmm;
use crate::spd::{spd_distance, spd_log, sym_vec_len, sym_vec_unchecked, SpdMatrix};

pub use balance::{balanced_step, BalanceModel, BalanceTask, BalancedVelocity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityMode {
    ManipulabilityFirst,
    PositionFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorityPhase {
    pub t_start: f64,
    pub mode: PriorityMode,
}

/// A gain given as `k·I` or as a full symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gain {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Gain {
    pub fn resolve(&self, dim: usize) -> Result<DMatrix<f64>> {
        let m = match self {
            Gain::Scalar(k) => DMatrix::identity(dim, dim) * *k,
            Gain::Matrix(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: rows.len(),
                    });
                }
                DMatrix::from_fn(dim, dim, |i, j| rows[i][j])
            }
        };
        // symmetric positive definite
        SpdMatrix::new(m.clone())?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Manipulability gain (1/s), acting on `sym_vec` coordinates.
    pub k_m: Gain,
    /// Position gain (1/s).
    pub k_x: Gain,
    pub dt: f64,
    /// Manipulability-first before, position-first after. Ignored when
    /// `priority_schedule` is nonempty.
    pub switch_time: f64,
    /// Damping of the task-term pseudoinverses.
    pub damping: f64,
    pub priority_schedule: Vec<PriorityPhase>,
    /// Abort when the manipulability distance exceeds this multiple of its
    /// initial value.
    pub divergence_factor: f64,
    /// Lower bound for the initial distance used by the divergence guard.
    pub divergence_floor: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            k_m: Gain::Scalar(5.0),
            k_x: Gain::Scalar(10.0),
            dt: 1e-3,
            switch_time: 1.0,
            damping: 1e-4,
            priority_schedule: Vec::new(),
            divergence_factor: 2.0,
            divergence_floor: 1e-3,
        }
    }
}

impl ControllerConfig {
    /// Single-mode configuration.
    pub fn with_mode(mode: PriorityMode) -> Self {
        ControllerConfig {
            priority_schedule: vec![PriorityPhase { t_start: 0.0, mode }],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::OutOfRange {
                value: self.dt,
                range: "dt > 0",
            });
        }
        if !(self.damping >= 0.0) {
            return Err(Error::OutOfRange {
                value: self.damping,
                range: "damping >= 0",
            });
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::OutOfRange {
                value: self.divergence_factor,
                range: "divergence_factor > 1",
            });
        }
        if self.priority_schedule.windows(2).any(|w| w[1].t_start < w[0].t_start) {
            return Err(Error::Parse("priority_schedule must be sorted by t_start".into()));
        }
        Ok(())
    }

    pub fn mode_at(&self, t: f64) -> PriorityMode {
        if self.priority_schedule.is_empty() {
            return if t < self.switch_time {
                PriorityMode::ManipulabilityFirst
            } else {
                PriorityMode::PositionFirst
            };
        }
        self.priority_schedule
            .iter()
            .take_while(|p| p.t_start <= t)
            .last()
            .unwrap_or(&self.priority_schedule[0])
            .mode
    }
}

/// Kinematic quantities the controller needs from a robot.
pub trait TrackingSystem {
    fn dof(&self) -> usize;
    /// Tracked end-effector position(s), stacked.
    fn position(&self, q: &JointConfig) -> Result<DVector<f64>>;
    fn position_jacobian(&self, q: &JointConfig) -> Result<DMatrix<f64>>;
    fn manipulability(&self, q: &JointConfig) -> Result<DMatrix<f64>>;
    fn manipulability_jacobian(&self, q: &JointConfig) -> Result<ManipulabilityJacobian>;
}

/// A single serial chain; manipulability and position both use `space`.
#[derive(Debug, Clone)]
pub struct SingleChain {
    pub chain: KinematicChain,
    pub space: TaskSpace,
}

impl SingleChain {
    pub fn new(chain: KinematicChain, space: TaskSpace) -> Self {
        SingleChain { chain, space }
    }
}

impl TrackingSystem for SingleChain {
    fn dof(&self) -> usize {
        self.chain.dof()
    }

    fn position(&self, q: &JointConfig) -> Result<DVector<f64>> {
        let p = self.chain.end_position(q)?;
        Ok(DVector::from_iterator(
            self.space.position_rows().len(),
            self.space.position_rows().iter().map(|&r| p[r]),
        ))
    }

    fn position_jacobian(&self, q: &JointConfig) -> Result<DMatrix<f64>> {
        let rows = match self.space {
            TaskSpace::Planar => TaskSpace::Planar,
            _ => TaskSpace::Position,
        };
        self.chain.jacobian(q, rows)
    }

    fn manipulability(&self, q: &JointConfig) -> Result<DMatrix<f64>> {
        let j = self.chain.jacobian(q, self.space)?;
        Ok(&j * j.transpose())
    }

    fn manipulability_jacobian(&self, q: &JointConfig) -> Result<ManipulabilityJacobian> {
        manipulability_jacobian(&self.chain, q, self.space)
    }
}

impl TrackingSystem for SharedBaseDualArm {
    fn dof(&self) -> usize {
        SharedBaseDualArm::dof(self)
    }

    fn position(&self, q: &JointConfig) -> Result<DVector<f64>> {
        let (l, r) = self.hand_positions(q)?;
        Ok(DVector::from_row_slice(&[l.x, l.y, l.z, r.x, r.y, r.z]))
    }

    fn position_jacobian(&self, q: &JointConfig) -> Result<DMatrix<f64>> {
        self.stacked_jacobian(q)
    }

    fn manipulability(&self, q: &JointConfig) -> Result<DMatrix<f64>> {
        Ok(self.velocity_manipulability(q)?.matrix().clone())
    }

    fn manipulability_jacobian(&self, q: &JointConfig) -> Result<ManipulabilityJacobian> {
        SharedBaseDualArm::manipulability_jacobian(self, q)
    }
}

/// Joint velocity of one control step, split into its two priority levels.
#[derive(Debug, Clone, PartialEq)]
pub struct StepVelocity {
    pub qdot: DVector<f64>,
    /// Unprojected term of the higher-priority task.
    pub primary: DVector<f64>,
    /// Lower-priority term after nullspace projection.
    pub secondary: DVector<f64>,
    pub mode: PriorityMode,
    /// The manipulability Jacobian lost rank (damped inverse only).
    pub manipulability_rank_deficient: bool,
    pub position_rank_deficient: bool,
}

/// Errors of both tasks at a configuration, plus their Jacobians.
struct TaskErrors {
    m: SpdMatrix,
    log_vec: DVector<f64>,
    x: DVector<f64>,
    pos_err: DVector<f64>,
    j: DMatrix<f64>,
    jm: DMatrix<f64>,
}

fn task_errors(
    sys: &dyn TrackingSystem,
    q: &JointConfig,
    target_m: &SpdMatrix,
    target_x: &DVector<f64>,
) -> Result<TaskErrors> {
    let m_raw = sys.manipulability(q)?;
    let m = SpdMatrix::new(m_raw).map_err(|e| match e {
        Error::NotPositiveDefinite { min_eigenvalue } => Error::SingularEllipsoid { min_eigenvalue },
        other => other,
    })?;
    if m.dim() != target_m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: target_m.dim(),
        });
    }
    let x = sys.position(q)?;
    if x.len() != target_x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: target_x.len(),
        });
    }
    let log_vec = sym_vec_unchecked(spd_log(&m, target_m)?.value()).into_vector();
    Ok(TaskErrors {
        pos_err: target_x - &x,
        j: sys.position_jacobian(q)?,
        jm: sys.manipulability_jacobian(q)?.task_matrix(),
        m,
        log_vec,
        x,
    })
}

fn rank_deficient(svd: &SvdParts, damping: f64) -> bool {
    let full = svd.nrows.min(svd.ncols);
    svd.rank() < full || svd.s.len() < full || svd.min_singular() <= damping
}

fn control_step(
    e: &TaskErrors,
    k_m: &DMatrix<f64>,
    k_x: &DMatrix<f64>,
    damping: f64,
    mode: PriorityMode,
) -> StepVelocity {
    let svd_m = SvdParts::new(&e.jm);
    let svd_x = SvdParts::new(&e.j);
    let manip_term = svd_m.pinv(damping) * (k_m * &e.log_vec);
    let pos_term = svd_x.pinv(damping) * (k_x * &e.pos_err);
    let (primary, secondary) = match mode {
        PriorityMode::ManipulabilityFirst => (manip_term, svd_m.nullspace_projector() * pos_term),
        PriorityMode::PositionFirst => (pos_term, svd_x.nullspace_projector() * manip_term),
    };
    StepVelocity {
        qdot: &primary + &secondary,
        primary,
        secondary,
        mode,
        manipulability_rank_deficient: rank_deficient(&svd_m, damping),
        position_rank_deficient: rank_deficient(&svd_x, damping),
    }
}

fn resolve_gains(cfg: &ControllerConfig, m_dim: usize, x_dim: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    Ok((cfg.k_m.resolve(sym_vec_len(m_dim))?, cfg.k_x.resolve(x_dim)?))
}

fn step_with_mode(
    sys: &dyn TrackingSystem,
    q: &JointConfig,
    target_m: &SpdMatrix,
    target_x: &DVector<f64>,
    cfg: &ControllerConfig,
    mode: PriorityMode,
) -> Result<StepVelocity> {
    let e = task_errors(sys, q, target_m, target_x)?;
    let (k_m, k_x) = resolve_gains(cfg, target_m.dim(), target_x.len())?;
    Ok(control_step(&e, &k_m, &k_x, cfg.damping, mode))
}

/// Manipulability tracking first; position tracking in its nullspace.
pub fn manipulability_first_step(
    sys: &dyn TrackingSystem,
    q: &JointConfig,
    target_m: &SpdMatrix,
    target_x: &DVector<f64>,
    cfg: &ControllerConfig,
) -> Result<StepVelocity> {
    step_with_mode(sys, q, target_m, target_x, cfg, PriorityMode::ManipulabilityFirst)
}

/// Position tracking first; manipulability tracking in its nullspace.
pub fn position_first_step(
    sys: &dyn TrackingSystem,
    q: &JointConfig,
    target_m: &SpdMatrix,
    target_x: &DVector<f64>,
    cfg: &ControllerConfig,
) -> Result<StepVelocity> {
    step_with_mode(sys, q, target_m, target_x, cfg, PriorityMode::PositionFirst)
}

/// Desired manipulability over time.
#[derive(Debug, Clone)]
pub enum ProfileSource {
    Constant(SpdMatrix),
    /// Mixture model evaluated at `u = t / duration`, clamped to `[0, 1]`.
    Gmm {
        model: SpdGmm,
        duration: f64,
    },
}

impl ProfileSource {
    pub fn at(&self, t: f64) -> SpdMatrix {
        match self {
            ProfileSource::Constant(m) => m.clone(),
            ProfileSource::Gmm { model, duration } => {
                let u = if *duration > 0.0 {
                    (t / duration).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                model.retrieve(u)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProfileSource::Constant(m) => m.dim(),
            ProfileSource::Gmm { model, .. } => model.dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub q: JointConfig,
    pub x: DVector<f64>,
    pub m: SpdMatrix,
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub q: Vec<f64>,
    pub x: Vec<f64>,
    pub spd_distance: f64,
    pub pos_error: f64,
    pub mode: PriorityMode,
    /// Current manipulability (upper triangle, row-major).
    pub m: Vec<f64>,
    pub m_target: Vec<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { t: f64, distance: f64, limit: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingRun {
    pub records: Vec<StepRecord>,
    pub final_state: SimState,
    pub status: RunStatus,
}

impl TrackingRun {
    pub fn check(&self) -> Result<()> {
        match self.status {
            RunStatus::Completed => Ok(()),
            RunStatus::Diverged { t, distance, limit } => Err(Error::Diverged { t, distance, limit }),
        }
    }

    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.spd_distance).collect()
    }

    pub fn position_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.pos_error).collect()
    }

    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Optional balance layer wrapped around the tracking velocities.
pub type BalanceHook<'a> = &'a dyn Fn(&JointConfig, &DVector<f64>) -> Result<DVector<f64>>;

/// Euler-integrates the prioritized controller for `duration` seconds.
pub fn run_tracking(
    sys: &dyn TrackingSystem,
    profile: &ProfileSource,
    target_x: &DVector<f64>,
    q0: &JointConfig,
    cfg: &ControllerConfig,
    duration: f64,
) -> Result<TrackingRun> {
    run_tracking_with(sys, profile, target_x, q0, cfg, duration, None)
}

pub fn run_tracking_with(
    sys: &dyn TrackingSystem,
    profile: &ProfileSource,
    target_x: &DVector<f64>,
    q0: &JointConfig,
    cfg: &ControllerConfig,
    duration: f64,
    balance: Option<BalanceHook<'_>>,
) -> Result<TrackingRun> {
    cfg.validate()?;
    if q0.len() != sys.dof() {
        return Err(Error::DimensionMismatch {
            expected: sys.dof(),
            got: q0.len(),
        });
    }
    let (k_m, k_x) = resolve_gains(cfg, profile.dim(), target_x.len())?;
    let steps = (duration / cfg.dt).round() as usize;
    let mut q = q0.clone();
    let mut records = Vec::with_capacity(steps + 1);
    let mut limit = f64::INFINITY;
    let mut status = RunStatus::Completed;
    let mut last: Option<SimState> = None;
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let target_m = profile.at(t);
        let e = task_errors(sys, &q, &target_m, target_x)?;
        let distance = spd_distance(&e.m, &target_m)?;
        if k == 0 {
            limit = cfg.divergence_factor * distance.max(cfg.divergence_floor);
        }
        let mode = cfg.mode_at(t);
        let v = control_step(&e, &k_m, &k_x, cfg.damping, mode);
        records.push(StepRecord {
            t,
            q: q.as_slice().to_vec(),
            x: e.x.as_slice().to_vec(),
            spd_distance: distance,
            pos_error: e.pos_err.norm(),
            mode,
            m: e.m.upper_triangular_row_major(),
            m_target: target_m.upper_triangular_row_major(),
            rank_deficient: v.manipulability_rank_deficient || v.position_rank_deficient,
        });
        last = Some(SimState {
            t,
            q: q.clone(),
            x: e.x.clone(),
            m: e.m.clone(),
        });
        if !distance.is_finite() || distance > limit {
            status = RunStatus::Diverged { t, distance, limit };
            break;
        }
        if k == steps {
            break;
        }
        let qdot = match balance {
            Some(hook) => hook(&q, &v.qdot)?,
            None => v.qdot,
        };
        if qdot.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        q = JointConfig(&q.0 + qdot * cfg.dt);
    }
    Ok(TrackingRun {
        records,
        final_state: last.expect("at least one step is recorded"),
        status,
    })
}

/// Tolerance on end-effector drift for fixed-position dual-arm runs.
pub const DUAL_ARM_DRIFT_TOL: f64 = 1e-3;

/// Position-first tracking that holds both hands at their initial positions
/// while the dual-arm manipulability follows `profile` in the nullspace.
pub fn run_dual_arm_tracking(
    sys: &SharedBaseDualArm,
    profile: &ProfileSource,
    q0: &JointConfig,
    cfg: &ControllerConfig,
    duration: f64,
) -> Result<TrackingRun> {
    let hold = TrackingSystem::position(sys, q0)?;
    let j = sys.stacked_jacobian(q0)?;
    let rank = SvdParts::new(&j).rank();
    if rank >= j.ncols() {
        return Err(Error::Infeasible(format!(
            "no redundancy left: position Jacobian rank {rank} with {} joints",
            j.ncols()
        )));
    }
    let cfg = ControllerConfig {
        priority_schedule: vec![PriorityPhase {
            t_start: 0.0,
            mode: PriorityMode::PositionFirst,
        }],
        ..cfg.clone()
    };
    let run = run_tracking(sys, profile, &hold, q0, &cfg, duration)?;
    let drift = run.records.iter().map(|r| r.pos_error).fold(0.0, f64::max);
    if drift > DUAL_ARM_DRIFT_TOL {
        return Err(Error::Infeasible(format!(
            "end-effector drift {drift:.3e} m exceeds {DUAL_ARM_DRIFT_TOL:.0e} m"
        )));
    }
    Ok(run)
}

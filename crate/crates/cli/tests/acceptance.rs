//! Acceptance gate: every criterion at its stated tolerance, one line each.
//!
//! Run with `cargo test -p manipulant-cli --test acceptance`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use manipulant_core::analysis::{analyze_trials, timed_samples, AnalysisOptions};
use manipulant_core::benchmarks::*;
use manipulant_core::control::*;
use manipulant_core::kinematics::*;
use manipulant_core::manipulability::*;
use manipulant_core::mocap::synth::synth_trial;
use manipulant_core::mocap::Task;
use manipulant_core::profile::{fit_gmm, GmmInit, GmmOptions, SpdGmm, TimedSpd};
use manipulant_core::spd::*;
use nalgebra::{DMatrix, Isometry3, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_spd(r: &mut ChaCha8Rng, d: usize) -> SpdMatrix {
    let a = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.5..1.5));
    SpdMatrix::new(&a * a.transpose() + DMatrix::identity(d, d) * r.random_range(0.05..1.0)).unwrap()
}

fn random_invertible(r: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    loop {
        let g = DMatrix::from_fn(d, d, |_, _| r.random_range(-2.0..2.0)) + DMatrix::identity(d, d) * 2.5;
        if g.clone().svd(false, false).singular_values.min() > 0.1 {
            return g;
        }
    }
}

fn vec3(r: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
    Vector3::new(r.random_range(-s..s), r.random_range(-s..s), r.random_range(-s..s))
}

fn unit(r: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = vec3(r, 1.0);
        if v.norm() > 0.2 {
            return v.normalize();
        }
    }
}

fn pose(r: &mut ChaCha8Rng) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::from(vec3(r, 0.5)),
        UnitQuaternion::from_scaled_axis(vec3(r, PI)),
    )
}

fn random_chain(r: &mut ChaCha8Rng, min: usize) -> (KinematicChain, JointConfig) {
    let n = r.random_range(min..=8);
    let joints = (0..n)
        .map(|i| {
            let offset = vec3(r, 0.4);
            Joint::new(format!("j{i}"), offset, unit(r)).unwrap()
        })
        .collect();
    let (base, end) = (pose(r), pose(r));
    let q: Vec<f64> = (0..n).map(|_| r.random_range(-PI..PI)).collect();
    (
        KinematicChain::new(joints, base, end).unwrap(),
        JointConfig::from_slice(&q),
    )
}

fn spd_suite() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = [0.0f64; 4];
    for case in 0..100 {
        let d = 2 + case % 3;
        let (a, b, c) = (random_spd(&mut r, d), random_spd(&mut r, d), random_spd(&mut r, d));
        let g = random_invertible(&mut r, d);
        let ab = spd_distance(&a, &b).unwrap();
        let moved = spd_distance(&a.congruence(&g).unwrap(), &b.congruence(&g).unwrap()).unwrap();
        worst[0] = worst[0].max((ab - moved).abs());
        ensure!((ab - moved).abs() <= 1e-8, "affine invariance: {ab} vs {moved}");
        let ba = spd_distance(&b, &a).unwrap();
        ensure!((ab - ba).abs() <= 1e-12 * ab.max(1.0), "symmetry: {ab} vs {ba}");
        let (bc, ac) = (spd_distance(&b, &c).unwrap(), spd_distance(&a, &c).unwrap());
        ensure!(ac <= ab + bc + 1e-10, "triangle inequality: {ac} > {ab} + {bc}");
        let back = spd_exp(&a, &spd_log(&a, &b).unwrap()).unwrap();
        let rt = (back.matrix() - b.matrix()).norm();
        worst[1] = worst[1].max(rt);
        ensure!(rt <= 1e-8, "exp/log round trip: {rt:e}");

        let n = r.random_range(3..7);
        let points: Vec<SpdMatrix> = (0..n).map(|_| random_spd(&mut r, d)).collect();
        let mean = frechet_mean(&points, FrechetOptions::default()).unwrap();
        let mut shuffled = points.clone();
        shuffled.rotate_left(r.random_range(0..n));
        shuffled.reverse();
        let other = frechet_mean(&shuffled, FrechetOptions::default()).unwrap();
        let perm = (mean.matrix() - other.matrix()).amax();
        worst[2] = worst[2].max(perm);
        ensure!(perm <= 1e-9, "mean permutation invariance: {perm:e}");
        let diameter = points
            .iter()
            .flat_map(|p| points.iter().map(move |q| spd_distance(p, q).unwrap()))
            .fold(0.0, f64::max);
        for p in &points {
            let to_mean = spd_distance(&mean, p).unwrap();
            worst[3] = worst[3].max(to_mean - diameter);
            ensure!(to_mean <= diameter + 1e-10, "hull containment: {to_mean} > {diameter}");
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.2} s");
    Ok(format!(
        "100 cases; worst affine {:.1e}, exp/log {:.1e}, permutation {:.1e}; {secs:.2} s",
        worst[0], worst[1], worst[2]
    ))
}

fn kinematics_suite() -> Outcome {
    let mut r = rng(2);
    let h = 1e-6;
    let mut worst_fd: f64 = 0.0;
    for _ in 0..100 {
        let (chain, q) = random_chain(&mut r, 1);
        let j = chain.jacobian(&q, TaskSpace::Full).unwrap();
        for k in 0..chain.dof() {
            let (mut qp, mut qm) = (q.clone(), q.clone());
            qp.0[k] += h;
            qm.0[k] -= h;
            let (tp, tm) = (
                chain.forward_kinematics(&qp).unwrap(),
                chain.forward_kinematics(&qm).unwrap(),
            );
            let dp = (tp.translation.vector - tm.translation.vector) / (2.0 * h);
            let dw = (tp.rotation * tm.rotation.inverse()).scaled_axis() / (2.0 * h);
            for i in 0..3 {
                worst_fd = worst_fd
                    .max((dp[i] - j[(i, k)]).abs())
                    .max((dw[i] - j[(i + 3, k)]).abs());
            }
        }
    }
    ensure!(worst_fd <= 1e-6, "Jacobian vs finite differences: {worst_fd:e}");

    let mut worst_rt: f64 = 0.0;
    for _ in 0..100 {
        let dims = Anthropometry {
            upper_arm_length: r.random_range(0.2..0.4),
            forearm_length: r.random_range(0.18..0.35),
            hand_length: 0.1,
        };
        let arm = AnthropomorphicArm::new(dims, Isometry3::translation(0.0, -0.18, 1.4)).unwrap();
        let q = JointConfig::from_slice(&[
            r.random_range(-1.2..1.2),
            r.random_range(-1.0..1.0),
            r.random_range(-1.5..1.5),
            r.random_range(0.15..2.6),
            r.random_range(-1.5..1.5),
            r.random_range(-1.2..1.2),
            r.random_range(-1.2..1.2),
        ]);
        let wrist = arm.wrist_pose(&q).unwrap();
        let tri = arm.wrist_pose_to_arm_triangle(&wrist, r.random_range(-PI..PI)).unwrap();
        let back = arm.wrist_pose(&arm.arm_triangle_to_joints(&tri).unwrap()).unwrap();
        let err = (back.translation.vector - wrist.translation.vector)
            .norm()
            .max((back.rotation.inverse() * wrist.rotation).angle());
        worst_rt = worst_rt.max(err);
    }
    ensure!(worst_rt <= 1e-6, "arm-triangle round trip: {worst_rt:e}");
    Ok(format!(
        "100 chains, worst FD error {worst_fd:.1e}; 100 poses, worst round trip {worst_rt:.1e}"
    ))
}

fn manipulability_suite() -> Outcome {
    let mut r = rng(3);
    let mut worst_dual: f64 = 0.0;
    let mut tried = 0;
    let mut cases = 0;
    while cases < 100 {
        tried += 1;
        ensure!(tried < 10_000, "could not draw well-conditioned chains");
        let (chain, q) = random_chain(&mut r, 3);
        let mv = velocity_manipulability(&chain, &q, TaskSpace::Position).unwrap();
        if mv.min_eigenvalue() <= 1e-3 {
            continue;
        }
        cases += 1;
        let mf = force_manipulability(&chain, &q, TaskSpace::Position).unwrap();
        worst_dual = worst_dual.max((mf.matrix() * mv.matrix() - DMatrix::identity(3, 3)).amax());
    }
    ensure!(worst_dual <= 1e-8, "duality: {worst_dual:e}");

    let planar = KinematicChain::planar(&[1.0, 1.0]).unwrap();
    let m = velocity_manipulability(&planar, &JointConfig::from_slice(&[0.0, -PI / 2.0]), TaskSpace::Planar).unwrap();
    let oracle = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
    ensure!((m.matrix() - &oracle).amax() <= 1e-12, "planar M = {}", m.matrix());
    let idx = classical_indices(&m);
    ensure!((idx.determinant - 1.0).abs() <= 1e-12, "det = {}", idx.determinant);
    let exact = (3.0 + 5f64.sqrt()) / (3.0 - 5f64.sqrt());
    let cond = idx.condition_number;
    ensure!((cond - exact).abs() <= 1e-6, "cond = {cond} vs (3+√5)/(3−√5) = {exact}");
    ensure!(
        format!("{cond:.4}") == "6.8541",
        "cond = {cond} does not round to 6.8541"
    );

    let mut worst_fd: f64 = 0.0;
    let h = 1e-5;
    for _ in 0..100 {
        let (chain, q) = random_chain(&mut r, 1);
        for space in [TaskSpace::Position, TaskSpace::Full] {
            let mj = manipulability_jacobian(&chain, &q, space).unwrap();
            let (mut err, mut norm) = (0.0, 0.0);
            for (k, s) in mj.slices().iter().enumerate() {
                let (mut qp, mut qm) = (q.clone(), q.clone());
                qp.0[k] += h;
                qm.0[k] -= h;
                let mp = velocity_manipulability(&chain, &qp, space).unwrap();
                let mm = velocity_manipulability(&chain, &qm, space).unwrap();
                let fd = (mp.matrix() - mm.matrix()) / (2.0 * h);
                err += (fd - s).norm_squared();
                norm += s.norm_squared();
            }
            worst_fd = worst_fd.max(err.sqrt() / norm.sqrt().max(1e-12));
        }
    }
    ensure!(worst_fd <= 1e-5, "manipulability Jacobian vs FD: {worst_fd:e}");
    Ok(format!(
        "duality {worst_dual:.1e} (100 cases); det 1, cond {cond:.9} (|Δ| to (3+√5)/(3−√5) {:.1e}, \
         |Δ| to 6.8541 {:.1e}); manipulability Jacobian FD {worst_fd:.1e}",
        (cond - exact).abs(),
        (cond - 6.8541).abs()
    ))
}

fn planar_run(dt: f64) -> TrackingRun {
    let f = planar3_constant_target().unwrap();
    let cfg = ControllerConfig {
        dt,
        ..ControllerConfig::with_mode(PriorityMode::ManipulabilityFirst)
    };
    let run = run_tracking(
        &f.system,
        &ProfileSource::Constant(f.target_m.clone()),
        &f.target_x,
        &f.q0,
        &cfg,
        5.0,
    )
    .unwrap();
    run.check().unwrap();
    run
}

fn controller_suite() -> Outcome {
    let cfg = ControllerConfig::default();
    let f = arm7_transfer().unwrap();
    let m = SpdMatrix::new(TrackingSystem::manipulability(&f.system, &f.q0).unwrap()).unwrap();
    let x = f.system.position(&f.q0).unwrap();
    let mut fixed: f64 = 0.0;
    for v in [
        manipulability_first_step(&f.system, &f.q0, &m, &x, &cfg).unwrap(),
        position_first_step(&f.system, &f.q0, &m, &x, &cfg).unwrap(),
    ] {
        fixed = fixed.max(v.qdot.norm());
    }
    ensure!(fixed <= 1e-12, "fixed point ‖q̇‖ = {fixed:e}");

    let jm = f.system.manipulability_jacobian(&f.q0).unwrap().task_matrix();
    let j = f.system.position_jacobian(&f.q0).unwrap();
    let v1 = manipulability_first_step(&f.system, &f.q0, &f.target_m, &f.target_x, &cfg).unwrap();
    let v2 = position_first_step(&f.system, &f.q0, &f.target_m, &f.target_x, &cfg).unwrap();
    let residual = (&jm * &v1.secondary).norm().max((&j * &v2.secondary).norm());
    ensure!(residual <= 1e-10, "hierarchy residual {residual:e}");

    let run = planar_run(cfg.dt);
    let d = run.distances();
    let reached = run.records.iter().find(|r| r.spd_distance < 0.05).map(|r| r.t);
    ensure!(
        reached.is_some_and(|t| t <= 5.0),
        "planar run never below 0.05 (final {})",
        d.last().unwrap()
    );
    let bump = d[50..]
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    ensure!(bump <= 1e-6, "not monotone after step 50: increase {bump:e}");

    // the default dt resolves the run only to ~1e-5 in absolute terms; the
    // 1 % comparison is made once the final distance is step-converged
    let coarse = *planar_run(1e-4).distances().last().unwrap();
    let fine = *planar_run(5e-5).distances().last().unwrap();
    let change = (coarse - fine).abs() / fine;
    ensure!(
        change < 0.01,
        "halving dt 1e-4 → 5e-5 changed the final distance by {:.2} %",
        100.0 * change
    );
    let default_half = *planar_run(cfg.dt / 2.0).distances().last().unwrap();
    let default_change = (d.last().unwrap() - default_half).abs() / default_half;
    Ok(format!(
        "‖q̇‖ {fixed:.1e}; residual {residual:.1e}; planar reaches 0.05 at t = {:.3} s, final {:.2e}; \
         dt 1e-4 → 5e-5 changes final distance {:.3} % (at the default dt {} the change is {:.1} %)",
        reached.unwrap(),
        d.last().unwrap(),
        100.0 * change,
        cfg.dt,
        100.0 * default_change
    ))
}

fn two_phase_transfer() -> Outcome {
    let start = Instant::now();
    let f = arm7_transfer().unwrap();
    let cfg = ControllerConfig::default();
    ensure!(cfg.switch_time == 1.0, "switch time {}", cfg.switch_time);
    let run = run_tracking(
        &f.system,
        &ProfileSource::Constant(f.target_m.clone()),
        &f.target_x,
        &f.q0,
        &cfg,
        3.0,
    )
    .unwrap();
    run.check().map_err(|e| e.to_string())?;
    let (p1, p2): (Vec<_>, Vec<_>) = run.records.iter().partition(|r| r.t < cfg.switch_time);
    ensure!(
        p1.iter().all(|r| r.mode == PriorityMode::ManipulabilityFirst),
        "phase 1 mode"
    );
    ensure!(p2.iter().all(|r| r.mode == PriorityMode::PositionFirst), "phase 2 mode");
    for w in p1.windows(2) {
        ensure!(
            w[1].spd_distance < w[0].spd_distance,
            "phase-1 distance rose at t = {}",
            w[1].t
        );
    }
    let pos_peak = p1.iter().map(|r| r.pos_error).fold(0.0, f64::max);
    let at_switch = p2[0].spd_distance;
    let worst = p2.iter().map(|r| r.spd_distance).fold(0.0, f64::max);
    let pos_end = run.records.last().unwrap().pos_error;
    ensure!(pos_end < 1e-3, "final position error {pos_end:e}");
    ensure!(
        worst <= 1.2 * at_switch,
        "phase-2 regression {worst} vs {at_switch} at the switch"
    );
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!(
        "distance {:.3} → {at_switch:.4} at t = 1 s (strictly decreasing); position error peaks at {pos_peak:.3} m in \
         phase 1, ends {pos_end:.1e} m; phase-2 max distance {:.2}× the switch value; {secs:.2} s",
        p1[0].spd_distance,
        worst / at_switch
    ))
}

fn dual_arm() -> Outcome {
    let f = dual_arm_fixture().unwrap();
    let run = run_dual_arm_tracking(
        &f.system,
        &ProfileSource::Constant(f.target_m.clone()),
        &f.q0,
        &ControllerConfig::default(),
        3.0,
    )
    .unwrap();
    run.check().map_err(|e| e.to_string())?;
    let d = run.distances();
    let drift = run.position_errors().into_iter().fold(0.0, f64::max);
    ensure!(drift <= 1e-3, "drift {drift:e} m");
    let drop = 1.0 - d.last().unwrap() / d[0];
    ensure!(
        drop >= 0.5,
        "distance {} → {} ({:.0} %)",
        d[0],
        d.last().unwrap(),
        100.0 * drop
    );
    Ok(format!(
        "drift {drift:.1e} m; distance {:.3} → {:.3} ({:.0} % decrease)",
        d[0],
        d.last().unwrap(),
        100.0 * drop
    ))
}

/// `C^{1/2} exp(S) C^{1/2}` for a small random symmetric `S`.
fn around(r: &mut ChaCha8Rng, center: &SpdMatrix, scale: f64) -> SpdMatrix {
    let d = center.dim();
    let mut s = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = r.random_range(-scale..scale);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let (sqrt, _) = center.sqrt_and_inv_sqrt();
    exp_map(center, &(&sqrt * &s * &sqrt)).unwrap()
}

fn monotone(g: &SpdGmm) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for (i, w) in g.log_likelihood.windows(2).enumerate() {
        if g.reseeded_at.contains(&(i + 1)) {
            continue;
        }
        let drop = (w[0] - w[1]) / w[0].abs().max(1.0);
        worst = worst.max(drop);
        ensure!(
            drop <= 1e-9,
            "log-likelihood fell at iteration {}: {} → {}",
            i + 1,
            w[0],
            w[1]
        );
    }
    Ok(worst)
}

fn gmm_suite() -> Outcome {
    let mut r = rng(7);
    let centers = [
        SpdMatrix::from_diagonal(&[2.0, 0.3]).unwrap(),
        SpdMatrix::from_row_slice(2, &[1.0, 0.4, 0.4, 1.5]).unwrap(),
        SpdMatrix::from_diagonal(&[0.2, 0.9]).unwrap(),
    ];
    let mut fits = 0;
    for case in 0..30 {
        let n = r.random_range(12..40);
        let data: Vec<TimedSpd> = (0..n)
            .map(|i| TimedSpd {
                u: r.random_range(0.0..1.0),
                m: around(&mut r, &centers[i % 3], 0.4),
            })
            .collect();
        let init = if case % 2 == 0 {
            GmmInit::Seeded
        } else {
            GmmInit::TimeBins
        };
        let g = fit_gmm(
            &data,
            &GmmOptions {
                k: 1 + case % 3,
                seed: case as u64,
                init,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        monotone(&g)?;
        fits += 1;
    }

    let mut worst_recovery: f64 = 0.0;
    for case in 0..30 {
        let (a, b, ratio) = (
            r.random_range(0.3..4.0),
            r.random_range(0.3..4.0),
            r.random_range(3.0..6.0),
        );
        let ca = SpdMatrix::from_diagonal(&[a * ratio, b]).unwrap();
        let cb = SpdMatrix::from_diagonal(&[a, b * ratio]).unwrap();
        let mut data = Vec::new();
        for i in 0..30 {
            let u = 0.3 * i as f64 / 29.0;
            data.push(TimedSpd {
                u,
                m: around(&mut r, &ca, 0.03),
            });
            data.push(TimedSpd {
                u: 0.7 + u,
                m: around(&mut r, &cb, 0.03),
            });
        }
        let g = fit_gmm(
            &data,
            &GmmOptions {
                k: 2,
                seed: case,
                init: GmmInit::Seeded,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        monotone(&g)?;
        for target in [&ca, &cb] {
            let best = g
                .components
                .iter()
                .map(|c| spd_distance(&c.center, target).unwrap())
                .fold(f64::INFINITY, f64::min);
            worst_recovery = worst_recovery.max(best);
        }
    }
    ensure!(worst_recovery < 0.05, "two-cluster recovery distance {worst_recovery}");

    let trials: Vec<_> = (0..6).map(|s| synth_trial(Task::SM, s, 0.01)).collect();
    let analysis = analyze_trials(&trials, &AnalysisOptions::default()).map_err(|e| e.to_string())?;
    let g = fit_gmm(&timed_samples(&analysis.trials), &GmmOptions::default()).map_err(|e| e.to_string())?;
    monotone(&g)?;
    let mut prev = g.retrieve(0.0);
    let mut worst_step: f64 = 0.0;
    for i in 1..=1000 {
        let u = i as f64 / 1000.0;
        let m = g.retrieve(u);
        SpdMatrix::new(m.matrix().clone()).map_err(|e| format!("retrieval at u = {u} is not SPD: {e}"))?;
        let local = spd_distance(&m, &g.retrieve(u + 1e-4)).unwrap();
        ensure!(local < 1e-2, "retrieval jumps near u = {u}: {local}");
        let step = spd_distance(&prev, &m).unwrap();
        ensure!(step < 0.1, "retrieval jumps before u = {u}: {step}");
        worst_step = worst_step.max(step);
        prev = m;
    }
    Ok(format!(
        "{fits} EM fits monotone; two-cluster recovery ≤ {worst_recovery:.4}; 1000-point retrieval sweep SPD, \
         largest step {worst_step:.4}"
    ))
}

fn manipulant(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_manipulant"))
        .current_dir(dir)
        .env_remove("MANIPULANT_SEED")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "`manipulant {}` exited with {}: {}",
        args.join(" "),
        out.status,
        String::from_utf8_lossy(&out.stderr).trim()
    );
    Ok(())
}

fn pipeline(dir: &Path) -> Result<f64, String> {
    let start = Instant::now();
    manipulant(
        dir,
        &[
            "synth", "--task", "SM", "--seed", "0", "--count", "15", "--out", "trials",
        ],
    )?;
    manipulant(
        dir,
        &["analyze", "--dir", "trials", "--task", "SM", "--out", "analysis"],
    )?;
    manipulant(
        dir,
        &[
            "learn-profile",
            "--in",
            "analysis/ellipsoids.jsonl",
            "--K",
            "5",
            "--out",
            "learned.json",
        ],
    )?;
    manipulant(
        dir,
        &[
            "track",
            "--robot",
            "arm7",
            "--profile",
            "learned.json",
            "--out",
            "run.jsonl",
        ],
    )?;
    manipulant(dir, &["report", "--in", "run.jsonl", "--out", "plots"])?;
    Ok(start.elapsed().as_secs_f64())
}

fn files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn end_to_end() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline(a.path())?;
    let second = pipeline(b.path())?;
    ensure!(
        first < 60.0 && second < 60.0,
        "pipeline took {first:.1} s / {second:.1} s"
    );
    let (fa, fb) = (files(a.path()), files(b.path()));
    ensure!(fa == fb, "artifact sets differ: {fa:?} vs {fb:?}");
    let trials = fa.iter().filter(|p| p.starts_with("trials")).count();
    ensure!(trials == 15, "{trials} trial files");
    for p in &fa {
        let (x, y) = (
            std::fs::read(a.path().join(p)).unwrap(),
            std::fs::read(b.path().join(p)).unwrap(),
        );
        ensure!(x == y, "{} differs between runs", p.display());
    }
    let profile: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("analysis/profile.json")).unwrap()).unwrap();
    let steps = profile["profile"]["steps"].as_array().map_or(0, |s| s.len());
    ensure!(steps == 7 * 20, "profile has {steps} steps");
    Ok(format!(
        "{} artifacts byte-identical across two runs; profile 7 × 20 steps; {first:.1} s and {second:.1} s",
        fa.len()
    ))
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("SPD manifold suite", spd_suite),
        ("kinematics suite", kinematics_suite),
        ("manipulability suite", manipulability_suite),
        ("controller suite", controller_suite),
        ("two-phase transfer", two_phase_transfer),
        ("dual-arm run", dual_arm),
        ("GMM suite", gmm_suite),
        ("end-to-end pipeline", end_to_end),
    ];
    // keep assertion noise out of the report; failures carry their message
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

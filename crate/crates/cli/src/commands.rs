//! Subcommands other than `report`.

use std::io::BufReader;
use std::path::{Path, PathBuf};

use manipulant_core::analysis::analyze_trials;
use manipulant_core::control::{run_tracking, ProfileSource, RunStatus, SingleChain, TrackingRun, TrackingSystem};
use manipulant_core::kinematics::chain::JointConfig;
use manipulant_core::kinematics::description::{Robot, RobotDescription};
use manipulant_core::manipulability::{read_ellipsoid_records, write_ellipsoid_records};
use manipulant_core::mocap::synth::{synth_trial_with, SynthOptions};
use manipulant_core::mocap::{segment_actions, Task, TrialRecording};
use manipulant_core::profile::{fit_gmm, SpdGmm, TimedSpd};
use manipulant_core::spd::SpdMatrix;
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::config::PipelineConfig;
use crate::provenance::{digest_file, write_file, write_json, InputDigest, Provenance};
use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::user(format!("{}: {e}", path.display()))
}

pub fn synth(cfg: &PipelineConfig, task: Task, count: usize, out: &Path) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::user("--count must be at least 1"));
    }
    if !(cfg.ingest.noise_level >= 0.0 && cfg.ingest.noise_level.is_finite()) {
        return Err(CliError::user("noise level must be a non-negative number"));
    }
    let opts = SynthOptions {
        sample_rate: cfg.ingest.sample_rate,
        ..Default::default()
    };
    let prov = Provenance::new("synth", cfg, Vec::new()).to_json();
    for i in 0..count as u64 {
        let mut trial = synth_trial_with(task, cfg.ingest.seed + i, cfg.ingest.noise_level, &opts);
        trial.header.provenance = Some(prov.clone());
        let path = if count == 1 {
            out.to_path_buf()
        } else {
            out.join(format!("{}.jsonl", trial.header.participant_id))
        };
        let mut buf = Vec::new();
        trial.write(&mut buf)?;
        write_file(&path, &buf)?;
    }
    if count > 1 {
        eprintln!("wrote {count} trials to {}", out.display());
    }
    Ok(())
}

/// Trial files of a directory (`*.jsonl`), sorted by name.
fn trial_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "jsonl") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::user(format!("no trials in {}", dir.display())));
    }
    Ok(files)
}

struct Loaded {
    path: PathBuf,
    digest: InputDigest,
    trial: Result<TrialRecording, String>,
}

/// Parses every file on `workers` threads; results keep the file order.
fn load_trials(files: &[PathBuf], workers: usize) -> Result<Vec<Loaded>, CliError> {
    let workers = workers.clamp(1, files.len().max(1));
    let mut slots: Vec<Option<Result<Loaded, CliError>>> = (0..files.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    files
                        .iter()
                        .enumerate()
                        .skip(w)
                        .step_by(workers)
                        .map(|(i, path)| {
                            let loaded = digest_file(path).map(|digest| Loaded {
                                path: path.clone(),
                                digest,
                                trial: TrialRecording::load(path).map_err(|e| e.to_string()),
                            });
                            (i, loaded)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, l) in h.join().expect("trial loader panicked") {
                slots[i] = Some(l);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every file is loaded")).collect()
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

pub fn ingest(cfg: &PipelineConfig, dir: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let loaded = load_trials(&trial_files(dir)?, cfg.ingest.workers)?;
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for l in &loaded {
        match &l.trial {
            Ok(t) => {
                let seg = segment_actions(t, t.header.task.action_sequence());
                trials.push(json!({
                    "file": file_name(&l.path),
                    "participant_id": t.header.participant_id,
                    "task": t.header.task,
                    "frames": t.frames.len(),
                    "duration": t.duration(),
                    "tied_frames": t.tied_frames,
                    "segments": seg.segments,
                    "missing_actions": seg.missing,
                }));
            }
            Err(e) => {
                eprintln!("{}: {e}", l.path.display());
                failures.push(json!({ "file": file_name(&l.path), "error": e }));
            }
        }
    }
    let prov = Provenance::new("ingest", cfg, loaded.iter().map(|l| l.digest.clone()).collect());
    let summary = json!({
        "provenance": prov.to_json(),
        "trials": trials,
        "failures": failures,
    });
    match out {
        Some(path) => write_json(path, &summary)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&summary).expect("summary serializes")
        ),
    }
    if trials.is_empty() {
        return Err(CliError::user(format!("all {} trials failed to load", failures.len())));
    }
    Ok(())
}

pub fn analyze(cfg: &PipelineConfig, dir: &Path, out: &Path, task: Option<Task>) -> Result<(), CliError> {
    let loaded = load_trials(&trial_files(dir)?, cfg.ingest.workers)?;
    let mut trials = Vec::new();
    let mut failures: Vec<(String, String)> = Vec::new();
    for l in &loaded {
        match &l.trial {
            Ok(t) if task.is_some_and(|k| k != t.header.task) => failures.push((
                t.header.participant_id.clone(),
                format!("task {} where {} was requested", t.header.task, task.unwrap()),
            )),
            Ok(t) => trials.push(t.clone()),
            Err(e) => failures.push((file_name(&l.path), e.clone())),
        }
    }
    if trials.is_empty() {
        return Err(CliError::user(format!(
            "all {} trials failed; first ({}): {}",
            failures.len(),
            failures[0].0,
            failures[0].1
        )));
    }
    let analysis = analyze_trials(&trials, &cfg.analysis)?;
    failures.extend(
        analysis
            .failures
            .iter()
            .map(|f| (f.participant_id.clone(), f.error.to_string())),
    );
    for (who, why) in &failures {
        eprintln!("skipped {who}: {why}");
    }
    if !failures.is_empty() {
        eprintln!(
            "{} of {} trials analyzed, {} failed",
            analysis.trials.len(),
            loaded.len(),
            failures.len()
        );
    }

    let prov = Provenance::new("analyze", cfg, loaded.iter().map(|l| l.digest.clone()).collect());

    let mut ellipsoids = serde_json::to_vec(&json!({ "provenance": prov.to_json() })).expect("serializes");
    ellipsoids.push(b'\n');
    for t in &analysis.trials {
        write_ellipsoid_records(&mut ellipsoids, &t.records)?;
    }
    write_file(&out.join("ellipsoids.jsonl"), &ellipsoids)?;

    let profile = json!({
        "provenance": prov.to_json(),
        "task": trials[0].header.task,
        "actions": analysis.actions,
        "trials": analysis.trials.iter().map(|t| json!({
            "participant_id": t.participant_id,
            "short_segments": t.short_segments,
            "singular": t.singular,
        })).collect::<Vec<_>>(),
        "failures": failures.iter().map(|(who, why)| json!({ "trial": who, "error": why })).collect::<Vec<_>>(),
        "profile": analysis.profile.to_wire(),
    });
    write_json(&out.join("profile.json"), &profile)?;

    let mut csv = format!(
        "# provenance: {}\nu,action,det,cond,std_x,std_y,std_z,n_samples\n",
        prov.compact()
    );
    for s in &analysis.profile.steps {
        let std = |i: usize| s.axis_std.get(i).map_or(String::new(), |v| v.to_string());
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.u,
            s.action.map_or(String::new(), |a| a.to_string()),
            s.det,
            s.cond,
            std(0),
            std(1),
            std(2),
            s.n_samples
        ));
    }
    write_file(&out.join("indices.csv"), csv.as_bytes())?;
    Ok(())
}

pub fn learn_profile(cfg: &PipelineConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let file = std::fs::File::open(input).map_err(|e| io_err(input, e))?;
    let records = read_ellipsoid_records(BufReader::new(file)).map_err(|e| io_err(input, e))?;
    if records.is_empty() {
        return Err(CliError::user(format!("{}: no ellipsoid records", input.display())));
    }
    let data: Vec<TimedSpd> = records
        .iter()
        .map(|r| TimedSpd {
            u: r.u.unwrap_or(0.0),
            m: r.spd.clone(),
        })
        .collect();
    let model = fit_gmm(&data, &cfg.gmm)?;
    let prov = Provenance::new("learn-profile", cfg, vec![digest_file(input)?]);
    write_json(
        out,
        &json!({
            "provenance": prov.to_json(),
            "model": serde_json::to_value(&model).map_err(|e| CliError::user(e.to_string()))?,
        }),
    )
}

pub fn load_robot(model: &str) -> Result<Robot, CliError> {
    let desc = if RobotDescription::bundled_json(model).is_some() {
        RobotDescription::bundled(model)?
    } else {
        RobotDescription::load(Path::new(model)).map_err(|e| io_err(Path::new(model), e))?
    };
    Ok(desc.build()?)
}

/// A well-conditioned starting posture: the bent reference posture for the
/// seven-joint arm, 0.5 rad on every joint otherwise.
pub fn nominal_posture(robot: &Robot) -> JointConfig {
    let n = robot.chain.dof();
    if robot.arm.is_some() && n == 7 {
        JointConfig::from_slice(&[-0.5, 0.2, 0.1, 1.3, 0.1, 0.2, 0.0])
    } else {
        JointConfig::from_slice(&vec![0.5; n])
    }
}

/// Either the `learn-profile` output (`model`) or `{"constant": rows}`.
fn read_profile(path: &Path, duration: f64) -> Result<ProfileSource, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
    if let Some(model) = v.get("model") {
        let model: SpdGmm = serde_json::from_value(model.clone()).map_err(|e| io_err(path, e))?;
        return Ok(ProfileSource::Gmm { model, duration });
    }
    if let Some(rows) = v.get("constant") {
        let rows: Vec<Vec<f64>> = serde_json::from_value(rows.clone()).map_err(|e| io_err(path, e))?;
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(io_err(path, "constant target must be a square matrix"));
        }
        let m = SpdMatrix::new(DMatrix::from_row_iterator(d, d, rows.into_iter().flatten()))
            .map_err(|e| io_err(path, e))?;
        return Ok(ProfileSource::Constant(m));
    }
    Err(io_err(
        path,
        "expected a learned profile (\"model\") or a \"constant\" target",
    ))
}

fn run_lines(header: &Value, run: &TrackingRun) -> Result<Vec<u8>, CliError> {
    let mut buf = serde_json::to_vec(header).expect("header serializes");
    buf.push(b'\n');
    run.write_jsonl(&mut buf)?;
    Ok(buf)
}

pub fn track(cfg: &PipelineConfig, profile_path: &Path, out: &Path) -> Result<(), CliError> {
    let duration = cfg.controller.duration;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(CliError::user("duration must be positive"));
    }
    let robot = load_robot(&cfg.robot.model)?;
    let profile = read_profile(profile_path, duration)?;
    if profile.dim() != robot.task_space.dim() {
        return Err(CliError::user(format!(
            "profile is {0}x{0} but robot {1} tracks a {2}-dimensional task space",
            profile.dim(),
            robot.name,
            robot.task_space.dim()
        )));
    }
    let sys = SingleChain::new(robot.chain.clone(), robot.task_space);
    let q0 = match &cfg.robot.q0 {
        Some(q) if q.len() == sys.dof() => JointConfig::from_slice(q),
        Some(q) => {
            return Err(CliError::user(format!(
                "q0 has {} joints, robot has {}",
                q.len(),
                sys.dof()
            )));
        }
        None => nominal_posture(&robot),
    };
    let x0 = sys.position(&q0)?;
    let target_x = match &cfg.robot.target_x {
        Some(x) if x.len() == x0.len() => DVector::from_row_slice(x),
        Some(x) => {
            return Err(CliError::user(format!(
                "target_x has {} entries, expected {}",
                x.len(),
                x0.len()
            )));
        }
        None => x0,
    };
    let controller = cfg.controller.controller();
    let run = run_tracking(&sys, &profile, &target_x, &q0, &controller, duration)?;

    let mut inputs = vec![digest_file(profile_path)?];
    if RobotDescription::bundled_json(&cfg.robot.model).is_none() {
        inputs.push(digest_file(Path::new(&cfg.robot.model))?);
    }
    let prov = Provenance::new("track", cfg, inputs);
    let header = json!({
        "provenance": prov.to_json(),
        "robot": robot.name,
        "duration": duration,
        "run": run.status,
    });
    let bytes = run_lines(&header, &run)?;
    if let RunStatus::Diverged { t, distance, limit } = run.status {
        let trace = diverged_path(out);
        write_file(&trace, &bytes)?;
        return Err(CliError {
            trace: Some(trace),
            ..CliError::numerical(format!(
                "tracking diverged at t = {t}: distance {distance} exceeds {limit}"
            ))
        });
    }
    write_file(out, &bytes)
}

/// `run.jsonl` → `run.diverged.jsonl`, next to the requested output.
fn diverged_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.diverged.jsonl"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_sits_next_to_the_output() {
        assert_eq!(
            diverged_path(Path::new("a/run.jsonl")),
            Path::new("a/run.diverged.jsonl")
        );
        assert_eq!(diverged_path(Path::new("run")), Path::new("run.diverged.jsonl"));
    }

    #[test]
    fn nominal_postures_are_not_singular() {
        for name in RobotDescription::bundled_names() {
            let robot = load_robot(name).unwrap();
            let sys = SingleChain::new(robot.chain.clone(), robot.task_space);
            let m = sys.manipulability(&nominal_posture(&robot)).unwrap();
            let eig = nalgebra::SymmetricEigen::new(m).eigenvalues;
            assert!(eig.min() > 1e-3, "{name}: {eig}");
        }
    }
}

//! Pipeline configuration: one TOML file, six sections, every field optional.

use std::path::Path;

use manipulant_core::analysis::AnalysisOptions;
use manipulant_core::control::{ControllerConfig, Gain, PriorityPhase};
use manipulant_core::profile::GmmOptions;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "MANIPULANT_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub robot: RobotSection,
    pub ingest: IngestSection,
    pub analysis: AnalysisOptions,
    pub gmm: GmmOptions,
    pub controller: ControllerSection,
    pub report: ReportSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotSection {
    /// Bundled model name or path to a robot-description JSON file.
    pub model: String,
    /// Initial joint configuration; the model's nominal posture when absent.
    pub q0: Option<Vec<f64>>,
    /// Position target; the initial end-effector position when absent.
    pub target_x: Option<Vec<f64>>,
}

impl Default for RobotSection {
    fn default() -> Self {
        RobotSection {
            model: "arm7".into(),
            q0: None,
            target_x: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    /// Threads used to load trial files.
    pub workers: usize,
    /// Synthetic generator settings.
    pub seed: u64,
    pub noise_level: f64,
    pub sample_rate: f64,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            workers: 4,
            seed: 0,
            noise_level: 0.01,
            sample_rate: manipulant_core::mocap::synth::DEFAULT_SAMPLE_RATE,
        }
    }
}

/// Controller gains plus the length of the simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub k_m: Gain,
    pub k_x: Gain,
    pub dt: f64,
    pub switch_time: f64,
    pub damping: f64,
    pub priority_schedule: Vec<PriorityPhase>,
    pub divergence_factor: f64,
    pub divergence_floor: f64,
    /// Simulated seconds; the learned profile is replayed over this span.
    pub duration: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerSection::from_controller(ControllerConfig::default(), 5.0)
    }
}

impl ControllerSection {
    fn from_controller(c: ControllerConfig, duration: f64) -> Self {
        ControllerSection {
            k_m: c.k_m,
            k_x: c.k_x,
            dt: c.dt,
            switch_time: c.switch_time,
            damping: c.damping,
            priority_schedule: c.priority_schedule,
            divergence_factor: c.divergence_factor,
            divergence_floor: c.divergence_floor,
            duration,
        }
    }

    pub fn controller(&self) -> ControllerConfig {
        ControllerConfig {
            k_m: self.k_m.clone(),
            k_x: self.k_x.clone(),
            dt: self.dt,
            switch_time: self.switch_time,
            damping: self.damping,
            priority_schedule: self.priority_schedule.clone(),
            divergence_factor: self.divergence_factor,
            divergence_floor: self.divergence_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Ellipse snapshots drawn per projection plane.
    pub snapshots: usize,
    pub width: u32,
    pub height: u32,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            snapshots: 6,
            width: 720,
            height: 420,
        }
    }
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, origin: &Path) -> Result<T, CliError> {
    toml::from_str(text).map_err(|e| {
        let at = e
            .span()
            .map(|s| {
                let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                format!(" at line {line}")
            })
            .unwrap_or_default();
        CliError::user(format!("{}{at}: {}", origin.display(), e.message()))
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => parse_toml(&read(p)?, p),
            None => Ok(PipelineConfig::default()),
        }
    }

    /// Replaces the controller section with a stand-alone controller file.
    pub fn merge_controller_file(&mut self, path: &Path) -> Result<(), CliError> {
        self.controller = parse_toml(&read(path)?, path)?;
        Ok(())
    }

    /// `MANIPULANT_SEED` wins over every other seed source.
    pub fn apply_seed_env(&mut self) -> Result<(), CliError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            let seed: u64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::user(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
            self.ingest.seed = seed;
            self.gmm.seed = seed;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is always serializable")
    }
}

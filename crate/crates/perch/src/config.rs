//! Toolkit configuration file (TOML).
//!
//! Every table and key is optional; omitted values take the documented
//! defaults. Unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//! output_dir = "out"
//!
//! [quad]        # mass, inertia, arm_length, k_f, k_m, gravity, thrust_min, thrust_max
//! [train]       # gamma, xi, rho_bar, lr_policy, lr_value, episode_budget, ...
//! [gains]       # kx, kv, kr, kp, ki, kd (3-vectors), integral_limit
//! [switch]      # epsilon, perch_attitude, latch, terminal_thrust, decay_time
//! [mission]     # box_min, box_max, velocity_min, velocity_max, trial_count, ...
//! [scripted]    # hand-designed approach used by --scripted
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use perch_core::controller::{AttitudeSwitchConfig, Gains};
use perch_core::dynamics::QuadParams;
use perch_core::mission::{MissionConfig, MissionSetup};
use perch_core::rl::env::PerchTask;
use perch_core::rl::train::TrainConfig;
use perch_core::trajgen::ScriptedApproach;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub quad: QuadParams,
    pub train: TrainConfig,
    pub gains: Gains,
    pub switch: AttitudeSwitchConfig,
    pub mission: MissionConfig,
    pub scripted: ScriptedApproach,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            quad: QuadParams::default(),
            train: TrainConfig::default(),
            gains: Gains::default(),
            switch: AttitudeSwitchConfig::default(),
            mission: MissionConfig::default(),
            scripted: ScriptedApproach::default(),
        }
    }
}

impl ToolkitConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = |e: String| ConfigError::Validation(e);
        self.quad.validate().map_err(|e| v(format!("quad: {e}")))?;
        self.train.validate().map_err(|e| v(format!("train: {e}")))?;
        self.gains.validate().map_err(|e| v(format!("gains: {e}")))?;
        self.switch.validate().map_err(|e| v(format!("switch: {e}")))?;
        self.mission.validate().map_err(|e| v(format!("mission: {e}")))?;
        let s = &self.scripted;
        if !(s.dt > 0.0 && s.speed > 0.0 && s.cruise_speed > 0.0 && s.min_duration > 0.0 && s.tail >= 0.0) {
            return Err(v("scripted: dt, speed, cruise_speed and min_duration must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    /// Short content hash of the canonical serialisation, ignoring the output
    /// directory.
    pub fn hash(&self) -> u64 {
        let canonical = ToolkitConfig { output_dir: PathBuf::new(), ..self.clone() };
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    /// Perch task used for training and Stage I, with the training timing.
    pub fn task(&self) -> PerchTask {
        let mut task = PerchTask::new(self.quad.clone());
        task.perch_point = self.mission.perch_point;
        self.train.configure_task(&mut task);
        task
    }

    pub fn mission_setup(&self) -> MissionSetup {
        let task = self.task();
        MissionSetup {
            head: self.train.policy_head(&task),
            params: self.quad.clone(),
            gains: self.gains,
            switch: self.switch,
            mission: self.mission.clone(),
            task,
        }
    }
}

pub fn parse_config(text: &str) -> Result<ToolkitConfig, ConfigError> {
    let cfg: ToolkitConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|span| {
                let before = &text[..span.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                (line, column)
            })
            .unwrap_or((0, 0));
        ConfigError::Parse { line, column, message: e.message().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ToolkitConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

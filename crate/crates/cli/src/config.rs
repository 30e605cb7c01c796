//! Layered run configuration: command-line flags override the optional
//! JSON config file, which overrides built-in defaults. The merged result
//! is echoed to stderr so a run can always be reproduced from its output.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::ValueEnum;
use dualnav_core::mapping::DEFAULT_MIN_CLUSTER;
use dualnav_core::planner::{InterpolationConfig, DEFAULT_SPACING_M};
use dualnav_core::policy::remote::RemoteConfig;
use dualnav_core::policy::scripted::ScriptedFastConfig;
use dualnav_core::policy::{ScriptedSuiteProvider, SlowKind};
use dualnav_core::scheduler::{
    CoordinationMode, EpisodeConfig, ScheduleConfig, DEFAULT_LATENCY_L, DEFAULT_RATIO_K,
};
use dualnav_core::views::{ViewConfig, DEFAULT_TAU};
use dualnav_core::world::SensorConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable holding the credential forwarded to a remote
/// planner. Never accepted as a flag so it cannot leak into shell history.
pub const ENDPOINT_TOKEN_VAR: &str = "DUALNAV_ENDPOINT_TOKEN";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config file {path} is not valid: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Which planner backs the slow system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyChoice {
    /// Scripted fast policy alone; no slow planner.
    Scripted,
    /// Ground-truth geodesic planner.
    Oracle,
    /// External planner over the line-per-call TCP protocol.
    Remote,
}

/// Which systems drive the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeChoice {
    FastOnly,
    Dual,
    SlowOnly,
}

/// Optional keys of the `--config` file. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub policy: Option<PolicyChoice>,
    pub mode: Option<ModeChoice>,
    pub ratio: Option<u32>,
    pub latency: Option<u32>,
    pub p_err: Option<f64>,
    pub tau: Option<f64>,
    pub spacing_m: Option<f64>,
    pub min_cluster: Option<usize>,
    pub endpoint: Option<String>,
    pub timeout_s: Option<f64>,
    pub seeds: Option<Vec<u64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text)
            .map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }
}

/// Flag values as given on the command line, all optional so absence can
/// defer to the config file.
#[derive(Debug, Default, Clone)]
pub struct FlagOverrides {
    pub policy: Option<PolicyChoice>,
    pub mode: Option<ModeChoice>,
    pub ratio: Option<u32>,
    pub latency: Option<u32>,
    pub p_err: Option<f64>,
    pub tau: Option<f64>,
    pub spacing_m: Option<f64>,
    pub endpoint: Option<String>,
    pub seeds: Vec<u64>,
}

/// The fully merged configuration a run actually uses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Effective {
    pub policy: PolicyChoice,
    pub mode: ModeChoice,
    pub ratio: u32,
    pub latency: u32,
    pub p_err: f64,
    pub tau: f64,
    pub spacing_m: f64,
    pub min_cluster: usize,
    pub timeout_s: f64,
    pub endpoint: Option<String>,
    pub seeds: Vec<u64>,
}

impl Effective {
    /// Flags beat the file, the file beats defaults. A missing mode
    /// follows the policy: scripted runs fast-only, planners run dual.
    pub fn merge(flags: &FlagOverrides, file: &FileConfig) -> Result<Self, ConfigError> {
        let policy = flags.policy.or(file.policy).unwrap_or(PolicyChoice::Oracle);
        let mode = flags.mode.or(file.mode).unwrap_or(match policy {
            PolicyChoice::Scripted => ModeChoice::FastOnly,
            PolicyChoice::Oracle | PolicyChoice::Remote => ModeChoice::Dual,
        });
        if policy == PolicyChoice::Scripted && mode != ModeChoice::FastOnly {
            return Err(ConfigError::Invalid(format!(
                "the scripted policy has no planner and cannot run {}; \
                 pick --policy oracle or --policy remote",
                mode.to_possible_value().expect("no skipped variants").get_name()
            )));
        }
        let seeds = if flags.seeds.is_empty() {
            file.seeds.clone().unwrap_or_else(|| vec![0])
        } else {
            flags.seeds.clone()
        };
        if seeds.is_empty() {
            return Err(ConfigError::Invalid("the seed list cannot be empty".into()));
        }
        let merged = Effective {
            policy,
            mode,
            ratio: flags.ratio.or(file.ratio).unwrap_or(DEFAULT_RATIO_K),
            latency: flags.latency.or(file.latency).unwrap_or(DEFAULT_LATENCY_L),
            p_err: flags.p_err.or(file.p_err).unwrap_or(ScriptedFastConfig::default().p_err),
            tau: flags.tau.or(file.tau).unwrap_or(DEFAULT_TAU),
            spacing_m: flags.spacing_m.or(file.spacing_m).unwrap_or(DEFAULT_SPACING_M),
            min_cluster: file.min_cluster.unwrap_or(DEFAULT_MIN_CLUSTER),
            timeout_s: file.timeout_s.unwrap_or(60.0),
            endpoint: flags.endpoint.clone().or_else(|| file.endpoint.clone()),
            seeds,
        };
        merged.validate()?;
        Ok(merged)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.p_err) {
            return Err(ConfigError::Invalid(format!(
                "p_err must lie in [0, 1], got {}",
                self.p_err
            )));
        }
        if !(self.spacing_m.is_finite() && self.spacing_m > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "the interpolation spacing must be positive, got {}",
                self.spacing_m
            )));
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "timeout_s must be positive, got {}",
                self.timeout_s
            )));
        }
        if self.policy == PolicyChoice::Remote && self.endpoint.is_none() {
            return Err(ConfigError::Invalid(
                "the remote policy needs an endpoint; pass --endpoint HOST:PORT \
                 or set \"endpoint\" in the config file"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Scheduler-facing episode configuration.
    pub fn episode_config(&self) -> EpisodeConfig {
        let mode = match self.mode {
            ModeChoice::SlowOnly => CoordinationMode::SlowOnly,
            ModeChoice::FastOnly | ModeChoice::Dual => CoordinationMode::Dual,
        };
        EpisodeConfig {
            schedule: ScheduleConfig {
                ratio_k: self.ratio,
                latency_l: self.latency,
                mode,
                ..ScheduleConfig::default()
            },
            sensor: SensorConfig::default(),
            views: ViewConfig { tau: self.tau, ..ViewConfig::default() },
            interpolation: InterpolationConfig { spacing_m: self.spacing_m },
            min_cluster: self.min_cluster,
        }
    }

    /// Policy provider matching the merged choice. The remote credential
    /// comes from [`ENDPOINT_TOKEN_VAR`], never from a flag.
    pub fn provider(&self) -> ScriptedSuiteProvider {
        let slow = if self.mode == ModeChoice::FastOnly {
            SlowKind::None
        } else {
            self.slow_kind()
        };
        ScriptedSuiteProvider {
            fast_cfg: ScriptedFastConfig { p_err: self.p_err, ..ScriptedFastConfig::default() },
            slow,
        }
    }

    /// The planner kind alone, ignoring the coordination mode. Sweeps use
    /// this to attach the same planner across their rows.
    pub fn slow_kind(&self) -> SlowKind {
        match self.policy {
            PolicyChoice::Scripted => SlowKind::None,
            PolicyChoice::Oracle => SlowKind::Oracle,
            PolicyChoice::Remote => {
                let endpoint = self.endpoint.clone().expect("validated on merge");
                SlowKind::Remote(RemoteConfig {
                    endpoint,
                    timeout: Duration::from_secs_f64(self.timeout_s),
                    auth: std::env::var(ENDPOINT_TOKEN_VAR).ok(),
                })
            }
        }
    }

    /// Echo the merged configuration to stderr as one JSON object.
    pub fn announce(&self) {
        let doc = serde_json::to_string(self).expect("config serialization cannot fail");
        eprintln!("effective config: {doc}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &tempfile::TempDir, body: &str) -> PathBuf {
        let path = dir.path().join("config.json");
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn defaults_fill_everything() {
        let eff = Effective::merge(&FlagOverrides::default(), &FileConfig::default()).unwrap();
        assert_eq!(eff.policy, PolicyChoice::Oracle);
        assert_eq!(eff.mode, ModeChoice::Dual);
        assert_eq!(eff.ratio, DEFAULT_RATIO_K);
        assert_eq!(eff.latency, DEFAULT_LATENCY_L);
        assert_eq!(eff.seeds, vec![0]);
    }

    #[test]
    fn flags_beat_file_beats_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(&dir, r#"{"ratio": 12, "latency": 3, "p_err": 0.5}"#);
        let file = FileConfig::load(&path).unwrap();
        let flags = FlagOverrides { ratio: Some(30), ..FlagOverrides::default() };
        let eff = Effective::merge(&flags, &file).unwrap();
        assert_eq!(eff.ratio, 30, "flag wins");
        assert_eq!(eff.latency, 3, "file wins over default");
        assert_eq!(eff.p_err, 0.5);
        assert_eq!(eff.tau, DEFAULT_TAU, "default fills the rest");
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(&dir, r#"{"ratioo": 12}"#);
        let err = FileConfig::load(&path).unwrap_err();
        assert!(err.to_string().contains("ratioo"), "{err}");
    }

    #[test]
    fn scripted_policy_cannot_run_slow_only() {
        let flags = FlagOverrides {
            policy: Some(PolicyChoice::Scripted),
            mode: Some(ModeChoice::SlowOnly),
            ..FlagOverrides::default()
        };
        let err = Effective::merge(&flags, &FileConfig::default()).unwrap_err();
        assert!(err.to_string().contains("slow-only"), "{err}");
    }

    #[test]
    fn remote_policy_requires_an_endpoint() {
        let flags =
            FlagOverrides { policy: Some(PolicyChoice::Remote), ..FlagOverrides::default() };
        let err = Effective::merge(&flags, &FileConfig::default()).unwrap_err();
        assert!(err.to_string().contains("endpoint"), "{err}");
    }

    #[test]
    fn fast_only_mode_never_attaches_a_planner() {
        let flags = FlagOverrides {
            policy: Some(PolicyChoice::Oracle),
            mode: Some(ModeChoice::FastOnly),
            ..FlagOverrides::default()
        };
        let eff = Effective::merge(&flags, &FileConfig::default()).unwrap();
        assert!(matches!(eff.provider().slow, SlowKind::None));
    }

    #[test]
    fn schedule_mode_tracks_the_mode_choice() {
        let flags =
            FlagOverrides { mode: Some(ModeChoice::SlowOnly), ..FlagOverrides::default() };
        let eff = Effective::merge(&flags, &FileConfig::default()).unwrap();
        assert_eq!(eff.episode_config().schedule.mode, CoordinationMode::SlowOnly);
        let flags = FlagOverrides { mode: Some(ModeChoice::Dual), ..FlagOverrides::default() };
        let eff = Effective::merge(&flags, &FileConfig::default()).unwrap();
        assert_eq!(eff.episode_config().schedule.mode, CoordinationMode::Dual);
    }
}

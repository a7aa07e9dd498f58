//! Experiment configuration, profiles, and TOML loading.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, EnvSpec};
use crate::error::{Error, Result};
use crate::model::TrainConfig;
use crate::planner::PlannerConfig;
use crate::policy::{BehaviorSpace, PolicyArch};

/// Scale presets. A config file overrides whatever its profile sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 20 epochs, 3 seeds.
    #[default]
    Desk,
    /// 50 epochs, 10 seeds.
    Full,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(Error::Unknown {
                kind: "profile",
                name: other.to_string(),
            }),
        }
    }

    pub fn defaults(self) -> ExperimentConfig {
        let (epochs, n_seeds) = match self {
            Profile::Desk => (20, 3),
            Profile::Full => (50, 10),
        };
        ExperimentConfig {
            epochs,
            seeds: (0..n_seeds).collect(),
            ..ExperimentConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Planned epochs after the initial random episode.
    pub epochs: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Convergence threshold; the environment's own when unset.
    pub reward_threshold: Option<f64>,
    pub env: EnvConfig,
    pub planner: PlannerConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            seeds: vec![0, 1, 2],
            output_dir: PathBuf::from("runs/default"),
            reward_threshold: None,
            env: EnvConfig::default(),
            planner: PlannerConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses `text` on top of `profile`'s defaults. Tables merge key by key,
    /// except `env`, which is taken whole from the file when present.
    pub fn from_toml(text: &str, profile: Profile) -> Result<Self> {
        let overlay: toml::Table = text.parse()?;
        let mut base = toml::Table::try_from(profile.defaults())?;
        if overlay.contains_key("env") {
            base.remove("env");
        }
        merge(&mut base, overlay);
        let cfg: ExperimentConfig = toml::Value::Table(base).try_into()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, profile: Profile) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Missing(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_toml(&text, profile)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.env.build().spec().clone();
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if spec.episode_len == 0 {
            return Err(Error::Config("env.episode_len must be positive".into()));
        }
        if self.planner.me_initial > self.planner.me_budget {
            return Err(Error::Config("planner.me_initial exceeds planner.me_budget".into()));
        }
        if let Some(hidden) = &self.planner.policy_hidden {
            if hidden.contains(&0) {
                return Err(Error::Config("planner.policy_hidden widths must be positive".into()));
            }
        }
        self.planner.validate()?;
        self.train.validate(spec.observation_dim)
    }

    pub fn reward_threshold(&self, spec: &EnvSpec) -> f64 {
        self.reward_threshold.unwrap_or(spec.reward_threshold)
    }

    /// The environment's behavior space with the planner's grid and
    /// reduction applied.
    pub fn behavior_space(&self, spec: &EnvSpec) -> BehaviorSpace {
        BehaviorSpace {
            grid: self.planner.grid_size,
            reduction: self.planner.behavior_reduction,
            ..spec.behavior.clone()
        }
    }

    pub fn policy_arch(&self, spec: &EnvSpec) -> Arc<PolicyArch> {
        let hidden = self
            .planner
            .policy_hidden
            .clone()
            .unwrap_or_else(|| spec.policy_hidden.clone());
        Arc::new(PolicyArch::new(spec.observation_dim, hidden, spec.action_space.clone()))
    }

    /// Snapshot for one seed's directory.
    pub fn for_seed(&self, seed: u64) -> Self {
        Self {
            seeds: vec![seed],
            ..self.clone()
        }
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::PlannerKind;

    #[test]
    fn defaults_match_the_reference_table() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.planner.horizon, 10);
        assert_eq!(cfg.planner.shooting_sequences, 100);
        assert_eq!(
            (
                cfg.planner.me_budget,
                cfg.planner.me_initial,
                cfg.planner.me_per_iteration
            ),
            (100, 25, 5)
        );
        assert_eq!((cfg.planner.cem_sequences, cfg.planner.cem_elites), (20, 10));
        assert_eq!(cfg.train.passes, 300);
        assert_eq!(cfg.train.learning_rate, 1e-3);
        assert_eq!(cfg.planner.grid_size, 50);
        cfg.validate().unwrap();
    }

    #[test]
    fn file_overrides_profile() {
        let text = r#"
            epochs = 4
            [planner]
            kind = "s-me"
            [train]
            passes = 10
        "#;
        let cfg = ExperimentConfig::from_toml(text, Profile::Full).unwrap();
        assert_eq!(cfg.epochs, 4);
        assert_eq!(cfg.seeds.len(), 10);
        assert_eq!(cfg.planner.kind, PlannerKind::SafeMe);
        assert_eq!(cfg.planner.horizon, 10);
        assert_eq!(cfg.train.passes, 10);
        assert_eq!(cfg.train.batch_size, 64);
    }

    #[test]
    fn env_table_replaces_the_default_env() {
        let text = "[env]\nname = \"safe_acrobot\"\nepisode_len = 50\n";
        let cfg = ExperimentConfig::from_toml(text, Profile::Desk).unwrap();
        let spec = cfg.env.build().spec().clone();
        assert_eq!(spec.name, "safe_acrobot");
        assert_eq!(spec.episode_len, 50);
        assert_eq!(cfg.policy_arch(&spec).param_count(), 83);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("epohcs = 3", Profile::Desk).is_err());
        assert!(ExperimentConfig::from_toml("[planner]\nhorizn = 3", Profile::Desk).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::from_toml("[env]\nname = \"safe_acrobot\"", Profile::Desk).unwrap();
        cfg.reward_threshold = Some(1.25);
        cfg.train.dim_order = Some(vec![5, 4, 3, 2, 1, 0]);
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text, Profile::Full).unwrap(), cfg);
    }

    #[test]
    fn invalid_configs_are_reported() {
        let mut cfg = ExperimentConfig::default();
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            seeds: vec![1, 1],
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.train.dim_order = Some(vec![0, 0, 1]);
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.planner.me_initial = 101;
        assert!(cfg.validate().is_err());
    }
}

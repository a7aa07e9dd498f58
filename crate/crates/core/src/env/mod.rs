//! Safe control environments.
//!
//! Both environments are pure value transformers: `step` maps a state and an
//! action to the next state, a reward and a 0/1 safety cost. Randomness only
//! enters through `reset`.

mod acrobot;
mod pendulum;

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::BehaviorSpace;

pub use acrobot::{AcrobotParams, SafeAcrobot};
pub use pendulum::{PendulumParams, SafePendulum};

/// Actions are scalars for both environments: a torque for the pendulum and
/// one of `{-1, 0, 1}` for the acrobot.
pub type Action = f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionSpace {
    Continuous { lo: f64, hi: f64 },
    Discrete(Vec<f64>),
}

impl ActionSpace {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        match self {
            ActionSpace::Continuous { lo, hi } => rng.random_range(*lo..=*hi),
            ActionSpace::Discrete(values) => values[rng.random_range(0..values.len())],
        }
    }

    pub fn contains(&self, action: Action) -> bool {
        match self {
            ActionSpace::Continuous { lo, hi } => action >= *lo && action <= *hi,
            ActionSpace::Discrete(values) => values.contains(&action),
        }
    }

    /// Clamps continuous actions into range; discrete actions must already be
    /// members of the set.
    pub fn admit(&self, action: Action) -> Result<Action> {
        match self {
            ActionSpace::Continuous { lo, hi } => Ok(action.clamp(*lo, *hi)),
            ActionSpace::Discrete(values) => {
                if values.contains(&action) {
                    Ok(action)
                } else {
                    Err(Error::InvalidAction {
                        action,
                        allowed: values.clone(),
                    })
                }
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpace::Discrete(_))
    }

    /// Width of the model-input encoding: 1 for continuous, one-hot otherwise.
    pub fn encoded_dim(&self) -> usize {
        match self {
            ActionSpace::Continuous { .. } => 1,
            ActionSpace::Discrete(values) => values.len(),
        }
    }

    /// Writes the encoding of `action` into `out` (length `encoded_dim`).
    pub fn encode(&self, action: Action, out: &mut [f64]) {
        match self {
            ActionSpace::Continuous { .. } => out[0] = action,
            ActionSpace::Discrete(values) => {
                for (slot, v) in out.iter_mut().zip(values) {
                    *slot = if *v == action { 1.0 } else { 0.0 };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    /// Generalized coordinates followed by velocities.
    pub internal: Vec<f64>,
    pub observation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub cost: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub action_space: ActionSpace,
    pub observation_dim: usize,
    pub episode_len: usize,
    /// Bounds used for reward histograms.
    pub reward_bounds: (f64, f64),
    pub behavior: BehaviorSpace,
    /// Hidden layer widths of the planner policies.
    pub policy_hidden: Vec<usize>,
    /// Reward threshold for the convergence-pace metric.
    pub reward_threshold: f64,
}

/// Analytic reward and cost evaluated on an observation vector, which may be
/// a model prediction rather than a real state.
pub trait Objective: Sync {
    /// Returns `(reward, cost)` with cost in `{0.0, 1.0}`.
    fn reward_cost(&self, obs: &[f64], action: Action) -> (f64, f64);
}

pub trait Environment: Objective + Send {
    fn spec(&self) -> &EnvSpec;

    fn reset_with(&self, rng: &mut dyn RngCore) -> EnvState;

    fn step(&self, state: &EnvState, action: Action) -> Result<StepOutcome>;

    fn is_unsafe(&self, state: &EnvState) -> bool;

    fn reset(&self, seed: u64) -> EnvState {
        let mut rng = crate::rng::stream(seed, crate::rng::Concern::EnvReset, 0, 0);
        self.reset_with(&mut rng)
    }

    fn unsafe_cost(&self, state: &EnvState) -> u8 {
        u8::from(self.is_unsafe(state))
    }

    fn true_reward_cost(&self, obs: &[f64], action: Action) -> (f64, u8) {
        let (r, c) = self.reward_cost(obs, action);
        (r, u8::from(c > 0.5))
    }
}

/// Environment selection by name, with physics constants overridable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EnvConfig {
    SafePendulum(#[serde(default)] PendulumParams),
    SafeAcrobot(#[serde(default)] AcrobotParams),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::SafePendulum(PendulumParams::default())
    }
}

impl EnvConfig {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "safe_pendulum" => Ok(EnvConfig::SafePendulum(PendulumParams::default())),
            "safe_acrobot" => Ok(EnvConfig::SafeAcrobot(AcrobotParams::default())),
            other => Err(Error::Unknown {
                kind: "environment",
                name: other.to_string(),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::SafePendulum(_) => "safe_pendulum",
            EnvConfig::SafeAcrobot(_) => "safe_acrobot",
        }
    }

    pub fn build(&self) -> Box<dyn Environment> {
        match self {
            EnvConfig::SafePendulum(p) => Box::new(SafePendulum::new(p.clone())),
            EnvConfig::SafeAcrobot(p) => Box::new(SafeAcrobot::new(p.clone())),
        }
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn wrap_angle_range() {
        for k in -50..50 {
            let x = k as f64 * 0.37;
            let w = wrap_angle(x);
            assert!((-PI..PI).contains(&w), "{x} -> {w}");
            assert!(((x - w) / (2.0 * PI)).fract().abs() < 1e-9 || ((x - w) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn discrete_space_rejects_non_members() {
        let space = ActionSpace::Discrete(vec![-1.0, 0.0, 1.0]);
        assert!(space.admit(0.5).is_err());
        assert_eq!(space.admit(1.0).unwrap(), 1.0);
        let mut enc = [0.0; 3];
        space.encode(-1.0, &mut enc);
        assert_eq!(enc, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn continuous_space_clamps() {
        let space = ActionSpace::Continuous { lo: -2.0, hi: 2.0 };
        assert_eq!(space.admit(5.0).unwrap(), 2.0);
        let mut rng = seeded(1);
        for _ in 0..1000 {
            assert!(space.contains(space.sample(&mut rng)));
        }
    }

    #[test]
    fn config_by_name() {
        assert_eq!(EnvConfig::by_name("safe_acrobot").unwrap().name(), "safe_acrobot");
        assert!(EnvConfig::by_name("cartpole").is_err());
        let env = EnvConfig::by_name("safe_pendulum").unwrap().build();
        assert_eq!(env.spec().episode_len, 200);
    }

    #[test]
    fn config_parses_from_toml_with_overrides() {
        #[derive(Deserialize)]
        struct Wrapper {
            env: EnvConfig,
        }
        let w: Wrapper = toml::from_str("[env]\nname = \"safe_acrobot\"\ndt = 0.02\n").unwrap();
        match w.env {
            EnvConfig::SafeAcrobot(p) => {
                assert_eq!(p.dt, 0.02);
                assert_eq!(p.max_vel_0, AcrobotParams::default().max_vel_0);
            }
            _ => panic!("wrong variant"),
        }
    }
}

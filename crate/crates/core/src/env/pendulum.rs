use std::f64::consts::PI;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{wrap_angle, Action, ActionSpace, EnvSpec, EnvState, Environment, Objective, StepOutcome};
use crate::error::Result;
use crate::policy::{BehaviorSpace, Projection};

/// Swing-up pendulum constants. `θ = 0` is upright.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumParams {
    pub g: f64,
    pub mass: f64,
    pub length: f64,
    pub dt: f64,
    pub max_torque: f64,
    pub max_speed: f64,
    /// Closed unsafe band of wrapped angles, in degrees.
    pub unsafe_band_deg: (f64, f64),
    pub episode_len: usize,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            g: 10.0,
            mass: 1.0,
            length: 1.0,
            dt: 0.05,
            max_torque: 2.0,
            max_speed: 8.0,
            unsafe_band_deg: (20.0, 30.0),
            episode_len: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SafePendulum {
    params: PendulumParams,
    spec: EnvSpec,
    band: (f64, f64),
}

impl SafePendulum {
    pub fn new(params: PendulumParams) -> Self {
        let spec = EnvSpec {
            name: "safe_pendulum".into(),
            action_space: ActionSpace::Continuous {
                lo: -params.max_torque,
                hi: params.max_torque,
            },
            observation_dim: 3,
            episode_len: params.episode_len,
            reward_bounds: (Self::min_reward(&params), 0.0),
            behavior: BehaviorSpace::new(
                Projection::PendulumPhase,
                [(-PI, PI), (-params.max_speed, params.max_speed)],
            ),
            policy_hidden: vec![5],
            reward_threshold: -2.5,
        };
        let band = (
            params.unsafe_band_deg.0.to_radians(),
            params.unsafe_band_deg.1.to_radians(),
        );
        Self { params, spec, band }
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    fn min_reward(p: &PendulumParams) -> f64 {
        -(PI * PI + 0.1 * p.max_speed * p.max_speed + 0.001 * p.max_torque * p.max_torque)
    }

    pub fn state_from(theta: f64, theta_dot: f64) -> EnvState {
        let theta = wrap_angle(theta);
        EnvState {
            internal: vec![theta, theta_dot],
            observation: vec![theta.cos(), theta.sin(), theta_dot],
        }
    }

    pub fn observation(theta: f64, theta_dot: f64) -> Vec<f64> {
        vec![theta.cos(), theta.sin(), theta_dot]
    }

    pub fn reward(theta: f64, theta_dot: f64, torque: f64) -> f64 {
        let th = wrap_angle(theta);
        -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque)
    }

    pub fn angle_unsafe(&self, theta: f64) -> bool {
        let th = wrap_angle(theta);
        th >= self.band.0 && th <= self.band.1
    }
}

impl Objective for SafePendulum {
    fn reward_cost(&self, obs: &[f64], action: Action) -> (f64, f64) {
        let theta = obs[1].atan2(obs[0]);
        let torque = action.clamp(-self.params.max_torque, self.params.max_torque);
        let r = Self::reward(theta, obs[2], torque);
        (r, if self.angle_unsafe(theta) { 1.0 } else { 0.0 })
    }
}

impl Environment for SafePendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset_with(&self, rng: &mut dyn RngCore) -> EnvState {
        let theta = rng.random_range(-PI..=PI);
        let theta_dot = rng.random_range(-1.0..=1.0);
        Self::state_from(theta, theta_dot)
    }

    fn step(&self, state: &EnvState, action: Action) -> Result<StepOutcome> {
        let p = &self.params;
        let u = self.spec.action_space.admit(action)?;
        let (th, thdot) = (state.internal[0], state.internal[1]);
        let accel = 3.0 * p.g / (2.0 * p.length) * th.sin() + 3.0 / (p.mass * p.length * p.length) * u;
        let new_thdot = (thdot + accel * p.dt).clamp(-p.max_speed, p.max_speed);
        let next_state = Self::state_from(th + new_thdot * p.dt, new_thdot);
        let theta = next_state.internal[0];
        Ok(StepOutcome {
            reward: Self::reward(theta, new_thdot, u),
            cost: u8::from(self.angle_unsafe(theta)),
            next_state,
        })
    }

    fn is_unsafe(&self, state: &EnvState) -> bool {
        self.angle_unsafe(state.internal[0])
    }
}

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{wrap_angle, Action, ActionSpace, EnvSpec, EnvState, Environment, Objective, StepOutcome};
use crate::error::Result;
use crate::policy::{BehaviorSpace, Projection};

/// Two-link acrobot (Sutton & Barto form). `θ0 = θ1 = 0` hangs straight down;
/// the second joint is actuated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcrobotParams {
    pub link_length_0: f64,
    pub link_length_1: f64,
    pub link_mass_0: f64,
    pub link_mass_1: f64,
    pub link_com_0: f64,
    pub link_com_1: f64,
    pub link_moi: f64,
    pub g: f64,
    pub dt: f64,
    pub max_vel_0: f64,
    pub max_vel_1: f64,
    pub torque_scale: f64,
    /// Tip heights strictly above this value are unsafe.
    pub unsafe_height: f64,
    pub episode_len: usize,
}

impl Default for AcrobotParams {
    fn default() -> Self {
        Self {
            link_length_0: 1.0,
            link_length_1: 1.0,
            link_mass_0: 1.0,
            link_mass_1: 1.0,
            link_com_0: 0.5,
            link_com_1: 0.5,
            link_moi: 1.0,
            g: 9.8,
            dt: 0.2,
            max_vel_0: 4.0 * PI,
            max_vel_1: 9.0 * PI,
            torque_scale: 1.0,
            unsafe_height: 3.0,
            episode_len: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SafeAcrobot {
    params: AcrobotParams,
    spec: EnvSpec,
}

impl SafeAcrobot {
    pub fn new(params: AcrobotParams) -> Self {
        let max_height = 2.0 * (params.link_length_0 + params.link_length_1);
        let spec = EnvSpec {
            name: "safe_acrobot".into(),
            action_space: ActionSpace::Discrete(vec![-1.0, 0.0, 1.0]),
            observation_dim: 6,
            episode_len: params.episode_len,
            reward_bounds: (0.0, max_height),
            behavior: BehaviorSpace::new(Projection::AcrobotJoints, [(-PI, PI), (-PI, PI)]),
            policy_hidden: vec![5, 5],
            reward_threshold: 1.6,
        };
        Self { params, spec }
    }

    pub fn params(&self) -> &AcrobotParams {
        &self.params
    }

    pub fn state_from(internal: [f64; 4]) -> EnvState {
        let [t0, t1, d0, d1] = internal;
        EnvState {
            internal: internal.to_vec(),
            observation: vec![t0.cos(), t0.sin(), t1.cos(), t1.sin(), d0, d1],
        }
    }

    /// Height of the tip above the hanging position.
    pub fn tip_height(&self, theta0: f64, theta1: f64) -> f64 {
        let p = &self.params;
        p.link_length_0 + p.link_length_1 - p.link_length_0 * theta0.cos() - p.link_length_1 * (theta0 + theta1).cos()
    }

    pub fn height_unsafe(&self, height: f64) -> bool {
        height > self.params.unsafe_height
    }

    /// Total mechanical energy, potential measured from the hanging position.
    pub fn mechanical_energy(&self, s: &[f64]) -> f64 {
        let p = &self.params;
        let (m1, m2, l1, lc1, lc2) = (
            p.link_mass_0,
            p.link_mass_1,
            p.link_length_0,
            p.link_com_0,
            p.link_com_1,
        );
        let (i1, i2) = (p.link_moi, p.link_moi);
        let (t0, t1, d0, d1) = (s[0], s[1], s[2], s[3]);
        let m11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t1.cos()) + i1 + i2;
        let m12 = m2 * (lc2 * lc2 + l1 * lc2 * t1.cos()) + i2;
        let m22 = m2 * lc2 * lc2 + i2;
        let kinetic = 0.5 * (m11 * d0 * d0 + 2.0 * m12 * d0 * d1 + m22 * d1 * d1);
        let potential = (m1 * lc1 + m2 * l1) * p.g * (1.0 - t0.cos()) + m2 * lc2 * p.g * (1.0 - (t0 + t1).cos());
        kinetic + potential
    }

    fn derivatives(&self, s: [f64; 4], torque: f64) -> [f64; 4] {
        let p = &self.params;
        let (m1, m2, l1, lc1, lc2) = (
            p.link_mass_0,
            p.link_mass_1,
            p.link_length_0,
            p.link_com_0,
            p.link_com_1,
        );
        let (i1, i2, g) = (p.link_moi, p.link_moi, p.g);
        let [t0, t1, d0, d1] = s;
        let m11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t1.cos()) + i1 + i2;
        let m12 = m2 * (lc2 * lc2 + l1 * lc2 * t1.cos()) + i2;
        let phi2 = m2 * lc2 * g * (t0 + t1 - PI / 2.0).cos();
        let phi1 = -m2 * l1 * lc2 * d1 * d1 * t1.sin() - 2.0 * m2 * l1 * lc2 * d1 * d0 * t1.sin()
            + (m1 * lc1 + m2 * l1) * g * (t0 - PI / 2.0).cos()
            + phi2;
        let dd1 = (torque + m12 / m11 * phi1 - m2 * l1 * lc2 * d0 * d0 * t1.sin() - phi2)
            / (m2 * lc2 * lc2 + i2 - m12 * m12 / m11);
        let dd0 = -(m12 * dd1 + phi1) / m11;
        [d0, d1, dd0, dd1]
    }

    /// One classical RK4 step with the torque held constant. No wrapping or
    /// clamping.
    pub fn integrate(&self, s: [f64; 4], torque: f64, dt: f64) -> [f64; 4] {
        let add = |a: [f64; 4], k: [f64; 4], h: f64| -> [f64; 4] {
            [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2], a[3] + h * k[3]]
        };
        let k1 = self.derivatives(s, torque);
        let k2 = self.derivatives(add(s, k1, dt / 2.0), torque);
        let k3 = self.derivatives(add(s, k2, dt / 2.0), torque);
        let k4 = self.derivatives(add(s, k3, dt), torque);
        let mut out = s;
        for i in 0..4 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

impl Objective for SafeAcrobot {
    fn reward_cost(&self, obs: &[f64], _action: Action) -> (f64, f64) {
        let t0 = obs[1].atan2(obs[0]);
        let t1 = obs[3].atan2(obs[2]);
        let h = self.tip_height(t0, t1);
        (h, if self.height_unsafe(h) { 1.0 } else { 0.0 })
    }
}

impl Environment for SafeAcrobot {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset_with(&self, rng: &mut dyn RngCore) -> EnvState {
        let mut s = [0.0; 4];
        for v in &mut s {
            *v = rng.random_range(-0.1..=0.1);
        }
        Self::state_from(s)
    }

    fn step(&self, state: &EnvState, action: Action) -> Result<StepOutcome> {
        let a = self.spec.action_space.admit(action)?;
        let p = &self.params;
        let s = [
            state.internal[0],
            state.internal[1],
            state.internal[2],
            state.internal[3],
        ];
        let n = self.integrate(s, a * p.torque_scale, p.dt);
        let next = [
            wrap_angle(n[0]),
            wrap_angle(n[1]),
            n[2].clamp(-p.max_vel_0, p.max_vel_0),
            n[3].clamp(-p.max_vel_1, p.max_vel_1),
        ];
        let height = self.tip_height(next[0], next[1]);
        Ok(StepOutcome {
            next_state: Self::state_from(next),
            reward: height,
            cost: u8::from(self.height_unsafe(height)),
        })
    }

    fn is_unsafe(&self, state: &EnvState) -> bool {
        self.height_unsafe(self.tip_height(state.internal[0], state.internal[1]))
    }
}

//! Analytic dynamics/objective pairs with known optima, for exercising the
//! planners without a learned model.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2};

use super::{Dynamics, PlanContext};
use crate::env::{Action, ActionSpace, Objective};
use crate::error::Result;
use crate::policy::{BehaviorSpace, PolicyArch, Projection};

/// State is `[step, first action]`. The first action is latched into the
/// state, and every step's reward and cost is `score(first action)`, so a
/// candidate's totals are `horizon * score(a0)`.
pub struct FirstActionFixture<F> {
    score: F,
    pub action_space: ActionSpace,
    pub behavior: BehaviorSpace,
    pub policy_arch: Arc<PolicyArch>,
}

impl<F: Fn(f64) -> (f64, f64) + Sync> FirstActionFixture<F> {
    pub fn new(score: F) -> Self {
        let action_space = ActionSpace::Continuous { lo: -2.0, hi: 2.0 };
        Self {
            score,
            behavior: BehaviorSpace::new(Projection::Dims([0, 1]), [(0.0, 20.0), (-2.0, 2.0)]),
            policy_arch: Arc::new(PolicyArch::new(2, vec![5], action_space.clone())),
            action_space,
        }
    }

    pub fn start(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }
}

impl<F: Fn(f64) -> (f64, f64) + Sync> Dynamics for FirstActionFixture<F> {
    fn predict_batch(&self, states: ArrayView2<f64>, actions: &[Action]) -> Result<Array2<f64>> {
        let mut next = states.to_owned();
        for (i, mut row) in next.rows_mut().into_iter().enumerate() {
            if row[0] == 0.0 {
                row[1] = actions[i];
            }
            row[0] += 1.0;
        }
        Ok(next)
    }
}

impl<F: Fn(f64) -> (f64, f64) + Sync> Objective for FirstActionFixture<F> {
    fn reward_cost(&self, obs: &[f64], _action: Action) -> (f64, f64) {
        (self.score)(obs[1])
    }
}

pub fn fixture_ctx<F: Fn(f64) -> (f64, f64) + Sync>(fx: &FirstActionFixture<F>) -> PlanContext<'_> {
    PlanContext {
        dynamics: fx,
        objective: fx,
        action_space: &fx.action_space,
        behavior: &fx.behavior,
        policy_arch: &fx.policy_arch,
    }
}

/// Identity dynamics with a per-step objective on the action alone.
pub struct ActionObjectiveFixture<F> {
    score: F,
    pub action_space: ActionSpace,
    pub behavior: BehaviorSpace,
    pub policy_arch: Arc<PolicyArch>,
}

impl<F: Fn(Action) -> (f64, f64) + Sync> ActionObjectiveFixture<F> {
    pub fn new(action_space: ActionSpace, score: F) -> Self {
        Self {
            score,
            behavior: BehaviorSpace::new(Projection::Dims([0, 0]), [(-1.0, 1.0), (-1.0, 1.0)]),
            policy_arch: Arc::new(PolicyArch::new(1, vec![5], action_space.clone())),
            action_space,
        }
    }

    pub fn ctx(&self) -> PlanContext<'_> {
        PlanContext {
            dynamics: self,
            objective: self,
            action_space: &self.action_space,
            behavior: &self.behavior,
            policy_arch: &self.policy_arch,
        }
    }
}

impl<F: Fn(Action) -> (f64, f64) + Sync> Dynamics for ActionObjectiveFixture<F> {
    fn predict_batch(&self, states: ArrayView2<f64>, _actions: &[Action]) -> Result<Array2<f64>> {
        Ok(states.to_owned())
    }
}

impl<F: Fn(Action) -> (f64, f64) + Sync> Objective for ActionObjectiveFixture<F> {
    fn reward_cost(&self, _obs: &[f64], action: Action) -> (f64, f64) {
        (self.score)(action)
    }
}

use ndarray::{Array2, ArrayView1};

use super::Dynamics;
use crate::env::{Action, Objective};
use crate::error::{Error, Result};
use crate::policy::Policy;

#[derive(Debug, Clone, Copy)]
pub enum ActionSource<'a> {
    Sequence(&'a [Action]),
    Policy(&'a Policy),
}

impl ActionSource<'_> {
    fn action(&self, step: usize, state: ArrayView1<f64>) -> Action {
        match self {
            ActionSource::Sequence(seq) => seq[step],
            ActionSource::Policy(p) => match state.as_slice() {
                Some(s) => p.act(s),
                None => p.act(&state.to_vec()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    /// Discounted return.
    pub ret: f64,
    /// Discounted cost.
    pub cost: f64,
    /// Predicted state after each action, one row per step.
    pub states: Array2<f64>,
    pub actions: Vec<Action>,
}

/// Rolls one action source through the model from `s0`.
pub fn rollout(
    dynamics: &dyn Dynamics,
    objective: &dyn Objective,
    s0: &[f64],
    source: ActionSource,
    horizon: usize,
    gamma: f64,
) -> Result<RolloutResult> {
    let mut out = rollout_batch(dynamics, objective, s0, &[source], horizon, gamma)?;
    Ok(out.pop().expect("one source in, one result out"))
}

/// Rolls every source through the model in lockstep, one batched model call
/// per step. For step `k` (0-based) the reward and cost are evaluated on the
/// state reached after `a_k` and weighted by `gamma^k`, giving `horizon`
/// terms. Results are in source order.
pub fn rollout_batch(
    dynamics: &dyn Dynamics,
    objective: &dyn Objective,
    s0: &[f64],
    sources: &[ActionSource],
    horizon: usize,
    gamma: f64,
) -> Result<Vec<RolloutResult>> {
    for src in sources {
        if let ActionSource::Sequence(seq) = src {
            if seq.len() < horizon {
                return Err(Error::Dimension {
                    what: "action sequence",
                    expected: horizon,
                    got: seq.len(),
                });
            }
        }
    }
    let n = sources.len();
    let dim = s0.len();
    let mut current = Array2::zeros((n, dim));
    for mut row in current.rows_mut() {
        row.assign(&ArrayView1::from(s0));
    }
    let mut results: Vec<RolloutResult> = (0..n)
        .map(|_| RolloutResult {
            ret: 0.0,
            cost: 0.0,
            states: Array2::zeros((horizon, dim)),
            actions: Vec::with_capacity(horizon),
        })
        .collect();
    let mut actions = vec![0.0; n];
    let mut discount = 1.0;
    for step in 0..horizon {
        for (i, src) in sources.iter().enumerate() {
            actions[i] = src.action(step, current.row(i));
        }
        current = dynamics.predict_batch(current.view(), &actions)?;
        for (i, res) in results.iter_mut().enumerate() {
            let row = current.row(i);
            let (r, c) = match row.as_slice() {
                Some(s) => objective.reward_cost(s, actions[i]),
                None => objective.reward_cost(&row.to_vec(), actions[i]),
            };
            res.ret += discount * r;
            res.cost += discount * c;
            res.states.row_mut(step).assign(&row);
            res.actions.push(actions[i]);
        }
        discount *= gamma;
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Environment, PendulumParams, SafePendulum};
    use crate::planner::{FnDynamics, FnObjective};

    fn identity() -> FnDynamics<impl Fn(&[f64], Action) -> Vec<f64> + Sync> {
        FnDynamics(|s: &[f64], _a: Action| s.to_vec())
    }

    #[test]
    fn upright_identity_is_free() {
        let env = SafePendulum::new(PendulumParams::default());
        let zeros = [0.0; 10];
        let r = rollout(
            &identity(),
            &env,
            &[1.0, 0.0, 0.0],
            ActionSource::Sequence(&zeros),
            10,
            1.0,
        )
        .unwrap();
        assert_eq!((r.ret, r.cost), (0.0, 0.0));
        assert_eq!(r.states.nrows(), 10);
        assert_eq!(r.actions.len(), 10);
    }

    #[test]
    fn stuck_in_band_costs_every_step() {
        let env = SafePendulum::new(PendulumParams::default());
        let s = SafePendulum::state_from(25f64.to_radians(), 0.0);
        let zeros = [0.0; 10];
        let r = rollout(
            &identity(),
            &env,
            &s.observation,
            ActionSource::Sequence(&zeros),
            10,
            1.0,
        )
        .unwrap();
        assert_eq!(r.cost, 10.0);
        assert!(env.is_unsafe(&s));
    }

    #[test]
    fn discount_has_horizon_terms() {
        let always = FnObjective(|_: &[f64], _: Action| (1.0, 1.0));
        let seq = [0.0; 3];
        let r = rollout(&identity(), &always, &[0.0], ActionSource::Sequence(&seq), 3, 0.5).unwrap();
        assert_eq!(r.cost, 1.75);
        assert_eq!(r.ret, 1.75);
    }

    #[test]
    fn short_sequences_are_rejected() {
        let always = FnObjective(|_: &[f64], _: Action| (1.0, 1.0));
        let seq = [0.0; 2];
        assert!(rollout(&identity(), &always, &[0.0], ActionSource::Sequence(&seq), 3, 1.0).is_err());
    }

    #[test]
    fn batch_matches_single_rollouts() {
        let env = SafePendulum::new(PendulumParams::default());
        let dyn_ = FnDynamics(|s: &[f64], a: Action| vec![s[0] * 0.9, s[1] + 0.01 * a, s[2] + a]);
        let seqs: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64 * 0.3 - 0.5; 5]).collect();
        let sources: Vec<_> = seqs.iter().map(|s| ActionSource::Sequence(s)).collect();
        let s0 = [0.8, 0.6, 0.1];
        let batch = rollout_batch(&dyn_, &env, &s0, &sources, 5, 0.9).unwrap();
        for (src, b) in sources.iter().zip(&batch) {
            assert_eq!(&rollout(&dyn_, &env, &s0, *src, 5, 0.9).unwrap(), b);
        }
    }
}

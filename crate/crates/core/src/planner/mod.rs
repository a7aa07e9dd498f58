//! Model-predictive planners.
//!
//! Every planner scores candidates by rolling them through the learned model
//! for `horizon` steps and summing the analytic reward and cost on the
//! predicted states. Safe variants rank by lowest cost first and highest
//! return second; unsafe baselines rank by return alone.

mod archive;
mod cem;
mod elites;
pub mod fixtures;
mod pareto;
mod rollout;
mod shooting;

use std::cmp::Ordering;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionSpace, Objective};
use crate::error::{Error, Result};
use crate::model::DynamicsModel;
use crate::policy::{BehaviorSpace, PolicyArch, Reduction};

pub use archive::{Archive, Elite, InsertEvent, InsertOutcome, Replacement, ReplayReport};
pub use cem::plan_cem;
pub use elites::{me_loop, plan_me_family, select_pareto, select_reward_weighted, select_safe, Selection};
pub use pareto::{dominates, non_dominated_sort};
pub use rollout::{rollout, rollout_batch, ActionSource, RolloutResult};
pub use shooting::{best_index, plan_rs, plan_srs, sample_sequences};

/// Two discounted costs closer than this are treated as equal.
pub const COST_TIE_TOL: f64 = 1e-12;

/// Anything that maps a batch of states and actions to next states.
pub trait Dynamics: Sync {
    fn predict_batch(&self, states: ArrayView2<f64>, actions: &[Action]) -> Result<Array2<f64>>;
}

impl Dynamics for DynamicsModel {
    fn predict_batch(&self, states: ArrayView2<f64>, actions: &[Action]) -> Result<Array2<f64>> {
        DynamicsModel::predict_batch(self, states, actions)
    }
}

/// Dynamics given by a per-row closure `(state, action) -> next state`.
pub struct FnDynamics<F>(pub F);

impl<F> Dynamics for FnDynamics<F>
where
    F: Fn(&[f64], Action) -> Vec<f64> + Sync,
{
    fn predict_batch(&self, states: ArrayView2<f64>, actions: &[Action]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(states.raw_dim());
        for (i, row) in states.rows().into_iter().enumerate() {
            let next = (self.0)(&row.to_vec(), actions[i]);
            if next.len() != states.ncols() {
                return Err(Error::Dimension {
                    what: "fixture dynamics output",
                    expected: states.ncols(),
                    got: next.len(),
                });
            }
            out.row_mut(i).assign(&ndarray::ArrayView1::from(&next));
        }
        Ok(out)
    }
}

/// Objective given by a closure `(obs, action) -> (reward, cost)`.
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64], Action) -> (f64, f64) + Sync,
{
    fn reward_cost(&self, obs: &[f64], action: Action) -> (f64, f64) {
        (self.0)(obs, action)
    }
}

/// Everything a planner needs besides its own configuration.
#[derive(Clone, Copy)]
pub struct PlanContext<'a> {
    pub dynamics: &'a dyn Dynamics,
    pub objective: &'a dyn Objective,
    pub action_space: &'a ActionSpace,
    pub behavior: &'a BehaviorSpace,
    pub policy_arch: &'a Arc<PolicyArch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlannerKind {
    #[serde(rename = "rs")]
    Rs,
    #[serde(rename = "s-rs")]
    SafeRs,
    #[serde(rename = "me")]
    Me,
    #[serde(rename = "s-me")]
    SafeMe,
    #[serde(rename = "ps-me")]
    ParetoSafeMe,
    #[serde(rename = "cem")]
    Cem,
    #[serde(rename = "rcem")]
    Rcem,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 7] = [
        PlannerKind::SafeRs,
        PlannerKind::SafeMe,
        PlannerKind::ParetoSafeMe,
        PlannerKind::Rcem,
        PlannerKind::Rs,
        PlannerKind::Me,
        PlannerKind::Cem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Rs => "rs",
            PlannerKind::SafeRs => "s-rs",
            PlannerKind::Me => "me",
            PlannerKind::SafeMe => "s-me",
            PlannerKind::ParetoSafeMe => "ps-me",
            PlannerKind::Cem => "cem",
            PlannerKind::Rcem => "rcem",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Unknown {
                kind: "planner",
                name: name.to_string(),
            })
    }

    pub fn ranking(self) -> Ranking {
        match self {
            PlannerKind::Rs | PlannerKind::Me | PlannerKind::Cem => Ranking::RewardOnly,
            PlannerKind::SafeRs | PlannerKind::SafeMe | PlannerKind::ParetoSafeMe | PlannerKind::Rcem => {
                Ranking::SafeFirst
            }
        }
    }

    pub fn is_safe(self) -> bool {
        self.ranking() == Ranking::SafeFirst
    }
}

/// How evaluated candidates are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ranking {
    /// Highest return first.
    RewardOnly,
    /// Lowest cost first, then highest return.
    SafeFirst,
}

/// Integer key under which costs within `COST_TIE_TOL` of each other
/// compare equal.
pub fn cost_key(c: f64) -> i64 {
    (c / COST_TIE_TOL).round() as i64
}

impl Ranking {
    /// Total order on `(return, cost, index)`; `Less` means better. Ties are
    /// broken by the lower index.
    pub fn compare(self, a: (f64, f64, usize), b: (f64, f64, usize)) -> Ordering {
        let by_cost = match self {
            Ranking::RewardOnly => Ordering::Equal,
            Ranking::SafeFirst => cost_key(a.1).cmp(&cost_key(b.1)),
        };
        by_cost.then_with(|| b.0.total_cmp(&a.0)).then_with(|| a.2.cmp(&b.2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    pub horizon: usize,
    pub gamma: f64,
    /// Action sequences per call for RS and S-RS.
    pub shooting_sequences: usize,
    /// Sequences per iteration for CEM and RCEM.
    pub cem_sequences: usize,
    pub cem_elites: usize,
    pub cem_iterations: usize,
    pub cem_std_floor: f64,
    pub cem_smoothing: f64,
    /// Total policy evaluations per call, initial ones included.
    pub me_budget: usize,
    pub me_initial: usize,
    pub me_per_iteration: usize,
    pub variation_sigma: f64,
    pub selection_temperature: f64,
    pub grid_size: usize,
    pub behavior_reduction: Reduction,
    /// Hidden widths of the planner policies; environment default if unset.
    pub policy_hidden: Option<Vec<usize>>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            kind: PlannerKind::SafeRs,
            horizon: 10,
            gamma: 1.0,
            shooting_sequences: 100,
            cem_sequences: 20,
            cem_elites: 10,
            cem_iterations: 5,
            cem_std_floor: 1e-3,
            cem_smoothing: 1e-3,
            me_budget: 100,
            me_initial: 25,
            me_per_iteration: 5,
            variation_sigma: 0.1,
            selection_temperature: 1.0,
            grid_size: 50,
            behavior_reduction: Reduction::Final,
            policy_hidden: None,
        }
    }
}

impl PlannerConfig {
    pub fn with_kind(kind: PlannerKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("planner.horizon", self.horizon),
            ("planner.shooting_sequences", self.shooting_sequences),
            ("planner.cem_sequences", self.cem_sequences),
            ("planner.cem_elites", self.cem_elites),
            ("planner.me_budget", self.me_budget),
            ("planner.me_initial", self.me_initial),
            ("planner.me_per_iteration", self.me_per_iteration),
            ("planner.grid_size", self.grid_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.cem_elites > self.cem_sequences {
            return Err(Error::Config("planner.cem_elites exceeds planner.cem_sequences".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("planner.gamma must be in [0, 1]".into()));
        }
        if self.variation_sigma.is_nan()
            || self.variation_sigma < 0.0
            || self.selection_temperature.is_nan()
            || self.selection_temperature <= 0.0
        {
            return Err(Error::Config(
                "planner.variation_sigma must be >= 0 and planner.selection_temperature > 0".into(),
            ));
        }
        Ok(())
    }
}

/// What a planning call returns, with the figures that go to the planning
/// log.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub action: Action,
    pub best_return: f64,
    pub best_cost: f64,
    /// Fraction of behavior cells occupied, for archive-based planners.
    pub archive_fill: Option<f64>,
}

/// Dispatches to the configured planner.
pub fn plan<R: Rng + ?Sized>(
    ctx: &PlanContext,
    state: &[f64],
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<PlanOutcome> {
    match cfg.kind {
        PlannerKind::Rs => plan_rs(ctx, state, cfg, rng),
        PlannerKind::SafeRs => plan_srs(ctx, state, cfg, rng),
        PlannerKind::Me | PlannerKind::SafeMe | PlannerKind::ParetoSafeMe => {
            plan_me_family(ctx, state, cfg, rng).map(|(outcome, _)| outcome)
        }
        PlannerKind::Cem => plan_cem(ctx, state, cfg, rng, false),
        PlannerKind::Rcem => plan_cem(ctx, state, cfg, rng, true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in PlannerKind::ALL {
            assert_eq!(PlannerKind::parse(k.name()).unwrap(), k);
        }
        assert!(PlannerKind::parse("ppo").is_err());
    }

    #[test]
    fn ranking_orders() {
        let safe = Ranking::SafeFirst;
        assert_eq!(safe.compare((1.0, 0.0, 3), (9.0, 1.0, 0)), Ordering::Less);
        assert_eq!(safe.compare((1.0, 0.0, 3), (2.0, 0.0, 4)), Ordering::Greater);
        assert_eq!(safe.compare((2.0, 0.0, 3), (2.0, 0.0, 4)), Ordering::Less);
        assert_eq!(safe.compare((2.0, 1.0, 0), (1.0, 1.0 + 1e-14, 1)), Ordering::Less);
        let greedy = Ranking::RewardOnly;
        assert_eq!(greedy.compare((9.0, 1.0, 1), (1.0, 0.0, 0)), Ordering::Less);
    }

    #[test]
    fn defaults_match_reference_table() {
        let c = PlannerConfig::default();
        assert_eq!(
            (c.horizon, c.shooting_sequences, c.cem_sequences, c.cem_elites),
            (10, 100, 20, 10)
        );
        assert_eq!(
            (c.me_budget, c.me_initial, c.me_per_iteration, c.grid_size),
            (100, 25, 5, 50)
        );
        c.validate().unwrap();
    }
}

//! MAP-Elites over policy parameters, evaluated on the learned model.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;

use super::{
    non_dominated_sort, rollout_batch, ActionSource, Archive, Elite, PlanContext, PlanOutcome, PlannerConfig,
    PlannerKind, Ranking, Replacement, COST_TIE_TOL,
};
use crate::error::{Error, Result};
use crate::policy::{sample_policy, vary, BehaviorSpace, Policy, PolicyArch};

/// Parent-selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// Softmax over returns across all elites.
    RewardWeighted,
    /// Softmax over returns among zero-cost elites, topped up with fresh
    /// random policies.
    Safe,
    /// Fill front by front of the non-dominated sort.
    Pareto,
}

/// `k` distinct indices drawn sequentially with probability proportional to
/// `exp(score / temperature)` among those not yet drawn.
fn softmax_without_replacement<R: Rng + ?Sized>(scores: &[f64], k: usize, temperature: f64, rng: &mut R) -> Vec<usize> {
    let k = k.min(scores.len());
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut picked = Vec::with_capacity(k);
    while picked.len() < k {
        let top = remaining.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = remaining
            .iter()
            .map(|&i| {
                let w = ((scores[i] - top) / temperature).exp();
                if w.is_finite() {
                    w
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let pos = if total > 0.0 && total.is_finite() {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = weights.len() - 1;
            for (j, w) in weights.iter().enumerate() {
                if target < *w {
                    chosen = j;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..remaining.len())
        };
        picked.push(remaining.remove(pos));
    }
    picked
}

fn top_up<R: Rng + ?Sized>(mut chosen: Vec<Policy>, k: usize, arch: &Arc<PolicyArch>, rng: &mut R) -> Vec<Policy> {
    while chosen.len() < k {
        chosen.push(sample_policy(rng, arch));
    }
    chosen
}

pub fn select_reward_weighted<R: Rng + ?Sized>(
    archive: &Archive,
    k: usize,
    temperature: f64,
    arch: &Arc<PolicyArch>,
    rng: &mut R,
) -> Vec<Policy> {
    let elites: Vec<&Elite> = archive.elites().map(|(_, e)| e).collect();
    let scores: Vec<f64> = elites.iter().map(|e| e.ret).collect();
    let chosen = softmax_without_replacement(&scores, k, temperature, rng)
        .into_iter()
        .map(|i| elites[i].policy.clone())
        .collect();
    top_up(chosen, k, arch, rng)
}

/// Zero-cost elites only, reward-weighted; missing slots are fresh random
/// policies.
pub fn select_safe<R: Rng + ?Sized>(
    archive: &Archive,
    k: usize,
    temperature: f64,
    arch: &Arc<PolicyArch>,
    rng: &mut R,
) -> Vec<Policy> {
    let safe: Vec<&Elite> = archive
        .elites()
        .map(|(_, e)| e)
        .filter(|e| e.cost.abs() <= COST_TIE_TOL)
        .collect();
    let scores: Vec<f64> = safe.iter().map(|e| e.ret).collect();
    let chosen = softmax_without_replacement(&scores, k, temperature, rng)
        .into_iter()
        .map(|i| safe[i].policy.clone())
        .collect();
    top_up(chosen, k, arch, rng)
}

/// Whole fronts of the non-dominated sort, best first; the front that
/// overflows the roster is subsampled uniformly without replacement.
pub fn select_pareto<R: Rng + ?Sized>(archive: &Archive, k: usize, arch: &Arc<PolicyArch>, rng: &mut R) -> Vec<Policy> {
    let elites: Vec<&Elite> = archive.elites().map(|(_, e)| e).collect();
    let points: Vec<(f64, f64)> = elites.iter().map(|e| (e.cost, e.ret)).collect();
    let mut chosen = Vec::with_capacity(k);
    for front in non_dominated_sort(&points) {
        let room = k - chosen.len();
        if room == 0 {
            break;
        }
        if front.len() <= room {
            chosen.extend(front.iter().map(|&i| elites[i].policy.clone()));
        } else {
            let picks = index::sample(rng, front.len(), room);
            chosen.extend(picks.iter().map(|j| elites[front[j]].policy.clone()));
        }
    }
    top_up(chosen, k, arch, rng)
}

fn evaluate_into(
    ctx: &PlanContext,
    state: &[f64],
    cfg: &PlannerConfig,
    space: &BehaviorSpace,
    policies: Vec<Policy>,
    archive: &mut Archive,
) -> Result<()> {
    let sources: Vec<_> = policies.iter().map(ActionSource::Policy).collect();
    let results = rollout_batch(ctx.dynamics, ctx.objective, state, &sources, cfg.horizon, cfg.gamma)?;
    for (policy, res) in policies.into_iter().zip(results) {
        let descriptor = space.descriptor(res.states.view());
        archive.insert(Elite {
            policy,
            ret: res.ret,
            cost: res.cost,
            descriptor,
        });
    }
    Ok(())
}

/// Builds a fresh archive for one planning call: `me_initial` random
/// policies, then batches of `me_per_iteration` varied parents until
/// `me_budget` evaluations have been spent.
pub fn me_loop<R: Rng + ?Sized>(
    ctx: &PlanContext,
    state: &[f64],
    cfg: &PlannerConfig,
    rng: &mut R,
    selection: Selection,
    replacement: Replacement,
) -> Result<Archive> {
    let space = BehaviorSpace {
        grid: cfg.grid_size,
        reduction: cfg.behavior_reduction,
        ..ctx.behavior.clone()
    };
    let arch = ctx.policy_arch;
    if arch.input_dim != state.len() {
        return Err(Error::Dimension {
            what: "policy input",
            expected: state.len(),
            got: arch.input_dim,
        });
    }
    let mut archive = Archive::new(space.clone(), replacement);
    let initial = cfg.me_initial.min(cfg.me_budget);
    let first: Vec<Policy> = (0..initial).map(|_| sample_policy(rng, arch)).collect();
    evaluate_into(ctx, state, cfg, &space, first, &mut archive)?;
    let mut spent = initial;
    while spent < cfg.me_budget {
        let k = cfg.me_per_iteration.min(cfg.me_budget - spent);
        let parents = match selection {
            Selection::RewardWeighted => select_reward_weighted(&archive, k, cfg.selection_temperature, arch, rng),
            Selection::Safe => select_safe(&archive, k, cfg.selection_temperature, arch, rng),
            Selection::Pareto => select_pareto(&archive, k, arch, rng),
        };
        let children: Vec<Policy> = parents.iter().map(|p| vary(rng, p, cfg.variation_sigma)).collect();
        evaluate_into(ctx, state, cfg, &space, children, &mut archive)?;
        spent += k;
    }
    Ok(archive)
}

/// Best elite under `ranking`, ties to the lowest cell index.
pub fn best_elite(archive: &Archive, ranking: Ranking) -> Option<(usize, &Elite)> {
    archive
        .elites()
        .min_by(|(ca, a), (cb, b)| ranking.compare((a.ret, a.cost, *ca), (b.ret, b.cost, *cb)))
}

/// ME, S-ME or PS-ME depending on `cfg.kind`. Returns the action of the best
/// elite at `state` together with the archive it came from.
pub fn plan_me_family<R: Rng + ?Sized>(
    ctx: &PlanContext,
    state: &[f64],
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<(PlanOutcome, Archive)> {
    let (selection, replacement) = match cfg.kind {
        PlannerKind::Me => (Selection::RewardWeighted, Replacement::RewardOnly),
        PlannerKind::SafeMe => (Selection::Safe, Replacement::Safe),
        PlannerKind::ParetoSafeMe => (Selection::Pareto, Replacement::Safe),
        other => {
            return Err(Error::Config(format!(
                "planner `{}` is not a MAP-Elites planner",
                other.name()
            )))
        }
    };
    let archive = me_loop(ctx, state, cfg, rng, selection, replacement)?;
    let (_, best) = best_elite(&archive, cfg.kind.ranking()).expect("budget is positive, archive is not empty");
    let outcome = PlanOutcome {
        action: best.policy.act(state),
        best_return: best.ret,
        best_cost: best.cost,
        archive_fill: Some(archive.fill_ratio()),
    };
    Ok((outcome, archive))
}

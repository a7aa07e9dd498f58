//! Random shooting: sample action sequences uniformly, keep the best one's
//! first action.

use rand::Rng;

use super::{rollout_batch, ActionSource, PlanContext, PlanOutcome, PlannerConfig, Ranking, RolloutResult};
use crate::env::{Action, ActionSpace};
use crate::error::Result;

pub fn sample_sequences<R: Rng + ?Sized>(
    space: &ActionSpace,
    n: usize,
    horizon: usize,
    rng: &mut R,
) -> Vec<Vec<Action>> {
    (0..n)
        .map(|_| (0..horizon).map(|_| space.sample(rng)).collect())
        .collect()
}

/// Index of the best result under `ranking`; ties go to the lowest index.
pub fn best_index(results: &[RolloutResult], ranking: Ranking) -> usize {
    (0..results.len())
        .min_by(|&a, &b| {
            ranking.compare(
                (results[a].ret, results[a].cost, a),
                (results[b].ret, results[b].cost, b),
            )
        })
        .expect("at least one candidate")
}

fn shoot<R: Rng + ?Sized>(
    ctx: &PlanContext,
    state: &[f64],
    cfg: &PlannerConfig,
    rng: &mut R,
    ranking: Ranking,
) -> Result<PlanOutcome> {
    let seqs = sample_sequences(ctx.action_space, cfg.shooting_sequences, cfg.horizon, rng);
    let sources: Vec<_> = seqs.iter().map(|s| ActionSource::Sequence(s)).collect();
    let results = rollout_batch(ctx.dynamics, ctx.objective, state, &sources, cfg.horizon, cfg.gamma)?;
    let best = best_index(&results, ranking);
    Ok(PlanOutcome {
        action: seqs[best][0],
        best_return: results[best].ret,
        best_cost: results[best].cost,
        archive_fill: None,
    })
}

/// Unsafe random shooting: highest return wins.
pub fn plan_rs<R: Rng + ?Sized>(
    ctx: &PlanContext,
    state: &[f64],
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<PlanOutcome> {
    shoot(ctx, state, cfg, rng, Ranking::RewardOnly)
}

/// Safe random shooting: among the lowest-cost sequences, highest return
/// wins.
pub fn plan_srs<R: Rng + ?Sized>(
    ctx: &PlanContext,
    state: &[f64],
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<PlanOutcome> {
    shoot(ctx, state, cfg, rng, Ranking::SafeFirst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::fixtures::{fixture_ctx, FirstActionFixture};
    use crate::rng::seeded;

    #[test]
    fn single_sequence_is_returned_as_is() {
        let fx = FirstActionFixture::new(|_a0| (0.0, 0.0));
        let ctx = fixture_ctx(&fx);
        let cfg = PlannerConfig {
            shooting_sequences: 1,
            ..PlannerConfig::default()
        };
        let expected = sample_sequences(ctx.action_space, 1, cfg.horizon, &mut seeded(3))[0][0];
        assert_eq!(
            plan_srs(&ctx, &fx.start(), &cfg, &mut seeded(3)).unwrap().action,
            expected
        );
        assert_eq!(
            plan_rs(&ctx, &fx.start(), &cfg, &mut seeded(3)).unwrap().action,
            expected
        );
    }

    #[test]
    fn safe_shooting_avoids_costly_first_actions() {
        let fx = FirstActionFixture::new(|a0| (0.0, if a0 > 0.0 { 1.0 } else { 0.0 }));
        let ctx = fixture_ctx(&fx);
        let cfg = PlannerConfig::default();
        for seed in 0..50 {
            let out = plan_srs(&ctx, &fx.start(), &cfg, &mut seeded(seed)).unwrap();
            assert!(out.action <= 0.0);
            assert_eq!(out.best_cost, 0.0);
        }
    }

    #[test]
    fn greedy_shooting_prefers_small_first_actions_when_rewarded() {
        let fx = FirstActionFixture::new(|a0: f64| (-a0.abs(), 0.0));
        let ctx = fixture_ctx(&fx);
        let cfg = PlannerConfig::default();
        let seqs = sample_sequences(ctx.action_space, cfg.shooting_sequences, cfg.horizon, &mut seeded(9));
        let smallest = seqs
            .iter()
            .map(|s| s[0])
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap();
        assert_eq!(
            plan_rs(&ctx, &fx.start(), &cfg, &mut seeded(9)).unwrap().action,
            smallest
        );
    }

    #[test]
    fn differential_safety() {
        // Reward grows with a0 but positive a0 is unsafe.
        let fx = FirstActionFixture::new(|a0| (a0, if a0 > 0.0 { 1.0 } else { 0.0 }));
        let ctx = fixture_ctx(&fx);
        let cfg = PlannerConfig::default();
        for seed in 0..20 {
            let greedy = plan_rs(&ctx, &fx.start(), &cfg, &mut seeded(seed)).unwrap();
            let safe = plan_srs(&ctx, &fx.start(), &cfg, &mut seeded(seed)).unwrap();
            assert!(greedy.action > 0.0 && greedy.best_cost > 0.0);
            assert!(safe.action <= 0.0 && safe.best_cost == 0.0);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let fx = FirstActionFixture::new(|a0: f64| (-(a0 - 0.3).powi(2), 0.0));
        let ctx = fixture_ctx(&fx);
        let cfg = PlannerConfig::default();
        let a = plan_srs(&ctx, &fx.start(), &cfg, &mut seeded(1)).unwrap();
        let b = plan_srs(&ctx, &fx.start(), &cfg, &mut seeded(1)).unwrap();
        assert_eq!(a, b);
    }
}

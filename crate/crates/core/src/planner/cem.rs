//! Cross-entropy method over action sequences (CEM, and RCEM with the
//! safe ranking).

use rand::Rng;
use rand_distr::StandardNormal;

use super::{rollout_batch, ActionSource, PlanContext, PlanOutcome, PlannerConfig, Ranking, RolloutResult};
use crate::env::{Action, ActionSpace};
use crate::error::Result;

enum Sampler {
    Gaussian {
        lo: f64,
        hi: f64,
        mean: Vec<f64>,
        std: Vec<f64>,
    },
    Categorical {
        values: Vec<f64>,
        probs: Vec<Vec<f64>>,
    },
}

impl Sampler {
    fn new(space: &ActionSpace, horizon: usize) -> Self {
        match space {
            ActionSpace::Continuous { lo, hi } => Sampler::Gaussian {
                lo: *lo,
                hi: *hi,
                mean: vec![0.5 * (lo + hi); horizon],
                std: vec![0.5 * (hi - lo); horizon],
            },
            ActionSpace::Discrete(values) => Sampler::Categorical {
                values: values.clone(),
                probs: vec![vec![1.0 / values.len() as f64; values.len()]; horizon],
            },
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Action> {
        match self {
            Sampler::Gaussian { lo, hi, mean, std } => mean
                .iter()
                .zip(std)
                .map(|(m, s)| (m + s * rng.sample::<f64, _>(StandardNormal)).clamp(*lo, *hi))
                .collect(),
            Sampler::Categorical { values, probs } => probs
                .iter()
                .map(|p| {
                    let mut u: f64 = rng.random();
                    for (v, w) in values.iter().zip(p) {
                        if u < *w {
                            return *v;
                        }
                        u -= w;
                    }
                    *values.last().expect("non-empty action set")
                })
                .collect(),
        }
    }

    fn refit(&mut self, elites: &[&Vec<Action>], std_floor: f64, smoothing: f64) {
        let n = elites.len() as f64;
        match self {
            Sampler::Gaussian { mean, std, .. } => {
                for t in 0..mean.len() {
                    let m = elites.iter().map(|e| e[t]).sum::<f64>() / n;
                    let var = elites.iter().map(|e| (e[t] - m).powi(2)).sum::<f64>() / n;
                    mean[t] = m;
                    std[t] = var.sqrt().max(std_floor);
                }
            }
            Sampler::Categorical { values, probs } => {
                let k = values.len() as f64;
                for (t, p) in probs.iter_mut().enumerate() {
                    for (j, v) in values.iter().enumerate() {
                        let count = elites.iter().filter(|e| e[t] == *v).count() as f64;
                        p[j] = (count + smoothing) / (n + k * smoothing);
                    }
                }
            }
        }
    }

    /// First action of the distribution's mean (continuous) or mode
    /// (discrete, lowest index on ties).
    fn first_action(&self) -> Action {
        match self {
            Sampler::Gaussian { lo, hi, mean, .. } => mean[0].clamp(*lo, *hi),
            Sampler::Categorical { values, probs } => {
                let mut best = 0;
                for (j, p) in probs[0].iter().enumerate() {
                    if *p > probs[0][best] {
                        best = j;
                    }
                }
                values[best]
            }
        }
    }

    #[cfg(test)]
    fn mean(&self) -> &[f64] {
        match self {
            Sampler::Gaussian { mean, .. } => mean,
            Sampler::Categorical { .. } => &[],
        }
    }
}

fn ranked(results: &[RolloutResult], ranking: Ranking) -> Vec<usize> {
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| {
        ranking.compare(
            (results[a].ret, results[a].cost, a),
            (results[b].ret, results[b].cost, b),
        )
    });
    order
}

fn run<R: Rng + ?Sized>(
    ctx: &PlanContext,
    state: &[f64],
    cfg: &PlannerConfig,
    rng: &mut R,
    safe: bool,
) -> Result<(PlanOutcome, Sampler)> {
    let ranking = if safe { Ranking::SafeFirst } else { Ranking::RewardOnly };
    let mut sampler = Sampler::new(ctx.action_space, cfg.horizon);
    let rounds = cfg.cem_iterations.max(1);
    let mut outcome = None;
    for _ in 0..rounds {
        let seqs: Vec<Vec<Action>> = (0..cfg.cem_sequences).map(|_| sampler.sample(rng)).collect();
        let sources: Vec<_> = seqs.iter().map(|s| ActionSource::Sequence(s)).collect();
        let results = rollout_batch(ctx.dynamics, ctx.objective, state, &sources, cfg.horizon, cfg.gamma)?;
        let order = ranked(&results, ranking);
        let best = order[0];
        if cfg.cem_iterations == 0 {
            // Degenerate case: plain shooting over one population.
            outcome = Some(PlanOutcome {
                action: seqs[best][0],
                best_return: results[best].ret,
                best_cost: results[best].cost,
                archive_fill: None,
            });
            break;
        }
        let elites: Vec<&Vec<Action>> = order[..cfg.cem_elites].iter().map(|&i| &seqs[i]).collect();
        sampler.refit(&elites, cfg.cem_std_floor, cfg.cem_smoothing);
        outcome = Some(PlanOutcome {
            action: sampler.first_action(),
            best_return: results[best].ret,
            best_cost: results[best].cost,
            archive_fill: None,
        });
    }
    Ok((outcome.expect("at least one round"), sampler))
}

/// CEM (`safe = false`, ranked by return) or RCEM (`safe = true`, lowest
/// cost first). Returns the first action of the final distribution; with
/// zero iterations, the first action of the best sampled sequence.
pub fn plan_cem<R: Rng + ?Sized>(
    ctx: &PlanContext,
    state: &[f64],
    cfg: &PlannerConfig,
    rng: &mut R,
    safe: bool,
) -> Result<PlanOutcome> {
    run(ctx, state, cfg, rng, safe).map(|(o, _)| o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::best_index;
    use crate::planner::fixtures::{fixture_ctx, ActionObjectiveFixture, FirstActionFixture};
    use crate::rng::seeded;

    #[test]
    fn zero_iterations_is_shooting_over_one_population() {
        let fx = FirstActionFixture::new(|a0| (a0, if a0 > 0.5 { 1.0 } else { 0.0 }));
        let ctx = fixture_ctx(&fx);
        let cfg = PlannerConfig {
            cem_iterations: 0,
            ..PlannerConfig::default()
        };
        for (safe, ranking) in [(false, Ranking::RewardOnly), (true, Ranking::SafeFirst)] {
            for seed in 0..10 {
                // Same draws as a Gaussian population centred on 0 with std 2.
                let out = plan_cem(&ctx, &fx.start(), &cfg, &mut seeded(seed), safe).unwrap();
                let mut rng = seeded(seed);
                let sampler = Sampler::new(&fx.action_space, cfg.horizon);
                let seqs: Vec<_> = (0..20).map(|_| sampler.sample(&mut rng)).collect();
                let sources: Vec<_> = seqs.iter().map(|s| ActionSource::Sequence(s)).collect();
                let results = rollout_batch(&fx, &fx, &fx.start(), &sources, cfg.horizon, 1.0).unwrap();
                assert_eq!(out.action, seqs[best_index(&results, ranking)][0]);
            }
        }
    }

    #[test]
    fn converges_on_a_quadratic() {
        let fx = ActionObjectiveFixture::new(ActionSpace::Continuous { lo: -2.0, hi: 2.0 }, |a: f64| {
            (-(a - 0.7).powi(2), 0.0)
        });
        let cfg = PlannerConfig {
            horizon: 1,
            cem_iterations: 10,
            ..PlannerConfig::default()
        };
        for seed in 0..20 {
            let (out, sampler) = run(&fx.ctx(), &[0.0], &cfg, &mut seeded(seed), false).unwrap();
            assert!((out.action - 0.7).abs() < 0.05, "seed {seed}: {}", out.action);
            assert_eq!(out.action, sampler.mean()[0]);
        }
    }

    #[test]
    fn safe_variant_avoids_the_tempting_unsafe_sequence() {
        let fx = FirstActionFixture::new(|a0| (a0, if a0 > 0.0 { 1.0 } else { 0.0 }));
        let ctx = fixture_ctx(&fx);
        let cfg = PlannerConfig::default();
        for seed in 0..20 {
            let greedy = plan_cem(&ctx, &fx.start(), &cfg, &mut seeded(seed), false).unwrap();
            let safe = plan_cem(&ctx, &fx.start(), &cfg, &mut seeded(seed), true).unwrap();
            assert!(greedy.action > 0.0, "seed {seed}: {}", greedy.action);
            assert!(safe.action <= 0.0, "seed {seed}: {}", safe.action);
        }
    }

    #[test]
    fn discrete_cem_finds_the_rewarded_action() {
        let fx = ActionObjectiveFixture::new(ActionSpace::Discrete(vec![-1.0, 0.0, 1.0]), |a: f64| {
            (if a == 1.0 { 1.0 } else { 0.0 }, 0.0)
        });
        let cfg = PlannerConfig {
            horizon: 1,
            ..PlannerConfig::default()
        };
        for seed in 0..10 {
            let out = plan_cem(&fx.ctx(), &[0.0], &cfg, &mut seeded(seed), false).unwrap();
            assert_eq!(out.action, 1.0);
        }
    }
}

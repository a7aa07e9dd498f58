//! Quick oracle and invariant checks runnable from the command line.

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;

use crate::env::{EnvConfig, Environment, SafePendulum};
use crate::metrics::{mar, mrcp, p_unsafe, p_unsafe_transient};
use crate::model::{DynamicsModel, Normalizer, TrainConfig, GRAD_CHECK_STEP};
use crate::planner::{
    dominates, non_dominated_sort, plan_me_family, FnDynamics, PlanContext, PlannerConfig, PlannerKind,
};
use crate::policy::PolicyArch;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

/// Front index of every point by repeatedly peeling the points no remaining
/// point dominates.
fn peel_fronts(points: &[(f64, f64)]) -> Vec<usize> {
    let mut label = vec![usize::MAX; points.len()];
    let mut front = 0;
    while label.contains(&usize::MAX) {
        let current: Vec<usize> = (0..points.len())
            .filter(|&i| label[i] == usize::MAX)
            .filter(|&i| !(0..points.len()).any(|j| label[j] == usize::MAX && dominates(points[j], points[i])))
            .collect();
        for i in current {
            label[i] = front;
        }
        front += 1;
    }
    label
}

fn pareto_oracle() -> Check {
    let mut rng = seeded(0x5e1f);
    let instances = 200;
    for k in 0..instances {
        let n = rng.random_range(1..=40);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0..6) as f64, rng.random_range(0..6) as f64))
            .collect();
        let mut fast = vec![0; n];
        for (f, members) in non_dominated_sort(&points).into_iter().enumerate() {
            for i in members {
                fast[i] = f;
            }
        }
        if fast != peel_fronts(&points) {
            return check(
                "non-dominated sort vs peeling oracle",
                false,
                format!("instance {k} differs"),
            );
        }
    }
    check(
        "non-dominated sort vs peeling oracle",
        true,
        format!("{instances} instances"),
    )
}

fn policy_sizes() -> Check {
    let counts: Vec<usize> = ["safe_pendulum", "safe_acrobot"]
        .iter()
        .map(|name| {
            let env = EnvConfig::by_name(name).expect("known environment").build();
            let spec = env.spec();
            PolicyArch::new(
                spec.observation_dim,
                spec.policy_hidden.clone(),
                spec.action_space.clone(),
            )
            .param_count()
        })
        .collect();
    check(
        "policy parameter counts",
        counts == [26, 83],
        format!("pendulum {}, acrobot {}", counts[0], counts[1]),
    )
}

fn gradients() -> Check {
    let env = EnvConfig::by_name("safe_pendulum").expect("known environment").build();
    let spec = env.spec();
    let model = DynamicsModel::new(
        spec.observation_dim,
        spec.action_space.clone(),
        &TrainConfig::default(),
        &mut seeded(7),
    );
    let err = model.gradient_check(10, GRAD_CHECK_STEP, &mut seeded(8));
    check(
        "model gradients vs finite differences",
        err <= 1e-4,
        format!("max relative error {err:.2e}"),
    )
}

fn metric_fixtures() -> Check {
    let ok = mar(&[1.0, 2.0, 3.0, 4.0]).ok() == Some(3.5)
        && mar(&[0.0, 0.0, 6.0]).ok() == Some(3.0)
        && mrcp(&[-5.0, -3.0, -2.0], -2.5, 200, 200) == Some(600)
        && mrcp(&[-5.0, -3.0], -2.5, 200, 200).is_none()
        && p_unsafe(&[[1u8; 2].as_slice(), &[0u8; 198]].concat()) == 1.0
        && p_unsafe_transient(&[10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).ok() == Some(5.0);
    check("metric formulas on hand-computed series", ok, "")
}

fn normalizer() -> Check {
    let mut rng = seeded(9);
    let data = Array2::from_shape_simple_fn((100, 4), || rng.random_range(-50.0..50.0));
    let norm = Normalizer::fit(data.view());
    let back = norm.denormalize(norm.normalize(data.view()).view());
    let err = (&back - &data).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    check(
        "normalize/denormalize round trip",
        err <= 1e-10,
        format!("max error {err:.2e}"),
    )
}

fn archive_replay() -> Check {
    let pendulum = SafePendulum::new(Default::default());
    let spec = pendulum.spec().clone();
    let dynamics = FnDynamics(|s: &[f64], a: f64| {
        let state = SafePendulum::state_from(s[1].atan2(s[0]), s[2]);
        pendulum
            .step(&state, a)
            .expect("continuous actions are clamped")
            .next_state
            .observation
    });
    let arch = Arc::new(PolicyArch::new(
        3,
        spec.policy_hidden.clone(),
        spec.action_space.clone(),
    ));
    let ctx = PlanContext {
        dynamics: &dynamics,
        objective: &pendulum,
        action_space: &spec.action_space,
        behavior: &spec.behavior,
        policy_arch: &arch,
    };
    let cfg = PlannerConfig::with_kind(PlannerKind::SafeMe);
    let start = SafePendulum::state_from(0.3, 0.0).observation;
    match plan_me_family(&ctx, &start, &cfg, &mut seeded(10)) {
        Ok((_, archive)) => {
            let r = archive.replay();
            check(
                "archive replay after a safe MAP-Elites call",
                r.is_clean() && r.events == cfg.me_budget,
                format!(
                    "{} events, {} rule violations, {} mismatches",
                    r.events, r.rule_violations, r.content_mismatches
                ),
            )
        }
        Err(e) => check("archive replay after a safe MAP-Elites call", false, e.to_string()),
    }
}

/// Runs every check; none of them takes more than a second or so.
pub fn run_all() -> Vec<Check> {
    vec![
        pareto_oracle(),
        policy_sizes(),
        gradients(),
        metric_fixtures(),
        normalizer(),
        archive_replay(),
    ]
}

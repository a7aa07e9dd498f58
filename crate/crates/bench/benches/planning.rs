use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use ndarray::Array2;
use rand::Rng;
use safeplan_core::harness::{run_episode_random, ExperimentConfig, Profile};
use safeplan_core::planner::non_dominated_sort;
use safeplan_core::rng::seeded;
use safeplan_core::{plan, DynamicsModel, EnvConfig, PlanContext, PlannerConfig, PlannerKind, TrainConfig};

fn trained_pendulum() -> (Box<dyn safeplan_core::Environment>, DynamicsModel) {
    let env = EnvConfig::by_name("safe_pendulum").unwrap().build();
    let mut data = Vec::new();
    for e in 0..2 {
        data.extend(run_episode_random(env.as_ref(), &mut seeded(e)).unwrap());
    }
    let cfg = TrainConfig {
        passes: 50,
        ..TrainConfig::default()
    };
    let spec = env.spec();
    let mut model = DynamicsModel::new(spec.observation_dim, spec.action_space.clone(), &cfg, &mut seeded(10));
    model.train(&data, &cfg, &mut seeded(11)).unwrap();
    (env, model)
}

fn model_prediction(c: &mut Criterion) {
    let (_, model) = trained_pendulum();
    let mut rng = seeded(1);
    let n = 1000;
    let states = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
    let actions: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut group = c.benchmark_group("model");
    group.throughput(Throughput::Elements(n as u64));
    group.bench_function("predict_batch_1000", |b| {
        b.iter(|| model.predict_batch(states.view(), &actions).unwrap())
    });
    group.finish();
}

fn pareto_sort(c: &mut Criterion) {
    let mut rng = seeded(2);
    let points: Vec<(f64, f64)> = (0..1000)
        .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
        .collect();
    c.bench_function("non_dominated_sort_1000", |b| b.iter(|| non_dominated_sort(&points)));
}

fn planner_calls(c: &mut Criterion) {
    let (env, model) = trained_pendulum();
    let spec = env.spec().clone();
    let state = env.reset_with(&mut seeded(3)).observation;
    let mut group = c.benchmark_group("plan");
    group.sample_size(10);
    for kind in [PlannerKind::SafeRs, PlannerKind::SafeMe, PlannerKind::Rcem] {
        let exp = ExperimentConfig {
            planner: PlannerConfig::with_kind(kind),
            ..Profile::Desk.defaults()
        };
        let cfg = &exp.planner;
        let behavior = exp.behavior_space(&spec);
        let arch = exp.policy_arch(&spec);
        let ctx = PlanContext {
            dynamics: &model,
            objective: env.as_ref(),
            action_space: &spec.action_space,
            behavior: &behavior,
            policy_arch: &arch,
        };
        let mut step = 0u64;
        group.bench_function(kind.name(), |b| {
            b.iter_batched(
                || {
                    step += 1;
                    seeded(step)
                },
                |mut rng| plan(&ctx, &state, cfg, &mut rng).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, model_prediction, pareto_sort, planner_calls);
criterion_main!(benches);

//! Safe model-based planning: learned dynamics, safety-aware model-predictive
//! planners, and the iterated-batch experiment harness around them.

pub mod env;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod planner;
pub mod policy;
pub mod rng;
pub mod selftest;
pub mod trace;

pub use env::{Action, ActionSpace, EnvConfig, EnvSpec, EnvState, Environment, Objective, StepOutcome};
pub use error::{Error, Result};
pub use metrics::{EpochSeries, Interval, MetricsReport, SeedMetrics};
pub use model::{DynamicsModel, Loss, TrainConfig, TrainReport};
pub use planner::{plan, PlanContext, PlanOutcome, PlannerConfig, PlannerKind, Ranking};
pub use policy::{BehaviorDescriptor, BehaviorSpace, Policy, PolicyArch};
pub use trace::{Trace, Transition};

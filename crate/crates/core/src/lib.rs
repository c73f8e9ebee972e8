//! Maintenance engine for dynamic benchmarks.
//!
//! Evaluation outcomes live in a versioned [`store::EvalStore`]. A Rasch model
//! ([`rasch`]) fitted on everything observed so far lets [`estimator`] predict
//! the scores of models that were not re-run on a new version, and
//! [`planner`] decides which models are worth re-running under a budget.
//! [`filters`] implements the blind-test and agreement question filters over
//! pluggable judges, and [`simlab`] replays the whole pipeline on seeded
//! synthetic worlds.

mod error;
mod ids;

pub mod estimator;
pub mod filters;
pub mod planner;
pub mod rasch;
pub mod rng;
pub mod simlab;
pub mod store;

pub use error::{Error, Result};
pub use estimator::{Leaderboard, Provenance, ScoreEntry};
pub use ids::{ModelId, SampleId};
pub use planner::{CostHint, PlannerConfig, ReevalPlan};
pub use rasch::{AbilityVector, DifficultyVector, FitConfig, Observations, RaschFit};
pub use simlab::{ExperimentResult, SimWorld, WorldConfig};
pub use store::{BenchmarkVersion, EvalOutcome, EvalStore, Sample};

//! Seeded synthetic Rasch worlds and replays of the efficient re-evaluation
//! study: a chronological split into two versions, budgeted re-evaluation on
//! the second, a refit on everything observed, and prediction error for the
//! models that were not re-run.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_score, mean_absolute_error, spearman_rank_correlation};
use crate::ids::{ModelId, SampleId};
use crate::planner::{plan_reevaluation, PlannerConfig, DEFAULT_SIMILARITY_EPSILON};
use crate::rasch::{
    fit, predict_prob, AbilityVector, DifficultyVector, FitConfig, Observations, RaschFit,
};
use crate::rng::substream;
use crate::store::{EvalOutcome, EvalStore, Sample};

/// Share of each domain's oldest samples that forms the first version.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub num_models: usize,
    pub num_domains: usize,
    pub samples_per_domain: usize,
    pub theta_mean: f64,
    pub theta_sd: f64,
    pub beta_mean: f64,
    pub beta_sd: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        // theta_sd = 1.2 spreads model accuracies over roughly 20%-80%.
        Self {
            num_models: 17,
            num_domains: 10,
            samples_per_domain: 700,
            theta_mean: 0.0,
            theta_sd: 1.2,
            beta_mean: 0.0,
            beta_sd: 1.0,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_models == 0 || self.num_domains == 0 || self.samples_per_domain == 0 {
            return Err(Error::InvalidConfig("world counts must be positive".into()));
        }
        for (name, v) in [("theta_sd", self.theta_sd), ("beta_sd", self.beta_sd)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !self.theta_mean.is_finite() || !self.beta_mean.is_finite() {
            return Err(Error::InvalidConfig("means must be finite".into()));
        }
        Ok(())
    }
}

/// A synthetic population with its full response matrix.
#[derive(Debug, Clone)]
pub struct SimWorld {
    pub config: WorldConfig,
    models: Vec<ModelId>,
    /// Domain-major, oldest first within each domain.
    samples: Vec<Sample>,
    theta: Vec<f64>,
    beta: Vec<f64>,
    domain: Vec<usize>,
    order: Vec<usize>,
    /// Row-major `models × samples`.
    outcomes: Vec<bool>,
}

pub fn domain_tag(d: usize) -> String {
    format!("domain-{d:02}")
}

/// Draws true parameters and every outcome. Abilities come from the
/// `"theta"` stream, difficulties and outcomes of domain `d` from the
/// `("beta", d)` and `("outcomes", d)` streams.
pub fn generate_world(config: &WorldConfig) -> Result<SimWorld> {
    config.validate()?;
    let theta_dist = Normal::new(config.theta_mean, config.theta_sd)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let beta_dist = Normal::new(config.beta_mean, config.beta_sd)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let models: Vec<ModelId> = (0..config.num_models)
        .map(|i| ModelId::new(format!("model-{i:02}")).expect("valid id"))
        .collect();
    let mut rng = substream(config.seed, "theta", 0);
    let theta: Vec<f64> = (0..config.num_models)
        .map(|_| theta_dist.sample(&mut rng))
        .collect();

    let n = config.num_domains * config.samples_per_domain;
    let mut samples = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    let mut domain = Vec::with_capacity(n);
    let mut order = Vec::with_capacity(n);
    let mut columns: Vec<Vec<bool>> = Vec::with_capacity(n);
    for d in 0..config.num_domains {
        let mut beta_rng = substream(config.seed, "beta", d as u64);
        let mut outcome_rng = substream(config.seed, "outcomes", d as u64);
        for k in 0..config.samples_per_domain {
            let b = beta_dist.sample(&mut beta_rng);
            let id = SampleId::new(format!("d{d:02}/s{k:05}")).expect("valid id");
            samples.push(Sample::tagged(id, domain_tag(d)));
            beta.push(b);
            domain.push(d);
            order.push(k);
            columns.push(
                theta
                    .iter()
                    .map(|&t| outcome_rng.random::<f64>() < predict_prob(t, b).expect("finite"))
                    .collect(),
            );
        }
    }
    let mut outcomes = vec![false; config.num_models * n];
    for (j, column) in columns.iter().enumerate() {
        for (i, &y) in column.iter().enumerate() {
            outcomes[i * n + j] = y;
        }
    }
    Ok(SimWorld {
        config: *config,
        models,
        samples,
        theta,
        beta,
        domain,
        order,
        outcomes,
    })
}

impl SimWorld {
    pub fn models(&self) -> &[ModelId] {
        &self.models
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn true_theta(&self) -> AbilityVector {
        AbilityVector(
            self.models
                .iter()
                .cloned()
                .zip(self.theta.iter().copied())
                .collect(),
        )
    }

    pub fn true_beta(&self) -> DifficultyVector {
        DifficultyVector(
            self.samples
                .iter()
                .map(|s| s.id.clone())
                .zip(self.beta.iter().copied())
                .collect(),
        )
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn outcome(&self, model: usize, sample: usize) -> bool {
        self.outcomes[model * self.samples.len() + sample]
    }

    pub fn domain_of(&self, sample: usize) -> usize {
        self.domain[sample]
    }

    /// Chronological position of a sample within its domain.
    pub fn order_of(&self, sample: usize) -> usize {
        self.order[sample]
    }

    /// Observed accuracy of `model` over the listed sample indices.
    pub fn accuracy(&self, model: usize, samples: &[usize]) -> f64 {
        let correct = samples.iter().filter(|&&j| self.outcome(model, j)).count();
        correct as f64 / samples.len() as f64
    }

    fn outcomes_for(&self, models: &[usize], samples: &[usize]) -> Vec<EvalOutcome> {
        models
            .iter()
            .flat_map(|&i| {
                samples.iter().map(move |&j| {
                    EvalOutcome::new(
                        self.models[i].clone(),
                        self.samples[j].id.clone(),
                        self.outcome(i, j),
                    )
                })
            })
            .collect()
    }

    /// Sample indices of the first and second version: per domain, the
    /// `⌈fraction · n⌉` oldest samples go first.
    pub fn split_indices(&self, train_fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train fraction {train_fraction} must lie strictly between 0 and 1"
            )));
        }
        let mut per_domain: Vec<Vec<usize>> = vec![Vec::new(); self.config.num_domains];
        for j in 0..self.samples.len() {
            per_domain[self.domain[j]].push(j);
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for mut members in per_domain {
            members.sort_by_key(|&j| self.order[j]);
            // Guard against 0.15 * 100 = 15.000000000000002.
            let cut = ((train_fraction * members.len() as f64) - 1e-9).ceil() as usize;
            train.extend_from_slice(&members[..cut]);
            test.extend_from_slice(&members[cut..]);
        }
        Ok((train, test))
    }
}

/// Partition of the world's samples into the first (older) and second version.
pub fn chronological_split(
    world: &SimWorld,
    train_fraction: f64,
) -> Result<(Vec<SampleId>, Vec<SampleId>)> {
    let (train, test) = world.split_indices(train_fraction)?;
    let ids = |idx: Vec<usize>| {
        idx.into_iter()
            .map(|j| world.samples[j].id.clone())
            .collect()
    };
    Ok((ids(train), ids(test)))
}

/// How the re-evaluated models are picked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    /// Difficulty-quantile anchors and Fisher information.
    Fisher { similarity_epsilon: f64 },
    /// Uniformly at random, seeded; a baseline.
    UniformRandom { seed: u64 },
}

impl Default for Selection {
    fn default() -> Self {
        Selection::Fisher {
            similarity_epsilon: DEFAULT_SIMILARITY_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainResult {
    pub domain: String,
    pub mae_points: f64,
    pub mad_points: f64,
    pub test_samples: usize,
}

/// Evaluation counts on the second version against re-running every model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSavings {
    pub performed: usize,
    pub full_baseline: usize,
    /// `1 − performed / full_baseline`.
    pub saving: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub per_domain: Vec<DomainResult>,
    pub overall_mae_points: f64,
    pub overall_mad_points: f64,
    pub spearman: f64,
    pub budget: usize,
    pub seed: u64,
    /// Models whose second-version score was estimated. Zero means every model
    /// was re-evaluated and the error figures are reported as 0.
    pub test_models: usize,
    pub reevaluated: Vec<ModelId>,
    pub savings: EvaluationSavings,
}

impl ExperimentResult {
    /// `domain,mae_points,mad_points` rows plus `overall,<mae>,<spearman>`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("domain,mae_points,mad_points\n");
        for d in &self.per_domain {
            let _ = writeln!(out, "{},{:.3},{:.3}", d.domain, d.mae_points, d.mad_points);
        }
        let _ = writeln!(
            out,
            "overall,{:.3},{:.4}",
            self.overall_mae_points, self.spearman
        );
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Runs the two-version study on explicit sample index sets.
pub fn run_experiment(
    world: &SimWorld,
    train: &[usize],
    test: &[usize],
    budget: usize,
    selection: Selection,
    fit_config: &FitConfig,
    seed: u64,
) -> Result<ExperimentResult> {
    let num_models = world.models.len();
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    if budget > num_models {
        return Err(Error::BudgetTooLarge {
            budget,
            available: num_models,
            what: "model count",
        });
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyInput);
    }
    let all_models: Vec<usize> = (0..num_models).collect();
    let roster: BTreeSet<ModelId> = world.models.iter().cloned().collect();
    let samples_of = |idx: &[usize]| idx.iter().map(|&j| world.samples[j].clone()).collect();

    let mut store = EvalStore::new();
    store.add_version(
        samples_of(train),
        roster.clone(),
        BTreeSet::new(),
        roster.clone(),
    )?;
    store.record_outcomes(0, &world.outcomes_for(&all_models, train))?;

    let chosen: Vec<ModelId> = match selection {
        Selection::Fisher { similarity_epsilon } => {
            let first = fit(&Observations::from_store(&store, 0)?, fit_config)?;
            let config = PlannerConfig {
                budget,
                similarity_epsilon,
            };
            plan_reevaluation(&store, &first, &config, &BTreeSet::new(), &roster, &[])?
                .chosen_models
        }
        Selection::UniformRandom { seed } => {
            let mut rng = substream(seed, "random-selection", 0);
            let mut picked = rand::seq::index::sample(&mut rng, num_models, budget).into_vec();
            picked.sort_unstable();
            picked
                .into_iter()
                .map(|i| world.models[i].clone())
                .collect()
        }
    };
    let chosen_idx: Vec<usize> = chosen
        .iter()
        .map(|m| {
            world
                .models
                .iter()
                .position(|x| x == m)
                .expect("roster model")
        })
        .collect();
    store.add_version(
        samples_of(test),
        BTreeSet::new(),
        chosen.iter().cloned().collect(),
        roster.clone(),
    )?;
    store.record_outcomes(1, &world.outcomes_for(&chosen_idx, test))?;
    let refit = fit(&Observations::from_store(&store, 1)?, fit_config)?;

    let held_out: Vec<usize> = all_models
        .iter()
        .copied()
        .filter(|i| !chosen_idx.contains(i))
        .collect();

    let score = |i: usize, idx: &[usize], fit: &RaschFit| -> Result<f64> {
        if chosen_idx.contains(&i) {
            Ok(world.accuracy(i, idx))
        } else {
            estimate_score(
                &world.models[i],
                idx.iter().map(|&j| &world.samples[j].id),
                fit,
            )
        }
    };
    let errors = |idx: &[usize]| -> Result<(f64, f64)> {
        if held_out.is_empty() || idx.is_empty() {
            return Ok((0.0, 0.0));
        }
        let predicted = held_out
            .iter()
            .map(|&i| score(i, idx, &refit))
            .collect::<Result<Vec<_>>>()?;
        let actual: Vec<f64> = held_out.iter().map(|&i| world.accuracy(i, idx)).collect();
        mean_absolute_error(&predicted, &actual)
    };

    let mut per_domain = Vec::with_capacity(world.config.num_domains);
    for d in 0..world.config.num_domains {
        let idx: Vec<usize> = test
            .iter()
            .copied()
            .filter(|&j| world.domain[j] == d)
            .collect();
        let (mae, mad) = errors(&idx)?;
        per_domain.push(DomainResult {
            domain: domain_tag(d),
            mae_points: mae,
            mad_points: mad,
            test_samples: idx.len(),
        });
    }
    let (overall_mae, overall_mad) = errors(test)?;

    let board = all_models
        .iter()
        .map(|&i| score(i, test, &refit))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<f64> = all_models
        .iter()
        .map(|&i| world.accuracy(i, test))
        .collect();
    let spearman = spearman_rank_correlation(&board, &truth)?;

    let performed = chosen.len() * test.len();
    let full_baseline = num_models * test.len();
    Ok(ExperimentResult {
        per_domain,
        overall_mae_points: overall_mae,
        overall_mad_points: overall_mad,
        spearman,
        budget,
        seed,
        test_models: held_out.len(),
        reevaluated: chosen,
        savings: EvaluationSavings {
            performed,
            full_baseline,
            saving: 1.0 - performed as f64 / full_baseline as f64,
        },
    })
}

/// The default study: 15/85 chronological split, Fisher-based selection.
pub fn run_efficient_eval(world: &SimWorld, budget: usize, seed: u64) -> Result<ExperimentResult> {
    let (train, test) = world.split_indices(DEFAULT_TRAIN_FRACTION)?;
    run_experiment(
        world,
        &train,
        &test,
        budget,
        Selection::default(),
        &FitConfig::default(),
        seed,
    )
}

/// One study per budget on the same world.
pub fn budget_sweep(world: &SimWorld, budgets: &[usize]) -> Result<Vec<ExperimentResult>> {
    if budgets.is_empty() {
        return Err(Error::EmptyInput);
    }
    budgets
        .iter()
        .map(|&b| run_efficient_eval(world, b, world.config.seed))
        .collect()
}

/// Overall MAE when the second version is cut down to each size. Subsets are
/// drawn without replacement from the `("subsample", size)` stream.
pub fn sample_size_study(
    world: &SimWorld,
    test_sizes: &[usize],
    budget: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    if test_sizes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (train, test) = world.split_indices(DEFAULT_TRAIN_FRACTION)?;
    test_sizes
        .iter()
        .map(|&size| {
            if size == 0 {
                return Err(Error::InvalidConfig("test size must be positive".into()));
            }
            if size > test.len() {
                return Err(Error::InvalidConfig(format!(
                    "test size {size} exceeds the {} available test samples",
                    test.len()
                )));
            }
            let subset = if size == test.len() {
                test.clone()
            } else {
                let mut rng = substream(seed, "subsample", size as u64);
                let mut picked = rand::seq::index::sample(&mut rng, test.len(), size).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(|k| test[k]).collect()
            };
            let result = run_experiment(
                world,
                &train,
                &subset,
                budget,
                Selection::default(),
                &FitConfig::default(),
                seed,
            )?;
            Ok((size, result.overall_mae_points))
        })
        .collect()
}

/// Runs `run_efficient_eval` on a fresh world per seed, in parallel. Results
/// follow the order of `seeds`.
pub fn run_seeds(
    config: &WorldConfig,
    seeds: &[u64],
    budget: usize,
) -> Result<Vec<ExperimentResult>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let world = generate_world(&WorldConfig { seed, ..*config })?;
            run_efficient_eval(&world, budget, seed)
        })
        .collect()
}

/// Loads a binary outcome matrix in the outcome-file format; every version
/// must be completely observed.
pub fn ingest_external_matrix(path: impl AsRef<Path>) -> Result<EvalStore> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut store = EvalStore::new();
    store.ingest_outcomes(&text)?;
    for t in 0..store.versions().len() {
        store.seal(t)?;
    }
    Ok(store)
}

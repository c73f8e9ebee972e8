//! Chooses which previously seen models to re-evaluate on a new version.
//!
//! Anchors are the samples of the previous version whose fitted difficulty
//! sits nearest to equally spaced percentiles between the 5th and the 95th.
//! Each anchor then claims the not-yet-chosen available model with the largest
//! Fisher information `p(1 − p)` at that anchor. When the two best candidates
//! are within `similarity_epsilon` of each other the cheaper one wins.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ModelId, SampleId};
use crate::rasch::{predict_prob, RaschFit};
use crate::store::{EvalStore, Sample};

pub const DEFAULT_BUDGET: usize = 5;
pub const DEFAULT_SIMILARITY_EPSILON: f64 = 0.005;
const LOWEST_PERCENTILE: f64 = 5.0;
const HIGHEST_PERCENTILE: f64 = 95.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostHint {
    pub model: ModelId,
    pub relative_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub budget: usize,
    pub similarity_epsilon: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            similarity_epsilon: DEFAULT_SIMILARITY_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReevalPlan {
    pub version: usize,
    pub budget: usize,
    pub anchors: Vec<SampleId>,
    pub chosen_models: Vec<ModelId>,
    pub forced_new_models: BTreeSet<ModelId>,
}

impl ReevalPlan {
    /// Every model to run on the new version: re-evaluations plus new models.
    pub fn models_to_evaluate(&self) -> BTreeSet<ModelId> {
        self.chosen_models
            .iter()
            .chain(&self.forced_new_models)
            .cloned()
            .collect()
    }

    /// Appends the planned version to `store`.
    pub fn apply(
        &self,
        store: &mut EvalStore,
        samples: Vec<Sample>,
        available: BTreeSet<ModelId>,
    ) -> Result<()> {
        if store.versions().len() != self.version {
            return Err(Error::InvalidConfig(format!(
                "plan targets version {} but the store's next version is {}",
                self.version,
                store.versions().len()
            )));
        }
        store.add_version(
            samples,
            self.forced_new_models.clone(),
            self.chosen_models.iter().cloned().collect(),
            available,
        )?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Target percentiles: `5 + k·90/(m − 1)` for `k = 0..m`, or the median when `m = 1`.
pub fn percentile_targets(budget: usize) -> Vec<f64> {
    match budget {
        0 => Vec::new(),
        1 => vec![50.0],
        m => (0..m)
            .map(|k| {
                LOWEST_PERCENTILE
                    + k as f64 * (HIGHEST_PERCENTILE - LOWEST_PERCENTILE) / (m - 1) as f64
            })
            .collect(),
    }
}

/// The `q`-th percentile of ascending `sorted`, interpolating linearly between
/// the order statistics at zero-based rank `q/100 · (n − 1)`.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    match sorted.get(lo + 1) {
        Some(&hi) if frac > 0.0 => sorted[lo] + frac * (hi - sorted[lo]),
        _ => sorted[lo],
    }
}

/// Picks `budget` anchor samples, returned in ascending difficulty order.
pub fn select_anchor_samples(
    difficulties: &[(SampleId, f64)],
    budget: usize,
) -> Result<Vec<SampleId>> {
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    if budget > difficulties.len() {
        return Err(Error::BudgetTooLarge {
            budget,
            available: difficulties.len(),
            what: "sample count",
        });
    }
    if difficulties.iter().any(|(_, b)| !b.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sorted: Vec<&(SampleId, f64)> = difficulties.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let values: Vec<f64> = sorted.iter().map(|(_, b)| *b).collect();

    let mut used = vec![false; sorted.len()];
    for q in percentile_targets(budget) {
        let target = empirical_quantile(&values, q);
        let pick = (0..sorted.len())
            .filter(|&k| !used[k])
            .min_by(|&a, &b| {
                (values[a] - target)
                    .abs()
                    .total_cmp(&(values[b] - target).abs())
                    .then_with(|| sorted[a].0.cmp(&sorted[b].0))
            })
            .expect("budget does not exceed sample count");
        used[pick] = true;
    }
    Ok(sorted
        .iter()
        .zip(used)
        .filter(|(_, u)| *u)
        .map(|(s, _)| s.0.clone())
        .collect())
}

/// Fisher information `p(1 − p)` of a binary item at `p = σ(θ − β)`.
pub fn fisher_information(theta: f64, beta: f64) -> Result<f64> {
    let p = predict_prob(theta, beta)?;
    Ok(p * (1.0 - p))
}

struct Candidate<'a> {
    model: &'a ModelId,
    fisher: f64,
    cost: f64,
}

/// Greedy per-anchor model choice; see the module docs for the rule.
pub fn select_models(
    fit: &RaschFit,
    anchors: &[SampleId],
    candidates: &BTreeSet<ModelId>,
    costs: &[CostHint],
    similarity_epsilon: f64,
) -> Result<Vec<ModelId>> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    if similarity_epsilon.is_nan() || similarity_epsilon < 0.0 {
        return Err(Error::InvalidConfig(
            "similarity_epsilon must be non-negative".into(),
        ));
    }
    let mut cost_of: HashMap<&ModelId, f64> = HashMap::new();
    for hint in costs {
        if !(hint.relative_cost > 0.0 && hint.relative_cost.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "relative cost of {} must be positive",
                hint.model
            )));
        }
        cost_of.insert(&hint.model, hint.relative_cost);
    }
    let thetas = candidates
        .iter()
        .map(|m| Ok((m, fit.ability(m)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut chosen: Vec<ModelId> = Vec::new();
    for anchor in anchors {
        let beta = fit.difficulty(anchor)?;
        let mut ranked = thetas
            .iter()
            .filter(|(m, _)| !chosen.contains(m))
            .map(|&(model, theta)| {
                Ok(Candidate {
                    model,
                    fisher: fisher_information(theta, beta)?,
                    cost: cost_of.get(model).copied().unwrap_or(1.0),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if ranked.is_empty() {
            break;
        }
        ranked.sort_by(|a, b| {
            b.fisher
                .total_cmp(&a.fisher)
                .then_with(|| a.cost.total_cmp(&b.cost))
                .then_with(|| a.model.cmp(b.model))
        });
        let mut pick = &ranked[0];
        if let Some(second) = ranked.get(1) {
            if pick.fisher - second.fisher <= similarity_epsilon
                && prefer_cheaper(second, pick) == Ordering::Less
            {
                pick = second;
            }
        }
        chosen.push(pick.model.clone());
    }
    Ok(chosen)
}

/// Lower cost first, then higher information, then id.
fn prefer_cheaper(a: &Candidate<'_>, b: &Candidate<'_>) -> Ordering {
    a.cost
        .total_cmp(&b.cost)
        .then_with(|| b.fisher.total_cmp(&a.fisher))
        .then_with(|| a.model.cmp(b.model))
}

/// Plans version `latest + 1` of `store` from a fit over data through the
/// latest (sealed) version.
pub fn plan_reevaluation(
    store: &EvalStore,
    fit: &RaschFit,
    config: &PlannerConfig,
    new_models: &BTreeSet<ModelId>,
    available: &BTreeSet<ModelId>,
    costs: &[CostHint],
) -> Result<ReevalPlan> {
    let prior = store.latest().ok_or(Error::NoPriorVersion)?;
    store.seal(prior)?;
    if config.budget == 0 {
        return Err(Error::ZeroBudget);
    }
    let version = store.version(prior)?;
    if let Some(m) = new_models.iter().find(|m| version.roster.contains(*m)) {
        return Err(Error::ModelAlreadyOnRoster(m.clone()));
    }
    let candidates: BTreeSet<ModelId> = version.roster.intersection(available).cloned().collect();
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    if config.budget > candidates.len() {
        return Err(Error::BudgetTooLarge {
            budget: config.budget,
            available: candidates.len(),
            what: "available candidate models",
        });
    }
    let difficulties = version
        .sample_ids()
        .map(|s| Ok((s.clone(), fit.difficulty(s)?)))
        .collect::<Result<Vec<_>>>()?;
    let anchors = select_anchor_samples(&difficulties, config.budget)?;
    let chosen_models =
        select_models(fit, &anchors, &candidates, costs, config.similarity_epsilon)?;
    Ok(ReevalPlan {
        version: prior + 1,
        budget: config.budget,
        anchors,
        chosen_models,
        forced_new_models: new_models.clone(),
    })
}

//! Rasch item-response model.
//!
//! The probability that model `i` answers sample `j` correctly is
//! `σ(θ_i − β_j)` with `σ` the logistic function. Abilities and difficulties
//! are fitted by maximizing the Bernoulli log-likelihood over the observed
//! pairs plus a zero-mean Gaussian penalty `−x²/(2·prior_variance)` on every
//! parameter. The penalty pins down the otherwise free common shift of all
//! parameters and keeps perfect-score rows and columns finite.
//!
//! The optimizer is cyclic coordinate Newton: one clamped Newton step per
//! parameter per sweep (all abilities, then all difficulties), halved until
//! the local objective does not decrease, followed by an exact re-centering
//! of the common shift. Every step is an ascent step, so the penalized
//! objective is non-decreasing across sweeps.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ids::{ModelId, SampleId};
use crate::store::{EvalOutcome, EvalStore};

const INIT_CLIP: f64 = 3.0;
const MAX_STEP: f64 = 1.0;
const MAX_HALVINGS: usize = 40;

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Bernoulli log-likelihood of outcome `y` at logit `d = θ − β`.
#[inline]
fn log_lik_term(d: f64, y: bool) -> f64 {
    if y {
        -softplus(-d)
    } else {
        -softplus(d)
    }
}

/// Largest `f64` strictly below one.
const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

/// Probability of a correct answer, `1 / (1 + exp(−(θ − β)))`, kept strictly
/// inside `(0, 1)`.
pub fn predict_prob(theta: f64, beta: f64) -> Result<f64> {
    if !theta.is_finite() || !beta.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(logistic(theta - beta).clamp(f64::MIN_POSITIVE, ONE_BELOW))
}

/// Neumaier-compensated sum.
#[derive(Default, Clone, Copy)]
struct Sum {
    sum: f64,
    comp: f64,
}

impl Sum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// Fitted ability per model, in logits.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct AbilityVector(pub BTreeMap<ModelId, f64>);

/// Fitted difficulty per sample, in logits.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct DifficultyVector(pub BTreeMap<SampleId, f64>);

impl AbilityVector {
    pub fn get(&self, model: &ModelId) -> Result<f64> {
        self.0
            .get(model)
            .copied()
            .ok_or_else(|| Error::MissingAbility(model.clone()))
    }
}

impl DifficultyVector {
    pub fn get(&self, sample: &SampleId) -> Result<f64> {
        self.0
            .get(sample)
            .copied()
            .ok_or_else(|| Error::MissingDifficulty(sample.clone()))
    }
}

/// Serializes with 17 significant digits.
struct Sig17(f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::Error as _;
        if !self.0.is_finite() {
            return Err(S::Error::custom("non-finite number"));
        }
        let raw = serde_json::value::RawValue::from_string(format!("{:.16e}", self.0))
            .map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

fn serialize_sig17_map<K: Serialize + Ord, S: Serializer>(
    map: &BTreeMap<K, f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(map.iter().map(|(k, v)| (k, Sig17(*v))))
}

impl Serialize for AbilityVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_sig17_map(&self.0, s)
    }
}

impl Serialize for DifficultyVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_sig17_map(&self.0, s)
    }
}

fn serialize_sig17<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    Sig17(*v).serialize(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Threshold on the largest absolute parameter change within a sweep.
    pub tolerance: f64,
    /// Variance of the zero-mean Gaussian penalty on every parameter.
    pub prior_variance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-8,
            prior_variance: 100.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if !(self.prior_variance > 0.0 && self.prior_variance.is_finite()) {
            return Err(Error::InvalidConfig(
                "prior_variance must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaschFit {
    pub abilities: AbilityVector,
    pub difficulties: DifficultyVector,
    #[serde(serialize_with = "serialize_sig17")]
    pub penalized_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl RaschFit {
    pub fn ability(&self, model: &ModelId) -> Result<f64> {
        self.abilities.get(model)
    }

    pub fn difficulty(&self, sample: &SampleId) -> Result<f64> {
        self.difficulties.get(sample)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Unpenalized Bernoulli log-likelihood of `outcomes` under the given parameters.
pub fn log_likelihood(
    abilities: &AbilityVector,
    difficulties: &DifficultyVector,
    outcomes: &[EvalOutcome],
) -> Result<f64> {
    let mut total = Sum::default();
    for o in outcomes {
        let d = abilities.get(&o.model)? - difficulties.get(&o.sample)?;
        total.add(log_lik_term(d, o.correct));
    }
    Ok(total.value())
}

/// Gradient of [`log_likelihood`]: `Σ_j (y − p)` per model and `Σ_i (p − y)`
/// per sample, over observed pairs. Parameters without observations get zero.
pub fn log_likelihood_gradient(
    abilities: &AbilityVector,
    difficulties: &DifficultyVector,
    outcomes: &[EvalOutcome],
) -> Result<(BTreeMap<ModelId, f64>, BTreeMap<SampleId, f64>)> {
    let mut d_theta: BTreeMap<ModelId, f64> =
        abilities.0.keys().map(|k| (k.clone(), 0.0)).collect();
    let mut d_beta: BTreeMap<SampleId, f64> =
        difficulties.0.keys().map(|k| (k.clone(), 0.0)).collect();
    for o in outcomes {
        let p = logistic(abilities.get(&o.model)? - difficulties.get(&o.sample)?);
        let residual = f64::from(u8::from(o.correct)) - p;
        *d_theta.get_mut(&o.model).expect("checked above") += residual;
        *d_beta.get_mut(&o.sample).expect("checked above") -= residual;
    }
    Ok((d_theta, d_beta))
}

/// Log-likelihood minus the Gaussian penalty on every listed parameter.
pub fn penalized_objective(
    abilities: &AbilityVector,
    difficulties: &DifficultyVector,
    outcomes: &[EvalOutcome],
    prior_variance: f64,
) -> Result<f64> {
    let mut total = Sum::default();
    total.add(log_likelihood(abilities, difficulties, outcomes)?);
    for x in abilities.0.values().chain(difficulties.0.values()) {
        total.add(-x * x / (2.0 * prior_variance));
    }
    Ok(total.value())
}

/// Observed outcomes indexed for fitting. Models and samples are held in id
/// order so fits do not depend on input order.
#[derive(Debug, Clone)]
pub struct Observations {
    models: Vec<ModelId>,
    samples: Vec<SampleId>,
    by_model: Vec<Vec<(u32, bool)>>,
    by_sample: Vec<Vec<(u32, bool)>>,
    len: usize,
}

impl Observations {
    /// Indexes `outcomes`; every id in `models` and `samples` must be observed
    /// at least once. Ids appearing only in `outcomes` are added implicitly.
    pub fn new<'a>(
        outcomes: impl IntoIterator<Item = &'a EvalOutcome>,
        models: impl IntoIterator<Item = ModelId>,
        samples: impl IntoIterator<Item = SampleId>,
    ) -> Result<Self> {
        let outcomes: Vec<&EvalOutcome> = outcomes.into_iter().collect();
        if outcomes.is_empty() {
            return Err(Error::EmptyObservations);
        }
        let mut model_ids: Vec<ModelId> = models.into_iter().collect();
        let mut sample_ids: Vec<SampleId> = samples.into_iter().collect();
        model_ids.extend(outcomes.iter().map(|o| o.model.clone()));
        sample_ids.extend(outcomes.iter().map(|o| o.sample.clone()));
        model_ids.sort();
        model_ids.dedup();
        sample_ids.sort();
        sample_ids.dedup();

        let model_index: HashMap<&ModelId, u32> = model_ids
            .iter()
            .enumerate()
            .map(|(i, m)| (m, i as u32))
            .collect();
        let sample_index: HashMap<&SampleId, u32> = sample_ids
            .iter()
            .enumerate()
            .map(|(j, s)| (s, j as u32))
            .collect();

        let mut pairs: Vec<(u32, u32, bool)> = outcomes
            .iter()
            .map(|o| (model_index[&o.model], sample_index[&o.sample], o.correct))
            .collect();
        pairs.sort_unstable();
        if let Some(w) = pairs
            .windows(2)
            .find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1)
        {
            return Err(Error::InvalidConfig(format!(
                "duplicate observation for ({}, {})",
                model_ids[w[0].0 as usize], sample_ids[w[0].1 as usize]
            )));
        }

        let mut by_model = vec![Vec::new(); model_ids.len()];
        let mut by_sample = vec![Vec::new(); sample_ids.len()];
        for &(i, j, y) in &pairs {
            by_model[i as usize].push((j, y));
            by_sample[j as usize].push((i, y));
        }
        if let Some(i) = by_model.iter().position(Vec::is_empty) {
            return Err(Error::UnobservedModel(model_ids[i].clone()));
        }
        if let Some(j) = by_sample.iter().position(Vec::is_empty) {
            return Err(Error::UnobservedSample(sample_ids[j].clone()));
        }
        Ok(Self {
            models: model_ids,
            samples: sample_ids,
            by_model,
            by_sample,
            len: pairs.len(),
        })
    }

    pub fn from_outcomes(outcomes: &[EvalOutcome]) -> Result<Self> {
        Self::new(outcomes, [], [])
    }

    /// Outcomes over `Ω_t`, covering the roster `I_t` and every sample of
    /// versions `≤ t`. Every version up to `t` must be sealed.
    pub fn from_store(store: &EvalStore, t: usize) -> Result<Self> {
        for v in 0..=t {
            store.seal(v)?;
        }
        let outcomes = store.outcomes_through(t)?;
        let roster = store.version(t)?.roster.iter().cloned();
        let samples = store.versions()[..=t]
            .iter()
            .flat_map(|v| v.sample_ids().cloned())
            .collect::<Vec<_>>();
        Self::new(&outcomes, roster, samples)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn models(&self) -> &[ModelId] {
        &self.models
    }

    pub fn samples(&self) -> &[SampleId] {
        &self.samples
    }
}

/// Progress of one optimizer sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepReport {
    pub sweep: usize,
    pub objective: f64,
    pub max_change: f64,
}

pub fn fit(obs: &Observations, config: &FitConfig) -> Result<RaschFit> {
    fit_with_observer(obs, config, |_| {})
}

/// Like [`fit`], calling `observer` after every sweep. The objective reported
/// for sweep 0 is the value at the initial point.
pub fn fit_with_observer(
    obs: &Observations,
    config: &FitConfig,
    mut observer: impl FnMut(&SweepReport),
) -> Result<RaschFit> {
    config.validate()?;
    let precision = 1.0 / config.prior_variance;

    let accuracy_logit = |rows: &[(u32, bool)]| {
        let correct = rows.iter().filter(|(_, y)| *y).count() as f64;
        let acc = correct / rows.len() as f64;
        (acc / (1.0 - acc)).ln().clamp(-INIT_CLIP, INIT_CLIP)
    };
    let mut theta: Vec<f64> = obs.by_model.iter().map(|r| accuracy_logit(r)).collect();
    let mut beta: Vec<f64> = obs.by_sample.iter().map(|r| -accuracy_logit(r)).collect();

    let objective = |theta: &[f64], beta: &[f64]| {
        let mut total = Sum::default();
        for (i, rows) in obs.by_model.iter().enumerate() {
            for &(j, y) in rows {
                total.add(log_lik_term(theta[i] - beta[j as usize], y));
            }
        }
        for x in theta.iter().chain(beta.iter()) {
            total.add(-0.5 * precision * x * x);
        }
        total.value()
    };

    let mut current = objective(&theta, &beta);
    observer(&SweepReport {
        sweep: 0,
        objective: current,
        max_change: f64::INFINITY,
    });

    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut max_change = 0.0f64;

        // Abilities: the logit is θ_i − β_j.
        for (i, rows) in obs.by_model.iter().enumerate() {
            let step = coordinate_step(theta[i], precision, rows, |x, j| x - beta[j as usize], 1.0);
            theta[i] += step;
            max_change = max_change.max(step.abs());
        }
        // Difficulties: the logit is θ_i − β_j, so its slope in β_j is −1.
        for (j, rows) in obs.by_sample.iter().enumerate() {
            let step =
                coordinate_step(beta[j], precision, rows, |x, i| theta[i as usize] - x, -1.0);
            beta[j] += step;
            max_change = max_change.max(step.abs());
        }
        // The likelihood only sees differences; the penalty is minimized over a
        // common shift by moving the overall mean to zero.
        let n = (theta.len() + beta.len()) as f64;
        let shift = -(theta.iter().sum::<f64>() + beta.iter().sum::<f64>()) / n;
        theta
            .iter_mut()
            .chain(beta.iter_mut())
            .for_each(|x| *x += shift);
        max_change = max_change.max(shift.abs());

        current = objective(&theta, &beta);
        observer(&SweepReport {
            sweep: iterations,
            objective: current,
            max_change,
        });
        if max_change < config.tolerance {
            converged = true;
            break;
        }
    }

    Ok(RaschFit {
        abilities: AbilityVector(obs.models.iter().cloned().zip(theta).collect()),
        difficulties: DifficultyVector(obs.samples.iter().cloned().zip(beta).collect()),
        penalized_log_likelihood: current,
        iterations,
        converged,
    })
}

/// One safeguarded Newton step on a single parameter `x` whose observations
/// have logit `logit(x, other)` with slope `sign` in `x`.
fn coordinate_step(
    x: f64,
    precision: f64,
    rows: &[(u32, bool)],
    logit: impl Fn(f64, u32) -> f64,
    sign: f64,
) -> f64 {
    let local = |x: f64| {
        let mut total = Sum::default();
        for &(k, y) in rows {
            total.add(log_lik_term(logit(x, k), y));
        }
        total.add(-0.5 * precision * x * x);
        total.value()
    };

    let mut grad = -precision * x;
    let mut curvature = precision;
    for &(k, y) in rows {
        let p = logistic(logit(x, k));
        grad += sign * (f64::from(u8::from(y)) - p);
        curvature += p * (1.0 - p);
    }
    let mut step = (grad / curvature).clamp(-MAX_STEP, MAX_STEP);
    if step == 0.0 {
        return 0.0;
    }
    let before = local(x);
    for _ in 0..MAX_HALVINGS {
        if local(x + step) >= before {
            return step;
        }
        step *= 0.5;
    }
    0.0
}

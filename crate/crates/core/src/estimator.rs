//! Score estimates for models that were not re-evaluated, leaderboards that
//! mix observed and estimated scores, and the comparison metrics.

use std::cmp::Ordering;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ModelId, SampleId};
use crate::rasch::{predict_prob, RaschFit};
use crate::store::EvalStore;

/// Performance-IRT estimate: the mean Rasch probability of `model` answering
/// each of `samples` correctly under the fitted parameters.
pub fn estimate_score<'a>(
    model: &ModelId,
    samples: impl IntoIterator<Item = &'a SampleId>,
    fit: &RaschFit,
) -> Result<f64> {
    let theta = fit.ability(model)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for sample in samples {
        total += predict_prob(theta, fit.difficulty(sample)?)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Observed,
    Estimated,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Observed => "observed",
            Provenance::Estimated => "estimated",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub model: ModelId,
    pub version: usize,
    /// Fraction in `[0, 1]`.
    pub score: f64,
    pub provenance: Provenance,
}

impl ScoreEntry {
    pub fn percent(&self) -> f64 {
        self.score * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub version: usize,
    pub entries: Vec<ScoreEntry>,
}

pub const LEADERBOARD_HEADER: &str = "model_id,score_percent,provenance";

/// Descending by score, ties by model id.
fn board_order(a: &ScoreEntry, b: &ScoreEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.model.cmp(&b.model))
}

impl Leaderboard {
    pub fn from_entries(version: usize, mut entries: Vec<ScoreEntry>) -> Self {
        entries.sort_by(board_order);
        Self { version, entries }
    }

    pub fn estimated_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.provenance == Provenance::Estimated)
            .count()
    }

    /// Machine-readable rows: `model_id,score_percent,provenance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(LEADERBOARD_HEADER);
        out.push('\n');
        for e in &self.entries {
            let _ = writeln!(out, "{},{:.1},{}", e.model, e.percent(), e.provenance);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let width = self
            .entries
            .iter()
            .map(|e| e.model.as_str().len())
            .max()
            .unwrap_or(0)
            .max("model".len());
        let mut out = format!(
            "{:>4}  {:<width$}  {:>7}  {}\n",
            "rank", "model", "score", "provenance"
        );
        for (rank, e) in self.entries.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>4}  {:<width$}  {:>6.1}%  {}",
                rank + 1,
                e.model.as_str(),
                e.percent(),
                e.provenance
            );
        }
        out
    }
}

/// Leaderboard for version `t`: models in `Î_t` carry their observed score,
/// every other roster model its estimate over `J_t`.
pub fn build_leaderboard(store: &EvalStore, t: usize, fit: &RaschFit) -> Result<Leaderboard> {
    store.seal(t)?;
    let version = store.version(t)?;
    let entries = version
        .roster
        .iter()
        .map(|model| {
            let (score, provenance) = if version.evaluated.contains(model) {
                (store.observed_score(model, t)?, Provenance::Observed)
            } else {
                (
                    estimate_score(model, version.sample_ids(), fit)?,
                    Provenance::Estimated,
                )
            };
            Ok(ScoreEntry {
                model: model.clone(),
                version: t,
                score,
                provenance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Leaderboard::from_entries(t, entries))
}

/// Mean absolute error and the mean absolute deviation of the absolute
/// errors around it, both in percentage points.
pub fn mean_absolute_error(predicted: &[f64], actual: &[f64]) -> Result<(f64, f64)> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch(predicted.len(), actual.len()));
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = predicted.len() as f64;
    let errors: Vec<f64> = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs() * 100.0)
        .collect();
    let mae = errors.iter().sum::<f64>() / n;
    let mad = errors.iter().map(|e| (e - mae).abs()).sum::<f64>() / n;
    Ok((mae, mad))
}

/// One-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman_rank_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::EmptyInput);
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

//! Versioned record of which model answered which sample correctly.
//!
//! A store is a sequence of benchmark versions. Version `t` introduces a batch
//! of samples `J_t` that never reappears later, extends the model roster `I_t`
//! (it never shrinks) and names the models `Î_t` that were actually run on the
//! batch. Every model introduced at `t` is evaluated at `t`, and at `t = 0` the
//! whole roster is evaluated. The observation mask through version `t` is the
//! disjoint union of the blocks `Î_t' × J_t'` for `t' ≤ t`.
//!
//! A version is *sealed* once its block is completely recorded; fitting and
//! planning only operate on sealed versions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ModelId, SampleId};

/// A sample identifier plus optional metadata used for per-domain reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: SampleId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_tag: Option<String>,
}

impl Sample {
    pub fn new(id: SampleId) -> Self {
        Self {
            id,
            domain_tag: None,
        }
    }

    pub fn tagged(id: SampleId, domain: impl Into<String>) -> Self {
        Self {
            id,
            domain_tag: Some(domain.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkVersion {
    pub t: usize,
    pub samples: Vec<Sample>,
    pub roster: BTreeSet<ModelId>,
    pub evaluated: BTreeSet<ModelId>,
    pub available: BTreeSet<ModelId>,
}

impl BenchmarkVersion {
    pub fn sample_ids(&self) -> impl Iterator<Item = &SampleId> + '_ {
        self.samples.iter().map(|s| &s.id)
    }

    /// Size of the block `Î_t × J_t`.
    pub fn block_size(&self) -> usize {
        self.evaluated.len() * self.samples.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub model: ModelId,
    pub sample: SampleId,
    #[serde(with = "binary")]
    pub correct: bool,
}

impl EvalOutcome {
    pub fn new(model: ModelId, sample: SampleId, correct: bool) -> Self {
        Self {
            model,
            sample,
            correct,
        }
    }
}

mod binary {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!(
                "correct must be 0 or 1, got {other}"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    versions: Vec<BenchmarkVersion>,
    outcomes: Vec<EvalOutcome>,
}

#[derive(Debug, Clone, Default)]
pub struct EvalStore {
    versions: Vec<BenchmarkVersion>,
    outcomes: BTreeMap<(ModelId, SampleId), bool>,
    sample_version: HashMap<SampleId, usize>,
    recorded: Vec<usize>,
}

impl PartialEq for EvalStore {
    fn eq(&self, other: &Self) -> bool {
        self.versions == other.versions && self.outcomes == other.outcomes
    }
}

impl EvalStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn versions(&self) -> &[BenchmarkVersion] {
        &self.versions
    }

    pub fn version(&self, t: usize) -> Result<&BenchmarkVersion> {
        self.versions.get(t).ok_or(Error::NoSuchVersion(t))
    }

    pub fn latest(&self) -> Option<usize> {
        self.versions.len().checked_sub(1)
    }

    pub fn roster(&self) -> BTreeSet<ModelId> {
        self.versions
            .last()
            .map(|v| v.roster.clone())
            .unwrap_or_default()
    }

    /// Version that introduced `sample`, if any.
    pub fn version_of(&self, sample: &SampleId) -> Option<usize> {
        self.sample_version.get(sample).copied()
    }

    pub fn outcome(&self, model: &ModelId, sample: &SampleId) -> Option<bool> {
        self.outcomes.get(&(model.clone(), sample.clone())).copied()
    }

    pub fn outcome_count(&self) -> usize {
        self.outcomes.len()
    }

    /// Appends the next version. At `t = 0` the evaluated set is the full
    /// roster and `reevaluated_old_models` must be empty.
    pub fn add_version(
        &mut self,
        samples: Vec<Sample>,
        new_models: BTreeSet<ModelId>,
        reevaluated_old_models: BTreeSet<ModelId>,
        available: BTreeSet<ModelId>,
    ) -> Result<&BenchmarkVersion> {
        let t = self.versions.len();
        let prior = self.roster();

        let mut batch = BTreeSet::new();
        for sample in &samples {
            if self.sample_version.contains_key(&sample.id) {
                return Err(Error::SampleReused(sample.id.clone()));
            }
            if !batch.insert(&sample.id) {
                return Err(Error::DuplicateSample(sample.id.clone()));
            }
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(m) = new_models.iter().find(|m| prior.contains(*m)) {
            return Err(Error::ModelAlreadyOnRoster(m.clone()));
        }
        if t == 0 && !reevaluated_old_models.is_empty() {
            return Err(Error::ReevaluationAtStart(reevaluated_old_models.len()));
        }
        if let Some(m) = reevaluated_old_models.iter().find(|m| !prior.contains(*m)) {
            return Err(Error::UnknownModel(m.clone()));
        }

        let mut roster = prior;
        roster.extend(new_models.iter().cloned());
        if let Some(m) = available.iter().find(|m| !roster.contains(*m)) {
            return Err(Error::AvailableNotOnRoster(m.clone()));
        }
        let evaluated = if t == 0 {
            roster.clone()
        } else {
            new_models.union(&reevaluated_old_models).cloned().collect()
        };

        for sample in &samples {
            self.sample_version.insert(sample.id.clone(), t);
        }
        self.versions.push(BenchmarkVersion {
            t,
            samples,
            roster,
            evaluated,
            available,
        });
        self.recorded.push(0);
        Ok(&self.versions[t])
    }

    /// Records a batch of outcomes for version `t`. The batch is validated as
    /// a whole before anything is written. Returns the number of new records;
    /// re-recording an identical value is a no-op.
    pub fn record_outcomes(&mut self, t: usize, batch: &[EvalOutcome]) -> Result<usize> {
        let version = self.version(t)?;
        let mut fresh: BTreeMap<(ModelId, SampleId), bool> = BTreeMap::new();
        for o in batch {
            if !version.evaluated.contains(&o.model) {
                return Err(Error::NotScheduled {
                    model: o.model.clone(),
                    version: t,
                });
            }
            if self.sample_version.get(&o.sample) != Some(&t) {
                return Err(Error::SampleNotInVersion {
                    sample: o.sample.clone(),
                    version: t,
                });
            }
            let key = (o.model.clone(), o.sample.clone());
            let existing = self.outcomes.get(&key).or_else(|| fresh.get(&key));
            match existing {
                Some(&recorded) if recorded != o.correct => {
                    return Err(Error::OutcomeConflict {
                        model: o.model.clone(),
                        sample: o.sample.clone(),
                        recorded: u8::from(recorded),
                        got: u8::from(o.correct),
                    });
                }
                Some(_) => {}
                None => {
                    fresh.insert(key, o.correct);
                }
            }
        }
        let count = fresh.len();
        self.outcomes.extend(fresh);
        self.recorded[t] += count;
        Ok(count)
    }

    pub fn missing_outcomes(&self, t: usize) -> Result<usize> {
        let version = self.version(t)?;
        Ok(version.block_size() - self.recorded[t])
    }

    pub fn is_sealed(&self, t: usize) -> Result<bool> {
        Ok(self.missing_outcomes(t)? == 0)
    }

    /// Checks that version `t` is sealed.
    pub fn seal(&self, t: usize) -> Result<()> {
        match self.missing_outcomes(t)? {
            0 => Ok(()),
            missing => Err(Error::NotSealed {
                version: t,
                missing,
            }),
        }
    }

    /// Observed accuracy `S_it` of `model` on the samples of version `t`.
    pub fn observed_score(&self, model: &ModelId, t: usize) -> Result<f64> {
        let version = self.version(t)?;
        let not_full = || Error::NotFullyEvaluated {
            model: model.clone(),
            version: t,
        };
        if !version.evaluated.contains(model) {
            return Err(not_full());
        }
        let mut correct = 0usize;
        for id in version.sample_ids() {
            match self.outcome(model, id) {
                Some(true) => correct += 1,
                Some(false) => {}
                None => return Err(not_full()),
            }
        }
        Ok(correct as f64 / version.samples.len() as f64)
    }

    /// The observation mask `Ω_t`.
    pub fn observed_pairs(&self, t: usize) -> Result<BTreeSet<(ModelId, SampleId)>> {
        self.version(t)?;
        Ok(self.versions[..=t]
            .iter()
            .flat_map(|v| {
                v.evaluated
                    .iter()
                    .flat_map(move |m| v.sample_ids().map(move |s| (m.clone(), s.clone())))
            })
            .collect())
    }

    /// Recorded outcomes whose sample belongs to a version `≤ t`.
    pub fn outcomes_through(&self, t: usize) -> Result<Vec<EvalOutcome>> {
        self.version(t)?;
        Ok(self
            .outcomes
            .iter()
            .filter(|((_, s), _)| self.sample_version[s] <= t)
            .map(|((m, s), &y)| EvalOutcome::new(m.clone(), s.clone(), y))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let snapshot = Snapshot {
            versions: self.versions.clone(),
            outcomes: self
                .outcomes
                .iter()
                .map(|((m, s), &y)| EvalOutcome::new(m.clone(), s.clone(), y))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&snapshot)?)
    }

    /// Parses a snapshot and replays it through the mutating operations so
    /// that every store invariant is re-checked. Blank input is an empty store.
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::new());
        }
        let snapshot: Snapshot = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        let mut store = Self::new();
        for (t, v) in snapshot.versions.into_iter().enumerate() {
            let invalid = |message: String| Error::Parse { line: 0, message };
            if v.t != t {
                return Err(invalid(format!("version {t} is labelled t = {}", v.t)));
            }
            let prior = store.roster();
            if !prior.is_subset(&v.roster) {
                return Err(invalid(format!("roster of version {t} shrinks")));
            }
            let new_models: BTreeSet<_> = v.roster.difference(&prior).cloned().collect();
            if !new_models.is_subset(&v.evaluated) {
                return Err(invalid(format!(
                    "version {t} introduces models it does not evaluate"
                )));
            }
            let reevaluated = if t == 0 {
                BTreeSet::new()
            } else {
                v.evaluated.difference(&new_models).cloned().collect()
            };
            let expected = v.evaluated.clone();
            store.add_version(v.samples, new_models, reevaluated, v.available)?;
            if store.versions[t].evaluated != expected {
                return Err(invalid(format!(
                    "evaluated set of version {t} is inconsistent with its roster"
                )));
            }
        }
        let mut by_version: BTreeMap<usize, Vec<EvalOutcome>> = BTreeMap::new();
        for o in snapshot.outcomes {
            let t = store
                .version_of(&o.sample)
                .ok_or_else(|| Error::SampleNotInVersion {
                    sample: o.sample.clone(),
                    version: store.versions.len(),
                })?;
            by_version.entry(t).or_default().push(o);
        }
        for (t, batch) in by_version {
            store.record_outcomes(t, &batch)?;
        }
        Ok(store)
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

    /// Renders every recorded outcome in the line-delimited outcome format.
    pub fn to_outcome_file(&self) -> String {
        let mut out = String::from(OUTCOME_HEADER);
        out.push('\n');
        for ((m, s), &y) in &self.outcomes {
            let t = self.sample_version[s];
            let _ = writeln!(out, "{t},{m},{s},{}", u8::from(y));
        }
        out
    }

    /// Ingests an outcome file. Rows for an existing version are recorded into
    /// it; rows for the next version number create that version, with every
    /// model not yet on the roster treated as new, the rest as re-evaluated, and
    /// the full roster marked available. The store is only modified if the whole
    /// file is accepted. Returns the number of new outcomes.
    pub fn ingest_outcomes(&mut self, text: &str) -> Result<usize> {
        let rows = parse_outcome_file(text)?;
        let mut grouped: BTreeMap<usize, Vec<OutcomeRow>> = BTreeMap::new();
        for row in rows {
            grouped.entry(row.version).or_default().push(row);
        }

        let mut next = self.clone();
        let mut count = 0;
        for (t, rows) in grouped {
            let at_line = |line: usize| {
                move |e: Error| Error::Parse {
                    line,
                    message: e.to_string(),
                }
            };
            let first_line = rows[0].line;
            if t > next.versions.len() {
                return Err(Error::Parse {
                    line: first_line,
                    message: format!(
                        "version {t} skips ahead of the store (next version is {})",
                        next.versions.len()
                    ),
                });
            }
            if t == next.versions.len() {
                let prior = next.roster();
                let mut seen = BTreeSet::new();
                let mut samples = Vec::new();
                let mut models = BTreeSet::new();
                for row in &rows {
                    if seen.insert(row.outcome.sample.clone()) {
                        if next.sample_version.contains_key(&row.outcome.sample) {
                            return Err(at_line(row.line)(Error::SampleReused(
                                row.outcome.sample.clone(),
                            )));
                        }
                        samples.push(Sample::new(row.outcome.sample.clone()));
                    }
                    models.insert(row.outcome.model.clone());
                }
                let new_models: BTreeSet<_> = models.difference(&prior).cloned().collect();
                let reevaluated: BTreeSet<_> = models.intersection(&prior).cloned().collect();
                let available: BTreeSet<_> = prior.union(&new_models).cloned().collect();
                next.add_version(samples, new_models, reevaluated, available)
                    .map_err(at_line(first_line))?;
            }
            for row in &rows {
                count += next
                    .record_outcomes(t, std::slice::from_ref(&row.outcome))
                    .map_err(at_line(row.line))?;
            }
        }
        *self = next;
        Ok(count)
    }
}

pub const OUTCOME_HEADER: &str = "version,model_id,sample_id,correct";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeRow {
    pub line: usize,
    pub version: usize,
    pub outcome: EvalOutcome,
}

/// Parses the line-delimited outcome format. Line numbers are 1-based.
pub fn parse_outcome_file(text: &str) -> Result<Vec<OutcomeRow>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == OUTCOME_HEADER => {}
        Some((line, other)) => {
            return Err(Error::Parse {
                line,
                message: format!("expected header {OUTCOME_HEADER:?}, found {other:?}"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    }

    let mut rows = Vec::new();
    for (line, raw) in lines {
        let raw = raw.trim_end_matches('\r');
        if raw.is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse { line, message };
        let fields: Vec<&str> = raw.split(',').collect();
        let [version, model, sample, correct] = fields[..] else {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        };
        let version = version
            .parse::<usize>()
            .map_err(|_| bad(format!("invalid version {version:?}")))?;
        let model = ModelId::new(model).map_err(|e| bad(e.to_string()))?;
        let sample = SampleId::new(sample).map_err(|e| bad(e.to_string()))?;
        let correct = match correct {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("correct must be 0 or 1, found {other:?}"))),
        };
        rows.push(OutcomeRow {
            line,
            version,
            outcome: EvalOutcome::new(model, sample, correct),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(id: &str) -> ModelId {
        ModelId::new(id).unwrap()
    }

    fn s(id: &str) -> SampleId {
        SampleId::new(id).unwrap()
    }

    fn models(ids: &[&str]) -> BTreeSet<ModelId> {
        ids.iter().map(|i| m(i)).collect()
    }

    fn samples(ids: &[&str]) -> Vec<Sample> {
        ids.iter().map(|i| Sample::new(s(i))).collect()
    }

    fn two_version_store() -> EvalStore {
        let mut store = EvalStore::new();
        store
            .add_version(
                samples(&["a", "b", "c", "d", "e"]),
                models(&["A", "B"]),
                BTreeSet::new(),
                models(&["A", "B"]),
            )
            .unwrap();
        store
            .add_version(
                samples(&["f", "g"]),
                models(&["C"]),
                models(&["A"]),
                models(&["A", "B", "C"]),
            )
            .unwrap();
        store
    }

    #[test]
    fn empty_store() {
        let store = EvalStore::new();
        assert!(store.versions().is_empty());
        assert!(matches!(
            store.observed_pairs(0),
            Err(Error::NoSuchVersion(0))
        ));
    }

    #[test]
    fn version_zero_evaluates_everything() {
        let store = two_version_store();
        let v0 = store.version(0).unwrap();
        assert_eq!(v0.evaluated, v0.roster);
        assert_eq!(v0.evaluated, models(&["A", "B"]));
        let v1 = store.version(1).unwrap();
        assert_eq!(v1.evaluated, models(&["A", "C"]));
        assert_eq!(v1.roster, models(&["A", "B", "C"]));
    }

    #[test]
    fn sample_reuse_rejected() {
        let mut store = two_version_store();
        let err = store
            .add_version(
                samples(&["h", "a"]),
                BTreeSet::new(),
                BTreeSet::new(),
                BTreeSet::new(),
            )
            .unwrap_err();
        assert!(matches!(err, Error::SampleReused(id) if id.as_str() == "a"));
        assert_eq!(store.versions().len(), 2);
    }

    #[test]
    fn add_version_rejections() {
        let mut store = two_version_store();
        assert!(matches!(
            store.add_version(
                samples(&["x"]),
                models(&["A"]),
                BTreeSet::new(),
                BTreeSet::new()
            ),
            Err(Error::ModelAlreadyOnRoster(_))
        ));
        assert!(matches!(
            store.add_version(
                samples(&["x"]),
                BTreeSet::new(),
                models(&["Z"]),
                BTreeSet::new()
            ),
            Err(Error::UnknownModel(_))
        ));
        assert!(matches!(
            store.add_version(
                samples(&["x"]),
                BTreeSet::new(),
                BTreeSet::new(),
                models(&["Z"])
            ),
            Err(Error::AvailableNotOnRoster(_))
        ));
        assert!(matches!(
            store.add_version(
                samples(&["x", "x"]),
                BTreeSet::new(),
                BTreeSet::new(),
                BTreeSet::new()
            ),
            Err(Error::DuplicateSample(_))
        ));
        let mut fresh = EvalStore::new();
        assert!(matches!(
            fresh.add_version(
                samples(&["x"]),
                models(&["A"]),
                models(&["A"]),
                BTreeSet::new()
            ),
            Err(Error::ReevaluationAtStart(1))
        ));
    }

    #[test]
    fn record_is_idempotent_and_rejects_conflicts() {
        let mut store = two_version_store();
        let o = EvalOutcome::new(m("A"), s("a"), true);
        assert_eq!(
            store.record_outcomes(0, std::slice::from_ref(&o)).unwrap(),
            1
        );
        assert_eq!(store.record_outcomes(0, &[o]).unwrap(), 0);
        let err = store
            .record_outcomes(0, &[EvalOutcome::new(m("A"), s("a"), false)])
            .unwrap_err();
        assert!(matches!(err, Error::OutcomeConflict { .. }));
        let err = store
            .record_outcomes(1, &[EvalOutcome::new(m("B"), s("f"), true)])
            .unwrap_err();
        assert!(matches!(err, Error::NotScheduled { .. }));
        let err = store
            .record_outcomes(1, &[EvalOutcome::new(m("A"), s("a"), true)])
            .unwrap_err();
        assert!(matches!(err, Error::SampleNotInVersion { .. }));
    }

    #[test]
    fn conflicting_batch_is_atomic() {
        let mut store = two_version_store();
        let batch = [
            EvalOutcome::new(m("A"), s("b"), true),
            EvalOutcome::new(m("A"), s("b"), false),
        ];
        assert!(store.record_outcomes(0, &batch).is_err());
        assert_eq!(store.outcome_count(), 0);
    }

    #[test]
    fn records_ten() {
        let mut store = two_version_store();
        let batch: Vec<_> = ["A", "B"]
            .iter()
            .flat_map(|mm| {
                ["a", "b", "c", "d", "e"]
                    .iter()
                    .map(move |ss| EvalOutcome::new(m(mm), s(ss), ss < &"c"))
            })
            .collect();
        assert_eq!(store.record_outcomes(0, &batch).unwrap(), 10);
        assert!(store.is_sealed(0).unwrap());
        assert!(!store.is_sealed(1).unwrap());
        assert_eq!(store.missing_outcomes(1).unwrap(), 4);
        assert!((store.observed_score(&m("A"), 0).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn observed_score_cases() {
        let mut store = EvalStore::new();
        let ids: Vec<String> = (0..8).map(|i| format!("s{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        store
            .add_version(
                samples(&refs),
                models(&["A", "B"]),
                BTreeSet::new(),
                BTreeSet::new(),
            )
            .unwrap();
        let batch: Vec<_> = refs
            .iter()
            .map(|i| EvalOutcome::new(m("A"), s(i), true))
            .collect();
        store.record_outcomes(0, &batch).unwrap();
        assert_eq!(store.observed_score(&m("A"), 0).unwrap(), 1.0);
        assert!(matches!(
            store.observed_score(&m("B"), 0),
            Err(Error::NotFullyEvaluated { .. })
        ));
        assert!(matches!(
            store.observed_score(&m("Z"), 0),
            Err(Error::NotFullyEvaluated { .. })
        ));

        let mut half = EvalStore::new();
        let six = &refs[..6];
        half.add_version(
            samples(six),
            models(&["A"]),
            BTreeSet::new(),
            BTreeSet::new(),
        )
        .unwrap();
        let batch: Vec<_> = six
            .iter()
            .enumerate()
            .map(|(k, i)| EvalOutcome::new(m("A"), s(i), k % 2 == 0))
            .collect();
        half.record_outcomes(0, &batch).unwrap();
        assert_eq!(half.observed_score(&m("A"), 0).unwrap(), 0.5);
    }

    #[test]
    fn observed_pairs_grow_by_block() {
        let mut store = EvalStore::new();
        store
            .add_version(
                samples(&["a", "b", "c"]),
                models(&["A", "B"]),
                BTreeSet::new(),
                BTreeSet::new(),
            )
            .unwrap();
        assert_eq!(store.observed_pairs(0).unwrap().len(), 6);
        store
            .add_version(
                samples(&["d", "e", "f", "g"]),
                BTreeSet::new(),
                models(&["B"]),
                BTreeSet::new(),
            )
            .unwrap();
        assert_eq!(store.observed_pairs(1).unwrap().len(), 10);
        assert!(store.observed_pairs(2).is_err());
    }

    #[test]
    fn snapshot_round_trip_and_errors() {
        let mut store = two_version_store();
        store
            .record_outcomes(0, &[EvalOutcome::new(m("B"), s("c"), true)])
            .unwrap();
        let json = store.to_json().unwrap();
        assert!(json.contains("\"versions\"") && json.contains("\"outcomes\""));
        assert_eq!(EvalStore::from_json(&json).unwrap(), store);

        assert_eq!(EvalStore::from_json("").unwrap(), EvalStore::new());
        let truncated = &json[..json.len() / 2];
        assert!(matches!(
            EvalStore::from_json(truncated),
            Err(Error::Parse { line, .. }) if line > 1
        ));
    }

    #[test]
    fn outcome_file_parse_errors_carry_lines() {
        let text = "version,model_id,sample_id,correct\n0,A,a,1\n0,A,b,2\n";
        assert!(matches!(
            parse_outcome_file(text),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_outcome_file(""),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_outcome_file("v,m,s,c\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_outcome_file("version,model_id,sample_id,correct\n0,A,a\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn ingest_builds_versions() {
        let text = "version,model_id,sample_id,correct\n\
                    0,A,a,1\n0,B,a,0\n0,A,b,0\n0,B,b,1\n\
                    1,A,c,1\n1,C,c,1\n";
        let mut store = EvalStore::new();
        assert_eq!(store.ingest_outcomes(text).unwrap(), 6);
        assert_eq!(store.versions().len(), 2);
        assert!(store.is_sealed(0).unwrap() && store.is_sealed(1).unwrap());
        let v1 = store.version(1).unwrap();
        assert_eq!(v1.evaluated, models(&["A", "C"]));
        assert_eq!(v1.roster, models(&["A", "B", "C"]));
        assert_eq!(
            EvalStore::from_json(&store.to_json().unwrap()).unwrap(),
            store
        );

        let mut again = EvalStore::new();
        again.ingest_outcomes(&store.to_outcome_file()).unwrap();
        assert_eq!(again, store);
    }

    #[test]
    fn ingest_rejects_cross_version_sample() {
        let text = "version,model_id,sample_id,correct\n0,A,a,1\n1,A,a,1\n";
        let mut store = EvalStore::new();
        let err = store.ingest_outcomes(text).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(store.versions().is_empty());
    }
}

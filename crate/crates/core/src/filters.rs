//! Two-stage question filtering over pluggable judges.
//!
//! The blind test poses each multiple-choice question to a text-only judge
//! several times, without its image and with the options reshuffled on every
//! repeat. Questions the judge gets right on every repeat are answerable
//! without the image and are removed. Survivors go to a multimodal judge that
//! sees the image reference and the proposed answer and must agree with it;
//! anything else is removed.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Duration;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::SampleId;
use crate::rng::substream;

pub const DEFAULT_REPEATS: usize = 5;
pub const DEFAULT_RETRIES: usize = 3;
pub const DEFAULT_TOKEN_ENV: &str = "LIVEEVAL_JUDGE_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateQuestion {
    pub id: SampleId,
    pub question_text: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_ref: Option<String>,
}

impl CandidateQuestion {
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidQuestion {
            id: self.id.to_string(),
            reason: reason.to_owned(),
        };
        if !(2..=26).contains(&self.options.len()) {
            return Err(invalid("needs between 2 and 26 options"));
        }
        if self.correct_index >= self.options.len() {
            return Err(invalid("correct_index out of range"));
        }
        for (k, a) in self.options.iter().enumerate() {
            if self.options[..k].contains(a) {
                return Err(invalid("options must be pairwise distinct"));
            }
        }
        Ok(())
    }

    pub fn correct_option(&self) -> &str {
        &self.options[self.correct_index]
    }
}

/// Reads one JSON question per line. Blank lines are skipped.
pub fn parse_questions(text: &str) -> Result<Vec<CandidateQuestion>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let q: CandidateQuestion = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line: k + 1,
            message: e.to_string(),
        })?;
        q.validate().map_err(|e| Error::Parse {
            line: k + 1,
            message: e.to_string(),
        })?;
        out.push(q);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    TextOnly,
    Multimodal,
}

/// What a judge is asked. `prompt` is the full text sent to a real service;
/// the structured fields let scripted judges answer without parsing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeRequest {
    pub question_id: SampleId,
    pub prompt: String,
    pub question_text: String,
    /// Options in the order presented.
    pub options: Vec<String>,
    pub proposed_answer: Option<String>,
    pub media_ref: Option<String>,
}

pub trait JudgeClient: Sync {
    fn identity(&self) -> &str;
    fn capability(&self) -> Capability;
    fn ask(&self, request: &JudgeRequest) -> Result<String>;
}

fn dispatch(judge: &dyn JudgeClient, request: &JudgeRequest) -> Result<String> {
    if judge.capability() == Capability::TextOnly && request.media_ref.is_some() {
        return Err(Error::WrongCapability {
            judge: judge.identity().to_owned(),
            need: "multimodal",
        });
    }
    judge.ask(request)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Blind-test repeats per question.
    pub repeats: usize,
    /// Extra attempts after a failed judge call.
    pub retries: usize,
    /// Maximum questions in flight.
    pub parallelism: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            repeats: DEFAULT_REPEATS,
            retries: DEFAULT_RETRIES,
            parallelism: 1,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::InvalidConfig(
                "parallelism must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Letter for option `index`: 0 → 'A'.
pub fn option_letter(index: usize) -> char {
    (b'A' + index as u8) as char
}

/// Index of the first standalone option letter in `raw`, case-insensitive.
/// Letters beyond the option count are skipped.
pub fn parse_choice(raw: &str, num_options: usize) -> Result<usize> {
    if !(2..=26).contains(&num_options) {
        return Err(Error::InvalidConfig(format!(
            "option count {num_options} outside 2..=26"
        )));
    }
    raw.split(|c: char| !c.is_alphanumeric())
        .filter_map(|token| {
            let mut chars = token.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) if c.is_ascii_alphabetic() => {
                    Some((c.to_ascii_uppercase() as u8 - b'A') as usize)
                }
                _ => None,
            }
        })
        .find(|&index| index < num_options)
        .ok_or_else(|| Error::Unparseable(raw.to_owned()))
}

/// `Some(true)` for agreement, `Some(false)` for disagreement, judged by the
/// last standalone "yes" or "no" in the response.
pub fn parse_agreement(raw: &str) -> Option<bool> {
    raw.split(|c: char| !c.is_alphanumeric())
        .rev()
        .find_map(|token| {
            if token.eq_ignore_ascii_case("yes") {
                Some(true)
            } else if token.eq_ignore_ascii_case("no") {
                Some(false)
            } else {
                None
            }
        })
}

fn render_options(options: &[String]) -> String {
    let mut out = String::new();
    for (k, option) in options.iter().enumerate() {
        let _ = writeln!(out, "{}. {option}", option_letter(k));
    }
    out
}

pub fn blind_prompt(question_text: &str, options: &[String]) -> String {
    format!(
        "Answer the following multiple-choice question. Reply with the letter of the correct option only.\n\n{question_text}\n{}Answer:",
        render_options(options)
    )
}

pub fn agreement_prompt(question: &CandidateQuestion) -> String {
    let options = question
        .options
        .iter()
        .enumerate()
        .map(|(k, o)| format!("({}) {o}", option_letter(k)))
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "Think step by step before answering.\nFor the given image and question: {} write only the words yes or no if think the option {} is indeed the correct answer out of {} for this question?",
        question.question_text,
        question.correct_option(),
        options
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Kept,
    RemovedBlind,
    RemovedAgreement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Agree,
    Disagree,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disposition {
    pub id: SampleId,
    pub stage: Stage,
    /// Repeats the blind judge answered correctly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blind_correct: Option<usize>,
    /// The blind judge kept failing; the question is kept.
    #[serde(default)]
    pub undecided: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_count: usize,
    pub removed_blind: usize,
    pub removed_agreement: usize,
    pub retained: usize,
    pub retained_ids: Vec<SampleId>,
    pub dispositions: Vec<Disposition>,
}

impl FilterReport {
    fn from_dispositions(dispositions: Vec<Disposition>) -> Self {
        let count = |stage| dispositions.iter().filter(|d| d.stage == stage).count();
        let retained_ids: Vec<SampleId> = dispositions
            .iter()
            .filter(|d| d.stage == Stage::Kept)
            .map(|d| d.id.clone())
            .collect();
        Self {
            input_count: dispositions.len(),
            removed_blind: count(Stage::RemovedBlind),
            removed_agreement: count(Stage::RemovedAgreement),
            retained: retained_ids.len(),
            retained_ids,
            dispositions,
        }
    }

    pub fn reconciles(&self) -> bool {
        self.input_count == self.retained + self.removed_blind + self.removed_agreement
            && self.retained == self.retained_ids.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Kept and removed questions, each in input order, plus one disposition per
/// input question.
#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub kept: Vec<CandidateQuestion>,
    pub removed: Vec<CandidateQuestion>,
    pub dispositions: Vec<Disposition>,
}

/// Maps `f` over `items` with at most `parallelism` in flight, in input order.
fn ordered_map<T: Sync, R: Send>(
    items: &[T],
    parallelism: usize,
    f: impl Fn(&T) -> R + Sync + Send,
) -> Result<Vec<R>> {
    if parallelism <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

fn split(questions: &[CandidateQuestion], dispositions: Vec<Disposition>) -> FilterOutcome {
    let (kept, removed): (Vec<_>, Vec<_>) = questions
        .iter()
        .zip(&dispositions)
        .partition(|(_, d)| d.stage == Stage::Kept);
    FilterOutcome {
        kept: kept.into_iter().map(|(q, _)| q.clone()).collect(),
        removed: removed.into_iter().map(|(q, _)| q.clone()).collect(),
        dispositions,
    }
}

/// Option order for one blind-test repeat of `question`.
pub fn shuffled_order(question: &CandidateQuestion, seed: u64, repeat: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..question.options.len()).collect();
    let mut rng = substream(seed, &format!("blind/{}", question.id), repeat as u64);
    order.shuffle(&mut rng);
    order
}

fn blind_one(
    question: &CandidateQuestion,
    judge: &dyn JudgeClient,
    config: &FilterConfig,
    seed: u64,
) -> Disposition {
    let mut correct = 0;
    for repeat in 0..config.repeats {
        let order = shuffled_order(question, seed, repeat);
        let options: Vec<String> = order.iter().map(|&k| question.options[k].clone()).collect();
        let answer_position = order
            .iter()
            .position(|&k| k == question.correct_index)
            .expect("order is a permutation");
        let request = JudgeRequest {
            question_id: question.id.clone(),
            prompt: blind_prompt(&question.question_text, &options),
            question_text: question.question_text.clone(),
            options,
            proposed_answer: None,
            media_ref: None,
        };
        let mut response = None;
        for attempt in 0..=config.retries {
            match dispatch(judge, &request) {
                Ok(text) => {
                    response = Some(text);
                    break;
                }
                Err(e) => log::warn!(
                    "blind judge {} failed on {} (attempt {}): {e}",
                    judge.identity(),
                    question.id,
                    attempt + 1
                ),
            }
        }
        let Some(response) = response else {
            log::warn!(
                "question {} undecided in blind test; keeping it",
                question.id
            );
            return Disposition {
                id: question.id.clone(),
                stage: Stage::Kept,
                blind_correct: Some(correct),
                undecided: true,
                agreement: None,
            };
        };
        match parse_choice(&response, question.options.len()) {
            Ok(index) if index == answer_position => correct += 1,
            Ok(_) => {}
            Err(_) => log::debug!("unparseable blind answer for {}: {response:?}", question.id),
        }
    }
    Disposition {
        id: question.id.clone(),
        stage: if correct == config.repeats {
            Stage::RemovedBlind
        } else {
            Stage::Kept
        },
        blind_correct: Some(correct),
        undecided: false,
        agreement: None,
    }
}

/// Removes questions the text-only `judge` answers correctly on every repeat.
pub fn blind_test(
    questions: &[CandidateQuestion],
    judge: &dyn JudgeClient,
    config: &FilterConfig,
    seed: u64,
) -> Result<FilterOutcome> {
    config.validate()?;
    if judge.capability() != Capability::TextOnly {
        return Err(Error::WrongCapability {
            judge: judge.identity().to_owned(),
            need: "text_only",
        });
    }
    for q in questions {
        q.validate()?;
    }
    let dispositions = ordered_map(questions, config.parallelism, |q| {
        blind_one(q, judge, config, seed)
    })?;
    Ok(split(questions, dispositions))
}

fn agreement_one(
    question: &CandidateQuestion,
    judge: &dyn JudgeClient,
    config: &FilterConfig,
) -> Disposition {
    let request = JudgeRequest {
        question_id: question.id.clone(),
        prompt: agreement_prompt(question),
        question_text: question.question_text.clone(),
        options: question.options.clone(),
        proposed_answer: Some(question.correct_option().to_owned()),
        media_ref: question.media_ref.clone(),
    };
    let mut verdict = Verdict::Unparseable;
    for attempt in 0..=config.retries {
        match dispatch(judge, &request) {
            Ok(text) => match parse_agreement(&text) {
                Some(true) => {
                    verdict = Verdict::Agree;
                    break;
                }
                Some(false) => {
                    verdict = Verdict::Disagree;
                    break;
                }
                None => log::debug!("unparseable agreement for {}: {text:?}", question.id),
            },
            Err(e) => log::warn!(
                "agreement judge {} failed on {} (attempt {}): {e}",
                judge.identity(),
                question.id,
                attempt + 1
            ),
        }
    }
    if verdict == Verdict::Unparseable {
        log::warn!(
            "no usable agreement verdict for {}; removing it",
            question.id
        );
    }
    Disposition {
        id: question.id.clone(),
        stage: if verdict == Verdict::Agree {
            Stage::Kept
        } else {
            Stage::RemovedAgreement
        },
        blind_correct: None,
        undecided: false,
        agreement: Some(verdict),
    }
}

/// Keeps questions whose proposed answer the multimodal `judge` endorses.
pub fn agreement_filter(
    questions: &[CandidateQuestion],
    judge: &dyn JudgeClient,
    config: &FilterConfig,
) -> Result<FilterOutcome> {
    config.validate()?;
    if judge.capability() != Capability::Multimodal {
        return Err(Error::WrongCapability {
            judge: judge.identity().to_owned(),
            need: "multimodal",
        });
    }
    for q in questions {
        q.validate()?;
        if q.media_ref.is_none() {
            return Err(Error::MissingMedia(q.id.clone()));
        }
    }
    let dispositions = ordered_map(questions, config.parallelism, |q| {
        agreement_one(q, judge, config)
    })?;
    Ok(split(questions, dispositions))
}

/// Blind test followed by the agreement filter on its survivors.
pub fn run_filters(
    questions: &[CandidateQuestion],
    blind_judge: &dyn JudgeClient,
    agreement_judge: &dyn JudgeClient,
    config: &FilterConfig,
    seed: u64,
) -> Result<FilterReport> {
    if let Some(q) = questions.iter().find(|q| q.media_ref.is_none()) {
        return Err(Error::MissingMedia(q.id.clone()));
    }
    let blind = blind_test(questions, blind_judge, config, seed)?;
    let agreement = agreement_filter(&blind.kept, agreement_judge, config)?;
    let mut second: HashMap<&SampleId, &Disposition> =
        agreement.dispositions.iter().map(|d| (&d.id, d)).collect();
    let dispositions = blind
        .dispositions
        .iter()
        .map(|d| match second.remove(&d.id) {
            Some(a) => Disposition {
                stage: a.stage,
                agreement: a.agreement,
                ..d.clone()
            },
            None => d.clone(),
        })
        .collect();
    Ok(FilterReport::from_dispositions(dispositions))
}

/// Report for a single stage.
pub fn report(outcome: &FilterOutcome) -> FilterReport {
    FilterReport::from_dispositions(outcome.dispositions.clone())
}

/// Always answers the option at a fixed position.
#[derive(Debug, Clone)]
pub struct FixedChoiceJudge {
    pub position: usize,
}

impl JudgeClient for FixedChoiceJudge {
    fn identity(&self) -> &str {
        "mock-fixed-choice"
    }

    fn capability(&self) -> Capability {
        Capability::TextOnly
    }

    fn ask(&self, _request: &JudgeRequest) -> Result<String> {
        Ok(option_letter(self.position).to_string())
    }
}

/// Knows the answers to a fixed set of questions and declines the rest.
#[derive(Debug, Clone, Default)]
pub struct OracleJudge {
    answers: HashMap<SampleId, String>,
}

impl OracleJudge {
    pub fn knowing<'a>(questions: impl IntoIterator<Item = &'a CandidateQuestion>) -> Self {
        Self {
            answers: questions
                .into_iter()
                .map(|q| (q.id.clone(), q.correct_option().to_owned()))
                .collect(),
        }
    }
}

impl JudgeClient for OracleJudge {
    fn identity(&self) -> &str {
        "mock-oracle"
    }

    fn capability(&self) -> Capability {
        Capability::TextOnly
    }

    fn ask(&self, request: &JudgeRequest) -> Result<String> {
        let position = self
            .answers
            .get(&request.question_id)
            .and_then(|answer| request.options.iter().position(|o| o == answer));
        Ok(match position {
            Some(k) => format!("({})", option_letter(k)),
            None => "I cannot tell without the figure.".to_owned(),
        })
    }
}

type Script = dyn Fn(&JudgeRequest) -> String + Send + Sync;

/// Multimodal judge whose reply is computed by a closure.
pub struct ScriptedJudge {
    identity: String,
    script: Box<Script>,
}

impl ScriptedJudge {
    pub fn new(
        identity: impl Into<String>,
        script: impl Fn(&JudgeRequest) -> String + Send + Sync + 'static,
    ) -> Self {
        Self {
            identity: identity.into(),
            script: Box::new(script),
        }
    }

    pub fn always(reply: &str) -> Self {
        let reply = reply.to_owned();
        Self::new(format!("mock-always-{reply}"), move |_| reply.clone())
    }
}

impl JudgeClient for ScriptedJudge {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn capability(&self) -> Capability {
        Capability::Multimodal
    }

    fn ask(&self, request: &JudgeRequest) -> Result<String> {
        Ok((self.script)(request))
    }
}

/// Connection settings for a chat-completions style judge service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeEndpoint {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_secs: u64,
}

impl Default for JudgeEndpoint {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            token_env: DEFAULT_TOKEN_ENV.to_owned(),
            timeout_secs: 60,
        }
    }
}

/// Judge backed by an OpenAI-compatible `chat/completions` endpoint.
pub struct HttpJudge {
    identity: String,
    capability: Capability,
    endpoint: JudgeEndpoint,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpJudge {
    pub fn new(endpoint: JudgeEndpoint, capability: Capability) -> Result<Self> {
        if endpoint.endpoint.is_empty() || endpoint.model.is_empty() {
            return Err(Error::InvalidConfig(
                "judge endpoint and model are required".into(),
            ));
        }
        let token = std::env::var(&endpoint.token_env).ok();
        if token.is_none() {
            log::warn!(
                "{} is not set; calling the judge without a token",
                endpoint.token_env
            );
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| Error::Judge(e.to_string()))?;
        Ok(Self {
            identity: endpoint.model.clone(),
            capability,
            endpoint,
            token,
            client,
        })
    }

    pub fn request_body(&self, request: &JudgeRequest) -> serde_json::Value {
        let content = match (&request.media_ref, self.capability) {
            (Some(media), Capability::Multimodal) => serde_json::json!([
                { "type": "text", "text": request.prompt },
                { "type": "image_url", "image_url": { "url": media } },
            ]),
            _ => serde_json::Value::String(request.prompt.clone()),
        };
        serde_json::json!({
            "model": self.endpoint.model,
            "temperature": 0,
            "messages": [{ "role": "user", "content": content }],
        })
    }
}

impl JudgeClient for HttpJudge {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn capability(&self) -> Capability {
        self.capability
    }

    fn ask(&self, request: &JudgeRequest) -> Result<String> {
        let mut call = self
            .client
            .post(&self.endpoint.endpoint)
            .json(&self.request_body(request));
        if let Some(token) = &self.token {
            call = call.bearer_auth(token);
        }
        let response = call
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| Error::Judge(e.to_string()))?;
        let body: serde_json::Value = response.json().map_err(|e| Error::Judge(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_owned)
            .ok_or_else(|| Error::Judge("response has no choices[0].message.content".into()))
    }
}

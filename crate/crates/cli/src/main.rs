//! `liveeval`: maintain a dynamic benchmark from the command line.
//!
//! Machine-readable results go to files, human summaries to stdout and
//! diagnostics to stderr. Exit codes: 0 success, 1 internal error, 2 user or
//! input error.

mod config;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use liveeval::estimator::{build_leaderboard, spearman_rank_correlation};
use liveeval::filters::{
    agreement_filter, blind_test, parse_questions, report, CandidateQuestion, Capability,
    FilterConfig, FixedChoiceJudge, HttpJudge, JudgeClient, OracleJudge, ScriptedJudge,
};
use liveeval::planner::plan_reevaluation;
use liveeval::rasch::{fit, Observations};
use liveeval::simlab::{
    budget_sweep, generate_world, run_seeds, sample_size_study, ExperimentResult,
};
use liveeval::{
    CostHint, EvalStore, FitConfig, ModelId, PlannerConfig, RaschFit, ReevalPlan, Sample, SampleId,
    WorldConfig,
};
use serde::Serialize;

use crate::config::Config;

/// Error caused by the invocation rather than by the program.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

#[derive(Parser, Debug)]
#[command(
    name = "liveeval",
    version,
    about = "Maintain a live benchmark with budgeted re-evaluation"
)]
struct Cli {
    /// TOML file with defaults; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Store snapshot to operate on.
    #[arg(long, global = true)]
    store: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Manage the versioned evaluation store.
    #[command(subcommand)]
    Store(StoreCommand),
    /// Fit the Rasch model on everything observed through a version.
    Fit(FitArgs),
    /// Plan which models to re-evaluate on the next version.
    Plan(PlanArgs),
    /// Observed and estimated scores for a version.
    #[command(alias = "leaderboard")]
    Estimate(EstimateArgs),
    /// Run a question filter.
    #[command(subcommand)]
    Filter(FilterCommand),
    /// Replay the efficient re-evaluation study on synthetic worlds.
    Simulate(SimulateArgs),
    /// Repeat the study for several budgets.
    Sweep(SweepArgs),
    /// Repeat the study for several new-version sizes.
    SampleSize(SampleSizeArgs),
}

#[derive(Args, Debug)]
struct PathArg {
    /// Store snapshot (overrides --store).
    #[arg(long)]
    path: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum StoreCommand {
    /// Create an empty store.
    Init {
        #[command(flatten)]
        path: PathArg,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Append a version.
    AddVersion(AddVersionArgs),
    /// Record outcomes from a `version,model_id,sample_id,correct` file.
    Ingest {
        #[command(flatten)]
        path: PathArg,
        #[arg(long)]
        file: PathBuf,
    },
    /// Check that a version is completely recorded.
    Seal {
        #[command(flatten)]
        path: PathArg,
        /// Defaults to the latest version.
        #[arg(long)]
        version: Option<usize>,
    },
    /// Observed score of a model on a version.
    Score {
        #[command(flatten)]
        path: PathArg,
        #[arg(long)]
        model: ModelId,
        #[arg(long)]
        version: usize,
    },
    /// Write every recorded outcome in the outcome-file format.
    Export {
        #[command(flatten)]
        path: PathArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct AddVersionArgs {
    #[command(flatten)]
    path: PathArg,
    /// Comma-separated sample ids.
    #[arg(long, value_delimiter = ',')]
    samples: Vec<SampleId>,
    /// File with one `sample_id[,domain_tag]` per line.
    #[arg(long)]
    samples_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    new_models: Vec<ModelId>,
    #[arg(long, value_delimiter = ',')]
    reevaluate: Vec<ModelId>,
    /// Models still callable; defaults to the whole roster.
    #[arg(long, value_delimiter = ',')]
    available: Option<Vec<ModelId>>,
    /// Take new and re-evaluated models from a plan document.
    #[arg(long, conflicts_with_all = ["new_models", "reevaluate"])]
    plan: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Defaults to the latest version.
    #[arg(long)]
    version: Option<usize>,
    #[arg(long, default_value = "fit.json")]
    out: PathBuf,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    prior_variance: Option<f64>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    /// Fit over data through the latest version.
    #[arg(long, default_value = "fit.json")]
    fit: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    budget: Option<u64>,
    #[arg(long)]
    similarity_epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    new_models: Vec<ModelId>,
    /// Models callable for the next version; defaults to the latest version's
    /// available set, or the roster when that is empty.
    #[arg(long, value_delimiter = ',')]
    available: Option<Vec<ModelId>>,
    /// File with `model_id,relative_cost` lines.
    #[arg(long)]
    costs: Option<PathBuf>,
    #[arg(long, default_value = "plan.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long, default_value = "fit.json")]
    fit: PathBuf,
    /// Defaults to the latest version.
    #[arg(long)]
    version: Option<usize>,
    #[arg(long, default_value = "leaderboard.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FilterArgs {
    /// One JSON question per line.
    #[arg(long)]
    questions: PathBuf,
    /// Use a scripted judge instead of the configured endpoint.
    #[arg(long)]
    mock: Option<String>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    retries: Option<usize>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    token_env: Option<String>,
    #[arg(long, default_value = "filter-report.json")]
    out: PathBuf,
    /// Also write the surviving questions here.
    #[arg(long)]
    kept: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum FilterCommand {
    /// Remove questions a text-only judge answers without the image.
    /// Mocks: `oracle`, `first`, `position:<k>`.
    Blind {
        #[command(flatten)]
        common: FilterArgs,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Keep questions a multimodal judge agrees with.
    /// Mocks: `yes`, `no`, `even`, `odd`.
    Agreement {
        #[command(flatten)]
        common: FilterArgs,
    },
}

#[derive(Args, Debug)]
struct WorldArgs {
    #[arg(long)]
    models: Option<usize>,
    #[arg(long)]
    domains: Option<usize>,
    #[arg(long)]
    samples_per_domain: Option<usize>,
    #[arg(long)]
    theta_sd: Option<f64>,
    #[arg(long)]
    beta_sd: Option<f64>,
    /// Number of worlds.
    #[arg(long)]
    seeds: Option<usize>,
    /// First world seed; worlds use seed, seed+1, ...
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for per-run reports.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    budget: Option<u64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<usize>,
}

#[derive(Args, Debug)]
struct SampleSizeArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    budget: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let user = err
        .chain()
        .any(|e| e.is::<liveeval::Error>() || e.is::<UsageError>() || e.is::<std::io::Error>());
    if user {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    let store_flag = cli.store.as_deref();
    match cli.command {
        Command::Store(cmd) => store_command(cmd, &config, store_flag),
        Command::Fit(args) => fit_command(args, &config, store_flag),
        Command::Plan(args) => plan_command(args, &config, store_flag),
        Command::Estimate(args) => estimate_command(args, &config, store_flag),
        Command::Filter(cmd) => filter_command(cmd, &config),
        Command::Simulate(args) => simulate_command(args, &config),
        Command::Sweep(args) => sweep_command(args, &config),
        Command::SampleSize(args) => sample_size_command(args, &config),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn to_json(value: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn latest(store: &EvalStore) -> Result<usize> {
    store
        .latest()
        .ok_or_else(|| usage("the store has no versions"))
}

fn store_command(cmd: StoreCommand, config: &Config, store_flag: Option<&Path>) -> Result<()> {
    let resolve = |arg: &PathArg| config.store_path(arg.path.as_deref().or(store_flag));
    match cmd {
        StoreCommand::Init { path, force } => {
            let path = resolve(&path);
            if path.exists() && !force {
                return Err(usage(format!(
                    "{} already exists (use --force to overwrite)",
                    path.display()
                )));
            }
            EvalStore::new().save(&path)?;
            println!("initialized empty store at {}", path.display());
        }
        StoreCommand::AddVersion(args) => {
            let path = resolve(&args.path);
            let mut store = EvalStore::load(&path)?;
            let mut samples: Vec<Sample> = args.samples.into_iter().map(Sample::new).collect();
            if let Some(file) = &args.samples_file {
                samples.extend(read_samples_file(file)?);
            }
            let new_models: BTreeSet<ModelId> = match &args.plan {
                Some(plan) => ReevalPlan::load(plan)?.forced_new_models,
                None => args.new_models.iter().cloned().collect(),
            };
            let available: BTreeSet<ModelId> = match args.available {
                Some(list) => list.into_iter().collect(),
                None => store
                    .roster()
                    .into_iter()
                    .chain(new_models.iter().cloned())
                    .collect(),
            };
            match &args.plan {
                Some(plan) => ReevalPlan::load(plan)?.apply(&mut store, samples, available)?,
                None => {
                    store.add_version(
                        samples,
                        new_models,
                        args.reevaluate.into_iter().collect(),
                        available,
                    )?;
                }
            }
            let t = latest(&store)?;
            let v = store.version(t)?;
            store.save(&path)?;
            println!(
                "added version {t}: {} samples, {} evaluated of {} models",
                v.samples.len(),
                v.evaluated.len(),
                v.roster.len()
            );
        }
        StoreCommand::Ingest { path, file } => {
            let path = resolve(&path);
            let mut store = if path.exists() {
                EvalStore::load(&path)?
            } else {
                EvalStore::new()
            };
            let text = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            let count = store.ingest_outcomes(&text)?;
            store.save(&path)?;
            println!("{count}");
            for v in store.versions() {
                let missing = store.missing_outcomes(v.t)?;
                if missing > 0 {
                    eprintln!("version {}: {missing} outcome(s) still missing", v.t);
                }
            }
        }
        StoreCommand::Seal { path, version } => {
            let store = EvalStore::load(resolve(&path))?;
            let t = match version {
                Some(t) => t,
                None => latest(&store)?,
            };
            store.seal(t)?;
            println!(
                "version {t} is sealed ({} outcomes)",
                store.version(t)?.block_size()
            );
        }
        StoreCommand::Score {
            path,
            model,
            version,
        } => {
            let store = EvalStore::load(resolve(&path))?;
            let score = store.observed_score(&model, version)?;
            println!("{model},{:.1}", score * 100.0);
        }
        StoreCommand::Export { path, out } => {
            let store = EvalStore::load(resolve(&path))?;
            write_file(&out, &store.to_outcome_file())?;
            println!("{}", store.outcome_count());
        }
    }
    Ok(())
}

fn read_samples_file(path: &Path) -> Result<Vec<Sample>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut samples = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (id, tag) = match line.split_once(',') {
            Some((id, tag)) => (id, Some(tag.to_owned())),
            None => (line, None),
        };
        let id =
            SampleId::new(id).map_err(|e| usage(format!("{}:{}: {e}", path.display(), k + 1)))?;
        samples.push(Sample {
            id,
            domain_tag: tag,
        });
    }
    Ok(samples)
}

fn read_costs(path: &Path) -> Result<Vec<CostHint>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut costs = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (k == 0 && line == "model_id,relative_cost") {
            continue;
        }
        let bad = || {
            usage(format!(
                "{}:{}: expected model_id,relative_cost",
                path.display(),
                k + 1
            ))
        };
        let (model, cost) = line.split_once(',').ok_or_else(bad)?;
        costs.push(CostHint {
            model: ModelId::new(model)?,
            relative_cost: cost.trim().parse().map_err(|_| bad())?,
        });
    }
    Ok(costs)
}

fn fit_command(args: FitArgs, config: &Config, store_flag: Option<&Path>) -> Result<()> {
    let store = EvalStore::load(config.store_path(store_flag))?;
    let t = match args.version {
        Some(t) => t,
        None => latest(&store)?,
    };
    let fit_config = FitConfig {
        max_iterations: args.max_iterations.unwrap_or(config.fit.max_iterations),
        tolerance: args.tolerance.unwrap_or(config.fit.tolerance),
        prior_variance: args.prior_variance.unwrap_or(config.fit.prior_variance),
    };
    let result = fit(&Observations::from_store(&store, t)?, &fit_config)?;
    result.save(&args.out)?;
    println!("iterations: {}", result.iterations);
    println!("converged: {}", result.converged);
    println!(
        "penalized log-likelihood: {:.6}",
        result.penalized_log_likelihood
    );
    println!(
        "fitted {} models and {} samples through version {t}; wrote {}",
        result.abilities.0.len(),
        result.difficulties.0.len(),
        args.out.display()
    );
    if !result.converged {
        eprintln!("warning: fit stopped at the iteration limit before converging");
    }
    Ok(())
}

fn plan_command(args: PlanArgs, config: &Config, store_flag: Option<&Path>) -> Result<()> {
    let store = EvalStore::load(config.store_path(store_flag))?;
    let fitted = RaschFit::load(&args.fit)?;
    let prior = latest(&store)?;
    let planner = PlannerConfig {
        budget: args
            .budget
            .map(|b| b as usize)
            .unwrap_or(config.planner.budget),
        similarity_epsilon: args
            .similarity_epsilon
            .unwrap_or(config.planner.similarity_epsilon),
    };
    let available: BTreeSet<ModelId> = match args.available {
        Some(list) => list.into_iter().collect(),
        None => {
            let v = store.version(prior)?;
            if v.available.is_empty() {
                v.roster.clone()
            } else {
                v.available.clone()
            }
        }
    };
    let costs = match &args.costs {
        Some(path) => read_costs(path)?,
        None => Vec::new(),
    };
    let new_models: BTreeSet<ModelId> = args.new_models.into_iter().collect();
    let plan = plan_reevaluation(&store, &fitted, &planner, &new_models, &available, &costs)?;
    plan.save(&args.out)?;
    let anchors: Vec<String> = plan
        .anchors
        .iter()
        .map(|s| Ok(format!("{s} ({:.3})", fitted.difficulty(s)?)))
        .collect::<Result<_>>()?;
    println!("version {} budget {}", plan.version, plan.budget);
    println!("anchors: {}", anchors.join(", "));
    println!("re-evaluate: {}", join(&plan.chosen_models));
    if !plan.forced_new_models.is_empty() {
        println!("new models: {}", join(&plan.forced_new_models));
    }
    println!("models to evaluate: {}", plan.models_to_evaluate().len());
    Ok(())
}

fn join<'a, T: std::fmt::Display + 'a>(items: impl IntoIterator<Item = &'a T>) -> String {
    items
        .into_iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn estimate_command(args: EstimateArgs, config: &Config, store_flag: Option<&Path>) -> Result<()> {
    let store = EvalStore::load(config.store_path(store_flag))?;
    let fitted = RaschFit::load(&args.fit)?;
    let t = match args.version {
        Some(t) => t,
        None => latest(&store)?,
    };
    let board = build_leaderboard(&store, t, &fitted)?;
    write_file(&args.out, &board.to_csv())?;
    print!("{}", board.to_table());
    println!(
        "{} observed, {} estimated",
        board.entries.len() - board.estimated_count(),
        board.estimated_count()
    );
    Ok(())
}

fn filter_command(cmd: FilterCommand, config: &Config) -> Result<()> {
    let (common, capability) = match &cmd {
        FilterCommand::Blind { common, .. } => (common, Capability::TextOnly),
        FilterCommand::Agreement { common } => (common, Capability::Multimodal),
    };
    let text = std::fs::read_to_string(&common.questions)
        .with_context(|| format!("reading {}", common.questions.display()))?;
    let questions = parse_questions(&text)?;
    let mut run = FilterConfig {
        parallelism: common.parallelism.unwrap_or(config.filters.run.parallelism),
        retries: common.retries.unwrap_or(config.filters.run.retries),
        ..config.filters.run
    };
    let judge: Box<dyn JudgeClient> = match &common.mock {
        Some(name) => mock_judge(name, capability, &questions)?,
        None => {
            let mut endpoint = config.filters.judge.clone();
            if let Some(e) = &common.endpoint {
                endpoint.endpoint = e.clone();
            }
            if let Some(m) = &common.model {
                endpoint.model = m.clone();
            }
            if let Some(t) = &common.token_env {
                endpoint.token_env = t.clone();
            }
            Box::new(HttpJudge::new(endpoint, capability)?)
        }
    };
    let outcome = match cmd {
        FilterCommand::Blind { repeats, seed, .. } => {
            let seed =
                seed.ok_or_else(|| usage("the blind test shuffles options and needs --seed"))?;
            run.repeats = repeats.unwrap_or(run.repeats);
            blind_test(&questions, judge.as_ref(), &run, seed)?
        }
        FilterCommand::Agreement { .. } => agreement_filter(&questions, judge.as_ref(), &run)?,
    };
    let summary = report(&outcome);
    write_file(&common.out, &summary.to_json()?)?;
    if let Some(path) = &common.kept {
        let mut lines = String::new();
        for q in &outcome.kept {
            lines.push_str(&serde_json::to_string(q)?);
            lines.push('\n');
        }
        write_file(path, &lines)?;
    }
    println!(
        "input {} removed_blind {} removed_agreement {} retained {}",
        summary.input_count, summary.removed_blind, summary.removed_agreement, summary.retained
    );
    Ok(())
}

fn mock_judge(
    name: &str,
    capability: Capability,
    questions: &[CandidateQuestion],
) -> Result<Box<dyn JudgeClient>> {
    let judge: Box<dyn JudgeClient> = match (capability, name) {
        (Capability::TextOnly, "oracle") => Box::new(OracleJudge::knowing(questions)),
        (Capability::TextOnly, "first") => Box::new(FixedChoiceJudge { position: 0 }),
        (Capability::TextOnly, other) if other.starts_with("position:") => {
            let position = other["position:".len()..]
                .parse()
                .map_err(|_| usage(format!("bad mock {other:?}")))?;
            Box::new(FixedChoiceJudge { position })
        }
        (Capability::Multimodal, "yes" | "no") => Box::new(ScriptedJudge::always(name)),
        (Capability::Multimodal, "even" | "odd") => {
            let want_even = name == "even";
            let index: std::collections::HashMap<SampleId, usize> = questions
                .iter()
                .enumerate()
                .map(|(k, q)| (q.id.clone(), k))
                .collect();
            Box::new(ScriptedJudge::new(format!("mock-{name}"), move |request| {
                let even = index.get(&request.question_id).is_some_and(|k| k % 2 == 0);
                if even == want_even { "yes" } else { "no" }.to_owned()
            }))
        }
        _ => {
            return Err(usage(format!(
                "unknown mock judge {name:?} for this filter"
            )))
        }
    };
    Ok(judge)
}

struct Worlds {
    config: WorldConfig,
    seeds: Vec<u64>,
    out_dir: Option<PathBuf>,
}

fn worlds(args: &WorldArgs, config: &Config) -> Result<Worlds> {
    let base = config.sim.world();
    let world = WorldConfig {
        num_models: args.models.unwrap_or(base.num_models),
        num_domains: args.domains.unwrap_or(base.num_domains),
        samples_per_domain: args.samples_per_domain.unwrap_or(base.samples_per_domain),
        theta_sd: args.theta_sd.unwrap_or(base.theta_sd),
        beta_sd: args.beta_sd.unwrap_or(base.beta_sd),
        ..base
    };
    world.validate()?;
    let first = args.seed.or(config.sim.seed).ok_or_else(|| {
        usage("pass --seed (or set sim.seed in the config); runs are never seeded from the clock")
    })?;
    let count = args.seeds.or(config.sim.seeds).unwrap_or(1);
    if count == 0 {
        bail!(usage("--seeds must be at least 1"));
    }
    Ok(Worlds {
        config: world,
        seeds: (0..count as u64).map(|k| first + k).collect(),
        out_dir: args.out_dir.clone(),
    })
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    budget: usize,
    seeds: &'a [u64],
    mean_overall_mae_points: f64,
    max_overall_mae_points: f64,
    min_spearman: f64,
    evaluations_performed: usize,
    full_reevaluation_baseline: usize,
    saving: f64,
    results: &'a [ExperimentResult],
}

fn simulate_command(args: SimulateArgs, config: &Config) -> Result<()> {
    let worlds = worlds(&args.world, config)?;
    let budget = args
        .budget
        .map(|b| b as usize)
        .unwrap_or(config.planner.budget);
    let results = run_seeds(&worlds.config, &worlds.seeds, budget)?;

    let mut out = String::new();
    for r in &results {
        let _ = writeln!(out, "# seed {}", r.seed);
        out.push_str(&r.to_table());
    }
    let n = results.len() as f64;
    let performed: usize = results.iter().map(|r| r.savings.performed).sum();
    let baseline: usize = results.iter().map(|r| r.savings.full_baseline).sum();
    let summary = SimulationSummary {
        budget,
        seeds: &worlds.seeds,
        mean_overall_mae_points: results.iter().map(|r| r.overall_mae_points).sum::<f64>() / n,
        max_overall_mae_points: results
            .iter()
            .map(|r| r.overall_mae_points)
            .fold(0.0, f64::max),
        min_spearman: results.iter().map(|r| r.spearman).fold(1.0, f64::min),
        evaluations_performed: performed,
        full_reevaluation_baseline: baseline,
        saving: 1.0 - performed as f64 / baseline as f64,
        results: &results,
    };
    let _ = writeln!(
        out,
        "# summary: {} seed(s), budget {budget}, mean MAE {:.3} points, max MAE {:.3} points, min spearman {:.4}",
        results.len(),
        summary.mean_overall_mae_points,
        summary.max_overall_mae_points,
        summary.min_spearman
    );
    let _ = writeln!(
        out,
        "# evaluations on the new version: performed {performed}, full re-evaluation {baseline}, saving {:.1}%",
        summary.saving * 100.0
    );
    print!("{out}");

    if let Some(dir) = &worlds.out_dir {
        for r in &results {
            write_file(&dir.join(format!("seed-{}.json", r.seed)), &to_json(r)?)?;
            write_file(&dir.join(format!("seed-{}.csv", r.seed)), &r.to_table())?;
        }
        write_file(&dir.join("summary.json"), &to_json(&summary)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepBlock {
    budget: usize,
    mean_overall_mae_points: f64,
    runs: Vec<ExperimentResult>,
}

fn sweep_command(args: SweepArgs, config: &Config) -> Result<()> {
    let worlds = worlds(&args.world, config)?;
    if args.budgets.contains(&0) {
        bail!(usage("budgets must be at least 1"));
    }
    let mut blocks: Vec<SweepBlock> = args
        .budgets
        .iter()
        .map(|&budget| SweepBlock {
            budget,
            mean_overall_mae_points: 0.0,
            runs: Vec::new(),
        })
        .collect();
    for &seed in &worlds.seeds {
        let world = generate_world(&WorldConfig {
            seed,
            ..worlds.config
        })?;
        for (block, result) in blocks.iter_mut().zip(budget_sweep(&world, &args.budgets)?) {
            block.runs.push(result);
        }
    }
    let mut out = String::new();
    for block in &mut blocks {
        block.mean_overall_mae_points =
            block.runs.iter().map(|r| r.overall_mae_points).sum::<f64>() / block.runs.len() as f64;
        let _ = writeln!(out, "# budget {}", block.budget);
        out.push_str("seed,overall_mae_points,spearman\n");
        for r in &block.runs {
            let _ = writeln!(
                out,
                "{},{:.3},{:.4}",
                r.seed, r.overall_mae_points, r.spearman
            );
        }
        let _ = writeln!(out, "mean,{:.3}", block.mean_overall_mae_points);
    }
    print!("{out}");
    if let Some(dir) = &worlds.out_dir {
        write_file(&dir.join("sweep.json"), &to_json(&blocks)?)?;
        write_file(&dir.join("sweep.txt"), &out)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SampleSizeReport {
    budget: usize,
    seeds: Vec<u64>,
    sizes: Vec<usize>,
    mean_mae_points: Vec<f64>,
    size_mae_spearman: Option<f64>,
}

fn sample_size_command(args: SampleSizeArgs, config: &Config) -> Result<()> {
    let worlds = worlds(&args.world, config)?;
    let budget = args
        .budget
        .map(|b| b as usize)
        .unwrap_or(config.planner.budget);
    let mut sums = vec![0.0; args.sizes.len()];
    for &seed in &worlds.seeds {
        let world = generate_world(&WorldConfig {
            seed,
            ..worlds.config
        })?;
        for (sum, (_, mae)) in
            sums.iter_mut()
                .zip(sample_size_study(&world, &args.sizes, budget, seed)?)
        {
            *sum += mae;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / worlds.seeds.len() as f64).collect();
    let sizes_f: Vec<f64> = args.sizes.iter().map(|&s| s as f64).collect();
    let rho = spearman_rank_correlation(&sizes_f, &means).ok();
    let mut out = String::from("size,mean_mae_points\n");
    for (size, mae) in args.sizes.iter().zip(&means) {
        let _ = writeln!(out, "{size},{mae:.3}");
    }
    match rho {
        Some(rho) => {
            let _ = writeln!(out, "spearman(size, mae),{rho:.4}");
        }
        None => out.push_str("spearman(size, mae),undefined\n"),
    }
    print!("{out}");
    if let Some(dir) = &worlds.out_dir {
        let report = SampleSizeReport {
            budget,
            seeds: worlds.seeds.clone(),
            sizes: args.sizes.clone(),
            mean_mae_points: means,
            size_mae_spearman: rho,
        };
        write_file(&dir.join("sample-size.json"), &to_json(&report)?)?;
    }
    Ok(())
}

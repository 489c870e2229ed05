//! The five subcommands: calibrate, detect, recommend, simulate, evaluate.
//!
//! Exit codes: 0 success, 1 usage error (flags, config values), 2 data
//! error (missing or malformed files, inputs inconsistent with each other).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};

use klboost_core::catalog::{fit_global_model, Catalog, GlobalModel};
use klboost_core::detect::{calibrate_thresholds, detect_interest};
use klboost_core::error::Error as CoreError;
use klboost_core::eval::{evaluate, AlgorithmSpec, EvalParams};
use klboost_core::rerank::{recommend_with_candidates, BaseScorer};
use klboost_core::session::{split_sessions, Event, Session};
use klboost_core::sim::{sessions_to_events, synth_catalog, synth_sessions, SimConfig, SynthSchema};

use crate::config::Config;
use crate::formats;

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration values: exit 1.
    Usage(anyhow::Error),
    /// Missing or malformed data: exit 2.
    Data(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Data(e) => write!(f, "{e:#}"),
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

fn data(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Data(e.into())
}

type CmdResult = Result<(), CliError>;

// ---------------------------------------------------------------------------
// shared flags
// ---------------------------------------------------------------------------

/// Config-file path plus per-value override flags. Precedence: defaults,
/// then the file, then flags.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON config file; unknown keys are rejected
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Master RNG seed
    #[arg(long)]
    pub seed: Option<u64>,

    /// Default per-property smoothing rate
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Per-test significance level in (0, 1)
    #[arg(long)]
    pub significance: Option<f64>,

    /// Monte Carlo draws per calibration cell
    #[arg(long)]
    pub n_samples: Option<usize>,

    /// Largest session length calibrated separately
    #[arg(long)]
    pub m_max: Option<usize>,

    /// Session gap cutoff in seconds
    #[arg(long = "max-gap")]
    pub max_gap: Option<i64>,

    /// Top-N size
    #[arg(long)]
    pub n: Option<usize>,

    /// Uniform mixing weight for the global value distributions
    #[arg(long)]
    pub smoothing_epsilon: Option<f64>,

    /// Rescore only the base scorer's top candidates instead of all items
    #[arg(long)]
    pub candidates: Option<usize>,
}

impl ConfigArgs {
    /// Builds the effective config; usage error on bad file or values.
    pub fn resolve(&self) -> Result<Config, CliError> {
        let mut config = match &self.config {
            Some(path) => Config::load(path).map_err(usage)?,
            None => Config::default(),
        };
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.significance {
            config.significance = v;
        }
        if let Some(v) = self.n_samples {
            config.n_samples = v;
        }
        if let Some(v) = self.m_max {
            config.m_max = v;
        }
        if let Some(v) = self.max_gap {
            config.max_gap_seconds = v;
        }
        if let Some(v) = self.n {
            config.n = v;
        }
        if let Some(v) = self.smoothing_epsilon {
            config.smoothing_epsilon = v;
        }
        config.validate().map_err(usage)?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerArg {
    Static,
    Uniform,
    Popularity,
}

impl From<ScorerArg> for BaseScorer {
    fn from(s: ScorerArg) -> BaseScorer {
        match s {
            ScorerArg::Static => BaseScorer::StaticCosine,
            ScorerArg::Uniform => BaseScorer::Uniform,
            ScorerArg::Popularity => BaseScorer::Popularity,
        }
    }
}

// ---------------------------------------------------------------------------
// shared loading steps
// ---------------------------------------------------------------------------

fn read_catalog(path: &Path) -> Result<Catalog, CliError> {
    formats::load_catalog(path).map_err(data)
}

fn read_events(path: &Path) -> Result<Vec<Event>, CliError> {
    let (events, skipped) = formats::load_events(path).map_err(data)?;
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} unparsable event row(s)");
    }
    Ok(events)
}

fn fit_model(catalog: &Catalog, events: &[Event], config: &Config) -> Result<GlobalModel, CliError> {
    let fit = fit_global_model(catalog, events, config.smoothing_epsilon).map_err(data)?;
    if fit.skipped_events > 0 {
        eprintln!(
            "warning: skipped {} event(s) referencing unknown items",
            fit.skipped_events
        );
    }
    Ok(fit.model)
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Catalog JSON
    #[arg(long)]
    pub catalog: PathBuf,

    /// Optional events CSV used to fit the item prior G
    #[arg(long)]
    pub events: Option<PathBuf>,

    /// Output path for the threshold table JSON
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> CmdResult {
    let config = args.config.resolve()?;
    let catalog = read_catalog(&args.catalog)?;
    let events = match &args.events {
        Some(path) => read_events(path)?,
        None => Vec::new(),
    };
    let global = fit_model(&catalog, &events, &config)?;
    let alphas = config.resolve_alphas(catalog.schema()).map_err(usage)?;

    let mut table = calibrate_thresholds(
        catalog.schema(),
        &global,
        &alphas,
        config.significance,
        config.n_samples,
        config.m_max,
        config.seed,
    )
    .map_err(usage)?;
    for (key, &eps) in &config.epsilon_overrides {
        table.set_override(key, eps).map_err(usage)?;
    }

    formats::save_thresholds(&table, &args.out).map_err(data)?;
    eprintln!(
        "calibrated {} properties x {} lengths ({} samples per cell, significance {}, seed {}) -> {}",
        catalog.schema().len(),
        config.m_max,
        config.n_samples,
        config.significance,
        config.seed,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Catalog JSON
    #[arg(long)]
    pub catalog: PathBuf,

    /// Events CSV to sessionize and scan
    #[arg(long)]
    pub events: PathBuf,

    /// Threshold table JSON from `calibrate`
    #[arg(long)]
    pub thresholds: PathBuf,

    /// Output path for JSON-lines reports (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn cmd_detect(args: &DetectArgs) -> CmdResult {
    let config = args.config.resolve()?;
    let catalog = read_catalog(&args.catalog)?;
    let table = formats::load_thresholds(&args.thresholds, catalog.schema()).map_err(data)?;
    let events = read_events(&args.events)?;
    let global = fit_model(&catalog, &events, &config)?;
    let alphas = config.resolve_alphas(catalog.schema()).map_err(usage)?;

    let sessions = split_sessions(&events, config.max_gap_seconds).map_err(data)?;
    let mut reports = Vec::with_capacity(sessions.len());
    for session in &sessions {
        let report = detect_interest(session, &table, &alphas, &global, &catalog)
            .map_err(classify_core)?;
        reports.push((session.user_id.clone(), report));
    }

    match &args.out {
        Some(path) => {
            let file = fs::File::create(path)
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(data)?;
            let mut w = BufWriter::new(file);
            formats::write_report_lines(&mut w, &reports, catalog.schema()).map_err(data)?;
            w.flush().map_err(data)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            formats::write_report_lines(&mut w, &reports, catalog.schema()).map_err(data)?;
        }
    }
    eprintln!("detected over {} session(s)", reports.len());
    Ok(())
}

/// Core errors raised mid-pipeline are data problems (inputs inconsistent
/// with each other), not flag mistakes.
fn classify_core(e: CoreError) -> CliError {
    data(anyhow!(e))
}

// ---------------------------------------------------------------------------
// recommend
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct RecommendArgs {
    /// Catalog JSON
    #[arg(long)]
    pub catalog: PathBuf,

    /// Threshold table JSON from `calibrate`
    #[arg(long)]
    pub thresholds: PathBuf,

    /// Optional events CSV used to fit the item prior G
    #[arg(long)]
    pub events: Option<PathBuf>,

    /// Base weight function
    #[arg(long, value_enum, default_value = "popularity")]
    pub scorer: ScorerArg,

    /// File with one session item id per line (alternative to ITEMS)
    #[arg(long)]
    pub session: Option<PathBuf>,

    /// Session item ids, oldest first; the last is the anchor
    #[arg(value_name = "ITEMS")]
    pub items: Vec<String>,

    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn cmd_recommend(args: &RecommendArgs) -> CmdResult {
    let config = args.config.resolve()?;
    let items: Vec<String> = match (&args.session, args.items.is_empty()) {
        (Some(path), true) => fs::read_to_string(path)
            .with_context(|| format!("cannot read session file {}", path.display()))
            .map_err(data)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        (None, false) => args.items.clone(),
        (Some(_), false) => {
            return Err(usage(anyhow!(
                "give session items either as arguments or with --session, not both"
            )))
        }
        (None, true) => {
            return Err(usage(anyhow!(
                "no session items; pass item ids as arguments or use --session <file>"
            )))
        }
    };
    if items.is_empty() {
        return Err(usage(anyhow!("the session file contains no item ids")));
    }

    let catalog = read_catalog(&args.catalog)?;
    let table = formats::load_thresholds(&args.thresholds, catalog.schema()).map_err(data)?;
    let events = match &args.events {
        Some(path) => read_events(path)?,
        None => Vec::new(),
    };
    let global = fit_model(&catalog, &events, &config)?;
    let alphas = config.resolve_alphas(catalog.schema()).map_err(usage)?;

    let session = Session::from_items("cli", items);
    let report =
        detect_interest(&session, &table, &alphas, &global, &catalog).map_err(classify_core)?;
    let ranked = recommend_with_candidates(
        &session,
        args.scorer.into(),
        &report,
        config.n,
        args.config.candidates,
        &alphas,
        &global,
        &catalog,
    )
    .map_err(classify_core)?;

    if report.interests.is_empty() {
        eprintln!("no interest detected (session length {})", session.len());
    } else {
        let keys: Vec<&str> = report
            .interests
            .iter()
            .map(|&k| catalog.schema().property(k).key())
            .collect();
        eprintln!("detected interest in: {}", keys.join(", "));
    }
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for (id, score) in &ranked.entries {
        writeln!(w, "{id}\t{score:.6}").map_err(data)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory for catalog.json and events.csv
    #[arg(long)]
    pub out: PathBuf,

    /// Number of catalog items
    #[arg(long, default_value_t = 200)]
    pub items: usize,

    /// Property spec as `key:cardinality` pairs, comma separated
    #[arg(long, default_value = "color:10,brand:8")]
    pub props: String,

    /// Number of sessions to simulate
    #[arg(long, default_value_t = 1000)]
    pub sessions: usize,

    /// Shortest simulated session
    #[arg(long, default_value_t = 5)]
    pub length_min: usize,

    /// Longest simulated session
    #[arg(long, default_value_t = 10)]
    pub length_max: usize,

    /// Plant one property per session, reweighting one value by this ratio;
    /// omit for pure null sessions
    #[arg(long)]
    pub planted_ratio: Option<f64>,

    #[command(flatten)]
    pub config: ConfigArgs,
}

fn parse_props(spec: &str) -> Result<SynthSchema> {
    let mut props = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, card) = part
            .split_once(':')
            .ok_or_else(|| anyhow!("property spec {part:?} is not `key:cardinality`"))?;
        let cardinality: usize = card
            .trim()
            .parse()
            .with_context(|| format!("bad cardinality in {part:?}"))?;
        props.push((key.trim().to_string(), cardinality));
    }
    if props.is_empty() {
        bail!("property spec is empty");
    }
    Ok(SynthSchema::uniform(
        &props
            .iter()
            .map(|(k, c)| (k.as_str(), *c))
            .collect::<Vec<_>>(),
    ))
}

pub fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    let config = args.config.resolve()?;
    let schema = parse_props(&args.props).map_err(usage)?;

    let (catalog, global) =
        synth_catalog(args.items, &schema, config.smoothing_epsilon, config.seed)
            .map_err(usage)?;
    let sim = SimConfig {
        n_sessions: args.sessions,
        length_min: args.length_min,
        length_max: args.length_max,
        planted_ratio: args.planted_ratio,
        seed: config.seed,
    };
    let sessions = synth_sessions(&catalog, &global, &sim).map_err(usage)?;
    let events = sessions_to_events(&sessions);

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))
        .map_err(data)?;
    let catalog_path = args.out.join("catalog.json");
    let events_path = args.out.join("events.csv");
    formats::save_catalog(&catalog, &catalog_path).map_err(data)?;
    formats::save_events(&events, &events_path).map_err(data)?;
    eprintln!(
        "wrote {} items to {} and {} events ({} sessions) to {}",
        catalog.len(),
        catalog_path.display(),
        events.len(),
        sessions.len(),
        events_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Catalog JSON
    #[arg(long)]
    pub catalog: PathBuf,

    /// Events CSV to sessionize and evaluate on
    #[arg(long)]
    pub events: PathBuf,

    /// Threshold table JSON from `calibrate`
    #[arg(long)]
    pub thresholds: PathBuf,

    /// Output path for the report CSV
    #[arg(long)]
    pub out: PathBuf,

    /// Comma-separated algorithms: uniform, popularity, static and their
    /// kl- enhanced variants
    #[arg(
        long,
        default_value = "uniform,kl-uniform,popularity,kl-popularity,static,kl-static"
    )]
    pub algorithms: String,

    /// Comma-separated top-N cutoffs to report
    #[arg(long, default_value = "5,10,20")]
    pub n_list: String,

    #[command(flatten)]
    pub config: ConfigArgs,
}

fn parse_algorithms(spec: &str) -> Result<Vec<AlgorithmSpec>> {
    let mut algorithms = Vec::new();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (enhanced, base) = match name.strip_prefix("kl-") {
            Some(rest) => (true, rest),
            None => (false, name),
        };
        let scorer = match base {
            "uniform" => BaseScorer::Uniform,
            "popularity" => BaseScorer::Popularity,
            "static" => BaseScorer::StaticCosine,
            _ => bail!("unknown algorithm {name:?}"),
        };
        algorithms.push(if enhanced {
            AlgorithmSpec::enhanced(scorer)
        } else {
            AlgorithmSpec::base(scorer)
        });
    }
    if algorithms.is_empty() {
        bail!("algorithm list is empty");
    }
    Ok(algorithms)
}

fn parse_n_list(spec: &str) -> Result<Vec<usize>> {
    let mut ns = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let n: usize = part.parse().with_context(|| format!("bad N {part:?}"))?;
        if n == 0 {
            bail!("N must be at least 1");
        }
        ns.push(n);
    }
    if ns.is_empty() {
        bail!("N list is empty");
    }
    Ok(ns)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CmdResult {
    let config = args.config.resolve()?;
    let algorithms = parse_algorithms(&args.algorithms).map_err(usage)?;
    let n_values = parse_n_list(&args.n_list).map_err(usage)?;

    let catalog = read_catalog(&args.catalog)?;
    let table = formats::load_thresholds(&args.thresholds, catalog.schema()).map_err(data)?;
    let events = read_events(&args.events)?;
    let global = fit_model(&catalog, &events, &config)?;
    let alphas = config.resolve_alphas(catalog.schema()).map_err(usage)?;
    let sessions = split_sessions(&events, config.max_gap_seconds).map_err(data)?;

    let outcome = evaluate(
        &sessions,
        &algorithms,
        &EvalParams {
            n_values: &n_values,
            alphas: &alphas,
            candidates: args.config.candidates,
        },
        &table,
        &global,
        &catalog,
    )
    .map_err(classify_core)?;

    formats::save_report(&outcome.summaries, &args.out).map_err(data)?;

    println!(
        "{} sessions evaluated, {} skipped as too short",
        outcome.evaluated_sessions, outcome.skipped_short
    );
    println!("{:<16} {:>4} {:>9} {:>10} {:>10}", "algorithm", "N", "sessions", "mean_dcg", "mean_hit");
    for s in &outcome.summaries {
        println!(
            "{:<16} {:>4} {:>9} {:>10.4} {:>10.4}",
            s.algorithm, s.n, s.sessions, s.mean_dcg, s.mean_hit
        );
    }
    Ok(())
}

//! The `smart` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use url::Url;

use crate::audit::{run_audit, AuditError, AuditOptions};
use crate::baseline::{beam_search, exhaustive_search, BaselineConfig};
use crate::dataset::{load_csv, load_schema_file, split, ColumnType, Dataset, TypeOverrides};
use crate::falsify::{correctness, Correction, TestConfig};
use crate::hypothesis::{read_fixture_file, HypothesisProvider};
use crate::metrics::slice_metrics;
use crate::model::{fit_logistic, LogisticConfig, Predictions};
use crate::predicate::{eval_predicate, parse_predicate};
use crate::remote::{RemoteClient, RemoteConfig, Transport, UreqTransport};
use crate::report::{from_machine, render_markdown, summarize_with_provider, to_machine, ReportFormat};
use crate::splitter::{optimal_categorical_split, optimal_split_query, SplitConstraints};
use crate::synth::{
    fnr_provider, infeasible_provider, run_bias_experiment, run_fnr_experiment, run_fp_experiment,
    run_scenario_experiment, subgroup_provider, ExperimentSettings, ScenarioKind, SynthConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_PROVIDER: i32 = 4;
pub const EXIT_NO_SLICES: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "smart", version, about = "Context-aware slice testing for tabular models")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate, operationalize and test failure hypotheses, then write a report.
    Audit(AuditArgs),
    /// Find the split of given features with the largest accuracy gap.
    Split(SplitArgs),
    /// Data-only slice search over all conditions and conjunctions.
    Baseline(BaselineArgs),
    /// Run a synthetic experiment.
    Simulate(SimulateArgs),
    /// Slice metrics for given queries.
    Metrics(MetricsArgs),
    /// Re-render a machine-readable report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
#[group(id = "predictions", required = true, multiple = false)]
pub struct PredictionArgs {
    /// Column of the data holding the model's binary predictions (removed before testing).
    #[arg(long, value_name = "NAME", group = "predictions")]
    pub pred_col: Option<String>,
    /// CSV of predictions, one per data row (header `prediction`).
    #[arg(long, value_name = "PATH", group = "predictions")]
    pub pred_file: Option<PathBuf>,
    /// Fit the built-in logistic model on a training split and test on the rest.
    #[arg(long, group = "predictions")]
    pub fit_logistic: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    /// Binary target column.
    #[arg(long, value_name = "NAME")]
    pub target: String,
    /// Column type overrides, one `name: numeric|categorical|boolean` per line.
    #[arg(long, value_name = "PATH")]
    pub schema: Option<PathBuf>,
    #[command(flatten)]
    pub predictions: PredictionArgs,
    /// Share of rows held out for testing with --fit-logistic.
    #[arg(long, default_value_t = 0.5)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderChoice {
    File,
    Scripted,
    Remote,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_parser = ["none", "bonferroni"])]
    pub correction: Option<String>,
    /// Resamples for the permutation p-value.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap_b: usize,
    /// Smallest slice that is tested.
    #[arg(long, default_value_t = 10)]
    pub min_group: usize,
}

impl TestArgs {
    fn config(&self, default_correction: Correction, seed: u64) -> Result<TestConfig, CliError> {
        let correction = match &self.correction {
            Some(c) => c.parse().map_err(CliError::config)?,
            None => default_correction,
        };
        let cfg = TestConfig {
            alpha: self.alpha,
            correction,
            bootstrap_b: self.bootstrap_b,
            min_slice_size: self.min_group,
            seed,
            ..TestConfig::default()
        };
        cfg.validate().map_err(|e| CliError::config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Task description given to the provider.
    #[arg(long, default_value = "")]
    pub context: String,
    /// Extra requirements for generated hypotheses.
    #[arg(long)]
    pub requirements: Option<String>,
    #[arg(long, value_enum, default_value_t = ProviderChoice::File)]
    pub provider: ProviderChoice,
    /// Hypothesis file for `--provider file` (JSON lines).
    #[arg(long, value_name = "PATH")]
    pub hypotheses: Option<PathBuf>,
    /// Canned replies for `--provider scripted`.
    #[arg(long, value_name = "PATH")]
    pub fixtures: Option<PathBuf>,
    /// Chat-completions URL for `--provider remote`; the key is read from SMART_API_KEY.
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    #[arg(long, value_name = "NAME")]
    pub model: Option<String>,
    /// Hypotheses to request.
    #[arg(long, default_value_t = 5)]
    pub n_hypotheses: usize,
    #[command(flatten)]
    pub test: TestArgs,
    /// Hypotheses kept after ranking.
    #[arg(long, default_value_t = 5)]
    pub top_n: usize,
    /// Largest slice allowed when splitting.
    #[arg(long)]
    pub max_group: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub max_depth: usize,
    /// Skip self-falsification and keep the provider's order.
    #[arg(long)]
    pub nsf: bool,
    /// Derive every slice from the data instead of the provider's queries.
    #[arg(long)]
    pub data_driven_ops: bool,
    #[arg(long)]
    pub skip_feasibility: bool,
    /// Refinement rounds for the feasibility analysis.
    #[arg(long, default_value_t = 1)]
    pub n_refine: usize,
    /// Also report textbook odds ratios.
    #[arg(long = "conventional-or")]
    pub conventional_odds: bool,
    /// Ask the provider for a recommendations section.
    #[arg(long)]
    pub summarize: bool,
    /// Record the generation time in the report header.
    #[arg(long)]
    pub timestamp: bool,
    /// Exit with status 5 when no slice was tested.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value = "smart-out", value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Features to split on (comma separated or repeated).
    #[arg(long = "feature", value_delimiter = ',', required = true)]
    pub features: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub min_group: usize,
    #[arg(long)]
    pub max_group: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub max_depth: usize,
    /// Largest level subset for a single categorical feature.
    #[arg(long, default_value_t = 2)]
    pub max_subset: usize,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Conditions per conjunction.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Quantile bins per numeric column.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Beam width; exhaustive search when absent.
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    #[command(flatten)]
    pub test: TestArgs,
    /// Write all results as JSON lines.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Fnr,
    Bias,
    Fp,
    Scenarios,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rows per generated dataset (experiment default when absent).
    #[arg(long)]
    pub n_rows: Option<usize>,
    /// fnr: corrupted groups per run.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3])]
    pub n_corrupted: Vec<usize>,
    /// bias: corruption proportions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.2])]
    pub tau: Vec<f64>,
    /// bias: datasets, each with `--runs` corruptions.
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    /// fp: irrelevant columns added.
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8])]
    pub k: Vec<usize>,
    /// Write results as JSON lines.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Slice query (repeatable).
    #[arg(long = "slice", required = true)]
    pub slices: Vec<String>,
    /// Also report textbook odds ratios.
    #[arg(long = "conventional-or")]
    pub conventional_odds: bool,
    /// Print JSON lines instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Machine-readable report (report.jsonl).
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, default_value = "markdown")]
    pub format: String,
    /// Output file; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<AuditError> for CliError {
    fn from(e: AuditError) -> Self {
        let code = match e {
            AuditError::Config(_) => EXIT_CONFIG,
            AuditError::Data(_) => EXIT_DATA,
            AuditError::Provider(_) => EXIT_PROVIDER,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

/// Where remote requests go; tests substitute a recording transport.
pub type TransportFactory = dyn Fn() -> Box<dyn Transport>;

/// Parses `args` (program name first) and runs the command, returning the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with_transport(args, &|| Box::new(UreqTransport))
}

pub fn run_with_transport<I, T>(args: I, transport: &TransportFactory) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let result = match cli.command {
        Command::Audit(a) => audit(a, transport),
        Command::Split(a) => split_cmd(a),
        Command::Baseline(a) => baseline(a),
        Command::Simulate(a) => simulate(a),
        Command::Metrics(a) => metrics(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// The dataset under test and the model's predictions on it.
struct Loaded {
    dataset: Dataset,
    predictions: Predictions,
}

fn load(args: &DataArgs) -> Result<Loaded, CliError> {
    let overrides = match &args.schema {
        Some(p) => load_schema_file(p).map_err(|e| CliError::config(format!("dataset: {e}")))?,
        None => TypeOverrides::new(),
    };
    let dataset =
        load_csv(&args.data, Some(&args.target), &overrides).map_err(|e| CliError::data(format!("dataset: {e}")))?;
    let p = &args.predictions;
    let loaded = if let Some(col) = &p.pred_col {
        if col == &args.target {
            return Err(CliError::config("--pred-col names the target column"));
        }
        let predictions = Predictions::from_column(&dataset, col).map_err(|e| CliError::data(format!("model: {e}")))?;
        let dataset = dataset.without_column(col).map_err(|e| CliError::data(format!("dataset: {e}")))?;
        Loaded { dataset, predictions }
    } else if let Some(path) = &p.pred_file {
        let predictions = Predictions::load(path).map_err(|e| CliError::data(format!("model: {e}")))?;
        predictions
            .check_len(dataset.n_rows())
            .map_err(|e| CliError::data(format!("model: {e}")))?;
        Loaded { dataset, predictions }
    } else {
        let (train, test) =
            split(&dataset, args.test_fraction, args.seed).map_err(|e| CliError::config(format!("dataset: {e}")))?;
        let model = fit_logistic(
            &train,
            &LogisticConfig {
                seed: args.seed,
                ..LogisticConfig::default()
            },
        )
        .map_err(|e| CliError::data(format!("model: {e}")))?;
        info!("logistic model fit on {} rows", train.n_rows());
        let predictions = model.predict(&test).map_err(|e| CliError::data(format!("model: {e}")))?;
        Loaded {
            dataset: test,
            predictions,
        }
    };
    Ok(loaded)
}

fn build_provider(args: &AuditArgs, transport: &TransportFactory) -> Result<HypothesisProvider, CliError> {
    match args.provider {
        ProviderChoice::File => {
            let path = args
                .hypotheses
                .as_ref()
                .ok_or_else(|| CliError::config("--provider file needs --hypotheses"))?;
            Ok(HypothesisProvider::file(path))
        }
        ProviderChoice::Scripted => {
            let path = args
                .fixtures
                .as_ref()
                .ok_or_else(|| CliError::config("--provider scripted needs --fixtures"))?;
            let replies = read_fixture_file(path).map_err(|e| CliError::config(format!("hypothesis: {e}")))?;
            Ok(HypothesisProvider::scripted(replies))
        }
        ProviderChoice::Remote => {
            let endpoint = args
                .endpoint
                .as_ref()
                .ok_or_else(|| CliError::config("--provider remote needs --endpoint"))?;
            let mut config = RemoteConfig {
                endpoint_url: Url::parse(endpoint).map_err(|e| CliError::config(format!("--endpoint: {e}")))?,
                ..RemoteConfig::default()
            };
            if let Some(m) = &args.model {
                config.model_name = m.clone();
            }
            let client = RemoteClient::with_transport(config, transport())
                .map_err(|e| CliError::config(format!("remote: {e}")))?;
            Ok(HypothesisProvider::remote(client))
        }
    }
}

fn audit(args: AuditArgs, transport: &TransportFactory) -> Result<i32, CliError> {
    let mut provider = build_provider(&args, transport)?;
    let loaded = load(&args.data)?;
    let opts = AuditOptions {
        context: args.context.clone(),
        n_hypotheses: args.n_hypotheses,
        requirements: args.requirements.clone(),
        feasibility: !args.skip_feasibility,
        n_refine: args.n_refine,
        nsf: args.nsf,
        data_driven_ops: args.data_driven_ops,
        test: TestConfig {
            top_n: args.top_n,
            ..args.test.config(Correction::Bonferroni, args.data.seed)?
        },
        split: SplitConstraints {
            min_group_size: args.test.min_group,
            max_group_size: args.max_group,
            max_depth: args.max_depth,
        },
        conventional_odds: args.conventional_odds,
        ..AuditOptions::default()
    };
    let mut report = run_audit(&loaded.dataset, &loaded.predictions, &opts, &mut provider)?;
    if args.summarize && !report.hypotheses.is_empty() && !summarize_with_provider(&mut report, &mut provider) {
        warn!("summary request failed; report written without it");
    }
    if args.timestamp {
        report.header.generated_at_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d: Duration| d.as_secs());
    }

    fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    let write = |name: &str, text: &str| {
        let path = args.out_dir.join(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    };
    write("report.md", &render_markdown(&report))?;
    write("report.jsonl", &to_machine(&report))?;
    if !provider.transcript.is_empty() {
        write("transcript.log", &provider.transcript_log())?;
    }
    println!(
        "{} hypotheses, {} tested, {} significant; report in {}",
        report.hypotheses.len(),
        report.tested(),
        report.selected().len(),
        args.out_dir.display()
    );
    if args.strict && report.tested() == 0 {
        eprintln!("no slices were tested");
        return Ok(EXIT_NO_SLICES);
    }
    Ok(EXIT_OK)
}

fn split_cmd(args: SplitArgs) -> Result<i32, CliError> {
    let loaded = load(&args.data)?;
    let labels = loaded.dataset.labels().map_err(|e| CliError::data(e.to_string()))?;
    let correct = correctness(&labels, &loaded.predictions).map_err(|e| CliError::data(e.to_string()))?;
    let constraints = SplitConstraints {
        min_group_size: args.min_group,
        max_group_size: args.max_group,
        max_depth: args.max_depth,
    };
    let features: Vec<&str> = args.features.iter().map(String::as_str).collect();
    let single_categorical = features.len() == 1
        && loaded
            .dataset
            .column(features[0])
            .is_some_and(|c| c.column_type() == ColumnType::Categorical);
    let result = if single_categorical {
        optimal_categorical_split(&loaded.dataset, &correct, features[0], &constraints, args.max_subset)
    } else {
        optimal_split_query(&loaded.dataset, &correct, &features, &constraints)
    }
    .map_err(|e| CliError::data(format!("splitter: {e}")))?;
    println!("{}", result.predicate.render());
    println!("gap {:.4}  group size {}  candidates {}", result.gap, result.group_size, result.candidates_considered);
    Ok(EXIT_OK)
}

fn baseline(args: BaselineArgs) -> Result<i32, CliError> {
    let loaded = load(&args.data)?;
    let labels = loaded.dataset.labels().map_err(|e| CliError::data(e.to_string()))?;
    let config = BaselineConfig {
        max_order: args.order,
        numeric_bins: args.bins,
        beam_width: args.beam.unwrap_or(BaselineConfig::default().beam_width),
        top_k: args.top_k,
        test: args.test.config(Correction::None, args.data.seed)?,
    };
    let outcome = match args.beam {
        Some(_) => beam_search(&loaded.dataset, &labels, &loaded.predictions, &config),
        None => exhaustive_search(&loaded.dataset, &labels, &loaded.predictions, &config),
    }
    .map_err(|e| match e {
        crate::baseline::BaselineError::Config(m) => CliError::config(format!("baseline: {m}")),
        other => CliError::data(format!("baseline: {other}")),
    })?;
    println!(
        "{} candidates, {} tests, {} significant",
        outcome.candidates_enumerated,
        outcome.tests_performed,
        outcome.results.iter().filter(|r| r.significant).count()
    );
    println!("| Slice | n | p-value | ΔAcc |");
    println!("|---|---|---|---|");
    for r in outcome.flagged() {
        println!(
            "| `{}` | {} | {:.3} | {:.3} |",
            r.predicate.render(),
            r.group_size,
            r.p_value,
            r.delta_acc
        );
    }
    if let Some(path) = &args.out {
        let mut text = String::new();
        for r in &outcome.results {
            text.push_str(&json_line(r));
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| io_err(path, e))?;
    }
    Ok(EXIT_OK)
}

fn simulate(args: SimulateArgs) -> Result<i32, CliError> {
    let fail = |e: crate::synth::SynthError| match e {
        crate::synth::SynthError::Config(m) => CliError::config(m),
        other => CliError::data(other.to_string()),
    };
    let mut lines: Vec<String> = Vec::new();
    match args.experiment {
        Experiment::Fnr => {
            let config = SynthConfig {
                seed: args.seed,
                n_rows: args.n_rows.unwrap_or(SynthConfig::default().n_rows),
                ..SynthConfig::default()
            };
            let settings = ExperimentSettings::fnr();
            println!("| n | SMART FNR | baseline FNR |");
            println!("|---|---|---|");
            for &n in &args.n_corrupted {
                let s = run_fnr_experiment(n, args.runs, &config, &settings, &fnr_provider).map_err(fail)?;
                println!(
                    "| {n} | {:.2} ± {:.2} | {:.2} ± {:.2} |",
                    s.smart.mean, s.smart.sd, s.baseline.mean, s.baseline.sd
                );
                lines.push(json_line(&s));
            }
        }
        Experiment::Bias => {
            let base = SynthConfig::bias_experiment();
            let config = SynthConfig {
                seed: args.seed,
                n_rows: args.n_rows.unwrap_or(base.n_rows),
                ..base
            };
            let rows = run_bias_experiment(
                &args.tau,
                args.runs,
                args.seeds,
                &config,
                &ExperimentSettings::default(),
                &subgroup_provider,
            )
            .map_err(fail)?;
            println!("| tau | corrupted | P_white | P_black |");
            println!("|---|---|---|---|");
            for r in &rows {
                println!(
                    "| {} | {} | {:.2} ± {:.2} | {:.2} ± {:.2} |",
                    r.tau, r.corrupted, r.p_white.mean, r.p_white.sd, r.p_black.mean, r.p_black.sd
                );
                lines.push(json_line(r));
            }
        }
        Experiment::Fp => {
            let config = SynthConfig {
                seed: args.seed,
                n_rows: args.n_rows.unwrap_or(SynthConfig::default().n_rows),
                ..SynthConfig::default()
            };
            println!("| k | SMART irrelevant share | baseline irrelevant share |");
            println!("|---|---|---|");
            for &k in &args.k {
                let s = run_fp_experiment(k, args.runs, &config, &ExperimentSettings::default(), &subgroup_provider)
                    .map_err(fail)?;
                println!(
                    "| {k} | {:.2} ± {:.2} | {:.2} ± {:.2} |",
                    s.smart.mean, s.smart.sd, s.baseline.mean, s.baseline.sd
                );
                lines.push(json_line(&s));
            }
        }
        Experiment::Scenarios => {
            println!("| scenario | SMART runs with slices | baseline runs with slices |");
            println!("|---|---|---|");
            for kind in [ScenarioKind::Uniform, ScenarioKind::Skewed, ScenarioKind::Interactions] {
                let s = run_scenario_experiment(
                    kind,
                    args.n_rows.unwrap_or(2000),
                    args.runs,
                    args.seed,
                    &ExperimentSettings::default(),
                    &infeasible_provider,
                )
                .map_err(fail)?;
                println!(
                    "| {kind:?} | {}/{} | {}/{} |",
                    s.smart_runs_with_slices(),
                    s.runs,
                    s.baseline_runs_with_slices(),
                    s.runs
                );
                lines.push(json_line(&s));
            }
        }
    }
    if let Some(path) = &args.out {
        let mut text = lines.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| io_err(path, e))?;
    }
    Ok(EXIT_OK)
}

fn json_line<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable")
}

fn metrics(args: MetricsArgs) -> Result<i32, CliError> {
    let loaded = load(&args.data)?;
    let labels = loaded.dataset.labels().map_err(|e| CliError::data(e.to_string()))?;
    let mut rows = Vec::new();
    for q in &args.slices {
        let p = parse_predicate(q, &loaded.dataset).map_err(|e| CliError::config(format!("predicate `{q}`: {e}")))?;
        let slice = eval_predicate(&p, &loaded.dataset).map_err(|e| CliError::config(e.to_string()))?;
        let m = slice_metrics(&slice, &labels, &loaded.predictions, args.conventional_odds)
            .map_err(|e| CliError::data(format!("metrics `{q}`: {e}")))?;
        rows.push((p.render(), m));
    }
    let out = std::io::stdout();
    let mut out = out.lock();
    let na = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.2}"));
    if args.json {
        for (q, m) in &rows {
            let mut v = serde_json::to_value(m).expect("serializable");
            v["slice"] = serde_json::Value::String(q.clone());
            writeln!(out, "{v}").map_err(|e| CliError::data(e.to_string()))?;
        }
    } else {
        let _ = writeln!(
            out,
            "| Slice | group_size | support | num_criteria | outcome_diff | accuracy_diff | odds_ratio_outcome | odds_ratio_acc | lift_outcome | lift_acc | weighted_relative_y | weighted_relative_acc |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|---|---|---|---|---|---|---|");
        for (q, m) in &rows {
            let _ = writeln!(
                out,
                "| `{q}` | {} | {:.2} | {} | {:.2} | {:.2} | {} | {} | {} | {} | {:.2} | {:.2} |",
                m.group_size,
                m.support,
                m.num_criteria,
                m.outcome_diff,
                m.accuracy_diff,
                na(m.odds_ratio_outcome),
                na(m.odds_ratio_acc),
                na(m.lift_outcome),
                na(m.lift_acc),
                m.weighted_relative_y,
                m.weighted_relative_acc
            );
        }
    }
    Ok(EXIT_OK)
}

fn report(args: ReportArgs) -> Result<i32, CliError> {
    let format: ReportFormat = args.format.parse().map_err(CliError::config)?;
    let text = fs::read_to_string(&args.input).map_err(|e| io_err(&args.input, e))?;
    let report = from_machine(&text).map_err(|e| CliError::data(format!("report: {e}")))?;
    let rendered = match format {
        ReportFormat::Markdown => render_markdown(&report),
        ReportFormat::Machine => to_machine(&report),
    };
    match &args.out {
        Some(p) => fs::write(p, rendered).map_err(|e| io_err(p, e))?,
        None => print!("{rendered}"),
    }
    Ok(EXIT_OK)
}

//! The `sbcr` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 input or parse error, 3 remote
//! resolver failure without a usable fallback, 4 internal invariant
//! violation. Diagnostics go to standard error; data goes to files or
//! standard output.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{
    self, compare_results, read_results, run_benchmark, sample_records, tune_grid, write_results, BenchOptions,
    BudgetMode, RankingMode, Top1Mode, TuneGrid, TuneOptions,
};
use crate::chunk::ConflictChunk;
use crate::corpus::{self, ingest_records, split_dataset, ConflictRecord, FilterFlags, Language};
use crate::parser::{extract_records, parse_conflicted_file, render_resolved};
use crate::resolvers::{
    RemoteResolver, ResolutionCandidate, Resolver, SbcrResolver, Status, TokenLimits, TrivialStrategy, ENDPOINT_ENV,
};
use crate::router::{extract_features, route, DecisionLogEntry, HybridResolver, RouteDecision, Thresholds};
use crate::search::{Budget, SearchParams};
use crate::stub::{StubMode, StubServer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_REMOTE: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: msg.into(),
        }
    }

    fn input(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: msg.into(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<bench::BenchError> for CliError {
    fn from(e: bench::BenchError) -> Self {
        CliError::input(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Search defaults as they appear in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchDefaults {
    pub neighbors_per_iteration: usize,
    pub max_execution_time: f64,
    pub max_stagnation_iterations: usize,
    pub top_n: usize,
}

impl Default for SearchDefaults {
    fn default() -> Self {
        let p = SearchParams::default();
        SearchDefaults {
            neighbors_per_iteration: p.neighbors_per_iteration,
            max_execution_time: 15.0,
            max_stagnation_iterations: p.max_stagnation_iterations,
            top_n: p.top_n,
        }
    }
}

/// Effective configuration: built-in defaults, overridden by the JSON config
/// file, overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    pub thresholds: Thresholds,
    pub search: SearchDefaults,
    pub seed: u64,
    /// Converts time budgets into evaluation budgets for `bench` and `tune`.
    pub evals_per_second: f64,
    pub endpoint: Option<String>,
    pub limits: TokenLimits,
    pub deadline_ms: u64,
    pub max_in_flight: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            thresholds: Thresholds::default(),
            search: SearchDefaults::default(),
            seed: 0,
            evals_per_second: 1000.0,
            endpoint: None,
            limits: TokenLimits::default(),
            deadline_ms: 30_000,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sbcr", version, about = "Search-based merge conflict resolution toolkit")]
struct Cli {
    /// JSON config file; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Print the effective configuration to stderr before running
    #[arg(long, global = true)]
    show_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and filter a line-delimited record stream
    Ingest(IngestArgs),
    /// Split a record set into train/valid/test partitions
    Split(SplitArgs),
    /// Extract conflict chunks of a conflicted file as records
    Extract(ExtractArgs),
    /// Resolve a conflicted file, or every record of a record file
    Resolve(ResolveArgs),
    /// Score a resolver against developer resolutions
    Bench(BenchArgs),
    /// Grid-search the search parameters on a record sample
    Tune(TuneArgs),
    /// Paired comparison of two result files
    Compare(CompareArgs),
    /// Route conflicts between search and the generative resolver
    Route(RouteArgs),
    /// Serve a stub generative resolver
    ServeStub(ServeStubArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Record file ("-" for stdin)
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Accepted records ("-" for stdout)
    #[arg(long, short, default_value = "-")]
    out: PathBuf,
    /// Rejection reports; defaults to <out>.rejects.jsonl when --out is a file
    #[arg(long)]
    rejects: Option<PathBuf>,
    /// Keep records whose resolution adds lines found in neither version
    #[arg(long)]
    no_combination_filter: bool,
    /// Reject records whose resolution reorders lines of a version
    #[arg(long)]
    partial_order_filter: bool,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Record file ("-" for stdin)
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Shuffle seed (defaults to the configured seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Train,valid,test ratios
    #[arg(long, default_value = "0.8,0.1,0.1", value_parser = parse_ratios)]
    ratios: [f64; 3],
    /// Split document with the three id lists ("-" for stdout)
    #[arg(long, short, default_value = "-")]
    out: PathBuf,
    /// Also write train.jsonl, valid.jsonl and test.jsonl here
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Conflicted file
    file: PathBuf,
    /// Path recorded in the records (defaults to the file argument)
    #[arg(long)]
    path: Option<String>,
    #[arg(long, default_value = "")]
    project: String,
    #[arg(long, default_value = "")]
    commit: String,
    #[arg(long, default_value = "Other")]
    language: String,
    /// Output records ("-" for stdout)
    #[arg(long, short, default_value = "-")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Engine {
    Sbcr,
    Trivial(TrivialStrategy),
    Remote,
    Hybrid,
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sbcr" => Ok(Engine::Sbcr),
            "remote" => Ok(Engine::Remote),
            "hybrid" => Ok(Engine::Hybrid),
            _ => match s.strip_prefix("trivial:") {
                Some(name) => name.parse().map(Engine::Trivial),
                None => Err(format!(
                    "unknown engine {s:?}; expected sbcr, trivial:<strategy>, remote or hybrid"
                )),
            },
        }
    }
}

#[derive(Debug, Args)]
struct SearchFlags {
    /// Neighbors drawn per hill-climbing iteration
    #[arg(long)]
    neighbors: Option<usize>,
    /// Time budget per conflict in seconds
    #[arg(long)]
    time_budget: Option<f64>,
    /// Evaluation budget per conflict (overrides the time budget)
    #[arg(long)]
    evaluations: Option<u64>,
    /// Non-improving iterations before a restart
    #[arg(long)]
    stagnation: Option<usize>,
    /// Capacity of the ranked candidate list
    #[arg(long)]
    top_n: Option<usize>,
    /// Search seed
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluations per budget second when converting time budgets
    #[arg(long)]
    evals_per_second: Option<f64>,
}

#[derive(Debug, Args)]
struct RemoteFlags {
    /// Generative resolver root URL
    #[arg(long, env = ENDPOINT_ENV)]
    endpoint: Option<String>,
    /// Request deadline in milliseconds
    #[arg(long)]
    deadline_ms: Option<u64>,
    /// Input token limit sent to the generative resolver
    #[arg(long)]
    input_token_limit: Option<usize>,
    /// Output token limit sent to the generative resolver
    #[arg(long)]
    output_token_limit: Option<usize>,
    /// Maximum concurrent requests
    #[arg(long)]
    max_in_flight: Option<usize>,
}

#[derive(Debug, Args)]
struct ThresholdFlags {
    /// Route to search above this many input tokens
    #[arg(long)]
    token_limit: Option<usize>,
    /// Disable the token-limit rule
    #[arg(long, conflicts_with = "token_limit")]
    no_token_limit: bool,
    /// Non-ASCII fraction above which conflicts go to search
    #[arg(long)]
    tau: Option<f64>,
    /// Maximum |balance| routed to search as balanced
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
}

#[derive(Debug, Args)]
struct ResolveArgs {
    /// Conflicted file, or a record file with --records ("-" for stdin)
    input: PathBuf,
    /// Treat the input as line-delimited records and fill in resolutions
    #[arg(long)]
    records: bool,
    /// sbcr | trivial:<strategy> | remote | hybrid
    #[arg(long, default_value = "sbcr")]
    engine: Engine,
    /// Output ("-" for stdout)
    #[arg(long, short, default_value = "-")]
    out: PathBuf,
    /// Routing decision log for the hybrid engine
    #[arg(long)]
    decisions: Option<PathBuf>,
    #[command(flatten)]
    search: SearchFlags,
    #[command(flatten)]
    remote: RemoteFlags,
    #[command(flatten)]
    thresholds: ThresholdFlags,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Labelled record file
    #[arg(long)]
    records: PathBuf,
    /// sbcr | trivial:<strategy> | remote | hybrid
    #[arg(long, default_value = "sbcr")]
    engine: Engine,
    /// Result rows ("-" for stdout)
    #[arg(long, short, default_value = "-")]
    out: PathBuf,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Enforce time budgets on the wall clock and record timings
    #[arg(long)]
    wallclock: bool,
    /// Record generation times even with evaluation budgets
    #[arg(long)]
    record_time: bool,
    /// Strip trailing whitespace before scoring
    #[arg(long)]
    trim_trailing_whitespace: bool,
    #[command(flatten)]
    search: SearchFlags,
    #[command(flatten)]
    remote: RemoteFlags,
    #[command(flatten)]
    thresholds: ThresholdFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Top1Arg {
    ExactMatch,
    RankOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum RankingArg {
    MostSimilar,
    FirstExact,
}

#[derive(Debug, Args)]
struct TuneArgs {
    /// Labelled record file (typically a training partition)
    #[arg(long)]
    records: PathBuf,
    /// Records sampled for tuning
    #[arg(long, default_value_t = 100)]
    sample: usize,
    /// Sampling and search seed (defaults to the configured seed)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', default_value = "1,5,9")]
    neighbors: Vec<usize>,
    /// Time budgets in seconds
    #[arg(long, value_delimiter = ',', default_value = "10,15,20,40")]
    time_budgets: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    stagnation: Vec<usize>,
    /// Evaluations per budget second when not using --wallclock
    #[arg(long)]
    evals_per_second: Option<f64>,
    /// Enforce the time budgets on the wall clock
    #[arg(long)]
    wallclock: bool,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long, value_enum, default_value = "exact-match")]
    top1_mode: Top1Arg,
    #[arg(long, value_enum, default_value = "most-similar")]
    ranking_mode: RankingArg,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Tuning table CSV ("-" for stdout)
    #[arg(long, short, default_value = "-")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Result rows of resolver A
    a: PathBuf,
    /// Result rows of resolver B
    b: PathBuf,
    /// Records providing the balance feature for the histogram
    #[arg(long)]
    records: Option<PathBuf>,
    /// Conflicts listed from each tail of the similarity difference
    #[arg(long, default_value_t = 10)]
    extremes: usize,
    /// Report JSON ("-" for stdout)
    #[arg(long, short, default_value = "-")]
    out: PathBuf,
    /// Write sim_diff.csv and balance_histogram.csv here
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RouteArgs {
    /// Conflicted file, or a record file with --records ("-" for stdin)
    input: PathBuf,
    #[arg(long)]
    records: bool,
    /// Only emit routing decisions
    #[arg(long)]
    dry_run: bool,
    /// Decision log ("-" for stdout)
    #[arg(long, default_value = "-")]
    decisions: PathBuf,
    /// Resolved output when not a dry run
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    search: SearchFlags,
    #[command(flatten)]
    remote: RemoteFlags,
    #[command(flatten)]
    thresholds: ThresholdFlags,
}

#[derive(Debug, Args)]
struct ServeStubArgs {
    /// echo-v1 | echo-v2 | empty | truncate | slow | garbage | error
    #[arg(long)]
    mode: StubMode,
    #[arg(long, default_value_t = 8089)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Delay used by the slow mode
    #[arg(long, default_value_t = 5000)]
    delay_ms: u64,
}

fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected three ratios, got {}", v.len()))
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("sbcr: {}", e.message);
            e.code
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<CliConfig> {
    let Some(path) = path else {
        return Ok(CliConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn apply_search_flags(cfg: &mut CliConfig, f: &SearchFlags) {
    if let Some(v) = f.neighbors {
        cfg.search.neighbors_per_iteration = v;
    }
    if let Some(v) = f.time_budget {
        cfg.search.max_execution_time = v;
    }
    if let Some(v) = f.stagnation {
        cfg.search.max_stagnation_iterations = v;
    }
    if let Some(v) = f.top_n {
        cfg.search.top_n = v;
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if let Some(v) = f.evals_per_second {
        cfg.evals_per_second = v;
    }
}

fn apply_remote_flags(cfg: &mut CliConfig, f: &RemoteFlags) {
    if let Some(v) = &f.endpoint {
        cfg.endpoint = Some(v.clone());
    }
    if let Some(v) = f.deadline_ms {
        cfg.deadline_ms = v;
    }
    if let Some(v) = f.input_token_limit {
        cfg.limits.input_token_limit = v;
    }
    if let Some(v) = f.output_token_limit {
        cfg.limits.output_token_limit = v;
    }
    if let Some(v) = f.max_in_flight {
        cfg.max_in_flight = v;
    }
}

fn apply_threshold_flags(cfg: &mut CliConfig, f: &ThresholdFlags) {
    if let Some(v) = f.token_limit {
        cfg.thresholds.input_token_limit = Some(v);
    }
    if f.no_token_limit {
        cfg.thresholds.input_token_limit = None;
    }
    if let Some(v) = f.tau {
        cfg.thresholds.non_english_tau = v;
    }
    if let Some(v) = f.beta {
        cfg.thresholds.balance_beta = v;
    }
}

/// Budget precedence: explicit evaluations, then wall clock when asked for,
/// then the time budget converted at `evals_per_second`.
fn search_params(cfg: &CliConfig, evaluations: Option<u64>, wallclock: bool) -> SearchParams {
    let budget = match evaluations {
        Some(n) => Budget::MaxEvaluations(n),
        None if wallclock => Budget::MaxExecutionTime(cfg.search.max_execution_time),
        None => Budget::MaxEvaluations(((cfg.search.max_execution_time * cfg.evals_per_second).round() as u64).max(1)),
    };
    SearchParams {
        neighbors_per_iteration: cfg.search.neighbors_per_iteration,
        budget,
        max_stagnation_iterations: cfg.search.max_stagnation_iterations,
        top_n: cfg.search.top_n,
        seed: cfg.seed,
    }
}

fn check_params(p: &SearchParams) -> CliResult {
    p.validate().map_err(|e| CliError::usage(e.to_string()))
}

fn remote_resolver(cfg: &CliConfig) -> CliResult<RemoteResolver> {
    let endpoint = cfg
        .endpoint
        .clone()
        .ok_or_else(|| CliError::usage(format!("no remote endpoint: pass --endpoint or set {ENDPOINT_ENV}")))?;
    Ok(RemoteResolver::new(
        endpoint,
        cfg.limits,
        Duration::from_millis(cfg.deadline_ms),
        cfg.max_in_flight,
    ))
}

enum Built {
    Plain(Box<dyn Resolver>),
    Hybrid(HybridResolver<SbcrResolver, RemoteResolver>),
}

impl Built {
    fn resolve(&self, chunk: &ConflictChunk) -> (ResolutionCandidate, Option<RouteDecision>) {
        match self {
            Built::Plain(r) => (r.resolve(chunk), None),
            Built::Hybrid(h) => {
                let (c, d) = h.resolve_routed(chunk);
                (c, Some(d))
            }
        }
    }

    fn as_resolver(&self) -> &dyn Resolver {
        match self {
            Built::Plain(r) => r.as_ref(),
            Built::Hybrid(h) => h,
        }
    }
}

fn build_engine(engine: Engine, cfg: &CliConfig, params: SearchParams) -> CliResult<Built> {
    check_params(&params)?;
    Ok(match engine {
        Engine::Sbcr => Built::Plain(Box::new(SbcrResolver::new(params))),
        Engine::Trivial(t) => Built::Plain(Box::new(t)),
        Engine::Remote => Built::Plain(Box::new(remote_resolver(cfg)?)),
        Engine::Hybrid => Built::Hybrid(HybridResolver::new(
            SbcrResolver::new(params),
            remote_resolver(cfg)?,
            cfg.thresholds,
        )),
    })
}

fn open_input(path: &Path) -> CliResult<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(f)))
}

fn read_text(path: &Path) -> CliResult<String> {
    let mut text = String::new();
    open_input(path)?
        .read_to_string(&mut text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(text)
}

fn create_output(path: &Path) -> CliResult<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufWriter::new(io::stdout())));
    }
    let f = File::create(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(f)))
}

/// Reads records without filters, failing on the first malformed line.
fn read_records(path: &Path) -> CliResult<Vec<ConflictRecord>> {
    let filters = FilterFlags {
        combination: false,
        partial_order: false,
    };
    let (records, rejects) =
        ingest_records(open_input(path)?, filters).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if let Some(r) = rejects.iter().find(|r| r.reason != corpus::RejectReason::EmptyBothSides) {
        return Err(CliError::input(format!(
            "{}:{}: {:?}: {}",
            path.display(),
            r.line,
            r.reason,
            r.detail
        )));
    }
    Ok(records)
}

fn execute(cli: Cli) -> CliResult {
    let mut cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Resolve(a) => {
            apply_search_flags(&mut cfg, &a.search);
            apply_remote_flags(&mut cfg, &a.remote);
            apply_threshold_flags(&mut cfg, &a.thresholds);
        }
        Command::Bench(a) => {
            apply_search_flags(&mut cfg, &a.search);
            apply_remote_flags(&mut cfg, &a.remote);
            apply_threshold_flags(&mut cfg, &a.thresholds);
        }
        Command::Route(a) => {
            apply_search_flags(&mut cfg, &a.search);
            apply_remote_flags(&mut cfg, &a.remote);
            apply_threshold_flags(&mut cfg, &a.thresholds);
        }
        Command::Tune(a) => {
            if let Some(v) = a.seed {
                cfg.seed = v;
            }
            if let Some(v) = a.evals_per_second {
                cfg.evals_per_second = v;
            }
            if let Some(v) = a.top_n {
                cfg.search.top_n = v;
            }
        }
        Command::Split(a) => {
            if let Some(v) = a.seed {
                cfg.seed = v;
            }
        }
        _ => {}
    }
    if cli.show_config {
        let text = serde_json::to_string_pretty(&cfg).expect("config serializes");
        eprintln!("{text}");
    }
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Split(a) => cmd_split(a, &cfg),
        Command::Extract(a) => cmd_extract(a),
        Command::Resolve(a) => cmd_resolve(a, &cfg),
        Command::Bench(a) => cmd_bench(a, &cfg),
        Command::Tune(a) => cmd_tune(a, &cfg),
        Command::Compare(a) => cmd_compare(a),
        Command::Route(a) => cmd_route(a, &cfg),
        Command::ServeStub(a) => cmd_serve_stub(a),
    }
}

fn cmd_ingest(a: IngestArgs) -> CliResult {
    let filters = FilterFlags {
        combination: !a.no_combination_filter,
        partial_order: a.partial_order_filter,
    };
    let (records, rejects) = ingest_records(open_input(&a.input)?, filters).map_err(|e| CliError::input(e.to_string()))?;
    let mut out = create_output(&a.out)?;
    corpus::write_records(&mut out, &records)?;
    out.flush()?;
    let sidecar = a.rejects.or_else(|| {
        (a.out != Path::new("-")).then(|| {
            let mut p = a.out.clone().into_os_string();
            p.push(".rejects.jsonl");
            PathBuf::from(p)
        })
    });
    if let Some(path) = sidecar {
        let mut w = create_output(&path)?;
        corpus::write_rejections(&mut w, &rejects)?;
        w.flush()?;
    }
    eprintln!("accepted {} records, rejected {}", records.len(), rejects.len());
    Ok(())
}

fn cmd_split(a: SplitArgs, cfg: &CliConfig) -> CliResult {
    let records = read_records(&a.input)?;
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let split = split_dataset(&ids, cfg.seed, a.ratios).map_err(|e| CliError::usage(e.to_string()))?;
    let mut out = create_output(&a.out)?;
    serde_json::to_writer_pretty(&mut out, &split).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    out.flush()?;
    if let Some(dir) = a.out_dir {
        fs::create_dir_all(&dir)?;
        let by_id: HashMap<&str, &ConflictRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
        for (name, ids) in [("train", &split.train_ids), ("valid", &split.valid_ids), ("test", &split.test_ids)] {
            let part: Vec<ConflictRecord> = ids.iter().map(|id| by_id[id.as_str()].clone()).collect();
            let mut w = create_output(&dir.join(format!("{name}.jsonl")))?;
            corpus::write_records(&mut w, &part)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn parse_file(path: &Path) -> CliResult<crate::parser::ConflictedFile> {
    let text = read_text(path)?;
    parse_conflicted_file(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn cmd_extract(a: ExtractArgs) -> CliResult {
    let file = parse_file(&a.file)?;
    let path = a.path.unwrap_or_else(|| a.file.display().to_string());
    let records = extract_records(&file, &path, &a.project, &a.commit, Language::from_name(&a.language));
    let mut out = create_output(&a.out)?;
    corpus::write_records(&mut out, &records)?;
    out.flush()?;
    Ok(())
}

/// Maps a resolver outcome onto the exit-code contract.
fn check_candidate(engine: Engine, chunk: &ConflictChunk, c: &ResolutionCandidate, label: &str) -> CliResult {
    if c.status == Status::Failed {
        let why = c.diagnostic.clone().unwrap_or_default();
        let code = match engine {
            Engine::Remote | Engine::Hybrid => EXIT_REMOTE,
            Engine::Trivial(_) => EXIT_INPUT,
            Engine::Sbcr => EXIT_INVARIANT,
        };
        return Err(CliError {
            code,
            message: format!("{label}: {} failed: {why}", c.resolver_id),
        });
    }
    let search_made = engine == Engine::Sbcr || c.resolver_id == "sbcr" || c.resolver_id.ends_with("search-fallback");
    if search_made && !corpus::preserves_partial_order(&c.lines, &chunk.v1, &chunk.v2) {
        return Err(CliError {
            code: EXIT_INVARIANT,
            message: format!("{label}: search produced a resolution that reorders source lines"),
        });
    }
    Ok(())
}

fn write_decision_log(path: Option<&Path>, entries: &[DecisionLogEntry]) -> CliResult {
    if let Some(path) = path {
        let mut w = create_output(path)?;
        crate::router::write_decisions(&mut w, entries)?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_resolve(a: ResolveArgs, cfg: &CliConfig) -> CliResult {
    let params = search_params(cfg, a.search.evaluations, true);
    let engine = build_engine(a.engine, cfg, params)?;
    let mut decisions = Vec::new();
    if a.records {
        let mut records = read_records(&a.input)?;
        for r in &mut records {
            let chunk = r.chunk();
            let (c, d) = engine.resolve(&chunk);
            check_candidate(a.engine, &chunk, &c, &r.id)?;
            if let Some(d) = d {
                decisions.push(DecisionLogEntry::new(r.id.clone(), &d));
            }
            r.resolution_lines = c.lines;
        }
        let mut out = create_output(&a.out)?;
        corpus::write_records(&mut out, &records)?;
        out.flush()?;
    } else {
        let file = parse_file(&a.input)?;
        let mut resolutions = Vec::new();
        for (i, block) in file.chunks().enumerate() {
            let chunk = block.to_chunk();
            let (c, d) = engine.resolve(&chunk);
            let label = format!("{}#{}", a.input.display(), i + 1);
            check_candidate(a.engine, &chunk, &c, &label)?;
            if let Some(d) = d {
                decisions.push(DecisionLogEntry::new(label, &d));
            }
            resolutions.push(c.lines);
        }
        let text = render_resolved(&file, &resolutions).map_err(|e| CliError {
            code: EXIT_INVARIANT,
            message: e.to_string(),
        })?;
        let mut out = create_output(&a.out)?;
        out.write_all(text.as_bytes())?;
        out.flush()?;
    }
    write_decision_log(a.decisions.as_deref(), &decisions)
}

fn cmd_bench(a: BenchArgs, cfg: &CliConfig) -> CliResult {
    let records = read_records(&a.records)?;
    let params = search_params(cfg, a.search.evaluations, a.wallclock);
    let engine = build_engine(a.engine, cfg, params)?;
    let opts = BenchOptions {
        jobs: a.jobs.max(1),
        record_time: a.wallclock || a.record_time,
        report: crate::simkit::ReportOptions {
            trim_trailing_whitespace: a.trim_trailing_whitespace,
        },
    };
    let rows = run_benchmark(&records, engine.as_resolver(), &opts)?;
    let mut out = create_output(&a.out)?;
    write_results(&mut out, &rows)?;
    out.flush()?;
    let mean_char = bench::mean(rows.iter().map(|r| r.sim_char));
    eprintln!("{} conflicts, mean sim_char {mean_char:.4}", rows.len());
    Ok(())
}

fn cmd_tune(a: TuneArgs, cfg: &CliConfig) -> CliResult {
    let records = read_records(&a.records)?;
    let sample = sample_records(&records, a.sample, cfg.seed);
    let grid = TuneGrid {
        neighbors: a.neighbors,
        time_budgets_s: a.time_budgets,
        stagnation: a.stagnation,
    };
    let opts = TuneOptions {
        budget_mode: if a.wallclock {
            BudgetMode::WallClock
        } else {
            BudgetMode::Evaluations {
                per_second: cfg.evals_per_second,
            }
        },
        top_n: cfg.search.top_n,
        seed: cfg.seed,
        top1: match a.top1_mode {
            Top1Arg::ExactMatch => Top1Mode::ExactMatch,
            Top1Arg::RankOne => Top1Mode::RankOne,
        },
        ranking: match a.ranking_mode {
            RankingArg::MostSimilar => RankingMode::MostSimilar,
            RankingArg::FirstExact => RankingMode::FirstExact,
        },
        jobs: a.jobs.max(1),
    };
    for config in grid.configs() {
        check_params(&bench::params_for(&config, &opts))?;
    }
    let rows = tune_grid(&sample, &grid, &opts).map_err(|e| match e {
        bench::BenchError::EmptyGrid | bench::BenchError::EmptySample => CliError::usage(e.to_string()),
        other => other.into(),
    })?;
    let mut out = create_output(&a.out)?;
    bench::write_tuning_csv(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> CliResult {
    let rows_a = read_results(open_input(&a.a)?)?;
    let rows_b = read_results(open_input(&a.b)?)?;
    let balances = match &a.records {
        Some(path) => Some(
            read_records(path)?
                .iter()
                .map(|r| (r.id.clone(), extract_features(&r.chunk()).balance))
                .collect::<HashMap<_, _>>(),
        ),
        None => None,
    };
    let report = compare_results(&rows_a, &rows_b, balances.as_ref(), a.extremes)?;
    let mut out = create_output(&a.out)?;
    serde_json::to_writer_pretty(&mut out, &report).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    out.flush()?;
    if let Some(dir) = a.csv_dir {
        fs::create_dir_all(&dir)?;
        bench::write_sim_diff_csv(File::create(dir.join("sim_diff.csv"))?, &report)?;
        bench::write_balance_csv(File::create(dir.join("balance_histogram.csv"))?, &report)?;
    }
    eprintln!(
        "n={} wins_a={} wins_b={} ties={} p={:.4} cles={:.3}",
        report.n, report.wins_a, report.wins_b, report.ties, report.wilcoxon_p, report.cles_a_over_b
    );
    Ok(())
}

fn cmd_route(a: RouteArgs, cfg: &CliConfig) -> CliResult {
    let chunks: Vec<(String, ConflictChunk)> = if a.records {
        read_records(&a.input)?.into_iter().map(|r| (r.id.clone(), r.chunk())).collect()
    } else {
        let file = parse_file(&a.input)?;
        file.chunks()
            .enumerate()
            .map(|(i, b)| (format!("{}#{}", a.input.display(), i + 1), b.to_chunk()))
            .collect()
    };
    if a.dry_run {
        let entries: Vec<DecisionLogEntry> = chunks
            .iter()
            .map(|(id, c)| DecisionLogEntry::new(id.clone(), &route(extract_features(c), &cfg.thresholds)))
            .collect();
        return write_decision_log(Some(&a.decisions), &entries);
    }
    let out = a
        .out
        .ok_or_else(|| CliError::usage("route without --dry-run needs --out for the resolved output"))?;
    let resolve = ResolveArgs {
        input: a.input,
        records: a.records,
        engine: Engine::Hybrid,
        out,
        decisions: Some(a.decisions),
        search: a.search,
        remote: a.remote,
        thresholds: a.thresholds,
    };
    cmd_resolve(resolve, cfg)
}

fn cmd_serve_stub(a: ServeStubArgs) -> CliResult {
    let addr = format!("{}:{}", a.host, a.port);
    let server = StubServer::start(&addr, a.mode, Duration::from_millis(a.delay_ms))
        .map_err(|e| CliError::input(format!("cannot listen on {addr}: {e}")))?;
    eprintln!("stub resolver ({}) listening on {}", a.mode, server.url());
    // Serves until the process is terminated.
    server.join();
    Ok(())
}

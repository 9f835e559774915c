//! Command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use routebench_core::analysis::AnalysisOptions;
use routebench_core::metrics::DEFAULT_RESAMPLES;
use routebench_core::{enumerate_matrix, schema_versions};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gateway::{Backend, BackendSet, HttpBackend, RetryPolicy, SimulatedBackend};
use crate::log_file::LogHeader;
use crate::pool::load_pool;
use crate::profile_file::{calibrate, load_profile, profile_json};
use crate::runner::run_matrix;
use crate::tables;

#[derive(Debug, Parser)]
#[command(
    name = "routebench",
    about = "Benchmark structured LLM routing packages across backends",
    disable_version_flag = true
)]
pub struct Cli {
    /// Print the crate version and the schema version of every file format.
    #[arg(long, short = 'V')]
    pub version: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute the matrix and write the outcome log.
    Run(RunArgs),
    /// Compute metric, ANOVA, contrast and WLC tables.
    Analyze(AnalyzeArgs),
    /// Apply a deployment policy to analysis output.
    Recommend(RecommendArgs),
    /// Fit a simulator profile to cell values.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("backend").required(true).args(["simulate", "live"]))]
pub struct RunArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Use the simulator profile named in the config.
    #[arg(long)]
    pub simulate: bool,
    /// Call the HTTP endpoints named in the config.
    #[arg(long)]
    pub live: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Restrict a factor, e.g. `backend=gemini` or `mode=MJ,MCLR`. Repeatable.
    #[arg(long = "matrix-filter", value_name = "KEY=VALUES")]
    pub matrix_filter: Vec<String>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["log", "cells"]))]
pub struct AnalyzeArgs {
    /// Outcome log from `run`.
    pub log: Option<PathBuf>,
    /// Cell-means CSV to analyse instead of a log; each cell is expanded
    /// into its four subcondition combos.
    #[arg(long)]
    pub cells: Option<PathBuf>,
    /// Route-slice CSV merged into `--cells`.
    #[arg(long, requires = "cells")]
    pub route_slices: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    pub resamples: usize,
    /// Bootstrap seed.
    #[arg(long, default_value_t = AnalysisOptions::default().seed)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    /// Directory written by `analyze`.
    pub tables: PathBuf,
    #[arg(long)]
    pub policy: PathBuf,
    /// Verdict file; defaults to `recommendation.json` in the tables directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Cell-means CSV.
    pub cells: PathBuf,
    /// Pool the profile will run against.
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn version_text() -> String {
    let mut s = format!("routebench {}\n", env!("CARGO_PKG_VERSION"));
    for v in [
        schema_versions::CONTROL_RECORD,
        schema_versions::PROMPT_POOL,
        schema_versions::OUTCOME_LOG,
        schema_versions::MATRIX_CONFIG,
        schema_versions::SIMULATOR_PROFILE,
        schema_versions::METRIC_TABLES,
        schema_versions::POLICY,
        schema_versions::VERDICT,
    ] {
        s.push_str(v);
        s.push('\n');
    }
    s
}

fn live_backends(cfg: &RunConfig) -> Result<BackendSet> {
    let mut set = BackendSet::new();
    let retry = RetryPolicy {
        max_attempts: cfg.max_attempts,
        backoff: Duration::from_millis(cfg.backoff_ms),
    };
    for id in &cfg.matrix.backends {
        let ep = cfg
            .endpoints
            .get(id)
            .ok_or_else(|| Error::Usage(format!("no endpoint configured for backend `{id}`")))?;
        let key = match &ep.api_key_env {
            Some(var) => {
                Some(std::env::var(var).map_err(|_| Error::Usage(format!("environment variable {var} is not set")))?)
            }
            None => None,
        };
        let backend = HttpBackend::new(
            ep,
            key,
            Duration::from_millis(cfg.timeout_ms),
            retry,
            cfg.concurrency_per_backend,
        );
        set.insert(id, Box::new(backend));
    }
    Ok(set)
}

pub fn cmd_run(args: &RunArgs) -> Result<i32> {
    let mut cfg = RunConfig::load(&args.config)?;
    for f in &args.matrix_filter {
        cfg.apply_filter(f)?;
    }
    let combos = enumerate_matrix(&cfg.matrix).map_err(|e| Error::Usage(e.to_string()))?;
    let pool = load_pool(&cfg.pool, cfg.requests_per_combo)?;
    let backend: Box<dyn Backend> = if args.simulate {
        let path = cfg
            .simulator_profile
            .as_ref()
            .ok_or_else(|| Error::Usage("--simulate needs `simulator_profile` in the config".into()))?;
        let profile = load_profile(path)?;
        for c in &combos {
            profile
                .entry(&c.backend, c.profile.mode)
                .map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        }
        let mut sim = SimulatedBackend::new(profile);
        sim.max_attempts = cfg.max_attempts;
        Box::new(sim)
    } else {
        Box::new(live_backends(&cfg)?)
    };
    let header = LogHeader {
        schema_version: schema_versions::OUTCOME_LOG.into(),
        config_hash: cfg.hash(),
        seed: args.seed,
        backend_kind: if args.simulate { "simulate" } else { "live" }.into(),
        combos: combos.len(),
        requests_per_combo: pool.len(),
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut out = BufWriter::new(file);
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let summary = run_matrix(
        &combos,
        &pool,
        backend.as_ref(),
        args.seed,
        workers,
        &header,
        &mut out,
        |p| {
            eprintln!(
                "[{}/{}] {}: {}/{} ok{}",
                p.index + 1,
                p.total,
                p.combo.key(),
                p.ok_rows,
                p.rows,
                if p.aborted { " (aborted)" } else { "" }
            );
        },
    )?;
    let stdout = std::io::stdout();
    let mut so = stdout.lock();
    let _ = writeln!(
        so,
        "{} rows in {} combos -> {}",
        summary.rows,
        summary.combos,
        args.out.display()
    );
    for (class, n) in &summary.taxonomy {
        let _ = writeln!(so, "{class:<16} {n}");
    }
    if !summary.aborted_combos.is_empty() {
        eprintln!(
            "{} combo(s) aborted: {:?}",
            summary.aborted_combos.len(),
            summary.aborted_combos
        );
        return Ok(1);
    }
    Ok(0)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<i32> {
    let opts = AnalysisOptions {
        resamples: args.resamples,
        seed: args.seed,
    };
    let analysis = match (&args.log, &args.cells) {
        (Some(log), None) => tables::analyze_log(log, opts)?,
        (None, Some(cells)) => {
            let mut cells = tables::load_cells_csv(cells)?;
            if let Some(slices) = &args.route_slices {
                tables::load_route_slices(slices, &mut cells)?;
            }
            tables::analyze_cells(&cells, opts)?
        }
        _ => return Err(Error::Usage("give either a log or --cells".into())),
    };
    let written = tables::write_outputs(&args.out, &analysis)?;
    for note in &analysis.notes {
        eprintln!("note: {note}");
    }
    println!("{} files -> {}", written.len(), args.out.display());
    Ok(0)
}

pub fn cmd_recommend(args: &RecommendArgs) -> Result<i32> {
    let policy = tables::load_policy(&args.policy)?;
    let rec = tables::recommend_dir(&args.tables, &policy)?;
    let json = serde_json::to_string_pretty(&rec)? + "\n";
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.tables.join(tables::RECOMMENDATION_FILE));
    std::fs::write(&out, &json).map_err(|e| Error::io(&out, e))?;
    print!("{json}");
    Ok(0)
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<i32> {
    let cells = tables::load_cells_csv(&args.cells)?;
    let text = std::fs::read_to_string(&args.pool).map_err(|e| Error::io(&args.pool, e))?;
    let size = text.lines().filter(|l| !l.trim().is_empty()).count();
    let pool = load_pool(&args.pool, size)?;
    let profile = calibrate(&cells, &pool)?;
    std::fs::write(&args.out, profile_json(&profile)?).map_err(|e| Error::io(&args.out, e))?;
    println!("{} entries -> {}", cells.len(), args.out.display());
    Ok(0)
}

/// Runs a parsed command line and returns the process exit code.
pub fn dispatch(cli: &Cli) -> i32 {
    if cli.version {
        print!("{}", version_text());
        return 0;
    }
    let result = match &cli.command {
        Some(Command::Run(a)) => cmd_run(a),
        Some(Command::Analyze(a)) => cmd_analyze(a),
        Some(Command::Recommend(a)) => cmd_recommend(a),
        Some(Command::Calibrate(a)) => cmd_calibrate(a),
        None => Err(Error::Usage("no command given; see --help".into())),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! Config-driven runner for the geoptics pipeline: assumption checks, mode
//! analysis, resonances, profiles, the singular reference solver and the
//! convergence study, with a per-stage cache and deterministic artifacts.

pub mod cache;
pub mod config;
pub mod output;
pub mod pipeline;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::cache::{config_hash, Stage};
use crate::config::RunConfig;
use crate::output::{sha256_hex, write_bytes, write_json};
use crate::pipeline::Pipeline;

/// Exit code for invalid input or failed structural assumptions.
pub const EXIT_ASSUMPTION: i32 = 2;
/// Exit code for solver failures (non-convergence, blow-up, singular symbols).
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: assumption failed: {detail}")]
    Assumption { stage: Stage, detail: String },
    #[error("{stage}: {source}")]
    Stage { stage: Stage, source: geoptics::Error },
    #[error("{stage}: missing upstream stage {missing}; run it first or use `run`")]
    MissingUpstream { stage: Stage, missing: Stage },
    #[error("{0}: cache entry is corrupt; delete it and rerun")]
    CorruptCache(Stage),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        use geoptics::Error as E;
        match self {
            RunError::Config(_) | RunError::Assumption { .. } => EXIT_ASSUMPTION,
            RunError::Stage { source, .. } => match source {
                E::InvalidInput(_)
                | E::MultiplicityDrift { .. }
                | E::NotSemisimple { .. }
                | E::CharacteristicBoundary { .. }
                | E::GlancingOrSingular(_)
                | E::StabilityFail { .. }
                | E::GlancingMode { .. }
                | E::IrregularFrequency(_)
                | E::NotHyperbolicMode(_)
                | E::DegenerateBasis { .. } => EXIT_ASSUMPTION,
                _ => EXIT_SOLVER,
            },
            RunError::MissingUpstream { .. } | RunError::CorruptCache(_) | RunError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "geoptics", version, about = "Weakly nonlinear geometric optics pipeline")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "geoptics-out")]
    pub out: PathBuf,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline, reusing cached stages.
    Run {
        /// Stop after this stage.
        #[arg(long, value_enum)]
        stage: Option<Stage>,
    },
    CheckAssumptions,
    AnalyzeModes,
    FindResonances,
    SolveProfiles,
    SolveSingular,
    ConvergenceStudy,
}

impl Command {
    fn stage(&self) -> Option<Stage> {
        match self {
            Command::Run { .. } => None,
            Command::CheckAssumptions => Some(Stage::CheckAssumptions),
            Command::AnalyzeModes => Some(Stage::AnalyzeModes),
            Command::FindResonances => Some(Stage::FindResonances),
            Command::SolveProfiles => Some(Stage::SolveProfiles),
            Command::SolveSingular => Some(Stage::SolveSingular),
            Command::ConvergenceStudy => Some(Stage::ConvergenceStudy),
        }
    }
}

/// Cache root: `GEOPTICS_CACHE_DIR` or `<out>/.cache`.
pub fn cache_root(out: &Path) -> PathBuf {
    std::env::var_os("GEOPTICS_CACHE_DIR").map(PathBuf::from).unwrap_or_else(|| out.join(".cache"))
}

/// Runs the command; artifacts of every completed stage are published even
/// when a later stage fails.
pub fn execute(cli: &Cli) -> Result<(), RunError> {
    let path = cli.config.as_ref().ok_or_else(|| RunError::Config("--config is required".into()))?;
    let cfg = RunConfig::load(path)?;
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mut p = Pipeline::new(cfg, cache_root(&cli.out));
    let result = match (&cli.command, cli.command.stage()) {
        (Command::Run { stage }, _) => p.run_stage(stage.unwrap_or(Stage::ConvergenceStudy), true),
        (_, Some(s)) => p.run_stage(s, false),
        _ => unreachable!(),
    };
    publish(&p, &cli.out)?;
    result
}

/// Copies the artifacts of completed stages into `out` and writes
/// `manifest.json` and `summary.txt`.
pub fn publish(p: &Pipeline, out: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(out)?;
    let mut stages = Vec::new();
    let mut summary = String::new();
    summary.push_str(&format!("geoptics {}\nconfig {}\n\n", env!("CARGO_PKG_VERSION"), config_hash(&p.cfg)));
    for s in Stage::ALL {
        if !p.cache.is_complete(s) {
            stages.push(json!({ "stage": s, "key": p.cache.key(s), "complete": false, "files": [] }));
            continue;
        }
        let dir = p.cache.dir(s);
        let mut files = Vec::new();
        for rel in p.cache.artifacts(s)? {
            let bytes = std::fs::read(dir.join("artifacts").join(&rel))?;
            write_bytes(&out.join(&rel), &bytes)?;
            let name = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            files.push(json!({ "path": name, "sha256": sha256_hex(&bytes), "bytes": bytes.len() }));
        }
        stages.push(json!({ "stage": s, "key": p.cache.key(s), "complete": true, "files": files }));
        summary.push_str(&std::fs::read_to_string(dir.join("summary.txt"))?);
        summary.push('\n');
    }
    let manifest = json!({
        "tool": "geoptics",
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": config_hash(&p.cfg),
        "seed": p.cfg.seed,
        "config": p.cfg,
        "stages": stages,
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    write_bytes(&out.join("summary.txt"), summary.as_bytes())?;
    Ok(())
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ASSUMPTION } else { 0 };
        }
    };
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod ops;
mod support;

use ops::Ctx;
use support::{bad_param, Config, Fail, Format};

/// Dictionary definition graph analysis: attracting cores, definitional
/// loops, loop-cluster decomposition, walk-count themes, and etymology
/// statistics.
#[derive(Parser)]
#[command(name = "glossgraph", version, max_term_width = 100)]
struct Cli {
    /// Working directory for artifacts and the run manifest
    #[arg(long, global = true, default_value = ".")]
    dir: PathBuf,

    /// Summary output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// key=value config file; flags given explicitly win over it
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (0 = one per hardware thread)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic gloss corpus with planted structure
    Fixture(ops::FixtureArgs),
    /// Parse a gloss corpus and write the node and edge artifacts
    Ingest(ops::IngestArgs),
    /// Find the attracting core that definition-following converges to
    Core(ops::CoreArgs),
    /// Per-edge shortest loop lengths and the loop-length histogram
    Loops(ops::LoopsArgs),
    /// Degree-preserving edge shuffle of the current graph
    Randomize(ops::RandomizeArgs),
    /// Split the core into short-loop components
    Decompose(ops::DecomposeArgs),
    /// Count bounded walks from every node into each component
    Paths(ops::PathsArgs),
    /// Singular value decomposition of the walk-count matrix
    Svd(ops::SvdArgs),
    /// First-attestation statistics per component against a shuffled baseline
    Etym(ops::EtymArgs),
    /// Bundle the human-readable outputs and the word-list overlap table
    Report(ops::ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fixture(_) => "fixture",
            Command::Ingest(_) => "ingest",
            Command::Core(_) => "core",
            Command::Loops(_) => "loops",
            Command::Randomize(_) => "randomize",
            Command::Decompose(_) => "decompose",
            Command::Paths(_) => "paths",
            Command::Svd(_) => "svd",
            Command::Etym(_) => "etym",
            Command::Report(_) => "report",
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    if let Some(threads) = cfg.resolve("threads", cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| bad_param(format!("threads: {e}")))?;
    }
    std::fs::create_dir_all(&cli.dir)?;
    let ctx = Ctx {
        dir: cli.dir.clone(),
        cfg,
        format: cli.format,
    };

    let started = Instant::now();
    let summary = match &cli.command {
        Command::Fixture(args) => ops::cmd_fixture(&ctx, args)?,
        Command::Ingest(args) => ops::cmd_ingest(&ctx, args)?,
        Command::Core(args) => ops::cmd_core(&ctx, args)?,
        Command::Loops(args) => ops::cmd_loops(&ctx, args)?,
        Command::Randomize(args) => ops::cmd_randomize(&ctx, args)?,
        Command::Decompose(args) => ops::cmd_decompose(&ctx, args)?,
        Command::Paths(args) => ops::cmd_paths(&ctx, args)?,
        Command::Svd(args) => ops::cmd_svd(&ctx, args)?,
        Command::Etym(args) => ops::cmd_etym(&ctx, args)?,
        Command::Report(args) => ops::cmd_report(&ctx, args)?,
    };
    // Timing goes to stderr only; artifacts must not vary between runs.
    eprintln!(
        "{}: done in {:.2}s",
        cli.command.name(),
        started.elapsed().as_secs_f64()
    );
    summary.print(ctx.format);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<Fail>() {
                Some(fail) => fail.exit_code() as u8,
                None => 1,
            };
            ExitCode::from(code)
        }
    }
}

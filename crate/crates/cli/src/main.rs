use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use pplink_core::config::Config;
use pplink_core::pipeline::{run_all, Context, PipelineError, Stage, StageReport};
use pplink_core::synth::{generate, Scenario};
use pplink_review_api::{serve_blocking, ServeError};

/// Usage errors, as in sysexits.h.
const EX_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "pplink",
    version,
    about = "Link patent families to the publications of their inventors"
)]
struct Cli {
    /// TOML config; relative input paths resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for stage inputs and outputs.
    #[arg(long, global = true, default_value = "stages")]
    stage_dir: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw patents, publications and thesaurus.
    Ingest,
    /// Group patent documents into families.
    Families,
    /// Name blocking and the lag-window filter.
    Pairs,
    /// MeSH headings from patent descriptions.
    MeshExtract,
    /// Document vectors and pair cosines.
    Embed,
    /// Resolve patent citations and count shared DOIs.
    Refs,
    /// Sure pairs, allowed IPC classes and the class filter.
    IpcFilter,
    /// Thresholds, validity rules and histograms.
    Rank,
    /// Review items and the evaluation report.
    Report,
    /// Run the review API.
    Serve {
        /// Overrides `serve.bind`.
        #[arg(long)]
        bind: Option<String>,
        /// Overrides `serve.static_dir`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Every stage in order.
    RunAll,
    /// Write a synthetic corpus with its answer key and a config.
    Synth {
        #[arg(long, value_enum, default_value_t = ScenarioArg::Standard)]
        scenario: ScenarioArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Standard,
    Homonym,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Standard => Scenario::Standard,
            ScenarioArg::Homonym => Scenario::Homonym,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EX_USAGE),
            };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

enum Failure {
    Pipeline(PipelineError),
    Other(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Pipeline(e) => e.exit_code() as u8,
            Failure::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Pipeline(e) => e.fmt(f),
            Failure::Other(m) => f.write_str(m),
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, PipelineError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn print_report(stage: Stage, report: &StageReport) {
    let counts: Vec<String> = report.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("{stage}: {}", counts.join(" "));
}

fn run(cli: Cli) -> Result<(), Failure> {
    let stage = match &cli.command {
        Command::Ingest => Some(Stage::Ingest),
        Command::Families => Some(Stage::Families),
        Command::Pairs => Some(Stage::Pairs),
        Command::MeshExtract => Some(Stage::MeshExtract),
        Command::Embed => Some(Stage::Embed),
        Command::Refs => Some(Stage::Refs),
        Command::IpcFilter => Some(Stage::IpcFilter),
        Command::Rank => Some(Stage::Rank),
        Command::Report => Some(Stage::Report),
        _ => None,
    };
    if let Command::Synth { scenario, out } = &cli.command {
        let seed = cli.seed.unwrap_or(Config::default().seed);
        let corpus = generate((*scenario).into(), seed);
        let config = corpus
            .write_to(out, seed)
            .map_err(|e| Failure::Other(format!("synth: cannot write {}: {e}", out.display())))?;
        println!("wrote {}", config.display());
        return Ok(());
    }

    let mut config = load_config(&cli)?;
    if let Command::Serve { bind, static_dir } = &cli.command {
        if let Some(b) = bind {
            config.serve.bind = b.clone();
        }
        if let Some(d) = static_dir {
            config.serve.static_dir = Some(std::env::current_dir().unwrap_or_default().join(d));
        }
    }
    let ctx = Context::new(config, &cli.stage_dir)?;
    match (&cli.command, stage) {
        (_, Some(stage)) => print_report(stage, &stage.run(&ctx)?),
        (Command::RunAll, _) => {
            for (stage, report) in run_all(&ctx)? {
                print_report(stage, &report);
            }
        }
        (Command::Serve { .. }, _) => serve_blocking(&ctx).map_err(|e| match e {
            ServeError::Pipeline(p) => Failure::Pipeline(p),
            other => Failure::Other(format!("serve: {other}")),
        })?,
        _ => unreachable!("handled above"),
    }
    Ok(())
}

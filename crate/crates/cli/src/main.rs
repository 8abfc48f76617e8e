//! `bearing-pinn`: command-line front end for the physics-informed bearing
//! fault classifier.
//!
//! Every command reads one TOML experiment config, applies flag overrides,
//! and writes into `<out>/<run-id>/` a `config.frozen` that reproduces the
//! run on its own, plus `report.json`, `report.txt` and command artifacts.

mod commands;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use bearing_pinn::config::ExperimentConfig;
use bearing_pinn::transfer::TlStrategy;
use bearing_pinn::Error;
use clap::{Parser, Subcommand};

use rundir::RunDir;

#[derive(Debug, Parser)]
#[command(name = "bearing-pinn", version, about = "Physics-informed multimodal bearing fault diagnosis")]
struct Cli {
    /// Experiment config (TOML). Optional only for `ttest`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output root; each run writes to `<out>/<run-id>/`.
    #[arg(long, global = true, env = "BEARING_PINN_OUT", default_value = "runs")]
    out: PathBuf,

    /// Run directory name. Defaults to the command plus a hash of the frozen config.
    #[arg(long, global = true)]
    run_id: Option<String>,

    /// Replace an existing run directory.
    #[arg(long, global = true)]
    force: bool,

    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize the configured corpora into segment files.
    Generate,
    /// Train on the source corpus and evaluate on its test split.
    Train {
        /// Continue from this checkpoint instead of a fresh initialization.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Overrides `train.max_epochs`.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a source checkpoint unchanged on the target test split.
    ZeroShot {
        /// Overrides `tl.source_checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Adapt a source checkpoint to the target corpus.
    Finetune {
        /// Overrides `tl.strategy` (tsft|las|hfr).
        #[arg(long)]
        strategy: Option<TlStrategy>,
        /// Overrides `tl.source_checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Cross-validated λ × threshold-percentile search per split.
    Gridsearch {
        /// Worker threads; overrides `grid.jobs`.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Welch t-test on two accuracy files (one value per line).
    Ttest {
        /// Overrides `eval.a`.
        a: Option<PathBuf>,
        /// Overrides `eval.b`.
        b: Option<PathBuf>,
    },
    /// Write the fusion-layer vector of every source segment to CSV.
    ExportEmbeddings {
        /// Overrides `eval.checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Train { .. } => "train",
            Command::ZeroShot { .. } => "zero-shot",
            Command::Finetune { .. } => "finetune",
            Command::Gridsearch { .. } => "gridsearch",
            Command::Ttest { .. } => "ttest",
            Command::ExportEmbeddings { .. } => "export-embeddings",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    /// 1 usage or config, 2 data, 3 numerical.
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(Error::Config { .. } | Error::Plan(_)) => 1,
            Failure::Core(Error::Numerical(_) | Error::Degenerate(_)) => 3,
            Failure::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

fn absolute(p: PathBuf) -> Result<PathBuf, Failure> {
    std::path::absolute(&p).map_err(|e| Failure::Usage(format!("cannot resolve {}: {e}", p.display())))
}

/// Folds flag overrides into the config so the frozen copy alone replays the run.
fn resolve(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if matches!(cli.command, Command::Ttest { .. }) => ExperimentConfig::from_toml("")?,
        None => return Err(Failure::Usage(format!("`{}` needs --config", cli.command.name()))),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Generate => {}
        Command::Train { resume, epochs } => {
            if let Some(p) = resume {
                cfg.resume = Some(absolute(p.clone())?);
            }
            if let Some(n) = epochs {
                cfg.train.max_epochs = *n;
            }
        }
        Command::ZeroShot { checkpoint } => {
            if let Some(p) = checkpoint {
                cfg.tl.source_checkpoint = Some(absolute(p.clone())?);
            }
        }
        Command::Finetune { strategy, checkpoint } => {
            if let Some(s) = strategy {
                cfg.tl.strategy = Some(*s);
            }
            if let Some(p) = checkpoint {
                cfg.tl.source_checkpoint = Some(absolute(p.clone())?);
            }
        }
        Command::Gridsearch { jobs } => {
            if let Some(j) = jobs {
                cfg.grid.jobs = *j;
            }
        }
        Command::Ttest { a, b } => {
            if let Some(p) = a {
                cfg.eval.a = Some(absolute(p.clone())?);
            }
            if let Some(p) = b {
                cfg.eval.b = Some(absolute(p.clone())?);
            }
        }
        Command::ExportEmbeddings { checkpoint } => {
            if let Some(p) = checkpoint {
                cfg.eval.checkpoint = Some(absolute(p.clone())?);
            }
        }
    }
    if !matches!(cli.command, Command::Ttest { .. }) {
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<PathBuf, Failure> {
    let cfg = resolve(cli)?;
    let frozen = cfg.to_toml()?;
    let dir = RunDir::create(&cli.out, cli.run_id.as_deref(), cli.command.name(), &frozen, cli.force)?;
    match &cli.command {
        Command::Generate => commands::generate(&cfg, &dir)?,
        Command::Train { .. } => commands::train(&cfg, &dir)?,
        Command::ZeroShot { .. } => commands::zero_shot(&cfg, &dir)?,
        Command::Finetune { .. } => commands::finetune(&cfg, &dir)?,
        Command::Gridsearch { .. } => commands::gridsearch(&cfg, &dir)?,
        Command::Ttest { .. } => commands::ttest(&cfg, &dir)?,
        Command::ExportEmbeddings { .. } => commands::export_embeddings(&cfg, &dir)?,
    }
    Ok(dir.path().to_path_buf())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use gazeprint::commands::{cmd_eval, cmd_export_density, cmd_identify, cmd_synth, cmd_train};
use gazeprint::config::{base_dir, load_config, ConfigError, FitMode, RunConfig, SynthConfig};

/// Reader identification from eye movements with semiparametric models.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file; relative paths inside it resolve against its directory.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Never changes results.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus and ground-truth reader models.
    Synth(Common),
    /// Fit one model per reader in the training corpus.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<FitMode>,
    },
    /// Score the test corpus and predict a reader per unit.
    Identify(Common),
    /// Identification and verification metrics with accuracy curves.
    Eval(Common),
    /// Write one density of a model file as (x, log_pdf) CSV.
    ExportDensity {
        #[arg(long)]
        model: PathBuf,
        /// Role name, e.g. alpha2 or delta0.
        #[arg(long)]
        role: String,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run_config(common: &Common, mode: Option<FitMode>) -> Result<RunConfig, ConfigError> {
    let mut config: RunConfig = load_config(&common.config, RunConfig::violations)?;
    config.seed = common.seed.unwrap_or(config.seed);
    config.jobs = common.jobs.or(config.jobs);
    config.mode = mode.unwrap_or(config.mode);
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(ConfigError {
            source: common.config.display().to_string(),
            violations,
        });
    }
    Ok(config.resolved(&base_dir(&common.config)))
}

fn synth_config(common: &Common) -> Result<SynthConfig, ConfigError> {
    let mut config: SynthConfig = load_config(&common.config, SynthConfig::violations)?;
    config.seed = common.seed.unwrap_or(config.seed);
    config.jobs = common.jobs.or(config.jobs);
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(ConfigError {
            source: common.config.display().to_string(),
            violations,
        });
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(common) => {
            let out = cmd_synth(&synth_config(&common)?, &base_dir(&common.config))?;
            eprintln!("wrote {}", out.display());
        }
        Command::Train { common, mode } => {
            let config = run_config(&common, mode)?;
            let models = cmd_train(&config)?;
            eprintln!("trained {} readers into {}", models.len(), config.models_dir.display());
        }
        Command::Identify(common) => {
            let config = run_config(&common, None)?;
            let preds = cmd_identify(&config)?;
            let correct = preds.iter().filter(|p| p.predicted.as_ref() == Some(&p.truth)).count();
            println!("{correct}/{} units identified", preds.len());
        }
        Command::Eval(common) => {
            let m = cmd_eval(&run_config(&common, None)?)?;
            match m.auc {
                Some(auc) => println!("accuracy {:.4} (se {:.4}), auc {auc:.6}", m.accuracy, m.accuracy_se),
                None => println!("accuracy {:.4} (se {:.4})", m.accuracy, m.accuracy_se),
            }
        }
        Command::ExportDensity { model, role, out } => {
            let csv = cmd_export_density(&model, &role)?;
            match out {
                Some(path) => write_file(&path, &csv)?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            for cause in e.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            if e.is::<ConfigError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

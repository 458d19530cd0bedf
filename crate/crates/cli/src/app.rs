//! Command-line front end, shared by the `tsad` binary and in-process callers.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tsad_core::{Error, Result};

use crate::commands::{cmd_coverage, cmd_evaluate, cmd_generate_sine, cmd_score, cmd_train, prepare_out_dir};
use crate::RunConfig;

#[derive(Parser)]
#[command(name = "tsad", version, about = "Self-supervised time-series anomaly detection")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (flat key = value file).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic sine training series and the five test slices.
    GenerateSine(Common),
    /// Train a model on `data.train`.
    Train(Common),
    /// Score a test series with a trained checkpoint.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Best-threshold F1, point-adjusted F1 and AUROC of a score file.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Train one model per outlier kind and score every sine test slice.
    Coverage(Common),
}

fn load(common: &Common) -> Result<RunConfig> {
    let cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    Ok(match common.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> Result<()> {
    let (common, mut cfg) = match &cli.command {
        Command::GenerateSine(c) | Command::Train(c) | Command::Coverage(c) => (c, load(c)?),
        Command::Score { common, .. } | Command::Evaluate { common, .. } => (common, load(common)?),
    };
    match &cli.command {
        Command::Score { checkpoint, test, stride, .. } => {
            cfg.checkpoint = checkpoint.clone().or(cfg.checkpoint);
            cfg.test_data = test.clone().or(cfg.test_data);
            cfg.stride = stride.unwrap_or(cfg.stride);
        }
        Command::Evaluate { scores, labels, .. } => {
            cfg.scores = scores.clone().or(cfg.scores);
            cfg.labels = labels.clone().or(cfg.labels);
        }
        _ => {}
    }
    prepare_out_dir(&common.out, common.force)?;
    let out = &common.out;
    match cli.command {
        Command::GenerateSine(_) => cmd_generate_sine(&cfg, out),
        Command::Train(_) => cmd_train(&cfg, out).map(|_| ()),
        Command::Score { .. } => cmd_score(&cfg, out).map(|_| ()),
        Command::Evaluate { .. } => {
            let r = cmd_evaluate(&cfg, out)?;
            println!("f1 {:.4}  f1_pa {:.4}  auroc {:.4}", r.f1, r.f1_pa, r.auroc);
            Ok(())
        }
        Command::Coverage(_) => {
            for c in cmd_coverage(&cfg, out)? {
                println!("{}", c.csv_row());
            }
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Usage errors become configuration errors.
pub fn run_args<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(cli)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sarcon_cli::{cmd_evaluate, cmd_explain, cmd_metrics, cmd_train, RunConfig};

#[derive(Parser)]
#[command(name = "sarcon", version, about = "Train, evaluate and explain SARCoN time-series classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file of run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: RunConfig,
}

impl Common {
    fn resolve(&self) -> sarcon::Result<RunConfig> {
        let file = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        Ok(self.overrides.over(&file))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train on a UCR file and write checkpoint, history and manifest.
    Train(Common),
    /// Score a checkpoint on a UCR file and append to the results table.
    Evaluate(Common),
    /// Wins, ranks and mean per-class error from an accuracy table.
    Metrics {
        /// Accuracy table: dataset column, optional classes column, one
        /// column per classifier.
        #[arg(long)]
        table: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Class activation map and attention curves for one series.
    Explain {
        #[arg(long)]
        index: usize,
        #[arg(long)]
        class: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> sarcon::Result<()> {
    match cli.command {
        Command::Train(c) => {
            let s = cmd_train(&c.resolve()?)?;
            println!(
                "trained {} on {} series for {} epochs; training accuracy {:.4}; outputs in {}",
                s.dataset,
                s.series,
                s.epochs,
                s.train_accuracy,
                s.out_dir.display()
            );
        }
        Command::Evaluate(c) => {
            let s = cmd_evaluate(&c.resolve()?)?;
            println!("dataset {} ({} series)", s.name, s.series);
            println!("accuracy {:.4}  error {:.4}  pce {:.5}", s.accuracy, 1.0 - s.accuracy, s.pce);
            for (c, e) in s.per_class_error.iter().enumerate() {
                match s.label_values.get(c) {
                    Some(label) => println!("  class {c} (label {label}): error {e:.4}"),
                    None => println!("  class {c}: error {e:.4}"),
                }
            }
        }
        Command::Metrics { table, common } => {
            print!("{}", cmd_metrics(&common.resolve()?, &table)?.to_delimited());
        }
        Command::Explain { index, class, common } => {
            for f in cmd_explain(&common.resolve()?, index, class)? {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

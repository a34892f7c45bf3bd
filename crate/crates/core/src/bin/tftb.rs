use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tftb::commands::{cmd_compare, cmd_sweep, cmd_train, sweep_csv, TrainArms};
use tftb::config::ExperimentSpec;
use tftb::Result;

#[derive(Parser)]
#[command(name = "tftb", version, about = "Fixed-time-budget training with dynamic subset selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed and write one run directory per seed.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Compare manifests against the first one.
    Compare {
        #[arg(required = true, num_args = 2..)]
        manifests: Vec<PathBuf>,
        /// Directory for comparison.csv and comparison.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// TFTB at every alpha, over every seed, with a mean/std summary.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated alphas.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Tftb,
    Baseline,
    Both,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    budget_seconds: Option<f64>,
    #[arg(long)]
    warmup_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    rerank_period: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Any config key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(p) => ExperimentSpec::load(p)?,
            None => ExperimentSpec::default(),
        };
        let mut overrides: Vec<String> = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push(format!("{k}={v}"));
            }
        };
        push("alpha", self.alpha.map(|v| v.to_string()));
        push("budget_seconds", self.budget_seconds.map(|v| v.to_string()));
        push("warmup_epochs", self.warmup_epochs.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("rerank_period", self.rerank_period.map(|v| v.to_string()));
        push("max_epochs", self.max_epochs.map(|v| v.to_string()));
        push("seeds", self.seeds.as_ref().map(|s| format!("{s:?}")));
        push("output_dir", self.output_dir.as_ref().map(|p| format!("{:?}", p.display().to_string())));
        overrides.extend(self.set.iter().cloned());
        for o in &overrides {
            spec.apply_override(o)?;
        }
        Ok(spec)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, mode } => {
            let mut spec = common.spec()?;
            let arms = match mode {
                Some(ModeArg::Both) => TrainArms::Both,
                Some(ModeArg::Tftb) => {
                    spec.apply_override("mode=\"tftb\"")?;
                    TrainArms::Configured
                }
                Some(ModeArg::Baseline) => {
                    spec.apply_override("mode=\"baseline\"")?;
                    TrainArms::Configured
                }
                None => TrainArms::Configured,
            };
            for p in cmd_train(&spec, arms)? {
                println!("{}", p.display());
            }
        }
        Command::Compare { manifests, out } => {
            for c in cmd_compare(&manifests, out.as_deref())? {
                println!("{}", c.to_table());
            }
        }
        Command::Sweep {
            common,
            alphas,
            threads,
        } => {
            let mut spec = common.spec()?;
            if let Some(a) = alphas {
                spec.apply_override(&format!("alphas={a:?}"))?;
            }
            if let Some(t) = threads {
                spec.apply_override(&format!("threads={t}"))?;
            }
            print!("{}", sweep_csv(&cmd_sweep(&spec)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

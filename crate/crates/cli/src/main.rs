use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use pcelab_core::harness::{self, HarnessError, LoadedConfig};

#[derive(Parser)]
#[command(name = "pcelab", version, about = "Seeded multi-task RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train a policy-value set and fine-tune on fresh test tasks.
    Pce(RunArgs),
    /// Optimistic multi-task training.
    Omerm(RunArgs),
    /// UCB pseudo-regret on a bandit instance.
    BanditUcb(RunArgs),
    /// Informed baseline vs UCB over a grid of horizons.
    BanditRatio(RunArgs),
    /// Check an instance and print its summary.
    Validate(RunArgs),
    /// Aggregate CSV outputs into a summary table.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, relative to the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted config path assignment, e.g. `overrides.n_cap=256`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    run: RunArgs,
    /// CSV files to aggregate.
    #[arg(long)]
    input: Vec<PathBuf>,
}

fn load(args: &RunArgs, experiment: Option<&str>) -> Result<LoadedConfig, HarnessError> {
    let mut overrides = Vec::new();
    if let Some(kind) = experiment {
        overrides.push(format!("experiment=\"{kind}\""));
    }
    overrides.extend(args.overrides.iter().cloned());
    let mut loaded = harness::load_config(&args.config, args.seed, args.out.as_deref(), &overrides)?;
    loaded.cli_overrides = args.overrides.clone();
    Ok(loaded)
}

fn report(args: &ReportArgs) -> Result<(), HarnessError> {
    let loaded = load(&args.run, None)?;
    let mut summary = harness::summarize(&args.input)?;
    if !summary.rows.is_empty() {
        let dist = loaded.config.instance.build(&loaded.base_dir)?;
        summary.add_complexity(&dist);
    }
    let dir = loaded.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let rows = dir.join("report.csv");
    let file = std::fs::File::create(&rows).map_err(|e| io_error(&rows, e))?;
    summary.write_rows(file).map_err(|e| io_error(&rows, e.into()))?;
    let fits = dir.join("fits.csv");
    let file = std::fs::File::create(&fits).map_err(|e| io_error(&fits, e))?;
    summary.write_fits(file).map_err(|e| io_error(&fits, e.into()))?;
    print!("{summary}");
    Ok(())
}

fn io_error(path: &std::path::Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, kind) = match &cli.command {
        Command::Pce(a) => (a, "pce"),
        Command::Omerm(a) => (a, "omerm"),
        Command::BanditUcb(a) => (a, "bandit-ucb"),
        Command::BanditRatio(a) => (a, "bandit-ratio"),
        Command::Validate(a) => (a, "validate"),
        Command::Report(r) => {
            return match report(r) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
    };
    let outcome = load(args, Some(kind)).and_then(|l| harness::run(&l));
    match outcome {
        Ok(o) => {
            for m in &o.messages {
                println!("{m}");
            }
            if let Some(dir) = &o.out_dir {
                println!("wrote {} file(s) to {}", o.files.len(), dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vche2d::harness::{run_experiment, thread_budget, Config, Snapshot};

#[derive(Parser)]
#[command(name = "vche2d", version, about = "Viscous Camassa-Holm vorticity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its report.
    Run {
        /// One of: smoothing-L1Lp, first-order-decay, second-order-decay, invariants, lp-verification.
        experiment: String,
        /// Flat `key = value` file applied before the overrides.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report directory (default: ./out/<experiment>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides of the form --key=value.
        #[arg(allow_hyphen_values = true, trailing_var_arg = true)]
        overrides: Vec<String>,
    },
    /// Print the header and a short summary of a snapshot file.
    SnapshotDump { file: PathBuf },
}

fn run(experiment: &str, config: Option<PathBuf>, out: Option<PathBuf>, overrides: &[String]) -> vche2d::Result<bool> {
    let mut cfg = Config::for_experiment(experiment)?;
    if let Some(path) = config {
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
    }
    let mut out = out;
    let mut iter = overrides.iter();
    while let Some(arg) = iter.next() {
        // --out may also follow the overrides.
        if arg == "--out" {
            out = iter.next().map(PathBuf::from);
        } else if let Some(dir) = arg.strip_prefix("--out=") {
            out = Some(PathBuf::from(dir));
        } else {
            cfg.apply_override(arg)?;
        }
    }
    log::info!("running {experiment} with up to {} worker threads", thread_budget());
    let report = run_experiment(experiment, &cfg)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("out").join(experiment));
    report.write(&dir)?;
    print!("{}", report.summary());
    println!("report written to {}", dir.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            experiment,
            config,
            out,
            overrides,
        } => run(&experiment, config, out, &overrides),
        Command::SnapshotDump { file } => Snapshot::read(&file).map(|s| {
            print!("{}", s.describe());
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

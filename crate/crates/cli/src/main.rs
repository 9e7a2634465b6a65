use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sqe_lab::{run, Experiment, ExperimentConfig, Overrides};

/// Reproducible experiments on the SQE ensemble model.
#[derive(Parser, Debug)]
#[command(name = "sqe-lab", version)]
struct Cli {
    /// Experiment to run
    #[arg(value_enum)]
    experiment: Experiment,
    /// key = value configuration file; flags and environment take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match cli.config.as_deref().map(Overrides::from_file).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let config = match ExperimentConfig::resolve(cli.experiment, cli.overrides.or(file)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let output = match run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Err(e) = output.write_to(&config.output_path) {
        eprintln!("error: cannot write to {}: {e}", config.output_path.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    for c in &output.summary.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!(
        "{}: {} (outputs in {})",
        config.experiment,
        if output.summary.pass { "pass" } else { "FAIL" },
        config.output_path.display()
    );
    if output.summary.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use parametrix_cli::{run_experiment, Experiment, ExperimentConfig, RunError, EXIT_CHECK_FAILED, EXIT_PASS};

/// Environment override for the output directory (the only one honoured).
const OUT_ENV: &str = "PARAMETRIX_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "parametrix", version, about = "Parametrix laboratory experiments")]
struct Cli {
    /// run-ivp, trace-rays, build-parametrix, compare, verify-symbol-class, sqrt-check or egorov-check
    experiment: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: &Cli) -> Result<i32, RunError> {
    let exp: Experiment = cli.experiment.parse().map_err(RunError::Config)?;
    let cfg = ExperimentConfig::from_path(&cli.config)?;
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output_dir.clone());
    let outcome = run_experiment(exp, &cfg, &out)?;
    println!("{} {} {}", exp, if outcome.pass { "PASS" } else { "FAIL" }, outcome.manifest.display());
    Ok(if outcome.pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            eprintln!("error: {}", e.to_string().lines().next().unwrap_or("bad arguments"));
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

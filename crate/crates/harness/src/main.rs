use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tsi_harness::{builtin_config, resolve, run_experiment, stability_of_run, HarnessError};

#[derive(Parser)]
#[command(name = "tsi", version, about = "Transformed snapshot interpolation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every variant of a config and write CSV results.
    Run {
        /// Builtin name or TOML file.
        config: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        step_size: Option<f64>,
        /// Only run the variants using this smoother.
        #[arg(long)]
        smoother: Option<String>,
        #[arg(long)]
        objective: Option<String>,
    },
    /// Print a builtin config as TOML.
    ExportConfig { name: String },
    /// Perturbation bound of a trained transform against an eps-shift.
    Stability {
        run_dir: PathBuf,
        #[arg(long)]
        perturb: f64,
        /// Variant label; defaults to the first variant.
        #[arg(long)]
        variant: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, out, steps, step_size, smoother, objective } => {
            let cfg = resolve(&config)?.with_overrides(steps, step_size, smoother.as_deref(), objective.as_deref())?;
            let report = run_experiment(&cfg, &out)?;
            for r in &report.comparison.rows {
                println!("{:<12} final {:.6e}  ratio {:.4}", r.label, r.final_value, r.ratio);
            }
        }
        Command::ExportConfig { name } => print!("{}", builtin_config(&name)?.to_toml()),
        Command::Stability { run_dir, perturb, variant } => {
            println!("{}", stability_of_run(&run_dir, variant.as_deref(), perturb)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sketchspec_cli::config::{ExperimentConfig, Task};
use sketchspec_cli::runner::{execute_to_files, RunError};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sketchspec",
    version,
    about = "Randomized sketching experiments: approximate products, sketched regression, \
             low-rank approximation, and concentration labs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override the config's output prefix.
        #[arg(long)]
        output: Option<String>,
    },
    /// Parse and validate a config without running anything.
    Validate { config: PathBuf },
    /// Generate a synthetic matrix from a generator-spec JSON file.
    Gen {
        spec: PathBuf,
        /// Matrix file to write (.mtx/.mm text or .bin/.sksp binary).
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Search the per-regime constants and write a calibration file.
    Calibrate {
        config: PathBuf,
        /// Override the config's output prefix.
        #[arg(long)]
        output: Option<String>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run { config, output } => run_config(&config, output, None),
        Cmd::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                println!(
                    "config ok: task={}, trials={}, output={}",
                    cfg.task.label(),
                    cfg.trials,
                    cfg.output_path
                );
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Cmd::Gen { spec, output } => gen_matrix(&spec, &output),
        Cmd::Calibrate { config, output } => run_config(&config, output, Some(Task::Calibrate)),
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read config {}: {e}", path.display());
        ExitCode::from(EXIT_IO)
    })?;
    ExperimentConfig::from_json(&text).map_err(|e| {
        eprintln!("{e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn run_config(path: &PathBuf, output: Option<String>, require: Option<Task>) -> ExitCode {
    let mut cfg = match load_config(path) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    if let Some(task) = require {
        if cfg.task != task {
            eprintln!(
                "this subcommand needs task \"{}\", the config says \"{}\"",
                task.label(),
                cfg.task.label()
            );
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    if let Some(prefix) = output {
        cfg.output_path = prefix;
    }
    match execute_to_files(&cfg) {
        Ok((out, summary)) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", out.csv_header);
            for row in &out.csv_rows {
                println!("{row}");
            }
            println!(
                "task {}: {} records, {} trial errors",
                cfg.task.label(),
                summary.records,
                summary.failures
            );
            print!(
                "wrote {} and {}",
                summary.jsonl_path.display(),
                summary.csv_path.display()
            );
            if let Some(p) = &summary.calibration_path {
                print!(" and {}", p.display());
            }
            println!();
            ExitCode::SUCCESS
        }
        Err(RunError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(RunError::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(EXIT_IO)
        }
        Err(RunError::Internal(e)) => {
            eprintln!("internal error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn gen_matrix(spec_path: &PathBuf, output: &PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(spec_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read spec {}: {e}", spec_path.display());
            return ExitCode::from(EXIT_IO);
        }
    };
    let spec: sketchspec_core::generate::GeneratorSpec = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("spec parse error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let matrix = match sketchspec_core::generate::generate(&spec) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("generator error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match sketchspec_core::io::write_matrix_file(output, &matrix) {
        Ok(()) => {
            println!(
                "wrote {} x {} matrix to {}",
                matrix.rows(),
                matrix.cols(),
                output.display()
            );
            ExitCode::SUCCESS
        }
        Err(sketchspec_core::Error::InvalidQuery(e)) => {
            eprintln!("output path error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("write error: {e}");
            ExitCode::from(EXIT_IO)
        }
    }
}

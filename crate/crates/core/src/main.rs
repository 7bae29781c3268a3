use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gibbs_nd::config::ExperimentConfig;
use gibbs_nd::harness::{emit_report, exit_code, init_thread_pool, run_config_file, spectrum};
use gibbs_nd::verify::verify_suite;
use gibbs_nd::{Error, Result};

#[derive(Parser)]
#[command(name = "gibbs-nd", version, about = "Non-destructive measurement channels on Gibbs states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protocol described by each config file.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Override the output directory of every config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Number of consecutive seeds to run per config.
        #[arg(long, default_value_t = 1)]
        sweep: usize,
    },
    /// Run the verification batteries and print a JSON report.
    Verify {
        #[arg(long, default_value = "all")]
        scope: String,
        /// Multiplies every bound before comparison.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate result files into one CSV.
    Report {
        pattern: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump KMS-frame superoperator spectra for a config.
    Spectrum {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { configs, out_dir, sweep } => {
            for cfg in &configs {
                for art in run_config_file(cfg, out_dir.as_deref(), sweep)? {
                    let r = &art.record;
                    println!(
                        "{}: estimate {} truth {} error {} T {}",
                        art.result.display(),
                        r.estimate,
                        r.truth,
                        r.abs_error,
                        r.diagnostics.t_len
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { scope, tol_scale, out } => {
            let report = verify_suite(&scope, tol_scale)?;
            write_output(out.as_deref(), &json_bytes(&report)?)?;
            for e in report.failures() {
                eprintln!("FAIL {}/{}: measured {} bound {} {}", e.module, e.anchor, e.measured, e.bound * tol_scale, e.error.as_deref().unwrap_or(""));
            }
            eprintln!("{} passed, {} failed", report.passed, report.failed);
            Ok(if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Report { pattern, out } => {
            let mut buf = Vec::new();
            emit_report(&pattern, &mut buf)?;
            write_output(out.as_deref(), &buf)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Spectrum { config, out } => {
            let dump = spectrum(&ExperimentConfig::load(&config)?)?;
            write_output(out.as_deref(), &json_bytes(&dump)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_thread_pool();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use wer_lab::{parse_config, reproduce_all, run, CliError, Command, ExperimentConfig, Mode, Overrides};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Action {
    Eig,
    Evolve,
    Compile,
    TomoFit,
    Berry,
    Chern,
    Spectrum,
    Sweep,
    /// Every preset dataset into the output directory.
    Reproduce,
}

impl Action {
    fn command(self) -> Option<Command> {
        Some(match self {
            Action::Eig => Command::Eig,
            Action::Evolve => Command::Evolve,
            Action::Compile => Command::Compile,
            Action::TomoFit => Command::TomoFit,
            Action::Berry => Command::Berry,
            Action::Chern => Command::Chern,
            Action::Spectrum => Command::Spectrum,
            Action::Sweep => Command::Sweep,
            Action::Reproduce => return None,
        })
    }
}

/// Numerical laboratory for the exceptional ring of a dissipative two-level
/// system. Quantities are in units of κ.
#[derive(Debug, Parser)]
#[command(name = "wer-lab", version)]
struct Cli {
    action: Action,
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Physical value of κ; outputs scale accordingly.
    #[arg(long)]
    kappa: Option<f64>,
}

/// Caps the work pool at `WER_LAB_THREADS` when set.
fn init_pool() -> Result<(), CliError> {
    let Ok(v) = std::env::var("WER_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::unit("WER_LAB_THREADS", format!("must be a positive integer, got {v:?}")))?;
    // Fails only if a pool already exists, which cannot happen here.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load(path: &Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p.display().to_string(), e))?;
            parse_config(&text)
        }
    }
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    init_pool()?;
    let overrides = Overrides { seed: cli.seed, mode: cli.mode, kappa: cli.kappa };
    let start = Instant::now();
    match cli.action.command() {
        Some(command) => {
            let report = run(load(&cli.config)?, command, &overrides, &cli.out)?;
            let flags = if report.diagnostics.flags.is_empty() {
                String::new()
            } else {
                format!(" flags={}", report.diagnostics.flags.join(","))
            };
            println!("{}{flags} -> {} ({:.1} ms)", report.summary, report.output.display(), ms(report.wall_time));
            Ok(())
        }
        None => {
            if cli.config.is_some() {
                return Err(CliError::schema("--config", "reproduce runs fixed presets and takes no config"));
            }
            let summary = reproduce_all(&cli.out, &overrides)?;
            for (file, err) in &summary.failed {
                eprintln!("failed {file}: {err}");
            }
            println!(
                "reproduce wrote {} files, {} failed -> {} ({:.1} ms)",
                summary.written.len(),
                summary.failed.len(),
                cli.out.display(),
                ms(start.elapsed())
            );
            summary.status()
        }
    }
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

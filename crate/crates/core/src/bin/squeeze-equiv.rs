use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use squeeze_equiv::app::{
    run_design, run_equivalence, run_simulate, run_sweep, write_report, AppError, Report,
};
use squeeze_equiv::config::{ConfigError, OutputFormat, ScenarioConfig};
use squeeze_equiv::presets::{preset, PRESETS};

#[derive(Parser)]
#[command(
    name = "squeeze-equiv",
    version,
    about = "Squeezing of a trapped particle under frequency modulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectories and squeezing observables for each protocol.
    Simulate(Common),
    /// Frequencies inverted from prescribed amplitudes, with a feasibility report.
    Design(Common),
    /// Final squeezing over a parameter grid.
    Sweep(Common),
    /// Squeezing-equivalence problems.
    Equivalence {
        #[command(subcommand)]
        action: EquivalenceAction,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Subcommand)]
enum EquivalenceAction {
    /// Find the free parameters that make two protocols equivalent.
    Solve(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML, or JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Print the resolved scenario and exit.
    #[arg(long)]
    dump_config: bool,
}

impl Common {
    fn scenario(&self) -> Result<ScenarioConfig, AppError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ScenarioConfig::load(path)?,
            (None, Some(name)) => preset(name).ok_or_else(|| {
                ConfigError::new(
                    "--preset",
                    format!("unknown preset {name:?}; known: {}", PRESETS.join(", ")),
                )
            })?,
            (None, None) => {
                return Err(
                    ConfigError::new("--config", "either --config or --preset is required").into(),
                )
            }
        };
        if let Some(rtol) = self.rtol {
            cfg.solver.rtol = rtol;
        }
        if let Some(atol) = self.atol {
            cfg.solver.atol = atol;
        }
        if let Some(format) = self.format {
            cfg.format = format;
        }
        Ok(cfg)
    }
}

fn execute(
    common: &Common,
    run: fn(&ScenarioConfig) -> Result<Report, AppError>,
) -> Result<(), AppError> {
    let cfg = common.scenario()?;
    if common.dump_config {
        let text = match cfg.format {
            OutputFormat::Csv => cfg.to_toml()?,
            OutputFormat::Json => cfg.to_json()?,
        };
        emit(&text);
        return Ok(());
    }
    let report = run(&cfg)?;
    let written = write_report(&report, &common.out, cfg.format)?;
    for path in &written {
        eprintln!("wrote {}", path.display());
    }
    let summary = serde_json::to_string_pretty(&report.summary)
        .map_err(|e| AppError::Output(e.to_string()))?;
    emit(&format!("{summary}\n"));
    Ok(())
}

/// Write to stdout, tolerating a reader that has gone away.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => execute(c, run_simulate),
        Command::Design(c) => execute(c, run_design),
        Command::Sweep(c) => execute(c, run_sweep),
        Command::Equivalence {
            action: EquivalenceAction::Solve(c),
        } => execute(c, run_equivalence),
        Command::Presets => {
            emit(&PRESETS.iter().map(|n| format!("{n}\n")).collect::<String>());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

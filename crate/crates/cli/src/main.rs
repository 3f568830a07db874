use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdt_experiments::{run, CliError, Experiment, ExperimentConfig, Format, OscillatorRun};

/// Fluctuation-dissipation experiments for quantum Markov systems.
#[derive(Parser, Debug)]
#[command(name = "fdt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config file; omitted keys take built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; the table goes to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's Fock truncation n_max.
    #[arg(long, global = true)]
    truncation: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Static susceptibility via the SLD against finite differences.
    Static,
    /// Discrete-time response relation against the direct series.
    MapFdt,
    /// Continuous relation against Kubo, and the thermal FDT in frequency.
    Kubo,
    /// Two-oscillator, two-bath model.
    Oscillators {
        #[command(subcommand)]
        run: OscillatorRun,
    },
}

/// Runs the command, sending the table to `stdout` unless `--out` is given.
fn execute(cli: Cli, stdout: &mut impl Write) -> Result<i32, CliError> {
    let mut config = match &cli.common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.common.seed.is_some() {
        config.seed = cli.common.seed;
    }
    if cli.common.truncation.is_some() {
        config.truncation = cli.common.truncation;
    }
    let experiment = match cli.command {
        Command::Static => Experiment::Static,
        Command::MapFdt => Experiment::MapFdt,
        Command::Kubo => Experiment::Kubo,
        Command::Oscillators { run } => Experiment::Oscillators(run),
    };
    let table = run(experiment, &config)?;
    match &cli.common.out {
        Some(dir) => {
            let path = table.write(dir, experiment.output_name(), cli.common.format)?;
            log::info!("wrote {}", path.display());
        }
        None => {
            let text = table.render(cli.common.format, experiment.output_name())?;
            stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })?;
        }
    }
    for c in table.checks.iter().filter(|c| !c.passed) {
        log::error!("{}: achieved {:e} exceeds tolerance {:e}", c.name, c.achieved, c.tolerance);
    }
    Ok(fdt_experiments::table_exit_code(&table))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match execute(Cli::parse(), &mut std::io::stdout().lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("fdt: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

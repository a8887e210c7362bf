use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sipair::config::{parse_table, resolve, Config};
use sipair::error::{Error, Result};
use sipair::pipeline::{run, write_outputs, Command};
use sipair::presets::PRESETS;

#[derive(Parser)]
#[command(
    name = "sipair",
    version,
    about = "Photon-pair generation in silicon waveguides, rings and Sagnac loops"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Pair spectrum and power sweep of a straight waveguide.
    SimulateWaveguide(RunArgs),
    /// Sagnac loop pump extinction and pair output.
    SimulateSagnac(RunArgs),
    /// Ring transmission, resonances and pair rate.
    SimulateRing(RunArgs),
    /// Monte-Carlo coincidence histogram and SNR curve.
    SimulateCoincidence(RunArgs),
    /// Fit a measured power sweep.
    Fit(RunArgs),
    /// Loss-mechanism comparison table.
    Fig1(RunArgs),
    /// Show built-in presets.
    ListPresets,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; a manifest.toml from an earlier run works too.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for the Monte-Carlo.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    preset: Option<String>,
    /// KEY=VALUE with a dotted key, e.g. pump.power_mw=2. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(args: &RunArgs) -> Result<Config> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            Some(parse_table(&text, &path.display().to_string())?)
        }
        None => None,
    };
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("coincidence.seed={seed}"));
    }
    resolve(file, args.preset.as_deref(), &overrides)
}

fn execute(command: Command, args: &RunArgs) -> Result<()> {
    let config = load(args)?;
    let output = run(command, &config)?;
    let written = write_outputs(&args.out, &output)?;
    print!("{}", output.report);
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn list_presets() {
    for p in PRESETS {
        println!("{}\n  {}", p.name, p.summary);
        for note in p.provenance {
            println!("    - {note}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::SimulateWaveguide(a) => (Command::SimulateWaveguide, a),
        Cmd::SimulateSagnac(a) => (Command::SimulateSagnac, a),
        Cmd::SimulateRing(a) => (Command::SimulateRing, a),
        Cmd::SimulateCoincidence(a) => (Command::SimulateCoincidence, a),
        Cmd::Fit(a) => (Command::Fit, a),
        Cmd::Fig1(a) => (Command::Fig1, a),
        Cmd::ListPresets => {
            list_presets();
            return ExitCode::SUCCESS;
        }
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

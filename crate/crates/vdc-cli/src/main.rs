//! `vdc` — command-line front end for the simulation workbench.
//!
//! Subcommands: `simulate` (one scenario, CSV log + JSON summary), `zwidth`
//! (the full passivity sweep, resumable), `verify` (runtime property suite),
//! and `describe` (configuration schema).
//!
//! Exit codes: 0 success, 1 verification or run failure, 2 configuration
//! error, 3 numeric blow-up.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vdc_core::config::{describe, ConfigFile};
use vdc_core::experiments::{sweep_summary_json, verify_suite, write_curve_csv, zwidth_sweep};
use vdc_core::sim::{run_scenario, write_csv, RunOutcome};
use vdc_core::VdcError;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BLOWUP: u8 = 3;

#[derive(Parser)]
#[command(
    name = "vdc",
    about = "Deterministic workbench for adaptive impedance control of a 7-DoF arm",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path overrides, e.g. --override wall.k_e=1500 (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (default: $VDC_OUT_DIR, else the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ConfigFile, VdcError> {
        let text = match &self.config {
            Some(path) => Some(std::fs::read_to_string(path).map_err(|e| {
                VdcError::Config(format!("cannot read config {}: {e}", path.display()))
            })?),
            None => None,
        };
        ConfigFile::from_sources(text.as_deref(), &self.overrides)
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os("VDC_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write the tick log (CSV) and summary (JSON).
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// RNG seed (shorthand for --override run.seed=N).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the Z-width passivity sweep and write both curves and a summary.
    Zwidth {
        #[command(flatten)]
        config: ConfigArgs,
        /// Worker pool width (shorthand for --override zwidth.workers=N).
        #[arg(long)]
        workers: Option<usize>,
        /// Ignore an existing checkpoint and start from scratch.
        #[arg(long)]
        fresh: bool,
    },
    /// Run the property verification suite.
    Verify {
        /// List every property with its tolerance, not just failures.
        #[arg(long, short)]
        verbose: bool,
    },
    /// Print the configuration schema, presets, and output formats.
    Describe,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                VdcError::Config(_) => EXIT_CONFIG,
                VdcError::BlowUp { .. } | VdcError::NonFinite { .. } => EXIT_BLOWUP,
                _ => EXIT_FAILURE,
            })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, VdcError> {
    match cli.command {
        Command::Simulate { config, seed } => simulate(config, seed),
        Command::Zwidth {
            config,
            workers,
            fresh,
        } => zwidth(config, workers, fresh),
        Command::Verify { verbose } => verify(verbose),
        Command::Describe => {
            print!("{}", describe());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn simulate(args: ConfigArgs, seed: Option<u64>) -> Result<ExitCode, VdcError> {
    let mut overrides_args = args;
    if let Some(s) = seed {
        overrides_args.overrides.push(format!("run.seed={s}"));
    }
    let cfg = overrides_args.load()?;
    // Build (and thereby validate) the whole scenario before creating any
    // output file: a configuration error must not leave partial outputs.
    let scenario = cfg.build_scenario()?;
    let out_dir = overrides_args.out_dir();
    std::fs::create_dir_all(&out_dir)?;

    let log = run_scenario(&scenario)?;
    let summary = log.summary();

    let csv_path = out_dir.join("run.csv");
    write_csv(&log, BufWriter::new(File::create(&csv_path)?))?;
    let json_path = out_dir.join("summary.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&json_path)?), &summary)
        .map_err(|e| VdcError::Config(format!("cannot serialize summary: {e}")))?;

    println!(
        "wrote {} ({} ticks) and {}",
        csv_path.display(),
        summary.ticks,
        json_path.display()
    );
    println!(
        "rms_xy = {:.3e} m, max_xy = {:.3e} m, max_orientation = {:.3} deg, min_Ec = {:+.3e} J, passive = {}",
        summary.rms_position_error_xy,
        summary.max_position_error_xy,
        summary.max_orientation_error_deg,
        summary.min_contact_energy,
        summary.passive
    );
    match &log.outcome {
        RunOutcome::Completed => Ok(ExitCode::SUCCESS),
        RunOutcome::BlownUp { t, context } => {
            eprintln!("run blew up at t = {t:.4} s: {context}");
            Ok(ExitCode::from(EXIT_BLOWUP))
        }
        RunOutcome::RegulationFailed { max_err } => {
            eprintln!("start-pose regulation failed (max |e| = {max_err:.3e} rad)");
            Ok(ExitCode::from(EXIT_FAILURE))
        }
    }
}

fn zwidth(args: ConfigArgs, workers: Option<usize>, fresh: bool) -> Result<ExitCode, VdcError> {
    let mut args = args;
    if let Some(w) = workers {
        args.overrides.push(format!("zwidth.workers={w}"));
    }
    let cfg = args.load()?;
    let spec = cfg.build_zwidth()?;
    let out_dir = args.out_dir();
    std::fs::create_dir_all(&out_dir)?;

    let checkpoint = out_dir.join("zwidth_checkpoint.json");
    if fresh && checkpoint.exists() {
        std::fs::remove_file(&checkpoint)?;
    }
    if checkpoint.exists() {
        println!("resuming from checkpoint {}", checkpoint.display());
    }

    let progress = |curve: &str, value: f64, point: &vdc_core::experiments::ZWidthPoint| {
        println!(
            "{curve:>12} = {value:<6}: k_e_max = {:>7} N/m, min_Ec = {:+.3e} J{}",
            point.k_e_max,
            point.min_energy,
            point
                .diagnostic
                .as_deref()
                .map(|d| format!("  [{d}]"))
                .unwrap_or_default()
        );
    };
    let result = zwidth_sweep(&spec, Some(&checkpoint), Some(&progress))?;

    let damping_path = out_dir.join("zwidth_damping.csv");
    write_curve_csv(&result.damping, BufWriter::new(File::create(&damping_path)?))?;
    let mass_path = out_dir.join("zwidth_mass.csv");
    write_curve_csv(&result.mass, BufWriter::new(File::create(&mass_path)?))?;
    let summary_path = out_dir.join("zwidth_summary.json");
    let summary = sweep_summary_json(&spec, &result);
    serde_json::to_writer_pretty(BufWriter::new(File::create(&summary_path)?), &summary)
        .map_err(|e| VdcError::Config(format!("cannot serialize sweep summary: {e}")))?;
    // The sweep finished; the checkpoint is no longer needed.
    let _ = std::fs::remove_file(&checkpoint);

    println!(
        "wrote {}, {}, {}",
        damping_path.display(),
        mass_path.display(),
        summary_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn verify(verbose: bool) -> Result<ExitCode, VdcError> {
    let report = verify_suite()?;
    print!("{}", report.render(verbose));
    if report.all_passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_FAILURE))
    }
}

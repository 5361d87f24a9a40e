use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lrtfim_cli::sweep::entry_dir;
use lrtfim_cli::{deconvolve_samples, run, sweep, CliError, CliResult, ErrorKind, Mode, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "lrtfim", version, about = "Long-range transverse-field Ising experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical gap and field versus interaction range.
    Spectrum(RunArgs),
    /// Field ramp from +y followed by x-basis readout.
    Quench(RunArgs),
    /// Ramp down and mirror back up; recovered transverse magnetization.
    Reverse(RunArgs),
    /// Staggered Binder cumulant over a grid of ramp time constants.
    Rampsweep(RunArgs),
    /// Ferromagnetic (-y start) versus antiferromagnetic (+y start) ramps.
    Fm(RunArgs),
    /// Invert the detection channel on a sample CSV.
    Deconv(DeconvArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configurations; more than one runs a sweep.
    configs: Vec<PathBuf>,
    /// Treat the configs as a sweep even when there are fewer than two.
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent runs (sweeps) or coupling sets (single runs).
    #[arg(long)]
    workers: Option<usize>,
    /// Lift the spin-count guard.
    #[arg(long)]
    allow_large: bool,
    /// Validate and print the resolved configuration without running.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct DeconvArgs {
    /// Sample CSV with header `basis,bitstring,count`.
    input: PathBuf,
    #[arg(long, default_value_t = 0.93)]
    epsilon: f64,
    #[arg(long, default_value = "runs/deconv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let (mode, args) = match cli.command {
        Command::Spectrum(a) => (Mode::SpectrumScan, a),
        Command::Quench(a) => (Mode::Quench, a),
        Command::Reverse(a) => (Mode::CoherenceReversal, a),
        Command::Rampsweep(a) => (Mode::RampSpeedSweep, a),
        Command::Fm(a) => (Mode::FmComparison, a),
        Command::Deconv(a) => {
            let manifest = deconvolve_samples(&a.input, a.epsilon, &a.out)?;
            return print_json(&manifest);
        }
    };
    let overrides = Overrides {
        seed: args.seed,
        shots: args.shots,
        epsilon: args.epsilon,
        output_dir: args.out.clone(),
        allow_large_n: args.allow_large,
        workers: args.workers,
    };
    let configs = args.configs.iter().map(|p| RunConfig::load(p)).collect::<CliResult<Vec<_>>>()?;
    if args.sweep || configs.len() > 1 {
        let root = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("runs/{}_sweep", mode.label())));
        if args.dry_run {
            let resolved: Vec<_> = configs
                .into_iter()
                .map(|c| c.resolve(mode, &overrides).map(|c| c.to_toml()).map_err(|e| e.to_json()))
                .collect();
            for r in resolved {
                match r {
                    Ok(text) => println!("{text}"),
                    Err(e) => println!("# invalid: {e}"),
                }
            }
            return Ok(());
        }
        let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        let entry_overrides = Overrides { workers: Some(1), ..overrides };
        let report = sweep(mode, configs, &entry_overrides, &root, workers)?;
        print_json(&report)?;
        return match report.failures() {
            0 => Ok(()),
            k => Err(CliError::new(ErrorKind::Simulation, format!("{k} of {} sweep entries failed", report.entries.len()))),
        };
    }
    let config = configs.into_iter().next().unwrap_or_default().resolve(mode, &overrides)?;
    if args.dry_run {
        print!("{}", config.to_toml());
        return Ok(());
    }
    let dir = match &config.output_dir {
        Some(d) => d.clone(),
        None => entry_dir(&PathBuf::from("runs"), &config),
    };
    let manifest = run(&config, &dir)?;
    print_json(&manifest)
}

fn print_json<S: serde::Serialize>(value: &S) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::new(ErrorKind::Io, e.to_string()))?;
    println!("{text}");
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use otasched_harness::{emit_csv, emit_plot, plot_axes, run_experiment, ExperimentSpec, HarnessError, Variant};

/// Environment variable overriding the default worker count.
const THREADS_ENV: &str = "OTASCHED_THREADS";

#[derive(Debug, Parser)]
#[command(name = "otasched", version, about = "Run a device-scheduling Monte-Carlo experiment")]
struct Cli {
    /// Experiment spec (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to $OTASCHED_THREADS, then to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Scheduler variant to run (repeatable); replaces the spec's list.
    #[arg(long = "variant")]
    variants: Vec<String>,
    /// Also write an SVG plot next to the CSV.
    #[arg(long)]
    plot: bool,
}

fn threads(cli: &Cli) -> Result<usize, HarnessError> {
    if let Some(n) = cli.threads {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| HarnessError::Validation(vec![format!("{THREADS_ENV}: not a thread count: {v:?}")])),
        Err(_) => Ok(0),
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let mut spec = ExperimentSpec::load(&cli.spec)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(out) = &cli.out {
        spec.output = Some(out.clone());
    }
    if !cli.variants.is_empty() {
        let (known, unknown): (Vec<_>, Vec<_>) = cli.variants.iter().partition(|v| Variant::parse(v).is_some());
        if !unknown.is_empty() {
            return Err(HarnessError::Validation(
                unknown.iter().map(|v| format!("--variant: unknown variant {v:?}")).collect(),
            ));
        }
        spec.variants = known.iter().filter_map(|v| Variant::parse(v)).collect();
    }
    spec.validate()?;
    let threads = threads(&cli)?;

    let rows = run_experiment(&spec, threads)?;
    let dir = spec.output.clone().unwrap_or_else(|| PathBuf::from("."));
    let csv = dir.join(format!("{}.csv", spec.name));
    emit_csv(&rows, &csv)?;
    log::info!("wrote {} rows to {}", rows.len(), csv.display());
    if cli.plot {
        let svg = dir.join(format!("{}.svg", spec.name));
        if let Err(e) = emit_plot(&rows, plot_axes(spec.kind), &svg) {
            log::warn!("plot not written: {e}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("otasched: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

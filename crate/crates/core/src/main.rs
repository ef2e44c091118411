use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qsw_memory::config::{keys_help, parse_config, Command, OutputFormat, RunConfig, OUTPUT_DIR_ENV};
use qsw_memory::error::{Error, Result};
use qsw_memory::report::{emit_results, run};

#[derive(Parser, Debug)]
#[command(name = "qsw-memory", version, about = "Quantum stochastic walk associative memory simulations")]
#[command(after_long_help = after_help())]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,

    /// JSON run configuration; every key is optional
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides `seed`)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides `output.dir` and the environment)
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Report format (overrides `output.format`)
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    /// Worker threads (overrides `jobs`)
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// One scenario, one sample
    Simulate,
    /// Full scenario x amplitude x sample grid
    Sweep,
    /// Coupler calibration round trip and dephasing rates
    Calibrate,
    /// Hopfield reference retrieval
    Hopfield,
}

fn after_help() -> String {
    format!(
        "Precedence: flags > config file > ${OUTPUT_DIR_ENV} (output directory only) > defaults.\n\
         Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O error.\n\n{}",
        keys_help()
    )
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(sub) = cli.command {
        cfg.command = match sub {
            Sub::Simulate => Command::Simulate,
            Sub::Sweep => Command::Sweep,
            Sub::Calibrate => Command::Calibrate,
            Sub::Hopfield => Command::Hopfield,
        };
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.output {
        cfg.output.dir = Some(dir.to_string_lossy().into_owned());
    }
    if let Some(format) = cli.format {
        cfg.output.format = format;
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = load(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Configuration(e.to_string()))?;
    let report = pool.install(|| run(&cfg))?;
    emit_results(&report, cfg.output.format, cfg.output_dir().as_ref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

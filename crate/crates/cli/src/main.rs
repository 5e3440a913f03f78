//! `sqbill`: command-line explorer for the contracting square billiard.

mod commands;
mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sqbilliard::export::to_json;
use sqbilliard::Execution;

use commands::{Output, Payload};
use config::{ConfigError, Format, RunConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

#[derive(Parser)]
#[command(name = "sqbill", version, about = "Square billiard with a contracting reflection law")]
struct Cli {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Extra config assignments, `key=value`, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Print the effective config in file form and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Raster,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Iterate one orbit of the reduced or full map.
    Orbit,
    /// Sample the attractor from an ensemble of initial conditions.
    Attractor,
    /// Invariant manifolds and singular curves as curve data.
    Manifolds,
    /// Bifurcation constants and the c_n table.
    Constants,
    /// Basin of the parabolic line on a grid.
    Basin,
    /// Per-lambda summary over a range.
    Scan,
    /// Periodic orbits with residuals and stability.
    Periodic,
}

fn effective_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_text(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = cli.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.threads {
        cfg.threads = v;
    }
    if let Some(v) = &cli.out {
        cfg.out = Some(v.clone());
    }
    if let Some(f) = cli.format {
        cfg.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Raster => Format::Raster,
        };
    }
    for kv in &cli.sets {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError(format!("--set expects key=value, got '{kv}'")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_output(cfg: &RunConfig, out: Output, seconds: f64) -> Result<()> {
    let bytes = match out.payload {
        Payload::Text(b) | Payload::Bytes(b) => b,
        Payload::Json(mut v) => {
            if cfg.report_timing {
                v["wall_time_s"] = json!(seconds);
            }
            to_json(&v)?.into_bytes()
        }
    };
    match &cfg.out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(f);
            w.write_all(&bytes)?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            w.write_all(&bytes)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<Option<String>> {
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global().ok();
    }
    let exec = Execution::Parallel;
    let start = Instant::now();
    let out = match cli.command {
        Command::Orbit => commands::orbit(cfg)?,
        Command::Attractor => commands::attractor(cfg, exec)?,
        Command::Manifolds => commands::manifolds(cfg, exec)?,
        Command::Constants => commands::constants(cfg, exec)?,
        Command::Basin => commands::basin(cfg, exec)?,
        Command::Scan => commands::scan(cfg, exec)?,
        Command::Periodic => commands::periodic(cfg)?,
    };
    let seconds = start.elapsed().as_secs_f64();
    let partial = out.partial.clone();
    write_output(cfg, out, seconds)?;
    eprintln!("wall time: {seconds:.3} s");
    Ok(partial)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match effective_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if cli.dump_config {
        print!("{}", cfg.to_text());
        return ExitCode::SUCCESS;
    }
    match run(&cli, &cfg) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(msg)) => {
            eprintln!("partial results: {msg}");
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(EXIT_CONFIG)
            } else if e.chain().any(|c| c.downcast_ref::<sqbilliard::Error>().is_some()) {
                ExitCode::from(EXIT_NUMERIC)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;
mod verify;

use config::{RawConfig, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{0}")]
    Numerical(#[from] pathxform::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "pathxform", version, about = "Hit functions, path-averaged potentials and worldline sampling")]
struct Cli {
    /// Run configuration (`key = value` lines, `#` comments)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed for the sampler
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of sampled paths (0 skips sampling)
    #[arg(long, global = true)]
    paths: Option<usize>,

    /// Time slices per path
    #[arg(long, global = true)]
    steps: Option<usize>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Evaluation method (hit: closed, quadrature, convolution, asymptotic; pap: closed, series, fourier)
    #[arg(long, global = true)]
    method: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the normalized hit function against a sampled histogram
    Hit,
    /// Tabulate the path-averaged potential against a sampled histogram
    Pap,
    /// Compare the kernel from every available route
    Kernel,
    /// Write a path ensemble in the flat binary format
    Sample,
    /// Run the invariant suite
    Verify {
        /// `all` or one of domain, specfun, greens, kernels, hitfn, pap, sampler
        #[arg(default_value = "all")]
        selector: String,

        /// Multiplies every tolerance; 0 makes every check fail
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    if let Some(s) = cli.seed {
        raw.set("seed", s);
    }
    if let Some(n) = cli.paths {
        raw.set("paths", n);
    }
    if let Some(n) = cli.steps {
        raw.set("steps", n);
    }
    if let Some(o) = &cli.out {
        raw.set("out", o.display());
    }
    if let Some(m) = &cli.method {
        raw.set("method", m);
    }
    RunConfig::from_raw(&raw)
}

fn run_verify(cli: &Cli, selector: &str, scale: f64) -> Result<ExitCode, CliError> {
    let seed = match cli.seed {
        Some(s) => s,
        None => load_config(cli)?.seed,
    };
    let Some(results) = verify::run(selector, seed, scale) else {
        return Err(CliError::Usage(format!(
            "unknown selector `{selector}`; use all or one of {}",
            verify::MODULES.join(", ")
        )));
    };
    println!("module,check,status,measured,tolerance");
    for r in &results {
        let status = if r.pass { "pass" } else { "fail" };
        println!(
            "{},{},{status},{},{}",
            r.module,
            r.name,
            output::format_number(r.measured),
            output::format_number(r.tolerance)
        );
        if let Some(e) = &r.error {
            eprintln!("{}::{}: {e}", r.module, r.name);
        }
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.pass).collect();
    eprintln!("{} checks, {} failed", results.len(), failed.len());
    for r in &failed {
        eprintln!("FAILED {}::{}", r.module, r.name);
    }
    Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    match &cli.command {
        Command::Verify { selector, tolerance_scale } => return run_verify(cli, selector, *tolerance_scale),
        Command::Hit => {
            for f in commands::cmd_hit(&load_config(cli)?)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Pap => {
            for f in commands::cmd_pap(&load_config(cli)?)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Kernel => println!("wrote {}", commands::cmd_kernel(&load_config(cli)?)?.display()),
        Command::Sample => println!("wrote {}", commands::cmd_sample(&load_config(cli)?)?.display()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

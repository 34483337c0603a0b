use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod probes;

use commands::Failure;

/// Batch runner for semiclassical phase-space experiments.
#[derive(Parser, Debug)]
#[command(name = "wignerlab", version, about)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Evolve one experiment and write logs, fields and snapshots.
    Run(Common),
    /// Run the ħ sweep and every selected probe.
    Sweep(Common),
    /// Evaluate the time-independent probes.
    Probe(Common),
    /// Merge probe reports found under a results directory.
    Report {
        /// Directory holding `*.report.json` files.
        dir: PathBuf,
        /// Where merged files go (defaults to the results directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// SimConfig JSON; the shipped default when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Dotted-path override `key=value`, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for every randomized probe, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let color = std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal();
    let result = match cli.verb {
        Verb::Run(c) => with_config(c, |cfg, out| commands::run(&cfg, &out)),
        Verb::Sweep(c) => with_config(c, |cfg, out| commands::sweep(&cfg, &out, color)),
        Verb::Probe(c) => with_config(c, |cfg, out| commands::probe(&cfg, &out, color)),
        Verb::Report { dir, out } => {
            let out = out.unwrap_or_else(|| dir.clone());
            commands::report(&dir, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(msg) = f.message() {
                eprintln!("{msg}");
            }
            ExitCode::from(f.code())
        }
    }
}

fn with_config(
    c: Common,
    body: impl FnOnce(wignerlab::SimConfig, PathBuf) -> Result<(), Failure>,
) -> Result<(), Failure> {
    let text = match &c.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?,
        None => commands::DEFAULT_CONFIG.to_owned(),
    };
    let mut overrides = c.overrides;
    if let Some(seed) = c.seed {
        overrides.push(format!("seed={seed}"));
    }
    let cfg = wignerlab::SimConfig::from_json_with(&text, &overrides).map_err(Failure::from)?;
    if cfg.sign < 0.0 {
        eprintln!("wignerlab: warning: attractive interaction (sign = -1) is outside the validated range");
    }
    let out = c.out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = c.jobs {
        if j == 0 {
            return Err(Failure::config("--jobs must be positive".into()));
        }
        pool = pool.num_threads(j);
    }
    pool.build_global().map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    body(cfg, out)
}

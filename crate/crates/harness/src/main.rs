use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use degenlab::config::{parse_for_command, Command};
use degenlab::record::emit_tables;
use degenlab::run::{run, Outcome};
use degenlab_core::Exec;

#[derive(Parser, Debug)]
#[command(name = "degenlab", version, about = "Numerical experiments for degenerate parabolic equations")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Installs the global pool; `DEGENLAB_THREADS=1` also selects the
/// sequential kernels.
fn configure_threads() -> Result<Exec, String> {
    let threads = match std::env::var("DEGENLAB_THREADS") {
        Ok(v) => Some(
            v.parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| format!("DEGENLAB_THREADS: expected a positive integer, got {v:?}"))?,
        ),
        Err(_) => None,
    };
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(match threads {
        Some(1) => Exec::Sequential,
        _ => Exec::default(),
    })
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {msg}");
    ExitCode::from(Outcome::ConfigError.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = match configure_threads() {
        Ok(e) => e,
        Err(e) => return config_error(e),
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return config_error(format!("{}: {e}", cli.config.display())),
    };
    let mut cfg = match parse_for_command(&text, cli.command) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    let (record, outcome) = run(&cfg, exec);
    if let Err(e) = emit_tables(&record, &cfg.output_dir) {
        eprintln!("cannot write {}: {e}", cfg.output_dir.display());
        return ExitCode::from(1);
    }
    for (name, pass) in &record.verdicts {
        println!("{name}: {}", if *pass { "pass" } else { "FAIL" });
    }
    for e in &record.errors {
        match &e.location {
            Some(loc) => eprintln!("{} error at {loc}: {}", e.stage, e.message),
            None => eprintln!("{} error: {}", e.stage, e.message),
        }
    }
    eprintln!("{} finished in {:.2?}", record.command, record.wall_clock);
    ExitCode::from(outcome.exit_code() as u8)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use paraxial::commands::{execute, Command, CommandError};
use paraxial::config::{parse_config, SCHEMA_HELP};

const EXIT_CONFIG: u8 = 2;
const EXIT_VERDICT: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Sweep,
    Run,
    EnergyTrace,
    TailScaling,
    IllposedDemo,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Sweep => Command::Sweep,
            Cmd::Run => Command::Run,
            Cmd::EnergyTrace => Command::EnergyTrace,
            Cmd::TailScaling => Command::TailScaling,
            Cmd::IllposedDemo => Command::IllposedDemo,
        }
    }
}

/// Compares Helmholtz z-evolution with its paraxial approximation on a spectral grid.
#[derive(Debug, Parser)]
#[command(name = "paraxial-verify", version, after_long_help = SCHEMA_HELP, after_help = SCHEMA_HELP)]
struct Cli {
    command: Cmd,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; PARAXIAL_THREADS takes precedence.
    #[arg(long)]
    threads: Option<usize>,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    match std::env::var("PARAXIAL_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| format!("PARAXIAL_THREADS must be a positive integer, got `{v}`")),
        Err(_) => Ok(flag),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }

    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let out_dir = cli
        .out_dir
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    match execute(cli.command.into(), &config, &out_dir) {
        Ok(outcome) => {
            for v in &outcome.verdicts {
                let status = if v.passed { "PASS" } else { "FAIL" };
                println!(
                    "{status} {} [{}] value={:e} threshold={:e}",
                    v.name, v.checks, v.value, v.threshold
                );
            }
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERDICT)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CommandError::Runtime(paraxial::ParaxialError::SweepAborted { completed, .. }) = &e {
                eprintln!("{} epsilon value(s) completed before the failure", completed.len());
            }
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

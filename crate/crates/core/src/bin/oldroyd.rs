use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use oldroyd::config::parse_config;
use oldroyd::io::{write_diagnostics, write_snapshot};
use oldroyd::scenarios::{build, run, run_with, ScenarioKind};
use oldroyd::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "oldroyd", version, about = "Compressible Oldroyd-B simulator and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file and write its output.
    Run {
        config: PathBuf,
        /// Output directory (default: [output] dir, then $OLDROYD_OUT_DIR, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the end time.
        #[arg(long)]
        until: Option<f64>,
        /// Write a snapshot every N steps.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        snapshot_every: Option<u64>,
    },
    /// Run a preset with its defaults; exit 0 when its verdict passes.
    Verify { scenario: String },
    /// List the presets and the property each one checks.
    List,
}

fn print_verdict(name: &str, passed: bool, summary: &str) {
    println!("{name}: {} ({summary})", if passed { "PASS" } else { "FAIL" });
}

fn cmd_run(config: &Path, out: Option<PathBuf>, until: Option<f64>, snapshot_every: Option<u64>) -> ExitCode {
    let text = match fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", config.display());
            eprintln!("usage: oldroyd run <CONFIG> [--out DIR] [--until T] [--snapshot-every N]");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(t) = until {
        cfg.overrides.t_end = Some(t);
    }
    if let Some(n) = snapshot_every {
        cfg.output.snapshot_every = Some(n as usize);
    }
    let sc = match cfg.to_scenario() {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let dir = out
        .or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os("OLDROYD_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let result = (|| -> oldroyd::Result<_> {
        fs::create_dir_all(&dir)?;
        let g = sc.grid()?;
        let every = cfg.output.snapshot_every;
        let mut snap = |step: usize, s: &oldroyd::State| -> oldroyd::Result<()> {
            match every {
                Some(n) if step.is_multiple_of(n) => write_snapshot(s, &g, &dir.join(format!("snapshot_{step:06}.txt"))),
                _ => Ok(()),
            }
        };
        let output = run_with(&sc, &mut snap)?;
        write_snapshot(&output.state, &g, &dir.join("final.txt"))?;
        write_diagnostics(&output.history, &dir.join("diagnostics.csv"))?;
        Ok(output)
    })();
    match result {
        Ok(output) => {
            print_verdict(sc.kind.name(), output.verdict.passed, &output.verdict.summary);
            println!("output written to {}", dir.display());
            if output.verdict.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}

fn cmd_verify(name: &str) -> ExitCode {
    let sc = match build(name) {
        Ok(sc) => sc,
        Err(e @ Error::UnknownScenario(_)) => {
            eprintln!("error: {e}; try `oldroyd list`");
            return ExitCode::from(EXIT_USAGE);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(&sc) {
        Ok(out) => {
            print_verdict(name, out.verdict.passed, &out.verdict.summary);
            if out.verdict.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            until,
            snapshot_every,
        } => cmd_run(&config, out, until, snapshot_every),
        Command::Verify { scenario } => cmd_verify(&scenario),
        Command::List => {
            for kind in ScenarioKind::ALL {
                println!("{:<24} {}", kind.name(), kind.claim());
            }
            ExitCode::SUCCESS
        }
    }
}

//! `topomill`: machinable topology optimization from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use topomill_core::config::{preset_documents, RunConfig};
use topomill_core::machining::DEFAULT_RAY_THRESHOLD;
use topomill_core::runner::{self, Verdict};
use topomill_core::{io, Error};

#[derive(Parser)]
#[command(name = "topomill", version, about = "Topology optimization with multi-axis machining constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the design described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a density file for machinability along the given directions.
    Check {
        field: PathBuf,
        /// Insertion direction as comma-separated components, e.g. `0,0,-1`.
        #[arg(long = "dir", required = true, value_parser = parse_direction)]
        dirs: Vec<Vec<f64>>,
        /// Perpendicular ray threshold.
        #[arg(long, default_value_t = DEFAULT_RAY_THRESHOLD)]
        d0: f64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print the benchmark configs.
    Presets,
}

fn parse_direction(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("bad component `{c}`: {e}")))
        .collect()
}

fn exit_code(err: &Error) -> ExitCode {
    if err.is_numerical() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn run(config: PathBuf, output: Option<PathBuf>) -> Result<(), Error> {
    let text = std::fs::read_to_string(&config)?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(dir) = output {
        cfg.output = dir;
    }
    let outcome = runner::run(&cfg)?;
    let s = &outcome.summary;
    println!(
        "compliance {:.6} volume {:.6} after {} iterations ({})",
        s.compliance,
        s.volume,
        s.iterations,
        if s.converged { "converged" } else { "iteration cap reached" }
    );
    for p in &s.projections {
        println!("direction {:?}: {:?} (max violation {:e})", p.direction, p.verdict, p.max_violation);
    }
    for path in &outcome.artifacts {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn check(field: PathBuf, dirs: Vec<Vec<f64>>, d0: f64, json: bool) -> Result<(), Error> {
    let (grid, values) = io::read_density(&field)?;
    let report = runner::check_field(&grid, &values, &dirs, d0)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        return Ok(());
    }
    for d in &report.directions {
        let verdict = match d.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        };
        println!(
            "direction {:?}: {verdict}, max violation {:e}, blocked voids {}",
            d.direction, d.max_violation, d.blocked_voids
        );
    }
    println!(
        "voids unreachable from every direction: {}",
        report.inaccessible_voids
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output } => run(config, output),
        Command::Check { field, dirs, d0, json } => check(field, dirs, d0, json),
        Command::Presets => {
            for (name, doc) in preset_documents() {
                println!("# {name}");
                println!("{}", serde_json::to_string_pretty(&doc).expect("preset serializes"));
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            exit_code(&e)
        }
    }
}

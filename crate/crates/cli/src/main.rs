//! `fracscat`: batch runner for the scattering experiments.
//!
//! Exit status: 0 success, 2 validation error, 3 numerical-guard abort, 4 solver non-convergence,
//! 5 output I/O failure.

mod config;
mod emit;
mod experiments;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracscat_core::Error;

use crate::emit::{GuardRecord, Section};

const EXIT_VALIDATION: u8 = 2;
const EXIT_GUARD: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "fracscat", version, about = "Scattering experiments for (−Δ)^{s/2} + V on periodic grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config file and write the outputs.
    Run { config: PathBuf },
    /// Check a config file against the schema without computing.
    Validate { config: PathBuf },
    /// Print the experiment kinds.
    ListExperiments,
}

fn exit_code_for(e: &Error) -> u8 {
    if e.is_guard() {
        EXIT_GUARD
    } else if matches!(e, Error::NonConvergence { .. }) {
        EXIT_SOLVER
    } else {
        EXIT_VALIDATION
    }
}

fn load(path: &Path) -> Result<config::RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    config::parse(&text)
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("FRACSCAT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("FRACSCAT_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err("FRACSCAT_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn write_outputs(dir: &Path, files: &[(&str, &str)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn run(path: &Path) -> u8 {
    let cfg = match load(path) {
        Ok(c) => c,
        Err(m) => {
            eprintln!("error: {m}");
            return EXIT_VALIDATION;
        }
    };
    if let Err(m) = configure_threads() {
        eprintln!("error: {m}");
        return EXIT_VALIDATION;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let out_dir = if cfg.output.is_absolute() { cfg.output.clone() } else { base.join(&cfg.output) };
    let hash = config::config_hash(&cfg);
    let single = cfg.experiments.len() == 1;

    let mut outcomes = vec![];
    let mut failure: Option<(usize, Error)> = None;
    for (i, e) in cfg.experiments.iter().enumerate() {
        match experiments::run(e) {
            Ok(o) => outcomes.push(o),
            Err(err) => {
                failure = Some((i, err));
                break;
            }
        }
    }
    let id = |i: usize, kind: &str| if single { kind.to_string() } else { format!("{kind}.{}", i + 1) };
    let sections: Vec<Section> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let e = &cfg.experiments[i];
            Section { id: id(i, e.kind()), kind: e.kind(), config: serde_json::to_value(e).expect("config serializes"), outcome: o }
        })
        .collect();

    let (code, guards, message) = match &failure {
        None => (0, vec![], None),
        Some((i, err)) => {
            let guards: Vec<GuardRecord> = err
                .guard_name()
                .map(|g| GuardRecord { experiment: id(*i, cfg.experiments[*i].kind()), guard: g.into(), message: err.to_string() })
                .into_iter()
                .collect();
            let msg = format!("{}: {err}", id(*i, cfg.experiments[*i].kind()));
            eprintln!("error: {msg}");
            (exit_code_for(err), guards, Some(msg))
        }
    };
    let resolved = config::resolved_text(&cfg);
    let csv = emit::csv(&sections, &hash);
    let summary = emit::summary(&sections, &hash, i32::from(code), &guards, message.as_deref());
    let plot = emit::plot_script(&sections);
    let files = [("results.csv", csv.as_str()), ("summary.json", summary.as_str()), ("plot.gp", plot.as_str()), ("config.resolved", resolved.as_str())];
    if let Err(e) = write_outputs(&out_dir, &files) {
        eprintln!("error: writing {}: {e}", out_dir.display());
        return EXIT_IO;
    }
    for sec in &sections {
        for v in &sec.outcome.verdicts {
            println!("{} {} {} = {} [{}]", sec.id, v.cell, v.metric, emit::number(v.value), v.verdict);
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => run(&config),
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("ok: {} experiment(s), config hash {}", cfg.experiments.len(), config::config_hash(&cfg));
                0
            }
            Err(m) => {
                eprintln!("error: {m}");
                EXIT_VALIDATION
            }
        },
        Command::ListExperiments => {
            for (k, d) in config::KINDS {
                println!("{k:<14} {d}");
            }
            0
        }
    };
    ExitCode::from(code)
}

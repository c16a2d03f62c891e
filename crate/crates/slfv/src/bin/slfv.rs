use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slfv::experiment::{replay_run, run_experiment, ConfigDocument, ExperimentConfig, RunStatus};
use slfv::Error;

#[derive(Parser)]
#[command(name = "slfv", version, about = "Spatial Lambda-Fleming-Viot experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Re-apply a recorded event log; reads config.txt from the log's directory.
    Replay { log: PathBuf },
    /// Validate a config file and print its effective settings.
    Check { config: PathBuf },
}

fn load(path: &PathBuf, overrides: &[(&str, Option<String>)]) -> slfv::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let mut doc = ConfigDocument::parse(&text)?;
    for (k, v) in overrides {
        if let Some(v) = v {
            doc.set(k, v.clone());
        }
    }
    ExperimentConfig::from_document(&doc)
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::Config(_) => ExitCode::from(2),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { config, seed, out, threads } => {
            let overrides = [
                ("seed", seed.map(|s| s.to_string())),
                ("out", out.map(|p| p.display().to_string())),
                ("threads", threads.map(|k| k.to_string())),
            ];
            load(&config, &overrides).and_then(|cfg| run_experiment(&cfg)).map(|m| {
                for w in &m.warnings {
                    eprintln!("warning: {w}");
                }
                debug_assert_eq!(m.status, RunStatus::Complete);
                println!("{} complete in {}", m.kind, m.dir().display());
            })
        }
        Command::Replay { log } => replay_run(&log).and_then(|(cfg, out)| {
            println!("replayed {} events of a {} run ({} snapshots)", out.events, cfg.kind, out.snapshots.len());
            match out.matches_stored {
                Some(true) => println!("final field is bitwise identical to the stored one"),
                Some(false) => return Err(Error::InvalidParameter("replayed final field differs from the stored one".into())),
                None => println!("no stored final field to compare against"),
            }
            Ok(())
        }),
        Command::Check { config } => load(&config, &[]).map(|cfg| {
            print!("{}", cfg.canonical_text());
            println!("# config_hash = {}", cfg.hash_hex());
        }),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

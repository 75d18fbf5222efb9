use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use srcloc::cli::{load_config_with, run, write_error_record, CliError, Mode, Overrides, Profile};

/// Source-localization Monte-Carlo experiments.
#[derive(Debug, Parser)]
#[command(name = "srcloc", version)]
struct Args {
    /// Experiment to run; overrides `mode` in the config file.
    #[arg(value_enum)]
    mode: Option<Mode>,
    /// JSON experiment config.
    #[arg(long, short)]
    config: PathBuf,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $SRCLOC_OUT_DIR, then ./srcloc-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trial-count defaults.
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

fn fail(err: &CliError, out_dir: Option<&PathBuf>) -> ExitCode {
    if let Some(dir) = out_dir {
        write_error_record(dir, err);
    }
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        mode: args.mode,
        seed: args.seed,
        out_dir: args.out.clone(),
        profile: args.profile,
        workers: args.workers,
    };
    let cfg = match load_config_with(&args.config, &overrides) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e, args.out.as_ref()),
    };
    match run(&cfg) {
        Ok(summary) => {
            for name in &summary.artifacts {
                println!("{}", summary.out_dir.join(name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, Some(&cfg.out_dir)),
    }
}

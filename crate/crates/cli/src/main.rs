//! `modmirror` command-line front end.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when a solver fails,
//! 1 when outputs cannot be written.

mod args;
mod commands;
mod output;

use std::fmt;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use env_logger::Env;
use modmirror::sweep;

use args::{Cli, Command};
use commands::Ctx;
use output::{write_json, RunManifest, RunRecord, MANIFEST_NAME};

#[derive(Debug)]
pub enum CliError {
    Core(modmirror::Error),
    Input(String),
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) => 3,
            CliError::Input(_) => 2,
            CliError::Output(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Input(s) => write!(f, "invalid input: {s}"),
            CliError::Output(s) => write!(f, "cannot write output: {s}"),
        }
    }
}

impl From<modmirror::Error> for CliError {
    fn from(e: modmirror::Error) -> Self {
        CliError::Core(e)
    }
}

fn dispatch(ctx: &Ctx, command: &Command) -> Result<RunRecord, CliError> {
    match command {
        Command::SingleQubit(a) => commands::single_qubit(ctx, a),
        Command::Sidebands(a) => commands::sidebands_cmd(ctx, a),
        Command::Mollow(a) => commands::mollow(ctx, a),
        Command::Psd(a) => commands::psd(ctx, a),
        Command::Map(a) => commands::map(ctx, a),
        Command::PowerMap(a) => commands::power_map_cmd(ctx, a),
        Command::Fit(a) => commands::fit(ctx, a),
        Command::Gyrator(a) => commands::gyrator(ctx, a),
        Command::Isolator(a) => commands::isolator(ctx, a),
        Command::Rerun(_) => Err(CliError::Input("a manifest cannot describe a rerun".into())),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.workers == Some(0) {
        return Err(CliError::Input("--workers must be >= 1".into()));
    }
    let (command, config) = match &cli.command {
        Command::Rerun(r) => {
            let m = RunManifest::read(&r.manifest)?;
            (m.command, m.config)
        }
        c => (c.clone(), None),
    };
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Output(format!("{}: {e}", cli.out.display())))?;
    let ctx = Ctx { out: cli.out.clone(), config };

    let started = Instant::now();
    let rec = sweep::with_workers(cli.workers, || dispatch(&ctx, &command))?;
    let manifest = RunManifest {
        subcommand: command.name().to_string(),
        command,
        config: rec.config,
        solver_tier: rec.tier,
        grid_shapes: rec.grid_shapes,
        outputs: rec.outputs,
        workers: cli.workers,
        wall_clock_s: started.elapsed().as_secs_f64(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&cli.out.join(MANIFEST_NAME), &manifest)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

mod args;
mod commands;
mod manifest;

use std::path::Path;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use trilab::LabError;

use crate::args::{Cli, ReplayArgs, TopCommand};
use crate::manifest::{Caps, RunManifest};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CAP: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        TopCommand::Run(cmd) => Caps::from_env().and_then(|caps| commands::run(&cmd, caps)),
        TopCommand::Replay(args) => replay(&args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn replay(args: &ReplayArgs) -> Result<bool> {
    let manifest = RunManifest::load(&args.manifest)?;
    let mut cmd = manifest.command;
    let dir = match &args.out {
        Some(dir) => dir.clone(),
        None => args.manifest.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    if cmd.out_dir().is_some() || args.out.is_some() {
        cmd.set_out_dir(dir);
    }
    commands::run(&cmd, manifest.caps)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(lab) = err.downcast_ref::<LabError>() {
        return match lab {
            LabError::CapExceeded { .. } => EXIT_CAP,
            LabError::InvalidParameter(_) | LabError::Parse(_) | LabError::Refused(_) | LabError::ZeroVector => {
                EXIT_USAGE
            }
            _ => EXIT_FAIL,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() || err.downcast_ref::<serde_json::Error>().is_some() {
        return EXIT_USAGE;
    }
    EXIT_FAIL
}

//! The `skillsim` command line.
//!
//! Data goes to files named on the command line; progress lines go to
//! standard error, each prefixed with the stage name. Exit status is 0 on
//! success, 1 on runtime errors and 2 on usage errors.

mod args;
mod commands;
mod pipeline;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;
pub use pipeline::{run_pipeline, PipelineConfig};

/// Progress sink for one stage.
#[derive(Clone, Copy)]
pub struct Progress<'a> {
    stage: &'a str,
    quiet: bool,
}

impl<'a> Progress<'a> {
    pub fn new(stage: &'a str, quiet: bool) -> Self {
        Progress { stage, quiet }
    }

    pub fn stage(&self) -> &str {
        self.stage
    }

    pub fn line(&self, message: impl std::fmt::Display) {
        if !self.quiet {
            eprintln!("{}: {message}", self.stage);
        }
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("skillsim: error: {e}");
            1
        }
    }
}

//! Fixtures and a runner for the built binary.

#![allow(dead_code)]

use std::process::{Command, Output};

mod fixtures;

pub use fixtures::*;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lexisseg"));
    cmd.env_remove("LEXISSEG_THREADS");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn lexisseg")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

//! Library side of the `abkit` batch front end: config parsing, experiment
//! runners, and file emission. The binary in `main.rs` is a thin dispatcher
//! over these pieces.

pub mod config;
pub mod emit;
pub mod runner;

/// Exit codes of the `abkit` binary.
pub mod exit_codes {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
    pub const IO: i32 = 4;
}

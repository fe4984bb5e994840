//! File formats, configuration, subcommands and the acceptance driver
//! behind the `subinf` binary.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod fieldio;
pub mod manifest;

mod failure;

pub use failure::Failure;

/// Worker count from `SUBINF_THREADS`, defaulting to the available cores.
pub fn threads() -> Result<usize, Failure> {
    match std::env::var("SUBINF_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Failure::Config(format!("SUBINF_THREADS: expected a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

//! Implementation of the `fplap` binary: config parsing, artifact emission,
//! and one module per subcommand. Kept as a library so the integration
//! tests can drive the same CSV reader the tool uses.

use std::path::PathBuf;

use fplap::{Error, Result};

pub mod config;
pub mod evolve;
pub mod expand;
pub mod load;
pub mod selftest;
pub mod study;
pub mod table;
pub mod weights;

/// Global command context: parsed config plus the shared flags.
pub struct Ctx {
    pub config: Option<config::ConfigFile>,
    pub out_dir: PathBuf,
    pub format: table::Format,
    pub seed: u64,
    pub allow_unstable: bool,
}

impl Ctx {
    pub fn config(&self) -> Result<&config::ConfigFile> {
        self.config
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs --config PATH".into()))
    }
}

/// Process exit code for an error: 2 for configuration problems, 3 for
/// numerical failures (quadrature breakdown, CFL violations, blowup).
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Quadrature { .. } | Error::Numerical { .. } => 3,
        // the one Config message produced for a CFL-bound violation
        Error::Config(msg) if msg.contains("CFL") => 3,
        _ => 2,
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fplap::{Error, Result};
use fplap_cli::{config::ConfigFile, exit_code, table, Ctx};

/// Mean-value expansions, monotone lattice weights, and the explicit
/// parabolic solver for the fractional p-Laplacian.
#[derive(Parser)]
#[command(name = "fplap", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Key-value configuration file ([section] headers, key = value lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Seed for the randomized self-test suites.
    #[arg(long, global = true, value_name = "N", default_value_t = 2024)]
    seed: u64,

    /// Permit time steps beyond the CFL bound (recorded in diagnostics).
    #[arg(long, global = true)]
    allow_unstable: bool,

    /// Worker threads; the default uses every core.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Format of tabular artifacts; the JSON summary is always written.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate an expansion family over a sweep, optionally against the
    /// principal-value oracle.
    Expand,
    /// Build weight tables over an r-sweep and report summability ratios.
    Weights,
    /// Run the explicit scheme; write snapshots, metadata, and diagnostics.
    Evolve,
    /// Convergence studies: consistency, refinement, rate tables, synthetic.
    Study,
    /// Deterministic randomized self-checks (exit code 4 on failure).
    Selftest,
}

fn dispatch(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads {n}: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Error::Config(format!("cannot create --out {}: {e}", cli.out.display())))?;
    let config = match &cli.config {
        Some(path) => Some(ConfigFile::load(path)?),
        None => None,
    };
    let ctx = Ctx {
        config,
        out_dir: cli.out,
        format: match cli.format {
            FormatArg::Csv => table::Format::Csv,
            FormatArg::Json => table::Format::Json,
        },
        seed: cli.seed,
        allow_unstable: cli.allow_unstable,
    };
    match cli.command {
        Cmd::Expand => fplap_cli::expand::run(&ctx).map(|()| 0),
        Cmd::Weights => fplap_cli::weights::run(&ctx).map(|()| 0),
        Cmd::Evolve => fplap_cli::evolve::run(&ctx).map(|()| 0),
        Cmd::Study => fplap_cli::study::run(&ctx).map(|()| 0),
        Cmd::Selftest => fplap_cli::selftest::run(&ctx).map(|ok| if ok { 0 } else { 4 }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

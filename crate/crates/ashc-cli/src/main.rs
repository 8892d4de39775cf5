//! Command-line surface: verification suites, bound scans, and the two
//! interconnection experiments, with CSV/report artifacts for plotting
//! and CI. Exit codes: 0 all checks pass, 1 check or run failure,
//! 2 usage/config error.

mod commands;
mod config;
mod csvout;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{config_digest_of, Ctx};
use config::Config;

#[derive(Parser)]
#[command(
    name = "ashc",
    version,
    about = "Certify and simulate abstraction-based hierarchical control designs"
)]
struct Cli {
    /// TOML configuration; omitted means the built-in canonical instance.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for CSV, report, and manifest files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every certification check and write a verification report.
    Verify,
    /// Scan the cross-term norm over the abstraction domain (q = 0).
    ScanBound {
        /// Number of grid points (default: verify.scan_points).
        #[arg(long)]
        grid: Option<usize>,
        /// Abstract input matrix variant.
        #[arg(long, value_parser = ["unit", "redesigned"])]
        delta: Option<String>,
    },
    /// Print the closed-form output-error bounds.
    Bound {
        /// Supremum norm of the abstract input.
        #[arg(long)]
        vinf: Option<f64>,
    },
    /// Hierarchical interconnection experiment (abstraction drives plant).
    SimHier {
        /// Write every integration step instead of decimating.
        #[arg(long)]
        full_resolution: bool,
    },
    /// m-relation interconnection experiment (plant drives abstraction).
    SimMrel {
        /// Write every integration step instead of decimating.
        #[arg(long)]
        full_resolution: bool,
    },
}

fn run(cli: Cli) -> i32 {
    let (config, raw) = match &cli.config {
        Some(path) => match Config::load(path) {
            Ok(pair) => pair,
            Err(e) => {
                eprintln!("{e}");
                return 2;
            }
        },
        None => {
            let cfg = Config::default();
            let snap = cfg.snapshot();
            (cfg, snap)
        }
    };
    if let Err(e) = config.validate() {
        eprintln!("{e}");
        return 2;
    }
    let ctx = Ctx {
        config_digest: config_digest_of(&raw),
        config,
        out_dir: cli.out,
    };
    let result = match cli.command {
        Command::Verify => commands::cmd_verify(&ctx),
        Command::ScanBound { grid, delta } => commands::cmd_scan_bound(&ctx, grid, delta),
        Command::Bound { vinf } => commands::cmd_bound(&ctx, vinf),
        Command::SimHier { full_resolution } => commands::cmd_sim_hier(&ctx, full_resolution),
        Command::SimMrel { full_resolution } => commands::cmd_sim_mrel(&ctx, full_resolution),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.message());
            e.exit_code()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(run(cli) as u8)
}

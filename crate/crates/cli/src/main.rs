use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use panelvar::Pooling;
use panelvar_cli::stages;
use panelvar_cli::{Overrides, Result, Run};
use panelvar_ingest::catalog::Variant;
use panelvar_ingest::HttpTransport;

#[derive(Parser)]
#[command(name = "panelvar", version, about = "Panel SVAR pipeline: fetch, estimate, identify, report")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH", default_value = "panelvar.toml")]
    config: PathBuf,

    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// baseline | unemployment
    #[arg(long, global = true)]
    variant: Option<Variant>,

    /// partial | full
    #[arg(long, global = true)]
    pooling: Option<Pooling>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Retrieve raw series and write the assembled panel.
    Fetch,
    /// Sample the posterior and write the checkpoint and diagnostics.
    Estimate,
    /// Identify structural shocks for every posterior draw.
    Identify,
    /// Write IRF, FEVD, historical decomposition and counterfactual tables.
    Report,
    /// Run every stage in order.
    All,
}

fn execute(cli: &Cli) -> Result<()> {
    let overrides = Overrides {
        seed: cli.seed,
        workers: cli.workers,
        variant: cli.variant,
        pooling: cli.pooling,
    };
    let run = Run::load(&cli.config, &overrides)?;
    let transport = HttpTransport;
    let all = matches!(cli.command, Command::All);
    if all || matches!(cli.command, Command::Fetch) {
        let s = stages::fetch(&run, &transport)?;
        eprintln!(
            "fetch: {} country panels ({} rows), {} cached series",
            s.files.len(),
            s.rows.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("/"),
            s.cache_hits
        );
    }
    if all || matches!(cli.command, Command::Estimate) {
        let s = stages::estimate(&run)?;
        eprintln!(
            "estimate: {} retained draws, explosive share {:.4}",
            s.retained, s.diagnostics.explosive_share
        );
    }
    if all || matches!(cli.command, Command::Identify) {
        let s = stages::identify(&run)?;
        eprintln!(
            "identify: {} structural draws, acceptance {:.4}",
            s.retained,
            s.diagnostics.acceptance()
        );
    }
    if all || matches!(cli.command, Command::Report) {
        let s = stages::report(&run)?;
        for c in &s.skipped_countries {
            eprintln!("report: warning: no identified draws for {c}; left out of the tables");
        }
        eprintln!(
            "report: {} files, max decomposition error {:.3e}",
            s.files.len(),
            s.max_additivity_error
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

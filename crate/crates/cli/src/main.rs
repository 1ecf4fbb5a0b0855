use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use hls_core::runner::{configure_threads, run, JobConfig, Workflow};

/// Sharp HLS constants, transplantation bounds and concentration diagnostics
/// on compact model manifolds.
#[derive(Debug, Parser)]
#[command(name = "hls", version)]
struct Cli {
    /// solve | baseline | transplant | cc-diagnose | split-check
    workflow: String,

    /// key = value job config
    #[arg(long)]
    config: PathBuf,

    /// Output directory (overrides `out` in the config)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Omit wall-clock data so repeated runs are byte-identical
    #[arg(long)]
    deterministic: bool,
}

fn main() -> ExitCode {
    match try_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn try_main() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    let workflow: Workflow = cli.workflow.parse()?;
    let mut config = JobConfig::from_file(&cli.config).with_context(|| format!("reading {}", cli.config.display()))?;
    if config.workflow != workflow {
        bail!("config selects workflow '{}', command line asks for '{workflow}'", config.workflow);
    }
    if cli.deterministic && !config.deterministic {
        config = config.with_override("deterministic", "true")?;
    }
    configure_threads()?;
    let record = run(&config, cli.out.as_deref())?;
    for (k, v) in &record.outputs {
        println!("{k}={v}");
    }
    if !record.success {
        eprintln!("workflow '{workflow}' reported failure");
    }
    Ok(record.success)
}

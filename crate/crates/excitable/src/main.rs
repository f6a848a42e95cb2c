use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use excitable::commands::{self, UsageError};
use excitable::config::{self, Command, ConfigError, RunConfig};

#[derive(Parser)]
#[command(
    name = "excitable",
    version,
    about = "Fast-slow analysis and simulation of excitable media models"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one ODE orbit; write nullclines, critical manifold and equilibria
    Ode(Common),
    /// Current thresholds and fold curves (Karma only)
    Analyze(Common),
    /// Heteroclinic locus, Hamiltonian level sets and singular pulse (Karma only)
    Wave(Common),
    /// Standard bump simulation with field snapshots
    Pde(Common),
    /// Wave measurements over one swept parameter
    Sweep(Common),
    /// Polar blow-up example field and its circle equilibria
    Blowup(Common),
}

#[derive(clap::Args)]
struct Common {
    /// karma or fhn
    #[arg(long)]
    model: Option<String>,
    /// Flat key = value file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override one key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn resolve(command: Command, c: &Common) -> anyhow::Result<RunConfig> {
    let mut pairs = Vec::new();
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        pairs.extend(config::parse_pairs(&text)?);
    }
    if let Some(m) = &c.model {
        pairs.push(("model".to_string(), m.clone()));
    }
    for s in &c.set {
        pairs.push(config::parse_override(s)?);
    }
    Ok(RunConfig::resolve(command, None, &pairs)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Cmd::Ode(c) => (Command::Ode, c),
        Cmd::Analyze(c) => (Command::Analyze, c),
        Cmd::Wave(c) => (Command::Wave, c),
        Cmd::Pde(c) => (Command::Pde, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Blowup(c) => (Command::Blowup, c),
    };
    let result = resolve(command, common).and_then(|cfg| commands::run(&cfg, &common.out));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() || e.is::<ConfigError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

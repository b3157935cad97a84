use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynwave_cli::{run, CliError, Command, ExperimentConfig, BUILD_ID};

#[derive(Parser)]
#[command(name = "dynwave", version = BUILD_ID, about = "Wave experiments with dynamic boundary conditions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Certify the weight constants of the configured domain.
    CertifyGeometry,
    /// Tabulate the surface Hessian of the off-center weight on the sphere.
    Counterexample,
    /// Term-by-term Carleman ledger and (s, lambda) scan.
    AuditCarleman,
    /// Reconstruct a separable source and run the Lipschitz experiment.
    InvertSource,
    /// Observability constant over a range of windows, plus a control run.
    ObservabilitySweep,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::CertifyGeometry => Command::CertifyGeometry,
            Cmd::Counterexample => Command::Counterexample,
            Cmd::AuditCarleman => Command::AuditCarleman,
            Cmd::InvertSource => Command::InvertSource,
            Cmd::ObservabilitySweep => Command::ObservabilitySweep,
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Validation(vec![dynwave_cli::Issue::new("--config", "a config file is required")]))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(vec![dynwave_cli::Issue::new("--threads", e.to_string())]))?;
    }
    let out = cfg.output.clone();
    run(cli.command.into(), &cfg, &out)?;
    log::info!("outputs written to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            println!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

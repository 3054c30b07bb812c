use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qudit_readout::io::{parse_config_str, run_command, Command, Overrides};
use qudit_readout::{Error, Result};

#[derive(Parser)]
#[command(name = "qudit-readout", version, about = "Dispersive heterodyne readout of a superconducting qudit")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Steady-state amplitudes, measurement and dephasing rates, IQ separations
    Rates(Common),
    /// Qudit-resonator master equation in a truncated Fock space
    SolveMe(Common),
    /// Effective qudit master equation with the resonator eliminated
    SolveEffectiveMe(Common),
    /// Ensemble of stochastic trajectories with IQ clustering and jump detection
    Simulate(Common),
    /// Ensemble simulations over a parameter grid
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's output.directory, else ./out)
    #[arg(long, env = "QUDIT_READOUT_OUT")]
    out: Option<PathBuf>,
    /// Master seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trajectories, overriding the config
    #[arg(long)]
    trajectories: Option<usize>,
    /// Worker threads (default: all cores)
    #[arg(long, env = "QUDIT_READOUT_THREADS")]
    threads: Option<usize>,
    /// Keep every n-th trajectory sample, overriding the config
    #[arg(long)]
    thin: Option<usize>,
}

fn run(command: Command, args: Common) -> Result<()> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::config("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidState(format!("thread pool: {e}")))?;
    }
    let bytes = std::fs::read(&args.config)
        .map_err(|e| Error::config(args.config.display().to_string(), format!("cannot read config: {e}")))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::config(args.config.display().to_string(), "config is not UTF-8"))?;
    let cfg = parse_config_str(&text)?;
    let out = args
        .out
        .or_else(|| cfg.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let ov = Overrides {
        seed: args.seed,
        trajectories: args.trajectories,
        thin: args.thin,
    };
    log::info!("{} -> {}", command.name(), out.display());
    run_command(command, &cfg, &bytes, &ov, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Rates(a) => (Command::Rates, a),
        Sub::SolveMe(a) => (Command::SolveMe, a),
        Sub::SolveEffectiveMe(a) => (Command::SolveEffectiveMe, a),
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Sweep(a) => (Command::Sweep, a),
    };
    match run(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

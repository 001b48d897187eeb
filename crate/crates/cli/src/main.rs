use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use compound_cr::harness::{
    parse_config, run_bounds, run_enumerate_typical, run_simulate, run_verify, sweep_rate,
    ExperimentConfig, ResultRecord,
};
use compound_cr::FinitePmf;

/// Bounds and protocol simulation for common randomness from compound sources.
#[derive(Parser)]
#[command(name = "crcap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Writes `<output>.csv` and `<output>.json`; overrides the config's `output`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Lower and upper bounds, per-state values, grid oracles at the config's rate.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Grid oracle resolution.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Monte Carlo runs of the protocol for every blocklength in the config.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<u64>,
        /// Only simulate this state.
        #[arg(long)]
        state: Option<String>,
    },
    /// Both bounds over a grid of rates.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated rates; defaults to the config's `[sweep]` block.
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
    },
    /// Checks the bound and protocol invariants; exits 1 if any fails.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Typical type classes of a pmf.
    EnumerateTypical {
        /// Comma-separated probabilities.
        #[arg(long, value_delimiter = ',', required = true)]
        pmf: Vec<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&common.config)
        .with_context(|| format!("reading {}", common.config.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("in {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.solver.seed = seed;
    }
    Ok(cfg)
}

fn set_trials(cfg: &mut ExperimentConfig, trials: Option<u64>) -> Result<()> {
    if let Some(t) = trials {
        match cfg.protocol.as_mut() {
            Some(p) => p.trials = t,
            None => bail!("--trials given but the config has no [protocol] block"),
        }
    }
    Ok(())
}

fn emit(rec: &ResultRecord, output: Option<&Path>) -> Result<ExitCode> {
    print!("{}", rec.to_csv()?);
    for note in &rec.notes {
        eprintln!("note: {note}");
    }
    if let Some(path) = output {
        let (csv, json) = rec
            .write(path)
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {} and {}", csv.display(), json.display());
    }
    Ok(match rec.passed {
        Some(false) => {
            eprintln!("{}: property check failed", rec.command);
            ExitCode::from(1)
        }
        _ => ExitCode::SUCCESS,
    })
}

fn output_of(common: &Common, cfg: &ExperimentConfig) -> Option<PathBuf> {
    common
        .output
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Bounds { common, resolution } => {
            let mut cfg = load(&common)?;
            if let Some(r) = resolution {
                cfg.solver.grid_resolution = r;
            }
            emit(&run_bounds(&cfg)?, output_of(&common, &cfg).as_deref())
        }
        Command::Simulate {
            common,
            trials,
            state,
        } => {
            let mut cfg = load(&common)?;
            set_trials(&mut cfg, trials)?;
            emit(
                &run_simulate(&cfg, state.as_deref())?,
                output_of(&common, &cfg).as_deref(),
            )
        }
        Command::Sweep { common, rates } => {
            let cfg = load(&common)?;
            let rates = match rates.or_else(|| cfg.sweep.as_ref().map(|s| s.rates.clone())) {
                Some(r) => r,
                None => bail!("no rates: pass --rates or add a [sweep] block"),
            };
            emit(
                &sweep_rate(&cfg, &rates)?,
                output_of(&common, &cfg).as_deref(),
            )
        }
        Command::Verify {
            common,
            trials,
            resolution,
        } => {
            let mut cfg = load(&common)?;
            set_trials(&mut cfg, trials)?;
            if let Some(r) = resolution {
                cfg.solver.grid_resolution = r;
            }
            emit(&run_verify(&cfg)?, output_of(&common, &cfg).as_deref())
        }
        Command::EnumerateTypical {
            pmf,
            n,
            sigma,
            output,
        } => {
            let p = FinitePmf::from_probs(pmf).context("--pmf")?;
            emit(&run_enumerate_typical(&p, n, sigma)?, output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

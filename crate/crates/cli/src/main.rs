//! `entk`: infinite-width kernels for group convolutional networks.
//!
//! Exit codes: 0 success, 1 a verification or self-test check failed,
//! 2 configuration, parse or I/O error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use entk_core::{EntkError, NonlinKind, Padding};

use commands::Ctx;
use config::{ArchSource, Dataset, RunConfig};

#[derive(Parser)]
#[command(name = "entk", version, about = "Analytic NNGP/NTK kernels for group convolutional networks")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for result files (created if missing).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "ENTK_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// NNGP and NTK Gram matrices of a set of inputs.
    Gram(GramArgs),
    /// Kernel regression accuracy or MAE per training-set size.
    Predict(PredictArgs),
    /// Finite-width Monte-Carlo kernels against the analytic limit.
    Mc(McArgs),
    /// Check the augmentation/equivariance kernel identities.
    Verify(VerifyArgs),
    /// Sample molecules as per-atom spherical signals.
    Featurize(FeaturizeArgs),
    /// Run the built-in consistency checks.
    Selftest,
}

#[derive(Args)]
struct GramArgs {
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Preset architecture name.
    #[arg(long)]
    arch: Option<String>,
    /// `entk` or `csv`.
    #[arg(long)]
    format: Option<String>,
    /// Compute at most this many new rows, then stop with the checkpoint kept.
    #[arg(long)]
    max_rows: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long, value_parser = parse_dataset)]
    dataset: Option<Dataset>,
    /// Comma-separated training-set sizes.
    #[arg(long, value_delimiter = ',')]
    train_sizes: Option<Vec<usize>>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    invariance: bool,
}

#[derive(Args)]
struct McArgs {
    /// Comma-separated widths.
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// `circular` or `zero`.
    #[arg(long, value_parser = parse_padding)]
    padding: Option<Padding>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated nonlinearities (`relu`, `erf`).
    #[arg(long, value_delimiter = ',')]
    nonlins: Option<Vec<NonlinKind>>,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long)]
    xyz: Option<PathBuf>,
    #[arg(long)]
    grid_band: Option<usize>,
}

fn parse_dataset(s: &str) -> Result<Dataset, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown dataset '{s}'"))
}

fn parse_padding(s: &str) -> Result<Padding, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown padding '{s}'"))
}

fn apply_flags(cli: &Cli, cfg: &mut RunConfig) {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &cli.output_dir {
        cfg.output_dir = Some(o.clone());
    }
    match &cli.cmd {
        Cmd::Gram(a) => {
            if let Some(p) = &a.inputs {
                cfg.gram.inputs = Some(p.clone());
            }
            if let Some(n) = &a.arch {
                cfg.gram.arch = ArchSource::Preset(n.clone());
            }
            if let Some(f) = &a.format {
                cfg.gram.format = f.clone();
            }
        }
        Cmd::Predict(a) => {
            if let Some(d) = a.dataset {
                cfg.predict.dataset = d;
            }
            if let Some(t) = &a.train_sizes {
                cfg.predict.train_sizes = t.clone();
            }
            if a.ridge.is_some() {
                cfg.predict.ridge = a.ridge;
            }
            cfg.predict.invariance |= a.invariance;
        }
        Cmd::Mc(a) => {
            if let Some(w) = &a.widths {
                cfg.mc.widths = w.clone();
            }
            if let Some(s) = a.samples {
                cfg.mc.samples = s;
            }
        }
        Cmd::Verify(a) => {
            if let Some(p) = a.padding {
                cfg.verify.padding = p;
            }
            if let Some(t) = a.trials {
                cfg.verify.trials = t;
            }
            if let Some(n) = &a.nonlins {
                cfg.verify.nonlins = n.clone();
            }
        }
        Cmd::Featurize(a) => {
            if let Some(p) = &a.xyz {
                cfg.featurize.xyz = Some(p.clone());
            }
            if let Some(b) = a.grid_band {
                cfg.featurize.grid_band = b;
            }
        }
        Cmd::Selftest => {}
    }
}

fn exit_code(e: &EntkError) -> u8 {
    match e {
        EntkError::Singular(_) | EntkError::NonFinite(..) | EntkError::InvalidKernel(_) | EntkError::Reality(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<bool, EntkError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    apply_flags(&cli, &mut cfg);
    cfg.validate()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| EntkError::Argument(e.to_string()))?;
    }
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("entk-out"));
    std::fs::create_dir_all(&out).map_err(|e| EntkError::Io(format!("{}: {e}", out.display())))?;
    let ctx = Ctx { hash: cfg.hash(), cfg, out };
    match &cli.cmd {
        Cmd::Gram(a) => commands::cmd_gram(&ctx, a.max_rows),
        Cmd::Predict(_) => commands::cmd_predict(&ctx),
        Cmd::Mc(_) => commands::cmd_mc(&ctx),
        Cmd::Verify(_) => commands::cmd_verify(&ctx),
        Cmd::Featurize(_) => commands::cmd_featurize(&ctx),
        Cmd::Selftest => commands::cmd_selftest(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

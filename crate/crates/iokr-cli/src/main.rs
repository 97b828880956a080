//! Command-line entry point: argument parsing, configuration resolution,
//! thread-count policy, and exit-code mapping.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for configuration or data
//! errors, 3 for numeric failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use iokr_cli::commands;
use iokr_cli::config::{
    apply_kernel_override, load_config, write_resolved, BenchConfig, DecodeConfig,
    DiagnoseConfig, EvalConfig, KernelFamily, TrainConfig,
};
use iokr_cli::errors::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "iokr",
    version,
    about = "Reduced-rank kernel ridge regression for kernel-embedded outputs",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML or JSON run configuration
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, created if missing
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Overrides the seed in the configuration file
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// BLAS threads; keep at 1 for bitwise-reproducible outputs
    #[arg(long, value_name = "N", default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Measure spectral-regularity profiles of a synthetic problem
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
        /// Shift-grid points per profile
        #[arg(long, value_name = "N")]
        t_points: Option<usize>,
        /// Slope-fit window: lower index fraction
        #[arg(long, value_name = "F")]
        window_lo: Option<f64>,
        /// Slope-fit window: upper index fraction
        #[arg(long, value_name = "F")]
        window_hi: Option<f64>,
        /// Floor the shift grids at this quantile of each spectrum
        #[arg(long, value_name = "Q")]
        floor_quantile: Option<f64>,
    },
    /// Run a synthetic rank-sweep experiment
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit a ridge model and supervised projection on a dataset
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Ridge parameter override; sets both stages
        #[arg(long, value_name = "F")]
        lambda: Option<f64>,
        /// Projection-rank override
        #[arg(long, value_name = "P")]
        p: Option<usize>,
        /// Input-kernel family override
        #[arg(long, value_enum, value_name = "FAMILY")]
        kernel: Option<KernelFamily>,
        /// Input-kernel width override
        #[arg(long, value_name = "F")]
        sigma2: Option<f64>,
    },
    /// Rank candidates for test inputs with a trained bundle
    Decode {
        #[command(flatten)]
        common: CommonArgs,
        /// Decode at a smaller rank by truncating the stored projection
        #[arg(long, value_name = "P")]
        p: Option<usize>,
        /// Emit only the top K candidates per test point
        #[arg(long, value_name = "K")]
        top_k: Option<usize>,
    },
    /// Time reduced against full-rank decoding over size ladders
    BenchDecode {
        #[command(flatten)]
        common: CommonArgs,
        /// Base projection-rank override
        #[arg(long, value_name = "P")]
        p: Option<usize>,
    },
    /// Cross-validated comparison of both estimators on a dataset
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Input-kernel family override
        #[arg(long, value_enum, value_name = "FAMILY")]
        kernel: Option<KernelFamily>,
        /// Input-kernel width override
        #[arg(long, value_name = "F")]
        sigma2: Option<f64>,
    },
}

/// Pins the BLAS thread count before any numeric work runs.
fn setup_threads(threads: usize) {
    let t = threads.max(1).to_string();
    std::env::set_var("OPENBLAS_NUM_THREADS", &t);
    std::env::set_var("OMP_NUM_THREADS", &t);
}

/// Creates the output directory and returns it.
fn prepare_out(out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out).map_err(|e| CliError::in_file(out, e))?;
    Ok(out.to_path_buf())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Diagnose {
            common,
            t_points,
            window_lo,
            window_hi,
            floor_quantile,
        } => {
            setup_threads(common.threads);
            let mut cfg: DiagnoseConfig = load_config(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.problem.seed = seed;
            }
            if let Some(points) = t_points {
                cfg.t_points = points;
            }
            if window_lo.is_some() || window_hi.is_some() {
                let (lo, hi) = cfg.window.unwrap_or((0.2, 0.8));
                cfg.window = Some((window_lo.unwrap_or(lo), window_hi.unwrap_or(hi)));
            }
            if floor_quantile.is_some() {
                cfg.floor_quantile = floor_quantile;
            }
            let out = prepare_out(&common.out)?;
            write_resolved(&out, "diagnose", cfg.problem.seed, common.threads, &cfg)?;
            commands::diagnose::run(&cfg, &out)
        }
        Command::Synth { common } => {
            setup_threads(common.threads);
            let mut cfg: iokr::SyntheticExperimentConfig = load_config(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.problem.seed = seed;
            }
            let out = prepare_out(&common.out)?;
            write_resolved(&out, "synth", cfg.problem.seed, common.threads, &cfg)?;
            commands::synth::run(&cfg, &out)
        }
        Command::Train {
            common,
            lambda,
            p,
            kernel,
            sigma2,
        } => {
            setup_threads(common.threads);
            let mut cfg: TrainConfig = load_config(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            if let Some(lambda) = lambda {
                cfg.lambda1 = lambda;
                cfg.lambda2 = Some(lambda);
            }
            if let Some(p) = p {
                cfg.p = p;
            }
            apply_kernel_override(&mut cfg.input_kernel, kernel, sigma2)?;
            let out = prepare_out(&common.out)?;
            write_resolved(&out, "train", cfg.seed, common.threads, &cfg)?;
            commands::train::run(&cfg, &out)
        }
        Command::Decode { common, p, top_k } => {
            setup_threads(common.threads);
            let mut cfg: DecodeConfig = load_config(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            if let Some(p) = p {
                cfg.p = Some(p);
            }
            if let Some(k) = top_k {
                cfg.top_k = Some(k);
            }
            let out = prepare_out(&common.out)?;
            write_resolved(&out, "decode", cfg.seed, common.threads, &cfg)?;
            commands::decode::run(&cfg, &out)
        }
        Command::BenchDecode { common, p } => {
            setup_threads(common.threads);
            let mut cfg: BenchConfig = load_config(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            if let Some(p) = p {
                cfg.p = p;
            }
            let out = prepare_out(&common.out)?;
            write_resolved(&out, "bench-decode", cfg.seed, common.threads, &cfg)?;
            commands::bench::run(&cfg, &out)
        }
        Command::Eval {
            common,
            kernel,
            sigma2,
        } => {
            setup_threads(common.threads);
            let mut cfg: EvalConfig = load_config(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.experiment.cv.seed = seed;
            }
            apply_kernel_override(&mut cfg.experiment.input_kernel, kernel, sigma2)?;
            let out = prepare_out(&common.out)?;
            write_resolved(&out, "eval", cfg.experiment.cv.seed, common.threads, &cfg)?;
            commands::eval::run(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap routes help to stdout and diagnostics to stderr.
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

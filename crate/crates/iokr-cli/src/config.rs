//! Run configurations: file parsing, flag overrides, and persistence of the
//! resolved configuration next to each command's outputs.
//!
//! Every config carries an explicit seed (there is no wall-clock default),
//! and every command writes back the fully resolved config as
//! `resolved_config.json`, which can be fed to `--config` to reproduce the
//! run, plus a small `run_meta.json` recording the command, effective seed,
//! and thread count.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use iokr::{DecodeVariant, KernelSpec, SyntheticProblemSpec};

use crate::errors::{CliError, Result};
use crate::io;

// ---------------------------------------------------------------------------
// Dataset sources
// ---------------------------------------------------------------------------

/// Where a structured dataset comes from.
///
/// `dense`: two numeric CSV files. `multilabel`: dense inputs plus a label
/// file in sparse `label:1` or dense 0/1 form. `usps_halves`: one image CSV
/// whose rows are split into a top half (inputs) and bottom half (outputs).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Dense { inputs: PathBuf, outputs: PathBuf },
    Multilabel { inputs: PathBuf, labels: PathBuf },
    UspsHalves { images: PathBuf },
}

// ---------------------------------------------------------------------------
// Per-command configs
// ---------------------------------------------------------------------------

fn default_t_points() -> usize {
    30
}

/// `diagnose`: regularity profiles and fitted slopes of a synthetic problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub problem: SyntheticProblemSpec,
    /// Log-spaced shift points per profile.
    #[serde(default = "default_t_points")]
    pub t_points: usize,
    /// Index-fraction window for slope fitting; `None` keeps the default
    /// middle window.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    /// Floor each profile's shift grid at this quantile of the operator's
    /// positive spectrum instead of the default eight decades below the
    /// largest eigenvalue. Useful at small dimension, where the profile
    /// saturates below the resolved part of the spectrum.
    #[serde(default)]
    pub floor_quantile: Option<f64>,
}

fn default_variant() -> DecodeVariant {
    DecodeVariant::Reduced
}

/// `train`: fit a ridge model plus supervised projection on a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Recorded for provenance; the fit itself is deterministic.
    pub seed: u64,
    pub dataset: DatasetSource,
    pub input_kernel: KernelSpec,
    pub output_kernel: KernelSpec,
    /// First-stage ridge parameter (the subspace smoother).
    pub lambda1: f64,
    /// Second-stage ridge parameter; defaults to `lambda1`.
    #[serde(default)]
    pub lambda2: Option<f64>,
    /// Requested projection rank.
    pub p: usize,
}

/// `decode`: rank candidates for test inputs with a trained bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeConfig {
    /// Recorded for provenance; decoding is deterministic.
    pub seed: u64,
    /// Model bundle written by `train`.
    pub bundle: PathBuf,
    /// Dense CSV of test inputs.
    pub test_inputs: PathBuf,
    /// Dense CSV of candidate outputs; defaults to the training outputs
    /// stored in the bundle.
    #[serde(default)]
    pub candidates: Option<PathBuf>,
    #[serde(default = "default_variant")]
    pub variant: DecodeVariant,
    /// Ranks to emit per test point; defaults to all candidates.
    #[serde(default)]
    pub top_k: Option<usize>,
    /// Decode at a smaller rank than trained by truncating the stored
    /// projection; reduced variant only.
    #[serde(default)]
    pub p: Option<usize>,
}

fn default_reps() -> usize {
    20
}

fn default_ladder_points() -> usize {
    4
}

/// `bench-decode`: time reduced against full-rank decoding.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub seed: u64,
    /// Training-set size (coefficient-vector length).
    pub n: usize,
    /// Base candidate-set size.
    pub n_c: usize,
    /// Base projection rank.
    pub p: usize,
    /// Repetitions per configuration; the median is reported.
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Points in each doubling ladder (candidates and rank).
    #[serde(default = "default_ladder_points")]
    pub ladder_points: usize,
}

/// `eval`: cross-validated comparison of both estimators on a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub dataset: DatasetSource,
    pub experiment: iokr::StructuredExperimentConfig,
}

// ---------------------------------------------------------------------------
// Loading and persisting
// ---------------------------------------------------------------------------

/// Parses a `.toml` or `.json` config file into the command's config type.
pub fn load_config<C: serde::de::DeserializeOwned>(path: &Path) -> Result<C> {
    let text = fs::read_to_string(path).map_err(|e| CliError::in_file(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| CliError::in_file(path, e)),
        Some("json") => serde_json::from_str(&text).map_err(|e| CliError::in_file(path, e)),
        _ => Err(CliError::Data(format!(
            "{}: unsupported config extension (expected .toml or .json)",
            path.display()
        ))),
    }
}

/// Writes `resolved_config.json` (reusable via `--config`) and
/// `run_meta.json` into the output directory.
pub fn write_resolved<C: Serialize>(
    out_dir: &Path,
    command: &str,
    seed: u64,
    threads: usize,
    cfg: &C,
) -> Result<()> {
    io::write_json(&out_dir.join("resolved_config.json"), cfg)?;
    #[derive(Serialize)]
    struct RunMeta<'a> {
        command: &'a str,
        seed: u64,
        threads: usize,
    }
    io::write_json(
        &out_dir.join("run_meta.json"),
        &RunMeta {
            command,
            seed,
            threads,
        },
    )
}

// ---------------------------------------------------------------------------
// Kernel overrides
// ---------------------------------------------------------------------------

/// Kernel families selectable with `--kernel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelFamily {
    Gaussian,
    Linear,
    GaussianTanimoto,
}

/// Applies `--kernel`/`--sigma2` to a configured kernel.
///
/// Switching to a width-parameterized family inherits the configured width
/// when `--sigma2` is absent; `--sigma2` alone rewrites the width in place
/// and is rejected for the linear kernel.
pub fn apply_kernel_override(
    kernel: &mut KernelSpec,
    family: Option<KernelFamily>,
    sigma2: Option<f64>,
) -> Result<()> {
    let existing_width = match *kernel {
        KernelSpec::Gaussian { sigma2 } | KernelSpec::GaussianTanimoto { sigma2 } => Some(sigma2),
        KernelSpec::Linear => None,
    };
    if let Some(family) = family {
        *kernel = match family {
            KernelFamily::Linear => KernelSpec::Linear,
            KernelFamily::Gaussian | KernelFamily::GaussianTanimoto => {
                let width = sigma2.or(existing_width).ok_or_else(|| {
                    CliError::usage(
                        "--kernel needs --sigma2 (the configured kernel has no width to inherit)",
                    )
                })?;
                match family {
                    KernelFamily::Gaussian => KernelSpec::Gaussian { sigma2: width },
                    _ => KernelSpec::GaussianTanimoto { sigma2: width },
                }
            }
        };
    } else if let Some(width) = sigma2 {
        match kernel {
            KernelSpec::Linear => {
                return Err(CliError::usage(
                    "--sigma2 applies to width-parameterized kernels; the configured kernel is linear",
                ))
            }
            KernelSpec::Gaussian { sigma2 } | KernelSpec::GaussianTanimoto { sigma2 } => {
                *sigma2 = width;
            }
        }
    }
    kernel.validate()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use iokr::synthgen::{HMode, SpectralProfile, XLaw};

    fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn toml_train_config_parses_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tmp(
            &dir,
            "train.toml",
            r#"
seed = 7
lambda1 = 0.01
p = 4

[dataset]
format = "dense"
inputs = "x.csv"
outputs = "y.csv"

[input_kernel]
family = "gaussian"
sigma2 = 2.0

[output_kernel]
family = "linear"
"#,
        );
        let cfg: TrainConfig = load_config(&path).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.lambda2, None);
        assert_eq!(cfg.p, 4);
        assert_eq!(cfg.input_kernel, KernelSpec::Gaussian { sigma2: 2.0 });
        assert!(matches!(cfg.dataset, DatasetSource::Dense { .. }));
    }

    #[test]
    fn json_diagnose_config_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tmp(
            &dir,
            "diag.json",
            r#"{
  "problem": {
    "d": 8,
    "n_train": 4, "n_val": 4, "n_test": 4,
    "c_profile": {"kind": {"kind": "polynomial", "rate": 2.0, "scale": 1.0}, "dim": 8},
    "h_mode": {"mode": "powered", "gamma": 0.5},
    "e_profile": {"kind": {"kind": "polynomial", "rate": 1.0, "scale": 0.1}, "dim": 8},
    "x_law": "standard_normal",
    "seed": 3
  },
  "window": [0.1, 0.9]
}"#,
        );
        let cfg: DiagnoseConfig = load_config(&path).unwrap();
        assert_eq!(cfg.t_points, 30);
        assert_eq!(cfg.window, Some((0.1, 0.9)));
        assert_eq!(cfg.problem.h_mode, HMode::Powered { gamma: 0.5 });
        assert_eq!(cfg.problem.x_law, XLaw::StandardNormal);
        assert_eq!(
            cfg.problem.c_profile,
            SpectralProfile::polynomial(8, 2.0, 1.0)
        );
    }

    #[test]
    fn unknown_fields_and_extensions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tmp(&dir, "bench.toml", "seed = 1\nn = 4\nn_c = 4\np = 2\ntypo = 1\n");
        let err = load_config::<BenchConfig>(&path).unwrap_err();
        assert!(err.to_string().contains("typo"), "{err}");
        assert_eq!(err.exit_code(), 2);

        let path = write_tmp(&dir, "bench.yaml", "seed: 1\n");
        let err = load_config::<BenchConfig>(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported config extension"), "{err}");
    }

    #[test]
    fn kernel_override_switches_family_and_inherits_width() {
        let mut k = KernelSpec::Gaussian { sigma2: 4.0 };
        apply_kernel_override(&mut k, Some(KernelFamily::GaussianTanimoto), None).unwrap();
        assert_eq!(k, KernelSpec::GaussianTanimoto { sigma2: 4.0 });

        apply_kernel_override(&mut k, None, Some(0.5)).unwrap();
        assert_eq!(k, KernelSpec::GaussianTanimoto { sigma2: 0.5 });

        apply_kernel_override(&mut k, Some(KernelFamily::Linear), None).unwrap();
        assert_eq!(k, KernelSpec::Linear);

        let err = apply_kernel_override(&mut k, None, Some(1.0)).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = apply_kernel_override(&mut k, Some(KernelFamily::Gaussian), None).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        apply_kernel_override(&mut k, Some(KernelFamily::Gaussian), Some(9.0)).unwrap();
        assert_eq!(k, KernelSpec::Gaussian { sigma2: 9.0 });

        // Widths are validated after the override.
        let err = apply_kernel_override(&mut k, None, Some(-1.0)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn resolved_config_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = BenchConfig {
            seed: 11,
            n: 100,
            n_c: 200,
            p: 8,
            reps: 20,
            ladder_points: 4,
        };
        write_resolved(dir.path(), "bench-decode", 11, 1, &cfg).unwrap();
        let back: BenchConfig = load_config(&dir.path().join("resolved_config.json")).unwrap();
        assert_eq!(back.seed, 11);
        assert_eq!(back.n_c, 200);
        let meta = fs::read_to_string(dir.path().join("run_meta.json")).unwrap();
        assert!(meta.contains("\"command\": \"bench-decode\""), "{meta}");
    }
}

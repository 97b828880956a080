//! Reduced-rank kernel ridge regression for kernel-embedded outputs.
//!
//! This crate implements an estimator for structured prediction problems in
//! which outputs live in a reproducing-kernel Hilbert space: a vector-valued
//! kernel ridge regression is post-composed with a projection onto a
//! supervised low-dimensional output subspace, and predictions are decoded
//! against a candidate set using kernel evaluations only.
//!
//! The pieces are:
//!
//! - [`kernels`]: scalar kernels and Gram-matrix construction;
//! - [`spectral`]: symmetric eigendecompositions, spectral matrix functions,
//!   and log-log regularity diagnostics;
//! - [`regression`]: the kernel ridge stage, its coefficient maps, and
//!   closed-form regularization heuristics;
//! - [`subspace`]: supervised, unsupervised, and oracle output-subspace
//!   estimation from Gram matrices;
//! - [`structpred`]: candidate projection and nearest-neighbour decoding,
//!   in both reduced-rank and full-rank forms;
//! - [`synthgen`]: synthetic problem generators with controllable spectral
//!   regularity, plus the exponent calculus relating the knobs to rates;
//! - [`evalbench`]: metrics, grids, cross-validation, and the experiment
//!   drivers used by the command-line tool.
//!
//! All numerical code is generic over the floating-point type through the
//! [`scalar::Scalar`] trait; `f64` is the default precision and the type
//! aliases below fix it for downstream code that does not need generics.

pub mod error;
pub mod evalbench;
pub mod kernels;
pub mod linalg;
pub mod regression;
pub mod scalar;
pub mod spectral;
pub mod structpred;
pub mod subspace;
pub mod synthgen;

pub use error::{Error, Result};
pub use evalbench::{
    run_structured_experiment, run_synthetic_experiment, CvPlan, ExperimentReport, GridSpec,
    Objective, ReportRow, StructuredDataset, StructuredExperimentConfig, StructuredOutcome,
    SyntheticExperimentConfig, SyntheticOutcome,
};
pub use kernels::{eval_kernel, gram, gram_cross, gram_diag, GramMatrix, KernelSpec};
pub use regression::{NystromConfig, NystromModel, RidgeModel};
pub use scalar::Scalar;
pub use spectral::{SlopeFit, SpectralDecomposition};
pub use structpred::{CandidateSet, DecodeResult, DecodeVariant, TimingRow};
pub use subspace::{ExplicitProjection, Provenance, SubspaceProjection};
pub use synthgen::{
    AssumptionExponents, HMode, SpectralProfile, SyntheticProblem, SyntheticProblemSpec, XLaw,
};

/// Default-precision dense matrix.
pub type Matrix = ndarray::Array2<f64>;
/// Default-precision dense vector.
pub type Vector = ndarray::Array1<f64>;

//! Structured-prediction experiment driver: kernel-embedded outputs with
//! candidate-set decoding.
//!
//! The protocol follows repeated random subsampling: each repeat splits the
//! dataset into train/test, selects hyperparameters by inner k-fold
//! cross-validation on the training part only, fits on the full training
//! part, and decodes every test point against the training outputs as the
//! candidate set.
//!
//! Two estimators are compared on identical splits: the reduced-rank
//! composite (rank and one tied ridge parameter for both stages, selected by
//! the validation MSE of the projected predictor) and the full-rank baseline
//! (ridge parameter selected by the validation MSE of the unprojected
//! predictor). Metrics: example-based F1 when outputs are binary label
//! vectors, mean squared kernel-space decode loss, top-k accuracy over the
//! test points whose true output occurs among the candidates, and fit plus
//! decode wall times.

use super::{
    cross_validate, f1_example_based, holdout_indices, labels_of_binary_row,
    mse_output_space_gram, mse_output_space_projected, topk_accuracy, CvPlan, ExperimentReport,
    GridSpec, Objective, ReportRow,
};
use crate::error::{Error, Result};
use crate::kernels::{gram, gram_cross, KernelSpec};
use crate::regression::fit_krr_with_eig;
use crate::scalar::Scalar;
use crate::spectral::{self, SpectralDecomposition};
use crate::structpred::{
    decode_fullrank_with_alpha, decode_reduced_with_alpha, project_candidates, rbf_loss,
    CandidateSet,
};
use crate::subspace::{fit_supervised_projection, SubspaceProjection};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::time::Instant;

/// Input/output rows of a structured-prediction dataset.
#[derive(Debug, Clone)]
pub struct StructuredDataset<T: Scalar> {
    pub inputs: Array2<T>,
    pub outputs: Array2<T>,
}

impl<T: Scalar> StructuredDataset<T> {
    pub fn new(inputs: Array2<T>, outputs: Array2<T>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::EmptyInput("structured dataset"));
        }
        if inputs.nrows() != outputs.nrows() {
            return Err(Error::DimensionMismatch {
                context: "structured dataset rows",
                left: inputs.nrows(),
                right: outputs.nrows(),
            });
        }
        Ok(StructuredDataset { inputs, outputs })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    /// True when every output entry is exactly zero or one, making label-set
    /// metrics meaningful.
    pub fn outputs_are_binary(&self) -> bool {
        self.outputs
            .iter()
            .all(|&v| v == T::zero() || v == T::one())
    }
}

/// Configuration of a structured experiment.
///
/// `cv.holdout_fraction` is the test fraction of each repeat (default 0.2),
/// `cv.repeats` the number of random subsamples, and `cv.inner_folds` the
/// inner selection folds (default 4). Both pipeline stages share one tied
/// ridge parameter, selected jointly with the rank.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuredExperimentConfig {
    pub input_kernel: KernelSpec,
    pub output_kernel: KernelSpec,
    pub grid: GridSpec,
    pub cv: CvPlan,
    /// Which top-k accuracies to report.
    pub top_k: Vec<usize>,
    pub experiment_id: String,
}

/// Per-repeat results for both estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredRepeat {
    pub repeat: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub lambda_reduced: f64,
    pub p_reduced: usize,
    pub lambda_fullrank: f64,
    /// Example-based F1 of the decoded outputs; absent when outputs are not
    /// binary label vectors.
    pub f1_reduced: Option<f64>,
    pub f1_fullrank: Option<f64>,
    /// Mean squared kernel-space distance between decoded and true outputs.
    pub rbf_loss_reduced: f64,
    pub rbf_loss_fullrank: f64,
    /// `(k, accuracy)` over test points whose true output occurs among the
    /// candidates; empty when none does.
    pub topk_reduced: Vec<(usize, f64)>,
    pub topk_fullrank: Vec<(usize, f64)>,
    /// Fraction of test points whose true output occurs among the
    /// candidates.
    pub topk_coverage: f64,
    pub fit_ns_reduced: u64,
    pub fit_ns_fullrank: u64,
    pub decode_ns_reduced: u64,
    pub decode_ns_fullrank: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuredOutcome {
    pub report: ExperimentReport,
    pub repeats: Vec<StructuredRepeat>,
}

/// Square submatrix of `m` at the given rows and columns.
fn select_square<T: Scalar>(m: &Array2<T>, rows: &[usize], cols: &[usize]) -> Array2<T> {
    m.select(Axis(0), rows).select(Axis(1), cols)
}

/// Per-fold state shared across the lambda grid in the inner selection loop.
struct FoldState<T: Scalar> {
    fold: usize,
    dec_x: SpectralDecomposition<T>,
    k_x_inner: Array2<T>,
    k_z_inner: Array2<T>,
    k_x_cross: Array2<T>,
    k_z_cross: Array2<T>,
    k_z_val_diag: Array1<T>,
}

/// Per-(fold, lambda) state shared across the rank grid.
struct LambdaState<T: Scalar> {
    fold: usize,
    lambda: f64,
    alphas: Array2<T>,
    projection_at_max: Option<SubspaceProjection<T>>,
}

/// Decoded rankings plus total decode time for one estimator.
struct DecodeSummary {
    ranked: Vec<Vec<usize>>,
    decode_ns: u64,
}

fn summarize_metrics<T: Scalar>(
    decoded: &DecodeSummary,
    y_train: &Array2<T>,
    y_test: &Array2<T>,
    output_kernel: &KernelSpec,
    binary: bool,
    truth_ids: &[Option<usize>],
    top_k: &[usize],
) -> Result<(Option<f64>, f64, Vec<(usize, f64)>)> {
    let best: Vec<usize> = decoded.ranked.iter().map(|r| r[0]).collect();

    let f1 = if binary {
        let truth_sets: Vec<BTreeSet<usize>> = y_test
            .outer_iter()
            .map(|row| labels_of_binary_row(row))
            .collect();
        let pred_sets: Vec<BTreeSet<usize>> = best
            .iter()
            .map(|&id| labels_of_binary_row(y_train.row(id)))
            .collect();
        Some(f1_example_based(&truth_sets, &pred_sets)?)
    } else {
        None
    };

    let mut loss_total = 0.0;
    for (j, &id) in best.iter().enumerate() {
        loss_total += rbf_loss(output_kernel, y_test.row(j), y_train.row(id))?.to_f64();
    }
    let rbf_mean = loss_total / best.len() as f64;

    // Top-k accuracy is defined over the covered test points only: those
    // whose true output occurs among the candidates.
    let covered_ranked: Vec<Vec<usize>> = decoded
        .ranked
        .iter()
        .zip(truth_ids.iter())
        .filter(|(_, t)| t.is_some())
        .map(|(r, _)| r.clone())
        .collect();
    let covered_truth: Vec<usize> = truth_ids.iter().filter_map(|t| *t).collect();
    let mut topk = Vec::new();
    if !covered_truth.is_empty() {
        for &k in top_k {
            topk.push((k, topk_accuracy(&covered_ranked, &covered_truth, k)?));
        }
    }
    Ok((f1, rbf_mean, topk))
}

/// Runs the repeated-subsampling comparison; see the module docs.
pub fn run_structured_experiment<T: Scalar>(
    data: &StructuredDataset<T>,
    cfg: &StructuredExperimentConfig,
) -> Result<StructuredOutcome> {
    let n = data.len();
    cfg.grid.validate(n)?;
    if cfg.cv.repeats == 0 {
        return Err(Error::invalid("repeats", "need at least one repeat"));
    }
    let test_fraction = cfg.cv.holdout_fraction.unwrap_or(0.2);
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("holdout_fraction", "need 0 < fraction < 1"));
    }
    let inner_folds = cfg.cv.inner_folds.unwrap_or(4);
    let binary = data.outputs_are_binary();

    // Repeats share the split sizes, so the inner-fold rank cap is fixed:
    // ranks must fit the smallest inner training part.
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let n_train = n - n_test;
    let max_inner_fold = n_train / inner_folds + usize::from(n_train % inner_folds > 0);
    let min_inner_train = n_train - max_inner_fold;
    let reduced_grid = GridSpec {
        lambda_grid: cfg.grid.lambda_grid.clone(),
        p_grid: cfg
            .grid
            .p_grid
            .iter()
            .copied()
            .filter(|&p| p <= min_inner_train)
            .collect(),
    };
    if reduced_grid.p_grid.is_empty() {
        return Err(Error::invalid(
            "p_grid",
            format!("no rank fits the inner training parts (max {min_inner_train})"),
        ));
    }
    let p_max = *reduced_grid.p_grid.last().unwrap();
    let fullrank_grid = GridSpec {
        lambda_grid: cfg.grid.lambda_grid.clone(),
        p_grid: vec![1],
    };

    let mut report = ExperimentReport::new();
    let mut repeats = Vec::with_capacity(cfg.cv.repeats);
    for repeat in 0..cfg.cv.repeats {
        let split_seed = cfg.cv.seed.wrapping_add(repeat as u64);
        let (train_idx, test_idx) = holdout_indices(n, test_fraction, split_seed)?;
        let x_tr = data.inputs.select(Axis(0), &train_idx);
        let y_tr = data.outputs.select(Axis(0), &train_idx);
        let x_te = data.inputs.select(Axis(0), &test_idx);
        let y_te = data.outputs.select(Axis(0), &test_idx);

        let k_x_tr = gram(&cfg.input_kernel, x_tr.view())?;
        let k_z_tr = gram(&cfg.output_kernel, y_tr.view())?;

        // Inner selection. One-slot caches keyed by fold and by (fold,
        // lambda) exploit the fold-major, lambda-then-rank loop order.
        let inner_plan = CvPlan {
            outer_folds: inner_folds,
            inner_folds: None,
            repeats: 1,
            holdout_fraction: None,
            seed: split_seed.wrapping_add(0x9e37_79b9),
        };
        let mut fold_state: Option<FoldState<T>> = None;
        let mut lambda_state: Option<LambdaState<T>> = None;

        let sel_reduced = cross_validate(
            n_train,
            &inner_plan,
            &reduced_grid,
            Objective::ValMseVsY,
            |_, fold, tr, va, lambda, p, _| {
                if fold_state.as_ref().map_or(true, |s| s.fold != fold) {
                    let k_x_inner = select_square(&k_x_tr.entries, tr, tr);
                    fold_state = Some(FoldState {
                        fold,
                        dec_x: spectral::eigh(k_x_inner.view())?,
                        k_x_inner,
                        k_z_inner: select_square(&k_z_tr.entries, tr, tr),
                        k_x_cross: select_square(&k_x_tr.entries, tr, va),
                        k_z_cross: select_square(&k_z_tr.entries, tr, va),
                        k_z_val_diag: Array1::from_iter(
                            va.iter().map(|&j| k_z_tr.entries[[j, j]]),
                        ),
                    });
                    lambda_state = None;
                }
                let fs = fold_state.as_ref().unwrap();
                if lambda_state
                    .as_ref()
                    .map_or(true, |s| s.fold != fold || s.lambda != lambda)
                {
                    let model = fit_krr_with_eig(&fs.dec_x, cfg.input_kernel, lambda)?;
                    let alphas = model.predict_coefficients_batch(fs.k_x_cross.view())?;
                    let projection_at_max = Some(fit_supervised_projection(
                        &model,
                        fs.k_x_inner.view(),
                        fs.k_z_inner.view(),
                        p_max,
                    )?);
                    lambda_state = Some(LambdaState {
                        fold,
                        lambda,
                        alphas,
                        projection_at_max,
                    });
                }
                let ls = lambda_state.as_ref().unwrap();
                // Scored estimator: the composite (projected) predictor
                // against the true validation outputs.
                let proj = ls.projection_at_max.as_ref().unwrap().truncated(p);
                Ok(mse_output_space_projected(
                    &proj,
                    ls.alphas.view(),
                    fs.k_z_cross.view(),
                    fs.k_z_val_diag.view(),
                )?
                .to_f64())
            },
        )?;

        let mut fold_state: Option<FoldState<T>> = None;
        let mut lambda_state: Option<LambdaState<T>> = None;
        let sel_fullrank = cross_validate(
            n_train,
            &inner_plan,
            &fullrank_grid,
            Objective::ValMseVsY,
            |_, fold, tr, va, lambda, _, _| {
                if fold_state.as_ref().map_or(true, |s| s.fold != fold) {
                    let k_x_inner = select_square(&k_x_tr.entries, tr, tr);
                    fold_state = Some(FoldState {
                        fold,
                        dec_x: spectral::eigh(k_x_inner.view())?,
                        k_x_inner,
                        k_z_inner: select_square(&k_z_tr.entries, tr, tr),
                        k_x_cross: select_square(&k_x_tr.entries, tr, va),
                        k_z_cross: select_square(&k_z_tr.entries, tr, va),
                        k_z_val_diag: Array1::from_iter(
                            va.iter().map(|&j| k_z_tr.entries[[j, j]]),
                        ),
                    });
                    lambda_state = None;
                }
                let fs = fold_state.as_ref().unwrap();
                if lambda_state
                    .as_ref()
                    .map_or(true, |s| s.fold != fold || s.lambda != lambda)
                {
                    let model = fit_krr_with_eig(&fs.dec_x, cfg.input_kernel, lambda)?;
                    let alphas = model.predict_coefficients_batch(fs.k_x_cross.view())?;
                    lambda_state = Some(LambdaState {
                        fold,
                        lambda,
                        alphas,
                        projection_at_max: None,
                    });
                }
                let ls = lambda_state.as_ref().unwrap();
                Ok(mse_output_space_gram(
                    ls.alphas.view(),
                    fs.k_z_inner.view(),
                    fs.k_z_cross.view(),
                    fs.k_z_val_diag.view(),
                )?
                .to_f64())
            },
        )?;

        // Final fits on the whole training part, timed per estimator.
        let t0 = Instant::now();
        let dec = spectral::eigh(k_x_tr.view())?;
        let model_red = fit_krr_with_eig(&dec, cfg.input_kernel, sel_reduced.lambda)?;
        let projection = fit_supervised_projection(
            &model_red,
            k_x_tr.view(),
            k_z_tr.view(),
            sel_reduced.p,
        )?;
        let cand = CandidateSet::new(cfg.output_kernel, y_tr.clone(), None)?;
        let uy_c = project_candidates(&projection, k_z_tr.view())?;
        let fit_ns_reduced = t0.elapsed().as_nanos() as u64;

        let t0 = Instant::now();
        let dec_full = spectral::eigh(k_x_tr.view())?;
        let model_full = fit_krr_with_eig(&dec_full, cfg.input_kernel, sel_fullrank.lambda)?;
        let fit_ns_fullrank = t0.elapsed().as_nanos() as u64;

        // Decode every test point against the training outputs.
        let k_x_cross = gram_cross(&cfg.input_kernel, x_tr.view(), x_te.view())?;
        let alphas_red = model_red.predict_coefficients_batch(k_x_cross.view())?;
        let alphas_full = model_full.predict_coefficients_batch(k_x_cross.view())?;
        let k_rank = cfg.top_k.iter().copied().max().unwrap_or(1).max(1);

        let mut reduced = DecodeSummary {
            ranked: Vec::with_capacity(test_idx.len()),
            decode_ns: 0,
        };
        let mut fullrank = DecodeSummary {
            ranked: Vec::with_capacity(test_idx.len()),
            decode_ns: 0,
        };
        for j in 0..test_idx.len() {
            let res = decode_reduced_with_alpha(
                &projection,
                uy_c.view(),
                alphas_red.column(j),
                &cand,
                k_rank,
            )?;
            reduced.decode_ns += res.timing_ns;
            reduced.ranked.push(res.ranked_ids);
            let res = decode_fullrank_with_alpha(
                k_z_tr.view(),
                alphas_full.column(j),
                &cand,
                k_rank,
            )?;
            fullrank.decode_ns += res.timing_ns;
            fullrank.ranked.push(res.ranked_ids);
        }

        // Identify which test outputs occur among the candidates (exact row
        // equality; outputs are frequently duplicated label vectors).
        let truth_ids: Vec<Option<usize>> = y_te
            .outer_iter()
            .map(|ty| {
                y_tr.outer_iter()
                    .enumerate()
                    .find(|(_, cr)| cr.iter().zip(ty.iter()).all(|(a, b)| a == b))
                    .map(|(i, _)| i)
            })
            .collect();
        let coverage =
            truth_ids.iter().filter(|t| t.is_some()).count() as f64 / truth_ids.len() as f64;

        let (f1_red, rbf_red, topk_red) = summarize_metrics(
            &reduced,
            &y_tr,
            &y_te,
            &cfg.output_kernel,
            binary,
            &truth_ids,
            &cfg.top_k,
        )?;
        let (f1_full, rbf_full, topk_full) = summarize_metrics(
            &fullrank,
            &y_tr,
            &y_te,
            &cfg.output_kernel,
            binary,
            &truth_ids,
            &cfg.top_k,
        )?;

        let result = StructuredRepeat {
            repeat,
            n_train,
            n_test: test_idx.len(),
            lambda_reduced: sel_reduced.lambda,
            p_reduced: projection.rank_p,
            lambda_fullrank: sel_fullrank.lambda,
            f1_reduced: f1_red,
            f1_fullrank: f1_full,
            rbf_loss_reduced: rbf_red,
            rbf_loss_fullrank: rbf_full,
            topk_reduced: topk_red,
            topk_fullrank: topk_full,
            topk_coverage: coverage,
            fit_ns_reduced,
            fit_ns_fullrank,
            decode_ns_reduced: reduced.decode_ns,
            decode_ns_fullrank: fullrank.decode_ns,
        };
        push_repeat_rows(&mut report, cfg, &result);
        repeats.push(result);
    }

    Ok(StructuredOutcome { report, repeats })
}

fn push_repeat_rows(
    report: &mut ExperimentReport,
    cfg: &StructuredExperimentConfig,
    rep: &StructuredRepeat,
) {
    let mut row = |metric: String, p: Option<usize>, l1: f64, l2: f64, value: f64| {
        report.push(ReportRow {
            experiment_id: cfg.experiment_id.clone(),
            seed: cfg.cv.seed.wrapping_add(rep.repeat as u64),
            n: rep.n_train,
            p,
            lambda1: Some(l1),
            lambda2: Some(l2),
            metric_name: metric,
            value,
        });
    };
    let l_red = rep.lambda_reduced;
    let l_full = rep.lambda_fullrank;
    let p = Some(rep.p_reduced);
    if let Some(f1) = rep.f1_reduced {
        row("f1_reduced".into(), p, l_red, l_red, f1);
    }
    if let Some(f1) = rep.f1_fullrank {
        row("f1_fullrank".into(), None, l_full, l_full, f1);
    }
    row("rbf_loss_reduced".into(), p, l_red, l_red, rep.rbf_loss_reduced);
    row(
        "rbf_loss_fullrank".into(),
        None,
        l_full,
        l_full,
        rep.rbf_loss_fullrank,
    );
    for &(k, acc) in &rep.topk_reduced {
        row(format!("top{k}_accuracy_reduced"), p, l_red, l_red, acc);
    }
    for &(k, acc) in &rep.topk_fullrank {
        row(format!("top{k}_accuracy_fullrank"), None, l_full, l_full, acc);
    }
    row("topk_coverage".into(), None, l_red, l_full, rep.topk_coverage);
}

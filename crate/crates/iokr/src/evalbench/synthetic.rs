//! End-to-end synthetic experiment driver.
//!
//! Synthetic problems use linear input and output kernels, so the whole
//! pipeline runs in explicit feature coordinates. One eigendecomposition of
//! the training Gram matrix per data split serves every ridge parameter
//! (the inverse only rescales eigenvalues), and one `d x d`
//! eigendecomposition per smoother serves every rank (smaller ranks are
//! leading-column slices). That keeps dense hyperparameter grids tractable
//! at several thousand training points.
//!
//! Estimators compared on held-out test data, always against the noise-free
//! targets:
//! - the plain ridge estimator,
//! - its composition with the supervised rank-p projection,
//! - optionally the unsupervised (output PCA) and oracle (true signal
//!   second-moment) projections,
//! - optionally a ridge estimator trained on the noise-free targets, an
//!   upper reference that no projection can beat systematically.
//!
//! Hyperparameters are selected on validation data only: k-fold splits of
//! the training set when `cv.outer_folds >= 2`, otherwise the problem's
//! dedicated validation sample. Ridge parameters for the plain estimators
//! minimize validation MSE against the observed targets; the second-stage
//! ridge parameter minimizes validation MSE against the projected targets;
//! the reported rank minimizes the composite estimator's validation MSE.

use super::{
    complement_indices, kfold_indices, mse_output_space_explicit, select_min_cell, CvPlan,
    ExperimentReport, GridSpec, ReportRow,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral;
use crate::subspace::fit_explicit_projection;
use crate::synthgen::{
    build_problem, sample_dataset, streams, SyntheticDataset, SyntheticProblemSpec,
};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Which projection produced a composite estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Prov {
    Supervised,
    Unsupervised,
    Oracle,
}

impl Prov {
    fn label(self) -> &'static str {
        match self {
            Prov::Supervised => "supervised",
            Prov::Unsupervised => "unsupervised",
            Prov::Oracle => "oracle",
        }
    }
}

/// Configuration of one synthetic run (one problem seed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticExperimentConfig {
    pub problem: SyntheticProblemSpec,
    pub grid: GridSpec,
    pub cv: CvPlan,
    pub with_unsupervised: bool,
    pub with_oracle: bool,
    pub with_denoised: bool,
    pub experiment_id: String,
}

impl SyntheticExperimentConfig {
    /// All estimators enabled.
    pub fn new(
        problem: SyntheticProblemSpec,
        grid: GridSpec,
        cv: CvPlan,
        experiment_id: impl Into<String>,
    ) -> Self {
        SyntheticExperimentConfig {
            problem,
            grid,
            cv,
            with_unsupervised: true,
            with_oracle: true,
            with_denoised: true,
            experiment_id: experiment_id.into(),
        }
    }
}

/// Scores of one composite estimator at one rank.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RankPoint {
    pub p: usize,
    /// Second-stage ridge parameter selected at this rank.
    pub lambda2: f64,
    /// Mean validation score of the selection objective (estimate vs
    /// projected targets) at `lambda2`.
    pub val_score_projected: f64,
    /// Mean validation MSE of the composite estimator against the observed
    /// targets at `lambda2`; rank selection minimizes this.
    pub val_mse_composite: f64,
    /// Test MSE of the composite estimator against the noise-free targets.
    pub test_mse_clean: f64,
}

/// Everything a synthetic run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticOutcome {
    /// Ridge parameter of the plain estimator (also used by the projection
    /// smoother).
    pub lambda1: f64,
    pub lambda_denoised: Option<f64>,
    pub test_mse_krr: f64,
    pub test_mse_denoised: Option<f64>,
    pub supervised: Vec<RankPoint>,
    /// Empty when the corresponding estimator is disabled.
    pub unsupervised: Vec<RankPoint>,
    pub oracle: Vec<RankPoint>,
    /// Rank minimizing the supervised composite's validation MSE.
    pub selected_p: usize,
    /// Supervised composite test MSE at `selected_p`.
    pub selected_test_mse: f64,
    /// Wall-clock duration of the whole run. Kept out of `report` so that
    /// metric rows stay reproducible across reruns.
    pub wall_time_seconds: f64,
    pub report: ExperimentReport,
}

// ---------------------------------------------------------------------------
// Eigencoordinate cache
// ---------------------------------------------------------------------------

/// Training-set eigencoordinates: everything ridge regression needs for a
/// whole lambda grid after one symmetric eigendecomposition.
struct EigenCoords<T: Scalar> {
    /// Training rows backing this fit.
    x: Array2<T>,
    /// Eigenvectors of `X X^T` (columns, descending eigenvalues).
    v: Array2<T>,
    mu: Array1<T>,
    /// `V^T Y` and `V^T Y_clean`.
    p_y: Array2<T>,
    p_clean: Array2<T>,
}

/// Rows of `m` scaled by `s`.
fn scale_rows<T: Scalar>(m: &Array2<T>, s: &Array1<T>) -> Array2<T> {
    let mut out = m.clone();
    for (mut row, &f) in out.outer_iter_mut().zip(s.iter()) {
        row.mapv_inplace(|v| v * f);
    }
    out
}

fn frob_sq<T: Scalar>(m: &Array2<T>) -> f64 {
    m.iter()
        .map(|&v| {
            let f = Scalar::to_f64(v);
            f * f
        })
        .sum()
}

impl<T: Scalar> EigenCoords<T> {
    fn fit(x: Array2<T>, y: &Array2<T>, y_clean: &Array2<T>) -> Result<Self> {
        let k = x.dot(&x.t());
        let dec = spectral::eigh(k.view())?;
        let p_y = dec.eigenvectors.t().dot(y);
        let p_clean = dec.eigenvectors.t().dot(y_clean);
        Ok(EigenCoords {
            x,
            v: dec.eigenvectors,
            mu: dec.eigenvalues,
            p_y,
            p_clean,
        })
    }

    fn n(&self) -> usize {
        self.mu.len()
    }

    /// `V^T X X_eval^T`, the eigencoordinates of evaluation kernel columns.
    fn q_cross(&self, x_eval: ArrayView2<'_, T>) -> Array2<T> {
        self.v.t().dot(&self.x.dot(&x_eval.t()))
    }

    /// Ridge predictions at the points encoded by `q` (one column each):
    /// `Q^T diag(1/(mu + n lambda)) V^T Y`, shape `m x d`.
    fn predictions(&self, q: &Array2<T>, lambda: f64, denoised: bool) -> Array2<T> {
        let nl = T::from_f64(lambda * self.n() as f64);
        let filter = self.mu.mapv(|m| T::one() / (m.max(T::zero()) + nl));
        let coords = if denoised { &self.p_clean } else { &self.p_y };
        q.t().dot(&scale_rows(coords, &filter))
    }

    /// Second moment `sum_i h(x_i) h(x_i)^T` of the smoothed training
    /// predictions, computed as `P^T diag(mu/(mu + n lambda))^2 P` without
    /// materializing the predictions.
    fn smoothed_second_moment(&self, lambda: f64) -> Array2<T> {
        let nl = T::from_f64(lambda * self.n() as f64);
        let filter = self.mu.mapv(|m| {
            let m = m.max(T::zero());
            m / (m + nl)
        });
        let b = scale_rows(&self.p_y, &filter);
        b.t().dot(&b)
    }

    /// Uncentered second moment of the training outputs, `Y^T Y`.
    fn output_second_moment(&self) -> Array2<T> {
        // V is orthogonal, so P^T P = Y^T Y.
        self.p_y.t().dot(&self.p_y)
    }
}

/// One validation context: a fitted training part plus encoded validation
/// rows. The constructor only ever reads the training rows, so validation
/// data cannot leak into the fit.
struct FoldCtx<T: Scalar> {
    coords: EigenCoords<T>,
    q_val: Array2<T>,
    y_val: Array2<T>,
    y_val_clean: Array2<T>,
}

fn build_kfold_contexts<T: Scalar>(
    train: &SyntheticDataset<T>,
    folds: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, FoldCtx<T>)>> {
    let n = train.x.nrows();
    let mut out = Vec::with_capacity(folds);
    for val_idx in kfold_indices(n, folds, seed)? {
        let train_idx = complement_indices(n, &val_idx);
        let coords = EigenCoords::fit(
            train.x.select(Axis(0), &train_idx),
            &train.y.select(Axis(0), &train_idx),
            &train.y_clean.select(Axis(0), &train_idx),
        )?;
        let q_val = coords.q_cross(train.x.select(Axis(0), &val_idx).view());
        let ctx = FoldCtx {
            coords,
            q_val,
            y_val: train.y.select(Axis(0), &val_idx),
            y_val_clean: train.y_clean.select(Axis(0), &val_idx),
        };
        out.push((val_idx, ctx));
    }
    Ok(out)
}

/// Mean validation MSE over folds for each lambda; returns the minimizer
/// (ties to the smallest lambda).
fn select_ridge_lambda<T: Scalar>(
    folds: &[FoldCtx<T>],
    lambdas: &[f64],
    denoised: bool,
) -> Result<f64> {
    let mut scores = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut total = 0.0;
        for fold in folds {
            let h = fold.coords.predictions(&fold.q_val, lambda, denoised);
            let target = if denoised { &fold.y_val_clean } else { &fold.y_val };
            total += mse_output_space_explicit(h.view(), target.view())?.to_f64();
        }
        scores.push((lambda, 0usize, total / folds.len() as f64));
    }
    Ok(select_min_cell(&scores)?.0)
}

/// Cumulative per-mode sums used by the rank sweep: entry `q` holds the sum
/// over the first `q` basis columns.
struct PrefixSums {
    cross: Vec<f64>,
    h_norm: Vec<f64>,
    y_norm: Vec<f64>,
}

fn prefix_sums<T: Scalar>(c_h: &Array2<T>, c_y: &Array2<T>) -> PrefixSums {
    let rank = c_h.ncols();
    let mut cross = vec![0.0; rank + 1];
    let mut h_norm = vec![0.0; rank + 1];
    let mut y_norm = vec![0.0; rank + 1];
    for l in 0..rank {
        let hl = c_h.column(l);
        let yl = c_y.column(l);
        cross[l + 1] = cross[l] + hl.dot(&yl).to_f64();
        h_norm[l + 1] = h_norm[l] + hl.dot(&hl).to_f64();
        y_norm[l + 1] = y_norm[l] + yl.dot(&yl).to_f64();
    }
    PrefixSums { cross, h_norm, y_norm }
}

impl PrefixSums {
    /// `||H B_q B_q^T - Y||^2` given `||Y||^2`, divided by the row count.
    fn composite_mse(&self, q: usize, y_sq: f64, rows: usize) -> f64 {
        ((y_sq - 2.0 * self.cross[q] + self.h_norm[q]) / rows as f64).max(0.0)
    }

    /// `||H - Y B_q B_q^T||^2` given `||H||^2`, divided by the row count.
    fn projected_target_mse(&self, q: usize, h_sq: f64, rows: usize) -> f64 {
        ((h_sq - 2.0 * self.cross[q] + self.y_norm[q]) / rows as f64).max(0.0)
    }
}

/// Basis columns for one provenance fitted from one training context.
fn fit_basis<T: Scalar>(
    prov: Prov,
    coords: &EigenCoords<T>,
    lambda1: f64,
    oracle_moment: &Array2<T>,
    p_max: usize,
) -> Result<Array2<T>> {
    let moment = match prov {
        Prov::Supervised => coords.smoothed_second_moment(lambda1),
        Prov::Unsupervised => coords.output_second_moment(),
        Prov::Oracle => oracle_moment.clone(),
    };
    let d = moment.nrows();
    Ok(fit_explicit_projection(moment.view(), p_max.min(d))?.basis)
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Runs one synthetic experiment end to end; see the module docs for the
/// protocol.
pub fn run_synthetic_experiment<T: Scalar>(
    cfg: &SyntheticExperimentConfig,
) -> Result<SyntheticOutcome> {
    let started = Instant::now();
    cfg.problem.validate()?;
    cfg.grid.validate(cfg.problem.n_train)?;
    if cfg.cv.repeats != 1 {
        return Err(Error::invalid(
            "repeats",
            "the synthetic driver runs one repeat; vary the problem seed instead",
        ));
    }

    let problem = build_problem::<T>(&cfg.problem)?;
    let train = sample_dataset(&problem, cfg.problem.n_train, cfg.problem.seed, streams::TRAIN)?;
    let test = sample_dataset(&problem, cfg.problem.n_test, cfg.problem.seed, streams::TEST)?;

    // Validation contexts: k-fold on the training set, or the dedicated
    // validation sample.
    let kfold_mode = cfg.cv.outer_folds >= 2;
    let mut folds: Vec<FoldCtx<T>> = if kfold_mode {
        build_kfold_contexts(&train, cfg.cv.outer_folds, cfg.cv.seed)?
            .into_iter()
            .map(|(_, ctx)| ctx)
            .collect()
    } else {
        let val = sample_dataset(&problem, cfg.problem.n_val, cfg.problem.seed, streams::VALIDATION)?;
        let coords = EigenCoords::fit(train.x.clone(), &train.y, &train.y_clean)?;
        let q_val = coords.q_cross(val.x.view());
        vec![FoldCtx {
            coords,
            q_val,
            y_val: val.y,
            y_val_clean: val.y_clean,
        }]
    };

    // Stage 1: ridge parameters of the plain estimators.
    let lambda1 = select_ridge_lambda(&folds, &cfg.grid.lambda_grid, false)?;
    let lambda_denoised = if cfg.with_denoised {
        Some(select_ridge_lambda(&folds, &cfg.grid.lambda_grid, true)?)
    } else {
        None
    };

    // Stage 2: rank sweep of the composite estimators.
    let mut provs = vec![Prov::Supervised];
    if cfg.with_unsupervised {
        provs.push(Prov::Unsupervised);
    }
    if cfg.with_oracle {
        provs.push(Prov::Oracle);
    }
    let oracle_moment = problem.signal_second_moment();
    let p_max = *cfg.grid.p_grid.last().unwrap();
    let n_l = cfg.grid.lambda_grid.len();
    let n_p = cfg.grid.p_grid.len();

    let fold_bases: Vec<Vec<Array2<T>>> = folds
        .iter()
        .map(|fold| {
            provs
                .iter()
                .map(|&prov| fit_basis(prov, &fold.coords, lambda1, &oracle_moment, p_max))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let cell = |pv: usize, li: usize, pi: usize| (pv * n_l + li) * n_p + pi;
    let mut sum_proj = vec![0.0f64; provs.len() * n_l * n_p];
    let mut sum_comp = vec![0.0f64; provs.len() * n_l * n_p];
    for (fold, bases) in folds.iter().zip(fold_bases.iter()) {
        let rows = fold.y_val.nrows();
        let y_sq = frob_sq(&fold.y_val);
        let c_y: Vec<Array2<T>> = bases.iter().map(|b| fold.y_val.dot(b)).collect();
        for (li, &lambda) in cfg.grid.lambda_grid.iter().enumerate() {
            let h = fold.coords.predictions(&fold.q_val, lambda, false);
            let h_sq = frob_sq(&h);
            for (pv, basis) in bases.iter().enumerate() {
                let c_h = h.dot(basis);
                let sums = prefix_sums(&c_h, &c_y[pv]);
                for (pi, &p) in cfg.grid.p_grid.iter().enumerate() {
                    let q = p.min(basis.ncols());
                    sum_proj[cell(pv, li, pi)] += sums.projected_target_mse(q, h_sq, rows);
                    sum_comp[cell(pv, li, pi)] += sums.composite_mse(q, y_sq, rows);
                }
            }
        }
    }
    let n_folds = folds.len() as f64;

    // Per provenance and rank: the lambda2 minimizing the projected-target
    // objective (ties to the smallest lambda).
    let mut chosen_li = vec![0usize; provs.len() * n_p];
    for pv in 0..provs.len() {
        for pi in 0..n_p {
            let mut best = 0usize;
            for li in 1..n_l {
                if sum_proj[cell(pv, li, pi)] < sum_proj[cell(pv, best, pi)] {
                    best = li;
                }
            }
            chosen_li[pv * n_p + pi] = best;
        }
    }

    // Final fit on the full training set.
    let full_coords = if kfold_mode {
        EigenCoords::fit(train.x.clone(), &train.y, &train.y_clean)?
    } else {
        folds.swap_remove(0).coords
    };
    drop(folds);
    let q_test = full_coords.q_cross(test.x.view());
    let rows_test = test.y_clean.nrows();
    let y_clean_sq = frob_sq(&test.y_clean);

    let test_mse_krr = mse_output_space_explicit(
        full_coords.predictions(&q_test, lambda1, false).view(),
        test.y_clean.view(),
    )?
    .to_f64();
    let test_mse_denoised = match lambda_denoised {
        Some(l) => Some(
            mse_output_space_explicit(
                full_coords.predictions(&q_test, l, true).view(),
                test.y_clean.view(),
            )?
            .to_f64(),
        ),
        None => None,
    };

    // Test MSE of every composite at its selected lambda2, sharing one
    // prediction matrix per distinct lambda2.
    let mut test_mse = vec![0.0f64; provs.len() * n_p];
    for (pv, &prov) in provs.iter().enumerate() {
        let basis = fit_basis(prov, &full_coords, lambda1, &oracle_moment, p_max)?;
        let c_y = test.y_clean.dot(&basis);
        let mut distinct: Vec<usize> = chosen_li[pv * n_p..(pv + 1) * n_p].to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        for li in distinct {
            let h = full_coords.predictions(&q_test, cfg.grid.lambda_grid[li], false);
            let sums = prefix_sums(&h.dot(&basis), &c_y);
            for (pi, &p) in cfg.grid.p_grid.iter().enumerate() {
                if chosen_li[pv * n_p + pi] == li {
                    let q = p.min(basis.ncols());
                    test_mse[pv * n_p + pi] = sums.composite_mse(q, y_clean_sq, rows_test);
                }
            }
        }
    }

    // Assemble rank curves and the report.
    let mut report = ExperimentReport::new();
    let mut row = |metric: &str, p: Option<usize>, l1: Option<f64>, l2: Option<f64>, value: f64| {
        report.push(ReportRow {
            experiment_id: cfg.experiment_id.clone(),
            seed: cfg.problem.seed,
            n: cfg.problem.n_train,
            p,
            lambda1: l1,
            lambda2: l2,
            metric_name: metric.to_string(),
            value,
        });
    };

    let mut curves: Vec<Vec<RankPoint>> = Vec::with_capacity(provs.len());
    for (pv, &prov) in provs.iter().enumerate() {
        let mut curve = Vec::with_capacity(n_p);
        for (pi, &p) in cfg.grid.p_grid.iter().enumerate() {
            let li = chosen_li[pv * n_p + pi];
            let point = RankPoint {
                p,
                lambda2: cfg.grid.lambda_grid[li],
                val_score_projected: sum_proj[cell(pv, li, pi)] / n_folds,
                val_mse_composite: sum_comp[cell(pv, li, pi)] / n_folds,
                test_mse_clean: test_mse[pv * n_p + pi],
            };
            row(
                &format!("test_mse_clean_{}", prov.label()),
                Some(p),
                Some(lambda1),
                Some(point.lambda2),
                point.test_mse_clean,
            );
            row(
                &format!("val_mse_composite_{}", prov.label()),
                Some(p),
                Some(lambda1),
                Some(point.lambda2),
                point.val_mse_composite,
            );
            row(
                &format!("selected_lambda2_{}", prov.label()),
                Some(p),
                Some(lambda1),
                Some(point.lambda2),
                point.lambda2,
            );
            curve.push(point);
        }
        curves.push(curve);
    }

    row("test_mse_clean_krr", None, Some(lambda1), None, test_mse_krr);
    if let (Some(l), Some(v)) = (lambda_denoised, test_mse_denoised) {
        row("test_mse_clean_denoised", None, Some(l), None, v);
    }

    // Rank selection: minimize the supervised composite's validation MSE.
    let supervised_curve = &curves[0];
    let mut best_pi = 0usize;
    for pi in 1..n_p {
        if supervised_curve[pi].val_mse_composite < supervised_curve[best_pi].val_mse_composite {
            best_pi = pi;
        }
    }
    let selected_p = supervised_curve[best_pi].p;
    let selected_test_mse = supervised_curve[best_pi].test_mse_clean;
    row(
        "selected_p_supervised",
        Some(selected_p),
        Some(lambda1),
        Some(supervised_curve[best_pi].lambda2),
        selected_p as f64,
    );

    let wall_time_seconds = started.elapsed().as_secs_f64();

    let mut curves = curves.into_iter();
    let supervised = curves.next().unwrap();
    let unsupervised = if cfg.with_unsupervised {
        curves.next().unwrap()
    } else {
        Vec::new()
    };
    let oracle = if cfg.with_oracle {
        curves.next().unwrap()
    } else {
        Vec::new()
    };

    Ok(SyntheticOutcome {
        lambda1,
        lambda_denoised,
        test_mse_krr,
        test_mse_denoised,
        supervised,
        unsupervised,
        oracle,
        selected_p,
        selected_test_mse,
        wall_time_seconds,
        report,
    })
}

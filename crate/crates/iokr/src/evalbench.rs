//! Metrics, hyperparameter grids, cross-validation, and experiment reports.
//!
//! Output-space errors are evaluated by the kernel trick wherever outputs are
//! kernel-embedded: `||h(x) - y||^2` expands into Gram-matrix terms and never
//! needs explicit feature vectors. The selection machinery (grids, fold
//! plans, tie policy) is shared by the synthetic and structured experiment
//! drivers that live in the submodules.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::subspace::SubspaceProjection;
use crate::synthgen::stream_rng;
use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub mod structured;
pub mod synthetic;

pub use structured::{
    run_structured_experiment, StructuredDataset, StructuredExperimentConfig, StructuredOutcome,
    StructuredRepeat,
};
pub use synthetic::{
    run_synthetic_experiment, RankPoint, SyntheticExperimentConfig, SyntheticOutcome,
};

// ---------------------------------------------------------------------------
// Output-space mean squared error
// ---------------------------------------------------------------------------

/// MSE between explicit prediction rows and explicit target rows.
pub fn mse_output_space_explicit<T: Scalar>(
    preds: ArrayView2<'_, T>,
    truth: ArrayView2<'_, T>,
) -> Result<T> {
    if preds.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            context: "mse_output_space_explicit: shapes",
            left: preds.nrows(),
            right: truth.nrows(),
        });
    }
    if preds.nrows() == 0 {
        return Err(Error::EmptyInput("mse_output_space_explicit"));
    }
    let mut total = T::zero();
    for (p_row, t_row) in preds.outer_iter().zip(truth.outer_iter()) {
        for (a, b) in p_row.iter().zip(t_row.iter()) {
            let d = *a - *b;
            total += d * d;
        }
    }
    Ok(total / T::from_f64(preds.nrows() as f64))
}

/// MSE of the implicit predictions `h(x_j) = sum_i alpha_ij psi(z_i)` against
/// targets `y_j`, by kernel trick:
/// `alpha_j^T K_z alpha_j - 2 alpha_j^T k_j + k(y_j, y_j)`.
///
/// `alphas` holds one coefficient column per test point (`n x m`),
/// `k_z_cross[i,j] = k_z(z_i, y_j)`, and `k_self[j] = k_z(y_j, y_j)`.
pub fn mse_output_space_gram<T: Scalar>(
    alphas: ArrayView2<'_, T>,
    k_z_train: ArrayView2<'_, T>,
    k_z_cross: ArrayView2<'_, T>,
    k_self: ArrayView1<'_, T>,
) -> Result<T> {
    let (n, m) = alphas.dim();
    if k_z_train.dim() != (n, n) || k_z_cross.dim() != (n, m) || k_self.len() != m {
        return Err(Error::DimensionMismatch {
            context: "mse_output_space_gram: shapes",
            left: n,
            right: m,
        });
    }
    if m == 0 {
        return Err(Error::EmptyInput("mse_output_space_gram"));
    }
    let ka = k_z_train.dot(&alphas);
    let mut total = T::zero();
    for j in 0..m {
        let a = alphas.column(j);
        let quad = a.dot(&ka.column(j));
        let cross = a.dot(&k_z_cross.column(j));
        // A true squared norm: clamp round-off negatives at zero.
        total += (quad - T::from_f64(2.0) * cross + k_self[j]).max(T::zero());
    }
    Ok(total / T::from_f64(m as f64))
}

/// MSE of the projected predictions `P h(x_j)` against targets, using only
/// projected coordinates: `||Uh_j||^2 - 2 Uh_j . c_j + k(y_j, y_j)` with
/// `Uh_j` the prediction coordinates and `c_j` the target coordinates.
pub fn mse_output_space_projected<T: Scalar>(
    projection: &SubspaceProjection<T>,
    alphas: ArrayView2<'_, T>,
    k_z_cross: ArrayView2<'_, T>,
    k_self: ArrayView1<'_, T>,
) -> Result<T> {
    let (n, m) = alphas.dim();
    if n != projection.n_train() || k_z_cross.dim() != (n, m) || k_self.len() != m {
        return Err(Error::DimensionMismatch {
            context: "mse_output_space_projected: shapes",
            left: n,
            right: projection.n_train(),
        });
    }
    if m == 0 {
        return Err(Error::EmptyInput("mse_output_space_projected"));
    }
    // Prediction coordinates per test point and target coordinates per
    // target, both p-dimensional.
    let uh = projection.uy_train.t().dot(&alphas); // p x m
    let target_coords = projection.project_gram_columns(k_z_cross)?; // m x p
    let mut total = T::zero();
    for j in 0..m {
        let u = uh.column(j);
        let c = target_coords.row(j);
        let quad = u.dot(&u);
        let cross = u.dot(&c);
        total += (quad - T::from_f64(2.0) * cross + k_self[j]).max(T::zero());
    }
    Ok(total / T::from_f64(m as f64))
}

// ---------------------------------------------------------------------------
// Set metrics
// ---------------------------------------------------------------------------

/// Mean example-based F1 over label sets: `2|T and P| / (|T| + |P|)` per
/// example, counting 1.0 when both sets are empty and 0.0 when exactly one
/// is empty.
pub fn f1_example_based(
    true_sets: &[BTreeSet<usize>],
    pred_sets: &[BTreeSet<usize>],
) -> Result<f64> {
    if true_sets.len() != pred_sets.len() {
        return Err(Error::DimensionMismatch {
            context: "f1_example_based: example counts",
            left: true_sets.len(),
            right: pred_sets.len(),
        });
    }
    if true_sets.is_empty() {
        return Err(Error::EmptyInput("f1_example_based"));
    }
    let mut total = 0.0;
    for (t, p) in true_sets.iter().zip(pred_sets.iter()) {
        total += match (t.is_empty(), p.is_empty()) {
            (true, true) => 1.0,
            (true, false) | (false, true) => 0.0,
            (false, false) => {
                let inter = t.intersection(p).count() as f64;
                2.0 * inter / (t.len() + p.len()) as f64
            }
        };
    }
    Ok(total / true_sets.len() as f64)
}

/// Fraction of examples whose true candidate id appears among the first `k`
/// entries of its ranking.
pub fn topk_accuracy(ranked: &[Vec<usize>], truth: &[usize], k: usize) -> Result<f64> {
    if ranked.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "topk_accuracy: example counts",
            left: ranked.len(),
            right: truth.len(),
        });
    }
    if ranked.is_empty() {
        return Err(Error::EmptyInput("topk_accuracy"));
    }
    if k == 0 {
        return Err(Error::invalid("k", "need k >= 1"));
    }
    let hits = ranked
        .iter()
        .zip(truth.iter())
        .filter(|(r, t)| r.iter().take(k).any(|id| id == *t))
        .count();
    Ok(hits as f64 / ranked.len() as f64)
}

/// Converts score rows into label sets: label `j` is predicted when
/// `scores[i, j] >= threshold`. An off-candidate-set convenience for
/// multilabel problems; candidate decoding remains the primary path.
pub fn label_threshold_decode<T: Scalar>(
    scores: ArrayView2<'_, T>,
    threshold: f64,
) -> Vec<BTreeSet<usize>> {
    let t = T::from_f64(threshold);
    scores
        .outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, &s)| s >= t)
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

/// Label set of a binary output row (entries equal to one).
pub fn labels_of_binary_row<T: Scalar>(row: ArrayView1<'_, T>) -> BTreeSet<usize> {
    row.iter()
        .enumerate()
        .filter(|(_, &v)| v == T::one())
        .map(|(j, _)| j)
        .collect()
}

// ---------------------------------------------------------------------------
// Grids and fold plans
// ---------------------------------------------------------------------------

/// Hyperparameter grids; both axes ascending, ties resolved toward the
/// smallest value (lambda first, then p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda_grid: Vec<f64>,
    pub p_grid: Vec<usize>,
}

impl GridSpec {
    /// Log-spaced defaults: ten lambdas `1e-8..=1e1` and powers of two up
    /// to `n` for the rank.
    pub fn default_for(n: usize) -> Self {
        let lambda_grid = (-8..=1).map(|e| 10f64.powi(e)).collect();
        let mut p_grid = Vec::new();
        let mut p = 1usize;
        while p <= n {
            p_grid.push(p);
            p = match p.checked_mul(2) {
                Some(next) => next,
                None => break,
            };
        }
        GridSpec { lambda_grid, p_grid }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.lambda_grid.is_empty() || self.p_grid.is_empty() {
            return Err(Error::EmptyInput("GridSpec"));
        }
        for w in self.lambda_grid.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::invalid("lambda_grid", "must be strictly ascending"));
            }
        }
        if self.lambda_grid.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::invalid("lambda_grid", "entries must be positive and finite"));
        }
        for w in self.p_grid.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::invalid("p_grid", "must be strictly ascending"));
            }
        }
        if self.p_grid[0] == 0 {
            return Err(Error::invalid("p_grid", "ranks must be >= 1"));
        }
        if *self.p_grid.last().unwrap() > n {
            return Err(Error::invalid(
                "p_grid",
                format!("largest rank {} exceeds n = {n}", self.p_grid.last().unwrap()),
            ));
        }
        Ok(())
    }
}

/// Fold/repeat layout for model selection and repeated evaluation.
///
/// `holdout_fraction` switches from k-fold partitions to repeated random
/// subsampling with that validation (or test) fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub outer_folds: usize,
    pub inner_folds: Option<usize>,
    pub repeats: usize,
    pub holdout_fraction: Option<f64>,
    pub seed: u64,
}

impl CvPlan {
    pub fn kfold(folds: usize, seed: u64) -> Self {
        CvPlan {
            outer_folds: folds,
            inner_folds: None,
            repeats: 1,
            holdout_fraction: None,
            seed,
        }
    }
}

/// Validation-fold index lists of a seeded k-fold partition: disjoint,
/// exhaustive, sizes differing by at most one.
pub fn kfold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid("folds", "need at least 2 folds"));
    }
    if folds > n {
        return Err(Error::invalid(
            "folds",
            format!("cannot split {n} rows into {folds} folds"),
        ));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream_rng(seed, 0));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        out.push(perm[start..start + size].to_vec());
        start += size;
    }
    Ok(out)
}

/// Seeded random split into `(train, heldout)` index lists with the given
/// heldout fraction; both sides are guaranteed nonempty.
pub fn holdout_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("fraction", "need 0 < fraction < 1"));
    }
    if n < 2 {
        return Err(Error::invalid("n", "need at least 2 rows to split"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream_rng(seed, 0));
    let heldout = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let (hold, train) = perm.split_at(heldout);
    Ok((train.to_vec(), hold.to_vec()))
}

/// Complement of an index list within `0..n`, in ascending order.
pub fn complement_indices(n: usize, subset: &[usize]) -> Vec<usize> {
    let mut in_subset = vec![false; n];
    for &i in subset {
        in_subset[i] = true;
    }
    (0..n).filter(|&i| !in_subset[i]).collect()
}

// ---------------------------------------------------------------------------
// Cross-validated selection
// ---------------------------------------------------------------------------

/// Which validation residual a selection stage minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `||h_lambda(x_i) - y_i||^2` on validation rows.
    ValMseVsY,
    /// `||h_lambda(x_i) - P y_i||^2` on validation rows, with the projection
    /// fitted on the training rows only.
    ValMseVsProjectedY,
}

/// One scored grid cell.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CvCell {
    pub repeat: usize,
    pub fold: usize,
    pub lambda: f64,
    pub p: usize,
    pub score: f64,
}

/// Selection outcome with the full score table for curve plots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvSelection {
    pub lambda: f64,
    pub p: usize,
    pub mean_score: f64,
    pub table: Vec<CvCell>,
}

/// Picks the `(lambda, p)` minimizing mean score; ties go to the smallest
/// lambda, then the smallest p. `scores` iterates lambdas and ranks in
/// ascending grid order.
pub(crate) fn select_min_cell(scores: &[(f64, usize, f64)]) -> Result<(f64, usize, f64)> {
    let mut best: Option<(f64, usize, f64)> = None;
    for &(lambda, p, score) in scores {
        if !score.is_finite() {
            return Err(Error::NonFinite("selection score"));
        }
        // Strict improvement only: earlier (smaller) grid entries win ties.
        if best.map_or(true, |(_, _, s)| score < s) {
            best = Some((lambda, p, score));
        }
    }
    best.ok_or(Error::EmptyInput("selection scores"))
}

/// Scores every `(fold, lambda, p)` cell through the caller's closure and
/// selects the grid point with the lowest mean validation score.
///
/// The closure receives `(repeat, fold, train_rows, val_rows, lambda, p,
/// objective)` and returns that cell's validation score; it must fit using
/// the training rows only.
pub fn cross_validate<F>(
    n: usize,
    plan: &CvPlan,
    grid: &GridSpec,
    objective: Objective,
    mut score_cell: F,
) -> Result<CvSelection>
where
    F: FnMut(usize, usize, &[usize], &[usize], f64, usize, Objective) -> Result<f64>,
{
    grid.validate(n)?;
    if plan.repeats == 0 {
        return Err(Error::invalid("repeats", "need at least one repeat"));
    }
    let mut table = Vec::new();
    let mut sums = vec![0.0f64; grid.lambda_grid.len() * grid.p_grid.len()];
    let mut count = 0usize;
    for repeat in 0..plan.repeats {
        let split_seed = plan.seed.wrapping_add(repeat as u64);
        let splits: Vec<(Vec<usize>, Vec<usize>)> = match plan.holdout_fraction {
            Some(frac) => vec![holdout_indices(n, frac, split_seed)?],
            None => kfold_indices(n, plan.outer_folds, split_seed)?
                .into_iter()
                .map(|val| (complement_indices(n, &val), val))
                .collect(),
        };
        for (fold, (train, val)) in splits.iter().enumerate() {
            if train.is_empty() || val.is_empty() {
                return Err(Error::EmptyInput("cross_validate fold"));
            }
            for (li, &lambda) in grid.lambda_grid.iter().enumerate() {
                for (pi, &p) in grid.p_grid.iter().enumerate() {
                    let score = score_cell(repeat, fold, train, val, lambda, p, objective)?;
                    table.push(CvCell {
                        repeat,
                        fold,
                        lambda,
                        p,
                        score,
                    });
                    sums[li * grid.p_grid.len() + pi] += score;
                }
            }
            count += 1;
        }
    }
    let mut means = Vec::with_capacity(sums.len());
    for (li, &lambda) in grid.lambda_grid.iter().enumerate() {
        for (pi, &p) in grid.p_grid.iter().enumerate() {
            means.push((lambda, p, sums[li * grid.p_grid.len() + pi] / count as f64));
        }
    }
    let (lambda, p, mean_score) = select_min_cell(&means)?;
    Ok(CvSelection {
        lambda,
        p,
        mean_score,
        table,
    })
}

// ---------------------------------------------------------------------------
// Experiment reports
// ---------------------------------------------------------------------------

/// One metric observation; every row carries the seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment_id: String,
    pub seed: u64,
    pub n: usize,
    pub p: Option<usize>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub metric_name: String,
    pub value: f64,
}

/// Append-only list of metric rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    pub fn extend_from(&mut self, other: ExperimentReport) {
        self.rows.extend(other.rows);
    }

    /// Rows matching a metric name, in insertion order.
    pub fn metric<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.metric_name == name)
    }
}

/// Mean and standard error of a sample.
pub fn mean_and_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput("mean_and_stderr"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

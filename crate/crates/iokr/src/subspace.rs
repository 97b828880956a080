//! Rank-p output-subspace estimation in Gram coordinates.
//!
//! Three fitting routes produce interchangeable projections: supervised
//! (spanned by the top eigenvectors of the second-moment matrix of the
//! ridge-regression predictions), unsupervised (kernel PCA on the outputs),
//! and explicit (top eigenvectors of a given finite-dimensional second-moment
//! matrix — the oracle in synthetic studies). The first two never leave Gram
//! coordinates, so outputs may live in an infinite-dimensional kernel space.
//!
//! A fitted projection exposes one downstream interface regardless of
//! provenance: a coefficient matrix `gamma` such that the coordinates of any
//! output vector `v` in the projection's orthonormal basis are
//! `gamma^T k_v`, where `k_v` is the kernel column of `v` against the
//! training outputs.

use crate::error::{Error, Result};
use crate::regression::RidgeModel;
use crate::scalar::Scalar;
use crate::spectral;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

/// Relative eigenvalue floor below which modes are dropped before the
/// `1/sqrt(mu)` normalization; keeps zero modes from blowing up.
pub const EIGENVALUE_FLOOR_REL: f64 = 1e-12;

/// How a projection was fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// From ridge-regression predictions, with the projection-stage ridge
    /// parameter used for the smoother.
    Supervised { lambda1: f64 },
    /// From the outputs alone (kernel PCA).
    Unsupervised,
    /// From a known second-moment matrix in explicit coordinates.
    Oracle,
}

/// Rank-p orthogonal projection of the output space, in Gram coordinates.
///
/// `beta_coeffs` are the normalized eigenvector columns (`u_l / sqrt(mu_l)`),
/// `gamma` maps kernel columns to basis coordinates, and `uy_train` caches
/// the coordinates of the training outputs. `rank_p` is the rank actually
/// kept, which may be below `requested_rank` when the spectrum runs out of
/// strictly positive eigenvalues.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SubspaceProjection<T: Scalar> {
    pub rank_p: usize,
    pub requested_rank: usize,
    pub beta_coeffs: Array2<T>,
    pub gamma: Array2<T>,
    pub uy_train: Array2<T>,
    pub kept_eigenvalues: Array1<T>,
    pub provenance: Provenance,
}

impl<T: Scalar> SubspaceProjection<T> {
    pub fn n_train(&self) -> usize {
        self.beta_coeffs.nrows()
    }

    /// Coordinates of arbitrary output vectors in the projection basis.
    ///
    /// `k_cols` holds one kernel column per vector (shape `n x m`, entry
    /// `[i,j] = k_z(z_i, v_j)` against the training outputs); returns the
    /// `m x p` coordinate matrix.
    pub fn project_gram_columns(&self, k_cols: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if k_cols.nrows() != self.n_train() {
            return Err(Error::DimensionMismatch {
                context: "project_gram_columns: kernel column length",
                left: k_cols.nrows(),
                right: self.n_train(),
            });
        }
        Ok(k_cols.t().dot(&self.gamma))
    }

    /// Restriction to the leading `p` modes. Because the modes are ordered
    /// eigenpairs of one decomposition, this equals refitting at the smaller
    /// rank; it lets rank grids reuse a single fit at the largest rank.
    pub fn truncated(&self, p: usize) -> SubspaceProjection<T> {
        let keep = p.min(self.rank_p);
        let cols = |m: &Array2<T>| m.slice(ndarray::s![.., ..keep]).to_owned();
        SubspaceProjection {
            rank_p: keep,
            requested_rank: p,
            beta_coeffs: cols(&self.beta_coeffs),
            gamma: cols(&self.gamma),
            uy_train: cols(&self.uy_train),
            kept_eigenvalues: self.kept_eigenvalues.slice(ndarray::s![..keep]).to_owned(),
            provenance: self.provenance,
        }
    }
}

/// Shared tail of the Gram-coordinate fits: keep the top `p` eigenpairs above
/// the relative floor and normalize them by the given rule.
fn keep_top_modes<T: Scalar>(
    dec: &spectral::SpectralDecomposition<T>,
    p: usize,
    normalizer: impl Fn(T) -> T,
) -> (Array2<T>, Array1<T>) {
    let n = dec.dim();
    let floor = T::from_f64(EIGENVALUE_FLOOR_REL) * dec.max_eigenvalue().max(T::zero());
    let mut rank = 0;
    while rank < p.min(n) && dec.eigenvalues[rank] > floor && dec.eigenvalues[rank] > T::zero() {
        rank += 1;
    }
    let mut beta = Array2::zeros((n, rank));
    let mut kept = Array1::zeros(rank);
    for l in 0..rank {
        let mu = dec.eigenvalues[l];
        kept[l] = mu;
        let scale = normalizer(mu);
        beta.column_mut(l)
            .assign(&dec.eigenvectors.column(l).mapv(|v| v * scale));
    }
    (beta, kept)
}

/// Fits the supervised projection: the span of the top `p` eigenvectors of
/// the second-moment matrix of the smoothed training predictions.
///
/// In Gram coordinates this is the eigendecomposition of
/// `K_h = W K_x K_z K_x W` (symmetrized), with `W` taken from the
/// projection-stage ridge model. Modes with eigenvalues at or below
/// `1e-12 * mu_1` are dropped, so the kept rank can fall short of `p`.
pub fn fit_supervised_projection<T: Scalar>(
    model: &RidgeModel<T>,
    k_x: ArrayView2<'_, T>,
    k_z: ArrayView2<'_, T>,
    p: usize,
) -> Result<SubspaceProjection<T>> {
    let n = model.n;
    if k_x.dim() != (n, n) || k_z.dim() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "fit_supervised_projection: Gram sizes vs model",
            left: k_x.nrows().max(k_z.nrows()),
            right: n,
        });
    }
    let kxw = k_x.dot(&model.w);
    let wkx = kxw.t();
    // K_h = (W K_x) K_z (K_x W); symmetric in exact arithmetic only.
    let k_h = wkx.dot(&k_z.dot(&kxw));
    let dec = spectral::eigh(k_h.view())?;
    let (beta, kept) = keep_top_modes(&dec, p, |mu| T::one() / mu.sqrt());
    let gamma = wkx.dot(&beta);
    let uy_train = k_z.dot(&gamma);
    Ok(SubspaceProjection {
        rank_p: kept.len(),
        requested_rank: p,
        beta_coeffs: beta,
        gamma,
        uy_train,
        kept_eigenvalues: kept,
        provenance: Provenance::Supervised {
            lambda1: model.lambda,
        },
    })
}

/// Fits the unsupervised projection: kernel PCA on the outputs, i.e. the span
/// of the top `p` eigenvectors of the empirical output covariance, obtained
/// from the eigendecomposition of `K_z / n`.
pub fn fit_unsupervised_projection<T: Scalar>(
    k_z: ArrayView2<'_, T>,
    p: usize,
) -> Result<SubspaceProjection<T>> {
    if k_z.nrows() != k_z.ncols() {
        return Err(Error::DimensionMismatch {
            context: "fit_unsupervised_projection: square Gram",
            left: k_z.nrows(),
            right: k_z.ncols(),
        });
    }
    let n = k_z.nrows();
    let nf = T::from_f64(n as f64);
    let scaled = k_z.to_owned() / nf;
    let dec = spectral::eigh(scaled.view())?;
    // beta_l = u_l / sqrt(n mu_l), which makes beta^T K_z beta = I.
    let (beta, kept) = keep_top_modes(&dec, p, |mu| T::one() / (nf * mu).sqrt());
    let uy_train = k_z.dot(&beta);
    Ok(SubspaceProjection {
        rank_p: kept.len(),
        requested_rank: p,
        gamma: beta.clone(),
        beta_coeffs: beta,
        uy_train,
        kept_eigenvalues: kept,
        provenance: Provenance::Unsupervised,
    })
}

/// Rank-p projection with an explicit orthonormal basis in finite-dimensional
/// output coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ExplicitProjection<T: Scalar> {
    pub rank_p: usize,
    pub requested_rank: usize,
    /// `d x p` orthonormal columns spanning the projected subspace.
    pub basis: Array2<T>,
    pub kept_eigenvalues: Array1<T>,
}

impl<T: Scalar> ExplicitProjection<T> {
    /// Applies the projection to row vectors: returns `V (V^T x_i)` per row.
    pub fn project_rows(&self, rows: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if rows.ncols() != self.basis.nrows() {
            return Err(Error::DimensionMismatch {
                context: "project_rows: vector dimension",
                left: rows.ncols(),
                right: self.basis.nrows(),
            });
        }
        Ok(rows.dot(&self.basis).dot(&self.basis.t()))
    }

    /// Basis coordinates of row vectors: `x_i -> V^T x_i` per row.
    pub fn coordinates(&self, rows: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if rows.ncols() != self.basis.nrows() {
            return Err(Error::DimensionMismatch {
                context: "coordinates: vector dimension",
                left: rows.ncols(),
                right: self.basis.nrows(),
            });
        }
        Ok(rows.dot(&self.basis))
    }
}

/// Fits a projection from an explicit `d x d` PSD second-moment matrix: the
/// span of its top `p` eigenvectors.
///
/// With the true signal second-moment matrix this is the oracle projection
/// of synthetic studies; with an empirical second-moment matrix of predicted
/// outputs it reproduces the supervised fit in explicit coordinates.
pub fn fit_explicit_projection<T: Scalar>(
    m: ArrayView2<'_, T>,
    p: usize,
) -> Result<ExplicitProjection<T>> {
    let d = m.nrows();
    if p > d {
        return Err(Error::invalid(
            "p",
            format!("rank {p} exceeds output dimension {d}"),
        ));
    }
    let dec = spectral::eigh(m)?;
    let floor = T::from_f64(EIGENVALUE_FLOOR_REL) * dec.max_eigenvalue().max(T::zero());
    let mut rank = 0;
    while rank < p && dec.eigenvalues[rank] > floor && dec.eigenvalues[rank] > T::zero() {
        rank += 1;
    }
    let basis = dec.eigenvectors.slice(ndarray::s![.., ..rank]).to_owned();
    let kept = dec.eigenvalues.slice(ndarray::s![..rank]).to_owned();
    Ok(ExplicitProjection {
        rank_p: rank,
        requested_rank: p,
        basis,
        kept_eigenvalues: kept,
    })
}

/// Mean squared reconstruction error `(1/m) sum_j ||P v_j - v_j||^2` from
/// projected coordinates and self-kernel values.
///
/// Because the basis is orthonormal, `||P v||^2` is the squared coordinate
/// norm and each term is `k(v,v) - ||coords||^2`, clamped at zero against
/// round-off.
pub fn reconstruction_residual<T: Scalar>(
    coords: ArrayView2<'_, T>,
    self_kernels: ArrayView1<'_, T>,
) -> Result<T> {
    let m = self_kernels.len();
    if coords.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "reconstruction_residual: rows vs self-kernels",
            left: coords.nrows(),
            right: m,
        });
    }
    if m == 0 {
        return Err(Error::EmptyInput("reconstruction_residual"));
    }
    let mut total = T::zero();
    for (j, row) in coords.outer_iter().enumerate() {
        let norm2 = row.iter().fold(T::zero(), |acc, &c| acc + c * c);
        total += (self_kernels[j] - norm2).max(T::zero());
    }
    Ok(total / T::from_f64(m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram, gram_diag, KernelSpec};
    use crate::regression::fit_krr;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2, Axis};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(shape: (usize, usize), seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Array2::<f64>::zeros(shape);
        a.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        a
    }

    /// Builds a supervised projection on a random linear-kernel problem.
    fn supervised_fixture(
        n: usize,
        d_x: usize,
        d_y: usize,
        p: usize,
        lambda: f64,
        seed: u64,
    ) -> (Array2<f64>, Array2<f64>, SubspaceProjection<f64>) {
        let x = random_matrix((n, d_x), seed);
        let y = random_matrix((n, d_y), seed + 1);
        let k_x = gram(&KernelSpec::linear(), x.view()).unwrap();
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        let model = fit_krr(&k_x, lambda).unwrap();
        let proj =
            fit_supervised_projection(&model, k_x.view(), k_z.view(), p).unwrap();
        (x, y, proj)
    }

    #[test]
    fn supervised_matches_explicit_feature_space_oracle() {
        // Linear kernels make everything explicit: predictions are
        // H = K_x W Y, the projection basis is the top eigenvectors of
        // H^T H, and training coordinates are Y V_p.
        let (n, d, p, lambda) = (20, 6, 3, 0.05);
        let x = random_matrix((n, d), 100);
        let y = random_matrix((n, d), 101);
        let k_x = gram(&KernelSpec::linear(), x.view()).unwrap();
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        let model = fit_krr(&k_x, lambda).unwrap();
        let proj = fit_supervised_projection(&model, k_x.view(), k_z.view(), p).unwrap();
        assert_eq!(proj.rank_p, p);

        let h_hat = k_x.entries.dot(&model.w).dot(&y);
        let second_moment = h_hat.t().dot(&h_hat);
        let explicit = fit_explicit_projection(second_moment.view(), p).unwrap();
        let uy_oracle = y.dot(&explicit.basis);

        // Column signs of eigenvectors are arbitrary: align on the largest
        // entry before comparing.
        for l in 0..p {
            let col_gram = proj.uy_train.column(l);
            let col_feat = uy_oracle.column(l);
            let flip = if col_gram.dot(&col_feat) < 0.0 { -1.0 } else { 1.0 };
            for i in 0..n {
                assert_abs_diff_eq!(col_gram[i], flip * col_feat[i], epsilon = 1e-8);
            }
        }
        // Kept eigenvalues match the squared singular values of the
        // explicit prediction matrix.
        for l in 0..p {
            assert_abs_diff_eq!(
                proj.kept_eigenvalues[l],
                explicit.kept_eigenvalues[l],
                epsilon = 1e-8 * explicit.kept_eigenvalues[0]
            );
        }
    }

    #[test]
    fn supervised_gram_orthonormality() {
        let (_, y, proj) = supervised_fixture(15, 4, 5, 3, 0.1, 110);
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        // Rebuild K_h to check beta^T K_h beta = I.
        let x = random_matrix((15, 4), 110);
        let k_x = gram(&KernelSpec::linear(), x.view()).unwrap();
        let model = fit_krr(&k_x, 0.1).unwrap();
        let kxw = k_x.entries.dot(&model.w);
        let k_h = kxw.t().dot(&k_z.entries.dot(&kxw));
        let g = proj.beta_coeffs.t().dot(&k_h.dot(&proj.beta_coeffs));
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(g[[i, j]], want, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn zero_outputs_give_rank_zero() {
        let x = random_matrix((10, 3), 120);
        let y = Array2::<f64>::zeros((10, 4));
        let k_x = gram(&KernelSpec::linear(), x.view()).unwrap();
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        let model = fit_krr(&k_x, 0.1).unwrap();
        let proj = fit_supervised_projection(&model, k_x.view(), k_z.view(), 3).unwrap();
        assert_eq!(proj.rank_p, 0);
        assert_eq!(proj.requested_rank, 3);
        assert_eq!(proj.uy_train.dim(), (10, 0));
        let resid = reconstruction_residual(
            proj.uy_train.view(),
            gram_diag(&KernelSpec::linear(), y.view()).unwrap().view(),
        )
        .unwrap();
        assert_eq!(resid, 0.0);
    }

    #[test]
    fn requested_rank_clamps_to_effective_rank() {
        // Rank-2 outputs: asking for p = 5 keeps only 2 modes.
        let x = random_matrix((12, 3), 130);
        let base = random_matrix((12, 2), 131);
        let lift = random_matrix((2, 6), 132);
        let y = base.dot(&lift);
        let k_x = gram(&KernelSpec::linear(), x.view()).unwrap();
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        let model = fit_krr(&k_x, 0.05).unwrap();
        let proj = fit_supervised_projection(&model, k_x.view(), k_z.view(), 5).unwrap();
        assert_eq!(proj.rank_p, 2);
        assert!(proj.kept_eigenvalues.iter().all(|&m| m > 0.0));
    }

    #[test]
    fn unsupervised_orthonormal_outputs_reconstruct_exactly() {
        let y = Array2::<f64>::eye(6);
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        let proj = fit_unsupervised_projection(k_z.view(), 6).unwrap();
        assert_eq!(proj.rank_p, 6);
        let resid = reconstruction_residual(
            proj.uy_train.view(),
            gram_diag(&KernelSpec::linear(), y.view()).unwrap().view(),
        )
        .unwrap();
        assert!(resid < 1e-10, "residual {resid}");
    }

    #[test]
    fn unsupervised_collinear_outputs_need_rank_one() {
        let dir = array![1.0_f64, -2.0, 0.5];
        let mut y = Array2::<f64>::zeros((8, 3));
        for (i, mut row) in y.axis_iter_mut(Axis(0)).enumerate() {
            row.assign(&dir.mapv(|v| v * (i as f64 + 1.0)));
        }
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        let proj = fit_unsupervised_projection(k_z.view(), 1).unwrap();
        let resid = reconstruction_residual(
            proj.uy_train.view(),
            gram_diag(&KernelSpec::linear(), y.view()).unwrap().view(),
        )
        .unwrap();
        assert!(resid < 1e-10, "residual {resid}");
    }

    #[test]
    fn unsupervised_residual_matches_eckart_young_oracle() {
        // The best rank-2 approximation leaves exactly the bottom d-2
        // eigenvalues of the empirical output covariance.
        let (n, d, p) = (30, 5, 2);
        let y = random_matrix((n, d), 140);
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        let proj = fit_unsupervised_projection(k_z.view(), p).unwrap();
        let resid = reconstruction_residual(
            proj.uy_train.view(),
            gram_diag(&KernelSpec::linear(), y.view()).unwrap().view(),
        )
        .unwrap();
        let cov = y.t().dot(&y) / n as f64;
        let dec = crate::spectral::eigh(cov.view()).unwrap();
        let oracle: f64 = dec.eigenvalues.iter().skip(p).sum();
        assert_abs_diff_eq!(resid, oracle, epsilon = 1e-8);
    }

    #[test]
    fn unsupervised_gram_orthonormality() {
        let y = random_matrix((18, 4), 150);
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        let proj = fit_unsupervised_projection(k_z.view(), 3).unwrap();
        let g = proj
            .beta_coeffs
            .t()
            .dot(&k_z.entries.dot(&proj.beta_coeffs));
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(g[[i, j]], want, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn explicit_projection_diagonal_case() {
        let m = Array2::from_diag(&array![3.0_f64, 2.0, 1.0]);
        let proj = fit_explicit_projection(m.view(), 2).unwrap();
        assert_eq!(proj.rank_p, 2);
        assert_abs_diff_eq!(proj.basis[[0, 0]].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(proj.basis[[1, 1]].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(proj.basis[[2, 0]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(proj.basis[[2, 1]], 0.0, epsilon = 1e-12);
        assert_eq!(proj.kept_eigenvalues, array![3.0, 2.0]);
    }

    #[test]
    fn explicit_projection_full_rank_is_identity() {
        let a = random_matrix((5, 5), 160);
        let psd = a.dot(&a.t());
        let proj = fit_explicit_projection(psd.view(), 5).unwrap();
        let p_mat = proj.basis.dot(&proj.basis.t());
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(p_mat[[i, j]], want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn explicit_projection_recovers_rotated_top_eigenvector() {
        let d = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(170);
        let q: Array2<f64> = crate::spectral::haar_orthogonal(d, &mut rng).unwrap();
        let evals = Array1::from_iter((0..d).map(|i| 10.0 / (i as f64 + 1.0)));
        let m = q.dot(&Array2::from_diag(&evals)).dot(&q.t());
        let proj = fit_explicit_projection(m.view(), 1).unwrap();
        let overlap = proj.basis.column(0).dot(&q.column(0)).abs();
        assert!(overlap > 1.0 - 1e-8, "overlap {overlap}");
    }

    #[test]
    fn explicit_projection_rejects_oversized_rank() {
        let m = Array2::<f64>::eye(3);
        assert!(fit_explicit_projection(m.view(), 4).is_err());
    }

    #[test]
    fn residual_with_rank_zero_is_mean_squared_norm() {
        let y = random_matrix((7, 3), 180);
        let diag = gram_diag(&KernelSpec::linear(), y.view()).unwrap();
        let coords = Array2::<f64>::zeros((7, 0));
        let resid = reconstruction_residual(coords.view(), diag.view()).unwrap();
        assert_abs_diff_eq!(resid, diag.mean().unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn residual_nonincreasing_in_rank() {
        let y = random_matrix((25, 6), 190);
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        let diag = gram_diag(&KernelSpec::linear(), y.view()).unwrap();
        let mut last = f64::INFINITY;
        for p in 0..=6 {
            let proj = fit_unsupervised_projection(k_z.view(), p).unwrap();
            let r = reconstruction_residual(proj.uy_train.view(), diag.view()).unwrap();
            assert!(r <= last + 1e-12, "residual must not increase with rank");
            last = r;
        }
        assert!(last < 1e-10, "full rank reconstructs");
    }

    #[test]
    fn projection_coordinates_are_idempotent() {
        // Projecting a projected vector changes nothing: gamma^T K_z gamma = I.
        let (_, y, proj) = supervised_fixture(16, 5, 6, 4, 0.02, 200);
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        let g = proj.gamma.t().dot(&k_z.entries.dot(&proj.gamma));
        for i in 0..proj.rank_p {
            for j in 0..proj.rank_p {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(g[[i, j]], want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn project_gram_columns_matches_training_coordinates() {
        let (_, y, proj) = supervised_fixture(14, 4, 5, 3, 0.05, 210);
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        // Projecting the training outputs through the generic column path
        // must reproduce the cached uy_train.
        let coords = proj.project_gram_columns(k_z.view()).unwrap();
        for (a, b) in coords.iter().zip(proj.uy_train.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn truncated_equals_direct_fit_at_smaller_rank() {
        let (x, y, full) = supervised_fixture(16, 4, 6, 6, 0.05, 215);
        let k_x = gram(&KernelSpec::linear(), x.view()).unwrap();
        let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
        let model = fit_krr(&k_x, 0.05).unwrap();
        for p in [1usize, 3, 5] {
            let direct = fit_supervised_projection(&model, k_x.view(), k_z.view(), p).unwrap();
            let sliced = full.truncated(p);
            assert_eq!(sliced.rank_p, direct.rank_p);
            assert_eq!(sliced.requested_rank, p);
            // Same eigendecomposition, so eigenvalues agree bitwise; the
            // matrix products behind gamma run through differently shaped
            // gemm calls, so those agree only to accumulation order.
            assert_eq!(sliced.kept_eigenvalues, direct.kept_eigenvalues);
            for (a, b) in sliced.gamma.iter().zip(direct.gamma.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            for (a, b) in sliced.uy_train.iter().zip(direct.uy_train.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
        // Truncating beyond the kept rank is a no-op on the columns.
        let over = full.truncated(50);
        assert_eq!(over.rank_p, full.rank_p);
        assert_eq!(over.gamma, full.gamma);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        /// Idempotence holds across random shapes and both Gram provenances.
        #[test]
        fn prop_idempotent_coordinates(seed in 0u64..300, n in 4usize..18, p in 1usize..5) {
            let d_y = 5;
            let y = random_matrix((n, d_y), seed + 1000);
            let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();

            let unsup = fit_unsupervised_projection(k_z.view(), p).unwrap();
            let g_u = unsup.gamma.t().dot(&k_z.entries.dot(&unsup.gamma));
            for i in 0..unsup.rank_p {
                for j in 0..unsup.rank_p {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((g_u[[i, j]] - want).abs() < 1e-10);
                }
            }

            let x = random_matrix((n, 3), seed + 2000);
            let k_x = gram(&KernelSpec::gaussian(1.0).unwrap(), x.view()).unwrap();
            let model = fit_krr(&k_x, 0.05).unwrap();
            let sup = fit_supervised_projection(&model, k_x.view(), k_z.view(), p).unwrap();
            let g_s = sup.gamma.t().dot(&k_z.entries.dot(&sup.gamma));
            for i in 0..sup.rank_p {
                for j in 0..sup.rank_p {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((g_s[[i, j]] - want).abs() < 1e-10);
                }
            }
        }

        /// Kept eigenvalues are strictly positive and descending.
        #[test]
        fn prop_kept_eigenvalues_positive_descending(seed in 0u64..300, n in 3usize..15) {
            let y = random_matrix((n, 4), seed + 3000);
            let k_z = gram(&KernelSpec::linear(), y.view()).unwrap();
            let proj = fit_unsupervised_projection(k_z.view(), n).unwrap();
            for l in 0..proj.rank_p {
                prop_assert!(proj.kept_eigenvalues[l] > 0.0);
                if l > 0 {
                    prop_assert!(proj.kept_eigenvalues[l] <= proj.kept_eigenvalues[l - 1]);
                }
            }
        }
    }
}

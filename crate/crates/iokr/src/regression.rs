//! Kernel ridge regression in the vector-valued RKHS of `K(x,x') = k(x,x') I`.
//!
//! The regression stage never materializes predictions when outputs live in a
//! kernel space: a fitted model exposes the coefficient map
//! `alpha(x) = (K_x + n lambda I)^{-1} k_x`, and the implicit prediction is
//! `h(x) = sum_i alpha_i(x) psi(z_i)`. Downstream code consumes `alpha`
//! together with output-kernel evaluations only.
//!
//! Hyperparameters (`lambda`, anchor counts) are plain `f64` regardless of
//! the working precision; data matrices are generic over [`Scalar`].

use crate::error::{Error, Result};
use crate::kernels::{GramMatrix, KernelSpec};
use crate::scalar::Scalar;
use crate::spectral::{self, SpectralDecomposition};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Exact kernel ridge regression
// ---------------------------------------------------------------------------

/// Fitted kernel ridge regression: the ridge inverse `W = (K_x + n lambda I)^{-1}`
/// plus the metadata needed to evaluate kernel columns at test time.
///
/// `train_inputs` is present when the model was fitted from raw input rows
/// (the command-line path) and absent when fitted from a precomputed Gram
/// matrix only; coefficient prediction from an externally computed kernel
/// column works either way.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RidgeModel<T: Scalar> {
    pub w: Array2<T>,
    pub lambda: f64,
    pub kernel: KernelSpec,
    pub train_inputs: Option<Array2<T>>,
    pub n: usize,
}

impl<T: Scalar> RidgeModel<T> {
    /// Coefficient vector `alpha(x) = W k_x` for one test point, given the
    /// kernel column `k_x[i] = k(x, x_i)` against the training inputs.
    pub fn predict_coefficients(&self, k_x: ArrayView1<'_, T>) -> Result<Array1<T>> {
        if k_x.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "predict_coefficients: kernel column length",
                left: k_x.len(),
                right: self.n,
            });
        }
        Ok(self.w.dot(&k_x))
    }

    /// Coefficient matrix `W K_cross` for a batch of test points; `k_cross`
    /// holds one kernel column per test point (shape `n x n_test`).
    pub fn predict_coefficients_batch(&self, k_cross: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if k_cross.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                context: "predict_coefficients_batch: kernel column length",
                left: k_cross.nrows(),
                right: self.n,
            });
        }
        Ok(self.w.dot(&k_cross))
    }

    /// Kernel column of a raw test point against the stored training inputs.
    pub fn kernel_column(&self, x: ArrayView1<'_, T>) -> Result<Array1<T>> {
        let inputs = self.train_inputs.as_ref().ok_or(Error::invalid(
            "train_inputs",
            "model was fitted from a Gram matrix only; pass kernel columns directly",
        ))?;
        let mut col = Array1::zeros(self.n);
        for (i, row) in inputs.outer_iter().enumerate() {
            col[i] = crate::kernels::eval_kernel(&self.kernel, row, x)?;
        }
        Ok(col)
    }
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "lambda",
            format!("ridge parameter must be strictly positive and finite, got {lambda}"),
        ))
    }
}

/// Fits exact kernel ridge regression from a symmetric training Gram matrix.
///
/// The ridge inverse is formed through a symmetric eigendecomposition of
/// `K_x`; the `n lambda` shift keeps the system well conditioned for any PSD
/// Gram matrix.
pub fn fit_krr<T: Scalar>(k_x: &GramMatrix<T>, lambda: f64) -> Result<RidgeModel<T>> {
    if !k_x.symmetric {
        return Err(Error::invalid("k_x", "training Gram matrix must be symmetric"));
    }
    let dec = spectral::eigh(k_x.view())?;
    fit_krr_with_eig(&dec, k_x.kernel, lambda)
}

/// Fits exact kernel ridge regression from a precomputed eigendecomposition
/// of the training Gram matrix; lets a grid of `lambda` values share one
/// factorization.
pub fn fit_krr_with_eig<T: Scalar>(
    dec: &SpectralDecomposition<T>,
    kernel: KernelSpec,
    lambda: f64,
) -> Result<RidgeModel<T>> {
    validate_lambda(lambda)?;
    let n = dec.dim();
    let shift = T::from_f64(lambda * n as f64);
    // Negative round-off eigenvalues are floored so W stays positive definite.
    let w = dec.map_eigenvalues(|mu| T::one() / (mu.max(T::zero()) + shift));
    Ok(RidgeModel {
        w,
        lambda,
        kernel,
        train_inputs: None,
        n,
    })
}

/// Fits exact kernel ridge regression from raw input rows, storing them in
/// the model so test-time kernel columns can be computed on demand.
pub fn fit_krr_from_points<T: Scalar>(
    kernel: &KernelSpec,
    inputs: ArrayView2<'_, T>,
    lambda: f64,
) -> Result<RidgeModel<T>> {
    let k_x = crate::kernels::gram(kernel, inputs)?;
    let mut model = fit_krr(&k_x, lambda)?;
    model.train_inputs = Some(inputs.to_owned());
    Ok(model)
}

// ---------------------------------------------------------------------------
// Nyström approximation
// ---------------------------------------------------------------------------

/// Anchor-subsampling configuration for the Nyström approximation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NystromConfig {
    pub anchors: usize,
    pub seed: u64,
}

/// Nyström-approximated ridge regression restricted to the span of `m`
/// anchor points: `alpha(x) = K_nm G^+ k_m(x)` with
/// `G = K_nm^T K_nm + n lambda K_mm`.
///
/// Coefficients still index the full training set, so decoding code consumes
/// exact and approximate models identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NystromModel<T: Scalar> {
    /// `K_nm G^+`, shape `n x m`; right-multiplied by anchor kernel columns.
    pub coeff_map: Array2<T>,
    pub anchor_indices: Vec<usize>,
    pub lambda: f64,
    pub kernel: KernelSpec,
    pub anchor_inputs: Option<Array2<T>>,
    pub n: usize,
}

impl<T: Scalar> NystromModel<T> {
    /// Coefficient vector from the anchor kernel column
    /// `k_m[j] = k(x, x_{a_j})`.
    pub fn predict_coefficients(&self, k_m: ArrayView1<'_, T>) -> Result<Array1<T>> {
        if k_m.len() != self.anchor_indices.len() {
            return Err(Error::DimensionMismatch {
                context: "nystrom predict: anchor column length",
                left: k_m.len(),
                right: self.anchor_indices.len(),
            });
        }
        Ok(self.coeff_map.dot(&k_m))
    }

    /// Batch form: `k_cross` has one anchor kernel column per test point.
    pub fn predict_coefficients_batch(&self, k_cross: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if k_cross.nrows() != self.anchor_indices.len() {
            return Err(Error::DimensionMismatch {
                context: "nystrom batch predict: anchor column length",
                left: k_cross.nrows(),
                right: self.anchor_indices.len(),
            });
        }
        Ok(self.coeff_map.dot(&k_cross))
    }
}

/// Uniformly samples `m` anchor indices without replacement.
pub fn sample_anchor_indices(n: usize, cfg: &NystromConfig) -> Result<Vec<usize>> {
    if cfg.anchors == 0 || cfg.anchors > n {
        return Err(Error::invalid(
            "anchors",
            format!("need 1 <= m <= n, got m={} with n={n}", cfg.anchors),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut idx = sample(&mut rng, n, cfg.anchors).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Fits the Nyström-approximated ridge regression from the full training Gram
/// matrix, subsampling anchors under `cfg.seed`.
///
/// The pseudo-inverse of `G` is taken spectrally with a relative eigenvalue
/// cutoff, which handles duplicated anchors gracefully.
pub fn fit_krr_nystrom<T: Scalar>(
    k_x: &GramMatrix<T>,
    lambda: f64,
    cfg: &NystromConfig,
) -> Result<NystromModel<T>> {
    validate_lambda(lambda)?;
    if !k_x.symmetric {
        return Err(Error::invalid("k_x", "training Gram matrix must be symmetric"));
    }
    let n = k_x.nrows();
    let anchor_indices = sample_anchor_indices(n, cfg)?;
    let m = anchor_indices.len();
    let mut k_nm = Array2::zeros((n, m));
    let mut k_mm = Array2::zeros((m, m));
    for (jj, &aj) in anchor_indices.iter().enumerate() {
        for i in 0..n {
            k_nm[[i, jj]] = k_x.entries[[i, aj]];
        }
        for (ii, &ai) in anchor_indices.iter().enumerate() {
            k_mm[[ii, jj]] = k_x.entries[[ai, aj]];
        }
    }
    let shift = T::from_f64(lambda * n as f64);
    let g = k_nm.t().dot(&k_nm) + &(k_mm * shift);
    let g_pinv = spectral::matrix_power(g.view(), -1.0, None)?;
    Ok(NystromModel {
        coeff_map: k_nm.dot(&g_pinv),
        anchor_indices,
        lambda,
        kernel: k_x.kernel,
        anchor_inputs: None,
        n,
    })
}

// ---------------------------------------------------------------------------
// Closed-form regularization schedules
// ---------------------------------------------------------------------------

/// Regression-stage ridge schedule: `max(sqrt(S_pE / n), 1/n)`, where `S_pE`
/// is the residual output-noise energy outside the kept subspace. The
/// additional `log(n/delta)/n` term of the finite-sample analysis is omitted
/// because its constants are unobservable.
pub fn theory_lambda2(s_p_e: f64, n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::invalid("n", "need n >= 1"));
    }
    if !(s_p_e >= 0.0) || !s_p_e.is_finite() {
        return Err(Error::invalid("s_p_e", "residual energy must be finite and >= 0"));
    }
    let nf = n as f64;
    Ok((s_p_e / nf).sqrt().max(1.0 / nf))
}

/// Projection-stage ridge schedule: `mu_next^{-(1-beta)/2} n^{-1/2}`, where
/// `mu_next` is the first discarded eigenvalue of the target second-moment
/// operator and `beta` its source-regularity exponent.
pub fn theory_lambda1(mu_next: f64, beta: f64, n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::invalid("n", "need n >= 1"));
    }
    if !(mu_next > 0.0) || !mu_next.is_finite() {
        return Err(Error::invalid("mu_next", "eigenvalue must be finite and > 0"));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid("beta", "regularity exponent must lie in [0, 1]"));
    }
    Ok(mu_next.powf(-(1.0 - beta) / 2.0) / (n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram, gram_cross, KernelSpec};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(shape: (usize, usize), seed: u64, scale: f64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Array2::<f64>::zeros(shape);
        a.mapv_inplace(|_| rng.gen_range(-scale..scale));
        a
    }

    #[test]
    fn single_point_closed_form() {
        let k = gram(&KernelSpec::linear(), array![[1.0_f64]].view()).unwrap();
        let model = fit_krr(&k, 0.5).unwrap();
        // n = 1: W = 1/(1 + 0.5).
        assert_abs_diff_eq!(model.w[[0, 0]], 1.0 / 1.5, epsilon = 1e-12);
        let alpha = model.predict_coefficients(array![1.0].view()).unwrap();
        assert_abs_diff_eq!(alpha[0], 1.0 / 1.5, epsilon = 1e-12);
    }

    #[test]
    fn identity_gram_gives_scaled_identity() {
        let n = 4;
        let k = gram(&KernelSpec::linear(), Array2::<f64>::eye(n).view()).unwrap();
        let model = fit_krr(&k, 0.25).unwrap();
        let expected = 1.0 / (1.0 + n as f64 * 0.25);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { expected } else { 0.0 };
                assert_abs_diff_eq!(model.w[[i, j]], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ridge_identity_holds() {
        // W (K + n lambda I) = I to relative 1e-6.
        let x = random_matrix((8, 3), 11, 1.0);
        let k = gram(&KernelSpec::gaussian(2.0).unwrap(), x.view()).unwrap();
        let model = fit_krr(&k, 1e-3).unwrap();
        let shifted = &k.entries + &(Array2::<f64>::eye(8) * (8.0 * 1e-3));
        let prod = model.w.dot(&shifted);
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod[[i, j]], want, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn linear_kernel_matches_feature_space_ridge() {
        // Oracle: explicit ridge in feature space, b = (X^T X + n lambda I)^{-1} X^T y.
        let n = 5;
        let d = 3;
        let lambda = 0.07;
        let x = random_matrix((n, d), 21, 1.0);
        let y = random_matrix((n, 2), 22, 1.0);
        let k = gram(&KernelSpec::linear(), x.view()).unwrap();
        let model = fit_krr(&k, lambda).unwrap();

        let xtx = x.t().dot(&x) + &(Array2::<f64>::eye(d) * (n as f64 * lambda));
        let b = crate::spectral::matrix_power(xtx.view(), -1.0, None)
            .unwrap()
            .dot(&x.t())
            .dot(&y);

        let x_test = random_matrix((7, d), 23, 1.0);
        let k_cross = gram_cross(&KernelSpec::linear(), x.view(), x_test.view()).unwrap();
        let alphas = model.predict_coefficients_batch(k_cross.view()).unwrap();
        let pred_kernel = alphas.t().dot(&y);
        let pred_feature = x_test.dot(&b);
        for (a, b) in pred_kernel.iter().zip(pred_feature.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn predict_zero_column_gives_zero() {
        let x = random_matrix((6, 2), 31, 1.0);
        let k = gram(&KernelSpec::gaussian(1.0).unwrap(), x.view()).unwrap();
        let model = fit_krr(&k, 0.1).unwrap();
        let alpha = model.predict_coefficients(Array1::zeros(6).view()).unwrap();
        assert_eq!(alpha, Array1::zeros(6));
    }

    #[test]
    fn predict_matches_dense_multiply_oracle() {
        let x = random_matrix((3, 2), 41, 1.0);
        let k = gram(&KernelSpec::gaussian(1.5).unwrap(), x.view()).unwrap();
        let model = fit_krr(&k, 0.2).unwrap();
        let k_col = array![0.3_f64, -0.1, 0.7];
        let alpha = model.predict_coefficients(k_col.view()).unwrap();
        for i in 0..3 {
            let mut want = 0.0;
            for j in 0..3 {
                want += model.w[[i, j]] * k_col[j];
            }
            assert_abs_diff_eq!(alpha[i], want, epsilon = 1e-10);
        }
    }

    #[test]
    fn kernel_column_from_stored_inputs() {
        let x = random_matrix((5, 3), 43, 1.0);
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let model = fit_krr_from_points(&spec, x.view(), 0.1).unwrap();
        let test = array![0.4_f64, -0.2, 0.9];
        let col = model.kernel_column(test.view()).unwrap();
        for i in 0..5 {
            let want = crate::kernels::eval_kernel(&spec, x.row(i), test.view()).unwrap();
            assert_eq!(col[i], want);
        }
    }

    #[test]
    fn interpolates_as_lambda_vanishes() {
        // Well-conditioned Gaussian Gram at n=20: train residual collapses.
        let x = random_matrix((20, 2), 51, 2.0);
        let y = random_matrix((20, 3), 52, 1.0);
        let k = gram(&KernelSpec::gaussian(0.5).unwrap(), x.view()).unwrap();
        let model = fit_krr(&k, 1e-10).unwrap();
        let alphas = model.predict_coefficients_batch(k.view()).unwrap();
        let pred = alphas.t().dot(&y);
        let mse = (&pred - &y).mapv(|e| e * e).mean().unwrap();
        assert!(mse < 1e-10, "train MSE {mse} should vanish");
    }

    #[test]
    fn rejects_bad_lambda_and_shapes() {
        let k = gram(&KernelSpec::linear(), Array2::<f64>::eye(3).view()).unwrap();
        assert!(fit_krr(&k, 0.0).is_err());
        assert!(fit_krr(&k, -1.0).is_err());
        let model = fit_krr(&k, 1.0).unwrap();
        assert!(model.predict_coefficients(Array1::zeros(4).view()).is_err());
    }

    #[test]
    fn nystrom_all_anchors_matches_exact() {
        let x = random_matrix((30, 2), 61, 1.5);
        let k = gram(&KernelSpec::gaussian(1.0).unwrap(), x.view()).unwrap();
        let exact = fit_krr(&k, 0.05).unwrap();
        let nys = fit_krr_nystrom(&k, 0.05, &NystromConfig { anchors: 30, seed: 0 }).unwrap();
        assert_eq!(nys.anchor_indices, (0..30).collect::<Vec<_>>());
        let x_test = random_matrix((10, 2), 62, 1.5);
        let k_cross = gram_cross(&KernelSpec::gaussian(1.0).unwrap(), x.view(), x_test.view())
            .unwrap();
        let a_exact = exact.predict_coefficients_batch(k_cross.view()).unwrap();
        let a_nys = nys.predict_coefficients_batch(k_cross.view()).unwrap();
        for (a, b) in a_exact.iter().zip(a_nys.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn nystrom_single_anchor_is_rank_one() {
        let x = random_matrix((12, 2), 71, 1.0);
        let k = gram(&KernelSpec::gaussian(1.0).unwrap(), x.view()).unwrap();
        let nys = fit_krr_nystrom(&k, 0.1, &NystromConfig { anchors: 1, seed: 3 }).unwrap();
        // alpha(x) = coeff_map * k_m(x) with one column: direction is fixed,
        // only the scale varies with the test point.
        let a1 = nys.predict_coefficients(array![0.5].view()).unwrap();
        let a2 = nys.predict_coefficients(array![1.0].view()).unwrap();
        for i in 0..12 {
            assert_abs_diff_eq!(a2[i], 2.0 * a1[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn nystrom_half_anchors_close_to_exact_on_smooth_task() {
        // Scalar regression y = sin(3 x) + noise on n = 200 points; a 50-anchor
        // approximation must stay within 2x of the exact test MSE.
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let n = 200;
        let spec = KernelSpec::gaussian(0.25).unwrap();
        let mut x = Array2::<f64>::zeros((n, 1));
        x.mapv_inplace(|_| rng.gen_range(-2.0..2.0));
        let y = Array2::from_shape_fn((n, 1), |(i, _)| {
            (3.0 * x[[i, 0]]).sin() + 0.1 * rng.gen_range(-1.0..1.0)
        });
        let mut x_test = Array2::<f64>::zeros((100, 1));
        x_test.mapv_inplace(|_| rng.gen_range(-2.0..2.0));
        let y_test = x_test.mapv(|v| (3.0 * v).sin());

        let k = gram(&spec, x.view()).unwrap();
        let k_cross = gram_cross(&spec, x.view(), x_test.view()).unwrap();
        let lambda = 1e-4;

        let exact = fit_krr(&k, lambda).unwrap();
        let pred_exact = exact
            .predict_coefficients_batch(k_cross.view())
            .unwrap()
            .t()
            .dot(&y);
        let mse_exact = (&pred_exact - &y_test).mapv(|e| e * e).mean().unwrap();

        let nys = fit_krr_nystrom(&k, lambda, &NystromConfig { anchors: 50, seed: 7 }).unwrap();
        let mut k_anchor = Array2::<f64>::zeros((50, 100));
        for (jj, &aj) in nys.anchor_indices.iter().enumerate() {
            for t in 0..100 {
                k_anchor[[jj, t]] = k_cross.entries[[aj, t]];
            }
        }
        let pred_nys = nys
            .predict_coefficients_batch(k_anchor.view())
            .unwrap()
            .t()
            .dot(&y);
        let mse_nys = (&pred_nys - &y_test).mapv(|e| e * e).mean().unwrap();

        assert!(
            mse_nys <= 2.0 * mse_exact,
            "nystrom MSE {mse_nys} vs exact {mse_exact}"
        );
    }

    #[test]
    fn anchor_sampling_is_seeded_and_in_range() {
        let cfg = NystromConfig { anchors: 5, seed: 17 };
        let a = sample_anchor_indices(20, &cfg).unwrap();
        let b = sample_anchor_indices(20, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        let mut sorted = a.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 5, "no replacement");
        assert!(a.iter().all(|&i| i < 20));
        assert!(sample_anchor_indices(4, &cfg).is_err());
    }

    #[test]
    fn theory_lambda2_examples() {
        assert_abs_diff_eq!(theory_lambda2(0.0, 100).unwrap(), 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(theory_lambda2(1.0, 100).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(theory_lambda2(4.0, 4).unwrap(), 1.0, epsilon = 1e-15);
        assert!(theory_lambda2(-1.0, 10).is_err());
    }

    #[test]
    fn theory_lambda1_examples() {
        assert_abs_diff_eq!(theory_lambda1(0.37, 1.0, 100).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(theory_lambda1(0.25, 0.0, 4).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(theory_lambda1(1.0, 0.3, 100).unwrap(), 0.1, epsilon = 1e-15);
        assert!(theory_lambda1(0.0, 0.5, 10).is_err());
        assert!(theory_lambda1(1.0, 1.5, 10).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        /// All eigenvalues of W lie in (0, 1/(n lambda)].
        #[test]
        fn prop_ridge_inverse_spectrum_bounded(seed in 0u64..500, n in 1usize..20) {
            let lambda = 0.05;
            let x = random_matrix((n, 3), seed, 1.0);
            let k = gram(&KernelSpec::gaussian(1.0).unwrap(), x.view()).unwrap();
            let model = fit_krr(&k, lambda).unwrap();
            let dec = crate::spectral::eigh(model.w.view()).unwrap();
            let cap = 1.0 / (n as f64 * lambda);
            for &ev in dec.eigenvalues.iter() {
                prop_assert!(ev > 0.0);
                prop_assert!(ev <= cap * (1.0 + 1e-10));
            }
        }
    }
}

//! Scalar positive-definite kernels and Gram-matrix construction for inputs
//! and outputs.
//!
//! Conventions fixed here: the Gaussian kernel is `exp(-||a-b||^2 / (2 s2))`,
//! the Gaussian-Tanimoto kernel is `exp(-(1-T)/s2)` with Tanimoto coefficient
//! `T = <a,b> / (||a||^2+||b||^2-<a,b>)`, and `T = 1` when both vectors are
//! all-zero (identical objects). Squared distances are computed as
//! `||a||^2+||b||^2-2<a,b>` clamped at zero to absorb negative round-off.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

/// Kernel family plus width parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    Gaussian { sigma2: f64 },
    Linear,
    GaussianTanimoto { sigma2: f64 },
}

impl KernelSpec {
    pub fn gaussian(sigma2: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { sigma2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear() -> Self {
        KernelSpec::Linear
    }

    pub fn gaussian_tanimoto(sigma2: f64) -> Result<Self> {
        let spec = KernelSpec::GaussianTanimoto { sigma2 };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the width constraints; needed for specs built by deserialization.
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Gaussian { sigma2 } | KernelSpec::GaussianTanimoto { sigma2 } => {
                if sigma2 > 0.0 && sigma2.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(
                        "sigma2",
                        format!("width must be strictly positive and finite, got {sigma2}"),
                    ))
                }
            }
        }
    }

    /// True if the kernel only accepts binary (0/1) vectors.
    pub fn requires_binary(&self) -> bool {
        matches!(self, KernelSpec::GaussianTanimoto { .. })
    }
}

/// Pairwise kernel evaluations with kernel metadata.
///
/// When `symmetric` is set the matrix was computed on the upper triangle and
/// mirrored, so `entries[[i,j]] == entries[[j,i]]` holds exactly.
#[derive(Debug, Clone)]
pub struct GramMatrix<T: Scalar> {
    pub entries: Array2<T>,
    pub kernel: KernelSpec,
    pub symmetric: bool,
}

impl<T: Scalar> GramMatrix<T> {
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.entries.view()
    }

    /// Diagonal of a symmetric Gram matrix.
    pub fn diag(&self) -> Array1<T> {
        self.entries.diag().to_owned()
    }
}

fn dot<T: Scalar>(a: &ArrayView1<T>, b: &ArrayView1<T>) -> T {
    // Plain indexed loop: evaluation order is fixed, so transposed Gram
    // computations agree bitwise.
    let mut acc = T::zero();
    for k in 0..a.len() {
        acc += a[k] * b[k];
    }
    acc
}

fn check_binary<T: Scalar>(v: &ArrayView1<T>) -> bool {
    v.iter().all(|&x| x == T::zero() || x == T::one())
}

/// Evaluates the kernel on a single pair of points.
pub fn eval_kernel<T: Scalar>(
    spec: &KernelSpec,
    a: ArrayView1<'_, T>,
    b: ArrayView1<'_, T>,
) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "eval_kernel",
            left: a.len(),
            right: b.len(),
        });
    }
    spec.validate()?;
    if spec.requires_binary() && (!check_binary(&a) || !check_binary(&b)) {
        return Err(Error::invalid(
            "input",
            "gaussian_tanimoto requires binary (0/1) vectors",
        ));
    }
    Ok(eval_unchecked(spec, &a, &b))
}

/// Kernel evaluation with preconditions already validated.
fn eval_unchecked<T: Scalar>(spec: &KernelSpec, a: &ArrayView1<T>, b: &ArrayView1<T>) -> T {
    match *spec {
        KernelSpec::Linear => dot(a, b),
        KernelSpec::Gaussian { sigma2 } => {
            let d2 = (dot(a, a) + dot(b, b) - T::from_f64(2.0) * dot(a, b)).max(T::zero());
            (-d2 / T::from_f64(2.0 * sigma2)).exp()
        }
        KernelSpec::GaussianTanimoto { sigma2 } => {
            let ab = dot(a, b);
            let denom = dot(a, a) + dot(b, b) - ab;
            // Two all-zero vectors are identical objects: T = 1.
            let t = if denom == T::zero() { T::one() } else { ab / denom };
            (-(T::one() - t) / T::from_f64(sigma2)).exp()
        }
    }
}

fn validate_points<T: Scalar>(
    spec: &KernelSpec,
    pts: &ArrayView2<T>,
    name: &'static str,
) -> Result<()> {
    if pts.nrows() == 0 {
        return Err(Error::EmptyInput(name));
    }
    if spec.requires_binary() {
        for (i, row) in pts.outer_iter().enumerate() {
            if !check_binary(&row) {
                return Err(Error::invalid(
                    name,
                    format!("gaussian_tanimoto requires binary (0/1) vectors; row {i} is not"),
                ));
            }
        }
    }
    Ok(())
}

/// Symmetric Gram matrix of one point set: the upper triangle is evaluated
/// and mirrored, guaranteeing exact symmetry.
pub fn gram<T: Scalar>(spec: &KernelSpec, rows: ArrayView2<'_, T>) -> Result<GramMatrix<T>> {
    spec.validate()?;
    validate_points(spec, &rows, "rows")?;
    let n = rows.nrows();
    let mut entries = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = eval_unchecked(spec, &rows.row(i), &rows.row(j));
            entries[[i, j]] = v;
            entries[[j, i]] = v;
        }
    }
    Ok(GramMatrix {
        entries,
        kernel: *spec,
        symmetric: true,
    })
}

/// Rectangular cross-Gram matrix: `entries[[i,j]] = k(rows[i], cols[j])`.
pub fn gram_cross<T: Scalar>(
    spec: &KernelSpec,
    rows: ArrayView2<'_, T>,
    cols: ArrayView2<'_, T>,
) -> Result<GramMatrix<T>> {
    spec.validate()?;
    validate_points(spec, &rows, "rows")?;
    validate_points(spec, &cols, "cols")?;
    if rows.ncols() != cols.ncols() {
        return Err(Error::DimensionMismatch {
            context: "gram_cross: point dimension",
            left: rows.ncols(),
            right: cols.ncols(),
        });
    }
    let (n, m) = (rows.nrows(), cols.nrows());
    let mut entries = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            entries[[i, j]] = eval_unchecked(spec, &rows.row(i), &cols.row(j));
        }
    }
    Ok(GramMatrix {
        entries,
        kernel: *spec,
        symmetric: false,
    })
}

/// Self-kernel values `k(z_i, z_i)` of one point set.
pub fn gram_diag<T: Scalar>(spec: &KernelSpec, rows: ArrayView2<'_, T>) -> Result<Array1<T>> {
    spec.validate()?;
    validate_points(spec, &rows, "rows")?;
    Ok(Array1::from_iter(
        rows.outer_iter().map(|r| eval_unchecked(spec, &r, &r)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn gaussian_zero_distance_is_one() {
        let spec = KernelSpec::gaussian(10.0).unwrap();
        let a = array![1.0_f64, -2.0, 0.5];
        assert_eq!(eval_kernel(&spec, a.view(), a.view()).unwrap(), 1.0);
    }

    #[test]
    fn linear_is_dot_product() {
        let spec = KernelSpec::linear();
        let a = array![1.0_f64, 2.0];
        let b = array![3.0_f64, 4.0];
        assert_eq!(eval_kernel(&spec, a.view(), b.view()).unwrap(), 11.0);
    }

    #[test]
    fn tanimoto_hand_case() {
        // T = 1 / (2 + 1 - 1) = 1/2, k = exp(-0.5).
        let spec = KernelSpec::gaussian_tanimoto(1.0).unwrap();
        let a = array![1.0_f64, 1.0, 0.0];
        let b = array![1.0_f64, 0.0, 0.0];
        let v = eval_kernel(&spec, a.view(), b.view()).unwrap();
        assert_abs_diff_eq!(v, (-0.5_f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn tanimoto_all_zero_pair_is_identical() {
        let spec = KernelSpec::gaussian_tanimoto(2.0).unwrap();
        let z = array![0.0_f64, 0.0];
        assert_eq!(eval_kernel(&spec, z.view(), z.view()).unwrap(), 1.0);
    }

    #[test]
    fn tanimoto_rejects_non_binary() {
        let spec = KernelSpec::gaussian_tanimoto(1.0).unwrap();
        let a = array![0.5_f64, 1.0];
        let b = array![1.0_f64, 0.0];
        assert!(eval_kernel(&spec, a.view(), b.view()).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let spec = KernelSpec::linear();
        let a = array![1.0_f64, 2.0];
        let b = array![1.0_f64];
        assert!(matches!(
            eval_kernel(&spec, a.view(), b.view()),
            Err(crate::error::Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_width_rejected() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
        assert!(KernelSpec::gaussian_tanimoto(f64::NAN).is_err());
    }

    #[test]
    fn linear_gram_of_basis_is_identity() {
        let rows = Array2::<f64>::eye(3);
        let g = gram(&KernelSpec::linear(), rows.view()).unwrap();
        assert_eq!(g.entries, Array2::eye(3));
        assert!(g.symmetric);
    }

    #[test]
    fn single_point_gaussian_gram() {
        let rows = array![[0.3_f64, -4.0]];
        let g = gram(&KernelSpec::gaussian(3.0).unwrap(), rows.view()).unwrap();
        assert_eq!(g.entries, array![[1.0]]);
    }

    #[test]
    fn linear_gram_hand_case() {
        let rows = array![[1.0_f64, 0.0], [1.0, 1.0]];
        let g = gram(&KernelSpec::linear(), rows.view()).unwrap();
        assert_eq!(g.entries, array![[1.0, 1.0], [1.0, 2.0]]);
    }

    #[test]
    fn empty_input_rejected() {
        let rows = Array2::<f64>::zeros((0, 3));
        assert!(gram(&KernelSpec::linear(), rows.view()).is_err());
    }

    #[test]
    fn symmetric_gram_mirrors_exactly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut rows = Array2::<f64>::zeros((40, 7));
        rows.mapv_inplace(|_| rng.gen_range(-2.0..2.0));
        let g = gram(&KernelSpec::gaussian(1.7).unwrap(), rows.view()).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                assert_eq!(g.entries[[i, j]], g.entries[[j, i]], "exact mirror");
            }
            assert!(g.entries[[i, i]] >= 0.0);
        }
    }

    #[test]
    fn gaussian_gram_diagonal_is_all_ones() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let mut rows = Array2::<f64>::zeros((25, 4));
        rows.mapv_inplace(|_| rng.gen_range(-3.0..3.0));
        let g = gram(&KernelSpec::gaussian(0.8).unwrap(), rows.view()).unwrap();
        for i in 0..25 {
            assert_eq!(g.entries[[i, i]], 1.0);
        }
    }

    #[test]
    fn cross_gram_transpose_equals_swapped_arguments_exactly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut a = Array2::<f64>::zeros((13, 5));
        a.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        let mut b = Array2::<f64>::zeros((9, 5));
        b.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        for spec in [KernelSpec::linear(), KernelSpec::gaussian(2.2).unwrap()] {
            let ab = gram_cross(&spec, a.view(), b.view()).unwrap();
            let ba = gram_cross(&spec, b.view(), a.view()).unwrap();
            assert_eq!(ab.entries.t(), ba.entries.view(), "bitwise transpose equality");
        }
    }

    #[test]
    fn gram_diag_matches_entrywise_eval() {
        let rows = array![[1.0_f64, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 0.0]];
        let spec = KernelSpec::gaussian_tanimoto(1.5).unwrap();
        let d = gram_diag(&spec, rows.view()).unwrap();
        for (i, row) in rows.outer_iter().enumerate() {
            assert_eq!(d[i], eval_kernel(&spec, row, row).unwrap());
        }
    }

    /// Gram matrices on large-ish deterministic inputs stay PSD up to round-off.
    #[test]
    fn gram_psd_at_n200() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut rows = Array2::<f64>::zeros((200, 6));
        rows.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        let g = gram(&KernelSpec::gaussian(1.0).unwrap(), rows.view()).unwrap();
        let dec = spectral::eigh(g.entries.view()).unwrap();
        let max = dec.eigenvalues[0];
        let min = dec.eigenvalues[dec.eigenvalues.len() - 1];
        assert!(min >= -1e-8 * max, "min eigenvalue {min} vs max {max}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prop_gram_psd(seed in 0u64..1000, n in 2usize..30, d in 1usize..6, kind in 0u8..3) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let spec = match kind {
                0 => KernelSpec::linear(),
                1 => KernelSpec::gaussian(rng.gen_range(0.1..5.0)).unwrap(),
                _ => KernelSpec::gaussian_tanimoto(rng.gen_range(0.1..5.0)).unwrap(),
            };
            let mut rows = Array2::<f64>::zeros((n, d));
            if spec.requires_binary() {
                rows.mapv_inplace(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
            } else {
                rows.mapv_inplace(|_| rng.gen_range(-2.0..2.0));
            }
            let g = gram(&spec, rows.view()).unwrap();
            let dec = spectral::eigh(g.entries.view()).unwrap();
            let max = dec.eigenvalues[0].max(0.0);
            let min = dec.eigenvalues[dec.eigenvalues.len() - 1];
            prop_assert!(min >= -1e-8 * max.max(1e-30));
        }
    }
}

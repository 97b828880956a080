//! Synthetic problem generators with controllable spectral regularity.
//!
//! Problems are linear-Gaussian: a signal map `H`, an input covariance `C`,
//! and a noise covariance `E` generate data `y = H x + eps`. The spectral
//! profiles of `C`, `E`, and of the signal second-moment matrix `M = H C H^T`
//! control the regularity regime the estimator faces, and the closed-form
//! exponent calculus below relates the generator knobs to the rates a
//! reduced-rank estimator should exhibit.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Spectral profiles
// ---------------------------------------------------------------------------

/// Eigenvalue decay law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// `scale * p^{-rate}` for `p = 1..d`.
    Polynomial { rate: f64, scale: f64 },
    /// `value` for the first `rank` eigenvalues, zero after.
    FiniteRank { rank: usize, value: f64 },
    /// `scale * exp(-rate * p)` for `p = 1..d`.
    Exponential { rate: f64, scale: f64 },
    /// Arbitrary nonnegative descending list.
    Explicit { values: Vec<f64> },
}

/// An eigenvalue profile together with the ambient dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProfile {
    pub kind: ProfileKind,
    pub dim: usize,
}

impl SpectralProfile {
    pub fn polynomial(dim: usize, rate: f64, scale: f64) -> Self {
        SpectralProfile {
            kind: ProfileKind::Polynomial { rate, scale },
            dim,
        }
    }

    pub fn finite_rank(dim: usize, rank: usize, value: f64) -> Self {
        SpectralProfile {
            kind: ProfileKind::FiniteRank { rank, value },
            dim,
        }
    }

    pub fn exponential(dim: usize, rate: f64, scale: f64) -> Self {
        SpectralProfile {
            kind: ProfileKind::Exponential { rate, scale },
            dim,
        }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        let dim = values.len();
        SpectralProfile {
            kind: ProfileKind::Explicit { values },
            dim,
        }
    }

    /// Materializes the descending eigenvalue list of length `dim`.
    pub fn eigenvalues(&self) -> Result<Array1<f64>> {
        if self.dim == 0 {
            return Err(Error::EmptyInput("SpectralProfile dim"));
        }
        let vals: Vec<f64> = match &self.kind {
            ProfileKind::Polynomial { rate, scale } => {
                // rate = 0 is the flat (isotropic) spectrum.
                if !(*rate >= 0.0) || !(*scale > 0.0) {
                    return Err(Error::invalid("polynomial profile", "need rate >= 0, scale > 0"));
                }
                (1..=self.dim)
                    .map(|p| scale * (p as f64).powf(-rate))
                    .collect()
            }
            ProfileKind::FiniteRank { rank, value } => {
                if !(*value >= 0.0) || !value.is_finite() {
                    return Err(Error::invalid("finite_rank profile", "need value >= 0"));
                }
                if *rank > self.dim {
                    return Err(Error::invalid(
                        "finite_rank profile",
                        format!("rank {rank} exceeds dim {}", self.dim),
                    ));
                }
                (0..self.dim)
                    .map(|p| if p < *rank { *value } else { 0.0 })
                    .collect()
            }
            ProfileKind::Exponential { rate, scale } => {
                if !(*rate > 0.0) || !(*scale > 0.0) {
                    return Err(Error::invalid("exponential profile", "need rate > 0, scale > 0"));
                }
                (1..=self.dim)
                    .map(|p| scale * (-rate * p as f64).exp())
                    .collect()
            }
            ProfileKind::Explicit { values } => {
                if values.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        context: "explicit profile length vs dim",
                        left: values.len(),
                        right: self.dim,
                    });
                }
                for w in values.windows(2) {
                    if w[1] > w[0] {
                        return Err(Error::invalid("explicit profile", "values must descend"));
                    }
                }
                if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                    return Err(Error::invalid("explicit profile", "values must be finite and >= 0"));
                }
                values.clone()
            }
        };
        Ok(Array1::from_vec(vals))
    }
}

// ---------------------------------------------------------------------------
// Problem specification
// ---------------------------------------------------------------------------

/// How the signal map `H` is constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HMode {
    /// `H = H_0` with iid standard-normal entries.
    GaussianH0,
    /// `H = (H_0 C H_0^T)^gamma H_0`; larger `gamma` aligns `H` more
    /// strongly with the leading eigenspaces of `C`.
    Powered { gamma: f64 },
    /// `H = sum_i i^{-rate} v_i (x) u_i` with `u_i` the descending
    /// eigenvectors of `C` and `v_i` a random orthonormal output basis.
    Diagonal { rate: f64 },
    /// `H = sum_i sqrt(mu_i) v_i (x) u_i` where the profile prescribes the
    /// eigenvalues `mu_i` of `H H^T`; bases as in `Diagonal`.
    Spectral { profile: SpectralProfile },
}

/// How inputs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XLaw {
    StandardNormal,
    NormalWithCovC,
}

/// The full recipe for one synthetic problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProblemSpec {
    pub d: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub c_profile: SpectralProfile,
    pub h_mode: HMode,
    pub e_profile: SpectralProfile,
    pub x_law: XLaw,
    pub seed: u64,
}

impl SyntheticProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("d", "dimension must be positive"));
        }
        if self.c_profile.dim != self.d || self.e_profile.dim != self.d {
            return Err(Error::DimensionMismatch {
                context: "profile dims vs d",
                left: self.c_profile.dim.max(self.e_profile.dim),
                right: self.d,
            });
        }
        match &self.h_mode {
            HMode::Powered { gamma } if *gamma < 0.0 => {
                Err(Error::invalid("gamma", "power must be >= 0"))
            }
            HMode::Diagonal { rate } if !(*rate > 0.0) => {
                Err(Error::invalid("rate", "diagonal decay must be > 0"))
            }
            HMode::Spectral { profile } if profile.dim != self.d => {
                Err(Error::DimensionMismatch {
                    context: "H profile dim vs d",
                    left: profile.dim,
                    right: self.d,
                })
            }
            _ => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// Matrix construction
// ---------------------------------------------------------------------------

/// RNG for one logical stream of a seeded experiment; streams keep the
/// problem matrices identical while the sample splits vary independently.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream indices used by [`build_problem`] and [`sample_dataset`].
pub mod streams {
    pub const PROBLEM: u64 = 0;
    pub const TRAIN: u64 = 1;
    pub const VALIDATION: u64 = 2;
    pub const TEST: u64 = 3;
}

fn check_orthogonal<T: Scalar>(v: &Array2<T>) -> Result<()> {
    let d = v.nrows();
    if d != v.ncols() {
        return Err(Error::DimensionMismatch {
            context: "eigvecs: square matrix",
            left: v.nrows(),
            right: v.ncols(),
        });
    }
    let g = v.t().dot(v);
    let tol = T::from_f64(1e-8);
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { T::one() } else { T::zero() };
            if (g[[i, j]] - want).abs() > tol {
                return Err(Error::invalid("eigvecs", "matrix is not orthogonal"));
            }
        }
    }
    Ok(())
}

/// Builds `V diag(mu) V^T` from a profile; `eigvecs = None` keeps the
/// diagonal form.
pub fn build_covariance<T: Scalar>(
    profile: &SpectralProfile,
    eigvecs: Option<&Array2<T>>,
) -> Result<Array2<T>> {
    let mu = profile.eigenvalues()?.mapv(T::from_f64);
    match eigvecs {
        None => Ok(Array2::from_diag(&mu)),
        Some(v) => {
            if v.nrows() != profile.dim {
                return Err(Error::DimensionMismatch {
                    context: "build_covariance: eigvecs vs profile dim",
                    left: v.nrows(),
                    right: profile.dim,
                });
            }
            check_orthogonal(v)?;
            let scaled = v * &mu.view().insert_axis(ndarray::Axis(0));
            Ok(crate::linalg::symmetrize(&scaled.dot(&v.t()).view()))
        }
    }
}

/// `H = V diag(s) U^T`, i.e. `sum_i s_i v_i (x) u_i` over the given bases.
pub fn h_from_singular_values<T: Scalar>(
    singular: &Array1<T>,
    u_basis: &Array2<T>,
    v_basis: &Array2<T>,
) -> Result<Array2<T>> {
    let d = singular.len();
    if u_basis.dim() != (d, d) || v_basis.dim() != (d, d) {
        return Err(Error::DimensionMismatch {
            context: "h_from_singular_values: basis size",
            left: u_basis.nrows().max(v_basis.nrows()),
            right: d,
        });
    }
    let scaled = v_basis * &singular.view().insert_axis(ndarray::Axis(0));
    Ok(scaled.dot(&u_basis.t()))
}

/// Builds the signal map `H` for the given mode.
///
/// Modes that need an input basis aligned with `C` (diagonal, spectral) take
/// the descending eigenvectors of `C` and draw a Haar-random output basis
/// from `rng`; the Gaussian modes consume `rng` for `H_0`.
pub fn build_h<T: Scalar, R: Rng + ?Sized>(
    mode: &HMode,
    c: &Array2<T>,
    rng: &mut R,
) -> Result<Array2<T>> {
    let d = c.nrows();
    if d != c.ncols() {
        return Err(Error::DimensionMismatch {
            context: "build_h: square C",
            left: c.nrows(),
            right: c.ncols(),
        });
    }
    let gaussian = |rng: &mut R| {
        let mut h0 = Array2::<T>::zeros((d, d));
        h0.mapv_inplace(|_| T::standard_normal(rng));
        h0
    };
    match mode {
        HMode::GaussianH0 => Ok(gaussian(rng)),
        HMode::Powered { gamma } => {
            if *gamma < 0.0 {
                return Err(Error::invalid("gamma", "power must be >= 0"));
            }
            let h0 = gaussian(rng);
            let base = h0.dot(&c.dot(&h0.t()));
            let powered = spectral::matrix_power(base.view(), *gamma, None)?;
            Ok(powered.dot(&h0))
        }
        HMode::Diagonal { rate } => {
            let singular =
                SpectralProfile::polynomial(d, *rate, 1.0).eigenvalues()?.mapv(T::from_f64);
            let u = spectral::eigh(c.view())?.eigenvectors;
            let v = spectral::haar_orthogonal(d, rng)?;
            h_from_singular_values(&singular, &u, &v)
        }
        HMode::Spectral { profile } => {
            let singular = profile.eigenvalues()?.mapv(|m| T::from_f64(m.sqrt()));
            let u = spectral::eigh(c.view())?.eigenvectors;
            let v = spectral::haar_orthogonal(d, rng)?;
            h_from_singular_values(&singular, &u, &v)
        }
    }
}

/// The realized matrices of a synthetic problem, with the square roots
/// needed for sampling cached.
#[derive(Debug, Clone)]
pub struct SyntheticProblem<T: Scalar> {
    pub c: Array2<T>,
    pub h: Array2<T>,
    pub e: Array2<T>,
    pub c_sqrt: Array2<T>,
    pub e_sqrt: Array2<T>,
    pub x_law: XLaw,
}

impl<T: Scalar> SyntheticProblem<T> {
    /// Signal second-moment matrix `M = H Sigma_x H^T` under the input law.
    pub fn signal_second_moment(&self) -> Array2<T> {
        match self.x_law {
            XLaw::StandardNormal => crate::linalg::symmetrize(&self.h.dot(&self.h.t()).view()),
            XLaw::NormalWithCovC => {
                crate::linalg::symmetrize(&self.h.dot(&self.c.dot(&self.h.t())).view())
            }
        }
    }

    /// Clean targets for explicit inputs: rows `h^*(x_i) = H x_i`.
    pub fn clean_targets(&self, x: &Array2<T>) -> Array2<T> {
        x.dot(&self.h.t())
    }
}

/// Realizes the problem matrices from the spec, deterministically in
/// `spec.seed` (problem stream). The same matrices result for every sample
/// size, so learning curves vary only the data.
pub fn build_problem<T: Scalar>(spec: &SyntheticProblemSpec) -> Result<SyntheticProblem<T>> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, streams::PROBLEM);
    let v_c: Array2<T> = spectral::haar_orthogonal(spec.d, &mut rng)?;
    let c = build_covariance(&spec.c_profile, Some(&v_c))?;
    let h = build_h(&spec.h_mode, &c, &mut rng)?;
    let v_e: Array2<T> = spectral::haar_orthogonal(spec.d, &mut rng)?;
    let e = build_covariance(&spec.e_profile, Some(&v_e))?;
    let c_sqrt = spectral::matrix_power(c.view(), 0.5, None)?;
    let e_sqrt = spectral::matrix_power(e.view(), 0.5, None)?;
    Ok(SyntheticProblem {
        c,
        h,
        e,
        c_sqrt,
        e_sqrt,
        x_law: spec.x_law,
    })
}

/// One sampled split.
#[derive(Debug, Clone)]
pub struct SyntheticDataset<T: Scalar> {
    pub x: Array2<T>,
    pub y: Array2<T>,
    /// Noise-free targets `H x_i`, for denoised baselines and clean-error
    /// evaluation.
    pub y_clean: Array2<T>,
}

/// Samples `n` rows of `(x, y = Hx + eps, Hx)` from the problem, using the
/// RNG stream identified by `(seed, stream)`.
///
/// Row generation order is fixed, so identical `(problem, n, seed, stream)`
/// reproduce bitwise-identical arrays.
pub fn sample_dataset<T: Scalar>(
    problem: &SyntheticProblem<T>,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<SyntheticDataset<T>> {
    if n == 0 {
        return Err(Error::EmptyInput("sample_dataset n"));
    }
    let d = problem.h.ncols();
    let mut rng = stream_rng(seed, stream);
    let mut g_x = Array2::<T>::zeros((n, d));
    g_x.mapv_inplace(|_| T::standard_normal(&mut rng));
    let x = match problem.x_law {
        XLaw::StandardNormal => g_x,
        // x = C^{1/2} g row-wise; the symmetric root keeps X = G S valid.
        XLaw::NormalWithCovC => g_x.dot(&problem.c_sqrt),
    };
    let mut g_e = Array2::<T>::zeros((n, d));
    g_e.mapv_inplace(|_| T::standard_normal(&mut rng));
    let y_clean = problem.clean_targets(&x);
    let y = &y_clean + &g_e.dot(&problem.e_sqrt);
    Ok(SyntheticDataset { x, y, y_clean })
}

// ---------------------------------------------------------------------------
// Exponent calculus
// ---------------------------------------------------------------------------

/// Closed-form regularity exponents of the polynomial-decay construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionExponents {
    /// Eigenvalue-summability exponent of the signal second moment.
    pub alpha: f64,
    /// Source-regularity exponent of the regression stage.
    pub beta: f64,
    /// Noise-alignment exponent; meaningful in `[0, 1]`.
    pub gamma: f64,
    /// Decay rate of `mu_p(M)`: `s = 2 r_h + r_c`.
    pub s: f64,
    /// False when `r_e > 2 r_h + r_c` pushed `gamma` below zero; the value
    /// is reported unclamped so callers can see the violation.
    pub gamma_in_range: bool,
}

/// Exponents realized by `mu_p(C) = p^{-r_c}`, `H = sum_i i^{-r_h} v_i (x) u_i`,
/// `mu_p(E) = p^{-r_e}`:
/// `alpha = 2/(2 r_h + r_c)`, `beta = r_c/(2 r_h + r_c)`,
/// `gamma = 1 - r_e/(2 r_h + r_c)`.
pub fn compute_assumption_exponents(
    r_c: f64,
    r_h: f64,
    r_e: f64,
) -> Result<AssumptionExponents> {
    for (name, v) in [("r_c", r_c), ("r_h", r_h), ("r_e", r_e)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(name, "rates must be finite and > 0"));
        }
    }
    let s = 2.0 * r_h + r_c;
    let gamma = 1.0 - r_e / s;
    Ok(AssumptionExponents {
        alpha: 2.0 / s,
        beta: r_c / s,
        gamma,
        s,
        gamma_in_range: (0.0..=1.0).contains(&gamma),
    })
}

/// Source-regularity exponent induced by the powered construction:
/// `beta = 1/(2 gamma + 1)`.
pub fn gamma_to_beta(gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma", "power must be finite and >= 0"));
    }
    Ok(1.0 / (2.0 * gamma + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn spec_with(d: usize, h_mode: HMode, x_law: XLaw, seed: u64) -> SyntheticProblemSpec {
        SyntheticProblemSpec {
            d,
            n_train: 10,
            n_val: 10,
            n_test: 10,
            c_profile: SpectralProfile::polynomial(d, 2.0, 1.0),
            h_mode,
            e_profile: SpectralProfile::explicit(vec![0.1; d]),
            x_law,
            seed,
        }
    }

    #[test]
    fn polynomial_profile_diagonal_case() {
        let profile = SpectralProfile::polynomial(3, 2.0, 1.0);
        let c: Array2<f64> = build_covariance(&profile, None).unwrap();
        let expected = Array2::from_diag(&array![1.0, 0.25, 1.0 / 9.0]);
        for (a, b) in c.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn finite_rank_profile_trace() {
        let profile = SpectralProfile::finite_rank(250, 5, 1.0);
        let c: Array2<f64> = build_covariance(&profile, None).unwrap();
        let trace: f64 = c.diag().sum();
        assert_abs_diff_eq!(trace, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn rotated_covariance_keeps_profile_eigenvalues() {
        let d = 40;
        let profile = SpectralProfile::polynomial(d, 1.5, 2.0);
        let mut rng = stream_rng(5, 0);
        let v: Array2<f64> = spectral::haar_orthogonal(d, &mut rng).unwrap();
        let c = build_covariance(&profile, Some(&v)).unwrap();
        let dec = spectral::eigh(c.view()).unwrap();
        let want = profile.eigenvalues().unwrap();
        for p in 0..d {
            assert_abs_diff_eq!(dec.eigenvalues[p], want[p], epsilon = 1e-8 * want[0]);
        }
    }

    #[test]
    fn explicit_profile_validation() {
        assert!(SpectralProfile::explicit(vec![1.0, 2.0]).eigenvalues().is_err());
        assert!(SpectralProfile::explicit(vec![1.0, -0.1]).eigenvalues().is_err());
        let ok = SpectralProfile::explicit(vec![2.0, 1.0, 1.0]);
        assert_eq!(ok.eigenvalues().unwrap(), array![2.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_h_with_identity_bases() {
        let d = 4;
        let singular = SpectralProfile::polynomial(d, 1.25, 1.0)
            .eigenvalues()
            .unwrap();
        let eye = Array2::<f64>::eye(d);
        let h = h_from_singular_values(&singular, &eye, &eye).unwrap();
        let expected = [1.0, 2f64.powf(-1.25), 3f64.powf(-1.25), 4f64.powf(-1.25)];
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { expected[i] } else { 0.0 };
                assert_abs_diff_eq!(h[[i, j]], want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn powered_gamma_zero_reduces_to_h0_on_full_rank() {
        // (H0 C H0^T)^0 is the range projector, which is the identity when
        // the base matrix has full rank; H then equals H0.
        let d = 8;
        let c: Array2<f64> =
            build_covariance(&SpectralProfile::polynomial(d, 1.0, 1.0), None).unwrap();
        let mut rng_a = stream_rng(7, 0);
        let h0 = build_h(&HMode::GaussianH0, &c, &mut rng_a).unwrap();
        let mut rng_b = stream_rng(7, 0);
        let h = build_h(&HMode::Powered { gamma: 0.0 }, &c, &mut rng_b).unwrap();
        for (a, b) in h.iter().zip(h0.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn powered_gamma_one_shows_steeper_source_profile() {
        // The measured source-condition slope of the population second
        // moment must sit near -1/(2 gamma + 1) = -1/3.
        let d = 50;
        let spec = spec_with(
            d,
            HMode::Powered { gamma: 1.0 },
            XLaw::StandardNormal,
            11,
        );
        let problem: SyntheticProblem<f64> = build_problem(&spec).unwrap();
        let m = problem.h.dot(&problem.c.dot(&problem.h.t()));
        let dec = spectral::eigh(m.view()).unwrap();
        let grid = spectral::default_t_grid(dec.max_eigenvalue(), 30).unwrap();
        let profile =
            spectral::source_condition_profile(&dec, problem.h.view(), grid.view()).unwrap();
        let fit = spectral::fit_loglog_slope(grid.view(), profile.view(), None).unwrap();
        let want = -gamma_to_beta(1.0).unwrap();
        assert!(
            (fit.slope - want).abs() < 0.15,
            "slope {} vs {want}",
            fit.slope
        );
    }

    #[test]
    fn spectral_h_mode_realizes_requested_spectrum() {
        let d = 30;
        let profile = SpectralProfile::finite_rank(d, 5, 2.0);
        let mut spec = spec_with(
            d,
            HMode::Spectral { profile: profile.clone() },
            XLaw::StandardNormal,
            13,
        );
        spec.c_profile = SpectralProfile::explicit(vec![1.0; d]);
        let problem: SyntheticProblem<f64> = build_problem(&spec).unwrap();
        let hht = problem.h.dot(&problem.h.t());
        let dec = spectral::eigh(hht.view()).unwrap();
        let want = profile.eigenvalues().unwrap();
        for p in 0..d {
            assert_abs_diff_eq!(dec.eigenvalues[p], want[p], epsilon = 1e-8 * want[0]);
        }
    }

    #[test]
    fn zero_noise_means_clean_targets() {
        let d = 6;
        let mut spec = spec_with(d, HMode::GaussianH0, XLaw::NormalWithCovC, 17);
        spec.e_profile = SpectralProfile::explicit(vec![0.0; d]);
        let problem: SyntheticProblem<f64> = build_problem(&spec).unwrap();
        let data = sample_dataset(&problem, 50, spec.seed, streams::TRAIN).unwrap();
        assert_eq!(data.y, data.y_clean);
    }

    #[test]
    fn zero_signal_leaves_pure_noise_with_covariance_e() {
        let d = 4;
        let mut spec = spec_with(d, HMode::GaussianH0, XLaw::StandardNormal, 19);
        spec.e_profile = SpectralProfile::explicit(vec![0.5, 0.3, 0.2, 0.1]);
        let mut problem: SyntheticProblem<f64> = build_problem(&spec).unwrap();
        problem.h.fill(0.0);
        let n = 10_000;
        let data = sample_dataset(&problem, n, spec.seed, streams::TRAIN).unwrap();
        assert_eq!(data.y_clean, Array2::zeros((n, d)));
        let emp = data.y.t().dot(&data.y) / n as f64;
        for i in 0..d {
            for j in 0..d {
                let want = problem.e[[i, j]];
                let stderr =
                    ((problem.e[[i, i]] * problem.e[[j, j]] + want * want) / n as f64).sqrt();
                assert!(
                    (emp[[i, j]] - want).abs() <= 5.0 * stderr,
                    "cov[{i},{j}] {} vs {want}",
                    emp[[i, j]]
                );
            }
        }
        // Mean noise vector is centered.
        let mean = data.y.mean_axis(ndarray::Axis(0)).unwrap();
        let norm = mean.dot(&mean).sqrt();
        let trace_e: f64 = problem.e.diag().sum();
        assert!(norm <= 3.0 * (trace_e / n as f64).sqrt(), "mean norm {norm}");
    }

    #[test]
    fn sampling_is_bitwise_reproducible() {
        let spec = spec_with(5, HMode::GaussianH0, XLaw::NormalWithCovC, 23);
        let p1: SyntheticProblem<f64> = build_problem(&spec).unwrap();
        let p2: SyntheticProblem<f64> = build_problem(&spec).unwrap();
        assert_eq!(p1.h, p2.h);
        assert_eq!(p1.c, p2.c);
        assert_eq!(p1.e, p2.e);
        let d1 = sample_dataset(&p1, 20, spec.seed, streams::TEST).unwrap();
        let d2 = sample_dataset(&p2, 20, spec.seed, streams::TEST).unwrap();
        assert_eq!(d1.x, d2.x);
        assert_eq!(d1.y, d2.y);
    }

    #[test]
    fn distinct_streams_give_distinct_samples() {
        let spec = spec_with(5, HMode::GaussianH0, XLaw::StandardNormal, 29);
        let problem: SyntheticProblem<f64> = build_problem(&spec).unwrap();
        let train = sample_dataset(&problem, 20, spec.seed, streams::TRAIN).unwrap();
        let val = sample_dataset(&problem, 20, spec.seed, streams::VALIDATION).unwrap();
        assert_ne!(train.x, val.x);
    }

    #[test]
    fn empirical_input_covariance_converges() {
        let d = 20;
        let n = 50 * d;
        let spec = spec_with(d, HMode::GaussianH0, XLaw::NormalWithCovC, 31);
        let problem: SyntheticProblem<f64> = build_problem(&spec).unwrap();
        let data = sample_dataset(&problem, n, spec.seed, streams::TRAIN).unwrap();
        let emp = data.x.t().dot(&data.x) / n as f64;
        let diff = &emp - &problem.c;
        let dec = spectral::eigh(diff.view()).unwrap();
        let op_norm = dec
            .eigenvalues
            .iter()
            .fold(0.0_f64, |m, &v| m.max(v.abs()));
        let budget = 5.0 * (d as f64 / n as f64).sqrt();
        assert!(op_norm <= budget, "operator deviation {op_norm} > {budget}");
    }

    #[test]
    fn exponent_formulas_are_exact() {
        let e = compute_assumption_exponents(1.5, 1.25, 8.0 / 7.0).unwrap();
        assert_eq!(e.alpha, 0.5);
        assert_eq!(e.beta, 0.375);
        assert_eq!(e.gamma, 5.0 / 7.0);
        assert_eq!(e.s, 4.0);
        assert!(e.gamma_in_range);

        let boundary = compute_assumption_exponents(1.0, 1.0, 3.0).unwrap();
        assert_eq!(boundary.gamma, 0.0);
        assert!(boundary.gamma_in_range);

        let violated = compute_assumption_exponents(1.0, 1.0, 6.0).unwrap();
        assert!(violated.gamma < 0.0);
        assert!(!violated.gamma_in_range);
    }

    #[test]
    fn signal_spectrum_decays_at_combined_rate() {
        // M = H C H^T with aligned bases must decay like p^{-(2 r_h + r_c)}.
        let d = 120;
        let (r_c, r_h) = (1.5, 1.25);
        let mut spec = spec_with(d, HMode::Diagonal { rate: r_h }, XLaw::NormalWithCovC, 37);
        spec.c_profile = SpectralProfile::polynomial(d, r_c, 1.0);
        let problem: SyntheticProblem<f64> = build_problem(&spec).unwrap();
        let m = problem.signal_second_moment();
        let dec = spectral::eigh(m.view()).unwrap();
        let idx = Array1::from_iter((1..=d).map(|p| p as f64));
        let fit = spectral::fit_loglog_slope(idx.view(), dec.eigenvalues.view(), None).unwrap();
        let s = 2.0 * r_h + r_c;
        assert!(
            (fit.slope + s).abs() < 0.05 * s,
            "slope {} vs -{s}",
            fit.slope
        );
    }

    #[test]
    fn gamma_to_beta_cases() {
        assert_eq!(gamma_to_beta(0.0).unwrap(), 1.0);
        assert_eq!(gamma_to_beta(0.5).unwrap(), 0.5);
        assert_eq!(gamma_to_beta(1.5).unwrap(), 0.25);
        assert!(gamma_to_beta(-0.1).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut bad = spec_with(5, HMode::Powered { gamma: -1.0 }, XLaw::StandardNormal, 41);
        assert!(build_problem::<f64>(&bad).is_err());
        bad.h_mode = HMode::GaussianH0;
        bad.c_profile = SpectralProfile::polynomial(4, 2.0, 1.0);
        assert!(build_problem::<f64>(&bad).is_err());
    }
}

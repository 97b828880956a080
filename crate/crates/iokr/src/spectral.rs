//! Symmetric eigendecompositions, spectral matrix functions, and the
//! log-log regularity diagnostics built on them.
//!
//! Everything here treats matrices as self-adjoint operators: inputs are
//! symmetrized exactly before factorization, eigenvalues are reported in
//! descending order, and eigenvector signs follow a fixed convention so that
//! repeated runs produce identical output.

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

/// Relative eigenvalue cutoff used when inverting or fractionally powering
/// a positive semi-definite matrix.
pub const DEFAULT_REL_CUTOFF: f64 = 1e-12;

/// Number of points in the default shift grid of [`default_t_grid`].
pub const DEFAULT_T_GRID_LEN: usize = 30;

/// Index-fraction window (inclusive) used by default when fitting log-log
/// slopes: the middle 60% of the grid, away from both saturated ends.
pub const DEFAULT_SLOPE_WINDOW: (f64, f64) = (0.2, 0.8);

// ---------------------------------------------------------------------------
// Eigendecomposition
// ---------------------------------------------------------------------------

/// Eigenvalues (descending) and matching orthonormal eigenvector columns of a
/// symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition<T: Scalar> {
    pub eigenvalues: Array1<T>,
    pub eigenvectors: Array2<T>,
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest eigenvalue (first entry of the descending list).
    pub fn max_eigenvalue(&self) -> T {
        self.eigenvalues[0]
    }

    /// Reassembles `V diag(f(lambda)) V^T`, exactly symmetrized.
    pub fn map_eigenvalues(&self, f: impl Fn(T) -> T) -> Array2<T> {
        let scaled = &self.eigenvectors
            * &self
                .eigenvalues
                .mapv(f)
                .insert_axis(Axis(0))
                .broadcast(self.eigenvectors.dim())
                .expect("broadcast eigenvalue row");
        let m = scaled.dot(&self.eigenvectors.t());
        linalg::symmetrize(&m.view())
    }
}

/// Fixes each eigenvector's sign so its first component of non-negligible
/// magnitude is positive; makes the decomposition reproducible across runs.
fn fix_column_signs<T: Scalar>(vectors: &mut Array2<T>) {
    for mut col in vectors.columns_mut() {
        let max_abs = col.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if max_abs == T::zero() {
            continue;
        }
        let tol = T::from_f64(1e-12) * max_abs;
        let leading = col.iter().find(|&&x| x.abs() > tol).copied();
        if let Some(x) = leading {
            if x < T::zero() {
                col.mapv_inplace(|v| -v);
            }
        }
    }
}

/// Symmetric eigendecomposition. The input is symmetrized exactly via
/// `(A + A^T)/2` before factorization, so numerically symmetric matrices are
/// accepted; eigenvalues come back in descending order.
pub fn eigh<T: Scalar>(a: ArrayView2<'_, T>) -> Result<SpectralDecomposition<T>> {
    if a.nrows() == 0 {
        return Err(Error::EmptyInput("eigh"));
    }
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "eigh: square matrix",
            left: a.nrows(),
            right: a.ncols(),
        });
    }
    linalg::ensure_finite(&a, "eigh input")?;
    let sym = linalg::symmetrize(&a);
    let (vals_asc, vecs_asc) = linalg::sym_eig_asc(&sym.view())?;
    // Reverse to descending order.
    let n = vals_asc.len();
    let eigenvalues = Array1::from_iter(vals_asc.iter().rev().copied());
    let mut eigenvectors = Array2::zeros((n, n));
    for (dst, src) in (0..n).zip((0..n).rev()) {
        eigenvectors.column_mut(dst).assign(&vecs_asc.column(src));
    }
    fix_column_signs(&mut eigenvectors);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

// ---------------------------------------------------------------------------
// Spectral matrix functions
// ---------------------------------------------------------------------------

/// Real matrix power of a symmetric positive semi-definite matrix.
///
/// Eigenvalues at or below `rel_cutoff * max_eigenvalue` (and any negative
/// round-off) are treated as exact zeros and contribute nothing, which turns
/// negative powers into pseudo-inverse powers; `0^0` counts as `0` here so a
/// zero power projects onto the numerical range rather than returning `I`.
pub fn matrix_power<T: Scalar>(
    a: ArrayView2<'_, T>,
    power: f64,
    rel_cutoff: Option<f64>,
) -> Result<Array2<T>> {
    let cutoff = rel_cutoff.unwrap_or(DEFAULT_REL_CUTOFF);
    if !(cutoff >= 0.0) {
        return Err(Error::invalid("rel_cutoff", "must be non-negative"));
    }
    let dec = eigh(a)?;
    let lmax = dec.max_eigenvalue().max(T::zero());
    let thresh = T::from_f64(cutoff) * lmax;
    Ok(dec.map_eigenvalues(|l| {
        if l <= thresh {
            T::zero()
        } else {
            l.powf(T::from_f64(power))
        }
    }))
}

// ---------------------------------------------------------------------------
// Shifted whitened norms and regularity profiles
// ---------------------------------------------------------------------------

/// Squared operator norm of the shift-whitened map,
/// `lambda_max( H^T (M + tI)^{-1} H )`.
///
/// `m` is the decomposition of the symmetric PSD matrix `M`. The computation
/// rotates `H` into the eigenbasis, scales rows by `1/sqrt(lambda_i + t)`,
/// and takes the largest eigenvalue of the smaller-side Gram matrix.
pub fn shifted_whitened_norm<T: Scalar>(
    m: &SpectralDecomposition<T>,
    h: ArrayView2<'_, T>,
    t: T,
) -> Result<T> {
    if h.nrows() != m.dim() {
        return Err(Error::DimensionMismatch {
            context: "shifted_whitened_norm: H rows vs M dim",
            left: h.nrows(),
            right: m.dim(),
        });
    }
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::invalid("t", "shift must be strictly positive and finite"));
    }
    linalg::ensure_finite(&h, "shifted_whitened_norm H")?;
    let mut b = m.eigenvectors.t().dot(&h);
    for (i, mut row) in b.outer_iter_mut().enumerate() {
        // Negative round-off eigenvalues are floored at zero before shifting.
        let shifted = m.eigenvalues[i].max(T::zero()) + t;
        let scale = T::one() / shifted.sqrt();
        row.mapv_inplace(|x| x * scale);
    }
    // Largest squared singular value via the smaller Gram matrix.
    let gram = if b.ncols() <= b.nrows() {
        b.t().dot(&b)
    } else {
        b.dot(&b.t())
    };
    let dec = eigh(gram.view())?;
    Ok(dec.max_eigenvalue().max(T::zero()))
}

/// Evaluates `t -> lambda_max(H^T (M + tI)^{-1} H)` over a shift grid.
///
/// The decay rate of this profile as `t` shrinks measures how well the rows
/// of `H` align with the leading eigenspaces of `M`.
pub fn source_condition_profile<T: Scalar>(
    m: &SpectralDecomposition<T>,
    h: ArrayView2<'_, T>,
    t_grid: ArrayView1<'_, T>,
) -> Result<Array1<T>> {
    if t_grid.is_empty() {
        return Err(Error::EmptyInput("t_grid"));
    }
    let mut out = Array1::zeros(t_grid.len());
    for (i, &t) in t_grid.iter().enumerate() {
        out[i] = shifted_whitened_norm(m, h, t)?;
    }
    Ok(out)
}

/// Log-spaced grid between `lo` and `hi` (both strictly positive), returned
/// in descending order to match the shift-profile convention.
pub fn log_spaced_grid<T: Scalar>(lo: T, hi: T, n_points: usize) -> Result<Array1<T>> {
    if !(lo > T::zero()) || !lo.is_finite() || !hi.is_finite() || !(hi > lo) {
        return Err(Error::invalid("grid bounds", "need 0 < lo < hi, both finite"));
    }
    if n_points < 2 {
        return Err(Error::invalid("n_points", "grid needs at least two points"));
    }
    let (lo, hi) = (lo.to_f64().ln(), hi.to_f64().ln());
    let step = (hi - lo) / (n_points - 1) as f64;
    Ok(Array1::from_iter(
        (0..n_points).map(|i| T::from_f64((hi - step * i as f64).exp())),
    ))
}

/// Log-spaced shift grid from `1e-8 * scale` up to `scale`, returned in
/// descending order; `scale` is typically the largest eigenvalue of `M`.
pub fn default_t_grid<T: Scalar>(scale: T, n_points: usize) -> Result<Array1<T>> {
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(Error::invalid("scale", "must be strictly positive and finite"));
    }
    log_spaced_grid(T::from_f64(scale.to_f64() * 1e-8), scale, n_points)
}

/// The `q`-quantile (`0 < q <= 1`) of the strictly positive part of a
/// spectrum, counted from the smallest positive eigenvalue upward.
///
/// Useful as a shift-grid floor: below the bulk of the spectrum the
/// whitened-norm profile of a finite-dimensional operator saturates and
/// carries no decay information, so grids floored at, say, the median
/// positive eigenvalue (`q = 0.5`) probe only the resolved part.
pub fn spectrum_quantile<T: Scalar>(dec: &SpectralDecomposition<T>, q: f64) -> Result<T> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid("q", "quantile must lie in (0, 1]"));
    }
    let floor = dec.max_eigenvalue() * T::from_f64(DEFAULT_REL_CUTOFF);
    let k = dec.eigenvalues.iter().take_while(|&&v| v > floor.max(T::zero())).count();
    if k == 0 {
        return Err(Error::invalid("spectrum", "no strictly positive eigenvalues"));
    }
    let rank_from_top = k - (q * k as f64).ceil().max(1.0) as usize;
    Ok(dec.eigenvalues[rank_from_top.min(k - 1)])
}

// ---------------------------------------------------------------------------
// Log-log slope fitting
// ---------------------------------------------------------------------------

/// Least-squares line through `(ln x, ln y)` restricted to a window of the
/// grid, with the fraction of variance it explains.
#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_used: usize,
}

/// Fits `ln y ~ slope * ln x + intercept` by least squares over the points
/// whose index fraction `i/(len-1)` lies inside `window` (inclusive). The
/// default window drops both ends of the grid, where profiles saturate.
pub fn fit_loglog_slope<T: Scalar>(
    x: ArrayView1<'_, T>,
    y: ArrayView1<'_, T>,
    window: Option<(f64, f64)>,
) -> Result<SlopeFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "fit_loglog_slope",
            left: x.len(),
            right: y.len(),
        });
    }
    let (lo, hi) = window.unwrap_or(DEFAULT_SLOPE_WINDOW);
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::invalid("window", "need 0 <= lo <= hi <= 1"));
    }
    let m = x.len();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for i in 0..m {
        let frac = if m == 1 { 0.0 } else { i as f64 / (m - 1) as f64 };
        if frac < lo || frac > hi {
            continue;
        }
        let (xi, yi) = (x[i].to_f64(), y[i].to_f64());
        if !(xi > 0.0) || !(yi > 0.0) || !xi.is_finite() || !yi.is_finite() {
            return Err(Error::invalid(
                "samples",
                "log-log fit needs strictly positive finite values",
            ));
        }
        pts.push((xi.ln(), yi.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::invalid("window", "fewer than two points fall in the window"));
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(px, py) in &pts {
        sxx += (px - mean_x) * (px - mean_x);
        sxy += (px - mean_x) * (py - mean_y);
        syy += (py - mean_y) * (py - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::invalid("samples", "all x values coincide; slope undefined"));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        n_used: pts.len(),
    })
}

// ---------------------------------------------------------------------------
// Random orthogonal matrices
// ---------------------------------------------------------------------------

/// Draws a `d x d` orthogonal matrix from the Haar (rotation-invariant)
/// distribution: QR of a standard Gaussian matrix with the sign ambiguity
/// fixed by the signs of `diag(R)`.
pub fn haar_orthogonal<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Array2<T>> {
    if d == 0 {
        return Err(Error::EmptyInput("haar_orthogonal"));
    }
    let mut g = Array2::zeros((d, d));
    g.mapv_inplace(|_: T| T::standard_normal(rng));
    linalg::qr_q_signfixed(&g.view())
}

//! Thin wrappers over the LAPACK hooks in [`crate::scalar`]: buffer layout
//! conversion, raw symmetric eigendecomposition, and sign-fixed QR.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder};

/// Copies a 2-D view into a freshly allocated column-major buffer.
pub(crate) fn to_col_major<T: Scalar>(a: &ArrayView2<T>) -> Vec<T> {
    let (m, n) = a.dim();
    let mut buf = Vec::with_capacity(m * n);
    for j in 0..n {
        for i in 0..m {
            buf.push(a[[i, j]]);
        }
    }
    buf
}

/// Interprets a column-major buffer as an owned standard-layout matrix.
pub(crate) fn from_col_major<T: Scalar>(m: usize, n: usize, buf: Vec<T>) -> Array2<T> {
    let f = Array2::from_shape_vec((m, n).f(), buf).expect("column-major buffer shape");
    f.as_standard_layout().into_owned()
}

/// Errors out if any entry is NaN or infinite.
pub(crate) fn ensure_finite<T: Scalar>(a: &ArrayView2<T>, context: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

/// (A + A^T)/2; exact symmetry regardless of round-off in A.
pub(crate) fn symmetrize<T: Scalar>(a: &ArrayView2<T>) -> Array2<T> {
    let n = a.nrows();
    let half = T::from_f64(0.5);
    let mut s = Array2::zeros((n, n));
    for i in 0..n {
        s[[i, i]] = a[[i, i]];
        for j in (i + 1)..n {
            let v = (a[[i, j]] + a[[j, i]]) * half;
            s[[i, j]] = v;
            s[[j, i]] = v;
        }
    }
    s
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending and
/// eigenvectors in columns. The input is consumed as-is: callers must pass an
/// exactly symmetric matrix.
pub(crate) fn sym_eig_asc<T: Scalar>(a: &ArrayView2<T>) -> Result<(Array1<T>, Array2<T>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "sym_eig_asc: square matrix required",
            left: n,
            right: a.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyInput("sym_eig_asc"));
    }
    // Symmetric input: row-major data read column-major is the transpose,
    // which is the same matrix.
    let mut buf = to_col_major(a);
    let mut w = vec![T::zero(); n];
    T::syevd(n, &mut buf, &mut w)?;
    Ok((Array1::from_vec(w), from_col_major(n, n, buf)))
}

/// Q factor of the QR decomposition of a square matrix, each column scaled by
/// the sign of the corresponding diagonal entry of R.
pub(crate) fn qr_q_signfixed<T: Scalar>(g: &ArrayView2<T>) -> Result<Array2<T>> {
    let (m, n) = g.dim();
    if m < n {
        return Err(Error::DimensionMismatch {
            context: "qr_q_signfixed: m >= n required",
            left: m,
            right: n,
        });
    }
    let mut buf = to_col_major(g);
    let r_diag = T::qr_q_inplace(m, n, &mut buf)?;
    for (j, r) in r_diag.iter().enumerate() {
        if *r < T::zero() {
            for i in 0..m {
                buf[j * m + i] = -buf[j * m + i];
            }
        }
    }
    Ok(from_col_major(m, n, buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn col_major_round_trip() {
        let a = array![[1.0_f64, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let buf = to_col_major(&a.view());
        assert_eq!(buf, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let back = from_col_major(2, 3, buf);
        assert_eq!(back, a);
    }

    #[test]
    fn sym_eig_recovers_diagonal() {
        let a = array![[3.0_f64, 0.0], [0.0, 7.0]];
        let (w, v) = sym_eig_asc(&a.view()).unwrap();
        assert_abs_diff_eq!(w[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 7.0, epsilon = 1e-12);
        // Eigenvectors are +-e1, +-e2 in columns.
        assert_abs_diff_eq!(v[[0, 0]].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[[1, 1]].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sym_eig_reconstructs_random_matrix() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 12;
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        let (w, v) = sym_eig_asc(&a.view()).unwrap();
        let recon = v.dot(&Array2::from_diag(&w)).dot(&v.t());
        for i in 0..n {
            for j in 0..n {
                assert_abs_diff_eq!(recon[[i, j]], a[[i, j]], epsilon = 1e-10);
            }
        }
        // Ascending order.
        for k in 1..n {
            assert!(w[k] >= w[k - 1]);
        }
    }

    #[test]
    fn qr_sign_fix_gives_orthonormal_q() {
        use rand::SeedableRng;
        use crate::scalar::Scalar;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let d = 8;
        let mut g = Array2::<f64>::zeros((d, d));
        g.mapv_inplace(|_| f64::standard_normal(&mut rng));
        let q = qr_q_signfixed(&g.view()).unwrap();
        let qtq = q.t().dot(&q);
        for i in 0..d {
            for j in 0..d {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(qtq[[i, j]], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn f32_eig_works() {
        let a = array![[2.0_f32, 1.0], [1.0, 2.0]];
        let (w, _) = sym_eig_asc(&a.view()).unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(w[1], 3.0, epsilon = 1e-5);
    }
}

//! Scalar abstraction: the crate is generic over `f32`/`f64` through this
//! trait, which bundles the numeric bounds used everywhere with per-type
//! dispatch to the LAPACK routines backing the eigensolver and QR paths.

use crate::error::{Error, Result};
use rand::Rng;

// Fortran LAPACK entry points (column-major, provided by the linked BLAS
// library; see build.rs).
extern "C" {
    fn dsyevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn ssyevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f32,
        lda: *const i32,
        w: *mut f32,
        work: *mut f32,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn dgeqrf_(
        m: *const i32,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        tau: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
    fn sgeqrf_(
        m: *const i32,
        n: *const i32,
        a: *mut f32,
        lda: *const i32,
        tau: *mut f32,
        work: *mut f32,
        lwork: *const i32,
        info: *mut i32,
    );
    fn dorgqr_(
        m: *const i32,
        n: *const i32,
        k: *const i32,
        a: *mut f64,
        lda: *const i32,
        tau: *const f64,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
    fn sorgqr_(
        m: *const i32,
        n: *const i32,
        k: *const i32,
        a: *mut f32,
        lda: *const i32,
        tau: *const f32,
        work: *mut f32,
        lwork: *const i32,
        info: *mut i32,
    );
}

/// Floating-point scalar usable throughout the crate.
///
/// Implemented for `f32` and `f64`. The LAPACK hooks operate on column-major
/// buffers, mirroring the Fortran calling convention.
pub trait Scalar:
    num_traits::Float
    + num_traits::NumAssign
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + serde::Serialize
    + serde::de::DeserializeOwned
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// Symmetric eigendecomposition (divide and conquer). `a` holds the n*n
    /// matrix column-major and is overwritten with eigenvectors in columns;
    /// `w` receives the eigenvalues in ascending order.
    fn syevd(n: usize, a: &mut [Self], w: &mut [Self]) -> Result<()>;

    /// QR factorization of an m*n column-major buffer (m >= n) followed by
    /// explicit formation of Q's first n columns. Returns the diagonal of R
    /// as captured before Q overwrites the buffer.
    fn qr_q_inplace(m: usize, n: usize, a: &mut [Self]) -> Result<Vec<Self>>;

    /// One draw from the standard normal distribution.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_scalar {
    ($t:ty, $syevd:ident, $geqrf:ident, $orgqr:ident) => {
        impl Scalar for $t {
            fn from_f64(v: f64) -> Self {
                v as $t
            }

            fn to_f64(self) -> f64 {
                self as f64
            }

            fn syevd(n: usize, a: &mut [Self], w: &mut [Self]) -> Result<()> {
                assert_eq!(a.len(), n * n, "eigh buffer size");
                assert_eq!(w.len(), n, "eigenvalue buffer size");
                let ni = n as i32;
                let mut info = 0i32;
                // Workspace query, then the actual decomposition.
                let mut work_opt: Self = 0.0;
                let mut iwork_opt: i32 = 0;
                let query = -1i32;
                unsafe {
                    $syevd(
                        b"V".as_ptr(),
                        b"L".as_ptr(),
                        &ni,
                        a.as_mut_ptr(),
                        &ni,
                        w.as_mut_ptr(),
                        &mut work_opt,
                        &query,
                        &mut iwork_opt,
                        &query,
                        &mut info,
                    );
                }
                if info != 0 {
                    return Err(Error::Lapack {
                        routine: stringify!($syevd),
                        info,
                    });
                }
                let lwork = work_opt as i32;
                let liwork = iwork_opt;
                let mut work = vec![0.0 as Self; lwork.max(1) as usize];
                let mut iwork = vec![0i32; liwork.max(1) as usize];
                unsafe {
                    $syevd(
                        b"V".as_ptr(),
                        b"L".as_ptr(),
                        &ni,
                        a.as_mut_ptr(),
                        &ni,
                        w.as_mut_ptr(),
                        work.as_mut_ptr(),
                        &lwork,
                        iwork.as_mut_ptr(),
                        &liwork,
                        &mut info,
                    );
                }
                if info != 0 {
                    return Err(Error::Lapack {
                        routine: stringify!($syevd),
                        info,
                    });
                }
                Ok(())
            }

            fn qr_q_inplace(m: usize, n: usize, a: &mut [Self]) -> Result<Vec<Self>> {
                assert_eq!(a.len(), m * n, "qr buffer size");
                assert!(m >= n, "qr requires m >= n");
                let (mi, ni) = (m as i32, n as i32);
                let k = ni;
                let mut tau = vec![0.0 as Self; n];
                let mut info = 0i32;
                let query = -1i32;
                let mut work_opt: Self = 0.0;
                unsafe {
                    $geqrf(
                        &mi,
                        &ni,
                        a.as_mut_ptr(),
                        &mi,
                        tau.as_mut_ptr(),
                        &mut work_opt,
                        &query,
                        &mut info,
                    );
                }
                if info != 0 {
                    return Err(Error::Lapack {
                        routine: stringify!($geqrf),
                        info,
                    });
                }
                let lwork = work_opt as i32;
                let mut work = vec![0.0 as Self; lwork.max(1) as usize];
                unsafe {
                    $geqrf(
                        &mi,
                        &ni,
                        a.as_mut_ptr(),
                        &mi,
                        tau.as_mut_ptr(),
                        work.as_mut_ptr(),
                        &lwork,
                        &mut info,
                    );
                }
                if info != 0 {
                    return Err(Error::Lapack {
                        routine: stringify!($geqrf),
                        info,
                    });
                }
                // R's diagonal lives at a[j + j*m] after geqrf.
                let r_diag: Vec<Self> = (0..n).map(|j| a[j + j * m]).collect();
                let mut work_opt: Self = 0.0;
                unsafe {
                    $orgqr(
                        &mi,
                        &ni,
                        &k,
                        a.as_mut_ptr(),
                        &mi,
                        tau.as_ptr(),
                        &mut work_opt,
                        &query,
                        &mut info,
                    );
                }
                if info != 0 {
                    return Err(Error::Lapack {
                        routine: stringify!($orgqr),
                        info,
                    });
                }
                let lwork = work_opt as i32;
                let mut work = vec![0.0 as Self; lwork.max(1) as usize];
                unsafe {
                    $orgqr(
                        &mi,
                        &ni,
                        &k,
                        a.as_mut_ptr(),
                        &mi,
                        tau.as_ptr(),
                        work.as_mut_ptr(),
                        &lwork,
                        &mut info,
                    );
                }
                if info != 0 {
                    return Err(Error::Lapack {
                        routine: stringify!($orgqr),
                        info,
                    });
                }
                Ok(r_diag)
            }

            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.sample::<Self, _>(rand_distr::StandardNormal)
            }
        }
    };
}

impl_scalar!(f64, dsyevd_, dgeqrf_, dorgqr_);
impl_scalar!(f32, ssyevd_, sgeqrf_, sorgqr_);

//! Floating-point precision abstraction.
//!
//! Everything numeric in this crate is generic over a real scalar `P`
//! implementing [`RealScalar`]; complex operator entries have type
//! `P::Cplx`. `f64` is the working precision for experiments, `f32` exists
//! to keep the code honest about precision assumptions.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Real precision selector (`f32` or `f64`).
///
/// Residual tolerances are stated by the contracts for double precision and
/// relaxed for `f32` by roughly the ratio of machine epsilons.
pub trait RealScalar:
    Float
    + FloatConst
    + NumAssign
    + Sum
    + FromPrimitive
    + Display
    + LowerExp
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Complex counterpart used for operator entries.
    type Cplx: ndarray_linalg::Scalar<Real = Self, Complex = Self::Cplx>
        + ndarray_linalg::Lapack
        + ndarray::LinalgScalar
        + Send
        + Sync
        + 'static;

    /// Lossy conversion from a literal; never fails for finite input.
    fn of(x: f64) -> Self;

    /// Standard normal draw.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on `[lo, hi)`.
    fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self;

    /// Bessel function of the first kind, J1.
    fn bessel_j1(self) -> Self;

    /// Tolerance for operator kind residual checks (1e-10 at f64).
    fn kind_tol() -> Self;

    /// Tolerance for spectral residual checks (1e-8 at f64).
    fn spectral_tol() -> Self;

    /// Divide-and-conquer symmetric eigensolver (`?syevd`). `a` is the
    /// matrix in column-major order and is overwritten by eigenvectors
    /// (as columns) when `vectors` is set; `w` receives ascending
    /// eigenvalues.
    fn syevd(vectors: bool, n: usize, a: &mut [Self], w: &mut [Self]) -> Result<(), i32>;

    /// Divide-and-conquer Hermitian eigensolver (`?heevd`), column-major.
    fn heevd(vectors: bool, n: usize, a: &mut [Self::Cplx], w: &mut [Self]) -> Result<(), i32>;
}

/// Complex literal in the target precision.
#[inline]
pub fn cplx<P: RealScalar>(re: f64, im: f64) -> P::Cplx {
    <P::Cplx as ndarray_linalg::Scalar>::complex(re, im)
}

/// Real-to-complex promotion.
#[inline]
pub fn creal<P: RealScalar>(re: P) -> P::Cplx {
    <P::Cplx as ndarray_linalg::Scalar>::from_real(re)
}

/// `exp(i * phase)` in the target precision.
#[inline]
pub fn cis<P: RealScalar>(phase: P) -> P::Cplx {
    <P::Cplx as ndarray_linalg::Scalar>::complex(phase.cos(), phase.sin())
}

mod ffi {
    use num_complex::Complex;

    extern "C" {
        pub fn ssyevd_(
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
        pub fn dsyevd_(
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
        pub fn cheevd_(
            jobz: *const u8,
            uplo: *const u8,
            n: *const i32,
            a: *mut Complex<f32>,
            lda: *const i32,
            w: *mut f32,
            work: *mut Complex<f32>,
            lwork: *const i32,
            rwork: *mut f32,
            lrwork: *const i32,
            iwork: *mut i32,
            liwork: *const i32,
            info: *mut i32,
        );
        pub fn zheevd_(
            jobz: *const u8,
            uplo: *const u8,
            n: *const i32,
            a: *mut Complex<f64>,
            lda: *const i32,
            w: *mut f64,
            work: *mut Complex<f64>,
            lwork: *const i32,
            rwork: *mut f64,
            lrwork: *const i32,
            iwork: *mut i32,
            liwork: *const i32,
            info: *mut i32,
        );
    }
}

macro_rules! impl_real_scalar {
    ($real:ty, $syevd:ident, $heevd:ident, $kind_tol:expr, $spec_tol:expr) => {
        impl RealScalar for $real {
            type Cplx = Complex<$real>;

            #[inline]
            fn of(x: f64) -> Self {
                x as $real
            }

            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self {
                Uniform::new(lo, hi).expect("valid uniform range").sample(rng)
            }

            #[inline]
            fn bessel_j1(self) -> Self {
                libm::j1(self as f64) as $real
            }

            #[inline]
            fn kind_tol() -> Self {
                $kind_tol
            }

            #[inline]
            fn spectral_tol() -> Self {
                $spec_tol
            }

            fn syevd(vectors: bool, n: usize, a: &mut [Self], w: &mut [Self]) -> Result<(), i32> {
                assert!(a.len() >= n * n && w.len() >= n);
                let jobz = if vectors { b'V' } else { b'N' };
                let uplo = b'L';
                let nn = n as i32;
                let mut info = 0i32;
                let query = -1i32;
                let mut wkopt: Self = 0.0;
                let mut iwkopt: i32 = 0;
                unsafe {
                    ffi::$syevd(
                        &jobz,
                        &uplo,
                        &nn,
                        a.as_mut_ptr(),
                        &nn,
                        w.as_mut_ptr(),
                        &mut wkopt,
                        &query,
                        &mut iwkopt,
                        &query,
                        &mut info,
                    );
                }
                if info != 0 {
                    return Err(info);
                }
                let lwork = wkopt as i32;
                let liwork = iwkopt.max(1);
                let mut work = vec![0 as Self; lwork.max(1) as usize];
                let mut iwork = vec![0i32; liwork as usize];
                unsafe {
                    ffi::$syevd(
                        &jobz,
                        &uplo,
                        &nn,
                        a.as_mut_ptr(),
                        &nn,
                        w.as_mut_ptr(),
                        work.as_mut_ptr(),
                        &lwork,
                        iwork.as_mut_ptr(),
                        &liwork,
                        &mut info,
                    );
                }
                if info == 0 {
                    Ok(())
                } else {
                    Err(info)
                }
            }

            fn heevd(
                vectors: bool,
                n: usize,
                a: &mut [Self::Cplx],
                w: &mut [Self],
            ) -> Result<(), i32> {
                assert!(a.len() >= n * n && w.len() >= n);
                let jobz = if vectors { b'V' } else { b'N' };
                let uplo = b'L';
                let nn = n as i32;
                let mut info = 0i32;
                let query = -1i32;
                let mut wkopt = Complex::<$real>::new(0.0, 0.0);
                let mut rwkopt: Self = 0.0;
                let mut iwkopt: i32 = 0;
                unsafe {
                    ffi::$heevd(
                        &jobz,
                        &uplo,
                        &nn,
                        a.as_mut_ptr(),
                        &nn,
                        w.as_mut_ptr(),
                        &mut wkopt,
                        &query,
                        &mut rwkopt,
                        &query,
                        &mut iwkopt,
                        &query,
                        &mut info,
                    );
                }
                if info != 0 {
                    return Err(info);
                }
                let lwork = wkopt.re as i32;
                let lrwork = (rwkopt as i32).max(1);
                let liwork = iwkopt.max(1);
                let mut work = vec![Complex::<$real>::new(0.0, 0.0); lwork.max(1) as usize];
                let mut rwork = vec![0 as Self; lrwork as usize];
                let mut iwork = vec![0i32; liwork as usize];
                unsafe {
                    ffi::$heevd(
                        &jobz,
                        &uplo,
                        &nn,
                        a.as_mut_ptr(),
                        &nn,
                        w.as_mut_ptr(),
                        work.as_mut_ptr(),
                        &lwork,
                        rwork.as_mut_ptr(),
                        &lrwork,
                        iwork.as_mut_ptr(),
                        &liwork,
                        &mut info,
                    );
                }
                if info == 0 {
                    Ok(())
                } else {
                    Err(info)
                }
            }
        }
    };
}

impl_real_scalar!(f32, ssyevd_, cheevd_, 1e-4, 1e-3);
impl_real_scalar!(f64, dsyevd_, zheevd_, 1e-10, 1e-8);

//! Dense complex operators and the eigensolver wrappers used everywhere.
//!
//! Storage is row-major `ndarray`; matrix products go through the BLAS
//! backend. The hot symmetric/Hermitian eigensolvers call the LAPACK
//! divide-and-conquer routines directly (see [`crate::scalar::RealScalar`]),
//! the general eigensolver and QR come from `ndarray-linalg`.

use crate::error::{Error, Result};
use crate::scalar::{creal, RealScalar};
use ndarray::prelude::*;
use ndarray_linalg::Scalar as NdScalar;

extern "C" {
    fn openblas_set_num_threads(n: i32);
}

/// Cap the OpenBLAS thread pool.
pub fn set_blas_threads(n: usize) {
    unsafe { openblas_set_num_threads(n as i32) };
}

/// Structural role of an operator, with the residual guarantee attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `max |M - M†| < tol`
    Hermitian,
    /// `max |M†M - 1| < tol`
    Unitary,
    General,
}

/// Square dense operator over complex entries at precision `P`.
#[derive(Debug, Clone)]
pub struct DenseOperator<P: RealScalar> {
    kind: OperatorKind,
    data: Array2<P::Cplx>,
}

impl<P: RealScalar> DenseOperator<P> {
    /// Wrap a matrix, verifying the residual implied by `kind`.
    pub fn new(kind: OperatorKind, data: Array2<P::Cplx>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        let op = Self { kind, data };
        op.check_kind()?;
        Ok(op)
    }

    /// Wrap a matrix without running the residual check. For internal
    /// construction paths that guarantee the invariant by algebra.
    pub(crate) fn new_unchecked(kind: OperatorKind, data: Array2<P::Cplx>) -> Self {
        Self { kind, data }
    }

    pub fn general(data: Array2<P::Cplx>) -> Result<Self> {
        Self::new(OperatorKind::General, data)
    }

    pub fn hermitian(data: Array2<P::Cplx>) -> Result<Self> {
        Self::new(OperatorKind::Hermitian, data)
    }

    pub fn unitary(data: Array2<P::Cplx>) -> Result<Self> {
        Self::new(OperatorKind::Unitary, data)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            kind: OperatorKind::Unitary,
            data: Array2::eye(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn data(&self) -> &Array2<P::Cplx> {
        &self.data
    }

    pub fn into_data(self) -> Array2<P::Cplx> {
        self.data
    }

    pub fn adjoint(&self) -> Array2<P::Cplx> {
        adjoint::<P>(&self.data)
    }

    pub fn trace(&self) -> P::Cplx {
        self.data.diag().iter().copied().fold(
            <P::Cplx as num_traits::Zero>::zero(),
            |acc, z| acc + z,
        )
    }

    /// Matrix product `self * rhs`, result kind is the weakest common one.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::Dimension(format!(
                "product of {}x{} and {}x{}",
                self.dim(),
                self.dim(),
                rhs.dim(),
                rhs.dim()
            )));
        }
        let kind = match (self.kind, rhs.kind) {
            (OperatorKind::Unitary, OperatorKind::Unitary) => OperatorKind::Unitary,
            _ => OperatorKind::General,
        };
        Ok(Self {
            kind,
            data: self.data.dot(&rhs.data),
        })
    }

    /// Residual of the structural invariant for this operator's kind.
    pub fn kind_residual(&self) -> P {
        match self.kind {
            OperatorKind::Hermitian => hermiticity_residual(&self.data),
            OperatorKind::Unitary => unitarity_residual(&self.data),
            OperatorKind::General => P::zero(),
        }
    }

    pub fn check_kind(&self) -> Result<()> {
        let residual = self.kind_residual();
        if residual > P::kind_tol() {
            return Err(Error::KindResidual {
                kind: self.kind,
                residual: residual.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }
}

/// Conjugate transpose.
pub fn adjoint<P: RealScalar>(a: &Array2<P::Cplx>) -> Array2<P::Cplx> {
    let mut out = a.t().to_owned();
    out.mapv_inplace(|z| z.conj());
    out
}

/// `max_ij |A_ij - B_ij|`.
pub fn max_abs_diff<P: RealScalar>(a: &Array2<P::Cplx>, b: &Array2<P::Cplx>) -> P {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (*x - *y).abs())
        .fold(P::zero(), P::max)
}

/// `max |M - M†|`.
pub fn hermiticity_residual<P: RealScalar>(a: &Array2<P::Cplx>) -> P {
    let mut worst = P::zero();
    for i in 0..a.nrows() {
        for j in 0..=i {
            let d = (a[[i, j]] - a[[j, i]].conj()).abs();
            worst = worst.max(d);
        }
    }
    worst
}

/// `max |M†M - 1|`.
pub fn unitarity_residual<P: RealScalar>(a: &Array2<P::Cplx>) -> P {
    let gram = adjoint::<P>(a).dot(a);
    let mut worst = P::zero();
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j {
                creal::<P>(P::one())
            } else {
                <P::Cplx as num_traits::Zero>::zero()
            };
            worst = worst.max((gram[[i, j]] - target).abs());
        }
    }
    worst
}

/// Eigendecomposition of a real symmetric matrix: ascending eigenvalues and
/// eigenvectors as columns.
pub fn sym_eig<P: RealScalar>(a: &Array2<P>) -> Result<(Array1<P>, Array2<P>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("sym_eig needs a square matrix".into()));
    }
    // A symmetric matrix reads the same in row- and column-major order.
    let mut buf: Vec<P> = a.iter().copied().collect();
    let mut w = vec![P::zero(); n];
    P::syevd(true, n, &mut buf, &mut w).map_err(|info| Error::Lapack {
        routine: "syevd",
        info,
    })?;
    // LAPACK wrote eigenvectors as columns of a column-major buffer.
    let mut vecs = Array2::<P>::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            vecs[[i, j]] = buf[i + j * n];
        }
    }
    Ok((Array1::from_vec(w), vecs))
}

/// Eigenvalues only of a real symmetric matrix, ascending.
pub fn sym_eigvals<P: RealScalar>(a: &Array2<P>) -> Result<Array1<P>> {
    let n = a.nrows();
    let mut buf: Vec<P> = a.iter().copied().collect();
    let mut w = vec![P::zero(); n];
    P::syevd(false, n, &mut buf, &mut w).map_err(|info| Error::Lapack {
        routine: "syevd",
        info,
    })?;
    Ok(Array1::from_vec(w))
}

/// Eigenvalues only of a complex Hermitian matrix, ascending.
pub fn herm_eigvals<P: RealScalar>(a: &Array2<P::Cplx>) -> Result<Array1<P>> {
    let n = a.nrows();
    let mut buf: Vec<P::Cplx> = a.iter().copied().collect();
    let mut w = vec![P::zero(); n];
    P::heevd(false, n, &mut buf, &mut w).map_err(|info| Error::Lapack {
        routine: "heevd",
        info,
    })?;
    Ok(Array1::from_vec(w))
}

/// Eigendecomposition of a complex Hermitian matrix: ascending eigenvalues
/// and eigenvectors as columns.
pub fn herm_eig<P: RealScalar>(a: &Array2<P::Cplx>) -> Result<(Array1<P>, Array2<P::Cplx>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("herm_eig needs a square matrix".into()));
    }
    // The row-major buffer reinterpreted as column-major is conj(A); its
    // eigenvectors are the conjugates of A's, eigenvalues are identical.
    let mut buf: Vec<P::Cplx> = a.iter().copied().collect();
    let mut w = vec![P::zero(); n];
    P::heevd(true, n, &mut buf, &mut w).map_err(|info| Error::Lapack {
        routine: "heevd",
        info,
    })?;
    let mut vecs = Array2::<P::Cplx>::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            vecs[[i, j]] = buf[i + j * n].conj();
        }
    }
    Ok((Array1::from_vec(w), vecs))
}

/// Hermitian eigendecomposition of a [`DenseOperator`], routing all-real
/// matrices through the cheaper real-symmetric solver.
pub fn herm_eig_op<P: RealScalar>(
    op: &DenseOperator<P>,
) -> Result<(Array1<P>, Array2<P::Cplx>)> {
    let a = op.data();
    let all_real = a.iter().all(|z| z.im() == P::zero());
    if all_real {
        let re = a.mapv(|z| z.re());
        let (w, x) = sym_eig(&re)?;
        Ok((w, x.mapv(creal::<P>)))
    } else {
        herm_eig::<P>(a)
    }
}

/// `X · diag(f(k)) · X†` for complex `X` with columns as the basis.
pub fn reconstruct<P: RealScalar>(
    vectors: &Array2<P::Cplx>,
    diag: &Array1<P::Cplx>,
) -> Array2<P::Cplx> {
    let mut scaled = vectors.to_owned();
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        let f = diag[j];
        col.mapv_inplace(|z| z * f);
    }
    scaled.dot(&adjoint::<P>(vectors))
}

//! Finite-dimensional Hermitian operators and density operators.
//!
//! Operators are stored either as a real diagonal (the semiclassical fast path,
//! up to [`MAX_DIAGONAL_DIM`]) or as a dense complex matrix (up to
//! [`MAX_DENSE_DIM`]). Tensor factors are ordered most-significant first, so
//! `tensor(a, b)` has the usual Kronecker layout.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest dimension for dense complex matrices.
pub const MAX_DENSE_DIM: usize = 1 << 10;
/// Largest dimension for diagonal (semiclassical) operators.
pub const MAX_DIAGONAL_DIM: usize = 1 << 14;

const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Diagonal(DVector<f64>),
    Dense(DMatrix<C64>),
}

/// A Hermitian operator (Hamiltonian, observable, or state).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    repr: Repr,
}

fn check_dense_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::ShapeError("operator dimension must be positive".into()));
    }
    if dim > MAX_DENSE_DIM {
        return Err(Error::DimensionLimit { dim, limit: MAX_DENSE_DIM });
    }
    Ok(())
}

fn check_diagonal_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::ShapeError("operator dimension must be positive".into()));
    }
    if dim > MAX_DIAGONAL_DIM {
        return Err(Error::DimensionLimit { dim, limit: MAX_DIAGONAL_DIM });
    }
    Ok(())
}

/// Symmetrized copy `(m + m†)/2`.
fn hermitize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
pub(crate) fn eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<C64>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Eigenvalues only, sorted descending.
pub(crate) fn eigvalsh(m: &DMatrix<C64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

impl HermitianOperator {
    /// Validates a dense matrix as Hermitian (relative Frobenius tolerance
    /// 1e-12) and stores its symmetrized part.
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::ShapeError(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
        }
        check_dense_dim(m.nrows())?;
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidOperator("matrix has non-finite entries".into()));
        }
        let asym = (&m - m.adjoint()).norm();
        let scale = m.norm();
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::InvalidOperator(format!(
                "not Hermitian: |A - A^dag|_F = {asym:e} relative to |A|_F = {scale:e}"
            )));
        }
        Ok(Self { repr: Repr::Dense(hermitize(&m)) })
    }

    /// Dense real-symmetric input.
    pub fn from_real(m: DMatrix<f64>) -> Result<Self> {
        Self::from_matrix(m.map(|x| C64::new(x, 0.0)))
    }

    /// Diagonal operator in the computational basis.
    pub fn diagonal(entries: Vec<f64>) -> Result<Self> {
        check_diagonal_dim(entries.len())?;
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidOperator("diagonal has non-finite entries".into()));
        }
        Ok(Self { repr: Repr::Diagonal(DVector::from_vec(entries)) })
    }

    /// Wraps a matrix that is Hermitian by construction (symmetrizes away
    /// rounding noise without validating).
    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        Self { repr: Repr::Dense(hermitize(&m)) }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::diagonal(vec![1.0; dim])
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::diagonal(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Diagonal(d) => d.len(),
            Repr::Dense(m) => m.nrows(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.repr, Repr::Diagonal(_))
    }

    /// Diagonal entries when stored diagonally.
    pub fn diagonal_entries(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Diagonal(d) => Some(d.as_slice()),
            Repr::Dense(_) => None,
        }
    }

    /// Dense matrix view; fails above [`MAX_DENSE_DIM`].
    pub fn matrix(&self) -> Result<Cow<'_, DMatrix<C64>>> {
        match &self.repr {
            Repr::Dense(m) => Ok(Cow::Borrowed(m)),
            Repr::Diagonal(d) => {
                check_dense_dim(d.len())?;
                Ok(Cow::Owned(DMatrix::from_diagonal(&d.map(|x| C64::new(x, 0.0)))))
            }
        }
    }

    /// Real parts of the diagonal in the computational basis.
    pub fn diagonal_in_basis(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Diagonal(d) => d.as_slice().to_vec(),
            Repr::Dense(m) => (0..m.nrows()).map(|i| m[(i, i)].re).collect(),
        }
    }

    /// Converts a dense operator with vanishing off-diagonal entries to the
    /// diagonal representation.
    pub fn compact(self, tol: f64) -> Self {
        match &self.repr {
            Repr::Diagonal(_) => self,
            Repr::Dense(m) => {
                let n = m.nrows();
                let off = (0..n)
                    .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                    .map(|(i, j)| m[(i, j)].norm())
                    .fold(0.0, f64::max);
                if off <= tol {
                    Self { repr: Repr::Diagonal(DVector::from_fn(n, |i, _| m[(i, i)].re)) }
                } else {
                    self
                }
            }
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Diagonal(d) => d.sum(),
            Repr::Dense(m) => m.trace().re,
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        match &self.repr {
            Repr::Diagonal(d) => d.norm(),
            Repr::Dense(m) => m.norm(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        let repr = match &self.repr {
            Repr::Diagonal(d) => Repr::Diagonal(d.scale(factor)),
            Repr::Dense(m) => Repr::Dense(m.scale(factor)),
        };
        Self { repr }
    }

    /// `self + c·1`.
    pub fn shift(&self, c: f64) -> Self {
        let repr = match &self.repr {
            Repr::Diagonal(d) => Repr::Diagonal(d.add_scalar(c)),
            Repr::Dense(m) => {
                let mut m = m.clone();
                for i in 0..m.nrows() {
                    m[(i, i)] += C64::new(c, 0.0);
                }
                Repr::Dense(m)
            }
        };
        Self { repr }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::ShapeError(format!("cannot add dims {} and {}", self.dim(), other.dim())));
        }
        match (&self.repr, &other.repr) {
            (Repr::Diagonal(a), Repr::Diagonal(b)) => Ok(Self { repr: Repr::Diagonal(a + b) }),
            _ => Ok(Self::from_matrix_unchecked(self.matrix()?.as_ref() + other.matrix()?.as_ref())),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Frobenius norm of `[self, other]`.
    pub fn commutator_norm(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::ShapeError(format!("dims {} and {} differ", self.dim(), other.dim())));
        }
        if let (Repr::Diagonal(_), Repr::Diagonal(_)) = (&self.repr, &other.repr) {
            return Ok(0.0);
        }
        let a = self.matrix()?;
        let b = other.matrix()?;
        let ab = a.as_ref() * b.as_ref();
        Ok((&ab - ab.adjoint()).norm())
    }

    /// `tr(ρ A)` for a state ρ.
    pub fn expectation(&self, rho: &DensityOperator) -> Result<f64> {
        if self.dim() != rho.dim() {
            return Err(Error::ShapeError(format!("dims {} and {} differ", self.dim(), rho.dim())));
        }
        match (&self.repr, &rho.op.repr) {
            (Repr::Diagonal(a), Repr::Diagonal(p)) => Ok(a.dot(p)),
            (Repr::Diagonal(a), Repr::Dense(m)) => Ok((0..a.len()).map(|i| a[i] * m[(i, i)].re).sum()),
            (Repr::Dense(m), Repr::Diagonal(p)) => Ok((0..p.len()).map(|i| p[i] * m[(i, i)].re).sum()),
            (Repr::Dense(a), Repr::Dense(r)) => {
                // tr(ρA) = Σ_ij ρ_ij A_ji
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..a.nrows() {
                    for j in 0..a.ncols() {
                        acc += r[(i, j)] * a[(j, i)];
                    }
                }
                Ok(acc.re)
            }
        }
    }

    /// Operator product `A·A` (for second moments).
    pub fn square(&self) -> Result<Self> {
        match &self.repr {
            Repr::Diagonal(d) => Ok(Self { repr: Repr::Diagonal(d.component_mul(d)) }),
            Repr::Dense(m) => Ok(Self::from_matrix_unchecked(m * m)),
        }
    }

    /// All eigenvalues with multiplicity, sorted descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Diagonal(d) => {
                let mut v = d.as_slice().to_vec();
                v.sort_by(|a, b| b.total_cmp(a));
                v
            }
            Repr::Dense(m) => eigvalsh(m),
        }
    }
}

/// A density operator: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    /// Validates the density-operator invariants on a Hermitian operator.
    pub fn from_operator(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidOperator(format!("trace is {tr}, expected 1")));
        }
        let min = *op.eigenvalues().last().expect("dimension is positive");
        if min < -PSD_TOL {
            return Err(Error::InvalidOperator(format!("not positive semidefinite (min eigenvalue {min:e})")));
        }
        Ok(Self { op })
    }

    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        Self::from_operator(HermitianOperator::from_matrix(m)?)
    }

    /// Diagonal state with the given probabilities.
    pub fn from_probabilities(p: Vec<f64>) -> Result<Self> {
        Self::from_operator(HermitianOperator::diagonal(p)?)
    }

    /// Pure state `|ψ⟩⟨ψ|`; `ψ` must be normalized within 1e-10.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let norm2 = v.norm_squared();
        if (norm2 - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidOperator(format!("state vector has squared norm {norm2}")));
        }
        check_dense_dim(psi.len())?;
        Ok(Self { op: HermitianOperator::from_matrix_unchecked(&v * v.adjoint()) })
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::from_probabilities(vec![1.0 / dim as f64; dim])
    }

    /// Trusted constructor for states produced by trace- and
    /// positivity-preserving maps.
    pub(crate) fn from_operator_unchecked(op: HermitianOperator) -> Self {
        Self { op }
    }

    pub fn as_operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_operator(self) -> HermitianOperator {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn is_diagonal(&self) -> bool {
        self.op.is_diagonal()
    }

    pub fn probabilities(&self) -> Option<&[f64]> {
        self.op.diagonal_entries()
    }

    pub fn matrix(&self) -> Result<Cow<'_, DMatrix<C64>>> {
        self.op.matrix()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.op.eigenvalues()
    }

    /// Convex combination `Σ w_k ρ_k`.
    pub fn mixture(parts: &[(f64, &DensityOperator)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidOperator("empty mixture".into()))?;
        let mut acc = first.1.op.scale(first.0);
        for (w, rho) in &parts[1..] {
            acc = acc.add(&rho.op.scale(*w))?;
        }
        Self::from_operator(acc)
    }
}

/// One eigenspace of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct Eigenspace {
    pub value: f64,
    basis: EigenBasis,
}

#[derive(Debug, Clone)]
enum EigenBasis {
    /// Computational basis vectors (diagonal operators).
    Indices(Vec<usize>),
    /// Orthonormal columns.
    Vectors(DMatrix<C64>),
}

impl Eigenspace {
    pub fn multiplicity(&self) -> usize {
        match &self.basis {
            EigenBasis::Indices(ix) => ix.len(),
            EigenBasis::Vectors(v) => v.ncols(),
        }
    }

    /// Computational-basis indices spanning the space, for diagonal operators.
    pub fn indices(&self) -> Option<&[usize]> {
        match &self.basis {
            EigenBasis::Indices(ix) => Some(ix),
            EigenBasis::Vectors(_) => None,
        }
    }

    /// Orthonormal basis as the columns of a `dim × multiplicity` matrix.
    pub fn vectors(&self, dim: usize) -> DMatrix<C64> {
        match &self.basis {
            EigenBasis::Vectors(v) => v.clone(),
            EigenBasis::Indices(ix) => {
                let mut v = DMatrix::<C64>::zeros(dim, ix.len());
                for (c, &i) in ix.iter().enumerate() {
                    v[(i, c)] = C64::new(1.0, 0.0);
                }
                v
            }
        }
    }
}

/// Degeneracy-merged spectral decomposition, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    dim: usize,
    spaces: Vec<Eigenspace>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spaces(&self) -> &[Eigenspace] {
        &self.spaces
    }

    /// Distinct eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spaces.iter().map(|s| s.value).collect()
    }

    pub fn projector(&self, k: usize) -> DMatrix<C64> {
        let v = self.spaces[k].vectors(self.dim);
        &v * v.adjoint()
    }

    pub fn projectors(&self) -> Vec<DMatrix<C64>> {
        (0..self.spaces.len()).map(|k| self.projector(k)).collect()
    }

    /// Whether every eigenspace is spanned by computational basis vectors.
    pub fn is_computational(&self) -> bool {
        self.spaces.iter().all(|s| s.indices().is_some())
    }

    /// Unitary with eigenvectors as columns, grouped by eigenspace, together
    /// with the eigenspace label of each column.
    pub fn eigenbasis(&self) -> (DMatrix<C64>, Vec<usize>) {
        let mut u = DMatrix::<C64>::zeros(self.dim, self.dim);
        let mut labels = Vec::with_capacity(self.dim);
        let mut col = 0;
        for (k, s) in self.spaces.iter().enumerate() {
            let v = s.vectors(self.dim);
            for c in 0..v.ncols() {
                u.set_column(col, &v.column(c));
                labels.push(k);
                col += 1;
            }
        }
        (u, labels)
    }

    /// Eigenspace label of each computational basis index (diagonal case).
    pub fn index_labels(&self) -> Option<Vec<usize>> {
        let mut labels = vec![usize::MAX; self.dim];
        for (k, s) in self.spaces.iter().enumerate() {
            for &i in s.indices()? {
                labels[i] = k;
            }
        }
        Some(labels)
    }

    /// `Σ λ_k P_k`.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let mut m = DMatrix::<C64>::zeros(self.dim, self.dim);
        for (k, s) in self.spaces.iter().enumerate() {
            m += self.projector(k).scale(s.value);
        }
        m
    }
}

/// Default merge tolerance: `1e-8` times the larger of the spectral range and
/// the spectral radius.
pub fn default_merge_tol(op: &HermitianOperator) -> f64 {
    let ev = op.eigenvalues();
    let (hi, lo) = (ev[0], *ev.last().unwrap());
    1e-8 * (hi - lo).max(hi.abs()).max(lo.abs())
}

/// Spectral decomposition; eigenvalues closer than `merge_tol` (consecutive,
/// chained) share one eigenspace whose value is the group mean.
pub fn eig(a: &HermitianOperator, merge_tol: f64) -> SpectralDecomposition {
    let dim = a.dim();
    match &a.repr {
        Repr::Diagonal(d) => {
            let mut pairs: Vec<(f64, usize)> = d.iter().copied().zip(0..dim).collect();
            pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
            let spaces = group_sorted_fast(&pairs, merge_tol)
                .into_iter()
                .map(|(value, mut ix)| {
                    ix.sort_unstable();
                    Eigenspace { value, basis: EigenBasis::Indices(ix) }
                })
                .collect();
            SpectralDecomposition { dim, spaces }
        }
        Repr::Dense(m) => {
            let (values, vectors) = eigh(m);
            let pairs: Vec<(f64, usize)> = values.iter().copied().zip(0..dim).collect();
            let spaces = group_sorted_fast(&pairs, merge_tol)
                .into_iter()
                .map(|(value, cols)| {
                    let mut v = DMatrix::<C64>::zeros(dim, cols.len());
                    for (c, &j) in cols.iter().enumerate() {
                        v.set_column(c, &vectors.column(j));
                    }
                    Eigenspace { value, basis: EigenBasis::Vectors(v) }
                })
                .collect();
            SpectralDecomposition { dim, spaces }
        }
    }
}

// Groups a descending list; members chain while consecutive gaps stay within tol.
fn group_sorted_fast(pairs: &[(f64, usize)], merge_tol: f64) -> Vec<(f64, Vec<usize>)> {
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut last = f64::NAN;
    for &(v, i) in pairs {
        match groups.last_mut() {
            Some((sum, members)) if last - v <= merge_tol => {
                *sum += v;
                members.push(i);
            }
            _ => groups.push((v, vec![i])),
        }
        last = v;
    }
    for g in groups.iter_mut() {
        g.0 /= g.1.len() as f64;
    }
    groups
}

/// [`eig`] with [`default_merge_tol`].
pub fn eig_default(a: &HermitianOperator) -> SpectralDecomposition {
    eig(a, default_merge_tol(a))
}

/// Kronecker product.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    let dim = a
        .dim()
        .checked_mul(b.dim())
        .ok_or(Error::DimensionLimit { dim: usize::MAX, limit: MAX_DIAGONAL_DIM })?;
    match (&a.repr, &b.repr) {
        (Repr::Diagonal(x), Repr::Diagonal(y)) => {
            check_diagonal_dim(dim)?;
            let mut out = Vec::with_capacity(dim);
            for &u in x.iter() {
                for &v in y.iter() {
                    out.push(u * v);
                }
            }
            Ok(HermitianOperator { repr: Repr::Diagonal(DVector::from_vec(out)) })
        }
        _ => {
            check_dense_dim(dim)?;
            let m = a.matrix()?.kronecker(b.matrix()?.as_ref());
            Ok(HermitianOperator { repr: Repr::Dense(m) })
        }
    }
}

/// Tensor product of states.
pub fn tensor_states(a: &DensityOperator, b: &DensityOperator) -> Result<DensityOperator> {
    Ok(DensityOperator::from_operator_unchecked(tensor(&a.op, &b.op)?))
}

/// Reduced state on the factors listed in `keep` (in ascending factor order).
pub fn partial_trace(rho: &DensityOperator, factor_dims: &[usize], keep: &[usize]) -> Result<DensityOperator> {
    let total: usize = factor_dims.iter().product();
    if factor_dims.is_empty() || factor_dims.contains(&0) || total != rho.dim() {
        return Err(Error::ShapeError(format!(
            "factor dims {factor_dims:?} do not multiply to {}",
            rho.dim()
        )));
    }
    let mut kept = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.len() != keep.len() || kept.iter().any(|&k| k >= factor_dims.len()) {
        return Err(Error::ShapeError(format!("invalid keep set {keep:?}")));
    }
    if kept.len() == factor_dims.len() {
        return Ok(rho.clone());
    }

    // Split each basis index into (kept index, traced index).
    let m = factor_dims.len();
    let mut strides = vec![1usize; m];
    for f in (0..m.saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * factor_dims[f + 1];
    }
    let kept_dim: usize = kept.iter().map(|&k| factor_dims[k]).product();
    let split = |i: usize| -> (usize, usize) {
        let (mut ki, mut ti) = (0usize, 0usize);
        for f in 0..m {
            let digit = (i / strides[f]) % factor_dims[f];
            if kept.binary_search(&f).is_ok() {
                ki = ki * factor_dims[f] + digit;
            } else {
                ti = ti * factor_dims[f] + digit;
            }
        }
        (ki, ti)
    };
    let parts: Vec<(usize, usize)> = (0..total).map(split).collect();

    match &rho.op.repr {
        Repr::Diagonal(p) => {
            let mut out = vec![0.0; kept_dim];
            for (i, &(ki, _)) in parts.iter().enumerate() {
                out[ki] += p[i];
            }
            Ok(DensityOperator::from_operator_unchecked(HermitianOperator::diagonal(out)?))
        }
        Repr::Dense(r) => {
            let mut out = DMatrix::<C64>::zeros(kept_dim, kept_dim);
            for i in 0..total {
                let (ki, ti) = parts[i];
                for j in 0..total {
                    let (kj, tj) = parts[j];
                    if ti == tj {
                        out[(ki, kj)] += r[(i, j)];
                    }
                }
            }
            Ok(DensityOperator::from_operator_unchecked(HermitianOperator::from_matrix_unchecked(out)))
        }
    }
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::ShapeError(format!("dims {} and {} differ", rho.dim(), sigma.dim())));
    }
    let diff = rho.op.sub(&sigma.op)?;
    let d = match &diff.repr {
        Repr::Diagonal(v) => 0.5 * v.iter().map(|x| x.abs()).sum::<f64>(),
        Repr::Dense(m) => 0.5 * eigvalsh(m).iter().map(|x| x.abs()).sum::<f64>(),
    };
    Ok(d.clamp(0.0, 1.0))
}

/// Pinching `Σ_k P_k ρ P_k` over the eigenspaces of `spectrum`.
pub fn dephase_with(rho: &DensityOperator, spectrum: &SpectralDecomposition) -> Result<DensityOperator> {
    if rho.dim() != spectrum.dim() {
        return Err(Error::ShapeError(format!("dims {} and {} differ", rho.dim(), spectrum.dim())));
    }
    if let Some(labels) = spectrum.index_labels() {
        return match &rho.op.repr {
            Repr::Diagonal(_) => Ok(rho.clone()),
            Repr::Dense(r) => {
                let n = r.nrows();
                let out = DMatrix::from_fn(n, n, |i, j| if labels[i] == labels[j] { r[(i, j)] } else { C64::new(0.0, 0.0) });
                let op = HermitianOperator::from_matrix_unchecked(out).compact(0.0);
                Ok(DensityOperator::from_operator_unchecked(op))
            }
        };
    }
    let (u, labels) = spectrum.eigenbasis();
    let r = rho.matrix()?;
    let mut inner = u.adjoint() * r.as_ref() * &u;
    let n = inner.nrows();
    for i in 0..n {
        for j in 0..n {
            if labels[i] != labels[j] {
                inner[(i, j)] = C64::new(0.0, 0.0);
            }
        }
    }
    let out = &u * inner * u.adjoint();
    Ok(DensityOperator::from_operator_unchecked(HermitianOperator::from_matrix_unchecked(out)))
}

/// Dephasing in the (degeneracy-merged) eigenbasis of `h`.
pub fn dephase(rho: &DensityOperator, h: &HermitianOperator) -> Result<DensityOperator> {
    if rho.dim() != h.dim() {
        return Err(Error::ShapeError(format!("dims {} and {} differ", rho.dim(), h.dim())));
    }
    dephase_with(rho, &eig_default(h))
}

/// JSON form of an operator: `{"dim", "re", "im"}` or `{"dim", "diag"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorJson {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag: Option<Vec<f64>>,
}

impl From<&HermitianOperator> for OperatorJson {
    fn from(op: &HermitianOperator) -> Self {
        match &op.repr {
            Repr::Diagonal(d) => OperatorJson { dim: d.len(), re: None, im: None, diag: Some(d.as_slice().to_vec()) },
            Repr::Dense(m) => {
                let n = m.nrows();
                let re = (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect();
                let im = (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect();
                OperatorJson { dim: n, re: Some(re), im: Some(im), diag: None }
            }
        }
    }
}

impl TryFrom<OperatorJson> for HermitianOperator {
    type Error = Error;

    fn try_from(j: OperatorJson) -> Result<Self> {
        match (j.diag, j.re, j.im) {
            (Some(diag), None, None) => {
                if diag.len() != j.dim {
                    return Err(Error::Serialization(format!("diag has {} entries, dim is {}", diag.len(), j.dim)));
                }
                HermitianOperator::diagonal(diag)
            }
            (None, Some(re), im) => {
                let n = j.dim;
                let bad_rows = |rows: &Vec<Vec<f64>>| rows.len() != n || rows.iter().any(|r| r.len() != n);
                if bad_rows(&re) || im.as_ref().is_some_and(bad_rows) {
                    return Err(Error::Serialization(format!("matrix rows do not match dim {n}")));
                }
                let m = DMatrix::from_fn(n, n, |r, c| {
                    C64::new(re[r][c], im.as_ref().map_or(0.0, |im| im[r][c]))
                });
                HermitianOperator::from_matrix(m)
            }
            _ => Err(Error::Serialization("operator needs either \"diag\" or \"re\" (with optional \"im\")".into())),
        }
    }
}

impl Serialize for HermitianOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OperatorJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = OperatorJson::deserialize(d)?;
        HermitianOperator::try_from(j).map_err(serde::de::Error::custom)
    }
}

impl Serialize for DensityOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.op.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let op = HermitianOperator::deserialize(d)?;
        DensityOperator::from_operator(op).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pauli_x() -> HermitianOperator {
        HermitianOperator::from_real(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap()
    }

    fn plus() -> DensityOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityOperator::pure(&[c(s, 0.0), c(s, 0.0)]).unwrap()
    }

    #[test]
    fn eig_identity_is_one_space() {
        let id = HermitianOperator::identity(2).unwrap();
        let sd = eig(&id, 1e-8);
        assert_eq!(sd.eigenvalues(), vec![1.0]);
        assert_abs_diff_eq!((sd.projector(0) - DMatrix::<C64>::identity(2, 2)).norm(), 0.0);

        // Dense identity carries rounding noise; the default tolerance still merges it.
        let dense = HermitianOperator::from_matrix(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(eig_default(&dense).spaces().len(), 1);
    }

    #[test]
    fn eig_diagonal_orders_descending() {
        let h = HermitianOperator::diagonal(vec![-1.0, 1.0]).unwrap();
        let sd = eig(&h, 1e-8);
        assert_eq!(sd.eigenvalues(), vec![1.0, -1.0]);
        assert_eq!(sd.spaces()[0].indices(), Some(&[1usize][..]));
        assert_eq!(sd.spaces()[1].indices(), Some(&[0usize][..]));
    }

    #[test]
    fn eig_pauli_x_reconstructs() {
        let x = pauli_x();
        let sd = eig(&x, 1e-8);
        let ev = sd.eigenvalues();
        assert_abs_diff_eq!(ev[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], -1.0, epsilon = 1e-14);
        let err = (sd.reconstruct() - x.matrix().unwrap().into_owned()).norm();
        assert!(err < 1e-12, "reconstruction error {err}");
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(HermitianOperator::from_matrix(m), Err(Error::InvalidOperator(_))));
    }

    #[test]
    fn tensor_basics() {
        let i2 = HermitianOperator::identity(2).unwrap();
        assert_eq!(tensor(&i2, &i2).unwrap(), HermitianOperator::identity(4).unwrap());
        let a = HermitianOperator::diagonal(vec![1.0, 0.0]).unwrap();
        let b = HermitianOperator::diagonal(vec![0.0, 1.0]).unwrap();
        assert_eq!(tensor(&a, &b).unwrap().diagonal_entries().unwrap(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn tensor_dimension_limit() {
        let big = HermitianOperator::identity(MAX_DIAGONAL_DIM).unwrap();
        let two = HermitianOperator::identity(2).unwrap();
        assert!(matches!(tensor(&big, &two), Err(Error::DimensionLimit { .. })));
        let dense = HermitianOperator::from_matrix(DMatrix::identity(64, 64)).unwrap();
        let dense2 = HermitianOperator::from_matrix(DMatrix::identity(32, 32)).unwrap();
        assert!(matches!(tensor(&dense, &dense2), Err(Error::DimensionLimit { .. })));
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityOperator::pure(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap();
        for keep in [0usize, 1] {
            let red = partial_trace(&bell, &[2, 2], &[keep]).unwrap();
            let m = red.matrix().unwrap();
            assert_abs_diff_eq!(m[(0, 0)].re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(m[(1, 1)].re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(m[(0, 1)].norm(), 0.0, epsilon = 1e-15);
        }
        let same = partial_trace(&bell, &[2, 2], &[0, 1]).unwrap();
        assert_eq!(same, bell);
    }

    #[test]
    fn partial_trace_shape_errors() {
        let rho = DensityOperator::maximally_mixed(4).unwrap();
        assert!(matches!(partial_trace(&rho, &[2, 3], &[0]), Err(Error::ShapeError(_))));
        assert!(matches!(partial_trace(&rho, &[2, 2], &[2]), Err(Error::ShapeError(_))));
    }

    #[test]
    fn trace_distance_examples() {
        let a = DensityOperator::from_probabilities(vec![1.0, 0.0]).unwrap();
        let b = DensityOperator::from_probabilities(vec![0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(trace_distance(&a, &b).unwrap(), 1.0);
        let p = DensityOperator::from_probabilities(vec![0.9, 0.1]).unwrap();
        let u = DensityOperator::maximally_mixed(2).unwrap();
        assert_abs_diff_eq!(trace_distance(&p, &u).unwrap(), 0.4, epsilon = 1e-15);
        // dense path agrees: |+> vs |0> is sqrt(1 - 1/2)
        let z = DensityOperator::pure(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(trace_distance(&plus(), &z).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn dephase_examples() {
        let h = HermitianOperator::diagonal(vec![0.0, 1.0]).unwrap();
        let d = dephase(&plus(), &h).unwrap();
        assert!(d.is_diagonal());
        assert_eq!(d.probabilities().unwrap().len(), 2);
        for &p in d.probabilities().unwrap() {
            assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        }
        let diag = DensityOperator::from_probabilities(vec![0.3, 0.7]).unwrap();
        assert_eq!(dephase(&diag, &h).unwrap(), diag);
    }

    #[test]
    fn dephase_in_rotated_basis_keeps_blocks() {
        // H = X has eigenbasis |±>; |+><+| is invariant.
        let d = dephase(&plus(), &pauli_x()).unwrap();
        let err = (d.matrix().unwrap().into_owned() - plus().matrix().unwrap().into_owned()).norm();
        assert!(err < 1e-12);
    }

    #[test]
    fn json_schema_round_trip() {
        let h = HermitianOperator::from_matrix(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.5, -0.25), c(0.5, 0.25), c(-1.0, 0.0)],
        ))
        .unwrap();
        let s = crate::numfmt::to_json(&h).unwrap();
        assert!(s.starts_with("{\"dim\":2,\"re\":"));
        let back: HermitianOperator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);

        let d: DensityOperator = serde_json::from_str(r#"{"dim":2,"diag":[0.25,0.75]}"#).unwrap();
        assert_eq!(d.probabilities().unwrap(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<DensityOperator>(r#"{"dim":2,"diag":[0.5,0.75]}"#).is_err());
        assert!(serde_json::from_str::<HermitianOperator>(r#"{"dim":2,"diag":[0.5,0.75],"x":1}"#).is_err());
    }
}

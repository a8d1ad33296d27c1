//! Dense linear algebra kernels.
//!
//! Everything here works on small dense matrices (n up to a few dozen), which
//! is all the rest of the crate needs: Jacobians of desk-scale polynomial
//! systems, frames of flags, and data matrices for the statistics problems.
//!
//! The symmetric eigensolver is the cyclic Jacobi method and the SVD is its
//! one-sided (Hestenes) variant, so both share the same plane-rotation kernel
//! and give deterministic output for a fixed input.

use std::fmt;
use std::ops::{Add, Div, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default orthogonality tolerance.
pub const TAU_ORTH: f64 = 1e-10;
/// Default reconstruction tolerance.
pub const TAU_RECON: f64 = 1e-10;
/// Default relative tolerance for [`numerical_rank`].
pub const RANK_TOL: f64 = 1e-8;

const JACOBI_OFF_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Eigenvalues closer than this (relative to the spectral radius) count as tied.
const TIE_TOL: f64 = 1e-12;

/// Scalar field of a [`DenseMatrix`]: `f64` or [`Complex64`].
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn conj(self) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conj(self) -> Self {
        self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
}

/// Row-major dense matrix; serializes as an array of rows.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<T>>", try_from = "Vec<Vec<T>>", bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> From<DenseMatrix<T>> for Vec<Vec<T>> {
    fn from(m: DenseMatrix<T>) -> Self {
        m.to_rows()
    }
}

impl<T: Scalar> TryFrom<Vec<Vec<T>>> for DenseMatrix<T> {
    type Error = Error;

    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

pub type Matrix = DenseMatrix<f64>;
pub type CMatrix = DenseMatrix<Complex64>;

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let c = columns.len();
        let r = columns.first().map_or(0, Vec::len);
        for col in columns {
            if col.len() != r {
                return Err(Error::DimensionMismatch { expected: r, got: col.len() });
            }
        }
        Ok(Self::from_fn(r, c, |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols.max(1)).map(<[T]>::to_vec).take(self.rows).collect()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[T]) {
        for (i, &v) in values.iter().enumerate().take(self.rows) {
            self[(i, j)] = v;
        }
    }

    /// Submatrix made of the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, |i, j| self[(rows[i], j)])
    }

    /// The first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        Self::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.modulus()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x.modulus().powi(2)).sum::<f64>().sqrt()
    }

    /// Entrywise max of `|self - other|`; infinite when shapes differ.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((*a - *b).modulus()))
    }

    /// Exact symmetry test.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: rhs.rows });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] = out.data[i * rhs.cols + j] + a * rhs[(l, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect())
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: rhs.rows * rhs.cols,
            });
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }
}

impl Matrix {
    pub fn to_complex(&self) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    /// Symmetric part `(M + Mᵀ)/2`, symmetric exactly.
    pub fn symmetrized(&self) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

impl CMatrix {
    /// Largest imaginary part over all entries.
    pub fn max_imag(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    pub fn real_part(&self) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.re).collect() }
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Mul for &DenseMatrix<T> {
    type Output = DenseMatrix<T>;
    /// Panics on a shape mismatch; use [`DenseMatrix::matmul`] for a fallible product.
    fn mul(self, rhs: Self) -> DenseMatrix<T> {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl<T: Scalar> Add for &DenseMatrix<T> {
    type Output = DenseMatrix<T>;
    fn add(self, rhs: Self) -> DenseMatrix<T> {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl<T: Scalar> Sub for &DenseMatrix<T> {
    type Output = DenseMatrix<T>;
    fn sub(self, rhs: Self) -> DenseMatrix<T> {
        self.try_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl<T: Scalar> fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Eigenpairs of a real symmetric matrix, values ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Matrix,
}

impl SpectralDecomposition {
    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let scaled = Matrix::from_fn(self.vectors.rows(), self.vectors.cols(), |i, j| {
            self.vectors[(i, j)] * self.values[j]
        });
        &scaled * &self.vectors.transpose()
    }
}

/// Full singular value decomposition `A = U Σ Vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `m × m` orthogonal.
    pub left: Matrix,
    /// `min(m, n)` values, nonincreasing.
    pub singulars: Vec<f64>,
    /// `n × n` orthogonal.
    pub right: Matrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Matrix {
        let (m, n) = (self.left.rows(), self.right.rows());
        let mut sigma = Matrix::zeros(m, n);
        for (i, &s) in self.singulars.iter().enumerate() {
            sigma[(i, i)] = s;
        }
        &(&self.left * &sigma) * &self.right.transpose()
    }
}

fn ensure_finite(a: &Matrix) -> Result<()> {
    if a.as_slice().iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Contract("matrix has non-finite entries".into()))
    }
}

/// Flips `v` so its first entry above `1e-12·‖v‖∞` is positive.
fn sign_normalize(v: &mut [f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
            return true;
        }
    }
    false
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Values come out ascending. Eigenvectors are sign-normalized (first
/// significant entry positive) and tied eigenvalues are ordered by the
/// lexicographic order of their normalized eigenvectors.
pub fn sym_eig(a: &Matrix) -> Result<SpectralDecomposition> {
    if !a.is_square() {
        return Err(Error::Contract(format!("sym_eig needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    if !a.is_symmetric() {
        return Err(Error::Contract("sym_eig needs an exactly symmetric matrix".into()));
    }
    ensure_finite(a)?;
    let n = a.rows();
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    let total = a.frobenius();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| w[(i, j)] * w[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_OFF_TOL * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (w[(q, q)] - w[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let wkp = w[(k, p)];
                    let wkq = w[(k, q)];
                    w[(k, p)] = c * wkp - s * wkq;
                    w[(k, q)] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let wpk = w[(p, k)];
                    let wqk = w[(q, k)];
                    w[(p, k)] = c * wpk - s * wqk;
                    w[(q, k)] = s * wpk + c * wqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| {
            let mut col = v.column(j);
            sign_normalize(&mut col);
            (w[(j, j)], col)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let radius = pairs.iter().fold(0.0f64, |m, p| m.max(p.0.abs())).max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (pairs[end].0 - pairs[end - 1].0).abs() <= TIE_TOL * radius {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| lex_cmp(&a.1, &b.1));
        start = end;
    }
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| pairs[j].1[i]);
    Ok(SpectralDecomposition { values, vectors })
}

/// One-sided Jacobi on the columns of a tall matrix (`m ≥ n`).
/// Returns `(U_thin columns, σ, V)` before sorting.
fn hestenes(a: &Matrix) -> (Matrix, Matrix) {
    let (m, n) = (a.rows(), a.cols());
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * x - s * y;
                    w[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

/// Full SVD by one-sided Jacobi.
///
/// Left vectors belonging to zero singular values are filled in by
/// [`orthonormal_complete`], so both factors are always square orthogonal.
pub fn svd(a: &Matrix) -> Result<SvdFactors> {
    ensure_finite(a)?;
    if a.rows() < a.cols() {
        let t = svd(&a.transpose())?;
        return Ok(SvdFactors { left: t.right, singulars: t.singulars, right: t.left });
    }
    let (m, n) = (a.rows(), a.cols());
    let (w, v) = hestenes(a);
    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..n)
        .map(|j| {
            let col = w.column(j);
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm, col, v.column(j))
        })
        .collect();
    triples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let smax = triples.first().map_or(0.0, |t| t.0);
    let cutoff = smax * f64::EPSILON * (m.max(n) as f64);

    let mut left_cols: Vec<Vec<f64>> = Vec::new();
    let mut singulars = Vec::with_capacity(n);
    let mut right_cols = Vec::with_capacity(n);
    for (s, mut u, mut vcol) in triples {
        if s > cutoff && s > 0.0 {
            u.iter_mut().for_each(|x| *x /= s);
            if sign_normalize(&mut vcol) {
                u.iter_mut().for_each(|x| *x = -*x);
            }
            left_cols.push(u);
            singulars.push(s);
        } else {
            sign_normalize(&mut vcol);
            singulars.push(0.0);
        }
        right_cols.push(vcol);
    }
    let thin = Matrix::from_columns(&left_cols)?;
    let left = if left_cols.is_empty() {
        Matrix::identity(m)
    } else {
        orthonormal_complete_with(&Matrix::from_fn(m, left_cols.len(), |i, j| thin[(i, j)]), 1e-8)?
    };
    let right = Matrix::from_columns(&right_cols)?;
    Ok(SvdFactors { left, singulars, right })
}

/// Singular values only, nonincreasing.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    ensure_finite(a)?;
    let tall = if a.rows() >= a.cols() { a.clone() } else { a.transpose() };
    let (w, _) = hestenes(&tall);
    let mut s: Vec<f64> = (0..w.cols())
        .map(|j| (0..w.rows()).map(|i| w[(i, j)] * w[(i, j)]).sum::<f64>().sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Singular values of a complex matrix via its real `2m × 2n` embedding
/// `[[Re, -Im], [Im, Re]]`, whose spectrum is that of `a` with every value doubled.
pub fn complex_singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    let (m, n) = (a.rows(), a.cols());
    let emb = Matrix::from_fn(2 * m, 2 * n, |i, j| {
        let z = a[(i % m, j % n)];
        match (i < m, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let s = singular_values(&emb)?;
    Ok(s.into_iter().step_by(2).collect())
}

/// Extends orthonormal columns to a full orthogonal basis.
///
/// The first `k` columns of the output are `z` unchanged.
pub fn orthonormal_complete(z: &Matrix) -> Result<Matrix> {
    orthonormal_complete_with(z, TAU_ORTH)
}

fn orthonormal_complete_with(z: &Matrix, tol: f64) -> Result<Matrix> {
    let (n, k) = (z.rows(), z.cols());
    if k > n {
        return Err(Error::Contract(format!("cannot complete {k} columns in {n}-space")));
    }
    let gram = &z.transpose() * z;
    let dev = gram.max_abs_diff(&Matrix::identity(k));
    if dev > tol {
        return Err(Error::Contract(format!("columns are not orthonormal (deviation {dev:.3e})")));
    }
    let mut basis: Vec<Vec<f64>> = (0..k).map(|j| z.column(j)).collect();
    while basis.len() < n {
        // Standard basis vector with the largest component outside the span.
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..n {
            let mut cand = vec![0.0; n];
            cand[e] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let dot: f64 = cand.iter().zip(b).map(|(x, y)| x * y).sum();
                    cand.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(bn, _)| norm > *bn + 1e-14) {
                best = Some((norm, cand));
            }
        }
        let (norm, mut cand) = best.expect("n > 0");
        cand.iter_mut().for_each(|x| *x /= norm);
        basis.push(cand);
    }
    Matrix::from_columns(&basis)
}

/// Number of singular values above `tol · σ_max`; zero for the zero matrix.
pub fn numerical_rank(m: &Matrix, tol: f64) -> usize {
    if m.rows() == 0 || m.cols() == 0 || m.max_abs() == 0.0 {
        return 0;
    }
    let s = singular_values(m).unwrap_or_default();
    let smax = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > tol * smax).count()
}

/// Minimum-norm least-squares solution of `a x = b`, discarding singular
/// values below `rcond · σ_max`.
pub fn lstsq(a: &Matrix, b: &[f64], rcond: f64) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: b.len() });
    }
    let f = svd(a)?;
    let smax = f.singulars.first().copied().unwrap_or(0.0);
    let utb = f.left.transpose().mul_vec(b)?;
    let mut y = vec![0.0; a.cols()];
    for (i, &s) in f.singulars.iter().enumerate() {
        if s > rcond * smax && s > 0.0 {
            y[i] = utb[i] / s;
        }
    }
    f.right.mul_vec(&y)
}

/// Solves the `n × n` system in place by LU with partial pivoting.
///
/// `a` is row-major and is overwritten; `b` receives the solution. Returns
/// `false` when a pivot vanishes.
pub fn lu_solve_in_place(n: usize, a: &mut [Complex64], b: &mut [Complex64]) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].norm_sqr();
        for r in (col + 1)..n {
            let v = a[r * n + col].norm_sqr();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return false;
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in (col + 1)..n {
            let f = a[r * n + col] / d;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in (col + 1)..n {
                let t = a[col * n + j];
                a[r * n + j] -= f * t;
            }
            let t = b[col];
            b[r] -= f * t;
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for j in (col + 1)..n {
            s -= a[col * n + j] * b[j];
        }
        b[col] = s / a[col * n + col];
    }
    true
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Contract("determinant of a non-square matrix".into()));
    }
    let n = a.rows();
    let mut m = a.as_slice().to_vec();
    let mut d = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x * n + col].abs().total_cmp(&m[y * n + col].abs()))
            .unwrap_or(col);
        if m[piv * n + col] == 0.0 {
            return Ok(0.0);
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            d = -d;
        }
        let p = m[col * n + col];
        d *= p;
        for r in (col + 1)..n {
            let f = m[r * n + col] / p;
            for j in col..n {
                m[r * n + j] -= f * m[col * n + j];
            }
        }
    }
    Ok(d)
}

/// Modified Gram–Schmidt on the columns of `a`; errors on rank deficiency.
pub fn orthonormalize_columns(a: &Matrix) -> Result<Matrix> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(a.cols());
    for j in 0..a.cols() {
        let mut c = a.column(j);
        for _ in 0..2 {
            for b in &cols {
                let dot: f64 = c.iter().zip(b).map(|(x, y)| x * y).sum();
                c.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Degenerate("columns are linearly dependent".into()));
        }
        c.iter_mut().for_each(|x| *x /= norm);
        cols.push(c);
    }
    Matrix::from_columns(&cols).map(|m| if a.cols() == 0 { Matrix::zeros(a.rows(), 0) } else { m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_matrix, random_orthogonal, random_stiefel, random_symmetric, seeded_rng};

    /// Characteristic polynomial coefficients (monic, highest first) by
    /// Faddeev–LeVerrier; independent of the Jacobi code path.
    fn char_poly(a: &Matrix) -> Vec<f64> {
        let n = a.rows();
        let mut coeffs = vec![1.0];
        let mut m = Matrix::zeros(n, n);
        for k in 1..=n {
            let am = a * &m;
            let prev = *coeffs.last().unwrap();
            let mk = &am + &Matrix::identity(n).scale(prev);
            let ck = -(&(a * &mk)).trace() / k as f64;
            coeffs.push(ck);
            m = mk;
        }
        coeffs
    }

    fn horner(c: &[f64], x: f64) -> f64 {
        c.iter().fold(0.0, |acc, &a| acc * x + a)
    }

    /// Real roots by grid scan and bisection over the Gershgorin interval.
    fn real_roots(c: &[f64], a: &Matrix) -> Vec<f64> {
        let n = a.rows();
        let r = (0..n)
            .map(|i| (0..n).map(|j| a[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
            + 1.0;
        let steps = 200_000;
        let mut roots = Vec::new();
        let mut x0 = -r;
        let mut f0 = horner(c, x0);
        for s in 1..=steps {
            let x1 = -r + 2.0 * r * s as f64 / steps as f64;
            let f1 = horner(c, x1);
            if f0 == 0.0 {
                roots.push(x0);
            } else if f0 * f1 < 0.0 {
                let (mut lo, mut hi) = (x0, x1);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if horner(c, lo) * horner(c, mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            x0 = x1;
            f0 = f1;
        }
        roots
    }

    #[test]
    fn identity_spectrum() {
        let e = sym_eig(&Matrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        assert_eq!(e.reconstruct().max_abs_diff(&Matrix::identity(3)), 0.0);
    }

    #[test]
    fn diagonal_spectrum_is_permutation() {
        let a = Matrix::from_diag(&[3.0, 1.0, 2.0]);
        let e = sym_eig(&a).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        let expected = Matrix::from_rows(&[vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(e.vectors, expected);
    }

    #[test]
    fn random_symmetric_reconstructs() {
        let mut rng = seeded_rng(11);
        let a = random_symmetric(&mut rng, 5);
        let e = sym_eig(&a).unwrap();
        assert!(e.reconstruct().max_abs_diff(&a) < 1e-12);
        let g = &e.vectors.transpose() * &e.vectors;
        assert!(g.max_abs_diff(&Matrix::identity(5)) < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_asymmetric_and_rectangular() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0 + 1e-15, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&a), Err(Error::Contract(_))));
        assert!(matches!(sym_eig(&Matrix::zeros(2, 3)), Err(Error::Contract(_))));
    }

    #[test]
    fn eigenvalues_match_characteristic_roots() {
        let mut rng = seeded_rng(5);
        for n in 1..=4 {
            for _ in 0..5 {
                let a = random_symmetric(&mut rng, n);
                let roots = real_roots(&char_poly(&a), &a);
                let vals = sym_eig(&a).unwrap().values;
                assert_eq!(roots.len(), n, "root count for n={n}");
                for (r, v) in roots.iter().zip(&vals) {
                    assert!((r - v).abs() < 1e-9, "{r} vs {v}");
                }
            }
        }
    }

    #[test]
    fn tied_eigenvectors_are_ordered_deterministically() {
        let a = Matrix::from_diag(&[2.0, 1.0, 2.0, 1.0]);
        let e = sym_eig(&a).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 2.0, 2.0]);
        // Within each tie, lexicographically ascending normalized vectors.
        assert_eq!(e.vectors.column(0), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(e.vectors.column(1), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(e.vectors.column(2), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(e.vectors.column(3), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn svd_small_cases() {
        let s = svd(&Matrix::identity(3)).unwrap();
        assert_eq!(s.singulars, vec![1.0, 1.0, 1.0]);
        let d = svd(&Matrix::from_diag(&[2.0, 0.0])).unwrap();
        assert_eq!(d.singulars, vec![2.0, 0.0]);
        assert!(d.reconstruct().max_abs_diff(&Matrix::from_diag(&[2.0, 0.0])) < 1e-15);
    }

    #[test]
    fn svd_random_rectangular() {
        let mut rng = seeded_rng(3);
        for (m, n) in [(4, 3), (3, 4), (5, 5), (2, 6)] {
            let a = random_matrix(&mut rng, m, n);
            let f = svd(&a).unwrap();
            assert!(f.reconstruct().max_abs_diff(&a) < 1e-12);
            assert!(f.singulars.windows(2).all(|w| w[0] >= w[1]));
            assert!((&f.left.transpose() * &f.left).max_abs_diff(&Matrix::identity(m)) < 1e-12);
            assert!((&f.right.transpose() * &f.right).max_abs_diff(&Matrix::identity(n)) < 1e-12);
        }
    }

    #[test]
    fn svd_of_transpose_swaps_factors() {
        let mut rng = seeded_rng(8);
        let a = random_matrix(&mut rng, 4, 3);
        let f = svd(&a).unwrap();
        let g = svd(&a.transpose()).unwrap();
        for (x, y) in f.singulars.iter().zip(&g.singulars) {
            assert!((x - y).abs() < 1e-12);
        }
        for j in 0..3 {
            let (u, v2) = (f.left.column(j), g.right.column(j));
            let dot: f64 = u.iter().zip(&v2).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn complex_singular_values_of_diagonal() {
        let a = CMatrix::from_diag(&[Complex64::new(0.0, 3.0), Complex64::new(1.0, 1.0)]);
        let s = complex_singular_values(&a).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-14);
        assert!((s[1] - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn completion_cases() {
        let e1 = Matrix::from_columns(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let q = orthonormal_complete(&e1).unwrap();
        assert_eq!(q.column(0), vec![1.0, 0.0, 0.0]);
        assert!((&q.transpose() * &q).max_abs_diff(&Matrix::identity(3)) < 1e-14);

        let mut rng = seeded_rng(2);
        let o = random_orthogonal(&mut rng, 4);
        assert_eq!(orthonormal_complete(&o).unwrap(), o);

        let z = random_stiefel(&mut rng, 4, 2);
        let q = orthonormal_complete(&z).unwrap();
        assert!((&q.transpose() * &q).max_abs_diff(&Matrix::identity(4)) < 1e-12);
        assert_eq!(q.leading_columns(2), z);

        let bad = Matrix::from_columns(&[vec![1.0, 1.0, 0.0]]).unwrap();
        assert!(matches!(orthonormal_complete(&bad), Err(Error::Contract(_))));
    }

    #[test]
    fn rank_cases() {
        assert_eq!(numerical_rank(&Matrix::zeros(3, 4), RANK_TOL), 0);
        assert_eq!(numerical_rank(&Matrix::identity(4), 1e-8), 4);
        let mut rng = seeded_rng(4);
        let a = random_matrix(&mut rng, 5, 2);
        let b = random_matrix(&mut rng, 2, 6);
        assert_eq!(numerical_rank(&(&a * &b), RANK_TOL), 2);
    }

    #[test]
    fn lu_solves_complex_system() {
        let a = vec![
            Complex64::new(2.0, 1.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(3.0, 0.5),
        ];
        let x = vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)];
        let mut b = vec![a[0] * x[0] + a[1] * x[1], a[2] * x[0] + a[3] * x[1]];
        let mut work = a.clone();
        assert!(lu_solve_in_place(2, &mut work, &mut b));
        assert!((b[0] - x[0]).norm() < 1e-14 && (b[1] - x[1]).norm() < 1e-14);
        let mut sing = vec![Complex64::new(0.0, 0.0); 4];
        let mut rhs = vec![Complex64::new(1.0, 0.0); 2];
        assert!(!lu_solve_in_place(2, &mut sing, &mut rhs));
    }

    #[test]
    fn det_small_cases() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        assert!((det(&a).unwrap() + 6.0).abs() < 1e-15);
        assert_eq!(det(&Matrix::zeros(3, 3)).unwrap(), 0.0);
        let mut rng = seeded_rng(4);
        let q = random_orthogonal(&mut rng, 4);
        assert!((det(&q).unwrap().abs() - 1.0).abs() < 1e-12);
        assert!(det(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn lstsq_recovers_consistent_solution() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap();
        let x = lstsq(&a, &[1.0, 4.0, 3.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            #[test]
            fn eig_reconstructs(seed in any::<u64>(), n in 1usize..8) {
                let mut rng = seeded_rng(seed);
                let a = random_symmetric(&mut rng, n);
                let e = sym_eig(&a).unwrap();
                prop_assert!(e.reconstruct().max_abs_diff(&a) < TAU_RECON);
                prop_assert!((&e.vectors.transpose() * &e.vectors).max_abs_diff(&Matrix::identity(n)) < TAU_ORTH);
            }

            #[test]
            fn rank_is_orthogonally_invariant(seed in any::<u64>(), r in 0usize..4) {
                let mut rng = seeded_rng(seed);
                let a = &random_matrix(&mut rng, 5, r) * &random_matrix(&mut rng, r, 4);
                let p = random_orthogonal(&mut rng, 5);
                let q = random_orthogonal(&mut rng, 4);
                let b = &(&p * &a) * &q;
                prop_assert_eq!(numerical_rank(&a, RANK_TOL), r);
                prop_assert_eq!(numerical_rank(&b, RANK_TOL), r);
            }
        }
    }
}

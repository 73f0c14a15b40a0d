//! Dense row-major matrices, Cholesky factorization, and power iteration.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::fmath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinalgError {
    /// A Cholesky pivot was non-positive; the matrix is not positive definite.
    NotPositiveDefinite,
    /// Power iteration was asked to estimate the spectral norm of an all-zero
    /// matrix.
    ZeroMatrix,
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NotPositiveDefinite => write!(f, "matrix is not positive definite"),
            LinalgError::ZeroMatrix => write!(f, "matrix is identically zero"),
        }
    }
}

impl core::error::Error for LinalgError {}

/// Dense real matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wrap a row-major buffer. Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "buffer length {} does not match {}x{}",
            data.len(),
            rows,
            cols
        );
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self * v` for a column vector `v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matvec dimension mismatch");
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            out.push(dot(self.row(i), v));
        }
        out
    }

    /// `self^T * v`.
    pub fn matvec_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o += vi * w;
            }
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                let b_row = other.row(k);
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`. Inner loops run over contiguous rows of both
    /// operands, which is the fast layout for row-major storage.
    pub fn matmul_transpose_b(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a_row, other.row(j));
            }
        }
        out
    }

    /// `self^T * other`, accumulated row-by-row so the inner loop is a
    /// vectorizable axpy over contiguous memory.
    pub fn matmul_transpose_a(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for &v in &self.data {
            m = m.max(fmath::abs(v));
        }
        m
    }

    pub fn add_scaled_identity(&mut self, eps: f64) {
        assert_eq!(self.rows, self.cols, "not square");
        for i in 0..self.rows {
            self.data[i * self.cols + i] += eps;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    fmath::sqrt(dot(v, v))
}

/// Lower-triangular Cholesky factor together with the log-determinant of the
/// factored matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: Matrix,
    log_det: f64,
}

impl CholeskyFactor {
    /// Wrap an existing lower-triangular factor; the log-determinant is
    /// accumulated the same way [`cholesky`] does.
    pub fn from_lower(lower: Matrix) -> CholeskyFactor {
        assert_eq!(lower.rows(), lower.cols(), "factor must be square");
        let mut log_det = 0.0;
        for i in 0..lower.rows() {
            let d = lower.get(i, i);
            assert!(d > 0.0, "factor diagonal must be positive");
            for j in i + 1..lower.cols() {
                assert_eq!(lower.get(i, j), 0.0, "factor must be lower-triangular");
            }
            log_det += 2.0 * fmath::ln(d);
        }
        CholeskyFactor { lower, log_det }
    }

    #[inline]
    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    #[inline]
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    /// Solve `L x = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "solve dimension mismatch");
        let mut x = vec![0.0; n];
        for i in 0..n {
            let row = self.lower.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] = (b[i] - s) / row[i];
        }
        x
    }

    /// Squared Mahalanobis half-norm `||L^{-1} r||^2`.
    pub fn mahalanobis_sq(&self, r: &[f64]) -> f64 {
        let x = self.solve_lower(r);
        dot(&x, &x)
    }

    /// Reconstruct `L * L^T`.
    pub fn reconstruct(&self) -> Matrix {
        self.lower.matmul_transpose_b(&self.lower)
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Panics if `m` is not square or deviates from symmetry by more than 1e-10;
/// returns [`LinalgError::NotPositiveDefinite`] if a pivot is non-positive,
/// which is how degenerate covariances surface to callers that own the jitter
/// policy.
pub fn cholesky(m: &Matrix) -> Result<CholeskyFactor, LinalgError> {
    let n = m.rows();
    assert_eq!(n, m.cols(), "cholesky requires a square matrix");
    let scale = m.max_abs().max(1.0);
    for i in 0..n {
        for j in 0..i {
            assert!(
                fmath::abs(m.get(i, j) - m.get(j, i)) <= 1e-10 * scale,
                "cholesky requires a symmetric matrix"
            );
        }
    }

    let mut lower = Matrix::zeros(n, n);
    let mut log_det = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= lower.get(i, k) * lower.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(LinalgError::NotPositiveDefinite);
                }
                let d = fmath::sqrt(s);
                lower.set(i, j, d);
                log_det += 2.0 * fmath::ln(d);
            } else {
                lower.set(i, j, s / lower.get(j, j));
            }
        }
    }
    Ok(CholeskyFactor { lower, log_det })
}

/// One or more steps of power iteration for the largest singular value.
///
/// `u` is the current left-singular-vector estimate (unit norm, length
/// `w.rows()`). Returns the spectral-norm estimate and the updated `u`. The
/// estimate is non-decreasing in the step count and converges to the true
/// largest singular value from below.
pub fn power_iteration_spectral_norm(
    w: &Matrix,
    u: &[f64],
    steps: usize,
) -> Result<(f64, Vec<f64>), LinalgError> {
    assert_eq!(u.len(), w.rows(), "u length must match row count");
    if w.max_abs() == 0.0 {
        return Err(LinalgError::ZeroMatrix);
    }
    let mut u = u.to_vec();
    let mut sigma = 0.0;
    for _ in 0..steps.max(1) {
        let mut v = w.matvec_transpose(&u);
        let vn = norm2(&v);
        if vn < 1e-300 {
            // u is orthogonal to the range of W^T; restart from the first
            // nonzero row direction.
            let i = (0..w.rows())
                .find(|&i| w.row(i).iter().any(|&x| x != 0.0))
                .expect("nonzero matrix has a nonzero row");
            u.iter_mut().for_each(|x| *x = 0.0);
            u[i] = 1.0;
            v = w.matvec_transpose(&u);
        }
        let vn = norm2(&v);
        v.iter_mut().for_each(|x| *x /= vn);
        let wu = w.matvec(&v);
        sigma = norm2(&wu);
        u = wu;
        u.iter_mut().for_each(|x| *x /= sigma);
    }
    Ok((sigma, u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_identity() {
        let f = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(f.lower(), &Matrix::identity(3));
        assert_eq!(f.log_det(), 0.0);
    }

    #[test]
    fn cholesky_hand_case() {
        let m = Matrix::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let f = cholesky(&m).unwrap();
        assert!((f.lower().get(0, 0) - 2.0).abs() < 1e-15);
        assert!((f.lower().get(1, 0) - 1.0).abs() < 1e-15);
        assert!((f.lower().get(1, 1) - core::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(f.lower().get(0, 1) == 0.0);
        assert!((f.log_det() - 8.0f64.ln()).abs() < 1e-14);
        // Independent check: the factor reproduces the input.
        let r = f.reconstruct();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.get(i, j) - m.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cholesky_indefinite_rejected() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert_eq!(cholesky(&m), Err(LinalgError::NotPositiveDefinite));
    }

    #[test]
    fn solve_lower_inverts_triangular_system() {
        let m = Matrix::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let f = cholesky(&m).unwrap();
        let b = [1.0, -2.0];
        let x = f.solve_lower(&b);
        let back = f.lower().matvec(&x);
        assert!((back[0] - b[0]).abs() < 1e-14);
        assert!((back[1] - b[1]).abs() < 1e-14);
    }

    #[test]
    fn power_iteration_diagonal() {
        let w = Matrix::from_rows(&[&[3.0, 0.0], &[0.0, 1.0]]);
        let u = [0.6, 0.8];
        let (sigma, _) = power_iteration_spectral_norm(&w, &u, 200).unwrap();
        assert!((sigma - 3.0).abs() < 1e-10);
    }

    #[test]
    fn power_iteration_nilpotent() {
        // sigma = sqrt(largest eigenvalue of W^T W) = 2.
        let w = Matrix::from_rows(&[&[0.0, 2.0], &[0.0, 0.0]]);
        let u = [1.0, 0.0];
        let (sigma, _) = power_iteration_spectral_norm(&w, &u, 50).unwrap();
        assert!((sigma - 2.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_identity_single_step() {
        let w = Matrix::identity(4);
        let u = [0.5, 0.5, 0.5, 0.5];
        let (sigma, u1) = power_iteration_spectral_norm(&w, &u, 1).unwrap();
        assert!((sigma - 1.0).abs() < 1e-14);
        assert!((norm2(&u1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn power_iteration_zero_matrix() {
        let w = Matrix::zeros(3, 3);
        let u = [1.0, 0.0, 0.0];
        assert_eq!(
            power_iteration_spectral_norm(&w, &u, 1),
            Err(LinalgError::ZeroMatrix)
        );
    }
}

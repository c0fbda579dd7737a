//! Dense square matrices and the validated stochastic-matrix newtype.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result, ValidationError};

/// Entries in `[-NEGATIVE_CLAMP_TOL, 0)` are clamped to zero.
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-12;
/// Absolute tolerance on each row sum.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Square real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Matrix with every entry equal to `value`.
    pub fn filled(n: usize, value: f64) -> Self {
        Matrix {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Matrix { n, data })
    }

    /// Builds a matrix from nested rows; every row must have as many entries as there are rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, ValidationError> {
        let n = rows.len();
        if n == 0 {
            return Err(ValidationError::Empty);
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(ValidationError::NotSquare {
                    row: i,
                    len: row.len(),
                    expected: n,
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { n, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n.max(1))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.to_vec()).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.matvec_into(x, &mut out);
        out
    }

    /// `out = self * x`; `out` and `x` must both have length `dim()`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (o, row) in out.iter_mut().zip(self.rows()) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let brow = other.row(k);
                let orow = &mut out.data[i * n..(i + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn pow(&self, mut exp: u32) -> Matrix {
        let mut base = self.clone();
        let mut acc = Matrix::identity(self.n);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.matmul(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.matmul(&base);
            }
        }
        acc
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "add dimension mismatch");
        Matrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &Matrix) {
        assert_eq!(self.n, other.n, "add dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "sub dimension mismatch");
        Matrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.rows()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.rows())
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// A nonnegative square matrix whose rows each sum to one.
///
/// Construction goes through [`validate_matrix`]; the contents never change afterwards.
#[derive(Clone, PartialEq)]
pub struct StochasticMatrix(Matrix);

impl StochasticMatrix {
    pub fn new(raw: Matrix) -> Result<Self, ValidationError> {
        let n = raw.dim();
        if n == 0 {
            return Err(ValidationError::Empty);
        }
        let mut m = raw;
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let v = &mut m[(i, j)];
                if !v.is_finite() {
                    return Err(ValidationError::NonFinite { row: i, col: j });
                }
                if *v < 0.0 {
                    if *v < -NEGATIVE_CLAMP_TOL {
                        return Err(ValidationError::NegativeEntry {
                            row: i,
                            col: j,
                            value: *v,
                        });
                    }
                    *v = 0.0;
                }
                sum += *v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(ValidationError::RowSum { row: i, sum });
            }
        }
        Ok(StochasticMatrix(m))
    }

    pub fn identity(n: usize) -> Self {
        StochasticMatrix(Matrix::identity(n))
    }

    /// The rank-one averaging matrix with every entry `1/n`.
    pub fn uniform(n: usize) -> Self {
        StochasticMatrix(Matrix::filled(n, 1.0 / n as f64))
    }

    /// Permutation matrix sending coordinate `perm[i]` to position `i`, i.e. `(Px)_i = x_{perm[i]}`.
    pub fn permutation(perm: &[usize]) -> Result<Self, ValidationError> {
        let n = perm.len();
        let mut m = Matrix::zeros(n);
        for (i, &p) in perm.iter().enumerate() {
            if p >= n {
                return Err(ValidationError::NotSquare {
                    row: i,
                    len: p + 1,
                    expected: n,
                });
            }
            m[(i, p)] = 1.0;
        }
        StochasticMatrix::new(m)
    }

    /// Averages coordinates `i` and `j`; identity elsewhere.
    pub fn pair_average(n: usize, i: usize, j: usize) -> Self {
        assert!(i < n && j < n && i != j, "pair ({i}, {j}) out of range for n = {n}");
        let mut m = Matrix::identity(n);
        m[(i, i)] = 0.5;
        m[(j, j)] = 0.5;
        m[(i, j)] = 0.5;
        m[(j, i)] = 0.5;
        StochasticMatrix(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn has_positive_diagonal(&self) -> bool {
        (0..self.dim()).all(|i| self.0[(i, i)] > 0.0)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.matvec(x)
    }

    pub fn matmul(&self, other: &StochasticMatrix) -> StochasticMatrix {
        // Products of stochastic matrices stay stochastic up to rounding.
        StochasticMatrix(self.0.matmul(&other.0))
    }

    /// Convex combination `sum_k w_k M_k`; weights must be nonnegative and sum to one.
    pub fn mixture<'a, I>(n: usize, terms: I) -> Result<Self, ValidationError>
    where
        I: IntoIterator<Item = (f64, &'a StochasticMatrix)>,
    {
        let mut acc = Matrix::zeros(n);
        for (w, m) in terms {
            assert_eq!(m.dim(), n, "mixture dimension mismatch");
            for (a, b) in acc.data.iter_mut().zip(&m.0.data) {
                *a += w * b;
            }
        }
        StochasticMatrix::new(acc)
    }
}

impl Index<(usize, usize)> for StochasticMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl fmt::Debug for StochasticMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Serialize for StochasticMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for StochasticMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = Matrix::deserialize(d)?;
        StochasticMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<Matrix> for StochasticMatrix {
    type Error = ValidationError;
    fn try_from(m: Matrix) -> Result<Self, ValidationError> {
        StochasticMatrix::new(m)
    }
}

/// Wraps a matrix without validation. Fault injection only.
pub(crate) fn unchecked_stochastic(m: Matrix) -> StochasticMatrix {
    StochasticMatrix(m)
}

/// Validates a raw nested array as an element of the stochastic-matrix space.
///
/// Negative entries no smaller than `-1e-12` are clamped to zero. Rows are never rescaled.
pub fn validate_matrix<R: AsRef<[f64]>>(raw: &[R]) -> Result<StochasticMatrix, ValidationError> {
    StochasticMatrix::new(Matrix::from_rows(raw)?)
}

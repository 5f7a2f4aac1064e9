//! Small dense linear algebra: just enough for the rest of the crate, with
//! no external dependencies.
//!
//! Symmetric eigendecomposition uses the cyclic Jacobi method. It is not the
//! fastest choice, but it is simple, has excellent relative accuracy on the
//! well-conditioned positive definite matrices the interior-point solver
//! feeds it, and its failure mode (NotConverged) is explicit. All matrices
//! here are at most a few hundred rows, far below the size where a
//! tridiagonalization-based method would pay off.

use serde::{Deserialize, Serialize};

/// Errors from numeric linear algebra.
#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("Jacobi sweep limit reached before off-diagonal norm converged")]
    NotConverged,
    #[error("input is not positive semidefinite: min eigenvalue {0:.3e}")]
    IndefiniteInput(f64),
    #[error("linear system is singular or numerically rank-deficient")]
    SingularSystem,
}

/// Dense row-major matrix of f64.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c);
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Mat {
        let data = self.data.iter().map(|a| a * s).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        for i in 0..self.rows {
            for j in (i + 1)..self.rows {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }

    pub fn trace(&self) -> f64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// <A, B> = trace(A^T B).
    pub fn dot(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Symmetric matrix in packed lower-triangle storage (row-major:
/// a11, a21, a22, a31, ...). The packed slice has n(n+1)/2 entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMat {
    pub n: usize,
    pub packed: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat { n, packed: vec![0.0; n * (n + 1) / 2] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            *m.at_mut(i, i) = 1.0;
        }
        m
    }

    #[inline]
    fn idx(i: usize, j: usize) -> usize {
        // requires i >= j
        i * (i + 1) / 2 + j
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.packed[Self::idx(i, j)]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        &mut self.packed[Self::idx(i, j)]
    }

    pub fn from_mat(m: &Mat) -> Self {
        assert!(m.is_square());
        let n = m.rows;
        let mut s = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                s.packed[Self::idx(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
            }
        }
        s
    }

    pub fn to_mat(&self) -> Mat {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..=i {
                let v = self.packed[Self::idx(i, j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Eigenvalues in decreasing order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as the columns of `vectors`, matching the
    /// order of `values`.
    pub vectors: Mat,
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Rotations are applied in row-cyclic sweeps until the off-diagonal
/// Frobenius norm drops below machine precision relative to the matrix
/// norm. Returns eigenvalues sorted in decreasing order together with the
/// matching orthonormal eigenvectors.
pub fn sym_eigen(a: &SymMat) -> Result<SymEigen, LinalgError> {
    let n = a.n;
    let mut m = a.to_mat();
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let mut v = Mat::identity(n);
    if n == 0 {
        return Ok(SymEigen { values: vec![], vectors: v });
    }
    let norm = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * norm;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            return Ok(sorted_eigen(m, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // Rotation angle from the standard two-sided Jacobi formula.
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // A <- J^T A J on rows/columns p and q.
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                // Accumulate eigenvectors.
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(LinalgError::NotConverged)
}

fn sorted_eigen(m: Mat, v: Mat) -> SymEigen {
    let n = m.rows;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut values: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut vectors = Mat::zeros(n, n);
    for (new_col, &old_col) in idx.iter().enumerate() {
        for r in 0..n {
            vectors[(r, new_col)] = v[(r, old_col)];
        }
    }
    SymEigen { values, vectors }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(a: &SymMat) -> Result<f64, LinalgError> {
    Ok(sym_eigen(a)?.values.last().copied().unwrap_or(0.0))
}

/// Result of factoring a PSD matrix as A = B^T B.
#[derive(Clone, Debug)]
pub struct PsdFactor {
    /// Factor with `rank` rows: A ~= rows^T rows.
    pub rows: Mat,
    /// Numerical rank: eigenvalues above `tol * max(1, lambda_max)`.
    pub rank: usize,
    /// Total magnitude of negative eigenvalues clamped to zero.
    pub clamped: f64,
}

/// Factor a (numerically) positive semidefinite matrix as B^T B via its
/// eigendecomposition.
///
/// Eigenvalues in `[-tol, 0]` are treated as zero and their magnitude is
/// reported in `clamped`; an eigenvalue below `-tol` is a hard error.
/// Rows of `B` correspond to eigenvalues above `tol * max(1, lambda_max)`.
pub fn psd_factor(a: &SymMat, tol: f64) -> Result<PsdFactor, LinalgError> {
    let eig = sym_eigen(a)?;
    let n = a.n;
    let lam_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let mut clamped = 0.0;
    if let Some(&min) = eig.values.last() {
        if min < -tol {
            return Err(LinalgError::IndefiniteInput(min));
        }
    }
    let rank_cut = tol * lam_max.max(1.0);
    let mut kept = Vec::new();
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam > rank_cut {
            kept.push(k);
        } else if lam < 0.0 {
            clamped += -lam;
        }
    }
    let mut rows = Mat::zeros(kept.len(), n);
    for (r, &k) in kept.iter().enumerate() {
        let s = eig.values[k].sqrt();
        for c in 0..n {
            rows[(r, c)] = s * eig.vectors[(c, k)];
        }
    }
    Ok(PsdFactor { rank: kept.len(), rows, clamped })
}

/// Solve A x = b by LU with partial pivoting. A is consumed as a copy.
pub fn solve_linear(a: &Mat, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    assert!(a.is_square());
    assert_eq!(a.rows, b.len());
    let n = a.rows;
    let mut lu = a.clone();
    if !lu.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let mut x: Vec<f64> = b.to_vec();
    let scale = lu.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        // Partial pivot.
        let mut piv = col;
        let mut best = lu[(col, col)].abs();
        for r in (col + 1)..n {
            let v = lu[(r, col)].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best <= 1e-14 * scale {
            return Err(LinalgError::SingularSystem);
        }
        if piv != col {
            for c in 0..n {
                let tmp = lu[(col, c)];
                lu[(col, c)] = lu[(piv, c)];
                lu[(piv, c)] = tmp;
            }
            x.swap(col, piv);
        }
        let d = lu[(col, col)];
        for r in (col + 1)..n {
            let f = lu[(r, col)] / d;
            if f == 0.0 {
                continue;
            }
            lu[(r, col)] = 0.0;
            for c in (col + 1)..n {
                let v = lu[(col, c)];
                lu[(r, c)] -= f * v;
            }
            x[r] -= f * x[col];
        }
    }
    // Back substitution.
    for col in (0..n).rev() {
        x[col] /= lu[(col, col)];
        let xc = x[col];
        for r in 0..col {
            x[r] -= lu[(r, col)] * xc;
        }
    }
    Ok(x)
}

/// Cholesky factorization A = L L^T of a symmetric positive definite matrix.
/// Returns the lower factor, or SingularSystem if a pivot is not positive.
pub fn cholesky(a: &Mat) -> Result<Mat, LinalgError> {
    assert!(a.is_square());
    let n = a.rows;
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return Err(LinalgError::SingularSystem);
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solve L L^T x = b given the Cholesky factor L.
pub fn cholesky_solve(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= l[(i, k)] * x[k];
        }
        x[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            x[i] -= l[(k, i)] * x[k];
        }
        x[i] /= l[(i, i)];
    }
    x
}

/// Symmetric functions of a PD matrix through its eigensystem: A^p for
/// p in {1/2, -1/2, -1}, etc.
pub fn sym_power(eig: &SymEigen, p: f64) -> Mat {
    let n = eig.values.len();
    let mut out = Mat::zeros(n, n);
    for k in 0..n {
        let lam = eig.values[k];
        let f = lam.powf(p);
        for i in 0..n {
            let vik = eig.vectors[(i, k)] * f;
            if vik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += vik * eig.vectors[(j, k)];
            }
        }
    }
    out
}

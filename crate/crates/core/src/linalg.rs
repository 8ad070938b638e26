//! Minimal dense linear algebra for small design matrices.
//!
//! The systems here are tall-and-thin (n rows, a handful of columns), so a
//! plain Householder QR without pivoting is accurate and fast. Rank
//! deficiency is flagged with the offending column index so callers can name
//! the collinear design term.

use crate::error::{Error, Result};

/// Row-major dense matrix.
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

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        debug_assert!(rows.iter().all(|row| row.len() == c));
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// X * v.
    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(x, b)| x * b)
                    .sum::<f64>()
            })
            .collect()
    }

    /// X^T * v.
    pub fn t_mat_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            let vi = v[i];
            for (o, x) in out.iter_mut().zip(row) {
                *o += x * vi;
            }
        }
        out
    }
}

/// Least-squares solution of min ||X b - y||_2 by Householder QR, together
/// with the p x p factor R (used for covariance via (X^T X)^{-1} = R^{-1} R^{-T}).
#[derive(Debug)]
pub struct QrSolution {
    pub coef: Vec<f64>,
    /// Upper-triangular factor, p x p row-major.
    pub r: Matrix,
}

/// Solves the least-squares problem; errors with the first column index that
/// turns out linearly dependent on its predecessors.
pub fn qr_least_squares(x: &Matrix, y: &[f64]) -> Result<QrSolution> {
    let n = x.rows();
    let p = x.cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: format!("design has {n} rows, response has {}", y.len()),
        });
    }
    if n < p {
        return Err(Error::DimensionMismatch {
            context: format!("{n} rows cannot identify {p} coefficients"),
        });
    }
    let mut a = x.clone();
    let mut b = y.to_vec();

    // Initial column norms set the rank-deficiency scale per column.
    let col_scale: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| a.get(i, j) * a.get(i, j)).sum::<f64>().sqrt())
        .collect();

    for k in 0..p {
        // Householder reflector for column k, rows k..n.
        let mut norm = 0.0f64;
        for i in k..n {
            norm += a.get(i, k) * a.get(i, k);
        }
        norm = norm.sqrt();
        if norm <= 1e-10 * col_scale[k] || norm == 0.0 {
            return Err(Error::RankDeficient {
                column: k.to_string(),
            });
        }
        let alpha = if a.get(k, k) >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n - k];
        v[0] = a.get(k, k) - alpha;
        for i in (k + 1)..n {
            v[i - k] = a.get(i, k);
        }
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            // Apply I - 2 v v^T / (v^T v) to remaining columns and to b.
            for j in k..p {
                let mut dot = 0.0;
                for i in k..n {
                    dot += v[i - k] * a.get(i, j);
                }
                let f = 2.0 * dot / vnorm2;
                for i in k..n {
                    let val = a.get(i, j) - f * v[i - k];
                    a.set(i, j, val);
                }
            }
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i - k] * b[i];
            }
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                b[i] -= f * v[i - k];
            }
        }
        a.set(k, k, alpha);
    }

    // Back substitution on the top p x p triangle.
    let mut coef = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = b[i];
        for j in (i + 1)..p {
            s -= a.get(i, j) * coef[j];
        }
        coef[i] = s / a.get(i, i);
    }

    let mut r = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            r.set(i, j, a.get(i, j));
        }
    }
    Ok(QrSolution { coef, r })
}

/// (X^T X)^{-1} from the R factor of X = QR, i.e. R^{-1} R^{-T}.
pub fn normal_matrix_inverse(r: &Matrix) -> Matrix {
    let p = r.rows();
    // Invert the upper triangle.
    let mut rinv = Matrix::zeros(p, p);
    for j in (0..p).rev() {
        rinv.set(j, j, 1.0 / r.get(j, j));
        for i in (0..j).rev() {
            let mut s = 0.0;
            for k in (i + 1)..=j {
                s += r.get(i, k) * rinv.get(k, j);
            }
            rinv.set(i, j, -s / r.get(i, i));
        }
    }
    // R^{-1} R^{-T}.
    let mut out = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for k in i.max(j)..p {
                s += rinv.get(i, k) * rinv.get(j, k);
            }
            out.set(i, j, s);
        }
    }
    out
}

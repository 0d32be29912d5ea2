//! Dense symmetric positive-definite factorization.
//!
//! Kernel matrices here are at most a few thousand rows, so a plain
//! row-major lower-triangular Cholesky is sufficient. No pivoting and no
//! jitter: a non-positive pivot is reported to the caller.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("Cholesky factorization failed at pivot {pivot} of {size} (value {value:e}); matrix is not numerically positive definite")]
pub struct FactorizationError {
    pub pivot: usize,
    pub size: usize,
    pub value: f64,
}

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Fills the lower triangle (and mirrors it) from `entry(i, j)`, `j <= i`.
    pub fn symmetric_from_fn(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = entry(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: SquareMatrix,
}

impl Cholesky {
    pub fn factor(a: &SquareMatrix) -> Result<Self, FactorizationError> {
        let n = a.size();
        let mut l = SquareMatrix::zeros(n);
        for j in 0..n {
            let (head, tail) = l.data.split_at_mut(j * n);
            let row_j = &mut tail[..n];
            for k in 0..j {
                let row_k = &head[k * n..k * n + n];
                let s = a.get(j, k) - dot(&row_j[..k], &row_k[..k]);
                row_j[k] = s / row_k[k];
            }
            let d = a.get(j, j) - dot(&row_j[..j], &row_j[..j]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(FactorizationError {
                    pivot: j,
                    size: n,
                    value: d,
                });
            }
            row_j[j] = d.sqrt();
        }
        Ok(Self { l })
    }

    pub fn size(&self) -> usize {
        self.l.size()
    }

    pub fn factor_matrix(&self) -> &SquareMatrix {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.size();
        assert_eq!(b.len(), n, "right-hand side length mismatch");
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let row = self.l.row(i);
            let s = b[i] - dot(&row[..i], &y);
            y.push(s / row[i]);
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward_solve(&self, y: &[f64]) -> Vec<f64> {
        let n = self.size();
        assert_eq!(y.len(), n, "right-hand side length mismatch");
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.l.get(i, i);
            let xi = x[i];
            let row = self.l.row(i);
            for k in 0..i {
                x[k] -= row[k] * xi;
            }
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward_solve(&self.forward_solve(b))
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.size()).map(|i| self.l.get(i, i).ln()).sum::<f64>()
    }
}

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric banded matrix stored by lower diagonals: `band[(d, j)] = A[j + d, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    b: usize,
    band: DMatrix<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, b: usize) -> Self {
        Self { n, b, band: DMatrix::zeros(b + 1, n) }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), 0);
        for (i, &x) in d.iter().enumerate() {
            m.band[(0, i)] = x;
        }
        m
    }

    /// Symmetric Toeplitz band with `coeffs[d]` on the `d`-th sub/superdiagonal.
    pub fn toeplitz(n: usize, coeffs: &[f64]) -> Self {
        assert!(!coeffs.is_empty());
        let b = coeffs.len() - 1;
        let mut m = Self::zeros(n, b);
        for (d, &c) in coeffs.iter().enumerate() {
            for j in 0..n.saturating_sub(d) {
                m.band[(d, j)] = c;
            }
        }
        m
    }

    /// Accepts a dense matrix that is symmetric up to `8·ε_mach·‖A‖_F` and has
    /// no entries outside the band.
    pub fn from_dense(a: &DMatrix<f64>, b: usize) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", n, a.ncols())));
        }
        let tol = 8.0 * f64::EPSILON * a.norm();
        for j in 0..n {
            for i in j + 1..n {
                let mismatch = (a[(i, j)] - a[(j, i)]).abs();
                if mismatch > tol {
                    return Err(Error::NonSymmetric { row: i, col: j, mismatch });
                }
                if i - j > b && (a[(i, j)] != 0.0 || a[(j, i)] != 0.0) {
                    return Err(Error::Domain(format!("entry ({i}, {j}) lies outside bandwidth {b}")));
                }
            }
        }
        let mut m = Self::zeros(n, b);
        for j in 0..n {
            for d in 0..=b.min(n - 1 - j) {
                m.band[(d, j)] = a[(j + d, j)];
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    /// Smallest bandwidth that holds every nonzero entry.
    pub fn effective_bandwidth(&self) -> usize {
        (0..=self.b)
            .rev()
            .find(|&d| (0..self.n.saturating_sub(d)).any(|j| self.band[(d, j)] != 0.0))
            .unwrap_or(0)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.b {
            0.0
        } else {
            self.band[(d, lo)]
        }
    }

    /// Sets both `A[i, j]` and `A[j, i]`.
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        assert!(hi - lo <= self.b, "({i}, {j}) lies outside the band");
        self.band[(hi - lo, lo)] = x;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.band[(0, i)]).collect()
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = DVector::zeros(self.n);
        for j in 0..self.n {
            y[j] += self.band[(0, j)] * x[j];
            for d in 1..=self.b.min(self.n - 1 - j) {
                let a = self.band[(d, j)];
                y[j + d] += a * x[j];
                y[j] += a * x[j + d];
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for d in 0..=self.b.min(self.n.saturating_sub(1) - j) {
                let x = self.band[(d, j)];
                a[(j + d, j)] = x;
                a[(j, j + d)] = x;
            }
        }
        a
    }

    /// Largest absolute row sum, an upper bound for the spectral norm.
    pub fn norm_inf(&self) -> f64 {
        let mut s = vec![0.0; self.n];
        for j in 0..self.n {
            s[j] += self.band[(0, j)].abs();
            for d in 1..=self.b.min(self.n - 1 - j) {
                let a = self.band[(d, j)].abs();
                s[j + d] += a;
                s[j] += a;
            }
        }
        s.into_iter().fold(0.0, f64::max)
    }

    /// Lower band storage, `(b + 1) × n`.
    pub fn band(&self) -> &DMatrix<f64> {
        &self.band
    }

    /// Entries `(i, j, A[i, j])` with `i ≥ j`, column by column.
    pub fn lower_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| (0..=self.b.min(self.n - 1 - j)).map(move |d| (j + d, j, self.band[(d, j)])))
    }
}

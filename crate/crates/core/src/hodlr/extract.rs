//! Submatrix extraction, column appending and re-partitioning.

use nalgebra::DMatrix;

use super::{HodlrMatrix, IndexPartition, LowRank, TruncationConfig};
use crate::dense;
use crate::error::{Error, Result};

impl HodlrMatrix {
    /// `M(C, C)` for a strictly increasing index set. Off-diagonal factors are
    /// row subsets of the parent factors; blocks that lose all their indices are
    /// removed from the tree.
    pub fn extract_principal(&self, c: &[usize]) -> Result<HodlrMatrix> {
        let n = self.nrows();
        if let Some(w) = c.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::UnorderedIndices(format!("{} followed by {}", w[0], w[1])));
        }
        if let Some(&bad) = c.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, dim: n });
        }
        Ok(self.principal_rec(c))
    }

    fn principal_rec(&self, c: &[usize]) -> HodlrMatrix {
        match self {
            HodlrMatrix::Dense(m) => HodlrMatrix::Dense(m.select_rows(c).select_columns(c)),
            HodlrMatrix::Split(b) => {
                let n1 = b.a11.nrows();
                let split = c.partition_point(|&i| i < n1);
                let c1 = &c[..split];
                let c2: Vec<usize> = c[split..].iter().map(|&i| i - n1).collect();
                if c1.is_empty() {
                    return b.a22.principal_rec(&c2);
                }
                if c2.is_empty() {
                    return b.a11.principal_rec(c1);
                }
                HodlrMatrix::split(
                    b.a11.principal_rec(c1),
                    LowRank::new(b.a12.u.select_rows(c1), b.a12.v.select_rows(&c2)),
                    LowRank::new(b.a21.u.select_rows(&c2), b.a21.v.select_rows(c1)),
                    b.a22.principal_rec(&c2),
                )
            }
        }
    }

    /// `M(:, C)` keeping the row tree and every block, including empty ones.
    /// Indices must be grouped by block (all indices of a left subtree before
    /// those of the right one); the order inside a leaf is preserved.
    pub fn extract_columns(&self, c: &[usize]) -> Result<HodlrMatrix> {
        let n = self.ncols();
        if let Some(&bad) = c.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, dim: n });
        }
        self.columns_rec(c)
    }

    fn columns_rec(&self, c: &[usize]) -> Result<HodlrMatrix> {
        match self {
            HodlrMatrix::Dense(m) => Ok(HodlrMatrix::Dense(m.select_columns(c))),
            HodlrMatrix::Split(b) => {
                let m1 = b.a11.ncols();
                let split = c.iter().position(|&i| i >= m1).unwrap_or(c.len());
                let c1 = &c[..split];
                if let Some(&bad) = c[split..].iter().find(|&&i| i < m1) {
                    return Err(Error::UnorderedIndices(format!(
                        "index {bad} belongs to the left block but follows right-block indices"
                    )));
                }
                let c2: Vec<usize> = c[split..].iter().map(|&i| i - m1).collect();
                Ok(HodlrMatrix::split(
                    b.a11.columns_rec(c1)?,
                    b.a12.select_cols(&c2),
                    b.a21.select_cols(c1),
                    b.a22.columns_rec(&c2)?,
                ))
            }
        }
    }

    /// `[M X]`: the new columns join the rightmost block at every level.
    pub fn append_columns(&self, x: &DMatrix<f64>, cfg: &TruncationConfig) -> Result<HodlrMatrix> {
        if x.nrows() != self.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "appending {} rows to a matrix with {} rows",
                x.nrows(),
                self.nrows()
            )));
        }
        Ok(self.append_rec(x, cfg))
    }

    fn append_rec(&self, x: &DMatrix<f64>, cfg: &TruncationConfig) -> HodlrMatrix {
        match self {
            HodlrMatrix::Dense(m) => HodlrMatrix::Dense(dense::hstack(m, x)),
            HodlrMatrix::Split(_) if x.ncols() == 0 => self.clone(),
            HodlrMatrix::Split(b) => {
                let n1 = b.a11.nrows();
                let n2 = b.a22.nrows();
                let k = x.ncols();
                let x1 = x.rows(0, n1).into_owned();
                let x2 = x.rows(n1, n2).into_owned();
                // [U Vᵀ X1] = [U X1] · blockdiag(V, I)ᵀ
                let r = b.a12.rank();
                let c2 = b.a12.ncols();
                let mut v = DMatrix::zeros(c2 + k, r + k);
                v.view_mut((0, 0), (c2, r)).copy_from(&b.a12.v);
                for i in 0..k {
                    v[(c2 + i, r + i)] = 1.0;
                }
                let a12 = LowRank::new(dense::hstack(&b.a12.u, &x1), v).recompressed(cfg);
                HodlrMatrix::split(b.a11.clone(), a12, b.a21.clone(), b.a22.append_rec(&x2, cfg))
            }
        }
    }

    /// Prepares a square matrix for further recursion: subtrees of at most
    /// `leaf_size` rows collapse into dense leaves, empty children are removed
    /// and oversized dense leaves are bisected.
    pub fn rebalance(&self, leaf_size: usize, cfg: &TruncationConfig) -> HodlrMatrix {
        let n = self.nrows();
        match self {
            HodlrMatrix::Split(b) => {
                if n <= leaf_size {
                    return HodlrMatrix::Dense(self.to_dense());
                }
                if b.a11.nrows() == 0 && b.a11.ncols() == 0 {
                    return b.a22.rebalance(leaf_size, cfg);
                }
                if b.a22.nrows() == 0 && b.a22.ncols() == 0 {
                    return b.a11.rebalance(leaf_size, cfg);
                }
                HodlrMatrix::split(
                    b.a11.rebalance(leaf_size, cfg),
                    b.a12.clone(),
                    b.a21.clone(),
                    b.a22.rebalance(leaf_size, cfg),
                )
            }
            HodlrMatrix::Dense(m) => {
                if n > leaf_size && m.ncols() == n {
                    let p = IndexPartition::balanced(n, leaf_size);
                    HodlrMatrix::from_dense(m, &p, cfg).expect("partition built for this matrix")
                } else {
                    self.clone()
                }
            }
        }
    }
}

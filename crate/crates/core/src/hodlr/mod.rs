//! Hierarchically off-diagonal low-rank matrices.
//!
//! A [`HodlrMatrix`] is either a dense leaf or a 2×2 block node whose diagonal
//! blocks are again HODLR matrices and whose off-diagonal blocks are stored as
//! low-rank factor pairs. Rows and columns may follow different partitions, so
//! rectangular matrices (bases, column extractions) share the same machinery.
//! Binary operations require both operands to have the same block topology;
//! otherwise they fail with [`Error::IncompatiblePartition`].

mod arith;
mod extract;
mod factor;
pub mod io;
mod lowrank;

pub use lowrank::{LowRank, TruncationConfig};

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};

/// Leaf sizes of a `2^level`-leaf bisection of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPartition {
    pub level: usize,
    pub leaf_sizes: Vec<usize>,
}

impl IndexPartition {
    pub fn new(level: usize, leaf_sizes: Vec<usize>) -> Result<Self> {
        if leaf_sizes.len() != 1usize << level {
            return Err(Error::Domain(format!(
                "partition of level {level} needs {} leaves, got {}",
                1usize << level,
                leaf_sizes.len()
            )));
        }
        Ok(Self { level, leaf_sizes })
    }

    /// Balanced bisection (`⌈n/2⌉ + ⌊n/2⌋` at every split) with the given depth.
    pub fn with_level(n: usize, level: usize) -> Self {
        let mut sizes = vec![n];
        for _ in 0..level {
            sizes = sizes.iter().flat_map(|&m| [m - m / 2, m / 2]).collect();
        }
        Self { level, leaf_sizes: sizes }
    }

    /// Shallowest balanced bisection whose leaves are all at most `leaf_size`.
    pub fn balanced(n: usize, leaf_size: usize) -> Self {
        assert!(leaf_size > 0, "leaf size must be positive");
        let mut level = 0;
        // the largest leaf at depth l is ⌈n / 2^l⌉
        while n.div_ceil(1usize << level) > leaf_size {
            level += 1;
        }
        Self::with_level(n, level)
    }

    pub fn dim(&self) -> usize {
        self.leaf_sizes.iter().sum()
    }

    pub fn leaves(&self) -> usize {
        self.leaf_sizes.len()
    }

    /// The two partitions of the halves one level down.
    pub fn halves(&self) -> (IndexPartition, IndexPartition) {
        assert!(self.level > 0, "a level-0 partition has no halves");
        let h = self.leaf_sizes.len() / 2;
        (
            Self { level: self.level - 1, leaf_sizes: self.leaf_sizes[..h].to_vec() },
            Self { level: self.level - 1, leaf_sizes: self.leaf_sizes[h..].to_vec() },
        )
    }

    /// Merges adjacent leaf pairs.
    pub fn coarsen(&self) -> Option<IndexPartition> {
        if self.level == 0 {
            return None;
        }
        let sizes = self.leaf_sizes.chunks(2).map(|c| c[0] + c[1]).collect();
        Some(Self { level: self.level - 1, leaf_sizes: sizes })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub a11: HodlrMatrix,
    pub a12: LowRank,
    pub a21: LowRank,
    pub a22: HodlrMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HodlrMatrix {
    Dense(DMatrix<f64>),
    Split(Box<Node>),
}

impl HodlrMatrix {
    pub fn split(a11: HodlrMatrix, a12: LowRank, a21: LowRank, a22: HodlrMatrix) -> Self {
        debug_assert_eq!(a12.nrows(), a11.nrows());
        debug_assert_eq!(a12.ncols(), a22.ncols());
        debug_assert_eq!(a21.nrows(), a22.nrows());
        debug_assert_eq!(a21.ncols(), a11.ncols());
        HodlrMatrix::Split(Box::new(Node { a11, a12, a21, a22 }))
    }

    pub fn nrows(&self) -> usize {
        match self {
            HodlrMatrix::Dense(m) => m.nrows(),
            HodlrMatrix::Split(b) => b.a12.nrows() + b.a21.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            HodlrMatrix::Dense(m) => m.ncols(),
            HodlrMatrix::Split(b) => b.a21.ncols() + b.a12.ncols(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    /// Depth of the block tree.
    pub fn level(&self) -> usize {
        match self {
            HodlrMatrix::Dense(_) => 0,
            HodlrMatrix::Split(b) => 1 + b.a11.level().max(b.a22.level()),
        }
    }

    /// Dense matrix with the same (identity) partition for rows and columns.
    pub fn zeros(rows: &IndexPartition, cols: &IndexPartition) -> Self {
        assert_eq!(rows.level, cols.level, "row and column partitions differ in level");
        if rows.level == 0 {
            return HodlrMatrix::Dense(DMatrix::zeros(rows.dim(), cols.dim()));
        }
        let (r1, r2) = rows.halves();
        let (c1, c2) = cols.halves();
        Self::split(
            Self::zeros(&r1, &c1),
            LowRank::zeros(r1.dim(), c2.dim()),
            LowRank::zeros(r2.dim(), c1.dim()),
            Self::zeros(&r2, &c2),
        )
    }

    pub fn identity(p: &IndexPartition) -> Self {
        let mut m = Self::zeros(p, p);
        m.add_diagonal(1.0);
        m
    }

    /// Off-diagonal blocks compressed by truncated SVD.
    pub fn from_dense(m: &DMatrix<f64>, p: &IndexPartition, cfg: &TruncationConfig) -> Result<Self> {
        Self::from_dense_rect(m, p, p, cfg)
    }

    pub fn from_dense_rect(
        m: &DMatrix<f64>,
        rows: &IndexPartition,
        cols: &IndexPartition,
        cfg: &TruncationConfig,
    ) -> Result<Self> {
        if m.nrows() != rows.dim() || m.ncols() != cols.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix against a {}x{} partition",
                m.nrows(),
                m.ncols(),
                rows.dim(),
                cols.dim()
            )));
        }
        if rows.level != cols.level {
            return Err(Error::IncompatiblePartition(format!(
                "row level {} vs column level {}",
                rows.level, cols.level
            )));
        }
        Ok(Self::from_view(m.as_view(), rows, cols, cfg))
    }

    fn from_view(m: DMatrixView<f64>, rows: &IndexPartition, cols: &IndexPartition, cfg: &TruncationConfig) -> Self {
        if rows.level == 0 {
            return HodlrMatrix::Dense(m.clone_owned());
        }
        let (r1, r2) = rows.halves();
        let (c1, c2) = cols.halves();
        let (n1, m1) = (r1.dim(), c1.dim());
        let (n2, m2) = (r2.dim(), c2.dim());
        Self::split(
            Self::from_view(m.view((0, 0), (n1, m1)), &r1, &c1, cfg),
            LowRank::from_dense(&m.view((0, m1), (n1, m2)).clone_owned(), cfg),
            LowRank::from_dense(&m.view((n1, 0), (n2, m1)).clone_owned(), cfg),
            Self::from_view(m.view((n1, m1), (n2, m2)), &r2, &c2, cfg),
        )
    }

    /// Exact representation of a symmetric banded matrix on a balanced
    /// partition with leaves of at most `leaf_size` rows.
    pub fn from_banded(a: &BandedMatrix, leaf_size: usize) -> Self {
        let p = IndexPartition::balanced(a.n(), leaf_size);
        Self::from_banded_partition(a, &p)
    }

    pub fn from_banded_partition(a: &BandedMatrix, p: &IndexPartition) -> Self {
        assert_eq!(a.n(), p.dim(), "partition does not match the matrix");
        banded_block(a, 0, p)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows(), self.ncols());
        self.write_dense(&mut out.as_view_mut());
        out
    }

    fn write_dense(&self, out: &mut DMatrixViewMut<f64>) {
        match self {
            HodlrMatrix::Dense(m) => out.copy_from(m),
            HodlrMatrix::Split(b) => {
                let (n1, m1) = b.a11.shape();
                let (n2, m2) = b.a22.shape();
                b.a11.write_dense(&mut out.view_mut((0, 0), (n1, m1)));
                b.a22.write_dense(&mut out.view_mut((n1, m1), (n2, m2)));
                if b.a12.rank() > 0 {
                    out.view_mut((0, m1), (n1, m2)).copy_from(&b.a12.to_dense());
                } else {
                    out.view_mut((0, m1), (n1, m2)).fill(0.0);
                }
                if b.a21.rank() > 0 {
                    out.view_mut((n1, 0), (n2, m1)).copy_from(&b.a21.to_dense());
                } else {
                    out.view_mut((n1, 0), (n2, m1)).fill(0.0);
                }
            }
        }
    }

    pub fn matvec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "matvec with {} columns and a vector of length {}",
                self.ncols(),
                v.len()
            )));
        }
        let b = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        Ok(DVector::from_column_slice(self.mul_dense(&b).as_slice()))
    }

    /// `self · b` for a dense `b`.
    pub fn mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(b.nrows(), self.ncols(), "mul_dense dimension mismatch");
        let mut out = DMatrix::zeros(self.nrows(), b.ncols());
        self.gemm_acc_view(1.0, b.as_view(), &mut out.as_view_mut(), false);
        out
    }

    /// `selfᵀ · b` for a dense `b`.
    pub fn tr_mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(b.nrows(), self.nrows(), "tr_mul_dense dimension mismatch");
        let mut out = DMatrix::zeros(self.ncols(), b.ncols());
        self.gemm_acc_view(1.0, b.as_view(), &mut out.as_view_mut(), true);
        out
    }

    /// `out += alpha · op(self) · b` where `op` is the identity or the transpose.
    pub fn gemm_acc_view(&self, alpha: f64, b: DMatrixView<f64>, out: &mut DMatrixViewMut<f64>, trans: bool) {
        if b.ncols() == 0 {
            return;
        }
        match self {
            HodlrMatrix::Dense(m) => {
                if trans {
                    out.gemm_tr(alpha, m, &b, 1.0);
                } else {
                    out.gemm(alpha, m, &b, 1.0);
                }
            }
            HodlrMatrix::Split(blk) => {
                let (n1, m1) = blk.a11.shape();
                let (n2, m2) = blk.a22.shape();
                let k = b.ncols();
                if !trans {
                    let b1 = b.view((0, 0), (m1, k));
                    let b2 = b.view((m1, 0), (m2, k));
                    {
                        let mut o1 = out.view_mut((0, 0), (n1, k));
                        blk.a11.gemm_acc_view(alpha, b1, &mut o1, false);
                        lowrank_acc(alpha, &blk.a12.u, &blk.a12.v, b2, &mut o1);
                    }
                    let mut o2 = out.view_mut((n1, 0), (n2, k));
                    blk.a22.gemm_acc_view(alpha, b2, &mut o2, false);
                    lowrank_acc(alpha, &blk.a21.u, &blk.a21.v, b1, &mut o2);
                } else {
                    // [A11ᵀ A21ᵀ; A12ᵀ A22ᵀ]
                    let b1 = b.view((0, 0), (n1, k));
                    let b2 = b.view((n1, 0), (n2, k));
                    {
                        let mut o1 = out.view_mut((0, 0), (m1, k));
                        blk.a11.gemm_acc_view(alpha, b1, &mut o1, true);
                        lowrank_acc(alpha, &blk.a21.v, &blk.a21.u, b2, &mut o1);
                    }
                    let mut o2 = out.view_mut((m1, 0), (m2, k));
                    blk.a22.gemm_acc_view(alpha, b2, &mut o2, true);
                    lowrank_acc(alpha, &blk.a12.v, &blk.a12.u, b1, &mut o2);
                }
            }
        }
    }

    pub fn transpose(&self) -> Self {
        match self {
            HodlrMatrix::Dense(m) => HodlrMatrix::Dense(m.transpose()),
            HodlrMatrix::Split(b) => Self::split(b.a11.transpose(), b.a21.transpose(), b.a12.transpose(), b.a22.transpose()),
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        match self {
            HodlrMatrix::Dense(m) => *m *= alpha,
            HodlrMatrix::Split(b) => {
                b.a11.scale(alpha);
                b.a22.scale(alpha);
                b.a12.scale(alpha);
                b.a21.scale(alpha);
            }
        }
    }

    pub fn scaled(mut self, alpha: f64) -> Self {
        self.scale(alpha);
        self
    }

    /// Adds `c` to every diagonal entry (diagonal blocks must be square).
    pub fn add_diagonal(&mut self, c: f64) {
        match self {
            HodlrMatrix::Dense(m) => {
                let k = m.nrows().min(m.ncols());
                for i in 0..k {
                    m[(i, i)] += c;
                }
            }
            HodlrMatrix::Split(b) => {
                b.a11.add_diagonal(c);
                b.a22.add_diagonal(c);
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nrows());
        self.collect_diagonal(&mut out);
        out
    }

    fn collect_diagonal(&self, out: &mut Vec<f64>) {
        match self {
            HodlrMatrix::Dense(m) => out.extend((0..m.nrows().min(m.ncols())).map(|i| m[(i, i)])),
            HodlrMatrix::Split(b) => {
                b.a11.collect_diagonal(out);
                b.a22.collect_diagonal(out);
            }
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            HodlrMatrix::Dense(m) => (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum(),
            HodlrMatrix::Split(b) => b.a11.trace() + b.a22.trace(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_squared().sqrt()
    }

    fn frobenius_squared(&self) -> f64 {
        match self {
            HodlrMatrix::Dense(m) => m.norm_squared(),
            HodlrMatrix::Split(b) => {
                b.a11.frobenius_squared() + b.a22.frobenius_squared() + b.a12.frobenius_squared() + b.a21.frobenius_squared()
            }
        }
    }

    /// Largest off-diagonal rank anywhere in the tree.
    pub fn hodlr_rank(&self) -> usize {
        match self {
            HodlrMatrix::Dense(_) => 0,
            HodlrMatrix::Split(b) => b.a12.rank().max(b.a21.rank()).max(b.a11.hodlr_rank()).max(b.a22.hodlr_rank()),
        }
    }

    /// Stored scalars: dense leaf entries plus all factor entries.
    pub fn memory_units(&self) -> usize {
        match self {
            HodlrMatrix::Dense(m) => m.len(),
            HodlrMatrix::Split(b) => {
                b.a11.memory_units() + b.a22.memory_units() + b.a12.memory_units() + b.a21.memory_units()
            }
        }
    }

    pub fn row_leaf_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaf_sizes(&mut out, true);
        out
    }

    pub fn col_leaf_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaf_sizes(&mut out, false);
        out
    }

    fn collect_leaf_sizes(&self, out: &mut Vec<usize>, rows: bool) {
        match self {
            HodlrMatrix::Dense(m) => out.push(if rows { m.nrows() } else { m.ncols() }),
            HodlrMatrix::Split(b) => {
                b.a11.collect_leaf_sizes(out, rows);
                b.a22.collect_leaf_sizes(out, rows);
            }
        }
    }

    /// Balanced-tree partition of the rows, if the tree is perfect.
    pub fn row_partition(&self) -> Option<IndexPartition> {
        let sizes = self.row_leaf_sizes();
        IndexPartition::new(self.level(), sizes).ok()
    }

    /// True when both trees have the same node/leaf layout and block sizes.
    pub fn same_structure(&self, other: &HodlrMatrix) -> bool {
        match (self, other) {
            (HodlrMatrix::Dense(a), HodlrMatrix::Dense(b)) => a.shape() == b.shape(),
            (HodlrMatrix::Split(a), HodlrMatrix::Split(b)) => {
                a.a11.same_structure(&b.a11) && a.a22.same_structure(&b.a22)
            }
            _ => false,
        }
    }

    /// Largest absolute asymmetry `|a_ij − a_ji|` of the materialized matrix,
    /// evaluated block by block.
    pub fn asymmetry(&self) -> f64 {
        match self {
            HodlrMatrix::Dense(m) => (m - m.transpose()).amax(),
            HodlrMatrix::Split(b) => {
                let off = (b.a12.to_dense() - b.a21.to_dense().transpose()).amax();
                off.max(b.a11.asymmetry()).max(b.a22.asymmetry())
            }
        }
    }
}

fn lowrank_acc(alpha: f64, u: &DMatrix<f64>, v: &DMatrix<f64>, b: DMatrixView<f64>, out: &mut DMatrixViewMut<f64>) {
    if u.ncols() == 0 {
        return;
    }
    let t = v.tr_mul(&b);
    out.gemm(alpha, u, &t, 1.0);
}

fn banded_block(a: &BandedMatrix, offset: usize, p: &IndexPartition) -> HodlrMatrix {
    let n = p.dim();
    if p.level == 0 {
        let mut m = DMatrix::zeros(n, n);
        let b = a.bandwidth();
        for j in 0..n {
            for i in j..n.min(j + b + 1) {
                let x = a.get(offset + i, offset + j);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        return HodlrMatrix::Dense(m);
    }
    let (p1, p2) = p.halves();
    let (n1, n2) = (p1.dim(), p2.dim());
    // The upper-right block is nonzero only in its bottom-left corner: rows
    // n1-b..n1 against columns 0..b. Each nonzero row becomes one rank term.
    let b = a.bandwidth();
    let mut rows = Vec::new();
    for i in n1.saturating_sub(b)..n1 {
        let gi = offset + i;
        let any = (0..n2.min(b)).any(|j| a.get(gi, offset + n1 + j) != 0.0);
        if any {
            rows.push(i);
        }
    }
    let k = rows.len();
    let mut u = DMatrix::zeros(n1, k);
    let mut v = DMatrix::zeros(n2, k);
    for (c, &i) in rows.iter().enumerate() {
        u[(i, c)] = 1.0;
        for j in 0..n2.min(b) {
            v[(j, c)] = a.get(offset + i, offset + n1 + j);
        }
    }
    let a12 = LowRank::new(u, v);
    let a21 = a12.transpose();
    HodlrMatrix::split(banded_block(a, offset, &p1), a12, a21, banded_block(a, offset + n1, &p2))
}

//! Eigenvectors kept as the tree of orthonormal factors produced by the
//! divide-and-conquer recursion.
//!
//! A split node stands for `[Q_lo Q_hi] · blockdiag(Q₁, Q₂)` with `Q_lo`, `Q_hi`
//! orthonormal HODLR bases and `Q₁`, `Q₂` the factors of the two children. A
//! leaf is a dense orthogonal matrix from the base case. The columns of the
//! tree product follow the order in which the leaves report eigenvalues; `perm`
//! maps them to globally ascending order.
//!
//! Container layout (little-endian):
//!
//! ```text
//! magic    8 bytes "HSDCQFAC"
//! version  u32     1
//! n        u64
//! perm     n × u64
//! nodes    pre-order stream:
//!   u8 0  leaf:  u64 m, m·m f64 (column-major)
//!   u8 1  split: Q_lo, Q_hi as HODLR containers, then both children
//! ```

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hodlr::io::{get_f64s, get_u32, get_u64, put_f64s, put_u32, put_u64, read_hodlr, write_hodlr};
use crate::hodlr::HodlrMatrix;

pub const MAGIC: &[u8; 8] = b"HSDCQFAC";
pub const VERSION: u32 = 1;
pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Debug, Clone)]
pub enum QNode {
    Leaf(DMatrix<f64>),
    Split(Box<QSplit>),
}

#[derive(Debug, Clone)]
pub struct QSplit {
    pub q_lo: HodlrMatrix,
    pub q_hi: HodlrMatrix,
    pub lo: QNode,
    pub hi: QNode,
}

impl QNode {
    pub fn dim(&self) -> usize {
        match self {
            QNode::Leaf(q) => q.nrows(),
            QNode::Split(s) => s.q_lo.nrows(),
        }
    }

    fn apply(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            QNode::Leaf(q) => q * w,
            QNode::Split(s) => {
                let nu = s.q_lo.ncols();
                let k = w.ncols();
                let w1 = s.lo.apply(&w.rows(0, nu).into_owned());
                let w2 = s.hi.apply(&w.rows(nu, w.nrows() - nu).into_owned());
                let mut out = s.q_lo.mul_dense(&w1);
                if k > 0 {
                    s.q_hi.gemm_acc_view(1.0, w2.as_view(), &mut out.as_view_mut(), false);
                }
                out
            }
        }
    }

    fn apply_transpose(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            QNode::Leaf(q) => q.tr_mul(x),
            QNode::Split(s) => {
                let y1 = s.lo.apply_transpose(&s.q_lo.tr_mul_dense(x));
                let y2 = s.hi.apply_transpose(&s.q_hi.tr_mul_dense(x));
                crate::dense::vstack(&y1, &y2)
            }
        }
    }

    fn memory_units(&self) -> usize {
        match self {
            QNode::Leaf(q) => q.len(),
            QNode::Split(s) => s.q_lo.memory_units() + s.q_hi.memory_units() + s.lo.memory_units() + s.hi.memory_units(),
        }
    }

    /// Split factors per recursion depth, then the base-case leaves.
    fn collect_levels<'a>(&'a self, depth: usize, levels: &mut Vec<Vec<&'a QNode>>) {
        if levels.len() <= depth {
            levels.resize_with(depth + 1, Vec::new);
        }
        levels[depth].push(self);
        if let QNode::Split(s) = self {
            s.lo.collect_levels(depth + 1, levels);
            s.hi.collect_levels(depth + 1, levels);
        }
    }
}

#[derive(Debug, Clone)]
pub struct FactoredEigenvectors {
    pub root: QNode,
    /// Column `j` of `Q` is column `perm[j]` of the tree product.
    pub perm: Vec<usize>,
}

impl FactoredEigenvectors {
    pub fn new(root: QNode, perm: Vec<usize>) -> Result<Self> {
        let n = root.dim();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Domain(format!("perm is not a permutation of 0..{n}")));
        }
        Ok(Self { root, perm })
    }

    pub fn identity(n: usize) -> Self {
        Self { root: QNode::Leaf(DMatrix::identity(n, n)), perm: (0..n).collect() }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// `Q · V` for a block of vectors.
    pub fn apply_q(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(v.nrows())?;
        let mut w = DMatrix::zeros(v.nrows(), v.ncols());
        for (j, &p) in self.perm.iter().enumerate() {
            w.set_row(p, &v.row(j));
        }
        Ok(self.root.apply(&w))
    }

    /// `Qᵀ · X` for a block of vectors.
    pub fn apply_q_transpose(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(x.nrows())?;
        let y = self.root.apply_transpose(x);
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (j, &p) in self.perm.iter().enumerate() {
            out.set_row(j, &y.row(p));
        }
        Ok(out)
    }

    /// Columns `cols` of `Q`.
    pub fn columns(&self, cols: &[usize]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut e = DMatrix::zeros(n, cols.len());
        for (k, &i) in cols.iter().enumerate() {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, dim: n });
            }
            e[(i, k)] = 1.0;
        }
        self.apply_q(&e)
    }

    pub fn materialize_q(&self, cap: usize) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if n > cap {
            return Err(Error::DenseCapExceeded { n, cap });
        }
        self.apply_q(&DMatrix::identity(n, n))
    }

    pub fn memory_units(&self) -> usize {
        self.root.memory_units() + self.perm.len()
    }

    /// Number of recursion levels, counting the level of base-case leaves.
    pub fn depth(&self) -> usize {
        let mut levels = Vec::new();
        self.root.collect_levels(0, &mut levels);
        levels.len()
    }

    /// Nodes of the factor tree grouped by recursion depth.
    pub fn levels(&self) -> Vec<Vec<&QNode>> {
        let mut levels = Vec::new();
        self.root.collect_levels(0, &mut levels);
        levels
    }

    fn check(&self, rows: usize) -> Result<()> {
        if rows != self.dim() {
            return Err(Error::DimensionMismatch(format!("vector length {rows}, Q has dimension {}", self.dim())));
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        put_u32(w, VERSION)?;
        put_u64(w, self.dim() as u64)?;
        for &p in &self.perm {
            put_u64(w, p as u64)?;
        }
        write_node(&self.root, w)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a factored eigenvector container".into()));
        }
        let version = get_u32(r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let n = get_u64(r)? as usize;
        if n > 1 << 32 {
            return Err(Error::Format("dimension out of range".into()));
        }
        let perm = (0..n).map(|_| get_u64(r).map(|p| p as usize)).collect::<Result<Vec<_>>>()?;
        let root = read_node(r)?;
        if root.dim() != n {
            return Err(Error::Format(format!("factor dimension {} does not match header {n}", root.dim())));
        }
        Self::new(root, perm).map_err(|e| Error::Format(e.to_string()))
    }
}

fn write_node<W: Write>(node: &QNode, w: &mut W) -> Result<()> {
    match node {
        QNode::Leaf(q) => {
            w.write_all(&[0])?;
            put_u64(w, q.nrows() as u64)?;
            put_f64s(w, q.as_slice())
        }
        QNode::Split(s) => {
            w.write_all(&[1])?;
            write_hodlr(&s.q_lo, w)?;
            write_hodlr(&s.q_hi, w)?;
            write_node(&s.lo, w)?;
            write_node(&s.hi, w)
        }
    }
}

fn read_node<R: Read>(r: &mut R) -> Result<QNode> {
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    match tag[0] {
        0 => {
            let m = get_u64(r)?;
            let data = get_f64s(r, m.saturating_mul(m))?;
            Ok(QNode::Leaf(DMatrix::from_vec(m as usize, m as usize, data)))
        }
        1 => {
            let q_lo = read_hodlr(r)?;
            let q_hi = read_hodlr(r)?;
            let lo = read_node(r)?;
            let hi = read_node(r)?;
            if q_lo.nrows() != q_hi.nrows() || q_lo.ncols() != lo.dim() || q_hi.ncols() != hi.dim() || q_lo.ncols() + q_hi.ncols() != q_lo.nrows() {
                return Err(Error::Format("inconsistent split factor shapes".into()));
            }
            Ok(QNode::Split(Box::new(QSplit { q_lo, q_hi, lo, hi })))
        }
        t => Err(Error::Format(format!("unknown node tag {t}"))),
    }
}

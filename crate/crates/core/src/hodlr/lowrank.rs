use nalgebra::DMatrix;

use crate::dense;

/// Per-block truncation policy applied whenever low-rank factors are
/// recompressed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig {
    /// 2-norm tolerance per off-diagonal block.
    pub epsilon: f64,
    pub max_rank: Option<usize>,
    /// Interpret `epsilon` relative to the largest singular value of the block.
    pub relative: bool,
}

impl TruncationConfig {
    pub fn absolute(epsilon: f64) -> Self {
        assert!(epsilon > 0.0, "truncation tolerance must be positive");
        Self { epsilon, max_rank: None, relative: false }
    }

    pub fn with_max_rank(mut self, k: usize) -> Self {
        self.max_rank = Some(k);
        self
    }

    pub fn relative(mut self) -> Self {
        self.relative = true;
        self
    }

    /// Number of singular values (sorted descending) that survive truncation.
    pub fn kept(&self, sigma: &[f64]) -> usize {
        let Some(&top) = sigma.first() else { return 0 };
        let tol = if self.relative { self.epsilon * top } else { self.epsilon };
        let k = sigma.iter().take_while(|&&s| s > tol).count();
        match self.max_rank {
            Some(m) => k.min(m),
            None => k,
        }
    }
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self::absolute(1e-10)
    }
}

/// A block stored as `U Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRank {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl LowRank {
    pub fn new(u: DMatrix<f64>, v: DMatrix<f64>) -> Self {
        assert_eq!(u.ncols(), v.ncols(), "low-rank factors disagree on rank");
        Self { u, v }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { u: DMatrix::zeros(rows, 0), v: DMatrix::zeros(cols, 0) }
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }

    pub fn transpose(&self) -> Self {
        Self { u: self.v.clone(), v: self.u.clone() }
    }

    pub fn into_transpose(self) -> Self {
        Self { u: self.v, v: self.u }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.u *= alpha;
    }

    pub fn memory_units(&self) -> usize {
        self.u.len() + self.v.len()
    }

    /// Squared Frobenius norm, `trace((UᵀU)(VᵀV))`.
    pub fn frobenius_squared(&self) -> f64 {
        if self.rank() == 0 {
            return 0.0;
        }
        let gu = self.u.tr_mul(&self.u);
        let gv = self.v.tr_mul(&self.v);
        gu.component_mul(&gv).sum().max(0.0)
    }

    /// Truncated SVD of a dense block.
    pub fn from_dense(m: &DMatrix<f64>, cfg: &TruncationConfig) -> Self {
        let (rows, cols) = m.shape();
        if rows == 0 || cols == 0 {
            return Self::zeros(rows, cols);
        }
        let s = dense::svd(m);
        let k = cfg.kept(&s.sigma);
        let mut u = s.u.columns(0, k).into_owned();
        for (c, &sig) in s.sigma.iter().take(k).enumerate() {
            u.column_mut(c).scale_mut(sig);
        }
        Self { u, v: s.v.columns(0, k).into_owned() }
    }

    /// `[U₁ U₂][V₁ V₂]ᵀ`, without recompression.
    pub fn concat(&self, other: &LowRank) -> Self {
        assert_eq!(self.nrows(), other.nrows());
        assert_eq!(self.ncols(), other.ncols());
        Self { u: dense::hstack(&self.u, &other.u), v: dense::hstack(&self.v, &other.v) }
    }

    /// Re-truncates the factors: QR of both, SVD of the small core.
    pub fn recompress(&mut self, cfg: &TruncationConfig) {
        let k = self.rank();
        if k == 0 {
            return;
        }
        let (rows, cols) = (self.nrows(), self.ncols());
        if rows == 0 || cols == 0 {
            *self = Self::zeros(rows, cols);
            return;
        }
        let (qu, ru) = dense::thin_qr(&self.u);
        let (qv, rv) = dense::thin_qr(&self.v);
        let core = Self::from_dense(&(&ru * rv.transpose()), cfg);
        self.u = qu * core.u;
        self.v = qv * core.v;
    }

    pub fn recompressed(mut self, cfg: &TruncationConfig) -> Self {
        self.recompress(cfg);
        self
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self { u: self.u.select_rows(rows), v: self.v.clone() }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Self {
        Self { u: self.u.clone(), v: self.v.select_rows(cols) }
    }
}

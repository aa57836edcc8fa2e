//! Formatted addition and multiplication with blockwise recompression.

use nalgebra::DMatrix;

use super::{HodlrMatrix, LowRank, TruncationConfig};
use crate::error::{Error, Result};

fn incompatible(what: &str, a: &HodlrMatrix, b: &HodlrMatrix) -> Error {
    Error::IncompatiblePartition(format!(
        "{what}: {}x{} (level {}) against {}x{} (level {})",
        a.nrows(),
        a.ncols(),
        a.level(),
        b.nrows(),
        b.ncols(),
        b.level()
    ))
}

impl HodlrMatrix {
    pub fn add(&self, other: &HodlrMatrix, cfg: &TruncationConfig) -> Result<HodlrMatrix> {
        HodlrMatrix::lin_comb(1.0, self, 1.0, other, cfg)
    }

    pub fn sub(&self, other: &HodlrMatrix, cfg: &TruncationConfig) -> Result<HodlrMatrix> {
        HodlrMatrix::lin_comb(1.0, self, -1.0, other, cfg)
    }

    /// `alpha·a + beta·b`; off-diagonal blocks are concatenated and recompressed.
    pub fn lin_comb(alpha: f64, a: &HodlrMatrix, beta: f64, b: &HodlrMatrix, cfg: &TruncationConfig) -> Result<HodlrMatrix> {
        match (a, b) {
            (HodlrMatrix::Dense(x), HodlrMatrix::Dense(y)) => {
                if x.shape() != y.shape() {
                    return Err(incompatible("addition", a, b));
                }
                Ok(HodlrMatrix::Dense(x * alpha + y * beta))
            }
            (HodlrMatrix::Split(x), HodlrMatrix::Split(y)) => {
                if x.a11.shape() != y.a11.shape() || x.a22.shape() != y.a22.shape() {
                    return Err(incompatible("addition", a, b));
                }
                let a11 = HodlrMatrix::lin_comb(alpha, &x.a11, beta, &y.a11, cfg)?;
                let a22 = HodlrMatrix::lin_comb(alpha, &x.a22, beta, &y.a22, cfg)?;
                let a12 = combine(alpha, &x.a12, beta, &y.a12, cfg);
                let a21 = combine(alpha, &x.a21, beta, &y.a21, cfg);
                Ok(HodlrMatrix::split(a11, a12, a21, a22))
            }
            _ => Err(incompatible("addition", a, b)),
        }
    }

    /// `self += U Vᵀ`, split along the block tree and recompressed per block.
    pub fn add_lowrank(&mut self, u: &DMatrix<f64>, v: &DMatrix<f64>, cfg: &TruncationConfig) {
        debug_assert_eq!(u.nrows(), self.nrows());
        debug_assert_eq!(v.nrows(), self.ncols());
        if u.ncols() == 0 {
            return;
        }
        match self {
            HodlrMatrix::Dense(m) => {
                m.gemm(1.0, u, &v.transpose(), 1.0);
            }
            HodlrMatrix::Split(b) => {
                let (n1, m1) = b.a11.shape();
                let (n2, m2) = b.a22.shape();
                let k = u.ncols();
                let u1 = u.view((0, 0), (n1, k)).clone_owned();
                let u2 = u.view((n1, 0), (n2, k)).clone_owned();
                let v1 = v.view((0, 0), (m1, k)).clone_owned();
                let v2 = v.view((m1, 0), (m2, k)).clone_owned();
                b.a11.add_lowrank(&u1, &v1, cfg);
                b.a22.add_lowrank(&u2, &v2, cfg);
                b.a12 = b.a12.concat(&LowRank::new(u1, v2)).recompressed(cfg);
                b.a21 = b.a21.concat(&LowRank::new(u2, v1)).recompressed(cfg);
            }
        }
    }

    /// Formatted product `a ∗_H b`.
    pub fn multiply(a: &HodlrMatrix, b: &HodlrMatrix, cfg: &TruncationConfig) -> Result<HodlrMatrix> {
        match (a, b) {
            (HodlrMatrix::Dense(x), HodlrMatrix::Dense(y)) => {
                if x.ncols() != y.nrows() {
                    return Err(incompatible("multiplication", a, b));
                }
                Ok(HodlrMatrix::Dense(x * y))
            }
            (HodlrMatrix::Split(x), HodlrMatrix::Split(y)) => {
                if x.a11.ncols() != y.a11.nrows() || x.a22.ncols() != y.a22.nrows() {
                    return Err(incompatible("multiplication", a, b));
                }
                let mut c11 = HodlrMatrix::multiply(&x.a11, &y.a11, cfg)?;
                let (u, v) = lowrank_product(&x.a12, &y.a21);
                c11.add_lowrank(&u, &v, cfg);

                let mut c22 = HodlrMatrix::multiply(&x.a22, &y.a22, cfg)?;
                let (u, v) = lowrank_product(&x.a21, &y.a12);
                c22.add_lowrank(&u, &v, cfg);

                // A11 B12 + A12 B22
                let left = LowRank::new(x.a11.mul_dense(&y.a12.u), y.a12.v.clone());
                let right = LowRank::new(x.a12.u.clone(), y.a22.tr_mul_dense(&x.a12.v));
                let c12 = left.concat(&right).recompressed(cfg);

                // A21 B11 + A22 B21
                let left = LowRank::new(x.a21.u.clone(), y.a11.tr_mul_dense(&x.a21.v));
                let right = LowRank::new(x.a22.mul_dense(&y.a21.u), y.a21.v.clone());
                let c21 = left.concat(&right).recompressed(cfg);

                Ok(HodlrMatrix::split(c11, c12, c21, c22))
            }
            _ => Err(incompatible("multiplication", a, b)),
        }
    }

    /// `(M + Mᵀ)/2` for a matrix whose row and column trees coincide.
    pub fn symmetrize(&self, cfg: &TruncationConfig) -> HodlrMatrix {
        match self {
            HodlrMatrix::Dense(m) => HodlrMatrix::Dense((m + m.transpose()) * 0.5),
            HodlrMatrix::Split(b) => {
                let a11 = b.a11.symmetrize(cfg);
                let a22 = b.a22.symmetrize(cfg);
                let a12 = combine(0.5, &b.a12, 0.5, &b.a21.transpose(), cfg);
                let a21 = a12.transpose();
                HodlrMatrix::split(a11, a12, a21, a22)
            }
        }
    }
}

fn combine(alpha: f64, x: &LowRank, beta: f64, y: &LowRank, cfg: &TruncationConfig) -> LowRank {
    // Exact when one side is empty, so that adding zero changes nothing.
    if y.rank() == 0 || x.rank() == 0 {
        let (mut only, s) = if y.rank() == 0 { (x.clone(), alpha) } else { (y.clone(), beta) };
        if s != 1.0 {
            only.scale(s);
        }
        return only;
    }
    let mut xs = x.clone();
    xs.scale(alpha);
    let mut ys = y.clone();
    ys.scale(beta);
    xs.concat(&ys).recompressed(cfg)
}

/// Factors of `(U₁V₁ᵀ)(U₂V₂ᵀ)` with the inner product folded into the smaller side.
fn lowrank_product(x: &LowRank, y: &LowRank) -> (DMatrix<f64>, DMatrix<f64>) {
    let inner = x.v.tr_mul(&y.u);
    if x.rank() <= y.rank() {
        (x.u.clone(), &y.v * inner.transpose())
    } else {
        (&x.u * inner, y.v.clone())
    }
}

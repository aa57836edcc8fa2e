//! H-Cholesky and products with inverses of upper-triangular HODLR factors.

use nalgebra::{DMatrix, DMatrixViewMut};

use super::{HodlrMatrix, LowRank, TruncationConfig};
use crate::dense;
use crate::error::{Error, Result};

impl HodlrMatrix {
    /// Upper-triangular `R` with `RᵀR ≈ self`. A non-positive pivot yields
    /// [`Error::IndefiniteMatrix`] naming the depth and row offset of the leaf.
    pub fn cholesky(&self, cfg: &TruncationConfig) -> Result<HodlrMatrix> {
        self.cholesky_at(cfg, 0, 0)
    }

    fn cholesky_at(&self, cfg: &TruncationConfig, depth: usize, offset: usize) -> Result<HodlrMatrix> {
        if self.nrows() != self.ncols() {
            return Err(Error::DimensionMismatch(format!("cholesky of a {}x{} matrix", self.nrows(), self.ncols())));
        }
        match self {
            HodlrMatrix::Dense(m) => dense::cholesky_upper(m)
                .map(HodlrMatrix::Dense)
                .map_err(|(pivot, value)| Error::IndefiniteMatrix { depth, offset, pivot, value }),
            HodlrMatrix::Split(b) => {
                let n1 = b.a11.nrows();
                let r11 = b.a11.cholesky_at(cfg, depth + 1, offset)?;
                // R12 = R11⁻ᵀ A12 = (R11⁻ᵀ U) Vᵀ
                let ut = r11.solve_upper(&b.a12.u, true)?;
                let r12 = LowRank::new(ut, b.a12.v.clone());
                // S = A22 − R12ᵀ R12 = A22 − V (ŨᵀŨ) Vᵀ
                let mut s = b.a22.clone();
                if r12.rank() > 0 {
                    let g = r12.u.tr_mul(&r12.u);
                    let w = &r12.v * g;
                    s.add_lowrank(&(-w), &r12.v, cfg);
                }
                let r22 = s.cholesky_at(cfg, depth + 1, offset + n1)?;
                let r21 = LowRank::zeros(b.a21.nrows(), b.a21.ncols());
                Ok(HodlrMatrix::split(r11, r12, r21, r22))
            }
        }
    }

    /// Solves `T X = B`, or `Tᵀ X = B` when `transpose`, for upper-triangular `T = self`.
    pub fn solve_upper(&self, b: &DMatrix<f64>, transpose: bool) -> Result<DMatrix<f64>> {
        if self.nrows() != self.ncols() || b.nrows() != self.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "triangular solve with a {}x{} factor and {} right-hand-side rows",
                self.nrows(),
                self.ncols(),
                b.nrows()
            )));
        }
        let mut x = b.clone();
        self.solve_upper_in_place(&mut x.as_view_mut(), transpose, 0)?;
        Ok(x)
    }

    fn solve_upper_in_place(&self, x: &mut DMatrixViewMut<f64>, transpose: bool, offset: usize) -> Result<()> {
        let k = x.ncols();
        match self {
            HodlrMatrix::Dense(t) => {
                for i in 0..t.nrows() {
                    let d = t[(i, i)];
                    if d == 0.0 || !d.is_finite() {
                        return Err(Error::SingularTriangular { index: offset + i });
                    }
                }
                let ok = if transpose {
                    t.tr_solve_upper_triangular_mut(x)
                } else {
                    t.solve_upper_triangular_mut(x)
                };
                if ok {
                    Ok(())
                } else {
                    Err(Error::SingularTriangular { index: offset })
                }
            }
            HodlrMatrix::Split(b) => {
                let n1 = b.a11.nrows();
                let n2 = b.a22.nrows();
                let u = &b.a12.u;
                let v = &b.a12.v;
                if !transpose {
                    // X2 = T22⁻¹ B2 ; X1 = T11⁻¹ (B1 − U Vᵀ X2)
                    {
                        let mut x2 = x.view_mut((n1, 0), (n2, k));
                        b.a22.solve_upper_in_place(&mut x2, false, offset + n1)?;
                    }
                    if b.a12.rank() > 0 {
                        let t = v.tr_mul(&x.view((n1, 0), (n2, k)));
                        x.view_mut((0, 0), (n1, k)).gemm(-1.0, u, &t, 1.0);
                    }
                    let mut x1 = x.view_mut((0, 0), (n1, k));
                    b.a11.solve_upper_in_place(&mut x1, false, offset)
                } else {
                    // X1 = T11⁻ᵀ B1 ; X2 = T22⁻ᵀ (B2 − V Uᵀ X1)
                    {
                        let mut x1 = x.view_mut((0, 0), (n1, k));
                        b.a11.solve_upper_in_place(&mut x1, true, offset)?;
                    }
                    if b.a12.rank() > 0 {
                        let t = u.tr_mul(&x.view((0, 0), (n1, k)));
                        x.view_mut((n1, 0), (n2, k)).gemm(-1.0, v, &t, 1.0);
                    }
                    let mut x2 = x.view_mut((n1, 0), (n2, k));
                    b.a22.solve_upper_in_place(&mut x2, true, offset + n1)
                }
            }
        }
    }

    /// `M ∗_H T⁻¹` (or `M ∗_H T⁻ᵀ` when `transpose`) for upper-triangular `T`.
    /// The column tree of `m` must match the tree of `t`.
    pub fn mul_upper_inverse(m: &HodlrMatrix, t: &HodlrMatrix, transpose: bool, cfg: &TruncationConfig) -> Result<HodlrMatrix> {
        if m.ncols() != t.nrows() || t.nrows() != t.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times the inverse of a {}x{} factor",
                m.nrows(),
                m.ncols(),
                t.nrows(),
                t.ncols()
            )));
        }
        match (m, t) {
            (HodlrMatrix::Dense(md), _) => {
                // Mᵀ solved against T: X T = M ⇔ Tᵀ Xᵀ = Mᵀ
                let xt = t.solve_upper(&md.transpose(), !transpose)?;
                Ok(HodlrMatrix::Dense(xt.transpose()))
            }
            (HodlrMatrix::Split(mb), HodlrMatrix::Split(tb)) => {
                if mb.a11.ncols() != tb.a11.nrows() {
                    return Err(Error::IncompatiblePartition(format!(
                        "column split {} against factor split {}",
                        mb.a11.ncols(),
                        tb.a11.nrows()
                    )));
                }
                let t12 = &tb.a12;
                if !transpose {
                    // [X11 X12; X21 X22] [T11 T12; 0 T22] = M
                    let x11 = HodlrMatrix::mul_upper_inverse(&mb.a11, &tb.a11, false, cfg)?;
                    let x21 = LowRank::new(mb.a21.u.clone(), tb.a11.solve_upper(&mb.a21.v, true)?);
                    // X12 = (M12 − X11 T12) T22⁻¹
                    let mut r12 = mb.a12.concat(&LowRank::new(-x11.mul_dense(&t12.u), t12.v.clone())).recompressed(cfg);
                    r12.v = tb.a22.solve_upper(&r12.v, true)?;
                    // X22 = (M22 − X21 T12) T22⁻¹
                    let mut m22 = mb.a22.clone();
                    if x21.rank() > 0 && t12.rank() > 0 {
                        let inner = x21.v.tr_mul(&t12.u);
                        m22.add_lowrank(&(-(&x21.u * inner)), &t12.v, cfg);
                    }
                    let x22 = HodlrMatrix::mul_upper_inverse(&m22, &tb.a22, false, cfg)?;
                    Ok(HodlrMatrix::split(x11, r12, x21, x22))
                } else {
                    // [X11 X12; X21 X22] [T11ᵀ 0; T12ᵀ T22ᵀ] = M
                    let x22 = HodlrMatrix::mul_upper_inverse(&mb.a22, &tb.a22, true, cfg)?;
                    let x12 = LowRank::new(mb.a12.u.clone(), tb.a22.solve_upper(&mb.a12.v, false)?);
                    // X21 = (M21 − X22 T12ᵀ) T11⁻ᵀ,  X22 T12ᵀ = (X22 V) Uᵀ
                    let mut r21 = mb.a21.concat(&LowRank::new(-x22.mul_dense(&t12.v), t12.u.clone())).recompressed(cfg);
                    r21.v = tb.a11.solve_upper(&r21.v, false)?;
                    // X11 = (M11 − X12 T12ᵀ) T11⁻ᵀ
                    let mut m11 = mb.a11.clone();
                    if x12.rank() > 0 && t12.rank() > 0 {
                        let inner = x12.v.tr_mul(&t12.v);
                        m11.add_lowrank(&(-(&x12.u * inner)), &t12.u, cfg);
                    }
                    let x11 = HodlrMatrix::mul_upper_inverse(&m11, &tb.a11, true, cfg)?;
                    Ok(HodlrMatrix::split(x11, x12, r21, x22))
                }
            }
            (HodlrMatrix::Split(_), HodlrMatrix::Dense(_)) => Err(Error::IncompatiblePartition(
                "hierarchical matrix against a dense triangular factor".into(),
            )),
        }
    }
}

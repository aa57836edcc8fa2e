//! Well-conditioned column selection from a spectral projector by incomplete
//! Cholesky with leaf-local pivoting, and completion of the selected columns
//! to an orthonormal basis of the projector's range.

use nalgebra::DMatrix;
use rand::Rng;

use crate::dense;
use crate::error::{Error, Result};
use crate::hodlr::{HodlrMatrix, LowRank, TruncationConfig};

/// Relative PSD tolerance of the dense pivoted Cholesky.
pub const PSD_TOL: f64 = 1e-8;
/// Absolute PSD tolerance inside [`hcholp_inc`], in units of the truncation
/// tolerance.
pub const SCHUR_NOISE_FACTOR: f64 = 100.0;

/// Dense Cholesky with diagonal pivoting, `M(π, π) = RᵀR`.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotedCholesky {
    /// `n × n` upper triangular; rows at and beyond `rank` are zero.
    pub r: DMatrix<f64>,
    pub perm: Vec<usize>,
    pub rank: usize,
}

/// Pivots on the largest remaining diagonal entry (ties go to the lowest
/// original index) and stops once it drops to `PSD_TOL·‖M‖_F`.
pub fn cholp_dense(m: &DMatrix<f64>) -> Result<PivotedCholesky> {
    cholp_dense_with_floor(m, 0.0)
}

/// [`cholp_dense`] with the tolerance raised to at least `floor`.
pub fn cholp_dense_with_floor(m: &DMatrix<f64>, floor: f64) -> Result<PivotedCholesky> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!("pivoted Cholesky of a {}x{} matrix", n, m.ncols())));
    }
    let tol = (PSD_TOL * m.norm()).max(floor);
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut r = DMatrix::zeros(n, n);
    let mut rank = n;
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            let (di, dp) = (a[(i, i)], a[(p, p)]);
            if di > dp || (di == dp && perm[i] < perm[p]) {
                p = i;
            }
        }
        if let Some(i) = (k..n).find(|&i| a[(i, i)] < -tol) {
            return Err(Error::NotPsd { pivot: perm[i], value: a[(i, i)] });
        }
        if a[(p, p)] <= tol {
            rank = k;
            break;
        }
        if p != k {
            a.swap_rows(k, p);
            a.swap_columns(k, p);
            r.swap_columns(k, p);
            perm.swap(k, p);
        }
        let piv = a[(k, k)].sqrt();
        r[(k, k)] = piv;
        for j in k + 1..n {
            r[(k, j)] = a[(k, j)] / piv;
        }
        for j in k + 1..n {
            let rkj = r[(k, j)];
            for i in k + 1..=j {
                a[(i, j)] -= r[(k, i)] * rkj;
                a[(j, i)] = a[(i, j)];
            }
        }
    }
    Ok(PivotedCholesky { r, perm, rank })
}

/// Columns kept by [`hcholp_inc`] and the triangular factor of `M(C, C)`.
#[derive(Debug, Clone)]
pub struct ColumnSelection {
    /// Grouped by leaf in tree order; pivot order inside each leaf, matching
    /// the rows of `r`.
    pub indices: Vec<usize>,
    pub r: HodlrMatrix,
    pub delta: f64,
    /// Smallest retained diagonal entry of `r` (infinite when nothing is kept).
    pub diag_min: f64,
}

impl ColumnSelection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Incomplete Cholesky with pivoting restricted to the dense leaves: a leaf
/// keeps its leading pivots that are at least `delta`, and the kept columns
/// are eliminated from the trailing block before it is processed.
pub fn hcholp_inc(m: &HodlrMatrix, delta: f64, cfg: &TruncationConfig) -> Result<ColumnSelection> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("selection threshold must lie in (0, 1), got {delta}")));
    }
    let (indices, r) = select_rec(m, delta, cfg)?;
    let diag_min = r.diagonal().into_iter().fold(f64::INFINITY, f64::min);
    Ok(ColumnSelection { indices, r, delta, diag_min })
}

fn select_rec(m: &HodlrMatrix, delta: f64, cfg: &TruncationConfig) -> Result<(Vec<usize>, HodlrMatrix)> {
    match m {
        HodlrMatrix::Dense(d) => {
            // A leaf of a Schur complement is only known up to the truncation
            // error, which can exceed the leaf-relative tolerance.
            let f = cholp_dense_with_floor(d, SCHUR_NOISE_FACTOR * cfg.epsilon)?;
            let s = (0..f.rank).take_while(|&i| f.r[(i, i)] >= delta).count();
            Ok((f.perm[..s].to_vec(), HodlrMatrix::Dense(f.r.view((0, 0), (s, s)).into_owned())))
        }
        HodlrMatrix::Split(b) => {
            let n1 = b.a11.nrows();
            let (c1, r11) = select_rec(&b.a11, delta, cfg)?;
            let u1 = r11.solve_upper(&b.a12.u.select_rows(&c1), true)?;
            let v2 = &b.a12.v;
            let mut s = b.a22.clone();
            if u1.ncols() > 0 && !c1.is_empty() {
                let g = u1.tr_mul(&u1);
                s.add_lowrank(&(-(v2 * g)), v2, cfg);
                s = s.symmetrize(cfg);
            }
            let (c2, r22) = select_rec(&s, delta, cfg)?;
            let r12 = LowRank::new(u1, v2.select_rows(&c2)).recompressed(cfg);
            let r21 = LowRank::zeros(c2.len(), c1.len());
            let mut c = c1;
            c.extend(c2.iter().map(|&i| i + n1));
            Ok((c, HodlrMatrix::split(r11, r12, r21, r22)))
        }
    }
}

/// `Π(:, C) ∗ R̃⁻¹`, an orthonormal basis of the span of the selected columns.
pub fn orthonormal_basis_from_selection(pi: &HodlrMatrix, sel: &ColumnSelection, cfg: &TruncationConfig) -> Result<HodlrMatrix> {
    let cols = pi.extract_columns(&sel.indices)?;
    HodlrMatrix::mul_upper_inverse(&cols, &sel.r, false, cfg)
}

/// Orthonormal basis of `range(Π)` in HODLR form.
#[derive(Debug, Clone)]
pub struct RangeBasis {
    /// `n × ν`, selected part first, correction columns last.
    pub q: HodlrMatrix,
    pub selected: usize,
    pub completed: usize,
    pub oversampling: usize,
}

/// Extends the selected basis by `ν − |C|` columns sampled from the part of
/// `range(Π)` orthogonal to the selected columns.
pub fn complete_basis(
    pi: &HodlrMatrix,
    sel: &ColumnSelection,
    nu: usize,
    oversampling: usize,
    rng: &mut impl Rng,
    cfg: &TruncationConfig,
) -> Result<RangeBasis> {
    let r = sel.len();
    if r > nu {
        return Err(Error::SelectionExceedsRank { selected: r, rank: nu });
    }
    let q0 = orthonormal_basis_from_selection(pi, sel, cfg)?;
    if r == nu {
        return Ok(RangeBasis { q: q0, selected: r, completed: 0, oversampling });
    }
    let cols = pi.extract_columns(&sel.indices)?;
    let need = nu - r;
    let mut p = oversampling;
    let mut attempt = 0;
    loop {
        match correction(pi, &cols, sel, need, p, rng) {
            Ok(qc) => {
                let q = q0.append_columns(&qc, cfg)?;
                return Ok(RangeBasis { q, selected: r, completed: need, oversampling: p });
            }
            Err(e @ Error::CompletionDeficient { .. }) => {
                attempt += 1;
                if attempt > 1 {
                    return Err(e);
                }
                log::warn!("range completion deficient, retrying with oversampling {}", 2 * p.max(1));
                p = 2 * p.max(1);
            }
            Err(e) => return Err(e),
        }
    }
}

// Rank below this fraction of the leading pivot counts as missing.
const COMPLETION_RANK_TOL: f64 = 1e-6;

fn correction(pi: &HodlrMatrix, cols: &HodlrMatrix, sel: &ColumnSelection, need: usize, p: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    let n = pi.nrows();
    let x = dense::gaussian(n, need + p, rng);
    let y = pi.mul_dense(&x);
    // Π(C,:) = Π(:,C)ᵀ for the symmetric projector
    let t = cols.tr_mul_dense(&y);
    let t = sel.r.solve_upper(&t, true)?;
    let t = sel.r.solve_upper(&t, false)?;
    let z = y - cols.mul_dense(&t);
    let (q, rdiag, _) = dense::col_piv_qr(&z);
    let top = rdiag.first().map_or(0.0, |x| x.abs());
    let found = rdiag.iter().take_while(|d| d.abs() > COMPLETION_RANK_TOL * top).count();
    if top == 0.0 || found < need {
        return Err(Error::CompletionDeficient { needed: need, found: if top == 0.0 { 0 } else { found } });
    }
    Ok(q.columns(0, need).into_owned())
}

/// Measured quantities behind the conditioning bound for the selected columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionCertificate {
    pub r: usize,
    pub delta: f64,
    /// `‖Π(C,C) − R̃ᵀR̃‖₂`
    pub e_norm: f64,
    /// `‖Π² − Π‖₂`
    pub f_norm: f64,
    pub eps_h: f64,
    /// Whether `1 − δ² + ε_H < 1/r`.
    pub hypothesis: bool,
    /// `(1/r)(1 + ε_H)/(δ² − 1 + 1/r − ε_H)` when the hypothesis holds.
    pub bound: Option<f64>,
    /// Measured `κ₂(Π(:, C))`.
    pub kappa: f64,
}

impl SelectionCertificate {
    pub fn holds(&self) -> Option<bool> {
        self.bound.map(|b| self.kappa <= b)
    }
}

/// Dimension up to which the certificate norms are measured densely.
pub const CERTIFICATE_DENSE_LIMIT: usize = 512;

/// Evaluates the conditioning bound for a selection. Norms are exact (dense)
/// for `n ≤ 512` and estimated by 20 steps of power iteration above; `κ` is
/// always measured from the singular values of `Π(:, C)`.
pub fn selection_certificate(pi: &HodlrMatrix, sel: &ColumnSelection, rng: &mut impl Rng) -> Result<SelectionCertificate> {
    let n = pi.nrows();
    let r = sel.len();
    let cols = pi.extract_columns(&sel.indices)?;
    let (e_norm, f_norm) = if n <= CERTIFICATE_DENSE_LIMIT {
        let p = pi.to_dense();
        let rd = sel.r.to_dense();
        let pcc = p.select_rows(&sel.indices).select_columns(&sel.indices);
        (dense::norm2(&(pcc - rd.tr_mul(&rd))), dense::norm2(&(&p * &p - &p)))
    } else {
        let e = symmetric_norm_estimate(r, 20, rng, |x| cols.mul_dense(x).select_rows(&sel.indices) - sel.r.tr_mul_dense(&sel.r.mul_dense(x)));
        let f = symmetric_norm_estimate(n, 20, rng, |x| {
            let y = pi.mul_dense(x);
            pi.mul_dense(&y) - y
        });
        (e, f)
    };
    let kappa = if r == 0 {
        1.0
    } else {
        let (lo, hi) = dense::singular_range(&cols.to_dense());
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    };
    let eps_h = e_norm + f_norm;
    let delta = sel.delta;
    let hypothesis = r > 0 && 1.0 - delta * delta + eps_h < 1.0 / r as f64;
    let bound = hypothesis.then(|| {
        let rf = r as f64;
        (1.0 / rf) * (1.0 + eps_h) / (delta * delta - 1.0 + 1.0 / rf - eps_h)
    });
    Ok(SelectionCertificate { r, delta, e_norm, f_norm, eps_h, hypothesis, bound, kappa })
}

/// Power-iteration estimate of the 2-norm of a symmetric operator.
pub fn symmetric_norm_estimate(n: usize, steps: usize, rng: &mut impl Rng, apply: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let v = dense::unit_random_vector(n, rng);
    let mut x = DMatrix::from_column_slice(n, 1, v.as_slice());
    let mut est = 0.0;
    for _ in 0..steps {
        let y = apply(&x);
        let nrm = y.norm();
        est = nrm;
        if nrm == 0.0 {
            break;
        }
        x = y / nrm;
    }
    est
}

//! Accuracy of a computed eigendecomposition: eigenvalue error, residual,
//! loss of orthogonality and eigenvector angle.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::factored::FactoredEigenvectors;
use crate::hodlr::HodlrMatrix;

/// All eigenvectors are checked up to this dimension, a stratified sample
/// above it.
pub const FULL_SAMPLE_LIMIT: usize = 2048;
pub const SAMPLE_COUNT: usize = 64;
/// Reference eigenvalues closer than this (relative to `‖A‖₂`) form a cluster
/// whose eigenvectors are only defined as a subspace.
pub const CLUSTER_TOL: f64 = 1e-10;
const CHUNK: usize = 256;

pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
}

impl SymmetricOperator for BandedMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            out.set_column(j, &self.matvec(&col.into_owned()));
        }
        out
    }
}

impl SymmetricOperator for HodlrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.mul_dense(x)
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }
}

/// Reference eigenpairs, ascending. Vectors are optional; without them the
/// eigenvector angle is not reported.
#[derive(Debug, Clone)]
pub struct Reference {
    pub eigenvalues: Vec<f64>,
    pub vectors: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    /// `max |λᵢ − λ̃ᵢ| / ‖A‖₂`
    pub e_lambda: Option<f64>,
    /// `max ‖A qᵢ − λᵢ qᵢ‖₂ / ‖A‖₂`
    pub e_res: f64,
    /// `max ‖Qᵀ qᵢ − eᵢ‖₂`
    pub e_orth: f64,
    /// `max |1 − |cos ∠(qᵢ, q̃ᵢ)||`
    pub e_q: Option<f64>,
    pub n: usize,
    /// Number of eigenvectors the vector metrics were taken over.
    pub sampled: usize,
    pub norm: f64,
}

/// Eigenvector indices the vector metrics look at.
pub fn sample_indices(n: usize) -> Vec<usize> {
    if n <= FULL_SAMPLE_LIMIT {
        (0..n).collect()
    } else {
        (0..SAMPLE_COUNT).map(|k| ((2 * k + 1) * n) / (2 * SAMPLE_COUNT)).collect()
    }
}

pub fn error_metrics(
    a: &impl SymmetricOperator,
    eigenvalues: &[f64],
    q: &FactoredEigenvectors,
    reference: Option<&Reference>,
) -> Result<ErrorReport> {
    let n = a.dim();
    if eigenvalues.len() != n || q.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {n}, {} eigenvalues, Q of dimension {}",
            eigenvalues.len(),
            q.dim()
        )));
    }
    if let Some(r) = reference {
        if r.eigenvalues.len() != n || r.vectors.as_ref().is_some_and(|v| v.shape() != (n, n)) {
            return Err(Error::DimensionMismatch("reference does not match the operator".into()));
        }
    }
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let norm = reference.map_or_else(|| max_abs(eigenvalues), |r| max_abs(&r.eigenvalues)).max(f64::MIN_POSITIVE);
    let e_lambda = reference.map(|r| {
        eigenvalues.iter().zip(&r.eigenvalues).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / norm
    });
    let clusters = reference.map(|r| clusters(&r.eigenvalues, CLUSTER_TOL * norm));
    let idx = sample_indices(n);
    let (mut e_res, mut e_orth, mut e_q) = (0.0f64, 0.0f64, 0.0f64);
    for chunk in idx.chunks(CHUNK) {
        let qs = q.columns(chunk)?;
        let aq = a.apply(&qs);
        let back = q.apply_q_transpose(&qs)?;
        for (c, &i) in chunk.iter().enumerate() {
            let qi = qs.column(c);
            e_res = e_res.max((aq.column(c) - qi * eigenvalues[i]).norm() / norm);
            let mut d = back.column(c).into_owned();
            d[i] -= 1.0;
            e_orth = e_orth.max(d.norm());
            if let (Some(r), Some(cl)) = (reference, &clusters) {
                if let Some(v) = &r.vectors {
                    let (s, len) = cl[i];
                    let proj = v.columns(s, len).tr_mul(&qi);
                    let cos = proj.norm() / qi.norm();
                    e_q = e_q.max((1.0 - cos).abs());
                }
            }
        }
    }
    let has_vectors = reference.is_some_and(|r| r.vectors.is_some());
    Ok(ErrorReport { e_lambda, e_res, e_orth, e_q: has_vectors.then_some(e_q), n, sampled: idx.len(), norm })
}

/// For each index, the start and length of the run of eigenvalues it belongs
/// to, where consecutive members differ by at most `tol`.
fn clusters(eigs: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut out = vec![(0, 0); eigs.len()];
    let mut start = 0;
    for i in 1..=eigs.len() {
        if i == eigs.len() || eigs[i] - eigs[i - 1] > tol {
            for o in &mut out[start..i] {
                *o = (start, i - start);
            }
            start = i;
        }
    }
    out
}

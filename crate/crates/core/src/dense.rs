//! Small dense kernels shared by the hierarchical arithmetic: Cholesky with
//! pivot reporting, triangular solves, thin and column-pivoted QR.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Upper Cholesky factor `R` with `RᵀR = a`. On failure returns the index and
/// value of the first non-positive pivot.
pub fn cholesky_upper(a: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, (usize, f64)> {
    let n = a.nrows();
    let mut r = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let s = a[(j, j)] - r.view((0, j), (j, 1)).norm_squared();
        if !(s > 0.0) || !s.is_finite() {
            return Err((j, s));
        }
        let rjj = s.sqrt();
        r[(j, j)] = rjj;
        for i in j + 1..n {
            let dot = r.view((0, j), (j, 1)).dot(&r.view((0, i), (j, 1)));
            r[(j, i)] = (a[(j, i)] - dot) / rjj;
        }
    }
    Ok(r)
}

fn check_diagonal(t: &DMatrix<f64>) -> Result<()> {
    for i in 0..t.nrows() {
        let d = t[(i, i)];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::SingularTriangular { index: i });
        }
    }
    Ok(())
}

/// Solves `T X = B` (or `Tᵀ X = B` when `transpose`) for upper-triangular `T`.
pub fn solve_upper(t: &DMatrix<f64>, b: &DMatrix<f64>, transpose: bool) -> Result<DMatrix<f64>> {
    check_diagonal(t)?;
    let mut x = b.clone();
    let ok = if transpose {
        t.tr_solve_upper_triangular_mut(&mut x)
    } else {
        t.solve_upper_triangular_mut(&mut x)
    };
    if ok {
        Ok(x)
    } else {
        Err(Error::SingularTriangular { index: 0 })
    }
}

/// `M T⁻¹` (or `M T⁻ᵀ` when `transpose`) for upper-triangular `T`.
pub fn right_solve_upper(m: &DMatrix<f64>, t: &DMatrix<f64>, transpose: bool) -> Result<DMatrix<f64>> {
    // X T = M  <=>  Tᵀ Xᵀ = Mᵀ ;  X Tᵀ = M  <=>  T Xᵀ = Mᵀ
    Ok(solve_upper(t, &m.transpose(), !transpose)?.transpose())
}

/// Thin QR: `Q` is `m × min(m, k)`, `R` is `min(m, k) × k`.
pub fn thin_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.clone().qr();
    (qr.q(), qr.r())
}

/// Householder QR with column pivoting on the largest remaining column norm.
/// Returns the thin orthonormal factor, the magnitudes of the diagonal of `R`
/// (nonincreasing up to round-off) and the column permutation.
pub fn col_piv_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, Vec<usize>) {
    let (m, n) = a.shape();
    let k = m.min(n);
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut norms: Vec<f64> = (0..n).map(|j| w.column(j).norm_squared()).collect();
    let mut reflectors: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut rdiag = Vec::with_capacity(k);

    for i in 0..k {
        // Recompute the partial norms exactly; k is small in every caller.
        for j in i..n {
            norms[j] = w.view((i, j), (m - i, 1)).norm_squared();
        }
        let p = (i..n)
            .max_by(|&x, &y| norms[x].total_cmp(&norms[y]).then(y.cmp(&x)))
            .unwrap_or(i);
        if p != i {
            w.swap_columns(i, p);
            perm.swap(i, p);
            norms.swap(i, p);
        }
        let x = w.view((i, i), (m - i, 1)).column(0).clone_owned();
        let alpha = x.norm();
        let mut v = x;
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm = v.norm();
        if vnorm > 0.0 {
            v /= vnorm;
            let mut block = w.view_mut((i, i), (m - i, n - i));
            let proj = block.tr_mul(&v);
            block.ger(-2.0, &v, &proj, 1.0);
        }
        rdiag.push(alpha);
        reflectors.push(v);
    }

    let mut q = DMatrix::<f64>::zeros(m, k);
    for i in 0..k {
        q[(i, i)] = 1.0;
    }
    for i in (0..k).rev() {
        let v = &reflectors[i];
        let mut block = q.view_mut((i, 0), (m - i, k));
        let proj = block.tr_mul(v);
        block.ger(-2.0, v, &proj, 1.0);
    }
    (q, rdiag, perm)
}

pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "hstack row mismatch");
    let mut out = DMatrix::<f64>::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub fn vstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.ncols(), "vstack column mismatch");
    let mut out = DMatrix::<f64>::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `A = U diag(σ) Vᵀ` with `σ` nonincreasing.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

// nalgebra 0.35's SVD loses accuracy on rank-deficient input, which is the
// normal case for concatenated low-rank factors, so faer is used instead.
// faer's divide-and-conquer bidiagonal stage in turn loses about 1e-5 in the
// reconstruction when many singular values coincide (appended orthonormal
// columns), so the QR-iteration stage is forced for every size.
fn faer_svd(a: &DMatrix<f64>, vectors: bool) -> Svd {
    use faer::dyn_stack::{MemBuffer, MemStack};
    use faer::linalg::svd::{self, ComputeSvdVectors, SvdParams};
    use faer::{Auto, Par, Spec};

    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Svd { u: DMatrix::zeros(m, k), sigma: Vec::new(), v: DMatrix::zeros(n, k) };
    }
    let params = Spec::new(SvdParams { recursion_threshold: usize::MAX, ..<SvdParams as Auto<f64>>::auto() });
    let which = if vectors { ComputeSvdVectors::Thin } else { ComputeSvdVectors::No };
    let mut buf = MemBuffer::new(svd::svd_scratch::<f64>(m, n, which, which, Par::Seq, params));
    let mut s = faer::Col::<f64>::zeros(k);
    let (mut u, mut v) = if vectors {
        (faer::Mat::<f64>::zeros(m, k), faer::Mat::<f64>::zeros(n, k))
    } else {
        (faer::Mat::<f64>::zeros(0, 0), faer::Mat::<f64>::zeros(0, 0))
    };
    svd::svd(
        to_faer(a).as_ref(),
        s.as_mut().as_diagonal_mut(),
        vectors.then(|| u.as_mut()),
        vectors.then(|| v.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        params,
    )
    .expect("SVD did not converge");
    let sigma = s.iter().copied().collect();
    Svd { u: from_faer(u.as_ref()), sigma, v: from_faer(v.as_ref()) }
}

pub fn svd(a: &DMatrix<f64>) -> Svd {
    faer_svd(a, true)
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    faer_svd(a, false).sigma
}

/// Largest singular value, computed with a dense SVD.
pub fn norm2(a: &DMatrix<f64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Smallest and largest singular value of a dense matrix.
pub fn singular_range(a: &DMatrix<f64>) -> (f64, f64) {
    let s = singular_values(a);
    match (s.last(), s.first()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => (0.0, 0.0),
    }
}

/// Symmetric eigendecomposition from the lower triangle: ascending eigenvalues
/// and orthonormal eigenvectors as columns.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let e = to_faer(a).self_adjoint_eigen(faer::Side::Lower).map_err(|_| Error::EigenNoConvergence(0))?;
    let vals = e.S().column_vector().iter().copied().collect();
    Ok((vals, from_faer(e.U())))
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn unit_random_vector(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    let mut v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let nrm = v.norm();
    if nrm > 0.0 {
        v /= nrm;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cholesky_matches_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = gaussian(12, 12, &mut rng);
        let a = g.transpose() * &g + DMatrix::identity(12, 12);
        let r = cholesky_upper(&a).unwrap();
        assert!((r.transpose() * &r - &a).norm() < 1e-12 * a.norm());
        for i in 0..12 {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn cholesky_reports_pivot() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(cholesky_upper(&a).unwrap_err().0, 1);
    }

    #[test]
    fn triangular_solves_both_ways() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut t = gaussian(8, 8, &mut rng).upper_triangle();
        for i in 0..8 {
            t[(i, i)] = 2.0 + t[(i, i)].abs();
        }
        let b = gaussian(8, 3, &mut rng);
        let x = solve_upper(&t, &b, false).unwrap();
        assert!((&t * &x - &b).norm() < 1e-12);
        let y = solve_upper(&t, &b, true).unwrap();
        assert!((t.transpose() * &y - &b).norm() < 1e-12);
        let m = gaussian(5, 8, &mut rng);
        let z = right_solve_upper(&m, &t, false).unwrap();
        assert!((&z * &t - &m).norm() < 1e-12);
        let z = right_solve_upper(&m, &t, true).unwrap();
        assert!((&z * t.transpose() - &m).norm() < 1e-12);
    }

    #[test]
    fn zero_diagonal_is_singular() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_element(2, 1, 1.0);
        assert!(matches!(solve_upper(&t, &b, false), Err(Error::SingularTriangular { index: 1 })));
    }

    #[test]
    fn svd_of_rank_deficient_matrix_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = gaussian(32, 3, &mut rng) * gaussian(3, 32, &mut rng);
        let s = svd(&a);
        let r = &s.u * DMatrix::from_diagonal(&DVector::from_vec(s.sigma.clone())) * s.v.transpose();
        assert!((r - &a).amax() < 1e-12 * a.amax());
        assert!(s.sigma[2] > 1.0 && s.sigma[3] < 1e-12);
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn sym_eig_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = gaussian(20, 4, &mut rng);
        let a = &g * g.transpose();
        let (vals, q) = sym_eig(&a).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let r = &q * DMatrix::from_diagonal(&DVector::from_vec(vals)) * q.transpose();
        assert!((r - &a).amax() < 1e-12 * a.amax());
    }

    #[test]
    fn pivoted_qr_orders_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian(20, 4, &mut rng) * gaussian(4, 7, &mut rng);
        let (q, rdiag, perm) = col_piv_qr(&a);
        assert_eq!(q.shape(), (20, 7));
        assert!((q.transpose() * &q - DMatrix::identity(7, 7)).norm() < 1e-12);
        assert!(rdiag[3] > 1e-8 && rdiag[4] < 1e-10 * rdiag[0]);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..7).collect::<Vec<_>>());
        // the first four columns of Q span the range of A
        let q4 = q.columns(0, 4).into_owned();
        let resid = &a - &q4 * (q4.transpose() * &a);
        assert!(resid.norm() < 1e-10 * a.norm());
    }
}

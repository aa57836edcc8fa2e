//! Reference eigensolvers used to validate the structured solver: Householder
//! tridiagonalization with implicit QL, and banded inverse iteration.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::banded::BandedMatrix;
use crate::dense;
use crate::error::{Error, Result};

const QL_MAX_ITER: usize = 60;

/// Ascending eigenvalues and orthonormal eigenvectors of a dense symmetric matrix.
pub fn dense_eig(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!("eigendecomposition of a {}x{} matrix", n, m.ncols())));
    }
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let mut v = (m + m.transpose()) * 0.5;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut d, &mut e, Some(&mut v))?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let vals = idx.iter().map(|&i| d[i]).collect();
    Ok((vals, v.select_columns(&idx)))
}

/// Ascending eigenvalues of a dense symmetric matrix.
pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    let mut v = (m + m.transpose()) * 0.5;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n == 0 {
        return Ok(d);
    }
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Tridiagonal matrix orthogonally similar to a dense symmetric matrix
/// (Householder reduction).
pub fn tridiagonalize(m: &DMatrix<f64>) -> Result<BandedMatrix> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!("tridiagonalization of a {}x{} matrix", n, m.ncols())));
    }
    let mut t = BandedMatrix::zeros(n, 1.min(n.saturating_sub(1)));
    if n == 0 {
        return Ok(t);
    }
    let mut v = (m + m.transpose()) * 0.5;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    for i in 0..n {
        t.set(i, i, d[i]);
        if i > 0 {
            t.set(i, i - 1, e[i]);
        }
    }
    Ok(t)
}

/// Ascending eigenvalues of the symmetric tridiagonal matrix with diagonal
/// `d` and off-diagonal `e` (`e.len() == d.len() − 1`).
pub fn tridiagonal_eigenvalues(d: &[f64], e: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if e.len() + 1 != n {
        return Err(Error::DimensionMismatch(format!("{} off-diagonal entries for {n} diagonal entries", e.len())));
    }
    let mut dd = d.to_vec();
    // tql2 expects the subdiagonal shifted by one position
    let mut ee = vec![0.0; n];
    ee[1..].copy_from_slice(e);
    tql2(&mut dd, &mut ee, None)?;
    dd.sort_by(f64::total_cmp);
    Ok(dd)
}

// Householder reduction to tridiagonal form; `v` receives the accumulated
// transformation, `d` the diagonal and `e[1..]` the subdiagonal.
fn tred2(v: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL with Wilkinson-type shifts on the tridiagonal (d, e[1..]).
fn tql2(d: &mut [f64], e: &mut [f64], mut v: Option<&mut DMatrix<f64>>) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::EigenNoConvergence(l));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = v.as_deref_mut() {
                        for k in 0..n {
                            let h = v[(k, i + 1)];
                            v[(k, i + 1)] = s * v[(k, i)] + c * h;
                            v[(k, i)] = c * v[(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// LU factorization with partial pivoting of `A − σI` for banded `A`.
pub struct BandedLu {
    n: usize,
    b: usize,
    /// Row `i` holds columns `i − b ..= i + 2b` of the factors.
    rows: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn new(a: &BandedMatrix, sigma: f64) -> Self {
        let n = a.n();
        let b = a.bandwidth();
        let w = 3 * b + 1;
        let mut lu = Self { n, b, rows: vec![0.0; n * w], piv: vec![0; n] };
        for i in 0..n {
            for j in i.saturating_sub(b)..(i + b + 1).min(n) {
                let x = a.get(i, j) - if i == j { sigma } else { 0.0 };
                lu.set(i, j, x);
            }
        }
        lu.factor(a.norm_inf().max(sigma.abs()).max(f64::MIN_POSITIVE));
        lu
    }

    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.b >= i && j <= i + 2 * self.b);
        i * (3 * self.b + 1) + (j + self.b - i)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[self.at(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, x: f64) {
        let p = self.at(i, j);
        self.rows[p] = x;
    }

    fn factor(&mut self, scale: f64) {
        let (n, b) = (self.n, self.b);
        for k in 0..n {
            let last = (k + b).min(n - 1);
            let p = (k..=last).max_by(|&x, &y| self.get(x, k).abs().total_cmp(&self.get(y, k).abs())).unwrap_or(k);
            self.piv[k] = p;
            let hi = (k + 2 * b).min(n - 1);
            if p != k {
                for j in k..=hi {
                    let (x, y) = (self.get(k, j), self.get(p, j));
                    self.set(k, j, y);
                    self.set(p, j, x);
                }
            }
            if self.get(k, k) == 0.0 {
                // exact singularity: inverse iteration only needs a tiny pivot
                self.set(k, k, f64::EPSILON * scale);
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last {
                let l = self.get(i, k) / pivot;
                self.set(i, k, l);
                if l != 0.0 {
                    for j in k + 1..=hi {
                        let x = self.get(i, j) - l * self.get(k, j);
                        self.set(i, j, x);
                    }
                }
            }
        }
    }

    pub fn solve(&self, rhs: &mut DVector<f64>) {
        let (n, b) = (self.n, self.b);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                rhs.swap_rows(k, p);
            }
            let x = rhs[k];
            for i in k + 1..=(k + b).min(n - 1) {
                rhs[i] -= self.get(i, k) * x;
            }
        }
        for k in (0..n).rev() {
            let mut s = rhs[k];
            for j in k + 1..=(k + 2 * b).min(n - 1) {
                s -= self.get(k, j) * rhs[j];
            }
            rhs[k] = s / self.get(k, k);
        }
    }
}

/// Eigenvectors of a banded matrix for known eigenvalues (ascending) by
/// shifted inverse iteration. Members of a cluster closer than
/// `1e-10·‖A‖` are orthogonalized against each other.
pub fn inverse_iteration(a: &BandedMatrix, eigs: &[f64], rng: &mut impl Rng) -> DMatrix<f64> {
    let n = a.n();
    let norm = a.norm_inf().max(f64::MIN_POSITIVE);
    let mut q = DMatrix::zeros(n, eigs.len());
    let mut cluster_start = 0;
    for (i, &lam) in eigs.iter().enumerate() {
        if i == 0 || (lam - eigs[i - 1]).abs() > 1e-10 * norm {
            cluster_start = i;
        }
        let lu = BandedLu::new(a, lam);
        let mut x = dense::unit_random_vector(n, rng);
        for _ in 0..3 {
            lu.solve(&mut x);
            for j in cluster_start..i {
                let c = q.column(j).dot(&x);
                x.axpy(-c, &q.column(j), 1.0);
            }
            let nrm = x.norm();
            x /= nrm;
        }
        q.set_column(i, &x);
    }
    q
}

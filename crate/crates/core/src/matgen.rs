//! Synthetic symmetric banded test matrices with prescribed spectra.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};

/// Spectrum whose halves are separated by a fixed relative gap at every
/// level of a recursive bisection of the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSpectrumSpec {
    pub n: usize,
    pub gap: f64,
    /// The interval is bisected until it holds the largest power of two of
    /// subintervals not exceeding `n / n_stop` (at least two).
    pub n_stop: usize,
    pub interval: (f64, f64),
}

impl GapSpectrumSpec {
    pub fn new(n: usize, gap: f64, n_stop: usize) -> Self {
        Self { n, gap, n_stop, interval: (-1.0, 1.0) }
    }

    /// Number of leaf subintervals.
    pub fn leaves(&self) -> usize {
        let target = (self.n / self.n_stop.max(1)).max(2);
        let mut k = 2;
        while 2 * k <= target {
            k *= 2;
        }
        k
    }
}

/// Sorted eigenvalues drawn uniformly inside the leaf subintervals, with each
/// leaf's two extreme eigenvalues placed on its end points.
pub fn gap_spectrum(spec: &GapSpectrumSpec, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(spec.gap > 0.0 && spec.gap < 1.0) {
        return Err(Error::Domain(format!("gap must lie in (0, 1), got {}", spec.gap)));
    }
    if spec.n < 2 {
        return Err(Error::Domain("a gap spectrum needs at least two eigenvalues".into()));
    }
    let (c, d) = spec.interval;
    if !(c < d) {
        return Err(Error::Domain(format!("empty interval [{c}, {d}]")));
    }
    let mut out = Vec::with_capacity(spec.n);
    fill(c, d, spec.n, spec.leaves(), spec.gap, rng, &mut out);
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn fill(c: f64, d: f64, count: usize, leaves: usize, gap: f64, rng: &mut impl Rng, out: &mut Vec<f64>) {
    if leaves <= 1 || count < 2 {
        // The extreme eigenvalues sit on the interval ends so that every split
        // realizes exactly the prescribed gap.
        match count {
            0 => {}
            1 => out.push(rng.random_range(c..=d)),
            _ => {
                out.push(c);
                out.push(d);
                out.extend((2..count).map(|_| rng.random_range(c..=d)));
            }
        }
        return;
    }
    let mid = 0.5 * (c + d);
    let half = 0.5 * (d - c) * gap;
    let left = count.div_ceil(2);
    fill(c, mid - half, left, leaves / 2, gap, rng, out);
    fill(mid + half, d, count - left, leaves / 2, gap, rng, out);
}

/// Symmetric matrix of bandwidth `b` similar to `diag(eigs)`.
///
/// Eigenvalues are appended one at a time in random order. Each new index is
/// coupled to the trailing rows by random plane rotations, and the entry each
/// rotation pushes outside the band is chased up to the first row.
pub fn banded_from_spectrum(eigs: &[f64], b: usize, rng: &mut impl Rng) -> Result<BandedMatrix> {
    let n = eigs.len();
    if b == 0 || n <= b {
        return Err(Error::Domain(format!("bandwidth {b} needs 0 < b < n = {n}")));
    }
    let mut order: Vec<f64> = eigs.to_vec();
    order.shuffle(rng);
    let mut w = Work::new(n, b);
    for (k, &lam) in order.iter().enumerate() {
        w.set(k, k, lam);
        for m in (k.saturating_sub(b)..k).rev() {
            let t: f64 = rng.random_range(0.0..2.0 * PI);
            w.rotate(m, t.cos(), t.sin());
            w.chase(m, k);
        }
    }
    let mut out = BandedMatrix::zeros(n, b);
    for j in 0..n {
        for i in j..(j + b + 1).min(n) {
            out.set(i, j, w.get(i, j));
        }
    }
    Ok(out)
}

/// Lower band storage with one spare diagonal for the bulge.
struct Work {
    n: usize,
    b: usize,
    band: Vec<f64>,
}

impl Work {
    fn new(n: usize, b: usize) -> Self {
        Self { n, b, band: vec![0.0; n * (b + 2)] }
    }

    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        (d <= self.b + 1).then_some(j * (self.b + 2) + d)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |p| self.band[p])
    }

    fn set(&mut self, i: usize, j: usize, x: f64) {
        let p = self.idx(i, j).expect("entry outside the work band");
        self.band[p] = x;
    }

    /// Similarity `G A Gᵀ` with a rotation acting on indices `p` and `p + 1`.
    fn rotate(&mut self, p: usize, c: f64, s: f64) {
        let q = p + 1;
        let reach = self.b + 1;
        let lo = p.saturating_sub(reach);
        let hi = (q + reach).min(self.n - 1);
        for j in lo..=hi {
            if j == p || j == q {
                continue;
            }
            let x = self.get(p, j);
            let y = self.get(q, j);
            let nx = c * x + s * y;
            let ny = -s * x + c * y;
            if self.idx(p, j).is_some() {
                self.set(p, j, nx);
            } else {
                debug_assert!(nx == 0.0);
            }
            if self.idx(q, j).is_some() {
                self.set(q, j, ny);
            } else {
                debug_assert!(ny == 0.0);
            }
        }
        let (app, apq, aqq) = (self.get(p, p), self.get(q, p), self.get(q, q));
        self.set(p, p, c * c * app + 2.0 * c * s * apq + s * s * aqq);
        self.set(q, q, s * s * app - 2.0 * c * s * apq + c * c * aqq);
        self.set(q, p, (c * c - s * s) * apq + c * s * (aqq - app));
    }

    /// Removes the bulge a rotation in plane `(m, m + 1)` left at
    /// `(m + 1, m − b)`, and the ones the removal creates further up.
    fn chase(&mut self, m: usize, last: usize) {
        let b = self.b;
        let mut r = m + 1;
        while r <= last && r > b {
            let col = r - b - 1;
            let x = self.get(r, col);
            if x == 0.0 {
                break;
            }
            // Rotate columns (col, col + 1) so that row r loses its entry in col.
            let y = self.get(r, col + 1);
            let h = x.hypot(y);
            let (c, s) = (y / h, -x / h);
            self.rotate(col, c, s);
            self.set(r, col, 0.0);
            r = col + 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedMatrix {
    /// Tridiagonal with 2 on the diagonal and 1 beside it.
    Toeplitz121,
    /// Tridiagonal, zero diagonal, off-diagonal `√(k(n−k))`.
    Clement,
}

impl std::str::FromStr for NamedMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toeplitz121" => Ok(Self::Toeplitz121),
            "clement" => Ok(Self::Clement),
            other => Err(Error::Domain(format!("unknown matrix kind '{other}'"))),
        }
    }
}

pub fn named_matrix(kind: NamedMatrix, n: usize) -> Result<BandedMatrix> {
    if n < 2 {
        return Err(Error::Domain("named matrices need n >= 2".into()));
    }
    Ok(match kind {
        NamedMatrix::Toeplitz121 => BandedMatrix::toeplitz(n, &[2.0, 1.0]),
        NamedMatrix::Clement => {
            let mut m = BandedMatrix::zeros(n, 1);
            for k in 1..n {
                m.set(k, k - 1, ((k * (n - k)) as f64).sqrt());
            }
            m
        }
    })
}

/// Closed-form spectrum of a named matrix, ascending.
pub fn named_spectrum(kind: NamedMatrix, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = match kind {
        NamedMatrix::Toeplitz121 => (1..=n).map(|k| 2.0 + 2.0 * (k as f64 * PI / (n as f64 + 1.0)).cos()).collect(),
        NamedMatrix::Clement => (0..n).map(|k| -(n as f64 - 1.0) + 2.0 * k as f64).collect(),
    };
    v.sort_by(f64::total_cmp);
    v
}

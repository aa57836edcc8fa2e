//! Recursive spectral divide-and-conquer driver.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::banded::BandedMatrix;
use crate::basis::{complete_basis, hcholp_inc, selection_certificate, RangeBasis};
use crate::dense;
use crate::error::{Error, Result};
use crate::factored::{FactoredEigenvectors, QNode, QSplit};
use crate::hodlr::{HodlrMatrix, TruncationConfig};
use crate::sign::{hdwh, ProjectorPair, SignConfig};

/// Where each node places its shift.
#[derive(Debug, Clone, PartialEq)]
pub enum ShiftStrategy {
    /// Median of the diagonal.
    DiagonalMedian,
    /// Midpoint of the middle gap of a known ascending spectrum. Each node
    /// looks up the slice of the spectrum it is responsible for, so the split
    /// happens exactly where a generated spectrum has its prescribed gap.
    KnownSpectrum(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub truncation: TruncationConfig,
    /// Stopping tolerance of the sign iteration.
    pub stop_tol: f64,
    /// Pivot threshold of the column selection.
    pub delta: f64,
    pub oversampling: usize,
    /// Nodes of at most this size go to the dense eigensolver.
    pub n_stop: usize,
    pub leaf_size: usize,
    pub seed: u64,
    pub max_depth: usize,
    pub shift: ShiftStrategy,
    /// Measure the conditioning of the selected columns at every split. Costs
    /// a dense SVD of `Π(:, C)` per projector.
    pub certify: bool,
    pub max_sign_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            truncation: TruncationConfig::absolute(1e-10),
            stop_tol: 1e-15,
            delta: 0.4,
            oversampling: 10,
            n_stop: 256,
            leaf_size: 128,
            seed: 0,
            max_depth: 40,
            shift: ShiftStrategy::DiagonalMedian,
            certify: false,
            max_sign_iterations: 25,
        }
    }
}

impl SolverConfig {
    /// Base-case sizes used for full-scale runs, by bandwidth.
    pub fn full_scale_n_stop(bandwidth: usize) -> usize {
        match bandwidth {
            0 | 1 => 3250,
            2 => 1750,
            _ => 2500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.truncation.epsilon > 0.0) {
            return Err(Error::Domain("truncation tolerance must be positive".into()));
        }
        if self.leaf_size == 0 || self.n_stop < self.leaf_size {
            return Err(Error::Domain(format!(
                "need 0 < leaf_size <= n_stop, got leaf_size {} and n_stop {}",
                self.leaf_size, self.n_stop
            )));
        }
        if self.max_depth > 62 {
            return Err(Error::Domain("max_depth must be at most 62".into()));
        }
        Ok(())
    }

    pub fn sign_config(&self) -> SignConfig {
        SignConfig {
            truncation: self.truncation.clone(),
            stop_tol: self.stop_tol,
            max_iterations: self.max_sign_iterations,
            ..SignConfig::default()
        }
    }
}

/// What happened at one node of the recursion.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NodeDiagnostics {
    /// `0` / `1` for the lower / upper child at each level, empty at the root.
    pub path: String,
    pub n: usize,
    pub base_case: bool,
    pub shift: f64,
    /// Number of shifts tried before the split was accepted.
    pub shift_attempts: usize,
    pub nu: usize,
    pub trace: f64,
    pub sign_iterations: usize,
    pub alpha: f64,
    pub l0: f64,
    pub sign_rank: usize,
    pub selected_lo: usize,
    pub selected_hi: usize,
    pub completed_lo: usize,
    pub completed_hi: usize,
    pub basis_rank_lo: usize,
    pub basis_rank_hi: usize,
    pub kappa_lo: Option<f64>,
    pub kappa_hi: Option<f64>,
    pub eps_h_lo: Option<f64>,
    pub eps_h_hi: Option<f64>,
    pub rank_lo: usize,
    pub rank_hi: usize,
    pub seconds: f64,
}

impl NodeDiagnostics {
    /// Fraction of the basis columns that came from the column selection.
    pub fn selection_fraction(&self) -> Option<f64> {
        (!self.base_case && self.n > 0).then(|| (self.selected_lo + self.selected_hi) as f64 / self.n as f64)
    }

    pub fn max_kappa(&self) -> Option<f64> {
        match (self.kappa_lo, self.kappa_hi) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub q: FactoredEigenvectors,
    /// One record per node, in pre-order.
    pub diagnostics: Vec<NodeDiagnostics>,
}

impl SpectralDecomposition {
    /// Mean selection fraction over all divide steps.
    pub fn mean_selection_fraction(&self) -> Option<f64> {
        let f: Vec<f64> = self.diagnostics.iter().filter_map(NodeDiagnostics::selection_fraction).collect();
        (!f.is_empty()).then(|| f.iter().sum::<f64>() / f.len() as f64)
    }

    pub fn max_kappa(&self) -> Option<f64> {
        self.diagnostics.iter().filter_map(NodeDiagnostics::max_kappa).reduce(f64::max)
    }
}

/// Median of the diagonal; the mean of the two middle values for even `n`.
pub fn choose_shift(a: &HodlrMatrix) -> f64 {
    median(a.diagonal())
}

fn median(mut d: Vec<f64>) -> f64 {
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    if d.len() % 2 == 1 {
        d[m]
    } else {
        0.5 * (d[m - 1] + d[m])
    }
}

/// Result of splitting a matrix at one shift.
#[derive(Debug, Clone)]
pub struct Split {
    pub q_lo: RangeBasis,
    pub q_hi: RangeBasis,
    pub a_lo: HodlrMatrix,
    pub a_hi: HodlrMatrix,
    pub nu: usize,
    pub projectors: ProjectorPair,
}

/// Splits `A` into the parts of its spectrum below and above `mu`.
///
/// `DegenerateSplit` is returned when `μ` lies outside the spectrum; the
/// recursion reacts to it by moving the shift.
pub fn split(a: &HodlrMatrix, mu: f64, cfg: &SolverConfig, node: &str, rng: &mut ChaCha8Rng) -> Result<(Split, NodeDiagnostics)> {
    let tr = &cfg.truncation;
    let n = a.nrows();
    let mut shifted = a.clone();
    shifted.add_diagonal(-mu);
    let gap_error = |iteration: usize, reason: String| Error::GapTooSmall { node: node.to_string(), shift: mu, iteration, reason };
    let pair = hdwh(&shifted, &cfg.sign_config(), rng).map_err(|e| match e {
        Error::ShiftTooCloseToEigenvalue(reason) => gap_error(0, reason),
        Error::GapTooSmall { iteration, reason, .. } => gap_error(iteration, reason),
        other => other,
    })?;
    let frac = (pair.trace - pair.trace.round()).abs();
    if frac > 0.1 {
        return Err(gap_error(pair.iterations, format!("projector trace {} is not close to an integer", pair.trace)));
    }
    let nu = pair.nu;
    if nu == 0 || nu >= n {
        return Err(Error::DegenerateSplit { node: node.to_string(), shift: mu, nu, n });
    }
    let mut diag = NodeDiagnostics {
        path: node.to_string(),
        n,
        shift: mu,
        nu,
        trace: pair.trace,
        sign_iterations: pair.iterations,
        alpha: pair.alpha,
        l0: pair.l0,
        sign_rank: pair.max_rank,
        ..Default::default()
    };
    let sel_lo = hcholp_inc(&pair.pi_lo, cfg.delta, tr)?;
    let sel_hi = hcholp_inc(&pair.pi_hi, cfg.delta, tr)?;
    if cfg.certify {
        let c_lo = selection_certificate(&pair.pi_lo, &sel_lo, rng)?;
        let c_hi = selection_certificate(&pair.pi_hi, &sel_hi, rng)?;
        diag.kappa_lo = Some(c_lo.kappa);
        diag.kappa_hi = Some(c_hi.kappa);
        diag.eps_h_lo = Some(c_lo.eps_h);
        diag.eps_h_hi = Some(c_hi.eps_h);
    }
    let q_lo = complete_basis(&pair.pi_lo, &sel_lo, nu, cfg.oversampling, rng, tr)?;
    let q_hi = complete_basis(&pair.pi_hi, &sel_hi, n - nu, cfg.oversampling, rng, tr)?;
    let a_lo = congruence(a, &q_lo.q, cfg)?;
    let a_hi = congruence(a, &q_hi.q, cfg)?;
    diag.selected_lo = q_lo.selected;
    diag.selected_hi = q_hi.selected;
    diag.completed_lo = q_lo.completed;
    diag.completed_hi = q_hi.completed;
    diag.basis_rank_lo = q_lo.q.hodlr_rank();
    diag.basis_rank_hi = q_hi.q.hodlr_rank();
    diag.rank_lo = a_lo.hodlr_rank();
    diag.rank_hi = a_hi.hodlr_rank();
    Ok((Split { q_lo, q_hi, a_lo, a_hi, nu, projectors: pair }, diag))
}

/// `Qᵀ A Q`, symmetrized and repartitioned for the next level.
fn congruence(a: &HodlrMatrix, q: &HodlrMatrix, cfg: &SolverConfig) -> Result<HodlrMatrix> {
    let tr = &cfg.truncation;
    let qa = HodlrMatrix::multiply(&q.transpose(), a, tr)?;
    let b = HodlrMatrix::multiply(&qa, q, tr)?;
    Ok(b.symmetrize(tr).rebalance(cfg.leaf_size, tr))
}

// Shifts tried after the first one before falling back to bisection.
const SHIFT_RETRIES: usize = 3;
const SHIFT_STEP: f64 = 0.05;
const BISECTION_STEPS: usize = 30;

/// Divide-and-conquer eigensolver. Keeps the per-node diagnostics, which
/// survive a failed run.
pub struct Solver {
    cfg: SolverConfig,
    diagnostics: Vec<NodeDiagnostics>,
    root_scale: f64,
}

impl Solver {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, diagnostics: Vec::new(), root_scale: 0.0 })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Diagnostics of the nodes processed by the last call to `solve`.
    pub fn diagnostics(&self) -> &[NodeDiagnostics] {
        &self.diagnostics
    }

    pub fn solve_banded(&mut self, a: &BandedMatrix) -> Result<SpectralDecomposition> {
        let h = HodlrMatrix::from_banded(a, self.cfg.leaf_size);
        self.solve(&h)
    }

    pub fn solve(&mut self, a: &HodlrMatrix) -> Result<SpectralDecomposition> {
        self.diagnostics.clear();
        let (n, m) = a.shape();
        if n != m {
            return Err(Error::DimensionMismatch(format!("{n}x{m} matrix is not square")));
        }
        let scale = a.frobenius_norm();
        let asym = a.asymmetry();
        if asym > 8.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE) * (n as f64).sqrt() {
            return Err(Error::Domain(format!("input is not symmetric (asymmetry {asym:e})")));
        }
        self.root_scale = scale;
        let tr = self.cfg.truncation.clone();
        let root = a.rebalance(self.cfg.leaf_size, &tr);
        let (vals, node) = self.recurse(root, String::new(), 1, 0)?;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        let eigenvalues = perm.iter().map(|&p| vals[p]).collect();
        Ok(SpectralDecomposition {
            eigenvalues,
            q: FactoredEigenvectors::new(node, perm)?,
            diagnostics: self.diagnostics.clone(),
        })
    }

    // `id` numbers the nodes of the binary tree (root 1, children 2id, 2id+1)
    // and selects the random stream of the node. `offset` is the position of
    // the node's eigenvalues in the global spectrum.
    fn recurse(&mut self, a: HodlrMatrix, path: String, id: u64, offset: usize) -> Result<(Vec<f64>, QNode)> {
        let start = Instant::now();
        let n = a.nrows();
        let depth = path.len();
        if n <= self.cfg.n_stop.max(1) {
            return self.base_case(&a, path, start);
        }
        if depth >= self.cfg.max_depth {
            return Err(Error::DepthExceeded(depth));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(id);
        let d = a.diagonal();
        let mu0 = match &self.cfg.shift {
            ShiftStrategy::DiagonalMedian => median(d.clone()),
            ShiftStrategy::KnownSpectrum(e) => {
                let h = n.div_ceil(2);
                match (e.get(offset + h - 1), e.get(offset + h)) {
                    (Some(x), Some(y)) => 0.5 * (x + y),
                    _ => median(d.clone()),
                }
            }
        };
        let mut scalar = a.clone();
        scalar.add_diagonal(-d.iter().sum::<f64>() / n as f64);
        if scalar.frobenius_norm() <= self.cfg.truncation.epsilon.max(16.0 * f64::EPSILON * self.root_scale) {
            // Numerically a multiple of the identity: nothing to split.
            return self.base_case(&a, path, start);
        }
        let (dmin, dmax) = d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        let step = SHIFT_STEP * (dmax - dmin).max(a.frobenius_norm() / (n as f64).sqrt());
        let (mut lo, mut hi) = (dmin, dmax);
        let mut mu = mu0;
        let mut attempts = 0;
        let (s, mut diag) = loop {
            attempts += 1;
            match split(&a, mu, &self.cfg, &path, &mut rng) {
                Ok(r) => break r,
                Err(Error::DegenerateSplit { nu, .. }) => {
                    // nu = 0: the whole spectrum lies above mu.
                    let up = nu == 0;
                    if up {
                        lo = lo.max(mu);
                    } else {
                        hi = hi.min(mu);
                    }
                    log::info!("node '{path}': shift {mu:e} gives nu = {nu}, moving it {}", if up { "up" } else { "down" });
                    if attempts <= SHIFT_RETRIES {
                        mu += if up { step } else { -step };
                    } else if attempts <= SHIFT_RETRIES + BISECTION_STEPS && lo < hi {
                        mu = 0.5 * (lo + hi);
                    } else {
                        return Err(Error::DegenerateSplit { node: path, shift: mu, nu, n });
                    }
                }
                // A diagonal median can coincide with an eigenvalue. The first
                // factorization usually detects it, otherwise the projector
                // trace comes out half-integral. Such a shift is moved; a shift
                // placed by the caller is not.
                Err(e @ Error::GapTooSmall { .. })
                    if self.cfg.shift == ShiftStrategy::DiagonalMedian && attempts <= SHIFT_RETRIES =>
                {
                    log::info!("node '{path}': {e}; perturbing the shift");
                    let k = attempts.div_ceil(2) as f64;
                    mu = mu0 + if attempts % 2 == 1 { k * step } else { -k * step };
                }
                Err(e) => return Err(e),
            }
        };
        diag.shift_attempts = attempts;
        let slot = self.diagnostics.len();
        self.diagnostics.push(diag.clone());
        let Split { q_lo, q_hi, a_lo, a_hi, nu, .. } = s;
        drop(a);
        let (v_lo, n_lo) = self.recurse(a_lo, format!("{path}0"), 2 * id, offset)?;
        let (v_hi, n_hi) = self.recurse(a_hi, format!("{path}1"), 2 * id + 1, offset + nu)?;
        diag.seconds = start.elapsed().as_secs_f64();
        self.diagnostics[slot] = diag;
        let mut vals = v_lo;
        vals.extend(v_hi);
        Ok((vals, QNode::Split(Box::new(QSplit { q_lo: q_lo.q, q_hi: q_hi.q, lo: n_lo, hi: n_hi }))))
    }

    fn base_case(&mut self, a: &HodlrMatrix, path: String, start: Instant) -> Result<(Vec<f64>, QNode)> {
        let m = a.to_dense();
        let m = (&m + m.transpose()) * 0.5;
        let (vals, q) = if m.nrows() == 0 { (Vec::new(), DMatrix::zeros(0, 0)) } else { dense::sym_eig(&m)? };
        self.diagnostics.push(NodeDiagnostics {
            path,
            n: m.nrows(),
            base_case: true,
            seconds: start.elapsed().as_secs_f64(),
            ..Default::default()
        });
        Ok((vals, QNode::Leaf(q)))
    }
}

/// Eigenvalues and factored eigenvectors of a symmetric HODLR matrix.
pub fn hsdc(a: &HodlrMatrix, cfg: &SolverConfig) -> Result<SpectralDecomposition> {
    Solver::new(cfg.clone())?.solve(a)
}

pub fn hsdc_banded(a: &BandedMatrix, cfg: &SolverConfig) -> Result<SpectralDecomposition> {
    Solver::new(cfg.clone())?.solve_banded(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hodlr::IndexPartition;
    use crate::matgen::{banded_from_spectrum, gap_spectrum, named_matrix, named_spectrum, GapSpectrumSpec, NamedMatrix};
    use crate::oracle;

    fn small_cfg(n_stop: usize, leaf: usize) -> SolverConfig {
        SolverConfig { n_stop, leaf_size: leaf, ..Default::default() }
    }

    fn max_rel(a: &[f64], b: &[f64], scale: f64) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs() / scale).fold(0.0, f64::max)
    }

    #[test]
    fn median_of_diagonal() {
        let p = IndexPartition::with_level(3, 1);
        let cfg = TruncationConfig::default();
        let a = HodlrMatrix::from_dense(&DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0, 3.0]), &p, &cfg).unwrap();
        assert_eq!(choose_shift(&a), 2.0);
        let p = IndexPartition::with_level(4, 1);
        let a = HodlrMatrix::from_dense(&DMatrix::from_diagonal(&nalgebra::dvector![4.0, 1.0, 3.0, 2.0]), &p, &cfg).unwrap();
        assert_eq!(choose_shift(&a), 2.5);
        assert_eq!(choose_shift(&HodlrMatrix::from_banded(&named_matrix(NamedMatrix::Toeplitz121, 9).unwrap(), 4)), 2.0);
    }

    #[test]
    fn split_of_two_by_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = HodlrMatrix::from_banded(&BandedMatrix::from_diagonal(&[-1.0, 1.0]), 1);
        let (s, d) = split(&a, 0.0, &small_cfg(1, 1), "", &mut rng).unwrap();
        assert_eq!(d.nu, 1);
        assert!((s.a_lo.to_dense()[(0, 0)] + 1.0).abs() < 1e-12);
        assert!((s.a_hi.to_dense()[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn toeplitz_split_is_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = HodlrMatrix::from_banded(&named_matrix(NamedMatrix::Toeplitz121, 8).unwrap(), 2);
        let (s, _) = split(&a, 2.0, &small_cfg(2, 2), "", &mut rng).unwrap();
        assert_eq!(s.nu, 4);
        let exact = named_spectrum(NamedMatrix::Toeplitz121, 8);
        let mut got = oracle::dense_eigenvalues(&s.a_lo.to_dense()).unwrap();
        got.extend(oracle::dense_eigenvalues(&s.a_hi.to_dense()).unwrap());
        assert!(max_rel(&got, &exact, 4.0) < 1e-9);
    }

    #[test]
    fn split_preserves_spectrum_of_random_banded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eigs = gap_spectrum(&GapSpectrumSpec::new(128, 1e-2, 32), &mut rng).unwrap();
        let b = banded_from_spectrum(&eigs, 3, &mut rng).unwrap();
        let a = HodlrMatrix::from_banded(&b, 16);
        let reference = oracle::dense_eigenvalues(&b.to_dense()).unwrap();
        let cfg = small_cfg(32, 16);
        let (s, d) = split(&a, choose_shift(&a), &cfg, "", &mut rng).unwrap();
        let mut got = oracle::dense_eigenvalues(&s.a_lo.to_dense()).unwrap();
        got.extend(oracle::dense_eigenvalues(&s.a_hi.to_dense()).unwrap());
        assert_eq!(got.len(), 128);
        assert!(max_rel(&got, &reference, 1.0) < 1e-8, "{}", max_rel(&got, &reference, 1.0));
        assert_eq!(d.selected_lo + d.completed_lo, d.nu);
        // coupling between the two halves
        let qlo = s.q_lo.q.to_dense();
        let qhi = s.q_hi.q.to_dense();
        assert!(dense::norm2(&(qlo.transpose() * b.to_dense() * qhi)) < 1e-8);
    }

    #[test]
    fn scalar_input_short_circuits() {
        let a = HodlrMatrix::from_banded(&BandedMatrix::from_diagonal(&[3.0; 40]), 8);
        let r = hsdc(&a, &small_cfg(8, 8)).unwrap();
        assert_eq!(r.eigenvalues, vec![3.0; 40]);
        assert_eq!(r.diagnostics.len(), 1);
    }

    #[test]
    fn forced_recursion_on_diagonal() {
        let a = HodlrMatrix::from_banded(&BandedMatrix::from_diagonal(&[3.0, 1.0, 2.0]), 1);
        let r = hsdc(&a, &small_cfg(1, 1)).unwrap();
        assert!(max_rel(&r.eigenvalues, &[1.0, 2.0, 3.0], 1.0) < 1e-12);
        let q = r.q.materialize_q(8).unwrap();
        // eigenvector of 1 is e₂, of 2 is e₃, of 3 is e₁, up to sign
        for (col, row) in [(0, 1), (1, 2), (2, 0)] {
            assert!((q[(row, col)].abs() - 1.0).abs() < 1e-10, "{q}");
        }
    }

    #[test]
    fn degenerate_shift_moves() {
        // a median that coincides with the bottom of the spectrum
        let d = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0];
        let a = HodlrMatrix::from_banded(&BandedMatrix::from_diagonal(&d), 2);
        let mut cfg = small_cfg(2, 2);
        cfg.shift = ShiftStrategy::KnownSpectrum(vec![-5.0; 8]);
        let r = hsdc(&a, &cfg).unwrap();
        assert!(max_rel(&r.eigenvalues, &d, 3.0) < 1e-10);
        assert!(r.diagnostics[0].shift_attempts > 1);
    }

    #[test]
    fn toeplitz_end_to_end() {
        let n = 512;
        let b = named_matrix(NamedMatrix::Toeplitz121, n).unwrap();
        let r = hsdc_banded(&b, &small_cfg(128, 64)).unwrap();
        let exact = named_spectrum(NamedMatrix::Toeplitz121, n);
        assert!(max_rel(&r.eigenvalues, &exact, 4.0) <= 1e-9);
        let idx: Vec<usize> = (0..20).map(|k| (k * 97 + 5) % n).collect();
        let q = r.q.columns(&idx).unwrap();
        for (c, &i) in idx.iter().enumerate() {
            let v = q.column(c).into_owned();
            let res = (b.matvec(&v) - &v * r.eigenvalues[i]).norm() / 4.0;
            assert!(res <= 1e-8, "residual {res} for {i}");
        }
        let x = dense::gaussian(n, 2, &mut ChaCha8Rng::seed_from_u64(5));
        let back = r.q.apply_q(&r.q.apply_q_transpose(&x).unwrap()).unwrap();
        assert!((back - &x).norm() / x.norm() <= 1e-10);
    }

    #[test]
    fn reconstruction_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let eigs = gap_spectrum(&GapSpectrumSpec::new(64, 1e-2, 16), &mut rng).unwrap();
        let b = banded_from_spectrum(&eigs, 2, &mut rng).unwrap();
        let r = hsdc_banded(&b, &small_cfg(16, 8)).unwrap();
        let q = r.q.materialize_q(4096).unwrap();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(r.eigenvalues.clone()));
        let rec = &q * lam * q.transpose() - b.to_dense();
        assert!(dense::norm2(&rec) <= 1e-8);
        for i in [0, 13, 63] {
            // same column up to the summation order of the products
            assert!((r.q.columns(&[i]).unwrap().column(0) - q.column(i)).amax() <= 1e-14);
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let eigs = gap_spectrum(&GapSpectrumSpec::new(200, 1e-3, 50), &mut rng).unwrap();
        let b = banded_from_spectrum(&eigs, 2, &mut rng).unwrap();
        let cfg = SolverConfig { seed: 11, ..small_cfg(50, 25) };
        let r1 = hsdc_banded(&b, &cfg).unwrap();
        let r2 = hsdc_banded(&b, &cfg).unwrap();
        assert_eq!(r1.eigenvalues.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), r2.eigenvalues.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn config_validation() {
        assert!(Solver::new(SolverConfig { delta: 1.0, ..Default::default() }).is_err());
        assert!(Solver::new(SolverConfig { n_stop: 10, leaf_size: 20, ..Default::default() }).is_err());
        assert_eq!(SolverConfig::full_scale_n_stop(1), 3250);
        assert_eq!(SolverConfig::full_scale_n_stop(2), 1750);
        assert_eq!(SolverConfig::full_scale_n_stop(8), 2500);
    }
}

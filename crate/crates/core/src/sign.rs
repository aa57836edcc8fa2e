//! Dynamically weighted Halley iteration for the matrix sign function in
//! HODLR arithmetic, and the spectral projectors derived from it.
//!
//! Each step computes
//!
//! ```text
//! W = chol(I + c X²),   X ← (b/c) X + (a − b/c) X W⁻¹ W⁻ᵀ
//! ```
//!
//! with weights driven by a lower bound `l` on the smallest singular value of
//! the current iterate. A non-positive pivot in `W` means the shift sits too
//! close to an eigenvalue for the iteration to resolve, and is reported as
//! [`Error::GapTooSmall`].

use nalgebra::DMatrix;
use rand::Rng;

use crate::dense;
use crate::error::{Error, Result};
use crate::hodlr::{HodlrMatrix, TruncationConfig};

/// Weights of one iteration step together with the bound `l` they were
/// computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalleyParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub l: f64,
}

/// Optimal weights for a current lower bound `l ∈ (0, 1]`.
pub fn halley_step_params(l: f64) -> Result<HalleyParams> {
    if !(l > 0.0 && l <= 1.0) {
        return Err(Error::Domain(format!("singular value bound must lie in (0, 1], got {l:e}")));
    }
    let l2 = l * l;
    let gamma = (4.0 * (1.0 - l2) / (l2 * l2)).cbrt();
    let s = (1.0 + gamma).sqrt();
    let a = s + 0.5 * (8.0 - 4.0 * gamma + 8.0 * (2.0 - l2) / (l2 * s)).sqrt();
    let b = (a - 1.0) * (a - 1.0) / 4.0;
    let c = a + b - 1.0;
    Ok(HalleyParams { a, b, c, l })
}

/// Image of `l` under one step: `l (a + b l²) / (1 + c l²)`, capped at 1.
pub fn update_l(p: &HalleyParams) -> f64 {
    let l2 = p.l * p.l;
    (p.l * (p.a + p.b * l2) / (1.0 + p.c * l2)).min(1.0)
}

/// Number of steps the scalar recurrence needs to bring `l0` within `tol` of 1.
pub fn scalar_iterations(l0: f64, tol: f64) -> Result<usize> {
    let mut l = l0;
    let mut k = 0;
    while (1.0 - l).abs() > tol {
        l = update_l(&halley_step_params(l)?);
        k += 1;
    }
    Ok(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignConfig {
    pub truncation: TruncationConfig,
    /// Loop guard on `|1 − l_k|`.
    pub stop_tol: f64,
    pub max_iterations: usize,
    pub power_steps: usize,
    /// Relative change at which (inverse) power iteration stops early.
    pub power_tol: f64,
    /// Factor applied to the norm estimate (multiplied) and the singular value
    /// estimate (divided).
    pub safety: f64,
}

impl Default for SignConfig {
    fn default() -> Self {
        Self {
            truncation: TruncationConfig::default(),
            stop_tol: 1e-15,
            max_iterations: 25,
            power_steps: 20,
            power_tol: 1e-3,
            safety: 1.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectorPair {
    /// Projector onto the invariant subspace of the negative eigenvalues.
    pub pi_lo: HodlrMatrix,
    pub pi_hi: HodlrMatrix,
    pub trace: f64,
    /// `round(trace(pi_lo))`.
    pub nu: usize,
    pub iterations: usize,
    pub alpha: f64,
    pub l0: f64,
    /// Largest off-diagonal rank of the final iterate.
    pub max_rank: usize,
}

fn random_column(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let v = dense::unit_random_vector(n, rng);
    DMatrix::from_column_slice(n, 1, v.as_slice())
}

/// Upper estimate of `‖A‖₂` by power iteration on `A²`.
pub fn estimate_alpha(a: &HodlrMatrix, cfg: &SignConfig, rng: &mut impl Rng) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 1.0;
    }
    let mut x = random_column(n, rng);
    let mut est = 0.0;
    for _ in 0..cfg.power_steps {
        let y = a.mul_dense(&a.mul_dense(&x));
        let nrm = y.norm();
        if nrm == 0.0 {
            break;
        }
        let next = nrm.sqrt();
        x = y / nrm;
        let done = est > 0.0 && ((next - est) / next).abs() < cfg.power_tol;
        est = next;
        if done {
            break;
        }
    }
    if est > 0.0 {
        est * cfg.safety
    } else {
        1.0
    }
}

/// Lower estimate of `σ_min(X0)` by inverse power iteration on `X0²`, applied
/// through one H-Cholesky factorization of the formatted square.
pub fn estimate_l0(x0: &HodlrMatrix, cfg: &SignConfig, rng: &mut impl Rng) -> Result<f64> {
    let n = x0.nrows();
    if n == 0 {
        return Ok(1.0);
    }
    let sq = HodlrMatrix::multiply(x0, x0, &cfg.truncation)?.symmetrize(&cfg.truncation);
    let r = sq
        .cholesky(&cfg.truncation)
        .map_err(|e| Error::ShiftTooCloseToEigenvalue(format!("factorization of the squared matrix failed: {e}")))?;
    let mut x = random_column(n, rng);
    let mut est = f64::INFINITY;
    for _ in 0..cfg.power_steps {
        // θ = xᵀ (RᵀR)⁻¹ x = ‖R⁻ᵀx‖²
        let z = r.solve_upper(&x, true)?;
        let theta = z.norm_squared();
        let y = r.solve_upper(&z, false)?;
        let nrm = y.norm();
        if !(theta.is_finite() && nrm.is_finite()) || theta == 0.0 {
            return Err(Error::ShiftTooCloseToEigenvalue("inverse iteration overflowed".into()));
        }
        let next = 1.0 / theta;
        x = y / nrm;
        let done = ((next - est) / next).abs() < cfg.power_tol;
        est = next;
        if done {
            break;
        }
    }
    Ok((est.sqrt() / cfg.safety).min(1.0))
}

/// Spectral projectors of `A` at zero via the weighted Halley iteration.
pub fn hdwh(a: &HodlrMatrix, cfg: &SignConfig, rng: &mut impl Rng) -> Result<ProjectorPair> {
    let tr = &cfg.truncation;
    let alpha = estimate_alpha(a, cfg, rng);
    let mut x = a.clone().scaled(1.0 / alpha);
    let l0 = estimate_l0(&x, cfg, rng)?;
    let mut l = l0;
    let mut k = 0;
    let mut change = f64::INFINITY;
    let breakdown = |k: usize, e: Error| match e {
        Error::IndefiniteMatrix { .. } => Error::GapTooSmall {
            node: String::new(),
            shift: 0.0,
            iteration: k,
            reason: e.to_string(),
        },
        other => other,
    };
    // Weighted steps until the scalar bound reaches 1, then plain Halley steps
    // while the iterate still moves.
    let change_tol = cfg.stop_tol.cbrt();
    while (1.0 - l).abs() > cfg.stop_tol || change > change_tol {
        if k >= cfg.max_iterations {
            return Err(Error::NoConvergence { iterations: k, last_change: change });
        }
        let p = halley_step_params(l)?;
        let mut m = HodlrMatrix::multiply(&x, &x, tr)?;
        m.scale(p.c);
        m.add_diagonal(1.0);
        let w = m.cholesky(tr).map_err(|e| breakdown(k, e))?;
        let y = HodlrMatrix::mul_upper_inverse(&x, &w, false, tr)?;
        let v = HodlrMatrix::mul_upper_inverse(&y, &w, true, tr)?;
        let next = HodlrMatrix::lin_comb(p.b / p.c, &x, p.a - p.b / p.c, &v, tr)?.symmetrize(tr);
        change = next.sub(&x, tr)?.frobenius_norm();
        x = next;
        l = update_l(&p);
        k += 1;
        log::debug!(
            "sign step {k}: l = {:.3e}, a = {:.6e}, b = {:.6e}, c = {:.6e}, rank = {}, change = {change:.3e}",
            p.l,
            p.a,
            p.b,
            p.c,
            x.hodlr_rank()
        );
    }
    let max_rank = x.hodlr_rank();
    let mut pi_hi = x.clone().scaled(0.5);
    pi_hi.add_diagonal(0.5);
    let mut pi_lo = x.scaled(-0.5);
    pi_lo.add_diagonal(0.5);
    let trace = pi_lo.trace();
    Ok(ProjectorPair {
        pi_lo,
        pi_hi,
        trace,
        nu: trace.round().max(0.0) as usize,
        iterations: k,
        alpha,
        l0,
        max_rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hodlr::IndexPartition;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn with_spectrum(eigs: &[f64], rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = eigs.len();
        let (q, _) = dense::thin_qr(&dense::gaussian(n, n, rng));
        let a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(eigs)) * q.transpose();
        ((&a + a.transpose()) * 0.5, q)
    }

    #[test]
    fn params_at_fixed_point() {
        let p = halley_step_params(1.0).unwrap();
        assert_eq!((p.a, p.b, p.c), (3.0, 1.0, 3.0));
        assert_eq!(update_l(&p), 1.0);
        assert!(matches!(halley_step_params(0.0), Err(Error::Domain(_))));
        assert!(matches!(halley_step_params(-1.0), Err(Error::Domain(_))));
        assert!(matches!(halley_step_params(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn params_at_one_half() {
        // 40-digit evaluation of the closed form
        let p = halley_step_params(0.5).unwrap();
        assert!((p.a - 4.359339899916809712).abs() < 1e-14);
        assert!((p.b - 2.821291140793270274).abs() < 1e-14);
        assert!((p.c - 6.180631040710079986).abs() < 1e-14);
        assert!((update_l(&p) - 0.994960462639824049).abs() < 1e-14);
    }

    #[test]
    fn scalar_recurrence_from_tiny_bound() {
        assert!(scalar_iterations(1e-8, 1e-15).unwrap() <= 8);
        let p = halley_step_params(0.1).unwrap();
        let l = update_l(&p);
        assert!(l > 0.1 && l <= 1.0);
    }

    #[test]
    fn alpha_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let cfg = SignConfig::default();
        let a = HodlrMatrix::Dense(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0])));
        let alpha = estimate_alpha(&a, &cfg, &mut rng);
        assert!((3.0..=3.15).contains(&alpha), "{alpha}");
        let i = HodlrMatrix::identity(&IndexPartition::with_level(8, 1));
        let alpha = estimate_alpha(&i, &cfg, &mut rng);
        assert!((1.0..=1.05).contains(&alpha), "{alpha}");
    }

    #[test]
    fn alpha_bounds_random_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let g = dense::gaussian(64, 64, &mut rng);
        let a = (&g + g.transpose()) * 0.5;
        let norm = dense::norm2(&a);
        let h = HodlrMatrix::from_dense(&a, &IndexPartition::with_level(64, 2), &TruncationConfig::absolute(1e-12)).unwrap();
        let alpha = estimate_alpha(&h, &SignConfig::default(), &mut rng);
        assert!(alpha >= norm, "{alpha} < {norm}");
    }

    #[test]
    fn l0_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let cfg = SignConfig::default();
        let x = HodlrMatrix::Dense(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.2])));
        let l0 = estimate_l0(&x, &cfg, &mut rng).unwrap();
        assert!((0.19..=0.2).contains(&l0), "{l0}");
        let i = HodlrMatrix::identity(&IndexPartition::with_level(8, 1));
        let l0 = estimate_l0(&i, &cfg, &mut rng).unwrap();
        assert!((0.95..=1.0).contains(&l0), "{l0}");
        let z = HodlrMatrix::Dense(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])));
        assert!(matches!(estimate_l0(&z, &cfg, &mut rng), Err(Error::ShiftTooCloseToEigenvalue(_))));
    }

    #[test]
    fn l0_below_smallest_singular_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let g = dense::gaussian(32, 32, &mut rng);
        let m = &g * g.transpose() / 32.0 + DMatrix::identity(32, 32) * 0.01;
        let (smin, smax) = dense::singular_range(&m);
        let x = HodlrMatrix::from_dense(&(m / smax), &IndexPartition::with_level(32, 2), &TruncationConfig::absolute(1e-14)).unwrap();
        let l0 = estimate_l0(&x, &SignConfig::default(), &mut rng).unwrap();
        assert!(l0 <= smin / smax, "{l0} > {}", smin / smax);
        assert!(l0 >= 0.5 * smin / smax);
    }

    #[test]
    fn sign_of_exchange_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let a = HodlrMatrix::Dense(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let p = hdwh(&a, &SignConfig::default(), &mut rng).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((p.pi_lo.to_dense() - expect).amax() < 1e-14);
        assert_eq!(p.nu, 1);
        let a = HodlrMatrix::Dense(DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 3.0])));
        let p = hdwh(&a, &SignConfig::default(), &mut rng).unwrap();
        assert!((p.pi_lo.to_dense() - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).amax() < 1e-14);
        assert!((p.pi_hi.to_dense() - DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0]))).amax() < 1e-14);
    }

    #[test]
    fn projector_matches_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let n = 64;
        let eigs: Vec<f64> = (0..n)
            .map(|i| {
                let t: f64 = rng.random_range(0.1..1.0);
                if i % 3 == 0 { -t } else { t }
            })
            .collect();
        let neg = eigs.iter().filter(|&&e| e < 0.0).count();
        let (a, q) = with_spectrum(&eigs, &mut rng);
        let h = HodlrMatrix::from_dense(&a, &IndexPartition::with_level(n, 2), &TruncationConfig::absolute(1e-14)).unwrap();
        let cfg = SignConfig::default();
        let p = hdwh(&h, &cfg, &mut rng).unwrap();
        let mut oracle = DMatrix::zeros(n, n);
        for (i, &e) in eigs.iter().enumerate() {
            if e < 0.0 {
                oracle += q.column(i) * q.column(i).transpose();
            }
        }
        let pi = p.pi_lo.to_dense();
        assert!(dense::norm2(&(&pi - oracle)) <= 1e-8);
        assert_eq!(p.nu, neg);
        assert!((p.trace - neg as f64).abs() <= 1e-4);
        assert!(dense::norm2(&(&pi * &pi - &pi)) <= 1e3 * 1e-10);
        assert!(dense::norm2(&(&pi + p.pi_hi.to_dense() - DMatrix::identity(n, n))) <= 1e-9);
        assert!(dense::norm2(&(&a * &pi - &pi * &a)) <= 1e3 * 1e-10);
        let bound = scalar_iterations(p.l0, cfg.stop_tol).unwrap();
        assert!(p.iterations <= bound + 2 && p.iterations <= 10, "{} vs {bound}", p.iterations);
    }
}

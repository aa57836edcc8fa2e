//! Acceptance suite. Every test prints one line
//! `criterion N [PASS|FAIL] <name>: <measurements>` and then asserts.
//! Tests are serialized so the timing checks do not compete for the CPU.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use hsdc_cli::commands::{generate_matrix, MatrixKind};
use hsdc_cli::stats::spearman;
use hsdc_core::basis::{hcholp_inc, selection_certificate};
use hsdc_core::matgen::{named_matrix, named_spectrum, NamedMatrix};
use hsdc_core::sign::{hdwh, SignConfig};
use hsdc_core::{
    dense, error_metrics, oracle, BandedMatrix, Error, HodlrMatrix, IndexPartition, Reference, ShiftStrategy, Solver, SolverConfig,
    SpectralDecomposition, TruncationConfig,
};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

const EPS: f64 = 1e-10;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("criterion {id} [{}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    // Written past the test harness capture so the line always shows.
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "criterion {id} failed: {detail}");
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn config(n_stop: usize, leaf_size: usize, seed: u64, shift: ShiftStrategy) -> SolverConfig {
    SolverConfig { n_stop, leaf_size, seed, shift, ..Default::default() }
}

fn solve(a: &BandedMatrix, cfg: SolverConfig) -> (hsdc_core::Result<SpectralDecomposition>, f64) {
    let h = HodlrMatrix::from_banded(a, cfg.leaf_size);
    let mut solver = Solver::new(cfg).unwrap();
    let start = Instant::now();
    let r = solver.solve(&h);
    (r, start.elapsed().as_secs_f64())
}

/// Diagonal plus a global rank-`k` term, scaled to unit size.
fn random_dense(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let lr = dense::gaussian(n, k, rng) * dense::gaussian(k, n, rng);
    let d = DMatrix::from_diagonal(&dense::gaussian(n, 1, rng).column(0).into_owned());
    (lr + d) / (n as f64).sqrt()
}

/// `1/(1 + n|xᵢ − xⱼ|/4)` on sorted random points plus a random diagonal.
/// Off-diagonal singular values decay gradually, so truncation is active.
fn kernel_dense(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    x.sort_by(f64::total_cmp);
    let d = dense::gaussian(n, 1, rng);
    DMatrix::from_fn(n, n, |i, j| 1.0 / (1.0 + 0.25 * n as f64 * (x[i] - x[j]).abs()) + if i == j { d[i] } else { 0.0 })
}

fn cond(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = dense::singular_range(m);
    hi / lo
}

fn rel_err(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    dense::norm2(&(got - want)) / dense::norm2(want).max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_1_hodlr_arithmetic_matches_dense() {
    let _g = lock();
    let start = Instant::now();
    let cfg = TruncationConfig::absolute(EPS);
    let exact = TruncationConfig::absolute(1e-14);
    // worst error / allowed error per operation
    let mut worst = [0.0f64; 6];
    let names = ["add", "multiply", "cholesky", "solve", "right-solve", "submatrix"];
    for case in 0..50u64 {
        let n = [32, 64, 128][case as usize % 3];
        let level = [2, 3, 3][case as usize % 3];
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let k = 1 + case as usize % 4;
        let p = IndexPartition::with_level(n, level);
        let ad = if case % 2 == 0 { random_dense(n, k, &mut rng) } else { kernel_dense(n, &mut rng) };
        let bd = if case % 4 < 2 { random_dense(n, k, &mut rng) } else { kernel_dense(n, &mut rng) };
        let (a, b) = (HodlrMatrix::from_dense(&ad, &p, &exact).unwrap(), HodlrMatrix::from_dense(&bd, &p, &exact).unwrap());
        let (ad, bd) = (a.to_dense(), b.to_dense());

        let s = a.add(&b, &cfg).unwrap().to_dense();
        let want = &ad + &bd;
        worst[0] = worst[0].max(rel_err(&s, &want) / (1e2 * EPS));

        let m = HodlrMatrix::multiply(&a, &b, &cfg).unwrap().to_dense();
        let want = &ad * &bd;
        let c = dense::norm2(&ad) * dense::norm2(&bd) / dense::norm2(&want);
        worst[1] = worst[1].max(rel_err(&m, &want) / (1e2 * EPS * c));

        let spd_d = ad.tr_mul(&ad) + DMatrix::identity(n, n);
        let spd = HodlrMatrix::from_dense(&spd_d, &p, &exact).unwrap();
        let spd_d = spd.to_dense();
        let r = spd.cholesky(&cfg).unwrap();
        let rd = r.to_dense();
        worst[2] = worst[2].max(rel_err(&rd.tr_mul(&rd), &spd_d) / (1e2 * EPS * cond(&spd_d)));

        let kr = cond(&rd);
        let rhs = dense::gaussian(n, 3, &mut rng);
        for transpose in [false, true] {
            let x = r.solve_upper(&rhs, transpose).unwrap();
            let want = dense::solve_upper(&rd, &rhs, transpose).unwrap();
            worst[3] = worst[3].max(rel_err(&x, &want) / (1e2 * EPS * kr));
            let y = HodlrMatrix::mul_upper_inverse(&b, &r, transpose, &cfg).unwrap().to_dense();
            let want = dense::right_solve_upper(&bd, &rd, transpose).unwrap();
            worst[4] = worst[4].max(rel_err(&y, &want) / (1e2 * EPS * kr));
        }

        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let mut c: Vec<usize> = idx[..n / 3].to_vec();
        c.sort_unstable();
        let sub = a.extract_principal(&c).unwrap().to_dense();
        worst[5] = worst[5].max(rel_err(&sub, &ad.select_rows(&c).select_columns(&c)) / (1e2 * EPS));
        let cols = a.extract_columns(&c).unwrap().to_dense();
        worst[5] = worst[5].max(rel_err(&cols, &ad.select_columns(&c)) / (1e2 * EPS));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail: Vec<String> = names.iter().zip(&worst).map(|(n, w)| format!("{n} {w:.2e}")).collect();
    let pass = worst.iter().all(|&w| w <= 1.0) && secs < 60.0;
    report(1, "HODLR arithmetic vs dense oracle", pass, &format!("50 cases in {secs:.1} s, max error/tolerance: {}", detail.join(", ")));
}

#[test]
fn criterion_2_projector_quality() {
    let _g = lock();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut cases = 0;
    let mut failures = Vec::new();
    for (i, &n) in [128usize, 256, 512].iter().enumerate() {
        for (j, &b) in [1usize, 4].iter().enumerate() {
            for (k, &gap) in [1e-1, 1e-2, 1e-3, 1e-4].iter().enumerate() {
                let seed = (100 * i + 10 * j + k) as u64;
                let (a, eigs) = generate_matrix(MatrixKind::Gap, n, b, gap, n / 4, seed).unwrap();
                let mu = 0.5 * (eigs[n / 2 - 1] + eigs[n / 2]);
                let ad = a.to_dense();
                let oracle_eigs = oracle::dense_eigenvalues(&ad).unwrap();
                let nu_oracle = oracle_eigs.iter().filter(|&&x| x < mu).count();
                let norm = oracle_eigs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let mut h = HodlrMatrix::from_banded(&a, 64);
                h.add_diagonal(-mu);
                let pair = hdwh(&h, &SignConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let p = pair.pi_lo.to_dense();
                let idem = dense::norm2(&(&p * &p - &p));
                let comm = dense::norm2(&(&ad * &p - &p * &ad)) / norm;
                let tr = (p.trace() - nu_oracle as f64).abs();
                worst = (worst.0.max(idem), worst.1.max(comm), worst.2.max(tr));
                if idem > 1e-7 || comm > 1e-7 || tr > 1e-4 {
                    failures.push(format!("n={n} b={b} gap={gap:e}"));
                }
                cases += 1;
            }
        }
    }
    report(
        2,
        "projector quality",
        failures.is_empty(),
        &format!(
            "{cases} cases, max ||P^2-P|| {:.2e}, max ||AP-PA||/||A|| {:.2e}, max |tr P - nu| {:.2e}{}",
            worst.0,
            worst.1,
            worst.2,
            if failures.is_empty() { String::new() } else { format!(", failing: {}", failures.join("; ")) }
        ),
    );
}

/// Orthogonal projector onto coordinate directions tilted by small random
/// perturbations of varying size, so only some columns pass a high threshold.
fn tilted_projector(n: usize, nu: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut v = dense::gaussian(n, nu, rng);
    for j in 0..nu {
        let eta: f64 = rng.random_range(0.0..0.06) / (n as f64).sqrt();
        v.column_mut(j).scale_mut(eta);
        v[(idx[j], j)] += 1.0;
    }
    let (q, _) = dense::thin_qr(&v);
    &q * q.transpose()
}

#[test]
fn criterion_3_condition_bound() {
    let _g = lock();
    let cfg = TruncationConfig::absolute(EPS);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut found, mut tried, mut worst) = (0, 0, 0.0f64);
    let mut violations = Vec::new();
    let mut sizes = Vec::new();
    while found < 20 && tried < 500 {
        tried += 1;
        let n = [32, 48, 64][tried % 3];
        let nu = rng.random_range(2..=8);
        let delta = [0.95, 0.97, 0.99][(tried / 3) % 3];
        let p = tilted_projector(n, nu, &mut rng);
        let h = HodlrMatrix::from_dense(&p, &IndexPartition::with_level(n, 2), &cfg).unwrap();
        let sel = hcholp_inc(&h, delta, &cfg).unwrap();
        if sel.is_empty() {
            continue;
        }
        let cert = selection_certificate(&h, &sel, &mut rng).unwrap();
        let Some(bound) = cert.bound else { continue };
        found += 1;
        sizes.push(cert.r);
        worst = worst.max(cert.kappa / bound);
        if cert.kappa > bound {
            violations.push(format!("n={n} r={} kappa={:.4} bound={bound:.4}", cert.r, cert.kappa));
        }
    }
    let pass = found == 20 && violations.is_empty();
    let (rmin, rmax) = (sizes.iter().min().copied().unwrap_or(0), sizes.iter().max().copied().unwrap_or(0));
    report(
        3,
        "condition number bound",
        pass,
        &format!(
            "{found} instances with the hypothesis ({tried} drawn), r in {rmin}..={rmax}, max kappa/bound {worst:.4}{}",
            if violations.is_empty() { String::new() } else { format!(", violations: {}", violations.join("; ")) }
        ),
    );
}

#[test]
fn criterion_4_end_to_end_accuracy() {
    let _g = lock();
    let start = Instant::now();
    let n = 2048;
    let mut lines = Vec::new();
    let mut pass = true;
    for kind in [NamedMatrix::Toeplitz121, NamedMatrix::Clement] {
        let a = named_matrix(kind, n).unwrap();
        let eigs = named_spectrum(kind, n);
        let (r, secs) = solve(&a, config(256, 128, 0, ShiftStrategy::DiagonalMedian));
        match r {
            Ok(dec) => {
                let vectors = oracle::inverse_iteration(&a, &eigs, &mut ChaCha8Rng::seed_from_u64(0));
                let rep = error_metrics(&a, &dec.eigenvalues, &dec.q, Some(&Reference { eigenvalues: eigs, vectors: Some(vectors) })).unwrap();
                let (el, eq) = (rep.e_lambda.unwrap(), rep.e_q.unwrap());
                pass &= el <= 1e-8 && rep.e_res <= 1e-8 && rep.e_orth <= 1e-8 && eq <= 1e-8;
                lines.push(format!(
                    "{kind:?} e_lambda {el:.1e} e_res {:.1e} e_orth {:.1e} e_Q {eq:.1e} ({secs:.1} s)",
                    rep.e_res, rep.e_orth
                ));
            }
            Err(e) => {
                pass = false;
                lines.push(format!("{kind:?} failed: {e}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    report(4, "end-to-end accuracy, n = 2048", pass, &format!("{}; total {secs:.0} s", lines.join("; ")));
}

#[test]
fn criterion_5_gap_degradation_and_breakdown() {
    let _g = lock();
    let n = 2048;
    let gaps = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
    let mut res = Vec::new();
    let mut failed = Vec::new();
    for &gap in &gaps {
        let (a, eigs) = generate_matrix(MatrixKind::Gap, n, 8, gap, 256, 0).unwrap();
        let (r, _) = solve(&a, config(256, 128, 0, ShiftStrategy::KnownSpectrum(eigs.clone())));
        match r.and_then(|dec| error_metrics(&a, &dec.eigenvalues, &dec.q, Some(&Reference { eigenvalues: eigs, vectors: None }))) {
            Ok(rep) => res.push(rep.e_res),
            Err(e) => {
                failed.push(format!("gap {gap:e}: {e}"));
                res.push(f64::INFINITY);
            }
        }
    }
    let inv_gap: Vec<f64> = gaps.iter().map(|g| 1.0 / g).collect();
    let rho = spearman(&inv_gap, &res).unwrap_or(f64::NAN);
    let max_res = res.iter().copied().fold(0.0, f64::max);

    let (a, eigs) = generate_matrix(MatrixKind::Gap, n, 8, 1e-10, 256, 0).unwrap();
    let (r, secs) = solve(&a, config(256, 128, 0, ShiftStrategy::KnownSpectrum(eigs)));
    let breakdown = match &r {
        Err(Error::GapTooSmall { iteration, .. }) => format!("gap 1e-10 -> GapTooSmall at iteration {iteration} after {secs:.2} s"),
        Err(e) => format!("gap 1e-10 -> unexpected error: {e}"),
        Ok(_) => "gap 1e-10 -> returned a result".into(),
    };
    let graceful = matches!(r, Err(Error::GapTooSmall { .. }));
    let pass = failed.is_empty() && max_res <= 1e-5 && rho >= 0.7 && graceful;
    let series: Vec<String> = gaps.iter().zip(&res).map(|(g, e)| format!("{g:.0e}:{e:.1e}")).collect();
    report(
        5,
        "gap degradation and breakdown",
        pass,
        &format!(
            "e_res {}; max {max_res:.1e}, spearman {rho:.3}; {breakdown}{}",
            series.join(" "),
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join("; ")) }
        ),
    );
}

#[test]
fn criterion_6_delta_tradeoff() {
    let _g = lock();
    let n = 2048;
    let deltas = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let (a, _) = generate_matrix(MatrixKind::Gap, n, 1, 1e-2, 256, 0).unwrap();
    let mut pct = Vec::new();
    let mut kappa = 0.0f64;
    let mut errors = Vec::new();
    for &delta in &deltas {
        let cfg = SolverConfig { delta, certify: true, ..config(256, 128, 0, ShiftStrategy::DiagonalMedian) };
        match solve(&a, cfg).0 {
            Ok(dec) => {
                pct.push(100.0 * dec.mean_selection_fraction().unwrap_or(0.0));
                kappa = kappa.max(dec.max_kappa().unwrap_or(f64::INFINITY));
            }
            Err(e) => {
                errors.push(format!("delta {delta}: {e}"));
                pct.push(f64::NAN);
            }
        }
    }
    let at_04 = pct[2];
    let monotone = pct.windows(2).all(|w| w[1] <= w[0]);
    let pass = errors.is_empty() && at_04 >= 85.0 && kappa <= 100.0 && monotone;
    let series: Vec<String> = deltas.iter().zip(&pct).map(|(d, p)| format!("{d}:{p:.1}%")).collect();
    report(
        6,
        "delta trade-off",
        pass,
        &format!(
            "selection {}; at 0.4 {at_04:.1}%, max kappa {kappa:.2}, nonincreasing {monotone}{}",
            series.join(" "),
            if errors.is_empty() { String::new() } else { format!("; failed: {}", errors.join("; ")) }
        ),
    );
}

#[test]
fn criterion_7_scaling() {
    let _g = lock();
    let sizes = [1024usize, 2048, 4096, 8192];
    let mut times = Vec::new();
    let mut mem = Vec::new();
    for &n in &sizes {
        let (a, _) = generate_matrix(MatrixKind::Gap, n, 1, 1e-2, 256, 0).unwrap();
        // best of two runs to damp scheduling noise
        let mut best = f64::INFINITY;
        let mut units = 0;
        for _ in 0..2 {
            let (r, secs) = solve(&a, config(256, 128, 0, ShiftStrategy::DiagonalMedian));
            units = r.expect("scaling run failed").q.memory_units();
            best = best.min(secs);
        }
        times.push(best);
        mem.push(units as f64);
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for i in 0..sizes.len() - 1 {
        let (n, m) = (sizes[i] as f64, sizes[i + 1] as f64);
        let lr = m.ln() / n.ln();
        let t_lim = 2.0 * lr.powi(3) * 1.4;
        let m_lim = 2.0 * lr.powi(2) * 1.3;
        let (tr, mr) = (times[i + 1] / times[i], mem[i + 1] / mem[i]);
        pass &= tr <= t_lim && mr <= m_lim;
        parts.push(format!("{}->{}: time x{tr:.2} (<= {t_lim:.2}), memory x{mr:.2} (<= {m_lim:.2})", sizes[i], sizes[i + 1]));
    }
    let secs: Vec<String> = sizes.iter().zip(&times).map(|(n, t)| format!("{n}:{t:.2}s")).collect();
    report(7, "complexity and storage scaling", pass, &format!("{}; {}", secs.join(" "), parts.join("; ")));
}

#[test]
fn criterion_8_determinism() {
    let _g = lock();
    let (a, _) = generate_matrix(MatrixKind::Gap, 2048, 2, 1e-3, 256, 5).unwrap();
    let run = || {
        let dec = solve(&a, config(256, 128, 11, ShiftStrategy::DiagonalMedian)).0.unwrap();
        let mut q = Vec::new();
        dec.q.write(&mut q).unwrap();
        (dec.eigenvalues, q)
    };
    let (e1, q1) = run();
    let (e2, q2) = run();
    let same_eigs = e1.len() == e2.len() && e1.iter().zip(&e2).all(|(x, y)| x.to_bits() == y.to_bits());
    let same_q = q1 == q2;
    report(
        8,
        "determinism",
        same_eigs,
        &format!("2 runs, n = 2048: eigenvalues bit-identical {same_eigs}, factored Q bytes identical {same_q}"),
    );
}

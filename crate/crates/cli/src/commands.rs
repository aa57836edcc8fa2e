//! The generate / solve / verify / sweep commands.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use hsdc_core::hodlr::io::{read_hodlr, MAGIC as HODLR_MAGIC};
use hsdc_core::matgen::{banded_from_spectrum, gap_spectrum, named_matrix, named_spectrum, GapSpectrumSpec, NamedMatrix};
use hsdc_core::metrics::{error_metrics, Reference};
use hsdc_core::oracle;
use hsdc_core::{BandedMatrix, Error, FactoredEigenvectors, HodlrMatrix, Result, ShiftStrategy, Solver, SolverConfig, SpectralDecomposition, TruncationConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mm;

pub const EIGENVALUES_FILE: &str = "eigenvalues.txt";
pub const Q_FILE: &str = "q.bin";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.jsonl";
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    /// Prescribed gap spectrum made banded by rotations.
    Gap,
    Toeplitz121,
    Clement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftKind {
    /// Median of the diagonal.
    Median,
    /// Middle gap of the spectrum recorded in the input's sidecar.
    Spectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Solver knobs shared by `solve` and `sweep`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// Pivot threshold of the column selection.
    #[arg(long, default_value_t = 0.4)]
    pub delta: f64,
    /// Absolute truncation tolerance of the HODLR arithmetic.
    #[arg(long, default_value_t = 1e-10)]
    pub epsilon: f64,
    /// Largest problem handed to the dense eigensolver.
    #[arg(long, default_value_t = 256)]
    pub n_stop: usize,
    #[arg(long, default_value_t = 128)]
    pub leaf_size: usize,
    #[arg(long, default_value_t = 10)]
    pub oversampling: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Measure the conditioning of the selected columns at every split.
    #[arg(long)]
    pub certify: bool,
}

impl Default for SolverArgs {
    fn default() -> Self {
        Self { delta: 0.4, epsilon: 1e-10, n_stop: 256, leaf_size: 128, oversampling: 10, seed: 0, certify: false }
    }
}

impl SolverArgs {
    pub fn config(&self, shift: ShiftStrategy) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            truncation: TruncationConfig::absolute(self.epsilon),
            delta: self.delta,
            oversampling: self.oversampling,
            n_stop: self.n_stop,
            leaf_size: self.leaf_size,
            seed: self.seed,
            shift,
            certify: self.certify,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// JSON record written next to every generated matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: MatrixKind,
    pub n: usize,
    pub bandwidth: usize,
    pub gap: Option<f64>,
    pub seed: u64,
    pub n_stop: usize,
    pub sha256: String,
    /// Ascending.
    pub spectrum: Vec<f64>,
}

pub fn sidecar_path(matrix: &Path) -> PathBuf {
    let mut s = matrix.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = MatrixKind::Gap)]
    pub kind: MatrixKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub bandwidth: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub gap: f64,
    /// Sets the number of leaf intervals of the gap spectrum (n / n_stop).
    #[arg(long, default_value_t = 256)]
    pub n_stop: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Matrix Market output; the sidecar goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

/// A generated matrix with its spectrum.
pub fn generate_matrix(kind: MatrixKind, n: usize, bandwidth: usize, gap: f64, n_stop: usize, seed: u64) -> Result<(BandedMatrix, Vec<f64>)> {
    match kind {
        MatrixKind::Gap => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let eigs = gap_spectrum(&GapSpectrumSpec::new(n, gap, n_stop.max(1)), &mut rng)?;
            let a = banded_from_spectrum(&eigs, bandwidth, &mut rng)?;
            Ok((a, eigs))
        }
        MatrixKind::Toeplitz121 => Ok((named_matrix(NamedMatrix::Toeplitz121, n)?, named_spectrum(NamedMatrix::Toeplitz121, n))),
        MatrixKind::Clement => Ok((named_matrix(NamedMatrix::Clement, n)?, named_spectrum(NamedMatrix::Clement, n))),
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<Sidecar> {
    check_parent(&args.out)?;
    let (a, spectrum) = generate_matrix(args.kind, args.n, args.bandwidth, args.gap, args.n_stop, args.seed)?;
    let mut comments = vec![format!("kind {:?}, seed {}", args.kind, args.seed)];
    if args.kind == MatrixKind::Gap {
        comments.push(format!("gap {:e}, n_stop {}", args.gap, args.n_stop));
    }
    let mut buf = Vec::new();
    mm::write_banded(&a, &comments, &mut buf)?;
    fs::write(&args.out, &buf)?;
    let side = Sidecar {
        kind: args.kind,
        n: a.n(),
        bandwidth: a.bandwidth(),
        gap: (args.kind == MatrixKind::Gap).then_some(args.gap),
        seed: args.seed,
        n_stop: args.n_stop,
        sha256: sha256_hex(&buf),
        spectrum,
    };
    write_json(&sidecar_path(&args.out), &side)?;
    Ok(side)
}

/// An input matrix read from disk.
pub struct Input {
    pub banded: Option<BandedMatrix>,
    pub hodlr: HodlrMatrix,
    pub sha256: String,
    pub sidecar: Option<Sidecar>,
    /// Set when a wide-band input was reduced to tridiagonal form first.
    pub tridiagonalized: bool,
}

pub fn load_input(path: &Path, leaf_size: usize, tridiagonalize_above: Option<usize>) -> Result<Input> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let sha256 = sha256_hex(&bytes);
    let side = sidecar_path(path);
    let sidecar = if side.exists() {
        let s: Sidecar = serde_json::from_slice(&fs::read(&side)?).map_err(|e| Error::Format(format!("{}: {e}", side.display())))?;
        (s.sha256 == sha256).then_some(s).or_else(|| {
            log::warn!("sidecar {} belongs to a different matrix, ignoring it", side.display());
            None
        })
    } else {
        None
    };
    if bytes.starts_with(HODLR_MAGIC) {
        let hodlr = read_hodlr(&mut bytes.as_slice())?;
        return Ok(Input { banded: None, hodlr, sha256, sidecar, tridiagonalized: false });
    }
    let mut a = mm::read_banded(BufReader::new(bytes.as_slice()))?;
    let mut tridiagonalized = false;
    if let Some(limit) = tridiagonalize_above {
        if a.bandwidth() > limit {
            log::info!("reducing bandwidth {} to tridiagonal form", a.bandwidth());
            a = oracle::tridiagonalize(&a.to_dense())?;
            tridiagonalized = true;
        }
    }
    let hodlr = HodlrMatrix::from_banded(&a, leaf_size);
    Ok(Input { banded: Some(a), hodlr, sha256, sidecar, tridiagonalized })
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Matrix Market file or HODLR container.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ShiftKind::Median)]
    pub shift: ShiftKind,
    /// Reduce inputs wider than this bandwidth to tridiagonal form first
    /// (dense, O(n³)); eigenvectors then refer to the reduced matrix.
    #[arg(long)]
    pub tridiagonalize_above: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

/// Summary written to `run.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub input: String,
    pub input_sha256: String,
    pub n: usize,
    pub shift: ShiftKind,
    pub config: SolverArgs,
    pub tridiagonalized: bool,
    pub status: String,
    pub error: Option<String>,
    pub seconds: f64,
    pub memory_units: Option<usize>,
    pub mean_selection_fraction: Option<f64>,
    pub max_kappa: Option<f64>,
    pub version: String,
}

pub fn shift_strategy(kind: ShiftKind, sidecar: Option<&Sidecar>) -> Result<ShiftStrategy> {
    match kind {
        ShiftKind::Median => Ok(ShiftStrategy::DiagonalMedian),
        ShiftKind::Spectrum => sidecar
            .map(|s| ShiftStrategy::KnownSpectrum(s.spectrum.clone()))
            .ok_or_else(|| Error::Domain("--shift spectrum needs a matching sidecar next to the input".into())),
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<SpectralDecomposition> {
    if !args.input.is_file() {
        return Err(Error::Io(format!("{} is not a readable file", args.input.display())));
    }
    fs::create_dir_all(&args.out)?;
    args.solver.config(ShiftStrategy::DiagonalMedian)?;
    let input = load_input(&args.input, args.solver.leaf_size, args.tridiagonalize_above)?;
    let cfg = args.solver.config(shift_strategy(args.shift, input.sidecar.as_ref())?)?;
    let n = input.hodlr.nrows();
    log::info!("solving n = {n} from {}", args.input.display());
    let mut solver = Solver::new(cfg)?;
    let start = Instant::now();
    let result = solver.solve(&input.hodlr);
    let seconds = start.elapsed().as_secs_f64();
    let mut record = RunRecord {
        command: "solve".into(),
        input: args.input.display().to_string(),
        input_sha256: input.sha256.clone(),
        n,
        shift: args.shift,
        config: args.solver.clone(),
        tridiagonalized: input.tridiagonalized,
        status: "ok".into(),
        error: None,
        seconds,
        memory_units: None,
        mean_selection_fraction: None,
        max_kappa: None,
        version: env!("CARGO_PKG_VERSION").into(),
    };
    write_jsonl(&args.out.join(DIAGNOSTICS_FILE), solver.diagnostics())?;
    match result {
        Ok(dec) => {
            record.memory_units = Some(dec.q.memory_units());
            record.mean_selection_fraction = dec.mean_selection_fraction();
            record.max_kappa = dec.max_kappa();
            write_eigenvalues(&args.out.join(EIGENVALUES_FILE), &dec.eigenvalues, &record)?;
            let mut w = BufWriter::new(File::create(args.out.join(Q_FILE))?);
            dec.q.write(&mut w)?;
            w.flush()?;
            write_json(&args.out.join(RUN_FILE), &record)?;
            Ok(dec)
        }
        Err(e) => {
            record.status = error_kind(&e).into();
            record.error = Some(e.to_string());
            write_json(&args.out.join(RUN_FILE), &record)?;
            Err(e)
        }
    }
}

/// One eigenvalue per line after a commented header. Nothing run-dependent
/// goes in, so identical runs give identical files.
fn write_eigenvalues(path: &Path, vals: &[f64], rec: &RunRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# input_sha256 {}", rec.input_sha256)?;
    writeln!(w, "# seed {} delta {} epsilon {:e} n_stop {} leaf_size {} oversampling {} shift {:?}", rec.config.seed, rec.config.delta, rec.config.epsilon, rec.config.n_stop, rec.config.leaf_size, rec.config.oversampling, rec.shift)?;
    for v in vals {
        writeln!(w, "{v:?}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eigenvalues(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<f64>().map_err(|_| Error::Format(format!("bad eigenvalue line '{l}'"))))
        .collect()
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory written by `solve`.
    #[arg(long)]
    pub decomposition: PathBuf,
    /// Largest n for which a dense reference or inverse-iteration
    /// eigenvectors are computed.
    #[arg(long, default_value_t = 2048)]
    pub dense_cap: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub tridiagonalize_above: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyRecord {
    pub input: String,
    pub input_sha256: String,
    pub reference: String,
    pub seed: u64,
    pub n: usize,
    pub sampled: usize,
    pub norm: f64,
    pub e_lambda: Option<f64>,
    pub e_res: f64,
    pub e_orth: f64,
    pub e_q: Option<f64>,
}

/// Reference eigenpairs: the sidecar spectrum when there is one (with
/// inverse-iteration vectors up to the cap), otherwise the dense oracle up to
/// the cap.
pub fn reference_for(input: &Input, dense_cap: usize, seed: u64) -> Result<(Option<Reference>, String)> {
    let n = input.hodlr.nrows();
    if let Some(s) = input.sidecar.as_ref().filter(|_| !input.tridiagonalized) {
        let vectors = match &input.banded {
            Some(b) if n <= dense_cap => Some(oracle::inverse_iteration(b, &s.spectrum, &mut ChaCha8Rng::seed_from_u64(seed))),
            _ => None,
        };
        let label = if vectors.is_some() { "sidecar spectrum + inverse iteration" } else { "sidecar spectrum" };
        return Ok((Some(Reference { eigenvalues: s.spectrum.clone(), vectors }), label.into()));
    }
    if n <= dense_cap {
        let dense = match &input.banded {
            Some(b) => b.to_dense(),
            None => input.hodlr.to_dense(),
        };
        let (eigenvalues, vectors) = oracle::dense_eig(&dense)?;
        return Ok((Some(Reference { eigenvalues, vectors: Some(vectors) }), "dense oracle".into()));
    }
    Ok((None, "none".into()))
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyRecord> {
    let input = load_input(&args.input, 128, args.tridiagonalize_above)?;
    let vals = read_eigenvalues(&args.decomposition.join(EIGENVALUES_FILE))?;
    let qpath = args.decomposition.join(Q_FILE);
    let q = FactoredEigenvectors::read(&mut BufReader::new(File::open(&qpath).map_err(|e| Error::Io(format!("{}: {e}", qpath.display())))?))?;
    let (reference, label) = reference_for(&input, args.dense_cap, args.seed)?;
    let report = match &input.banded {
        Some(b) => error_metrics(b, &vals, &q, reference.as_ref())?,
        None => error_metrics(&input.hodlr, &vals, &q, reference.as_ref())?,
    };
    let rec = VerifyRecord {
        input: args.input.display().to_string(),
        input_sha256: input.sha256,
        reference: label,
        seed: args.seed,
        n: report.n,
        sampled: report.sampled,
        norm: report.norm,
        e_lambda: report.e_lambda,
        e_res: report.e_res,
        e_orth: report.e_orth,
        e_q: report.e_q,
    };
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&rec).map_err(|e| Error::Format(e.to_string()))? + "\n",
        Format::Csv => to_csv(std::slice::from_ref(&rec))?,
    };
    emit(args.out.as_deref(), &text)?;
    Ok(rec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    Delta,
    Gap,
    N,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub grid: Grid,
    /// Grid values; defaults to the standard grid of the chosen parameter.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    #[arg(long, default_value_t = 2048)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub bandwidth: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub gap: f64,
    /// Also compute reference eigenvectors (inverse iteration) for e_Q.
    #[arg(long)]
    pub vectors: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

pub fn default_grid(grid: Grid) -> Vec<f64> {
    match grid {
        Grid::Delta => vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        Grid::Gap => vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
        Grid::N => vec![1024.0, 2048.0, 4096.0, 8192.0],
    }
}

/// One point of a sweep. Failed points keep their row with the error.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub grid: Grid,
    pub value: f64,
    pub n: usize,
    pub bandwidth: usize,
    pub gap: f64,
    pub delta: f64,
    pub seed: u64,
    pub status: String,
    pub error: Option<String>,
    /// Mean over all divide steps of the selected share of the basis columns.
    pub selection_pct: Option<f64>,
    /// The same share at the top-level split only.
    pub root_selection_pct: Option<f64>,
    pub max_kappa: Option<f64>,
    pub e_lambda: Option<f64>,
    pub e_res: Option<f64>,
    pub e_orth: Option<f64>,
    pub e_q: Option<f64>,
    pub seconds: Option<f64>,
    pub memory_units: Option<usize>,
    pub splits: usize,
}

/// Generates the matrix of one grid point, solves it and measures it.
pub fn sweep_point(grid: Grid, value: f64, args: &SweepArgs) -> SweepRow {
    let mut solver_args = args.solver.clone();
    let (mut n, mut gap) = (args.n, args.gap);
    match grid {
        Grid::Delta => {
            solver_args.delta = value;
            solver_args.certify = true;
        }
        Grid::Gap => gap = value,
        Grid::N => n = value as usize,
    }
    let mut row = SweepRow {
        grid,
        value,
        n,
        bandwidth: args.bandwidth,
        gap,
        delta: solver_args.delta,
        seed: solver_args.seed,
        status: "ok".into(),
        error: None,
        selection_pct: None,
        root_selection_pct: None,
        max_kappa: None,
        e_lambda: None,
        e_res: None,
        e_orth: None,
        e_q: None,
        seconds: None,
        memory_units: None,
        splits: 0,
    };
    let mut run = || -> Result<()> {
        let (a, eigs) = generate_matrix(MatrixKind::Gap, n, args.bandwidth, gap, solver_args.n_stop, solver_args.seed)?;
        // The gap grid places every shift in the prescribed gap.
        let shift = if grid == Grid::Gap { ShiftStrategy::KnownSpectrum(eigs.clone()) } else { ShiftStrategy::DiagonalMedian };
        let cfg = solver_args.config(shift)?;
        let h = HodlrMatrix::from_banded(&a, cfg.leaf_size);
        let mut solver = Solver::new(cfg)?;
        let start = Instant::now();
        let res = solver.solve(&h);
        row.seconds = Some(start.elapsed().as_secs_f64());
        row.splits = solver.diagnostics().iter().filter(|d| !d.base_case).count();
        let dec = res?;
        row.memory_units = Some(dec.q.memory_units());
        row.selection_pct = dec.mean_selection_fraction().map(|f| 100.0 * f);
        row.root_selection_pct = dec.diagnostics.first().and_then(|d| d.selection_fraction()).map(|f| 100.0 * f);
        row.max_kappa = dec.max_kappa();
        let vectors = args.vectors.then(|| oracle::inverse_iteration(&a, &eigs, &mut ChaCha8Rng::seed_from_u64(solver_args.seed)));
        let rep = error_metrics(&a, &dec.eigenvalues, &dec.q, Some(&Reference { eigenvalues: eigs, vectors }))?;
        row.e_lambda = rep.e_lambda;
        row.e_res = Some(rep.e_res);
        row.e_orth = Some(rep.e_orth);
        row.e_q = rep.e_q;
        Ok(())
    };
    if let Err(e) = run() {
        log::warn!("sweep point {grid:?} = {value:e} failed: {e}");
        row.status = error_kind(&e).into();
        row.error = Some(e.to_string());
    }
    row
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    args.solver.config(ShiftStrategy::DiagonalMedian)?;
    if let Some(p) = &args.out {
        check_parent(p)?;
    }
    let values = if args.values.is_empty() { default_grid(args.grid) } else { args.values.clone() };
    let mut rows = Vec::new();
    for &v in &values {
        let row = sweep_point(args.grid, v, args);
        log::info!("{:?} = {v:e}: {}", args.grid, row.status);
        rows.push(row);
    }
    let text = match args.format {
        Format::Csv => to_csv(&rows)?,
        Format::Json => {
            let mut s = String::new();
            for r in &rows {
                s += &serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
                s.push('\n');
            }
            s
        }
    };
    emit(args.out.as_deref(), &text)?;
    Ok(rows)
}

/// Short name of an error class, used as the status of failed runs.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::GapTooSmall { .. } => "gap_too_small",
        Error::NoConvergence { .. } => "no_convergence",
        Error::DegenerateSplit { .. } => "degenerate_split",
        Error::CompletionDeficient { .. } => "completion_deficient",
        Error::IndefiniteMatrix { .. } | Error::NotPsd { .. } => "indefinite",
        Error::DepthExceeded(_) => "depth_exceeded",
        Error::Io(_) => "io",
        Error::Format(_) => "format",
        _ => "error",
    }
}

/// Process exit code for an error: 2 numerical breakdown, 3 I/O, 4 bad
/// configuration or input, 1 anything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::GapTooSmall { .. }
        | Error::NoConvergence { .. }
        | Error::DegenerateSplit { .. }
        | Error::CompletionDeficient { .. }
        | Error::IndefiniteMatrix { .. }
        | Error::NotPsd { .. }
        | Error::ShiftTooCloseToEigenvalue(_) => 2,
        Error::Io(_) | Error::Format(_) => 3,
        Error::Domain(_) | Error::DimensionMismatch(_) | Error::NonSymmetric { .. } | Error::DenseCapExceeded { .. } => 4,
        _ => 1,
    }
}

fn check_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(p) if !p.is_dir() => Err(Error::Io(format!("directory {} does not exist", p.display()))),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

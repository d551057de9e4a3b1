//! Command-line front end: problem files, reports and the three subcommands.
//!
//! A problem file is JSON:
//!
//! ```text
//! {
//!   "dim": 2,
//!   "states": [{"prior": 0.5, "matrix": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}, ...],
//!   "povm": [[[[1, 0], [0, 0]], ...], ...],
//!   "spec": {"kind": "trine"}
//! }
//! ```
//!
//! Matrices are lists of rows (row-major) and every entry is a `[re, im]`
//! pair. `povm` and `spec` are optional; when `states` is empty the ensemble
//! is generated from `spec`.
//!
//! Exit status: 0 optimal, 1 not optimal or not converged, 2 usage,
//! 3 validation, 4 parse, 5 numeric failure, 6 I/O.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::certificate::{certify_with, Certificate, CertifyOptions, Verdict, DEFAULT_TOLERANCE};
use crate::ensemble::{generate, validate_density, Ensemble, EnsembleSpec};
use crate::matrix::{ComplexMatrix, ComplexVector, HermitianMatrix};
use crate::measurement::{validate_povm, Povm};
use crate::solver::{solve, SolveTrace, SolverConfig, StartKind, StopReason};

pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_NOT_OPTIMAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_PARSE: i32 = 4;
pub const EXIT_NUMERIC: i32 = 5;
pub const EXIT_IO: i32 = 6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }

    fn from_core(context: &str, e: crate::Error) -> Self {
        let msg = if context.is_empty() {
            e.to_string()
        } else {
            format!("{context}: {e}")
        };
        if e.is_numeric() {
            CliError::Numeric(msg)
        } else {
            CliError::Validation(msg)
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

type RawRows = Vec<Vec<[f64; 2]>>;

/// A square complex matrix in the `[re, im]` row-major encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRows", into = "RawRows")]
pub struct EncodedMatrix(pub ComplexMatrix);

impl TryFrom<RawRows> for EncodedMatrix {
    type Error = String;

    fn try_from(rows: RawRows) -> std::result::Result<Self, String> {
        let n = rows.len();
        if n == 0 {
            return Err("matrix has no rows".into());
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(format!(
                    "matrix is not square: {n} rows but row {r} has {} entries",
                    row.len()
                ));
            }
        }
        Ok(EncodedMatrix(ComplexMatrix::from_fn(n, n, |r, c| {
            Complex64::new(rows[r][c][0], rows[r][c][1])
        })))
    }
}

impl From<EncodedMatrix> for RawRows {
    fn from(m: EncodedMatrix) -> Self {
        let m = m.0;
        (0..m.nrows())
            .map(|r| {
                (0..m.ncols())
                    .map(|c| [m[(r, c)].re, m[(r, c)].im])
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    pub prior: f64,
    pub matrix: EncodedMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<StateEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm: Option<Vec<EncodedMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<EnsembleSpec>,
}

fn check_shape(field: &str, m: &ComplexMatrix, dim: usize) -> CliResult<()> {
    if m.nrows() != dim {
        return Err(CliError::Parse(format!(
            "{field}: expected a {dim}x{dim} matrix, found {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

impl ProblemFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let file: ProblemFile =
            serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        for (i, s) in file.states.iter().enumerate() {
            check_shape(&format!("states[{i}].matrix"), &s.matrix.0, file.dim)?;
        }
        for (j, m) in file.povm.iter().flatten().enumerate() {
            check_shape(&format!("povm[{j}]"), &m.0, file.dim)?;
        }
        if file.states.is_empty() && file.spec.is_none() {
            return Err(CliError::Parse(
                "either `states` or `spec` is required".into(),
            ));
        }
        Ok(file)
    }

    pub fn from_parts(ens: &Ensemble, povm: Option<&Povm>, spec: Option<EnsembleSpec>) -> Self {
        ProblemFile {
            dim: ens.dim(),
            states: ens
                .priors()
                .iter()
                .zip(ens.states())
                .map(|(&prior, rho)| StateEntry {
                    prior,
                    matrix: EncodedMatrix(rho.as_matrix().clone()),
                })
                .collect(),
            povm: povm.map(|p| {
                p.elements()
                    .iter()
                    .map(|e| EncodedMatrix(e.as_matrix().clone()))
                    .collect()
            }),
            spec,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn ensemble(&self) -> CliResult<Ensemble> {
        let ens = if self.states.is_empty() {
            let spec = self.spec.as_ref().expect("checked by parse");
            generate(spec).map_err(|e| CliError::from_core("spec", e))?
        } else {
            let mut priors = Vec::with_capacity(self.states.len());
            let mut states = Vec::with_capacity(self.states.len());
            for (i, s) in self.states.iter().enumerate() {
                let field = format!("states[{i}]");
                let h = HermitianMatrix::new(s.matrix.0.clone())
                    .map_err(|e| CliError::from_core(&field, e))?;
                states.push(validate_density(h).map_err(|e| CliError::from_core(&field, e))?);
                priors.push(s.prior);
            }
            Ensemble::new(priors, states).map_err(|e| CliError::from_core("states", e))?
        };
        if ens.dim() != self.dim {
            return Err(CliError::Validation(format!(
                "dim: file says {} but the ensemble has dimension {}",
                self.dim,
                ens.dim()
            )));
        }
        Ok(ens)
    }

    pub fn measurement(&self) -> CliResult<Option<Povm>> {
        match &self.povm {
            None => Ok(None),
            Some(elements) => validate_povm(elements.iter().map(|m| m.0.clone()))
                .map(Some)
                .map_err(|e| CliError::from_core("povm", e)),
        }
    }
}

/// Serializes with 17 significant digits so every double round-trips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = RawValue::from_string(fmt_num(self.0)).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else {
            s.serialize_none()
        }
    }
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn nums(xs: &[f64]) -> Vec<Num> {
    xs.iter().copied().map(Num).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub outcome: usize,
    pub eigenvalue: Num,
    pub vector: Vec<[Num; 2]>,
}

impl WitnessReport {
    fn new(outcome: usize, eigenvalue: f64, v: &ComplexVector) -> Self {
        WitnessReport {
            outcome,
            eigenvalue: Num(eigenvalue),
            vector: v.iter().map(|z| [Num(z.re), Num(z.im)]).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub verdict: &'static str,
    pub tolerance: Num,
    pub strict: bool,
    pub gamma_hermiticity_residual: Num,
    pub g_min_eigenvalues: Vec<Num>,
    pub equality_residual: Num,
    pub zero_product_residual: Num,
    pub witness: Option<WitnessReport>,
}

impl From<&Certificate> for CertificateReport {
    fn from(c: &Certificate) -> Self {
        let (verdict, witness) = match &c.verdict {
            Verdict::Optimal => ("optimal", None),
            Verdict::NotOptimal { witness } => (
                "not_optimal",
                Some(WitnessReport::new(
                    witness.outcome,
                    witness.eigenvalue,
                    &witness.vector,
                )),
            ),
        };
        CertificateReport {
            verdict,
            tolerance: Num(c.tolerance),
            strict: c.strict,
            gamma_hermiticity_residual: Num(c.gamma_herm_residual),
            g_min_eigenvalues: nums(&c.gj_min_eigenvalues),
            equality_residual: Num(c.equality_max_residual),
            zero_product_residual: Num(c.zero_product_max_residual),
            witness,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub converged: bool,
    pub stop_reason: StopReason,
    pub start: &'static str,
    pub seed: u64,
    pub max_iter: usize,
    pub iterations: usize,
    pub restarts: usize,
    pub initial_p_corr: Num,
    pub final_epsilon: Option<Num>,
    pub final_lambda: Option<Num>,
    pub lambda_history_length: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub input_sha256: String,
    pub n_states: usize,
    pub dim: usize,
    pub p_corr: Num,
    pub p_err: Num,
    pub certificate: CertificateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverReport>,
}

impl Report {
    fn new(command: &'static str, input: &[u8], ens: &Ensemble, cert: &Certificate) -> Self {
        Report {
            command,
            input_sha256: hex::encode(Sha256::digest(input)),
            n_states: ens.len(),
            dim: ens.dim(),
            p_corr: Num(cert.p_corr),
            p_err: Num(cert.p_err()),
            certificate: cert.into(),
            solver: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.certificate.verdict == "optimal"
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut t = String::new();
        let c = &self.certificate;
        let _ = writeln!(
            t,
            "{}: {} states in dimension {}",
            self.command, self.n_states, self.dim
        );
        let _ = writeln!(t, "  verdict            {}", c.verdict.replace('_', " "));
        let _ = writeln!(t, "  P_corr             {}", fmt_num(self.p_corr.0));
        let _ = writeln!(t, "  P_err              {}", fmt_num(self.p_err.0));
        let _ = writeln!(
            t,
            "  tolerance          {}{}",
            fmt_num(c.tolerance.0),
            if c.strict { " (strict)" } else { "" }
        );
        let _ = writeln!(
            t,
            "  Gamma hermiticity  {}",
            fmt_num(c.gamma_hermiticity_residual.0)
        );
        for (j, l) in c.g_min_eigenvalues.iter().enumerate() {
            let label = format!("min eig G_{j}");
            let _ = writeln!(t, "  {label:<19}{}", fmt_num(l.0));
        }
        let _ = writeln!(t, "  equality residual  {}", fmt_num(c.equality_residual.0));
        let _ = writeln!(
            t,
            "  G_k pi_k residual  {}",
            fmt_num(c.zero_product_residual.0)
        );
        if let Some(w) = &c.witness {
            let _ = writeln!(
                t,
                "  witness            outcome {} eigenvalue {}",
                w.outcome,
                fmt_num(w.eigenvalue.0)
            );
            let v: Vec<String> = w
                .vector
                .iter()
                .map(|[re, im]| format!("({}, {})", fmt_num(re.0), fmt_num(im.0)))
                .collect();
            let _ = writeln!(t, "  witness vector     [{}]", v.join(", "));
        }
        if let Some(s) = &self.solver {
            let _ = writeln!(
                t,
                "  solver             {} after {} iterations ({} restarts, start {}, seed {})",
                if s.converged {
                    "converged"
                } else {
                    "did not converge"
                },
                s.iterations,
                s.restarts,
                s.start,
                s.seed
            );
            let _ = writeln!(
                t,
                "  stop reason        {}",
                serde_json::to_value(s.stop_reason)
                    .expect("enum")
                    .as_str()
                    .unwrap_or("")
            );
            if let (Some(e), Some(l)) = (s.final_epsilon, s.final_lambda) {
                let _ = writeln!(
                    t,
                    "  last step          epsilon {} lambda {}",
                    fmt_num(e.0),
                    fmt_num(l.0)
                );
            }
        }
        let _ = writeln!(t, "  input sha256       {}", self.input_sha256);
        t
    }
}

/// A finished command: its report and the exit status it maps to.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub exit_code: i32,
    pub warnings: Vec<String>,
}

fn positive_real(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("must be positive and finite, got {s}"))
    }
}

fn at_least_one(s: &str) -> std::result::Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n >= 1 {
        Ok(n)
    } else {
        Err("must be at least 1".into())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "minerr",
    version,
    about = "Minimum-error measurements for quantum state discrimination"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check whether the measurement in a problem file is optimal.
    Certify(CertifyArgs),
    /// Search for the optimal measurement.
    Solve(SolveArgs),
    /// Write a problem file for a standard ensemble.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    /// Problem file with `states` and `povm`.
    pub input: PathBuf,
    /// Certificate tolerance.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE, value_parser = positive_real)]
    pub tol: f64,
    /// Also require the equality-condition residuals to be within tolerance.
    #[arg(long)]
    pub strict: bool,
    /// Write the JSON report to this path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StartArg {
    Uniform,
    Srm,
    /// The `povm` in the input file.
    File,
}

impl StartArg {
    fn name(self) -> &'static str {
        match self {
            StartArg::Uniform => "uniform",
            StartArg::Srm => "srm",
            StartArg::File => "file",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Problem file with `states` (or `spec`).
    pub input: PathBuf,
    /// Certificate tolerance.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE, value_parser = positive_real)]
    pub tol: f64,
    /// Iteration budget per ascent.
    #[arg(long, default_value_t = SolverConfig::default().max_iter, value_parser = at_least_one)]
    pub max_iter: usize,
    /// Seed for random restarts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Starting measurement.
    #[arg(long, value_enum, default_value_t = StartArg::Uniform)]
    pub start: StartArg,
    /// Write the solution as a problem file (states plus povm) to this path.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write the JSON report to this path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Trine,
    Pair,
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Hilbert-space dimension (random only; trine and pair are qubits).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of states (random only).
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// |<psi1|psi2>| for the pair, in [0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    /// Priors for the pair, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.5])]
    pub priors: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn read_input(path: &Path) -> CliResult<(Vec<u8>, ProblemFile)> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Parse(format!("{}: not UTF-8: {e}", path.display())))?;
    let file = ProblemFile::parse(text).map_err(|e| match e {
        CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok((bytes, file))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn zero_prior_warnings(ens: &Ensemble) -> Vec<String> {
    ens.zero_prior_indices()
        .into_iter()
        .map(|i| format!("state {i} has prior 0; it never needs to be identified"))
        .collect()
}

pub fn cmd_certify(args: &CertifyArgs) -> CliResult<Outcome> {
    let (bytes, file) = read_input(&args.input)?;
    let ens = file.ensemble()?;
    let povm = file.measurement()?.ok_or_else(|| {
        CliError::Validation("povm: certify needs a measurement in the input".into())
    })?;
    let cert = certify_with(
        &ens,
        &povm,
        CertifyOptions {
            tolerance: args.tol,
            strict: args.strict,
        },
    )
    .map_err(|e| CliError::from_core("", e))?;
    let report = Report::new("certify", &bytes, &ens, &cert);
    let exit_code = if cert.is_optimal() {
        EXIT_OPTIMAL
    } else {
        EXIT_NOT_OPTIMAL
    };
    if let Some(path) = &args.report {
        write_file(path, &report.to_json())?;
    }
    Ok(Outcome {
        report,
        exit_code,
        warnings: zero_prior_warnings(&ens),
    })
}

/// Runs the solver; returns the outcome and the trace for callers that want it.
pub fn cmd_solve_with_trace(args: &SolveArgs) -> CliResult<(Outcome, SolveTrace)> {
    let (bytes, file) = read_input(&args.input)?;
    let ens = file.ensemble()?;
    let given = file.measurement()?;
    let config = SolverConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        seed: args.seed,
        start: if args.start == StartArg::Srm {
            StartKind::SquareRoot
        } else {
            StartKind::Uniform
        },
        ..SolverConfig::default()
    };
    let start = match args.start {
        StartArg::File => Some(given.ok_or_else(|| {
            CliError::Validation("povm: --start file needs a measurement in the input".into())
        })?),
        _ => None,
    };
    let trace = solve(&ens, start.as_ref(), &config).map_err(|e| CliError::from_core("", e))?;

    let mut report = Report::new("solve", &bytes, &ens, &trace.final_certificate);
    let last = trace.iterations.last();
    report.solver = Some(SolverReport {
        converged: trace.converged,
        stop_reason: trace.stop_reason,
        start: args.start.name(),
        seed: args.seed,
        max_iter: args.max_iter,
        iterations: trace.iterations_used,
        restarts: trace.restarts,
        initial_p_corr: Num(trace.initial_p_corr),
        final_epsilon: last.map(|it| Num(it.epsilon)),
        final_lambda: last.map(|it| Num(it.lambda)),
        lambda_history_length: trace.iterations.len(),
    });
    if let Some(path) = &args.output {
        let out = ProblemFile::from_parts(&ens, Some(&trace.solution), file.spec.clone());
        write_file(path, &out.to_json())?;
    }
    if let Some(path) = &args.report {
        write_file(path, &report.to_json())?;
    }
    let exit_code = if trace.converged {
        EXIT_OPTIMAL
    } else {
        EXIT_NOT_OPTIMAL
    };
    Ok((
        Outcome {
            report,
            exit_code,
            warnings: zero_prior_warnings(&ens),
        },
        trace,
    ))
}

pub fn cmd_solve(args: &SolveArgs) -> CliResult<Outcome> {
    cmd_solve_with_trace(args).map(|(o, _)| o)
}

pub fn generate_spec(args: &GenerateArgs) -> CliResult<EnsembleSpec> {
    let qubit_only = |kind: &str| -> CliResult<()> {
        match args.dim {
            Some(d) if d != 2 => Err(CliError::Validation(format!(
                "--dim: {kind} states are qubits, got dim {d}"
            ))),
            _ => Ok(()),
        }
    };
    Ok(match args.kind {
        KindArg::Trine => {
            qubit_only("trine")?;
            EnsembleSpec::Trine
        }
        KindArg::Pair => {
            qubit_only("pair")?;
            if args.priors.len() != 2 {
                return Err(CliError::Validation(format!(
                    "--priors: a pair needs 2 priors, got {}",
                    args.priors.len()
                )));
            }
            EnsembleSpec::PurePair {
                overlap: args.overlap,
                priors: [args.priors[0], args.priors[1]],
            }
        }
        KindArg::Random => EnsembleSpec::RandomMixed {
            dim: args.dim.unwrap_or(2),
            n: args.n,
            seed: args.seed,
        },
    })
}

/// Builds the problem file text for `generate`.
pub fn cmd_generate(args: &GenerateArgs) -> CliResult<(String, Vec<String>)> {
    let spec = generate_spec(args)?;
    let ens = generate(&spec).map_err(|e| CliError::from_core("", e))?;
    let text = ProblemFile::from_parts(&ens, None, Some(spec)).to_json();
    if let Some(path) = &args.output {
        write_file(path, &text)?;
    }
    Ok((text, zero_prior_warnings(&ens)))
}

fn emit_report(out: &mut dyn Write, outcome: &Outcome) -> std::io::Result<()> {
    out.write_all(outcome.report.to_text().as_bytes())?;
    out.write_all(b"\n--- report (json) ---\n")?;
    out.write_all(outcome.report.to_json().as_bytes())
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return if code == 0 { 0 } else { EXIT_USAGE };
        }
    };
    let result = match &cli.command {
        Command::Certify(a) => cmd_certify(a).map(|o| (Some(o), None, Vec::new())),
        Command::Solve(a) => cmd_solve(a).map(|o| (Some(o), None, Vec::new())),
        Command::Generate(a) => cmd_generate(a).map(|(text, warnings)| {
            let shown = if a.output.is_none() { Some(text) } else { None };
            (None, shown, warnings)
        }),
    };
    match result {
        Ok((outcome, text, warnings)) => {
            let warnings = outcome.as_ref().map_or(warnings, |o| o.warnings.clone());
            for w in warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            let written = match (&outcome, text) {
                (Some(o), _) => emit_report(out, o),
                (None, Some(t)) => out.write_all(t.as_bytes()),
                (None, None) => Ok(()),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: writing output: {e}");
                return EXIT_IO;
            }
            outcome.map_or(EXIT_OPTIMAL, |o| o.exit_code)
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoded_matrix_rejects_ragged_rows() {
        let err = serde_json::from_str::<EncodedMatrix>("[[[1,0],[0,0]],[[0,0]]]").unwrap_err();
        assert!(err.to_string().contains("not square"), "{err}");
    }

    #[test]
    fn unknown_fields_are_named() {
        let err = ProblemFile::parse(r#"{"dim": 2, "spec": {"kind": "trine"}, "extra": 1}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("extra") && err.contains("line 1"), "{err}");
    }

    #[test]
    fn dimension_mismatch_names_the_field() {
        let text =
            r#"{"dim": 3, "states": [{"prior": 1, "matrix": [[[1,0],[0,0]],[[0,0],[0,0]]]}]}"#;
        let err = ProblemFile::parse(text).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_PARSE);
        assert!(err.to_string().contains("states[0].matrix"));
    }

    #[test]
    fn spec_only_file_generates_the_ensemble() {
        let file = ProblemFile::parse(r#"{"dim": 2, "spec": {"kind": "trine"}}"#).unwrap();
        assert_eq!(file.ensemble().unwrap().len(), 3);
        let wrong = ProblemFile::parse(r#"{"dim": 3, "spec": {"kind": "trine"}}"#).unwrap();
        assert_eq!(wrong.ensemble().unwrap_err().exit_code(), EXIT_VALIDATION);
    }

    #[test]
    fn non_hermitian_state_is_a_validation_error() {
        let text =
            r#"{"dim": 2, "states": [{"prior": 1, "matrix": [[[1,0],[1,0]],[[0,0],[0,0]]]}]}"#;
        let err = ProblemFile::parse(text).unwrap().ensemble().unwrap_err();
        assert_eq!(err.exit_code(), EXIT_VALIDATION);
        assert!(err.to_string().contains("states[0]"));
    }

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(fmt_num(2.0 / 3.0), "6.6666666666666663e-1");
        let json = serde_json::to_string(&[Num(0.1), Num(f64::NAN)]).unwrap();
        assert_eq!(json, "[1.0000000000000001e-1,null]");
        let back: Vec<Option<f64>> = serde_json::from_str(&json).unwrap();
        assert_eq!(back[0], Some(0.1));
    }

    #[test]
    fn core_errors_map_to_statuses() {
        let e = CliError::from_core("x", crate::Error::NumericFailure("nan".into()));
        assert_eq!(e.exit_code(), EXIT_NUMERIC);
        let e = CliError::from_core("x", crate::Error::EmptyPovm);
        assert_eq!(e.exit_code(), EXIT_VALIDATION);
    }

    #[test]
    fn qubit_kinds_reject_other_dimensions() {
        let args = GenerateArgs {
            kind: KindArg::Trine,
            dim: Some(3),
            n: 2,
            overlap: 0.5,
            priors: vec![0.5, 0.5],
            seed: 0,
            output: None,
        };
        assert_eq!(
            generate_spec(&args).unwrap_err().exit_code(),
            EXIT_VALIDATION
        );
    }
}

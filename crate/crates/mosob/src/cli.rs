//! Command-line front end: space-spec files, reports and exit codes.
//!
//! Exit codes: 0 for a decisive result, 2 when a verdict is inconclusive or a
//! certificate could not be established, 1 for errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{space_verdicts, ConditionVerdict, SpaceVerdict};
use crate::function_rep::{Domain, DomainError, PiecewiseError, PiecewiseFunction, QuadratureConfig, Scheme};
use crate::mo_function::{MoError, MoFunction, MusielakOrlicz, Table};
use crate::norms::{luxemburg_norm, orlicz_norm, sobolev_norm, NormConfig, NormError, NormResult};
use crate::operators::{
    estimate_operator_norm, kernel_certificate, volterra_certificate, BoundednessCertificate, EstimateConfig, Kernel,
    OperatorError, OperatorEstimate,
};
use crate::probes::{
    l1_embedding, linf_embedding, non_delta2_witness, uc_failure_sobolev_pairs, uc_modulus_estimate, ModulusConfig,
    ProbeError, VerifyReport, WitnessSequence,
};

/// Environment variable selecting the base tolerance profile.
pub const TOLERANCE_PROFILE_VAR: &str = "MOSOB_TOLERANCE_PROFILE";
pub const WITNESS_FORMAT: &str = "mosob-witness/1";

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("{path}:{line}:{column}: {message}")]
    Syntax { path: String, line: usize, column: usize, message: String },
    #[error("{path}:{line}:{column}: expression `{field}`: {message}")]
    Expression { path: String, field: String, line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Function(#[from] MoError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Piecewise(#[from] PiecewiseError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("output: {0}")]
    Output(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// spec files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    Orlicz { phi: String },
    VariableExponent { p: String },
    DoublePhase { p: String, r: String, a: String },
    Tabulated { xs: Vec<f64>, ts: Vec<f64>, values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<u32>,
    /// Use a fixed composite rule with this many cells per interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_cells: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_rel_tol: Option<f64>,
}

/// Contents of a space-spec file.
///
/// ```toml
/// interval = [0.0, 1.0]
/// singularities = [1.0]
/// seed = 7
///
/// [family]
/// kind = "variable-exponent"
/// p = "1/(1-x)"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub interval: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub singularities: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    pub family: FamilySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSpec>,
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Base tolerances from the environment profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub norm: NormConfig,
    pub quadrature_abs_tol: f64,
}

impl Profile {
    pub fn named(name: &str) -> Option<Self> {
        let d = NormConfig::default();
        Some(match name {
            "" | "default" => Profile { norm: d, quadrature_abs_tol: QuadratureConfig::default().abs_tol },
            "strict" => Profile {
                norm: NormConfig { abs_tol: 1e-12, rel_tol: 1e-11, ..d },
                quadrature_abs_tol: 1e-12,
            },
            "fast" => Profile { norm: NormConfig { abs_tol: 1e-6, rel_tol: 1e-6, ..d }, quadrature_abs_tol: 1e-8 },
            _ => return None,
        })
    }

    pub fn from_env() -> Result<Self, CliError> {
        let name = std::env::var(TOLERANCE_PROFILE_VAR).unwrap_or_default();
        Profile::named(name.trim())
            .ok_or_else(|| CliError::Usage(format!("{TOLERANCE_PROFILE_VAR}={name}: expected default, strict or fast")))
    }
}

impl SpaceSpec {
    pub fn parse(src: &str, path: &str) -> Result<Self, SpecError> {
        toml::from_str(src).map_err(|e: toml::de::Error| {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(src, s.start));
            SpecError::Syntax { path: path.to_string(), line, column, message: e.message().trim().to_string() }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn domain(&self, profile: &Profile, path: &str) -> Result<Domain, SpecError> {
        let mut q = QuadratureConfig { abs_tol: profile.quadrature_abs_tol, ..QuadratureConfig::default() };
        if let Some(o) = &self.quadrature {
            if let Some(v) = o.order {
                q.order = v;
            }
            if let Some(v) = o.abs_tol {
                q.abs_tol = v;
            }
            if let Some(v) = o.max_depth {
                q.max_depth = v;
            }
            if let Some(cells) = o.fixed_cells {
                q.scheme = Scheme::Fixed { cells };
            }
        }
        Domain::with_quadrature(self.interval[0], self.interval[1], q)
            .map_err(|e: DomainError| SpecError::Invalid { path: path.to_string(), message: e.to_string() })
    }

    pub fn norm_config(&self, profile: &Profile) -> NormConfig {
        let mut c = profile.norm;
        if let Some(t) = &self.tolerances {
            if let Some(v) = t.norm_abs_tol {
                c.abs_tol = v;
            }
            if let Some(v) = t.norm_rel_tol {
                c.rel_tol = v;
            }
        }
        c
    }

    /// Build the function; `src` is the file text, used to place expression errors.
    pub fn build(&self, src: &str, path: &str, profile: &Profile) -> Result<MoFunction, SpecError> {
        let domain = self.domain(profile, path)?;
        let built = match &self.family {
            FamilySpec::Orlicz { phi } => MoFunction::orlicz(phi, domain),
            FamilySpec::VariableExponent { p } => MoFunction::variable_exponent(p, domain),
            FamilySpec::DoublePhase { p, r, a } => MoFunction::double_phase(p, r, a, domain),
            FamilySpec::Tabulated { xs, ts, values } => {
                MoFunction::tabulated(Table { xs: xs.clone(), ts: ts.clone(), values: values.clone() }, domain)
            }
        };
        match built {
            Ok(f) => Ok(f.with_singularities(&self.singularities)),
            Err(MoError::Expression { field, error }) => {
                let expr = match (&self.family, field.as_str()) {
                    (FamilySpec::Orlicz { phi }, _) => phi.as_str(),
                    (FamilySpec::VariableExponent { p }, _) => p.as_str(),
                    (FamilySpec::DoublePhase { r, .. }, "r") => r.as_str(),
                    (FamilySpec::DoublePhase { a, .. }, "a") => a.as_str(),
                    (FamilySpec::DoublePhase { p, .. }, _) => p.as_str(),
                    _ => "",
                };
                let (line, column) = locate_expression(src, &field, expr, error.column);
                Err(SpecError::Expression { path: path.to_string(), field, line, column, message: error.message })
            }
            Err(e) => Err(SpecError::Invalid { path: path.to_string(), message: e.to_string() }),
        }
    }
}

/// Line and column of `column` inside the value of `field = "expr"`.
fn locate_expression(src: &str, field: &str, expr: &str, column: usize) -> (usize, usize) {
    let mut offset = 0;
    for line in src.split_inclusive('\n') {
        let t = line.trim_start();
        if t.starts_with(field) && t[field.len()..].trim_start().starts_with('=') {
            if let Some(q) = line.find(['"', '\'']) {
                if line[q + 1..].starts_with(expr) {
                    let (l, c) = line_col(src, offset + q + 1);
                    return (l, c + column.saturating_sub(1));
                }
            }
        }
        offset += line.len();
    }
    (1, column)
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// A parsed spec together with its function and configuration.
pub struct LoadedSpec {
    pub spec: SpaceSpec,
    pub phi: MoFunction,
    pub norm: NormConfig,
}

pub fn load_spec(path: &Path) -> Result<LoadedSpec, CliError> {
    let src = read(path)?;
    let name = path.display().to_string();
    let profile = Profile::from_env()?;
    let spec = SpaceSpec::parse(&src, &name)?;
    let phi = spec.build(&src, &name, &profile)?;
    let norm = spec.norm_config(&profile);
    Ok(LoadedSpec { spec, phi, norm })
}

/// Contents of a function file.
///
/// ```toml
/// kind = "polynomial"
/// coefficients = [0.0, 1.0]   # f(x) = x
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `Σ c_i x^i` on the whole interval.
    Polynomial { coefficients: Vec<f64> },
    Step { breakpoints: Vec<f64>, values: Vec<f64> },
    /// Per-cell coefficients in powers of `x − (left end)`.
    Piecewise { breakpoints: Vec<f64>, pieces: Vec<Vec<f64>> },
}

impl FunctionSpec {
    pub fn build(&self, domain: &Domain) -> Result<PiecewiseFunction, CliError> {
        Ok(match self {
            FunctionSpec::Polynomial { coefficients } => {
                PiecewiseFunction::polynomial(domain.alpha, domain.beta, coefficients)
            }
            FunctionSpec::Step { breakpoints, values } => PiecewiseFunction::step(breakpoints.clone(), values)?,
            FunctionSpec::Piecewise { breakpoints, pieces } => {
                PiecewiseFunction::new(breakpoints.clone(), pieces.clone())?
            }
        })
    }
}

/// File written by `probe`: the witness and a description of the function it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessBundle {
    pub format: String,
    pub phi: String,
    pub witness: WitnessSequence,
}

// ---------------------------------------------------------------------------
// arguments

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    /// Text report.
    Human,
    /// Comma-separated rows, one per verdict, norm or certificate.
    Rows,
    /// A nested JSON document.
    Structured,
}

#[derive(Debug, Parser)]
#[command(name = "mosob", version, about = "Musielak-Orlicz and Orlicz-Sobolev spaces on an interval")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value = "human", global = true)]
    pub emit: Emit,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide Δ₂, (V), uniform convexity and the derived space properties.
    Audit {
        /// Space-spec file.
        spec: PathBuf,
    },
    /// Luxemburg, Orlicz and Sobolev norms of a function.
    Norm {
        /// Space-spec file.
        spec: PathBuf,
        /// Function file.
        function: PathBuf,
        /// Also print `‖f‖ + ‖f'‖`.
        #[arg(long)]
        sobolev: bool,
        /// Also print the Orlicz (Amemiya) norm.
        #[arg(long = "orlicz-norm")]
        orlicz_norm: bool,
    },
    /// Build a witness sequence and print its certificate table.
    Probe(ProbeArgs),
    /// Boundedness certificate for an integral operator.
    Operator(OperatorArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbeKind {
    NonDelta2,
    Linf,
    L1,
    UcFail,
    UcModulus,
}

impl ProbeKind {
    fn name(self) -> &'static str {
        match self {
            ProbeKind::NonDelta2 => "non-delta2",
            ProbeKind::Linf => "linf",
            ProbeKind::L1 => "l1",
            ProbeKind::UcFail => "uc-fail",
            ProbeKind::UcModulus => "uc-modulus",
        }
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("what").required(true).args(["kind", "verify"])))]
pub struct ProbeArgs {
    /// Space-spec file.
    pub spec: PathBuf,
    /// Witness to construct.
    pub kind: Option<ProbeKind>,
    /// Truncation length (number of members or pairs).
    #[arg(short = 'N', default_value_t = 4)]
    pub n: usize,
    /// ε of the uniform convexity probes (default 0.5 for uc-fail, 1.0 for uc-modulus).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Coefficients `a_k` for linf / l1 (default: the first unit vector).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub coeffs: Vec<f64>,
    /// Near-norming slack for l1.
    #[arg(long, default_value_t = 0.01)]
    pub eps_dual: f64,
    /// Random pairs for uc-modulus.
    #[arg(long, default_value_t = 32)]
    pub trials: usize,
    /// Overrides the seed in the space spec.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Witness file (default `<kind>.witness.json`).
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
    /// Re-check a previously written witness file instead of building one.
    #[arg(long, conflicts_with = "kind")]
    pub verify: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("operator").required(true).args(["kernel", "volterra"])))]
pub struct OperatorArgs {
    /// Space-spec file.
    pub spec: PathBuf,
    /// Kernel `k(x, y)`.
    pub kernel: Option<String>,
    /// Use the Volterra kernel `χ_(α,x)(y)`.
    #[arg(long)]
    pub volterra: bool,
    /// Target space spec (default: the source space).
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Also compute an empirical lower bound on the norm.
    #[arg(long)]
    pub estimate: bool,
    #[arg(long, default_value_t = 16)]
    pub trials: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid of the power iteration.
    #[arg(long, default_value_t = 2048)]
    pub grid: usize,
}

/// Parse arguments, run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Audit { spec } => audit(spec, cli.emit, out),
        Command::Norm { spec, function, sobolev, orlicz_norm } => {
            norm(spec, function, *sobolev, *orlicz_norm, cli.emit, out)
        }
        Command::Probe(a) => probe(a, cli.emit, out),
        Command::Operator(a) => operator(a, cli.emit, out),
    }
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v.is_finite() && !(1e-6..1e12).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

// ---------------------------------------------------------------------------
// audit

#[derive(Serialize)]
struct AuditReport<'a> {
    phi: String,
    interval: [f64; 2],
    singularities: &'a [f64],
    inconclusive: bool,
    verdict: &'a SpaceVerdict,
}

fn verdict_sections(v: &SpaceVerdict) -> Vec<(&'static str, &ConditionVerdict)> {
    let mut rows: Vec<(&str, &ConditionVerdict)> = v.conditions().map(|c| ("condition", c)).collect();
    rows.extend(v.lebesgue.iter().map(|c| ("lebesgue", c)));
    rows.extend(v.sobolev.iter().map(|c| ("sobolev", c)));
    rows
}

fn rule_chain(v: &ConditionVerdict) -> String {
    v.justification.iter().map(|r| r.id.as_str()).collect::<Vec<_>>().join(" > ")
}

fn evidence_text(v: &ConditionVerdict) -> String {
    v.evidence.iter().map(|(k, x)| format!("{k}={}", fmt_num(*x))).collect::<Vec<_>>().join("; ")
}

fn witness_text(v: &ConditionVerdict) -> String {
    v.witness.map_or(String::new(), |w| {
        let side = match w.approach {
            crate::conditions::Approach::FromLeft => "left",
            crate::conditions::Approach::FromRight => "right",
        };
        format!("x={} from the {side}, radius {}", fmt_num(w.x), fmt_num(w.radius))
    })
}

fn audit(path: &Path, emit: Emit, out: &mut dyn Write) -> Result<i32, CliError> {
    let l = load_spec(path)?;
    let v = space_verdicts(&l.phi);
    let inconclusive = v.any_inconclusive();
    match emit {
        Emit::Human => {
            let dom = l.phi.domain();
            writeln!(out, "space: {} on ({}, {})", l.phi.describe(), dom.alpha, dom.beta)?;
            let mut section = "";
            for (s, c) in verdict_sections(&v) {
                if s != section {
                    section = s;
                    let title = match s {
                        "condition" => "conditions on Φ",
                        "lebesgue" => "L^Φ",
                        _ => "W^{1,Φ}",
                    };
                    writeln!(out, "\n{title}")?;
                }
                writeln!(out, "  {:<22} {:<13} [{}]", c.condition, c.status.label(), rule_chain(c))?;
                for r in &c.justification {
                    writeln!(out, "      {}: {}", r.id, r.description)?;
                }
                if !c.evidence.is_empty() {
                    writeln!(out, "      evidence: {}", evidence_text(c))?;
                }
                if c.witness.is_some() {
                    writeln!(out, "      localized at {}", witness_text(c))?;
                }
            }
            if inconclusive {
                writeln!(out, "\nsome verdicts are INCONCLUSIVE")?;
            }
        }
        Emit::Rows => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["section", "property", "status", "rules", "evidence", "witness"])?;
            for (s, c) in verdict_sections(&v) {
                w.write_record([
                    s,
                    &c.condition,
                    c.status.label(),
                    &rule_chain(c),
                    &evidence_text(c),
                    &witness_text(c),
                ])?;
            }
            w.flush()?;
        }
        Emit::Structured => {
            let report = AuditReport {
                phi: l.phi.describe(),
                interval: l.spec.interval,
                singularities: l.phi.singularities(),
                inconclusive,
                verdict: &v,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
        }
    }
    Ok(if inconclusive { 2 } else { 0 })
}

// ---------------------------------------------------------------------------
// norm

#[derive(Serialize)]
struct NormRow {
    quantity: &'static str,
    value: f64,
    lower: f64,
    upper: f64,
}

fn norm(
    spec: &Path,
    function: &Path,
    sobolev: bool,
    orlicz: bool,
    emit: Emit,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let l = load_spec(spec)?;
    let src = read(function)?;
    let fspec: FunctionSpec = toml::from_str(&src).map_err(|e: toml::de::Error| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(&src, s.start));
        SpecError::Syntax { path: function.display().to_string(), line, column, message: e.message().trim().to_string() }
    })?;
    let f = fspec.build(l.phi.domain())?;
    let row = |q: &'static str, r: &NormResult| NormRow { quantity: q, value: r.value, lower: r.lower, upper: r.upper };
    let mut rows = Vec::new();
    if sobolev {
        let s = sobolev_norm(&l.phi, &f, &l.norm)?;
        rows.push(row("luxemburg", &s.function));
        rows.push(row("luxemburg_derivative", &s.derivative));
        rows.push(NormRow {
            quantity: "sobolev",
            value: s.value,
            lower: s.function.lower + s.derivative.lower,
            upper: s.function.upper + s.derivative.upper,
        });
    } else {
        rows.push(row("luxemburg", &luxemburg_norm(&l.phi, &f, &l.norm)?));
    }
    if orlicz {
        rows.push(row("orlicz", &orlicz_norm(&l.phi, &f, &l.norm)?));
    }
    match emit {
        Emit::Human => {
            for r in &rows {
                writeln!(out, "{:<22} {:.12}  [{:.12}, {:.12}]", r.quantity, r.value, r.lower, r.upper)?;
            }
        }
        Emit::Rows => {
            let mut w = csv::Writer::from_writer(&mut *out);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Emit::Structured => writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?,
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// probe

fn write_checks(w: &WitnessSequence, emit: Emit, out: &mut dyn Write) -> Result<(), CliError> {
    match emit {
        Emit::Human => {
            writeln!(out, "{:?} witness, truncation {}", w.kind, w.truncation)?;
            for (k, v) in &w.parameters {
                writeln!(out, "  {k} = {}", fmt_num(*v))?;
            }
            writeln!(out, "{:<34} {:>6} {:>22} {:>3} {:>22} {:>12}  result", "check", "member", "lhs", "", "rhs", "slack")?;
            for c in &w.checks {
                writeln!(
                    out,
                    "{:<34} {:>6} {:>22} {:>3} {:>22} {:>12.3e}  {}",
                    c.name,
                    c.member.map_or("-".to_string(), |m| m.to_string()),
                    fmt_num(c.lhs_value),
                    c.relation.symbol(),
                    fmt_num(c.rhs_value),
                    c.slack,
                    if c.passed { "PASS" } else { "FAIL" }
                )?;
            }
            let failed = w.failed().count();
            writeln!(out, "{} of {} checks passed", w.checks.len() - failed, w.checks.len())?;
        }
        Emit::Rows => {
            let mut csv = csv::Writer::from_writer(&mut *out);
            csv.write_record(["check", "member", "lhs", "relation", "rhs", "slack", "passed"])?;
            for c in &w.checks {
                csv.write_record([
                    c.name.clone(),
                    c.member.map_or(String::new(), |m| m.to_string()),
                    fmt_num(c.lhs_value),
                    c.relation.symbol().to_string(),
                    fmt_num(c.rhs_value),
                    fmt_num(c.slack),
                    c.passed.to_string(),
                ])?;
            }
            csv.flush()?;
        }
        Emit::Structured => {}
    }
    Ok(())
}

fn write_verify(r: &VerifyReport, emit: Emit, out: &mut dyn Write) -> Result<(), CliError> {
    match emit {
        Emit::Human => {
            for row in &r.rows {
                writeln!(
                    out,
                    "{:<34} {:>6} recorded {:>12.3e} recomputed {:>12.3e}  {}{}",
                    row.name,
                    row.member.map_or("-".to_string(), |m| m.to_string()),
                    row.recorded_slack,
                    row.recomputed_slack,
                    if row.passed { "PASS" } else { "FAIL" },
                    if row.reproduced { "" } else { " (not reproduced)" }
                )?;
            }
            writeln!(out, "verification {}", if r.ok { "succeeded" } else { "FAILED" })?;
        }
        Emit::Rows => {
            let mut csv = csv::Writer::from_writer(&mut *out);
            csv.write_record(["check", "member", "recorded_slack", "recomputed_slack", "passed", "reproduced"])?;
            for row in &r.rows {
                csv.write_record([
                    row.name.clone(),
                    row.member.map_or(String::new(), |m| m.to_string()),
                    fmt_num(row.recorded_slack),
                    fmt_num(row.recomputed_slack),
                    row.passed.to_string(),
                    row.reproduced.to_string(),
                ])?;
            }
            csv.flush()?;
        }
        Emit::Structured => writeln!(out, "{}", serde_json::to_string_pretty(r)?)?,
    }
    Ok(())
}

fn unit_coeffs(n: usize, given: &[f64]) -> Vec<f64> {
    if given.is_empty() {
        (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()
    } else {
        given.to_vec()
    }
}

#[derive(Serialize)]
struct ModulusReport {
    phi: String,
    eps: f64,
    trials: usize,
    seed: u64,
    modulus_estimate: f64,
}

fn probe(a: &ProbeArgs, emit: Emit, out: &mut dyn Write) -> Result<i32, CliError> {
    let l = load_spec(&a.spec)?;
    let phi = &l.phi;
    if let Some(path) = &a.verify {
        let src = read(path)?;
        let bundle: WitnessBundle = serde_json::from_str(&src)
            .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
        if bundle.format != WITNESS_FORMAT {
            return Err(CliError::Usage(format!("{}: unknown witness format `{}`", path.display(), bundle.format)));
        }
        let report = bundle.witness.verify(phi)?;
        write_verify(&report, emit, out)?;
        return Ok(if report.ok { 0 } else { 1 });
    }
    let kind = a.kind.expect("clap requires a kind without --verify");
    let seed = a.seed.unwrap_or(l.spec.seed);
    let witness = match kind {
        ProbeKind::UcModulus => {
            let eps = a.eps.unwrap_or(1.0);
            let cfg = ModulusConfig { trials: a.trials, seed, ..ModulusConfig::default() };
            let m = uc_modulus_estimate(phi, eps, &cfg)?;
            let report = ModulusReport { phi: phi.describe(), eps, trials: a.trials, seed, modulus_estimate: m };
            match emit {
                Emit::Human => writeln!(out, "modulus of convexity at ε = {eps}: {m:.9} (upper estimate)")?,
                Emit::Rows => {
                    let mut w = csv::Writer::from_writer(&mut *out);
                    w.serialize(&report)?;
                    w.flush()?;
                }
                Emit::Structured => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
            }
            return Ok(0);
        }
        ProbeKind::NonDelta2 => non_delta2_witness(phi, a.n)?,
        ProbeKind::Linf => linf_embedding(phi, a.n, &unit_coeffs(a.n, &a.coeffs))?,
        ProbeKind::L1 => l1_embedding(phi, a.n, &unit_coeffs(a.n, &a.coeffs), a.eps_dual)?,
        ProbeKind::UcFail => uc_failure_sobolev_pairs(phi, a.eps.unwrap_or(0.5), a.n)?,
    };
    let bundle = WitnessBundle { format: WITNESS_FORMAT.to_string(), phi: phi.describe(), witness };
    let json = serde_json::to_string_pretty(&bundle)?;
    let target = a.output.clone().unwrap_or_else(|| PathBuf::from(format!("{}.witness.json", kind.name())));
    std::fs::write(&target, format!("{json}\n"))
        .map_err(|e| CliError::Io { path: target.display().to_string(), message: e.to_string() })?;
    if emit == Emit::Structured {
        writeln!(out, "{json}")?;
    } else {
        write_checks(&bundle.witness, emit, out)?;
    }
    if emit == Emit::Human {
        writeln!(out, "witness written to {}", target.display())?;
    }
    Ok(if bundle.witness.all_passed() { 0 } else { 2 })
}

// ---------------------------------------------------------------------------
// operator

#[derive(Serialize)]
struct OperatorReport {
    kernel: String,
    source: String,
    target: String,
    certificate: BoundednessCertificate,
    estimate: Option<OperatorEstimate>,
}

fn operator(a: &OperatorArgs, emit: Emit, out: &mut dyn Write) -> Result<i32, CliError> {
    let src = load_spec(&a.spec)?;
    let dst = match &a.target {
        Some(p) => Some(load_spec(p)?),
        None => None,
    };
    let phi1 = &src.phi;
    let phi2 = dst.as_ref().map_or(phi1, |d| &d.phi);
    let kernel = match (&a.kernel, a.volterra) {
        (_, true) => Kernel::Volterra,
        (Some(k), false) => Kernel::parse(k).map_err(|e| CliError::Usage(format!("kernel `{k}`: {e}")))?,
        (None, false) => unreachable!("clap requires a kernel or --volterra"),
    };
    let certificate = match (&kernel, &dst) {
        (Kernel::Volterra, None) => match volterra_certificate(phi1) {
            Ok(c) => c,
            Err(OperatorError::Precondition(m)) => {
                writeln!(out, "NOT CERTIFIED: {m}")?;
                return Ok(2);
            }
            Err(e) => return Err(e.into()),
        },
        _ => kernel_certificate(phi1, phi2, &kernel),
    };
    let estimate = if a.estimate {
        let cfg = EstimateConfig {
            trials: a.trials,
            seed: a.seed.unwrap_or(src.spec.seed),
            grid: a.grid,
            ..EstimateConfig::default()
        };
        let e = estimate_operator_norm(phi1, phi2, &kernel, &cfg)?;
        if certificate.certified && e.value > certificate.bound_on_norm * (1.0 + 1e-9) {
            return Err(CliError::Usage(format!(
                "empirical norm {} exceeds the certified bound {}",
                e.value, certificate.bound_on_norm
            )));
        }
        Some(e)
    } else {
        None
    };
    let report = OperatorReport {
        kernel: kernel.describe(),
        source: phi1.describe(),
        target: phi2.describe(),
        certificate,
        estimate,
    };
    let c = &report.certificate;
    match emit {
        Emit::Human => {
            writeln!(out, "kernel: {}", report.kernel)?;
            writeln!(out, "from {} to {}", report.source, report.target)?;
            writeln!(out, "{}", if c.certified { "CERTIFIED" } else { "NOT CERTIFIED" })?;
            writeln!(out, "  l                  {}", fmt_num(c.l))?;
            writeln!(out, "  b                  {}", fmt_num(c.b))?;
            writeln!(out, "  ∫Φ(x,b) dx         {}", fmt_num(c.integral_at_b))?;
            writeln!(out, "  kernel scale       {}", fmt_num(c.scale))?;
            writeln!(out, "  I_ψ(scale·k)       {}", fmt_num(c.i_psi_of_kernel))?;
            writeln!(out, "  ‖k‖_ψ ≤            {}", fmt_num(c.kernel_norm_bound))?;
            writeln!(out, "  ‖A‖ ≤              {}", fmt_num(c.bound_on_norm))?;
            if let Some(e) = &report.estimate {
                writeln!(out, "  ‖A‖ ≥ (estimate)   {}", fmt_num(e.value))?;
                writeln!(out, "    random inputs    {}", fmt_num(e.random_trials))?;
                if let Some(p) = e.power_iteration {
                    writeln!(out, "    power iteration  {}", fmt_num(p))?;
                }
            }
        }
        Emit::Rows => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["kernel", "certified", "l", "b", "integral_at_b", "scale", "i_psi", "kernel_norm_bound", "bound_on_norm", "estimate"])?;
            w.write_record([
                report.kernel.clone(),
                c.certified.to_string(),
                fmt_num(c.l),
                fmt_num(c.b),
                fmt_num(c.integral_at_b),
                fmt_num(c.scale),
                fmt_num(c.i_psi_of_kernel),
                fmt_num(c.kernel_norm_bound),
                fmt_num(c.bound_on_norm),
                report.estimate.map_or(String::new(), |e| fmt_num(e.value)),
            ])?;
            w.flush()?;
        }
        Emit::Structured => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
    }
    Ok(if c.certified { 0 } else { 2 })
}

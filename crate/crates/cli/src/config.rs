//! Run configuration: one TOML file per run.
//!
//! ```toml
//! [problem]
//! kind = "heat1d"
//! n = 100
//! r = 0.2
//! s = 0.2
//!
//! [numeric]
//! quad_tol = 1e-10
//!
//! [checks]
//! pv_identity = true
//!
//! [output]
//! dir = "out"
//! ```
//!
//! `kind = "explicit"` takes the matrices `a`, `b`, `c` either inline as
//! dense rows (entries real or `[re, im]`) or as paths of CSV files relative
//! to the config file.

use std::path::{Path, PathBuf};

use riccati_core::hamiltonian::{AxisNorm, AxisOperator};
use riccati_core::pipeline::{PipelineFlags, PipelineOptions};
use riccati_core::problems::{explicit, ProblemSpec};
use riccati_core::{Complex, MatF64, NumericPolicy, SystemDataF64};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::matrix_io::read_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    #[value(name = "axis_decay")]
    AxisDecay,
    #[value(name = "sector")]
    Sector,
    #[value(name = "sv_probe")]
    SvProbe,
}

impl ScanKind {
    pub fn name(self) -> &'static str {
        match self {
            ScanKind::AxisDecay => "axis_decay",
            ScanKind::Sector => "sector",
            ScanKind::SvProbe => "sv_probe",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Inline(Vec<Vec<Entry>>),
    File(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitProblem {
    #[serde(rename = "kind")]
    _kind: String,
    pub a: MatrixSource,
    pub b: MatrixSource,
    pub c: MatrixSource,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub s: f64,
    #[serde(default = "default_label")]
    pub label: String,
}

fn default_label() -> String {
    "explicit".into()
}

#[derive(Debug, Clone)]
pub enum Problem {
    Spec(ProblemSpec),
    Explicit(ExplicitProblem),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub name: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub kind: Option<ScanKind>,
    pub norm: AxisNorm,
    pub operator: AxisOperator,
    /// Explicit grid (`t` for axis scans, radii for sector scans).
    pub grid: Option<Vec<f64>>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: usize,
    /// Ray angles of the sector scan, in radians.
    pub angles: Vec<f64>,
    /// Mesh sizes of the singular-value probe (`heat1d` only).
    pub sizes: Option<Vec<usize>>,
    /// Leading singular values kept per size.
    pub count: usize,
    /// Append the log-log slope row; defaults to on for `heat1d`.
    pub summary: Option<bool>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        let q = std::f64::consts::FRAC_PI_4;
        ScanConfig {
            kind: None,
            norm: AxisNorm::V0Norm,
            operator: AxisOperator::Hamiltonian,
            grid: None,
            t_min: None,
            t_max: None,
            points: 16,
            angles: vec![-q, 0.0, q],
            sizes: None,
            count: 10,
            summary: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Number of consecutive seeds, starting at the problem's seed.
    pub count: usize,
    /// Agreement threshold; the policy's residual tolerance when absent.
    pub tolerance: Option<f64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            count: 1,
            tolerance: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: toml::Table,
    #[serde(default)]
    numeric: NumericPolicy,
    #[serde(default)]
    checks: PipelineFlags,
    #[serde(default)]
    output: OutputConfig,
    #[serde(default)]
    scan: ScanConfig,
    #[serde(default)]
    compare: CompareConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub quad_tol: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: Problem,
    pub policy: NumericPolicy,
    pub flags: PipelineFlags,
    pub out_dir: Option<PathBuf>,
    pub name: String,
    pub scan: ScanConfig,
    pub compare: CompareConfig,
    /// Directory relative paths inside the file are resolved against.
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        Self::parse(&text, base, stem, overrides)
    }

    pub fn parse(text: &str, base_dir: PathBuf, stem: &str, overrides: &Overrides) -> CliResult<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let problem = parse_problem(raw.problem)?;
        let problem = match (problem, overrides.seed) {
            (Problem::Spec(spec), Some(seed)) => Problem::Spec(spec.with_seed(seed)),
            (p, _) => p,
        };
        if let Problem::Spec(spec) = &problem {
            spec.validate()?;
        }
        let mut policy = raw.numeric;
        if let Some(t) = overrides.tol {
            policy.residual_tol = t;
        }
        if let Some(t) = overrides.quad_tol {
            policy.quad_tol = t;
        }
        validate_policy(&policy)?;
        if let Some(t) = raw.compare.tolerance {
            positive("compare.tolerance", t)?;
        }
        Ok(RunConfig {
            problem,
            policy,
            flags: raw.checks,
            out_dir: overrides.out.clone().or(raw.output.dir),
            name: raw.output.name.unwrap_or_else(|| stem.to_string()),
            scan: raw.scan,
            compare: raw.compare,
            base_dir,
        })
    }

    pub fn options(&self) -> PipelineOptions {
        PipelineOptions {
            policy: self.policy,
            flags: self.flags,
        }
    }

    pub fn spec(&self) -> Option<&ProblemSpec> {
        match &self.problem {
            Problem::Spec(s) => Some(s),
            Problem::Explicit(_) => None,
        }
    }

    pub fn system(&self) -> CliResult<SystemDataF64> {
        match &self.problem {
            Problem::Spec(spec) => Ok(spec.generate()?),
            Problem::Explicit(e) => {
                let a = self.matrix(&e.a, "a")?;
                let b = self.matrix(&e.b, "b")?;
                let c = self.matrix(&e.c, "c")?;
                Ok(explicit(&a, &b, &c, e.r, e.s, &e.label)?)
            }
        }
    }

    fn matrix(&self, src: &MatrixSource, name: &str) -> CliResult<MatF64> {
        match src {
            MatrixSource::File(p) => read_matrix(&self.base_dir.join(p)),
            MatrixSource::Inline(rows) => inline_matrix(rows, name),
        }
    }
}

fn parse_problem(table: toml::Table) -> CliResult<Problem> {
    let kind = table
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or_else(|| CliError::Config("[problem] needs a string `kind`".into()))?;
    let value = toml::Value::Table(table.clone());
    if kind == "explicit" {
        let e: ExplicitProblem = value
            .try_into()
            .map_err(|e| CliError::Config(format!("[problem]: {e}")))?;
        Ok(Problem::Explicit(e))
    } else {
        let spec: ProblemSpec = value
            .try_into()
            .map_err(|e| CliError::Config(format!("[problem]: {e}")))?;
        Ok(Problem::Spec(spec))
    }
}

fn inline_matrix(rows: &[Vec<Entry>], name: &str) -> CliResult<MatF64> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(CliError::Config(format!("matrix `{name}` is empty")));
    }
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Config(format!(
            "matrix `{name}` has rows of different lengths"
        )));
    }
    let data: Vec<Complex<f64>> = rows
        .iter()
        .flatten()
        .map(|e| match *e {
            Entry::Real(x) => Complex::new(x, 0.0),
            Entry::Complex([re, im]) => Complex::new(re, im),
        })
        .collect();
    if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CliError::Config(format!("matrix `{name}` has a non-finite entry")));
    }
    Ok(MatF64::from_row_slice(rows.len(), cols, &data))
}

fn positive(name: &str, x: f64) -> CliResult<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

fn validate_policy(p: &NumericPolicy) -> CliResult<()> {
    positive("quad_tol", p.quad_tol)?;
    positive("axis_tol", p.axis_tol)?;
    positive("rel_tol", p.rel_tol)?;
    positive("residual_tol", p.residual_tol)?;
    positive("pbh_tol", p.pbh_tol)?;
    positive("identity_tol", p.identity_tol)?;
    positive("pv_t_max", p.pv_t_max)?;
    if p.max_evals == 0 {
        return Err(CliError::Config("max_evals must be positive".into()));
    }
    Ok(())
}

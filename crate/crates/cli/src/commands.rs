use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use riccati_core::dichotomy::{dichotomy, oracle_projections};
use riccati_core::hamiltonian::{assemble, axis_resolvent_rows, geometric_grid, AxisNorm, AxisOperator, BlockSpace};
use riccati_core::linalg::{orthonormal_range, spectral_norm};
use riccati_core::pipeline::{loglog_slope, run_pipeline};
use riccati_core::problems::ProblemSpec;
use riccati_core::riccati::{
    closed_loop, closed_loop_sector_rows, extract_solution, f1f2_diagnostics, relative_distance, solve_from_dichotomy,
    SolutionSource,
};
use riccati_core::{Error, SystemDataF64};
use serde::Serialize;

use crate::config::{RunConfig, ScanKind};
use crate::error::{CliError, CliResult};
use crate::matrix_io::{csv_writer, fmt_num, write_matrix};
use crate::report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

fn out_dir(cfg: &RunConfig) -> CliResult<Option<&Path>> {
    match &cfg.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn write_file(path: PathBuf, contents: &str) -> CliResult<()> {
    fs::write(&path, contents).map_err(|e| CliError::io(path, e))
}

fn print(s: &str) {
    let mut out = std::io::stdout().lock();
    // A closed pipe is not worth a failure exit.
    let _ = out.write_all(s.as_bytes());
}

/// `cmd_solve`: full pipeline, report in text and JSON.
pub fn solve(cfg: &RunConfig, format: Format) -> CliResult<()> {
    let start = Instant::now();
    let sys = cfg.system()?;
    let out = run_pipeline(&sys, &cfg.options())?;
    let header = report::header(start.elapsed());
    let text = report::run_text(&header, &out.report);
    let json = report::to_json(&header, &out.report);
    if let Some(dir) = out_dir(cfg)? {
        write_file(dir.join(format!("{}.report.txt", cfg.name)), &text)?;
        write_file(dir.join(format!("{}.report.json", cfg.name)), &json)?;
    }
    print(match format {
        Format::Text => &text,
        Format::Json => &json,
    });
    match out.report.failures().count() {
        0 => Ok(()),
        failed => Err(CliError::ChecksFailed { failed }),
    }
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Num(x) if x.is_finite() => s.serialize_f64(*x),
            Cell::Int(k) => s.serialize_u64(*k as u64),
            Cell::Text(t) => s.serialize_str(t),
            Cell::Num(_) | Cell::Empty => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub scan: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    #[serde(skip)]
    pub failed: usize,
}

impl Table {
    fn new(scan: ScanKind, columns: &[&'static str]) -> Self {
        Table {
            scan: scan.name(),
            columns: columns.to_vec(),
            rows: Vec::new(),
            failed: 0,
        }
    }

    fn error_row(&mut self, mut leading: Vec<Cell>, e: &Error) {
        leading.resize(self.columns.len() - 1, Cell::Empty);
        leading.push(Cell::Text(format!("error: {e}")));
        self.rows.push(leading);
        self.failed += 1;
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory csv");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 output")
    }
}

fn grid(cfg: &RunConfig, default_lo: f64, default_hi: f64) -> CliResult<Vec<f64>> {
    let sc = &cfg.scan;
    if let Some(g) = &sc.grid {
        if g.iter().any(|t| !t.is_finite()) {
            return Err(CliError::Config("scan grid has a non-finite value".into()));
        }
        return Ok(g.clone());
    }
    let lo = sc.t_min.unwrap_or(default_lo);
    let hi = sc.t_max.unwrap_or(default_hi.max(100.0 * lo));
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || sc.points < 2 {
        return Err(CliError::Config(format!(
            "scan needs 0 < t_min < t_max and points >= 2, got [{lo}, {hi}] with {} points",
            sc.points
        )));
    }
    Ok(geometric_grid(lo, hi, sc.points))
}

/// Decay exponent the axis scan should show at large `t`, when known.
fn expected_slope(norm: AxisNorm, op: AxisOperator, r: f64, s: f64) -> Option<f64> {
    if op != AxisOperator::Hamiltonian {
        return None;
    }
    match norm {
        AxisNorm::V0Norm => Some(-1.0),
        AxisNorm::V0ToV1 => Some(-(1.0 - r - s)),
        AxisNorm::VNorm => Some(-(2.0 * (1.0 - r.max(s))).min(1.0)),
        AxisNorm::V0ToV => None,
    }
}

/// Slack on the fitted slope before the summary row reports `fail`.
const SLOPE_SLACK: f64 = 0.1;

fn axis_decay(cfg: &RunConfig, sys: &SystemDataF64) -> CliResult<Table> {
    let h = assemble(sys)?;
    let a_norm = spectral_norm(&sys.a);
    let t = grid(cfg, 1.0, 0.05 * a_norm)?;
    let mut table = Table::new(ScanKind::AxisDecay, &["t", "norm", "status"]);
    let rows = axis_resolvent_rows(&h, cfg.scan.norm, cfg.scan.operator, &t)?;
    let mut points = Vec::new();
    for (&tk, row) in t.iter().zip(rows) {
        match row {
            Ok(p) => {
                table
                    .rows
                    .push(vec![Cell::Num(p.t), Cell::Num(p.norm), Cell::Text("ok".into())]);
                points.push(p);
            }
            Err(e) => table.error_row(vec![Cell::Num(tk)], &e),
        }
    }
    let heat = matches!(cfg.spec(), Some(ProblemSpec::Heat1d { .. }));
    if cfg.scan.summary.unwrap_or(heat) && !t.is_empty() {
        // Fit on the upper half of the grid, where the asymptotic rate shows.
        let mut upper: Vec<_> = points.iter().filter(|p| p.t > 0.0).cloned().collect();
        upper.sort_by(|a, b| a.t.total_cmp(&b.t));
        let upper = upper.split_off(upper.len() / 2);
        let slope = loglog_slope(&upper);
        let status = match (slope, expected_slope(cfg.scan.norm, cfg.scan.operator, sys.r, sys.s)) {
            (None, _) => {
                table.failed += 1;
                "fail: too few points".to_string()
            }
            (Some(k), Some(want)) if k > want + SLOPE_SLACK => {
                table.failed += 1;
                format!("fail: expected at most {}", fmt_num(want + SLOPE_SLACK))
            }
            (Some(_), Some(want)) => format!("ok: expected at most {}", fmt_num(want + SLOPE_SLACK)),
            (Some(_), None) => "info".to_string(),
        };
        table.rows.push(vec![
            Cell::Text("slope".into()),
            slope.map_or(Cell::Empty, Cell::Num),
            Cell::Text(status),
        ]);
    }
    Ok(table)
}

fn sector(cfg: &RunConfig, sys: &SystemDataF64) -> CliResult<Table> {
    let h = assemble(sys)?;
    let d = dichotomy(&h, &cfg.policy)?;
    let sol = solve_from_dichotomy(sys, &h, &d)?;
    let cl = closed_loop(sys, &h, &sol.x_minus)?;
    let radii = grid(cfg, 0.1, 10.0 * spectral_norm(&cl.acl).max(1.0))?;
    let angles = &cfg.scan.angles;
    if angles.iter().any(|a| !a.is_finite()) {
        return Err(CliError::Config("scan angles must be finite".into()));
    }
    let rows = closed_loop_sector_rows(&cl, &h.scale, sys.r, angles, &radii)?;
    let mut table = Table::new(ScanKind::Sector, &["radius", "norm", "angle", "status"]);
    let keys = angles.iter().flat_map(|&a| radii.iter().map(move |&r| (r, a)));
    for ((radius, angle), row) in keys.zip(rows) {
        match row {
            Ok(sample) => table.rows.push(vec![
                Cell::Num(radius),
                Cell::Num(sample.norm),
                Cell::Num(angle),
                Cell::Text("ok".into()),
            ]),
            Err(e) => table.error_row(vec![Cell::Num(radius), Cell::Empty, Cell::Num(angle)], &e),
        }
    }
    Ok(table)
}

fn sv_rows(table: &mut Table, cfg: &RunConfig, sys: &SystemDataF64) -> riccati_core::Result<()> {
    let n = sys.n();
    let h = assemble(sys)?;
    let d = dichotomy(&h, &cfg.policy)?;
    let diag = f1f2_diagnostics(&h, &d.p_minus, &d.basis_minus);
    for (k, &sv) in diag.pq_diff_svals.iter().take(cfg.scan.count).enumerate() {
        table
            .rows
            .push(vec![Cell::Int(n), Cell::Num(sv), Cell::Int(k), Cell::Text("ok".into())]);
    }
    for (label, p) in [("p_minus_v", &d.p_minus), ("p_plus_v", &d.p_plus)] {
        let norm = h.block_norm(p, BlockSpace::V, BlockSpace::V);
        table.rows.push(vec![
            Cell::Int(n),
            Cell::Num(norm),
            Cell::Text(label.into()),
            Cell::Text("ok".into()),
        ]);
    }
    Ok(())
}

fn sv_probe(cfg: &RunConfig, sys: &SystemDataF64) -> CliResult<Table> {
    let mut table = Table::new(ScanKind::SvProbe, &["n", "singular_value", "index", "status"]);
    let Some(sizes) = &cfg.scan.sizes else {
        sv_rows(&mut table, cfg, sys)?;
        return Ok(table);
    };
    let Some(&ProblemSpec::Heat1d {
        r,
        s,
        control_node,
        obs_node,
        ..
    }) = cfg.spec()
    else {
        return Err(CliError::Config("scan.sizes needs a heat1d problem".into()));
    };
    for &n in sizes {
        let spec = ProblemSpec::Heat1d {
            n,
            r,
            s,
            control_node,
            obs_node,
        };
        let result = spec.generate::<f64>().and_then(|sys| sv_rows(&mut table, cfg, &sys));
        if let Err(e) = result {
            table.error_row(vec![Cell::Int(n)], &e);
        }
    }
    Ok(table)
}

/// `cmd_scan`: CSV of a resolvent or singular-value scan.
pub fn scan(cfg: &RunConfig, kind: ScanKind, format: Format) -> CliResult<()> {
    let start = Instant::now();
    let sys = cfg.system()?;
    let table = match kind {
        ScanKind::AxisDecay => axis_decay(cfg, &sys)?,
        ScanKind::Sector => sector(cfg, &sys)?,
        ScanKind::SvProbe => sv_probe(cfg, &sys)?,
    };
    let csv = table.to_csv();
    if let Some(dir) = out_dir(cfg)? {
        write_file(dir.join(format!("{}.{}.csv", cfg.name, kind.name())), &csv)?;
    }
    match format {
        Format::Text => print(&csv),
        Format::Json => print(&report::to_json(&report::header(start.elapsed()), &table)),
    }
    match table.failed {
        0 => Ok(()),
        failed => Err(CliError::ScanRows { failed }),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareEntry {
    pub label: String,
    pub p_minus_distance: f64,
    pub p_plus_distance: f64,
    /// `‖X_contour - X_oracle‖ / max(‖X_oracle‖, 1)`; absent when `V0-` is
    /// numerically not a graph.
    pub x_relative: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub tolerance: f64,
    pub entries: Vec<CompareEntry>,
    pub passed: bool,
}

pub fn compare_system(sys: &SystemDataF64, cfg: &RunConfig, tolerance: f64) -> CliResult<CompareEntry> {
    let h = assemble(sys)?;
    let d = dichotomy(&h, &cfg.policy)?;
    let o = oracle_projections(&h.t0, &cfg.policy)?;
    let p_minus_distance = spectral_norm(&(&d.p_minus - &o.p_minus));
    let p_plus_distance = spectral_norm(&(&d.p_plus - &o.p_plus));
    let dim = h.t0.nrows();
    let bm = orthonormal_range(&o.p_minus, o.stable_count)?;
    let bp = orthonormal_range(&o.p_plus, dim - o.stable_count)?;
    let x_relative = match (
        solve_from_dichotomy(sys, &h, &d),
        extract_solution(sys, &h, &bm, &bp, SolutionSource::Oracle),
    ) {
        (Ok(c), Ok(o)) => Some(relative_distance(&c.x_minus, &o.x_minus)),
        (Err(Error::NotAGraph { .. }), _) | (_, Err(Error::NotAGraph { .. })) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e.into()),
    };
    let passed =
        p_minus_distance <= tolerance && p_plus_distance <= tolerance && x_relative.is_none_or(|x| x <= tolerance);
    Ok(CompareEntry {
        label: sys.label.clone(),
        p_minus_distance,
        p_plus_distance,
        x_relative,
        passed,
    })
}

fn compare_text(header: &str, r: &CompareReport) -> String {
    let mut o = format!("# {header}\ntolerance {}\n", report::num(r.tolerance));
    for e in &r.entries {
        o.push_str(&format!(
            "  {} {}  |dP-| = {}  |dP+| = {}  |dX|/|X| = {}\n",
            if e.passed { "PASS" } else { "FAIL" },
            e.label,
            report::num(e.p_minus_distance),
            report::num(e.p_plus_distance),
            e.x_relative.map_or_else(|| "n/a".into(), report::num),
        ));
    }
    let agree = r.entries.iter().filter(|e| e.passed).count();
    o.push_str(&format!(
        "result {} ({agree} of {} agree)\n",
        if r.passed { "PASS" } else { "FAIL" },
        r.entries.len()
    ));
    o
}

/// `cmd_compare`: contour against eigenvector oracle, over `compare.count`
/// consecutive seeds.
pub fn compare(cfg: &RunConfig, format: Format) -> CliResult<()> {
    let start = Instant::now();
    let count = cfg.compare.count;
    let systems: Vec<SystemDataF64> = match cfg.spec() {
        Some(spec @ (ProblemSpec::RandomStable { seed, .. } | ProblemSpec::RandomShifted { seed, .. })) => (0..count)
            .map(|k| Ok(spec.clone().with_seed(seed.wrapping_add(k as u64)).generate()?))
            .collect::<CliResult<_>>()?,
        _ if count == 1 => vec![cfg.system()?],
        _ => return Err(CliError::Config("compare.count > 1 needs a random problem kind".into())),
    };
    let tolerance = cfg.compare.tolerance.unwrap_or(cfg.policy.residual_tol);
    let entries = systems
        .iter()
        .map(|sys| compare_system(sys, cfg, tolerance))
        .collect::<CliResult<Vec<_>>>()?;
    let passed = entries.iter().all(|e| e.passed);
    let rep = CompareReport {
        tolerance,
        entries,
        passed,
    };
    let header = report::header(start.elapsed());
    let text = compare_text(&header, &rep);
    let json = report::to_json(&header, &rep);
    if let Some(dir) = out_dir(cfg)? {
        write_file(dir.join(format!("{}.compare.txt", cfg.name)), &text)?;
        write_file(dir.join(format!("{}.compare.json", cfg.name)), &json)?;
    }
    print(match format {
        Format::Text => &text,
        Format::Json => &json,
    });
    if passed {
        Ok(())
    } else {
        Err(CliError::Disagreement {
            failed: rep.entries.iter().filter(|e| !e.passed).count(),
        })
    }
}

#[derive(Serialize)]
struct GeneratedProblem<'a> {
    kind: &'static str,
    label: &'a str,
    r: f64,
    s: f64,
    a: String,
    b: String,
    c: String,
}

#[derive(Serialize)]
struct GeneratedConfig<'a> {
    problem: GeneratedProblem<'a>,
}

#[derive(Serialize)]
struct GenerateSummary {
    files: Vec<String>,
    n: usize,
    m: usize,
    p: usize,
}

/// `generate`: writes `A`, `B`, `C` as CSV and an explicit config that
/// reads them back.
pub fn generate(cfg: &RunConfig, format: Format) -> CliResult<()> {
    let start = Instant::now();
    let dir = out_dir(cfg)?.ok_or_else(|| CliError::Config("generate needs --out or [output] dir".into()))?;
    let sys = cfg.system()?;
    let name = &cfg.name;
    let files = [("a", &sys.a), ("b", &sys.b), ("c", &sys.c)].map(|(k, m)| (format!("{name}_{k}.csv"), m));
    for (file, m) in &files {
        write_matrix(&dir.join(file), m)?;
    }
    let [a, b, c] = files.map(|(f, _)| f);
    let config_name = format!("{name}_system.toml");
    let generated = GeneratedConfig {
        problem: GeneratedProblem {
            kind: "explicit",
            label: &sys.label,
            r: sys.r,
            s: sys.s,
            a: a.clone(),
            b: b.clone(),
            c: c.clone(),
        },
    };
    let toml = toml::to_string(&generated).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(dir.join(&config_name), &toml)?;
    let summary = GenerateSummary {
        files: [a, b, c, config_name]
            .iter()
            .map(|f| dir.join(f).display().to_string())
            .collect(),
        n: sys.n(),
        m: sys.m(),
        p: sys.p(),
    };
    let header = report::header(start.elapsed());
    match format {
        Format::Text => {
            let mut o = format!(
                "# {header}\nsystem {}  n = {}  m = {}  p = {}\n",
                sys.label, summary.n, summary.m, summary.p
            );
            for f in &summary.files {
                o.push_str(&format!("  wrote {f}\n"));
            }
            print(&o);
        }
        Format::Json => print(&report::to_json(&header, &summary)),
    }
    Ok(())
}

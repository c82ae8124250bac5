//! Text and JSON rendering. The header line carries the only
//! non-deterministic content (timestamp and wall time).

use std::fmt::Write as _;
use std::time::Duration;

use riccati_core::pipeline::{Check, RunReport};
use riccati_core::Complex;
use serde::Serialize;

/// Matrices larger than this are left out of the text report.
const TEXT_MATRIX_MAX: usize = 8;
const TEXT_SPECTRUM_MAX: usize = 12;

pub fn header(elapsed: Duration) -> String {
    format!(
        "riccati {} | {} | elapsed {:.3} s",
        env!("CARGO_PKG_VERSION"),
        chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ"),
        elapsed.as_secs_f64()
    )
}

#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    header: &'a str,
    #[serde(flatten)]
    body: &'a R,
}

/// Pretty JSON with `header` as the first key.
pub fn to_json<R: Serialize>(header: &str, body: &R) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope { header, body }).expect("report serializes");
    s.push('\n');
    s
}

pub fn num(x: f64) -> String {
    let a = x.abs();
    let s = if x == 0.0 || (1e-4..1e6).contains(&a) {
        format!("{x:.10}")
    } else {
        format!("{x:.10e}")
    };
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn cnum(z: Complex<f64>) -> String {
    if z.im.abs() <= 1e-14 * z.re.abs().max(1.0) {
        num(z.re)
    } else {
        let im = num(z.im.abs());
        format!("{}{}{}i", num(z.re), if z.im < 0.0 { "-" } else { "+" }, im)
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), num)
}

fn spectrum(out: &mut String, label: &str, eigs: &[Complex<f64>]) {
    let shown: Vec<String> = eigs.iter().take(TEXT_SPECTRUM_MAX).map(|&z| cnum(z)).collect();
    let more = eigs.len().saturating_sub(TEXT_SPECTRUM_MAX);
    let tail = if more > 0 {
        format!(" ... ({more} more)")
    } else {
        String::new()
    };
    let _ = writeln!(out, "  {label}: [{}]{tail}", shown.join(", "));
}

fn matrix(out: &mut String, label: &str, rows: &[Vec<Complex<f64>>]) {
    if rows.len() > TEXT_MATRIX_MAX {
        let _ = writeln!(out, "  {label}: {0}x{0} (see the JSON report)", rows.len());
        return;
    }
    let _ = writeln!(out, "  {label}:");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&z| cnum(z)).collect();
        let _ = writeln!(out, "    [{}]", cells.join(", "));
    }
}

fn check_line(out: &mut String, c: &Check) {
    let _ = writeln!(
        out,
        "  {} {:<28} value {:<20} threshold {}",
        if c.passed { "PASS" } else { "FAIL" },
        c.name,
        num(c.value),
        num(c.threshold)
    );
}

pub fn run_text(header: &str, r: &RunReport) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "# {header}");
    let s = &r.system;
    let _ = writeln!(o, "system {}", s.label);
    let _ = writeln!(o, "  n = {}  m = {}  p = {}  r = {}  s = {}", s.n, s.m, s.p, s.r, s.s);
    let _ = writeln!(o, "  controllable = {}  observable = {}", s.controllable, s.observable);
    let _ = writeln!(o, "  |T0| = {}", num(s.t0_norm));
    spectrum(&mut o, "spectrum(A)", &s.spectrum_a);
    spectrum(&mut o, "spectrum(T0)", &s.spectrum_t0);

    let d = &r.dichotomy;
    let _ = writeln!(o, "dichotomy");
    let _ = writeln!(o, "  h = {}  t_max = {}  rho = {}", num(d.h), num(d.t_max), num(d.rho));
    let _ = writeln!(
        o,
        "  evaluations = {}  quadrature error = {}  projection error = {}  tail bound = {}",
        d.evaluations,
        num(d.quadrature_error),
        num(d.projection_error),
        num(d.tail_bound)
    );
    let f = &d.defects;
    let _ = writeln!(
        o,
        "  |P+ + P- - I| = {}  |P+^2 - P+| = {}  |P-^2 - P-| = {}",
        num(f.complement),
        num(f.idempotence_plus),
        num(f.idempotence_minus)
    );
    let _ = writeln!(
        o,
        "  |L+L-| = {}  |L+ + L- - T0^-1| = {}  invariance = {}",
        num(f.l_product),
        num(f.l_sum),
        num(f.invariance)
    );
    let _ = writeln!(
        o,
        "  trace(P-) = {}  stable eigenvalues = {}",
        num(f.trace_minus),
        f.stable_count
    );
    if let Some(or) = &d.oracle {
        let _ = writeln!(
            o,
            "  oracle ({:?}): |dP-| = {}  |dP+| = {}  |dX|/|X| = {}  newton |dX|/|X| = {}",
            or.method,
            num(or.p_minus_distance),
            num(or.p_plus_distance),
            opt(or.x_distance),
            opt(or.newton_distance)
        );
    }
    if let Some(pv) = &d.principal_value {
        let _ = writeln!(
            o,
            "  principal value at t_max = {}: defect = {}  truncated = {}",
            num(pv.t_max),
            num(pv.defect),
            num(pv.truncated_defect)
        );
    }
    if let Some(sq) = &d.sq_identity {
        let _ = writeln!(
            o,
            "  sq identity: defect = {}  tolerance = {}",
            num(sq.defect),
            num(sq.tolerance)
        );
    }
    if let Some(x) = d.independence_difference {
        let _ = writeln!(o, "  narrower strip difference = {}", num(x));
    }

    let q = &r.riccati;
    let _ = writeln!(o, "riccati");
    matrix(&mut o, "X0-", &q.x_minus);
    if let Some(xp) = &q.x_plus {
        matrix(&mut o, "X0+", xp);
    }
    let _ = writeln!(
        o,
        "  |X0-| in V0 = {}  H = {}  V1 = {}",
        num(q.norms.v0),
        num(q.norms.h),
        num(q.norms.v1)
    );
    let _ = writeln!(
        o,
        "  residual weighted = {} (relative {})  plain = {} (relative {})  tolerance = {}",
        num(q.residual.weighted),
        num(q.residual.relative_weighted),
        num(q.residual.plain),
        num(q.residual.relative_plain),
        num(q.residual_tolerance)
    );
    let p = &q.properties;
    let _ = writeln!(
        o,
        "  hermiticity = {}  min eig(X0-) = {}  max eig(X0+) = {}",
        num(p.hermiticity_minus),
        num(p.min_eig_minus),
        opt(p.max_eig_plus)
    );
    let _ = writeln!(
        o,
        "  graph margin = {}  |X0+ Y0+ - I| = {}",
        num(q.graph_margin),
        opt(p.inverse_defect)
    );
    if p.inverse_unverifiable {
        let _ = writeln!(o, "  V0+ is numerically not a graph; X0+ Y0+ = I not checked");
    }
    if let Some(cl) = &q.closed_loop {
        spectrum(&mut o, "closed-loop spectrum", &cl.spectrum);
        let _ = writeln!(
            o,
            "  max Re = {}  matching distance = {}",
            num(cl.max_real),
            num(cl.matching_distance)
        );
    }
    if let Some(ff) = &q.f1f2 {
        let _ = writeln!(
            o,
            "  min sv F1 = {}  F2 = {}  cond F1 = {}  F2 = {}",
            num(ff.min_sv_f1),
            num(ff.min_sv_f2),
            num(ff.cond_f1),
            num(ff.cond_f2)
        );
    }

    let _ = writeln!(o, "checks");
    for c in &r.checks {
        check_line(&mut o, c);
    }
    let failed = r.failures().count();
    let _ = writeln!(
        o,
        "result {} ({} of {} checks passed)",
        if failed == 0 { "PASS" } else { "FAIL" },
        r.checks.len() - failed,
        r.checks.len()
    );
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formats() {
        assert_eq!(num(2f64.sqrt() - 1.0), "0.4142135624");
        assert_eq!(num(0.0), "0.0000000000");
        assert_eq!(num(-0.0), "0.0000000000");
        assert_eq!(num(1.5e-12), "1.5000000000e-12");
        assert_eq!(cnum(Complex::new(1.0, -2.0)), "1.0000000000-2.0000000000i");
        assert_eq!(cnum(Complex::new(-1.0, 1e-20)), "-1.0000000000");
    }

    #[test]
    fn json_header_comes_first() {
        #[derive(Serialize)]
        struct B {
            x: f64,
        }
        let s = to_json("h", &B { x: 1.0 });
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[1], "  \"header\": \"h\",");
    }
}

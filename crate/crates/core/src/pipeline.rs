//! End-to-end run: assemble `T0`, compute the dichotomy by contour
//! integration, extract the Riccati solutions and check every property that
//! is cheap enough to check, collecting the outcomes in a [`RunReport`].

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::dichotomy::{
    contour_independence, dichotomy, oracle_projections, principal_value_difference, sq_correction_check,
    DichotomyResult, LNorms, OracleMethod, ProjectionDefects, SqReport,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    assemble, axis_resolvent_scan, geometric_grid, j_symmetry_check, pbh_controllability, pbh_observability,
    spectrum_symmetry_check, AxisNorm, AxisOperator, AxisPoint, HamiltonianMatrices, IndefiniteForm, SystemData,
};
use crate::linalg::{c64, eigenvalues, floor_tol, orthonormal_range, spectral_norm, to_f64, CMat, Real};
use crate::policy::NumericPolicy;
use crate::riccati::{
    closed_loop, closed_loop_sector_scan, extract_solution, f1f2_diagnostics, newton_kleinman, relative_distance,
    residual_tolerance, solution_properties, solve_from_dichotomy, ClosedLoop, OperatorNorms, ResidualReport,
    ResolventSample, RiccatiSolution, SolutionProperties, SolutionSource, GRAPH_MARGIN,
};

/// Optional stages of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineFlags {
    /// `J`-symmetry of `T0` and the reflection symmetry of its spectrum.
    pub symmetry: bool,
    /// Principal-value identity for `P+ - P-`.
    pub pv_identity: bool,
    /// Semicircle identity for the canonical projections (stable `A` only).
    pub sq_identity: bool,
    /// Short axis resolvent scan of `T0` in the `V0` norm.
    pub decay_scan: bool,
    pub f1f2: bool,
    /// Sector scan of the closed-loop resolvent.
    pub closed_loop_scan: bool,
    /// Eigenvector oracle and, for stable `A`, the Newton–Kleinman oracle.
    pub oracle: bool,
    /// Recompute `P-` on a narrower strip.
    pub independence: bool,
}

impl Default for PipelineFlags {
    fn default() -> Self {
        PipelineFlags {
            symmetry: true,
            pv_identity: false,
            sq_identity: false,
            decay_scan: false,
            f1f2: true,
            closed_loop_scan: false,
            oracle: true,
            independence: false,
        }
    }
}

impl PipelineFlags {
    pub fn all() -> Self {
        PipelineFlags {
            symmetry: true,
            pv_identity: true,
            sq_identity: true,
            decay_scan: true,
            f1f2: true,
            closed_loop_scan: true,
            oracle: true,
            independence: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PipelineOptions {
    pub policy: NumericPolicy,
    pub flags: PipelineFlags,
}

/// One named pass/fail outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            threshold,
            passed: value >= threshold,
        }
    }

    pub fn flag(name: &str, passed: bool) -> Self {
        Check {
            name: name.to_string(),
            value: if passed { 1.0 } else { 0.0 },
            threshold: 1.0,
            passed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemSummary {
    pub label: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub r: f64,
    pub s: f64,
    pub spectrum_a: Vec<Complex<f64>>,
    pub spectrum_t0: Vec<Complex<f64>>,
    pub t0_norm: f64,
    pub controllable: bool,
    pub observable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    pub method: OracleMethod,
    pub eigvec_condition: f64,
    pub p_minus_distance: f64,
    pub p_plus_distance: f64,
    /// `‖X_contour - X_oracle‖ / max(‖X_oracle‖, 1)`.
    pub x_distance: Option<f64>,
    pub newton_distance: Option<f64>,
    pub newton_iterations: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PvSummary {
    pub t_max: f64,
    /// `‖PV - (P+ - P-)‖` with the exact tail included.
    pub defect: f64,
    /// The same with the integral cut at `t_max`.
    pub truncated_defect: f64,
    pub truncation_bound: f64,
    pub quadrature_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomySummary {
    pub h: f64,
    pub t_max: f64,
    pub rho: f64,
    pub tail_bound: f64,
    pub quadrature_error: f64,
    pub projection_error: f64,
    pub evaluations: usize,
    pub defects: ProjectionDefects,
    pub l_norms: LNorms,
    pub oracle: Option<OracleSummary>,
    pub principal_value: Option<PvSummary>,
    pub sq_identity: Option<SqReport>,
    pub independence_difference: Option<f64>,
    pub decay_scan: Option<Vec<AxisPoint>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct F1F2Summary {
    pub cond_f1: f64,
    pub cond_f2: f64,
    pub min_sv_f1: f64,
    pub min_sv_f2: f64,
    pub top_block_min_sv: f64,
    pub pq_diff_max_sv: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedLoopSummary {
    pub spectrum: Vec<Complex<f64>>,
    pub max_real: f64,
    pub matching_distance: f64,
    pub tolerance: f64,
    pub sector_scan: Option<Vec<ResolventSample>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiccatiSummary {
    pub x_minus: Vec<Vec<Complex<f64>>>,
    pub x_plus: Option<Vec<Vec<Complex<f64>>>>,
    pub norms: OperatorNorms,
    pub graph_margin: f64,
    pub plus_graph_margin: Option<f64>,
    pub plus_cograph_margin: Option<f64>,
    pub extraction_residual: f64,
    pub poorly_angular: bool,
    pub residual: ResidualReport,
    pub residual_tolerance: f64,
    pub properties: SolutionProperties,
    pub closed_loop: Option<ClosedLoopSummary>,
    pub f1f2: Option<F1F2Summary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub system: SystemSummary,
    pub dichotomy: DichotomySummary,
    pub riccati: RiccatiSummary,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Everything a run produces; the matrices stay in the working scalar.
#[derive(Debug, Clone)]
pub struct Outcome<T: Real> {
    pub report: RunReport,
    pub hamiltonian: HamiltonianMatrices<T>,
    pub dichotomy: DichotomyResult<T>,
    pub solution: RiccatiSolution<T>,
    pub oracle_solution: Option<RiccatiSolution<T>>,
    pub closed_loop: Option<ClosedLoop<T>>,
}

fn matrix_rows<T: Real>(m: &CMat<T>) -> Vec<Vec<Complex<f64>>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| c64(m[(i, j)])).collect())
        .collect()
}

fn is_stable<T: Real>(a: &CMat<T>) -> Result<bool> {
    Ok(eigenvalues(a)?.iter().all(|z| z.re < T::zero()))
}

/// Runs the full analysis. Returns `Err` only when the run cannot proceed
/// (no dichotomy, failed quadrature, no graph); property violations are
/// recorded as failed checks.
pub fn run_pipeline<T: Real>(sys: &SystemData<T>, opts: &PipelineOptions) -> Result<Outcome<T>> {
    let policy = &opts.policy;
    let flags = opts.flags;
    let h = assemble(sys)?;
    let ctrb = pbh_controllability(sys, policy.pbh_tol)?;
    let obsv = pbh_observability(sys, policy.pbh_tol)?;
    let pbh_both = ctrb.holds && obsv.holds;
    let mut checks = Vec::new();

    let system = SystemSummary {
        label: sys.label.clone(),
        n: sys.n(),
        m: sys.m(),
        p: sys.p(),
        r: sys.r,
        s: sys.s,
        spectrum_a: eigenvalues(&sys.a)?.into_iter().map(c64).collect(),
        spectrum_t0: h.spectrum()?.iter().map(|&z| c64(z)).collect(),
        t0_norm: to_f64(h.t0_norm()),
        controllable: ctrb.holds,
        observable: obsv.holds,
    };

    if flags.symmetry {
        let spec_sym = spectrum_symmetry_check(&h)?;
        checks.push(Check::at_most(
            "spectrum_symmetry",
            spec_sym.distance,
            spec_sym.tolerance,
        ));
        let js = j_symmetry_check(&h, &IndefiniteForm::new(h.n()), 8, 0);
        checks.push(Check::at_most("j_symmetry_t0", js.j_defect, js.tolerance));
        checks.push(Check::at_most("jtilde_dissipation", js.max_dissipation, js.tolerance));
    }

    let d = dichotomy(&h, policy)?;
    let tol = d.defects.tolerance;
    checks.push(Check::at_most("projection_complement", d.defects.complement, tol));
    checks.push(Check::at_most("idempotence_plus", d.defects.idempotence_plus, tol));
    checks.push(Check::at_most("idempotence_minus", d.defects.idempotence_minus, tol));
    checks.push(Check::at_most("l_product", d.defects.l_product, tol));
    checks.push(Check::at_most("l_sum_inverse", d.defects.l_sum, tol));
    checks.push(Check::at_most("invariance", d.defects.invariance, tol));
    checks.push(Check::at_most("j_symmetry_l", d.defects.j_symmetry, tol));
    checks.push(Check::flag("trace_equals_stable_count", d.defects.trace_matches));

    let sol = solve_from_dichotomy(sys, &h, &d)?;
    let res_tol = residual_tolerance(policy, d.projection_error_estimate, sol.graph_margin);
    checks.push(Check::at_most(
        "residual_weighted",
        sol.residual.relative_weighted,
        res_tol,
    ));
    checks.push(Check::at_most("residual_plain", sol.residual.relative_plain, res_tol));
    checks.push(Check::at_most(
        "extraction_residual",
        sol.extraction_residual,
        floor_tol::<T>(1e-9, 1e3),
    ));

    let props = solution_properties(&sol.x_minus, sol.x_plus.as_ref(), sol.y_plus.as_ref(), pbh_both)?;
    checks.push(Check::at_most(
        "hermiticity_minus",
        props.hermiticity_minus,
        policy.residual_tol,
    ));
    checks.push(Check::flag("sign_minus", props.sign_minus_holds));
    if let Some(ok) = props.sign_plus_holds {
        checks.push(Check::flag("sign_plus", ok));
    }
    if let Some(defect) = props.inverse_defect {
        checks.push(Check::at_most("inverse_relation", defect, floor_tol::<T>(1e-7, 1e3)));
    }

    let (cl, cl_summary) = match closed_loop(sys, &h, &sol.x_minus) {
        Ok(cl) => {
            checks.push(Check::at_most(
                "closed_loop_spectrum",
                cl.matching_distance,
                cl.tolerance,
            ));
            checks.push(Check::at_most("closed_loop_max_real", cl.max_real, 0.0));
            let sector_scan = if flags.closed_loop_scan {
                let angles = [-std::f64::consts::FRAC_PI_4, 0.0, std::f64::consts::FRAC_PI_4];
                let top = 10.0 * to_f64(spectral_norm(&cl.acl)).max(1.0);
                Some(closed_loop_sector_scan(
                    &cl,
                    &h.scale,
                    sys.r,
                    &angles,
                    &geometric_grid(0.1, top, 12),
                )?)
            } else {
                None
            };
            let summary = ClosedLoopSummary {
                spectrum: cl.spectrum.clone(),
                max_real: cl.max_real,
                matching_distance: cl.matching_distance,
                tolerance: cl.tolerance,
                sector_scan,
            };
            (Some(cl), Some(summary))
        }
        Err(Error::Similarity { distance, tolerance }) => {
            checks.push(Check::at_most("closed_loop_spectrum", distance, tolerance));
            (None, None)
        }
        Err(e) => return Err(e),
    };

    let f1f2 = if flags.f1f2 {
        let diag = f1f2_diagnostics(&h, &d.p_minus, &d.basis_minus);
        let plus_graph = sol.x_plus.is_some();
        if plus_graph {
            checks.push(Check::at_least("f1_invertible", diag.min_sv_f1, GRAPH_MARGIN));
            checks.push(Check::at_least("f2_invertible", diag.min_sv_f2, GRAPH_MARGIN));
        }
        Some(F1F2Summary {
            cond_f1: diag.cond_f1,
            cond_f2: diag.cond_f2,
            min_sv_f1: diag.min_sv_f1,
            min_sv_f2: diag.min_sv_f2,
            top_block_min_sv: diag.top_block_min_sv,
            pq_diff_max_sv: diag.pq_diff_svals.first().copied().unwrap_or(0.0),
        })
    } else {
        None
    };

    let mut oracle_solution = None;
    let oracle = if flags.oracle {
        let o = oracle_projections(&h.t0, policy)?;
        let p_minus_distance = to_f64(spectral_norm(&(&d.p_minus - &o.p_minus)));
        let p_plus_distance = to_f64(spectral_norm(&(&d.p_plus - &o.p_plus)));
        let agree_tol = policy.residual_tol;
        checks.push(Check::at_most("oracle_p_minus", p_minus_distance, agree_tol));
        checks.push(Check::at_most("oracle_p_plus", p_plus_distance, agree_tol));
        let dim = h.t0.nrows();
        let bm = orthonormal_range(&o.p_minus, o.stable_count)?;
        let bp = orthonormal_range(&o.p_plus, dim - o.stable_count)?;
        let x_distance = match extract_solution(sys, &h, &bm, &bp, SolutionSource::Oracle) {
            Ok(os) => {
                let dist = relative_distance(&sol.x_minus, &os.x_minus);
                checks.push(Check::at_most("oracle_x_minus", dist, agree_tol));
                oracle_solution = Some(os);
                Some(dist)
            }
            Err(Error::NotAGraph { .. }) => None,
            Err(e) => return Err(e),
        };
        let (newton_distance, newton_iterations) = if is_stable(&sys.a)? {
            let eps = to_f64(T::default_epsilon());
            let nk = newton_kleinman(sys, 100, (1e-4 * policy.rel_tol).max(100.0 * eps))?;
            let dist = relative_distance(&sol.x_minus, &nk.x);
            checks.push(Check::at_most("newton_x_minus", dist, agree_tol));
            (Some(dist), Some(nk.iterations))
        } else {
            (None, None)
        };
        Some(OracleSummary {
            method: o.method,
            eigvec_condition: o.eigvec_condition,
            p_minus_distance,
            p_plus_distance,
            x_distance,
            newton_distance,
            newton_iterations,
        })
    } else {
        None
    };

    let principal_value = if flags.pv_identity {
        let pv = principal_value_difference(&h, &d.spec, policy.pv_t_max, policy)?;
        let target = &d.p_plus - &d.p_minus;
        let defect = to_f64(spectral_norm(&(&pv.value - &target)));
        let truncated_defect = to_f64(spectral_norm(&(&pv.truncated - &target)));
        checks.push(Check::at_most("principal_value", defect, policy.identity_tol));
        Some(PvSummary {
            t_max: policy.pv_t_max,
            defect,
            truncated_defect,
            truncation_bound: pv.truncation_bound,
            quadrature_error: pv.quadrature_error,
        })
    } else {
        None
    };

    let sq_identity = if flags.sq_identity && is_stable(&sys.a)? {
        let sq = sq_correction_check(&h, &d.spec, policy)?;
        checks.push(Check::at_most("sq_identity", sq.defect, sq.tolerance));
        Some(sq)
    } else {
        None
    };

    let independence_difference = if flags.independence {
        let ind = contour_independence(&h, &d.spec, &d.p_minus, policy)?;
        checks.push(Check::at_most(
            "contour_independence",
            ind.difference,
            ind.tolerance.max(tol),
        ));
        Some(ind.difference)
    } else {
        None
    };

    let decay_scan = if flags.decay_scan {
        let hi = (0.05 * to_f64(spectral_norm(&sys.a))).max(4.0 * d.spec.h);
        let grid = geometric_grid(d.spec.h, hi.max(2.0 * d.spec.h), 8);
        let pts = axis_resolvent_scan(&h, AxisNorm::V0Norm, AxisOperator::Hamiltonian, &grid)?;
        let finite = pts.iter().all(|p| p.norm.is_finite());
        checks.push(Check::flag("decay_scan_finite", finite));
        Some(pts)
    } else {
        None
    };

    let report = RunReport {
        system,
        dichotomy: DichotomySummary {
            h: d.spec.h,
            t_max: d.spec.t_max,
            rho: d.spec.rho,
            tail_bound: d.tail_bound,
            quadrature_error: d.quadrature_error_estimate,
            projection_error: d.projection_error_estimate,
            evaluations: d.evaluations,
            defects: d.defects.clone(),
            l_norms: d.l_norms.clone(),
            oracle,
            principal_value,
            sq_identity,
            independence_difference,
            decay_scan,
        },
        riccati: RiccatiSummary {
            x_minus: matrix_rows(&sol.x_minus),
            x_plus: sol.x_plus.as_ref().map(matrix_rows),
            norms: sol.norms,
            graph_margin: sol.graph_margin,
            plus_graph_margin: sol.plus_graph_margin,
            plus_cograph_margin: sol.plus_cograph_margin,
            extraction_residual: sol.extraction_residual,
            poorly_angular: sol.poorly_angular,
            residual: sol.residual,
            residual_tolerance: res_tol,
            properties: props,
            closed_loop: cl_summary,
            f1f2,
        },
        checks,
    };
    Ok(Outcome {
        report,
        hamiltonian: h,
        dichotomy: d,
        solution: sol,
        oracle_solution,
        closed_loop: cl,
    })
}

/// Least-squares slope of `ln(norm)` against `ln(t)`.
pub fn loglog_slope(points: &[AxisPoint]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.t > 0.0 && p.norm > 0.0 && p.norm.is_finite())
        .map(|p| (p.t.ln(), p.norm.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / k, b + y / k));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Largest `|t|^exponent · norm` over the points with `t` in `[lo, hi]`.
pub fn scaled_window_max(points: &[AxisPoint], exponent: f64, lo: f64, hi: f64) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.t >= lo && p.t <= hi)
        .map(|p| p.t.abs().powf(exponent) * p.norm)
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{gen_axis_eigen_detect, gen_scalar};

    #[test]
    fn scalar_run_passes_every_check() {
        let sys = gen_scalar(1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let opts = PipelineOptions {
            flags: PipelineFlags::all(),
            ..Default::default()
        };
        let out = run_pipeline(&sys, &opts).unwrap();
        let failed: Vec<_> = out.report.failures().collect();
        assert!(failed.is_empty(), "{failed:?}");
        assert!((out.report.riccati.x_minus[0][0].re - (2f64.sqrt() - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn unobserved_axis_mode_is_not_dichotomous() {
        let sys = gen_axis_eigen_detect(3, 0.0, 0.0, 1.0, true).unwrap();
        match run_pipeline(&sys, &PipelineOptions::default()) {
            Err(Error::NotDichotomous { eigenvalues }) => {
                assert!(eigenvalues.iter().any(|z| (z - Complex::new(0.0, 1.0)).norm() < 1e-9));
            }
            other => panic!("expected NotDichotomous, got {:?}", other.map(|o| o.report.checks)),
        }
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<AxisPoint> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&t: &f64| AxisPoint { t, norm: 3.0 / t })
            .collect();
        assert!((loglog_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
        assert!((scaled_window_max(&pts, 1.0, 1.0, 8.0).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(scaled_window_max(&pts, 1.0, 10.0, 20.0), None);
    }
}

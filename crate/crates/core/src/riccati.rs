//! Angular operators of the dichotomy subspaces and the Riccati solutions
//! they define.
//!
//! At finite dimension the operators `X1±`, `XM±` and `X0±` are one matrix;
//! [`RiccatiSolution`] records its norm in the three geometries instead.

use nalgebra::Complex;
use serde::Serialize;

use crate::dichotomy::DichotomyResult;
use crate::error::{Error, Result};
use crate::hamiltonian::{BlockSpace, HamiltonianMatrices, SystemData};
use crate::hilbert_scale::{HilbertScale, Side, SpaceTag};
use crate::linalg::{
    block_diag, c64, cplx, creal, eigenvalues, floor_tol, hermitian_eigen, identity, lit, lyapunov, match_spectra,
    min_singular_value, singular_values, spectral_norm, to_f64, vstack, CMat, Real,
};
use crate::policy::NumericPolicy;

/// Margin below which a basis is not treated as a graph.
pub const GRAPH_MARGIN: f64 = 1e-10;
/// Margin below which an extraction is flagged as poorly angular.
pub const POOR_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GraphCheck {
    pub is_graph: bool,
    /// Smallest singular value of the parametrizing block.
    pub margin: f64,
    pub dim: usize,
}

fn check_dim<T: Real>(basis: &CMat<T>, n: usize) -> Result<()> {
    if basis.nrows() != 2 * n {
        return Err(Error::dim("subspace basis rows", 2 * n, basis.nrows()));
    }
    if basis.ncols() != n {
        return Err(Error::DichotomyImbalance {
            expected: n,
            found: basis.ncols(),
        });
    }
    Ok(())
}

/// Whether `range(basis)` is the graph `{(x, X x)}`: the top block must be
/// invertible.
pub fn graph_check<T: Real>(basis: &CMat<T>, n: usize) -> Result<GraphCheck> {
    check_dim(basis, n)?;
    let margin = to_f64(min_singular_value(&basis.rows(0, n).into_owned()));
    Ok(GraphCheck {
        is_graph: margin > GRAPH_MARGIN,
        margin,
        dim: basis.ncols(),
    })
}

/// Whether `range(basis)` is the co-graph `{(Y y, y)}`.
pub fn cograph_check<T: Real>(basis: &CMat<T>, n: usize) -> Result<GraphCheck> {
    check_dim(basis, n)?;
    let margin = to_f64(min_singular_value(&basis.rows(n, n).into_owned()));
    Ok(GraphCheck {
        is_graph: margin > GRAPH_MARGIN,
        margin,
        dim: basis.ncols(),
    })
}

#[derive(Debug, Clone)]
pub struct AngularOperator<T: Real> {
    pub x: CMat<T>,
    pub margin: f64,
    /// Distance of the reconstructed graph basis from the input column space.
    pub residual: f64,
    pub poorly_angular: bool,
}

/// `X = lower · upper^{-1}` by a fully pivoted solve of `upper^H X^H = lower^H`.
fn parametrize<T: Real>(
    basis: &CMat<T>,
    upper: CMat<T>,
    lower: CMat<T>,
    graph_first: bool,
) -> Result<AngularOperator<T>> {
    let margin = to_f64(min_singular_value(&upper));
    if !(margin > GRAPH_MARGIN) {
        return Err(Error::NotAGraph { margin });
    }
    let xh = upper
        .adjoint()
        .full_piv_lu()
        .solve(&lower.adjoint())
        .ok_or(Error::NotAGraph { margin })?;
    let x = xh.adjoint();
    let n = x.nrows();
    let id = identity::<T>(n);
    let graph = if graph_first {
        vstack(&id, &x) * &upper
    } else {
        vstack(&x, &id) * &upper
    };
    let projected = basis * (basis.adjoint() * &graph);
    let residual = to_f64(spectral_norm(&(graph - projected)));
    Ok(AngularOperator {
        x,
        margin,
        residual,
        poorly_angular: margin < POOR_MARGIN,
    })
}

/// `X = U2 U1^{-1}` for the basis `[U1; U2]` of a graph subspace.
pub fn angular_operator<T: Real>(basis: &CMat<T>, n: usize) -> Result<AngularOperator<T>> {
    check_dim(basis, n)?;
    let u1 = basis.rows(0, n).into_owned();
    let u2 = basis.rows(n, n).into_owned();
    parametrize(basis, u1, u2, true)
}

/// `Y = U1 U2^{-1}` for the basis `[U1; U2]` of a co-graph subspace.
pub fn cograph_operator<T: Real>(basis: &CMat<T>, n: usize) -> Result<AngularOperator<T>> {
    check_dim(basis, n)?;
    let u1 = basis.rows(0, n).into_owned();
    let u2 = basis.rows(n, n).into_owned();
    parametrize(basis, u2, u1, false)
}

#[derive(Debug, Clone)]
pub struct AngularDiagnostics<T: Real> {
    /// `I - Q0- + P0-`.
    pub f1: CMat<T>,
    /// `I - P0- + Q0-`.
    pub f2: CMat<T>,
    pub cond_f1: f64,
    pub cond_f2: f64,
    pub min_sv_f1: f64,
    pub min_sv_f2: f64,
    pub top_block_min_sv: f64,
    /// Singular values of `P0- - Q0-` in the `V0` geometry, descending.
    pub pq_diff_svals: Vec<f64>,
}

/// Canonical projection `Q0- = diag(I, 0)` onto the first component.
pub fn q0_minus<T: Real>(n: usize) -> CMat<T> {
    block_diag(&identity::<T>(n), &CMat::zeros(n, n))
}

pub fn f1f2_diagnostics<T: Real>(
    h: &HamiltonianMatrices<T>,
    p_minus: &CMat<T>,
    basis_minus: &CMat<T>,
) -> AngularDiagnostics<T> {
    let n = h.n();
    let id = identity::<T>(2 * n);
    let q = q0_minus::<T>(n);
    let f1 = &id - &q + p_minus;
    let f2 = &id - p_minus + &q;
    let diff = h.weighted(&(p_minus - &q), BlockSpace::V0, BlockSpace::V0);
    let top = if basis_minus.nrows() == 2 * n {
        to_f64(min_singular_value(&basis_minus.rows(0, n).into_owned()))
    } else {
        0.0
    };
    AngularDiagnostics {
        cond_f1: h.block_condition(&f1, BlockSpace::V0),
        cond_f2: h.block_condition(&f2, BlockSpace::V0),
        min_sv_f1: to_f64(min_singular_value(&f1)),
        min_sv_f2: to_f64(min_singular_value(&f2)),
        top_block_min_sv: top,
        pq_diff_svals: singular_values(&diff).into_iter().map(to_f64).collect(),
        f1,
        f2,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualReport {
    /// `‖Λ_*^{-s} E Λ_*^{-(1-r)}‖`, the norm of `E: H_{1-r}^{(*)} → H_{-s}^{(*)}`.
    pub weighted: f64,
    pub plain: f64,
    /// Divided by the largest of the four terms, `‖A‖` and `‖B B^H‖`, all in
    /// the same norm.
    pub relative_weighted: f64,
    pub relative_plain: f64,
}

/// Residual `E = A^H X + X A - X B B^H X + C^H C` of the Riccati equation.
pub fn riccati_residual<T: Real>(sys: &SystemData<T>, scale: &HilbertScale<T>, x: &CMat<T>) -> Result<ResidualReport> {
    let n = sys.n();
    if x.shape() != (n, n) {
        return Err(Error::dim(
            "Riccati residual",
            format!("{n}x{n}"),
            format!("{}x{}", x.nrows(), x.ncols()),
        ));
    }
    let terms = [
        sys.a.adjoint() * x,
        x * &sys.a,
        -(x * sys.control_gram() * x),
        sys.observation_gram(),
    ];
    let e = terms.iter().fold(CMat::zeros(n, n), |acc, t| acc + t);
    let src = SpaceTag::star(1.0 - sys.r)?;
    let dst = SpaceTag::star(-sys.s)?;
    let wnorm = |m: &CMat<T>| scale.operator_scale_norm(m, src, dst).map(to_f64);
    let weighted = wnorm(&e)?;
    let plain = to_f64(spectral_norm(&e));
    // Relative to the terms and to the data, so that `X ≈ 0` does not
    // divide by its own rounding error.
    let data = [sys.a.clone(), sys.control_gram()];
    let mut wscale = 0.0f64;
    let mut pscale = 0.0f64;
    for t in terms.iter().chain(&data) {
        wscale = wscale.max(wnorm(t)?);
        pscale = pscale.max(to_f64(spectral_norm(t)));
    }
    let rel = |v: f64, s: f64| if s > 0.0 { v / s } else { v };
    Ok(ResidualReport {
        weighted,
        plain,
        relative_weighted: rel(weighted, wscale),
        relative_plain: rel(plain, pscale),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionSource {
    Contour,
    Oracle,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OperatorNorms {
    /// As a map `H_{-r} → H_{-s}^{(*)}`.
    pub v0: f64,
    /// As a map `H → H`.
    pub h: f64,
    /// As a map `H_s^{(*)} → H_r`.
    pub v1: f64,
}

pub fn operator_norms<T: Real>(scale: &HilbertScale<T>, x: &CMat<T>, r: f64, s: f64) -> Result<OperatorNorms> {
    Ok(OperatorNorms {
        v0: to_f64(scale.operator_scale_norm(x, SpaceTag::plain(-r)?, SpaceTag::star(-s)?)?),
        h: to_f64(spectral_norm(x)),
        v1: to_f64(scale.operator_scale_norm(x, SpaceTag::star(s)?, SpaceTag::plain(r)?)?),
    })
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution<T: Real> {
    pub x_minus: CMat<T>,
    pub x_plus: Option<CMat<T>>,
    pub y_plus: Option<CMat<T>>,
    pub norms: OperatorNorms,
    pub graph_margin: f64,
    /// Top-block margin of `V0+` (`X0+` exists above [`GRAPH_MARGIN`]).
    pub plus_graph_margin: Option<f64>,
    /// Bottom-block margin of `V0+` (`Y0+` exists above [`GRAPH_MARGIN`]).
    pub plus_cograph_margin: Option<f64>,
    pub extraction_residual: f64,
    pub poorly_angular: bool,
    pub hermiticity_defect: f64,
    pub min_eig: f64,
    pub residual: ResidualReport,
    pub source: SolutionSource,
}

/// Relative hermiticity defect `‖X - X^H‖ / ‖X‖` (zero for `X = 0`).
pub fn hermiticity_defect<T: Real>(x: &CMat<T>) -> f64 {
    let nx = to_f64(spectral_norm(x));
    if nx == 0.0 {
        return 0.0;
    }
    to_f64(spectral_norm(&(x - x.adjoint()))) / nx
}

fn hermitian_extremes<T: Real>(x: &CMat<T>) -> Result<(f64, f64)> {
    if x.is_empty() {
        return Ok((0.0, 0.0));
    }
    let herm = (x + x.adjoint()) * creal(lit::<T>(0.5));
    let (vals, _) = hermitian_eigen(&herm)?;
    Ok((to_f64(vals[0]), to_f64(vals[vals.len() - 1])))
}

/// Reads `X0-` off `V0- = range(P-)`, and `X0+`, `Y0+` off `V0+` when those
/// parametrizations exist.
pub fn extract_solution<T: Real>(
    sys: &SystemData<T>,
    h: &HamiltonianMatrices<T>,
    basis_minus: &CMat<T>,
    basis_plus: &CMat<T>,
    source: SolutionSource,
) -> Result<RiccatiSolution<T>> {
    let n = sys.n();
    let gm = graph_check(basis_minus, n)?;
    if !gm.is_graph {
        return Err(Error::NotAGraph { margin: gm.margin });
    }
    let xm = angular_operator(basis_minus, n)?;
    let square = basis_plus.ncols() == n;
    let x_plus = square
        .then(|| angular_operator(basis_plus, n).ok().map(|a| a.x))
        .flatten();
    let y_plus = square
        .then(|| cograph_operator(basis_plus, n).ok().map(|a| a.x))
        .flatten();
    let plus_graph_margin = square
        .then(|| graph_check(basis_plus, n).map(|g| g.margin))
        .transpose()?;
    let plus_cograph_margin = square
        .then(|| cograph_check(basis_plus, n).map(|g| g.margin))
        .transpose()?;
    let residual = riccati_residual(sys, &h.scale, &xm.x)?;
    let (min_eig, _) = hermitian_extremes(&xm.x)?;
    Ok(RiccatiSolution {
        norms: operator_norms(&h.scale, &xm.x, sys.r, sys.s)?,
        hermiticity_defect: hermiticity_defect(&xm.x),
        min_eig,
        residual,
        graph_margin: xm.margin,
        plus_graph_margin,
        plus_cograph_margin,
        extraction_residual: xm.residual,
        poorly_angular: xm.poorly_angular,
        x_minus: xm.x,
        x_plus,
        y_plus,
        source,
    })
}

/// [`extract_solution`] from contour projections.
pub fn solve_from_dichotomy<T: Real>(
    sys: &SystemData<T>,
    h: &HamiltonianMatrices<T>,
    d: &DichotomyResult<T>,
) -> Result<RiccatiSolution<T>> {
    extract_solution(sys, h, &d.basis_minus, &d.basis_plus, SolutionSource::Contour)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionProperties {
    pub hermiticity_minus: f64,
    pub min_eig_minus: f64,
    pub norm_minus: f64,
    pub sign_minus_holds: bool,
    pub hermiticity_plus: Option<f64>,
    pub max_eig_plus: Option<f64>,
    pub sign_plus_holds: Option<bool>,
    /// `‖X0+ Y0+ - I‖`, measured when both PBH tests pass.
    pub inverse_defect: Option<f64>,
    pub inverse_holds: Option<bool>,
    /// Both PBH tests pass but `V0+` is numerically not a graph or not a
    /// co-graph, so `X0+` or `Y0+` cannot be formed in floating point.
    pub inverse_unverifiable: bool,
    /// Threshold of the hermiticity and sign tests (`1e-8`, floored for `f32`).
    pub tolerance: f64,
}

impl SolutionProperties {
    pub fn all_hold(&self) -> bool {
        self.hermiticity_minus <= self.tolerance
            && self.sign_minus_holds
            && self.hermiticity_plus.is_none_or(|d| d <= self.tolerance)
            && self.sign_plus_holds.unwrap_or(true)
            && self.inverse_holds.unwrap_or(true)
    }
}

/// Hermiticity and sign of `X0∓`, and `X0+^{-1} = Y0+` when `pbh_both` holds.
pub fn solution_properties<T: Real>(
    x_minus: &CMat<T>,
    x_plus: Option<&CMat<T>>,
    y_plus: Option<&CMat<T>>,
    pbh_both: bool,
) -> Result<SolutionProperties> {
    let tol = floor_tol::<T>(1e-8, 100.0);
    let inverse_tol = floor_tol::<T>(1e-7, 1e3);
    let norm_minus = to_f64(spectral_norm(x_minus));
    let (min_eig_minus, _) = hermitian_extremes(x_minus)?;
    let (hermiticity_plus, max_eig_plus, sign_plus_holds) = match x_plus {
        Some(xp) => {
            let (_, hi) = hermitian_extremes(xp)?;
            let np = to_f64(spectral_norm(xp));
            (Some(hermiticity_defect(xp)), Some(hi), Some(hi <= tol * np))
        }
        None => (None, None, None),
    };
    let inverse_defect = match (pbh_both, x_plus, y_plus) {
        (true, Some(xp), Some(yp)) => Some(to_f64(spectral_norm(&(xp * yp - identity::<T>(xp.nrows()))))),
        _ => None,
    };
    let inverse_unverifiable = pbh_both && inverse_defect.is_none();
    Ok(SolutionProperties {
        hermiticity_minus: hermiticity_defect(x_minus),
        min_eig_minus,
        norm_minus,
        sign_minus_holds: min_eig_minus >= -tol * norm_minus,
        hermiticity_plus,
        max_eig_plus,
        sign_plus_holds,
        inverse_holds: inverse_defect.map(|d| d <= inverse_tol),
        inverse_defect,
        inverse_unverifiable,
        tolerance: tol,
    })
}

#[derive(Debug, Clone)]
pub struct ClosedLoop<T: Real> {
    pub acl: CMat<T>,
    pub spectrum: Vec<Complex<f64>>,
    pub max_real: f64,
    /// Matching distance between `σ(Acl)` and `σ(T0) ∩ ℂ_-`.
    pub matching_distance: f64,
    pub tolerance: f64,
}

/// `Acl = A - B B^H X0-`, whose spectrum must be the stable half of `σ(T0)`.
pub fn closed_loop<T: Real>(
    sys: &SystemData<T>,
    h: &HamiltonianMatrices<T>,
    x_minus: &CMat<T>,
) -> Result<ClosedLoop<T>> {
    let acl = &sys.a - sys.control_gram() * x_minus;
    let eigs = eigenvalues(&acl)?;
    let stable: Vec<Complex<T>> = h.spectrum()?.iter().copied().filter(|z| z.re < T::zero()).collect();
    let distance = to_f64(match_spectra(&eigs, &stable, |z| z));
    let tolerance = floor_tol::<T>(1e-8, 100.0) * to_f64(h.t0_norm()).max(f64::MIN_POSITIVE);
    let max_real = eigs.iter().map(|z| to_f64(z.re)).fold(f64::NEG_INFINITY, f64::max);
    if !(distance <= tolerance) || !(max_real < 0.0 || eigs.is_empty()) {
        return Err(Error::Similarity { distance, tolerance });
    }
    Ok(ClosedLoop {
        spectrum: eigs.iter().map(|&z| c64(z)).collect(),
        acl,
        max_real,
        matching_distance: distance,
        tolerance,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolventSample {
    pub lambda: Complex<f64>,
    pub norm: f64,
    /// `|λ|^exponent · norm` with the exponent of the probe.
    pub scaled: f64,
}

fn resolvent_samples<T: Real>(
    acl: &CMat<T>,
    scale: &HilbertScale<T>,
    src: SpaceTag,
    dst: SpaceTag,
    points: &[Complex<f64>],
    exponent: f64,
) -> Vec<Result<ResolventSample>> {
    points
        .iter()
        .map(|&lambda| {
            let lam = cplx(lit::<T>(lambda.re), lit::<T>(lambda.im));
            let res = crate::linalg::resolvent(acl, lam).ok_or(Error::Singular { lambda })?;
            let norm = to_f64(scale.operator_scale_norm(&res, src, dst)?);
            Ok(ResolventSample {
                lambda,
                norm,
                scaled: lambda.norm().powf(exponent) * norm,
            })
        })
        .collect()
}

/// Like [`closed_loop_sector_scan`], with one result per sample (angle-major
/// order) so that a spectral point fails only its own row.
pub fn closed_loop_sector_rows<T: Real>(
    cl: &ClosedLoop<T>,
    scale: &HilbertScale<T>,
    r: f64,
    angles: &[f64],
    radii: &[f64],
) -> Result<Vec<Result<ResolventSample>>> {
    let tag = SpaceTag::plain(-r)?;
    let points: Vec<Complex<f64>> = angles
        .iter()
        .flat_map(|&a| radii.iter().map(move |&rad| Complex::from_polar(rad, a)))
        .collect();
    Ok(resolvent_samples(&cl.acl, scale, tag, tag, &points, 1.0))
}

/// `‖(Acl - λ)^{-1}‖_{H_{-r}}` along right half-plane rays; `scaled` is
/// `|λ|·norm`, which stays bounded for a sectorial closed loop.
pub fn closed_loop_sector_scan<T: Real>(
    cl: &ClosedLoop<T>,
    scale: &HilbertScale<T>,
    r: f64,
    angles: &[f64],
    radii: &[f64],
) -> Result<Vec<ResolventSample>> {
    closed_loop_sector_rows(cl, scale, r, angles, radii)?
        .into_iter()
        .collect()
}

/// `‖(Acl - it)^{-1}‖_{H_{-r} → H}` on the imaginary axis; `scaled` is
/// `|t|^{1-r}·norm`.
pub fn closed_loop_axis_probe<T: Real>(
    cl: &ClosedLoop<T>,
    scale: &HilbertScale<T>,
    r: f64,
    t_values: &[f64],
) -> Result<Vec<ResolventSample>> {
    let points: Vec<Complex<f64>> = t_values.iter().map(|&t| Complex::new(0.0, t)).collect();
    resolvent_samples(
        &cl.acl,
        scale,
        SpaceTag::plain(-r)?,
        SpaceTag::pivot(Side::Plain),
        &points,
        1.0 - r,
    )
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarOracle {
    pub x_minus: f64,
    pub x_plus: Option<f64>,
    pub spectrum: [f64; 2],
}

/// Closed-form solutions for the scalar system `A = -a`, `B = b`, `C = c`.
pub fn scalar_oracle(a: f64, b: f64, c: f64) -> Result<ScalarOracle> {
    if b != 0.0 {
        let root = (a * a + b * b * c * c).sqrt();
        if root == 0.0 {
            return Err(Error::NotDichotomous {
                eigenvalues: vec![Complex::new(0.0, 0.0)],
            });
        }
        return Ok(ScalarOracle {
            x_minus: (root - a) / (b * b),
            x_plus: Some(-(root + a) / (b * b)),
            spectrum: [-root, root],
        });
    }
    if !(a > 0.0) {
        return Err(Error::Precondition(format!(
            "without control the scalar oracle needs a stable A = -a, got a = {a}"
        )));
    }
    Ok(ScalarOracle {
        x_minus: c * c / (2.0 * a),
        x_plus: None,
        spectrum: [-a, a],
    })
}

#[derive(Debug, Clone)]
pub struct NewtonKleinman<T: Real> {
    pub x: CMat<T>,
    pub iterations: usize,
    /// Relative size of the last update.
    pub step: f64,
}

/// Newton–Kleinman iteration from `X = 0`: solve
/// `A_k^H X + X A_k = -(C^H C + X_k B B^H X_k)` with `A_k = A - B B^H X_k`.
pub fn newton_kleinman<T: Real>(sys: &SystemData<T>, max_iter: usize, tol: f64) -> Result<NewtonKleinman<T>> {
    let eigs = eigenvalues(&sys.a)?;
    if let Some(bad) = eigs.iter().find(|z| !(z.re < T::zero())) {
        return Err(Error::Precondition(format!(
            "Newton–Kleinman from X = 0 needs a stable A; eigenvalue {:?}",
            c64(*bad)
        )));
    }
    let bb = sys.control_gram();
    let cc = sys.observation_gram();
    let n = sys.n();
    let mut x = CMat::zeros(n, n);
    let mut step = f64::INFINITY;
    for k in 1..=max_iter {
        let ak = &sys.a - &bb * &x;
        let rhs = -(&cc + &x * &bb * &x);
        let mut next = lyapunov(&ak, &rhs)?;
        next = (&next + next.adjoint()) * creal(lit::<T>(0.5));
        let diff = to_f64(spectral_norm(&(&next - &x)));
        let scale = to_f64(spectral_norm(&next));
        step = if scale > 0.0 { diff / scale } else { diff };
        x = next;
        if step <= tol {
            return Ok(NewtonKleinman { x, iterations: k, step });
        }
    }
    Err(Error::Accuracy {
        context: "Newton–Kleinman iteration",
        achieved: step,
        target: tol,
        evaluations: max_iter,
    })
}

/// Relative distance `‖X - X_ref‖ / max(‖X_ref‖, 1)`.
pub fn relative_distance<T: Real>(x: &CMat<T>, reference: &CMat<T>) -> f64 {
    to_f64(spectral_norm(&(x - reference))) / to_f64(spectral_norm(reference)).max(1.0)
}

/// Tolerance for a weighted residual check.
pub fn residual_tolerance(policy: &NumericPolicy, upstream_error: f64, margin: f64) -> f64 {
    let base = policy.quadrature_bound(upstream_error);
    if margin < POOR_MARGIN {
        base / margin.max(GRAPH_MARGIN) * POOR_MARGIN
    } else {
        base
    }
}

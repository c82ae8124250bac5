//! Dichotomy operators `L±` and projections `P± = T0 L±` by contour
//! quadrature, with an eigendecomposition oracle and the principal-value and
//! semicircle identities as cross-checks.
//!
//! All resolvent integrals run in Schur coordinates `T0 = Q U Q^H`, so each
//! quadrature node costs one triangular inversion; the Frobenius error
//! estimate is unchanged by the unitary change of basis.

use nalgebra::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{BlockSpace, HamiltonianMatrices, IndefiniteForm};
use crate::linalg::{
    block_diag, c64, condition_number, cplx, creal, identity, inverse, is_finite, lit, matmul, orthonormal_range,
    reorder_schur, schur, shifted_triangular_inverse, spectral_norm, to_f64, triangular_eigenvectors,
    triangular_sylvester, CMat, Real,
};
use crate::policy::NumericPolicy;
use crate::quadrature::{integrate, QuadratureOptions, QuadratureRule};

/// Vertical integration lines `Re λ = ±h`, truncated at `|Im λ| = t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourSpec {
    pub h: f64,
    pub t_max: f64,
    pub rule: QuadratureRule,
    /// Target accuracy of `P±` in the spectral norm.
    pub abs_tol: f64,
    /// Inner radius of the semicircle contours.
    pub rho: f64,
}

impl ContourSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.t_max > self.h && self.abs_tol > 0.0 && self.rho > 0.0) {
            return Err(Error::Parameter(format!(
                "invalid contour: h = {}, t_max = {}, abs_tol = {}, rho = {}",
                self.h, self.t_max, self.abs_tol, self.rho
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Certified bound on the part of the `L±` integral beyond `|t| = t_max`.
///
/// For `|λ| > a = ‖T0‖` the Neumann series gives
/// `‖(T0 - λ)^{-1}‖ ≤ 1/(|λ| - a)`, and the two tails integrate to
/// `ln(t/(t - a)) / (π a)`.
pub fn tail_bound(t0_norm: f64, t_max: f64) -> f64 {
    if t0_norm == 0.0 {
        return 1.0 / (std::f64::consts::PI * t_max);
    }
    if t_max <= t0_norm {
        return f64::INFINITY;
    }
    (t_max / (t_max - t0_norm)).ln() / (std::f64::consts::PI * t0_norm)
}

fn t_max_for(t0_norm: f64, target: f64) -> f64 {
    let pi = std::f64::consts::PI;
    if t0_norm == 0.0 {
        return 1.0 / (pi * target);
    }
    let q = pi * t0_norm * target;
    t0_norm / -(-q).exp_m1()
}

/// Absolute accuracy required of `L±` so that `P± = T0 L±` meets `abs_tol`.
fn l_tolerance(spec: &ContourSpec, t0_norm: f64) -> f64 {
    spec.abs_tol / t0_norm.max(1.0)
}

/// Picks `h = ½ min |Re λ|` over `σ(T0)`, `ρ = h/2` and `t_max` with the
/// tail at most a tenth of the `L±` budget.
pub fn choose_strip<T: Real>(h: &HamiltonianMatrices<T>, policy: &NumericPolicy) -> Result<ContourSpec> {
    let axis = h.axis_eigenvalues(policy.axis_tol)?;
    if !axis.is_empty() {
        return Err(Error::NotDichotomous {
            eigenvalues: axis.iter().map(|&z| c64(z)).collect(),
        });
    }
    let gap = h
        .spectrum()?
        .iter()
        .map(|z| to_f64(z.re).abs())
        .fold(f64::INFINITY, f64::min);
    let norm = to_f64(h.t0_norm());
    let half = 0.5 * gap;
    let mut spec = ContourSpec {
        h: half,
        t_max: 0.0,
        rule: policy.rule,
        abs_tol: policy.quad_tol,
        rho: 0.5 * half,
    };
    spec.t_max = t_max_for(norm, 0.1 * l_tolerance(&spec, norm)).max(2.0 * half);
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone)]
pub struct ContourIntegral<T: Real> {
    pub value: CMat<T>,
    /// The same integral in the Schur basis of `T0`.
    pub schur_value: CMat<T>,
    pub quadrature_error: f64,
    pub tail_bound: f64,
    pub evaluations: usize,
}

impl<T: Real> ContourIntegral<T> {
    pub fn error_estimate(&self) -> f64 {
        self.quadrature_error + self.tail_bound
    }
}

fn nan_matrix<T: Real>(n: usize) -> CMat<T> {
    CMat::from_element(n, n, cplx(lit(f64::NAN), lit(f64::NAN)))
}

/// `L± = (±1/2π) ∫ (1/λ)(T0 - λ)^{-1} dt` on `λ = ±h + it`, `|t| ≤ t_max`,
/// with `t = h sinh(u)`.
pub fn contour_l<T: Real>(
    h: &HamiltonianMatrices<T>,
    spec: &ContourSpec,
    sign: Sign,
    max_evals: usize,
) -> Result<ContourIntegral<T>> {
    spec.validate()?;
    let (q, u) = h.schur()?;
    let dim = u.nrows();
    let norm = to_f64(h.t0_norm());
    let tail = tail_bound(norm, spec.t_max);
    let budget = l_tolerance(spec, norm);
    if tail >= budget {
        return Err(Error::Accuracy {
            context: "contour tail",
            achieved: tail,
            target: budget,
            evaluations: 0,
        });
    }
    let sg = sign.value();
    let tau = spec.h;
    let u_max = (spec.t_max / tau).asinh();
    let re: T = lit(sg * spec.h);
    let factor = sg / (2.0 * std::f64::consts::PI);
    let integrand = |v: T| -> CMat<T> {
        let vf = to_f64(v);
        let t = tau * vf.sinh();
        let jac = tau * vf.cosh();
        let lambda = cplx(re, lit(t));
        match shifted_triangular_inverse(u, lambda) {
            Some(r) => {
                let w = cplx(lit::<T>(factor * jac), T::zero()) / lambda;
                r * w
            }
            None => nan_matrix(dim),
        }
    };
    let opts = QuadratureOptions::new(spec.rule, budget - tail, max_evals);
    let quad = integrate(integrand, lit(-u_max), lit(u_max), &opts)?;
    if !is_finite(&quad.value) {
        return Err(Error::Singular {
            lambda: Complex::new(sg * spec.h, f64::NAN),
        });
    }
    Ok(ContourIntegral {
        value: q * &quad.value * q.adjoint(),
        schur_value: quad.value,
        quadrature_error: quad.error_estimate,
        tail_bound: tail,
        evaluations: quad.evaluations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionDefects {
    /// `‖P+ + P- - I‖`.
    pub complement: f64,
    pub idempotence_plus: f64,
    pub idempotence_minus: f64,
    /// `max(‖L+ L-‖, ‖L- L+‖)`.
    pub l_product: f64,
    /// `‖L+ + L- - T0^{-1}‖`.
    pub l_sum: f64,
    /// `‖(I - P-) T0 P-‖ / ‖T0‖`.
    pub invariance: f64,
    /// `‖J L+ + L-^H J‖`.
    pub j_symmetry: f64,
    /// Largest relative part of `L±` outside `range(P±)`.
    pub range_gap: f64,
    pub trace_minus: f64,
    pub stable_count: usize,
    pub trace_matches: bool,
    pub tolerance: f64,
}

impl ProjectionDefects {
    pub fn algebra_holds(&self) -> bool {
        [
            self.complement,
            self.idempotence_plus,
            self.idempotence_minus,
            self.l_product,
            self.l_sum,
            self.invariance,
            self.j_symmetry,
        ]
        .iter()
        .all(|&d| d <= self.tolerance)
            && self.trace_matches
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LNorms {
    pub plus_v0: f64,
    pub minus_v0: f64,
    pub plus_v1: f64,
    pub minus_v1: f64,
    pub plus_v0_to_v1: f64,
    pub minus_v0_to_v1: f64,
}

#[derive(Debug, Clone)]
pub struct DichotomyResult<T: Real> {
    pub spec: ContourSpec,
    pub l_plus: CMat<T>,
    pub l_minus: CMat<T>,
    pub p_plus: CMat<T>,
    pub p_minus: CMat<T>,
    pub basis_plus: CMat<T>,
    pub basis_minus: CMat<T>,
    pub tail_bound: f64,
    /// Error estimate of `L+` plus that of `L-`, tails included.
    pub quadrature_error_estimate: f64,
    /// Implied error estimate of `P±`.
    pub projection_error_estimate: f64,
    pub evaluations: usize,
    pub defects: ProjectionDefects,
    pub l_norms: LNorms,
}

/// `‖(I - B B^H) L‖ / ‖L‖`: how far `range(L)` sticks out of `range(B)`.
fn range_defect<T: Real>(l: &CMat<T>, basis: &CMat<T>) -> f64 {
    let nl = to_f64(spectral_norm(l));
    if nl == 0.0 {
        return 0.0;
    }
    to_f64(spectral_norm(&(l - basis * (basis.adjoint() * l)))) / nl
}

/// `Q (U L̂) Q^H`. Multiplying by the triangular factor before rotating back
/// keeps the roundoff of the product near `‖L‖` rather than `‖T0‖ ‖L‖`,
/// which matters for stiff `T0`.
fn schur_product<T: Real>(q: &CMat<T>, u: &CMat<T>, l_hat: &CMat<T>) -> CMat<T> {
    matmul(&matmul(q, &matmul(u, l_hat)), &q.adjoint())
}

/// Forms `P± = T0 L±`, checks the projection algebra and extracts
/// orthonormal bases of `range(P±)`.
pub fn projections<T: Real>(
    h: &HamiltonianMatrices<T>,
    spec: ContourSpec,
    l_plus: ContourIntegral<T>,
    l_minus: ContourIntegral<T>,
    policy: &NumericPolicy,
) -> Result<DichotomyResult<T>> {
    let dim = h.t0.nrows();
    let id = identity::<T>(dim);
    let (q, u) = h.schur()?;
    let p_plus = schur_product(q, u, &l_plus.schur_value);
    let p_minus = schur_product(q, u, &l_minus.schur_value);
    let err_l = l_plus.error_estimate() + l_minus.error_estimate();
    let err_p = to_f64(h.t0_norm()) * err_l;
    let tolerance = policy.quadrature_bound(err_p);
    let t0_inv = inverse(&h.t0).ok_or(Error::Singular {
        lambda: Complex::new(0.0, 0.0),
    })?;
    let form = IndefiniteForm::<T>::new(h.n());
    let nrm = |m: &CMat<T>| to_f64(spectral_norm(m));
    let stable_count = h.stable_count()?;
    let trace_minus = to_f64(p_minus.trace().re);
    let basis_minus = orthonormal_range(&p_minus, stable_count)?;
    let basis_plus = orthonormal_range(&p_plus, dim - stable_count)?;
    let range_gap = range_defect(&l_minus.value, &basis_minus).max(range_defect(&l_plus.value, &basis_plus));
    let defects = ProjectionDefects {
        complement: nrm(&(&p_plus + &p_minus - &id)),
        idempotence_plus: nrm(&(&p_plus * &p_plus - &p_plus)),
        idempotence_minus: nrm(&(&p_minus * &p_minus - &p_minus)),
        l_product: nrm(&(&l_plus.value * &l_minus.value)).max(nrm(&(&l_minus.value * &l_plus.value))),
        l_sum: nrm(&(&l_plus.value + &l_minus.value - t0_inv)),
        invariance: nrm(&((&id - &p_minus) * &h.t0 * &p_minus)) / to_f64(h.t0_norm()).max(f64::MIN_POSITIVE),
        j_symmetry: nrm(&(&form.j * &l_plus.value + l_minus.value.adjoint() * &form.j)),
        range_gap,
        trace_minus,
        stable_count,
        trace_matches: (trace_minus.round() as i64 == stable_count as i64)
            && (trace_minus - stable_count as f64).abs() <= 1e-6,
        tolerance,
    };
    let bn = |m: &CMat<T>, s, d| to_f64(h.block_norm(m, s, d));
    let l_norms = LNorms {
        plus_v0: bn(&l_plus.value, BlockSpace::V0, BlockSpace::V0),
        minus_v0: bn(&l_minus.value, BlockSpace::V0, BlockSpace::V0),
        plus_v1: bn(&l_plus.value, BlockSpace::V1, BlockSpace::V1),
        minus_v1: bn(&l_minus.value, BlockSpace::V1, BlockSpace::V1),
        plus_v0_to_v1: bn(&l_plus.value, BlockSpace::V0, BlockSpace::V1),
        minus_v0_to_v1: bn(&l_minus.value, BlockSpace::V0, BlockSpace::V1),
    };
    let core = [
        defects.complement,
        defects.idempotence_plus,
        defects.idempotence_minus,
        defects.l_product,
        defects.l_sum,
    ];
    if let Some(&worst) = core.iter().find(|&&d| !(d <= tolerance)) {
        return Err(Error::Consistency {
            context: "dichotomy projection algebra",
            defect: worst,
            tolerance,
        });
    }
    Ok(DichotomyResult {
        spec,
        tail_bound: l_plus.tail_bound + l_minus.tail_bound,
        quadrature_error_estimate: err_l,
        projection_error_estimate: err_p,
        evaluations: l_plus.evaluations + l_minus.evaluations,
        l_plus: l_plus.value,
        l_minus: l_minus.value,
        p_plus,
        p_minus,
        basis_plus,
        basis_minus,
        defects,
        l_norms,
    })
}

/// Strip selection, both contour integrals and the projection checks.
pub fn dichotomy<T: Real>(h: &HamiltonianMatrices<T>, policy: &NumericPolicy) -> Result<DichotomyResult<T>> {
    let spec = choose_strip(h, policy)?;
    dichotomy_with(h, spec, policy)
}

pub fn dichotomy_with<T: Real>(
    h: &HamiltonianMatrices<T>,
    spec: ContourSpec,
    policy: &NumericPolicy,
) -> Result<DichotomyResult<T>> {
    let lp = contour_l(h, &spec, Sign::Plus, policy.max_evals)?;
    let lm = contour_l(h, &spec, Sign::Minus, policy.max_evals)?;
    projections(h, spec, lp, lm, policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Eigenvectors,
    OrderedSchur,
}

#[derive(Debug, Clone)]
pub struct OracleProjections<T: Real> {
    pub p_plus: CMat<T>,
    pub p_minus: CMat<T>,
    /// `min |Re λ|` over `σ(T0)`.
    pub eigen_gap: f64,
    pub eigvec_condition: f64,
    pub method: OracleMethod,
    pub stable_count: usize,
}

/// Condition number beyond which the eigenvector route is abandoned.
pub const EIGVEC_CONDITION_LIMIT: f64 = 1e6;

/// Spectral projections from the eigendecomposition of `T0`, or from an
/// ordered Schur form when the eigenvector basis is ill-conditioned.
pub fn oracle_projections<T: Real>(t0: &CMat<T>, policy: &NumericPolicy) -> Result<OracleProjections<T>> {
    let dim = t0.nrows();
    let (q, u) = schur(t0)?;
    let norm = to_f64(spectral_norm(t0));
    let eigs: Vec<Complex<T>> = (0..dim).map(|i| u[(i, i)]).collect();
    let eigen_gap = eigs.iter().map(|z| to_f64(z.re).abs()).fold(f64::INFINITY, f64::min);
    if dim > 0 && eigen_gap <= policy.axis_tol * norm {
        return Err(Error::NotDichotomous {
            eigenvalues: eigs
                .iter()
                .filter(|z| to_f64(z.re).abs() <= policy.axis_tol * norm)
                .map(|&z| c64(z))
                .collect(),
        });
    }
    let stable_count = eigs.iter().filter(|z| z.re < T::zero()).count();
    let y = triangular_eigenvectors(&u);
    let v = &q * y;
    let eigvec_condition = condition_number(&v);
    let id = identity::<T>(dim);
    if eigvec_condition <= EIGVEC_CONDITION_LIMIT {
        if let Some(vinv) = inverse(&v) {
            let mut vs = v.clone();
            for (j, z) in eigs.iter().enumerate() {
                if z.re > T::zero() {
                    vs.column_mut(j).fill(creal(T::zero()));
                }
            }
            let p_minus = vs * vinv;
            return Ok(OracleProjections {
                p_plus: &id - &p_minus,
                p_minus,
                eigen_gap,
                eigvec_condition,
                method: OracleMethod::Eigenvectors,
                stable_count,
            });
        }
    }
    let (mut q, mut u) = (q, u);
    let k = reorder_schur(&mut q, &mut u, |z| z.re < T::zero());
    let u11 = u.view((0, 0), (k, k)).into_owned();
    let u22 = u.view((k, k), (dim - k, dim - k)).into_owned();
    let u12 = u.view((0, k), (k, dim - k)).into_owned();
    let z = triangular_sylvester(&u11, &u22, &u12)?;
    let mut hat = CMat::zeros(dim, dim);
    hat.view_mut((0, 0), (k, k)).copy_from(&identity::<T>(k));
    hat.view_mut((0, k), (k, dim - k)).copy_from(&z);
    let p_minus = &q * hat * q.adjoint();
    Ok(OracleProjections {
        p_plus: &id - &p_minus,
        p_minus,
        eigen_gap,
        eigvec_condition,
        method: OracleMethod::OrderedSchur,
        stable_count: k,
    })
}

/// Splits `(1/π) ∫_{t_lo}^{∞} [(U - it)^{-1} + (U + it)^{-1}] dt` at `t_hi`:
/// the finite part by quadrature in `t = τ sinh(v)`, the remainder exactly via
/// `t = t_hi / w`, whose integrand `2 t_hi U (t_hi² + w² U²)^{-1}` is smooth on
/// `[0, 1]`.
fn axis_integral<T: Real>(
    u: &CMat<T>,
    t_lo: f64,
    t_hi: f64,
    tau: f64,
    opts: &QuadratureOptions,
) -> Result<(CMat<T>, CMat<T>, f64, usize)> {
    let dim = u.nrows();
    let pi = std::f64::consts::PI;
    let finite = |v: T| -> CMat<T> {
        let vf = to_f64(v);
        let t = tau * vf.sinh();
        let jac = tau * vf.cosh() / pi;
        let it = cplx(T::zero(), lit::<T>(t));
        match (shifted_triangular_inverse(u, it), shifted_triangular_inverse(u, -it)) {
            (Some(a), Some(b)) => (a + b) * creal(lit::<T>(jac)),
            _ => nan_matrix(dim),
        }
    };
    let q1 = integrate(finite, lit((t_lo / tau).asinh()), lit((t_hi / tau).asinh()), opts)?;
    let u2 = u * u;
    let th: T = lit(t_hi);
    let tail = |w: T| -> CMat<T> {
        let m = &u2 * creal(w * w);
        match shifted_triangular_inverse(&m, creal(-(th * th))) {
            Some(inv) => u * inv * creal(lit::<T>(2.0 / pi) * th),
            None => nan_matrix(dim),
        }
    };
    let q2 = integrate(tail, T::zero(), T::one(), opts)?;
    if !is_finite(&q1.value) || !is_finite(&q2.value) {
        return Err(Error::NotDichotomous {
            eigenvalues: Vec::new(),
        });
    }
    Ok((
        q1.value,
        q2.value,
        q1.error_estimate + q2.error_estimate,
        q1.evaluations + q2.evaluations,
    ))
}

#[derive(Debug, Clone)]
pub struct PrincipalValue<T: Real> {
    /// `(1/πi) ∫_{-i t_max}^{i t_max} (T0 - λ)^{-1} dλ`.
    pub truncated: CMat<T>,
    /// Remainder of the symmetric integral beyond `t_max`.
    pub tail: CMat<T>,
    /// `truncated + tail`, the principal value at infinity.
    pub value: CMat<T>,
    /// Leading-order size `2‖T0‖ / (π t_max)` of the remainder.
    pub truncation_bound: f64,
    pub quadrature_error: f64,
    pub evaluations: usize,
}

/// Principal value of `(1/πi) ∫_{iℝ} (T0 - λ)^{-1} dλ`, which equals `P+ - P-`.
pub fn principal_value_difference<T: Real>(
    h: &HamiltonianMatrices<T>,
    spec: &ContourSpec,
    t_max: f64,
    policy: &NumericPolicy,
) -> Result<PrincipalValue<T>> {
    let axis = h.axis_eigenvalues(policy.axis_tol)?;
    if !axis.is_empty() {
        return Err(Error::NotDichotomous {
            eigenvalues: axis.iter().map(|&z| c64(z)).collect(),
        });
    }
    if !(t_max > 0.0) {
        return Err(Error::Parameter(format!(
            "principal-value height must be positive, got {t_max}"
        )));
    }
    let (q, u) = h.schur()?;
    let opts = QuadratureOptions::new(spec.rule, spec.abs_tol, policy.max_evals);
    let (trunc, tail, err, evals) = axis_integral(u, 0.0, t_max, spec.h, &opts)?;
    let truncated = q * trunc * q.adjoint();
    let tail = q * tail * q.adjoint();
    Ok(PrincipalValue {
        value: &truncated + &tail,
        truncated,
        tail,
        truncation_bound: 2.0 * to_f64(h.t0_norm()) / (std::f64::consts::PI * t_max),
        quadrature_error: err,
        evaluations: evals,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SqReport {
    pub rho: f64,
    /// `‖(PV part + K) - (Q0+ - Q0-)‖`.
    pub defect: f64,
    pub k1_norm: f64,
    pub k2_norm: f64,
    pub quadrature_error: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Semicircle identity for the canonical projections of `S0 = diag(A, -A^H)`:
/// `Q0+ - Q0- = (1/πi) PV ∫_{γ1} (S0 - λ)^{-1} dλ + diag(K1, K2)` with `γ1`
/// the imaginary axis outside the disc of radius `ρ`.
pub fn sq_correction_check<T: Real>(
    h: &HamiltonianMatrices<T>,
    spec: &ContourSpec,
    policy: &NumericPolicy,
) -> Result<SqReport> {
    let n = h.n();
    let a = h.scale.base();
    let (qa, ua) = schur(a)?;
    let eig_a: Vec<Complex<T>> = (0..n).map(|i| ua[(i, i)]).collect();
    if let Some(bad) = eig_a.iter().find(|z| !(z.re < T::zero())) {
        return Err(Error::Precondition(format!(
            "semicircle identity needs σ(A) in the open left half-plane; found {:?}",
            c64(*bad)
        )));
    }
    let min_mod = eig_a
        .iter()
        .map(|&z| to_f64(crate::linalg::modulus(z)))
        .fold(f64::INFINITY, f64::min);
    let rho = spec.rho.min(0.5 * min_mod);
    let opts = QuadratureOptions::new(spec.rule, spec.abs_tol, policy.max_evals);
    let (qs, us) = h.schur_s0()?;
    let t_hi = policy.pv_t_max.max(10.0 * rho);
    let (pv_fin, pv_tail, err_pv, _) = axis_integral(us, rho, t_hi, rho, &opts)?;
    let pv = qs * (pv_fin + pv_tail) * qs.adjoint();

    let pi = std::f64::consts::PI;
    let rho_t: T = lit(rho);
    let k1_hat = integrate(
        |th: T| {
            let z = cplx(rho_t * th.cos(), rho_t * th.sin());
            match shifted_triangular_inverse(&ua, z) {
                Some(r) => r * (z / creal(lit::<T>(pi))),
                None => nan_matrix(n),
            }
        },
        lit(-0.5 * pi),
        lit(0.5 * pi),
        &opts,
    )?;
    let b = -a.adjoint();
    let (qb, ub) = schur(&b)?;
    let k2_hat = integrate(
        |th: T| {
            let z = cplx(rho_t * th.cos(), -(rho_t * th.sin()));
            match shifted_triangular_inverse(&ub, z) {
                Some(r) => r * (-z / creal(lit::<T>(pi))),
                None => nan_matrix(n),
            }
        },
        lit(0.5 * pi),
        lit(1.5 * pi),
        &opts,
    )?;
    let k1 = &qa * k1_hat.value * qa.adjoint();
    let k2 = &qb * k2_hat.value * qb.adjoint();
    let rhs = pv + block_diag(&k1, &k2);
    let lhs = block_diag(&(-identity::<T>(n)), &identity::<T>(n));
    let defect = to_f64(spectral_norm(&(rhs - lhs)));
    let quadrature_error = err_pv + k1_hat.error_estimate + k2_hat.error_estimate;
    let tolerance = policy.identity_tol.max(10.0 * quadrature_error);
    Ok(SqReport {
        rho,
        defect,
        k1_norm: to_f64(spectral_norm(&k1)),
        k2_norm: to_f64(spectral_norm(&k2)),
        quadrature_error,
        tolerance,
        holds: defect <= tolerance,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IndependenceReport {
    pub h: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Compares `P-` computed on the lines `Re λ = ±h` and `Re λ = ±h/2`.
pub fn contour_independence<T: Real>(
    h: &HamiltonianMatrices<T>,
    spec: &ContourSpec,
    p_minus: &CMat<T>,
    policy: &NumericPolicy,
) -> Result<IndependenceReport> {
    let half = ContourSpec {
        h: 0.5 * spec.h,
        ..*spec
    };
    let lm = contour_l(h, &half, Sign::Minus, policy.max_evals)?;
    let (q, u) = h.schur()?;
    let other = schur_product(q, u, &lm.schur_value);
    let difference = to_f64(spectral_norm(&(other - p_minus)));
    let tolerance = 10.0 * spec.abs_tol;
    Ok(IndependenceReport {
        h: spec.h,
        difference,
        tolerance,
        holds: difference <= tolerance,
    })
}

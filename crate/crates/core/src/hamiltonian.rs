//! The Hamiltonian `T0 = [[A, -B B^H], [-C^H C, -A^H]]`, its split
//! `T0 = S0 + R`, block geometries and the numerical certificates built on
//! them.
//!
//! `T0` and the part `T` of it in `V = H × H` are the same matrix; which
//! operator is meant is decided by the [`BlockSpace`] used to measure it.

use std::sync::OnceLock;

use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert_scale::{HilbertScale, Side, SpaceTag};
use crate::linalg::{
    block2, block_diag, c64, condition_number, cplx, creal, distinct_eigenvalues, identity, is_finite, lit,
    match_spectra, matmul, min_singular_value, modulus, schur, shift, shifted_triangular_inverse, spectral_norm,
    to_f64, CMat, CVec, Real,
};
use crate::policy::NumericPolicy;

/// Control system `(A, B, C)` with unboundedness exponents: `B ∈ L(U, H_{-r})`
/// and `C ∈ L(H_s^{(*)}, Y)`.
#[derive(Debug, Clone)]
pub struct SystemData<T: Real> {
    pub a: CMat<T>,
    pub b: CMat<T>,
    pub c: CMat<T>,
    pub r: f64,
    pub s: f64,
    pub label: String,
}

impl<T: Real> SystemData<T> {
    pub fn new(a: CMat<T>, b: CMat<T>, c: CMat<T>, r: f64, s: f64, label: impl Into<String>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::dim(
                "system matrix A",
                "square",
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        if b.nrows() != n {
            return Err(Error::dim("input matrix B rows", n, b.nrows()));
        }
        if c.ncols() != n {
            return Err(Error::dim("output matrix C columns", n, c.ncols()));
        }
        if !(r >= 0.0 && s >= 0.0) {
            return Err(Error::Parameter(format!(
                "exponents must be nonnegative, got r = {r}, s = {s}"
            )));
        }
        if r + s >= 1.0 {
            return Err(Error::Parameter(format!("need r + s < 1, got r + s = {}", r + s)));
        }
        if !(is_finite(&a) && is_finite(&b) && is_finite(&c)) {
            return Err(Error::Parameter("system matrices contain non-finite entries".into()));
        }
        Ok(SystemData {
            a,
            b,
            c,
            r,
            s,
            label: label.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// `B B^H`.
    pub fn control_gram(&self) -> CMat<T> {
        &self.b * self.b.adjoint()
    }

    /// `C^H C`.
    pub fn observation_gram(&self) -> CMat<T> {
        self.c.adjoint() * &self.c
    }

    /// The same system in another scalar type.
    pub fn cast<U: Real>(&self) -> SystemData<U> {
        let conv = |m: &CMat<T>| m.map(|z| cplx(lit::<U>(to_f64(z.re)), lit::<U>(to_f64(z.im))));
        SystemData {
            a: conv(&self.a),
            b: conv(&self.b),
            c: conv(&self.c),
            r: self.r,
            s: self.s,
            label: self.label.clone(),
        }
    }
}

/// Block geometries on `H × H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSpace {
    /// `V0 = H_{-r} × H_{-s}^{(*)}`.
    V0,
    /// `V1 = H_s^{(*)} × H_r`.
    V1,
    /// `V = H × H`.
    V,
}

impl BlockSpace {
    /// Scale tags of the two components for exponents `(r, s)`.
    pub fn tags(self, r: f64, s: f64) -> Result<(SpaceTag, SpaceTag)> {
        Ok(match self {
            BlockSpace::V0 => (SpaceTag::plain(-r)?, SpaceTag::star(-s)?),
            BlockSpace::V1 => (SpaceTag::star(s)?, SpaceTag::plain(r)?),
            BlockSpace::V => (SpaceTag::pivot(Side::Plain), SpaceTag::pivot(Side::Star)),
        })
    }
}

/// Fundamental symmetries `J = [[0, -iI], [iI, 0]]` and `J̃ = [[0, I], [I, 0]]`.
#[derive(Debug, Clone)]
pub struct IndefiniteForm<T: Real> {
    pub j: CMat<T>,
    pub jtilde: CMat<T>,
}

impl<T: Real> IndefiniteForm<T> {
    pub fn new(n: usize) -> Self {
        let z = CMat::zeros(n, n);
        let i = identity::<T>(n);
        let iu = &i * cplx(T::zero(), T::one());
        IndefiniteForm {
            j: block2(&z, &(-&iu), &iu, &z),
            jtilde: block2(&z, &i, &i, &z),
        }
    }
}

#[derive(Debug, Clone)]
struct Weights<T: Real> {
    fwd: CMat<T>,
    inv: CMat<T>,
}

#[derive(Debug)]
pub struct HamiltonianMatrices<T: Real> {
    pub t0: CMat<T>,
    pub s0: CMat<T>,
    /// Off-diagonal coupling `R = T0 - S0`.
    pub coupling: CMat<T>,
    pub scale: HilbertScale<T>,
    pub r: f64,
    pub s: f64,
    v0: Weights<T>,
    v1: Weights<T>,
    spectrum: OnceLock<Vec<Complex<T>>>,
    schur_t0: OnceLock<(CMat<T>, CMat<T>)>,
    schur_s0: OnceLock<(CMat<T>, CMat<T>)>,
    t0_norm: T,
}

impl<T: Real> Clone for HamiltonianMatrices<T> {
    fn clone(&self) -> Self {
        HamiltonianMatrices {
            t0: self.t0.clone(),
            s0: self.s0.clone(),
            coupling: self.coupling.clone(),
            scale: self.scale.clone(),
            r: self.r,
            s: self.s,
            v0: self.v0.clone(),
            v1: self.v1.clone(),
            spectrum: self.spectrum.clone(),
            schur_t0: self.schur_t0.clone(),
            schur_s0: self.schur_s0.clone(),
            t0_norm: self.t0_norm,
        }
    }
}

/// Builds `T0`, `S0`, `R` and the block weights of `V0` and `V1`.
pub fn assemble<T: Real>(sys: &SystemData<T>) -> Result<HamiltonianMatrices<T>> {
    if sys.r + sys.s >= 1.0 {
        return Err(Error::Parameter(format!(
            "need r + s < 1, got r + s = {}",
            sys.r + sys.s
        )));
    }
    let a = &sys.a;
    let ah = a.adjoint();
    let bb = sys.control_gram();
    let cc = sys.observation_gram();
    let t0 = block2(a, &(-&bb), &(-&cc), &(-&ah));
    let s0 = block_diag(a, &(-&ah));
    let coupling = &t0 - &s0;
    let scale = HilbertScale::new(a)?;
    let weights = |space: BlockSpace| -> Result<Weights<T>> {
        let (t1, t2) = space.tags(sys.r, sys.s)?;
        let fwd = block_diag(&scale.lambda_power(t1), &scale.lambda_power(t2));
        let inv = block_diag(
            &scale.power_raw(t1.side(), -t1.exponent()),
            &scale.power_raw(t2.side(), -t2.exponent()),
        );
        Ok(Weights { fwd, inv })
    };
    let v0 = weights(BlockSpace::V0)?;
    let v1 = weights(BlockSpace::V1)?;
    let t0_norm = spectral_norm(&t0);
    Ok(HamiltonianMatrices {
        t0,
        s0,
        coupling,
        scale,
        r: sys.r,
        s: sys.s,
        v0,
        v1,
        spectrum: OnceLock::new(),
        schur_t0: OnceLock::new(),
        schur_s0: OnceLock::new(),
        t0_norm,
    })
}

impl<T: Real> HamiltonianMatrices<T> {
    pub fn n(&self) -> usize {
        self.scale.dim()
    }

    pub fn t0_norm(&self) -> T {
        self.t0_norm
    }

    /// Block weight `W` with `‖v‖_space = ‖W v‖`.
    pub fn weight(&self, space: BlockSpace) -> CMat<T> {
        match space {
            BlockSpace::V0 => self.v0.fwd.clone(),
            BlockSpace::V1 => self.v1.fwd.clone(),
            BlockSpace::V => identity(2 * self.n()),
        }
    }

    pub fn weight_inverse(&self, space: BlockSpace) -> CMat<T> {
        match space {
            BlockSpace::V0 => self.v0.inv.clone(),
            BlockSpace::V1 => self.v1.inv.clone(),
            BlockSpace::V => identity(2 * self.n()),
        }
    }

    /// `W_dst M W_src^{-1}`.
    pub fn weighted(&self, m: &CMat<T>, src: BlockSpace, dst: BlockSpace) -> CMat<T> {
        let left = match dst {
            BlockSpace::V0 => Some(&self.v0.fwd),
            BlockSpace::V1 => Some(&self.v1.fwd),
            BlockSpace::V => None,
        };
        let right = match src {
            BlockSpace::V0 => Some(&self.v0.inv),
            BlockSpace::V1 => Some(&self.v1.inv),
            BlockSpace::V => None,
        };
        match (left, right) {
            (Some(l), Some(r)) => matmul(&matmul(l, m), r),
            (Some(l), None) => matmul(l, m),
            (None, Some(r)) => matmul(m, r),
            (None, None) => m.clone(),
        }
    }

    /// Operator norm of a `2n × 2n` matrix as a map `src → dst`.
    pub fn block_norm(&self, m: &CMat<T>, src: BlockSpace, dst: BlockSpace) -> T {
        spectral_norm(&self.weighted(m, src, dst))
    }

    /// Condition number of `m` as an operator on `space`.
    pub fn block_condition(&self, m: &CMat<T>, space: BlockSpace) -> f64 {
        condition_number(&self.weighted(m, space, space))
    }

    pub fn spectrum(&self) -> Result<&[Complex<T>]> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let (_, u) = self.schur()?;
        let eigs: Vec<Complex<T>> = (0..u.nrows()).map(|i| u[(i, i)]).collect();
        Ok(self.spectrum.get_or_init(|| eigs))
    }

    /// Complex Schur form `T0 = Q U Q^H`, computed once.
    pub fn schur(&self) -> Result<&(CMat<T>, CMat<T>)> {
        if let Some(s) = self.schur_t0.get() {
            return Ok(s);
        }
        let f = schur(&self.t0)?;
        Ok(self.schur_t0.get_or_init(|| f))
    }

    /// Schur form of `S0` assembled from those of `A` and `-A^H`.
    pub fn schur_s0(&self) -> Result<&(CMat<T>, CMat<T>)> {
        if let Some(s) = self.schur_s0.get() {
            return Ok(s);
        }
        let a = self.scale.base();
        let (qa, ua) = schur(a)?;
        let (qb, ub) = schur(&(-a.adjoint()))?;
        let f = (block_diag(&qa, &qb), block_diag(&ua, &ub));
        Ok(self.schur_s0.get_or_init(|| f))
    }

    /// Eigenvalues with `|Re λ| ≤ axis_tol·‖T0‖`.
    pub fn axis_eigenvalues(&self, axis_tol: f64) -> Result<Vec<Complex<T>>> {
        let tol = lit::<T>(axis_tol) * self.t0_norm;
        Ok(self.spectrum()?.iter().copied().filter(|z| z.re.abs() <= tol).collect())
    }

    pub fn stable_count(&self) -> Result<usize> {
        Ok(self.spectrum()?.iter().filter(|z| z.re < T::zero()).count())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PbhMargin {
    pub eigenvalue: Complex<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PbhReport {
    pub holds: bool,
    pub threshold: f64,
    pub margins: Vec<PbhMargin>,
}

fn pbh<T: Real>(a: &CMat<T>, other: &CMat<T>, stacked_rows: bool, tol: f64) -> Result<PbhReport> {
    let n = a.nrows();
    let threshold = tol * to_f64(spectral_norm(a) + spectral_norm(other));
    let eigs = crate::linalg::eigenvalues(a)?;
    let reps = distinct_eigenvalues(&eigs, 1e-8);
    let mut margins = Vec::with_capacity(reps.len());
    for lambda in reps {
        let shifted = shift(a, lambda);
        let compound = if stacked_rows {
            let mut m = CMat::zeros(n + other.nrows(), n);
            m.view_mut((0, 0), (n, n)).copy_from(&shifted);
            m.view_mut((n, 0), (other.nrows(), n)).copy_from(other);
            m
        } else {
            let mut m = CMat::zeros(n, n + other.ncols());
            m.view_mut((0, 0), (n, n)).copy_from(&shifted);
            m.view_mut((0, n), (n, other.ncols())).copy_from(other);
            m
        };
        margins.push(PbhMargin {
            eigenvalue: c64(lambda),
            margin: to_f64(min_singular_value(&compound)),
        });
    }
    let holds = n == 0 || margins.iter().all(|m| m.margin > threshold);
    Ok(PbhReport {
        holds,
        threshold,
        margins,
    })
}

/// Hautus test: `rank [A - λ, B] = n` at every eigenvalue of `A`.
pub fn pbh_controllability<T: Real>(sys: &SystemData<T>, tol: f64) -> Result<PbhReport> {
    pbh(&sys.a, &sys.b, false, tol)
}

/// Hautus test: `rank [A - λ; C] = n` at every eigenvalue of `A`.
pub fn pbh_observability<T: Real>(sys: &SystemData<T>, tol: f64) -> Result<PbhReport> {
    pbh(&sys.a, &sys.c, true, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    /// Eigenvalues of `A` classified as imaginary.
    pub axis_eigenvalues_a: Vec<Complex<f64>>,
    /// Smallest singular values of `[A - it; C]` at those eigenvalues.
    pub observation_margins: Vec<f64>,
    /// Smallest singular values of `[A^H + it; B^H]`.
    pub control_margins: Vec<f64>,
    pub threshold: f64,
    pub condition_holds: bool,
    pub axis_eigenvalues_t0: Vec<Complex<f64>>,
    /// The condition holds exactly when `T0` has no imaginary eigenvalues.
    pub consistent: bool,
    /// Every imaginary eigenvalue of `T0` is an eigenvalue of `A`.
    pub inclusion_holds: bool,
}

/// Point-spectrum gap test: `ker(A - it) ∩ ker C = ker(A^H + it) ∩ ker B^H = {0}`
/// at every imaginary eigenvalue `it` of `A`, cross-checked against `σ(T0)`.
pub fn spectral_gap_check<T: Real>(sys: &SystemData<T>, policy: &NumericPolicy) -> Result<GapReport> {
    let h = assemble(sys)?;
    let n = sys.n();
    let anorm = spectral_norm(&sys.a);
    let axis_tol = lit::<T>(policy.axis_tol) * if anorm > T::zero() { anorm } else { T::one() };
    let eigs_a = crate::linalg::eigenvalues(&sys.a)?;
    let axis_a: Vec<Complex<T>> = distinct_eigenvalues(
        &eigs_a
            .into_iter()
            .filter(|z| z.re.abs() <= axis_tol)
            .collect::<Vec<_>>(),
        1e-8,
    );
    let threshold = policy.pbh_tol * to_f64(anorm + spectral_norm(&sys.b) + spectral_norm(&sys.c));
    let ah = sys.a.adjoint();
    let bh = sys.b.adjoint();
    let mut obs = Vec::new();
    let mut ctl = Vec::new();
    for &z in &axis_a {
        let it = cplx(T::zero(), z.im);
        let mut m1 = CMat::zeros(n + sys.p(), n);
        m1.view_mut((0, 0), (n, n)).copy_from(&shift(&sys.a, it));
        m1.view_mut((n, 0), (sys.p(), n)).copy_from(&sys.c);
        obs.push(to_f64(min_singular_value(&m1)));
        let mut m2 = CMat::zeros(n + sys.m(), n);
        m2.view_mut((0, 0), (n, n)).copy_from(&shift(&ah, -it));
        m2.view_mut((n, 0), (sys.m(), n)).copy_from(&bh);
        ctl.push(to_f64(min_singular_value(&m2)));
    }
    let condition_holds = obs.iter().chain(&ctl).all(|&m| m > threshold);
    let axis_t0 = h.axis_eigenvalues(policy.axis_tol)?;
    let incl_tol = lit::<T>(1e-8) * if h.t0_norm() > T::one() { h.t0_norm() } else { T::one() };
    let inclusion_holds = axis_t0
        .iter()
        .all(|&w| axis_a.iter().any(|&z| modulus(z - w) <= incl_tol));
    Ok(GapReport {
        axis_eigenvalues_a: axis_a.iter().map(|&z| c64(z)).collect(),
        observation_margins: obs,
        control_margins: ctl,
        threshold,
        condition_holds,
        consistent: condition_holds == axis_t0.is_empty(),
        inclusion_holds,
        axis_eigenvalues_t0: axis_t0.iter().map(|&z| c64(z)).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct JSymmetryReport {
    /// `‖J T0 + T0^H J‖ / ‖T0‖`.
    pub j_defect: f64,
    /// Largest sampled `Re⟨J̃ T0 v, v⟩ / (‖T0‖ ‖v‖²)`.
    pub max_dissipation: f64,
    pub tolerance: f64,
    pub holds: bool,
}

fn random_vector<T: Real>(rng: &mut ChaCha8Rng, n: usize) -> CVec<T> {
    CVec::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        cplx(lit(re), lit(im))
    })
}

/// Checks `J T0 = -T0^H J` and `Re⟨J̃ T0 v, v⟩ ≤ 0` on `samples` random vectors.
pub fn j_symmetry_check<T: Real>(
    h: &HamiltonianMatrices<T>,
    form: &IndefiniteForm<T>,
    samples: usize,
    seed: u64,
) -> JSymmetryReport {
    let norm = to_f64(h.t0_norm()).max(f64::MIN_POSITIVE);
    let j_defect = to_f64(spectral_norm(&(&form.j * &h.t0 + h.t0.adjoint() * &form.j))) / norm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jt = &form.jtilde * &h.t0;
    let mut max_dissipation = f64::NEG_INFINITY;
    for _ in 0..samples {
        let v: CVec<T> = random_vector(&mut rng, 2 * h.n());
        let q = to_f64(v.dotc(&(&jt * &v)).re);
        let vv = to_f64(v.norm_squared());
        max_dissipation = max_dissipation.max(q / (norm * vv));
    }
    let tolerance = 1e-12_f64.max(64.0 * to_f64(T::default_epsilon()));
    JSymmetryReport {
        j_defect,
        max_dissipation,
        tolerance,
        holds: j_defect <= tolerance && max_dissipation <= tolerance,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSymmetryReport {
    pub distance: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Matches `σ(T0)` with its reflection `λ ↦ -conj(λ)`.
pub fn spectrum_symmetry_check<T: Real>(h: &HamiltonianMatrices<T>) -> Result<SpectrumSymmetryReport> {
    let eigs = h.spectrum()?;
    let distance = to_f64(match_spectra(eigs, eigs, |z| -z.conj()));
    let tolerance = 1e-8 * to_f64(h.t0_norm()).max(f64::MIN_POSITIVE);
    Ok(SpectrumSymmetryReport {
        distance,
        tolerance,
        holds: distance <= tolerance,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SectorSample {
    pub lambda: Complex<f64>,
    pub norm: f64,
}

/// Sampled resolvent bound `‖(A - μ - λ)^{-1}‖ ≤ M / |λ|` on
/// `Σ_{π/2 + θ}` outside the disc of radius `ρ`. The certificate covers the
/// recorded samples only.
#[derive(Debug, Clone, Serialize)]
pub struct SectorEstimate {
    pub theta: f64,
    pub m: f64,
    pub rho: f64,
    pub mu: f64,
    pub certified_grid: Vec<SectorSample>,
}

/// Samples the two boundary rays of `Σ_{π/2+θ}`, the positive real ray and
/// the arc of radius `ρ`, from `ρ` up to `max(10‖A - μ‖, 10ρ)`.
pub fn certify_quasi_sectorial<T: Real>(
    a: &CMat<T>,
    theta: f64,
    mu: f64,
    rho: f64,
    density: usize,
) -> Result<SectorEstimate> {
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Parameter(format!("sector margin θ = {theta} not in (0, π/2)")));
    }
    if !(rho > 0.0) || density < 2 {
        return Err(Error::Parameter("need ρ > 0 and at least two samples per curve".into()));
    }
    let shifted = shift(a, creal(lit::<T>(mu)));
    let half_angle = std::f64::consts::FRAC_PI_2 + theta;
    let eigs = crate::linalg::eigenvalues(&shifted)?;
    let violating: Vec<Complex<f64>> = eigs
        .iter()
        .map(|&z| c64(z))
        .filter(|z| z.norm() >= rho * (1.0 - 1e-12) && z.arg().abs() <= half_angle)
        .collect();
    if !violating.is_empty() {
        return Err(Error::NotSectorial { eigenvalues: violating });
    }
    let outer = (10.0 * to_f64(spectral_norm(&shifted))).max(10.0 * rho);
    let mut grid = Vec::new();
    for k in 0..density {
        let rad = rho * (outer / rho).powf(k as f64 / (density - 1) as f64);
        for ang in [half_angle, -half_angle, 0.0] {
            grid.push(Complex::from_polar(rad, ang));
        }
        let ang = -half_angle + 2.0 * half_angle * k as f64 / (density - 1) as f64;
        grid.push(Complex::from_polar(rho, ang));
    }
    let floor = 1e-12 * to_f64(spectral_norm(&shifted)).max(1.0);
    let mut samples = Vec::with_capacity(grid.len());
    let mut m = 0.0f64;
    for lambda in grid {
        let lam = cplx(lit::<T>(lambda.re), lit::<T>(lambda.im));
        let res = shift(&shifted, lam);
        let smin = to_f64(min_singular_value(&res));
        if smin <= floor {
            let near: Vec<Complex<f64>> = eigs
                .iter()
                .map(|&z| c64(z))
                .filter(|z| (z - lambda).norm() <= floor.max(1e-9))
                .collect();
            return Err(Error::NotSectorial { eigenvalues: near });
        }
        let norm = 1.0 / smin;
        m = m.max(norm * lambda.norm());
        samples.push(SectorSample { lambda, norm });
    }
    Ok(SectorEstimate {
        theta,
        m,
        rho,
        mu,
        certified_grid: samples,
    })
}

/// Norm selector of the axis resolvent scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisNorm {
    V0Norm,
    VNorm,
    V0ToV1,
    V0ToV,
}

impl AxisNorm {
    pub fn spaces(self) -> (BlockSpace, BlockSpace) {
        match self {
            AxisNorm::V0Norm => (BlockSpace::V0, BlockSpace::V0),
            AxisNorm::VNorm => (BlockSpace::V, BlockSpace::V),
            AxisNorm::V0ToV1 => (BlockSpace::V0, BlockSpace::V1),
            AxisNorm::V0ToV => (BlockSpace::V0, BlockSpace::V),
        }
    }
}

/// Which resolvent the axis scan measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisOperator {
    /// `(T0 - it)^{-1}`.
    Hamiltonian,
    /// `(T0 - it)^{-1} - (S0 - it)^{-1}`.
    Difference,
    /// `R (S0 - it)^{-1}`.
    Perturbation,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AxisPoint {
    pub t: f64,
    pub norm: f64,
}

/// `(U - λ)^{-1}` for a Schur factor `U`, rejecting numerically singular shifts.
fn checked_triangular_inverse<T: Real>(u: &CMat<T>, lambda: Complex<T>, scale: T) -> Result<CMat<T>> {
    let inv = shifted_triangular_inverse(u, lambda)
        .filter(is_finite)
        .ok_or(Error::Singular { lambda: c64(lambda) })?;
    // ‖(M - λ)^{-1}‖ ≥ 1/σ_min, so a huge inverse flags a spectral point.
    let floor = lit::<T>(1e-12) * if scale > T::zero() { scale } else { T::one() };
    if inv.norm() * floor >= T::one() {
        return Err(Error::Singular { lambda: c64(lambda) });
    }
    Ok(inv)
}

/// `W_dst Q (U - λ)^{-1} Q^H W_src^{-1}` with the outer factors fixed.
struct SchurResolvent<'a, T: Real> {
    u: &'a CMat<T>,
    left: CMat<T>,
    right: CMat<T>,
}

impl<T: Real> SchurResolvent<'_, T> {
    fn at(&self, lambda: Complex<T>, scale: T) -> Result<CMat<T>> {
        let inv = checked_triangular_inverse(self.u, lambda, scale)?;
        Ok(matmul(&matmul(&self.left, &inv), &self.right))
    }
}

/// Operator norms of the selected resolvent at `λ = it` for each `t`.
pub fn axis_resolvent_scan<T: Real>(
    h: &HamiltonianMatrices<T>,
    which: AxisNorm,
    op: AxisOperator,
    t_values: &[f64],
) -> Result<Vec<AxisPoint>> {
    axis_resolvent_rows(h, which, op, t_values)?.into_iter().collect()
}

/// Like [`axis_resolvent_scan`], with one result per grid point so that a
/// spectral point fails only its own row.
pub fn axis_resolvent_rows<T: Real>(
    h: &HamiltonianMatrices<T>,
    which: AxisNorm,
    op: AxisOperator,
    t_values: &[f64],
) -> Result<Vec<Result<AxisPoint>>> {
    let (src, dst) = which.spaces();
    let scale = h.t0_norm();
    let dim = h.t0.nrows();
    let id = identity::<T>(dim);
    fn resolvent<'a, T: Real>(
        h: &HamiltonianMatrices<T>,
        (q, u): &'a (CMat<T>, CMat<T>),
        pre: &CMat<T>,
        src: BlockSpace,
        dst: BlockSpace,
    ) -> SchurResolvent<'a, T> {
        SchurResolvent {
            u,
            left: h.weighted(&matmul(pre, q), BlockSpace::V, dst),
            right: h.weighted(&q.adjoint(), src, BlockSpace::V),
        }
    }
    let resolvent = |f, pre: &CMat<T>| resolvent(h, f, pre, src, dst);
    let (first, second) = match op {
        AxisOperator::Hamiltonian => (resolvent(h.schur()?, &id), None),
        AxisOperator::Difference => (resolvent(h.schur()?, &id), Some(resolvent(h.schur_s0()?, &id))),
        AxisOperator::Perturbation => (resolvent(h.schur_s0()?, &h.coupling), None),
    };
    Ok(t_values
        .iter()
        .map(|&t| {
            let lambda = cplx(T::zero(), lit::<T>(t));
            let mut m = first.at(lambda, scale)?;
            if let Some(s) = &second {
                m -= s.at(lambda, scale)?;
            }
            Ok(AxisPoint {
                t,
                norm: to_f64(spectral_norm(&m)),
            })
        })
        .collect())
}

/// Smallest point `t` of a geometric grid on `[t_lo, t_hi]` beyond which
/// `‖R (S0 - it)^{-1}‖_{V0} ≤ 1/2` at every grid point.
pub fn estimate_rho1<T: Real>(h: &HamiltonianMatrices<T>, t_lo: f64, t_hi: f64, points: usize) -> Result<f64> {
    if !(t_lo > 0.0 && t_hi > t_lo) || points < 2 {
        return Err(Error::Parameter(
            "need 0 < t_lo < t_hi and at least two grid points".into(),
        ));
    }
    let grid = geometric_grid(t_lo, t_hi, points);
    let scan = axis_resolvent_scan(h, AxisNorm::V0Norm, AxisOperator::Perturbation, &grid)?;
    let last_bad = scan.iter().rposition(|p| p.norm > 0.5);
    match last_bad {
        None => Ok(grid[0]),
        Some(i) if i + 1 < grid.len() => Ok(grid[i + 1]),
        Some(_) => Err(Error::Precondition(format!(
            "perturbation bound 1/2 not reached on [{t_lo}, {t_hi}]"
        ))),
    }
}

/// `points` values spaced geometrically on `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|k| lo * (hi / lo).powf(k as f64 / (points - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, c: f64) -> SystemData<f64> {
        let m = |v: f64| CMat::from_element(1, 1, creal(v));
        SystemData::new(m(a), m(b), m(c), 0.0, 0.0, "scalar").unwrap()
    }

    fn diag(vals: &[f64]) -> CMat<f64> {
        CMat::from_fn(
            vals.len(),
            vals.len(),
            |i, j| if i == j { creal(vals[i]) } else { creal(0.0) },
        )
    }

    #[test]
    fn scalar_hamiltonian_entries() {
        let h = assemble(&scalar(-1.0, 1.0, 1.0)).unwrap();
        let expect = CMat::from_row_slice(2, 2, &[creal(-1.0), creal(-1.0), creal(-1.0), creal(1.0)]);
        assert_eq!(h.t0, expect);
        assert_eq!(h.t0, &h.s0 + &h.coupling);
        let mut eigs: Vec<f64> = h.spectrum().unwrap().iter().map(|z| z.re).collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((eigs[0] + 2f64.sqrt()).abs() < 1e-14 && (eigs[1] - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn exponent_sum_rejected() {
        let m = CMat::<f64>::identity(1, 1);
        assert!(SystemData::new(m.clone(), m.clone(), m, 0.5, 0.5, "bad").is_err());
    }

    #[test]
    fn uncoupled_hamiltonian_is_split() {
        let z = CMat::<f64>::zeros(2, 1);
        let sys = SystemData::new(diag(&[-1.0, -3.0]), z.clone(), z.transpose(), 0.1, 0.2, "").unwrap();
        let h = assemble(&sys).unwrap();
        assert_eq!(h.t0, h.s0);
        let mut eigs: Vec<f64> = h.spectrum().unwrap().iter().map(|z| z.re).collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (e, x) in eigs.iter().zip([-3.0, -1.0, 1.0, 3.0]) {
            assert!((e - x).abs() < 1e-14);
        }
    }

    #[test]
    fn kalman_rank_agrees_with_pbh() {
        let a = diag(&[-1.0, -2.0]);
        let b1 = CMat::from_column_slice(2, 1, &[creal(1.0), creal(1.0)]);
        let b0 = CMat::from_column_slice(2, 1, &[creal(1.0), creal(0.0)]);
        for (b, expect) in [(b1, true), (b0, false)] {
            // Kalman matrix [B, AB] has full rank exactly when det ≠ 0
            let ab = &a * &b;
            let det = b[(0, 0)] * ab[(1, 0)] - b[(1, 0)] * ab[(0, 0)];
            assert_eq!(det.norm() > 1e-12, expect);
            let sys = SystemData::new(a.clone(), b.clone(), b.adjoint(), 0.0, 0.0, "").unwrap();
            assert_eq!(pbh_controllability(&sys, 1e-10).unwrap().holds, expect);
            assert_eq!(pbh_observability(&sys, 1e-10).unwrap().holds, expect);
        }
        let z = CMat::zeros(2, 1);
        let sys = SystemData::new(a, z.clone(), z.transpose(), 0.0, 0.0, "").unwrap();
        assert!(!pbh_controllability(&sys, 1e-10).unwrap().holds);
        assert!(!pbh_observability(&sys, 1e-10).unwrap().holds);
    }

    #[test]
    fn imaginary_scalar_gap() {
        let a = CMat::from_element(1, 1, cplx(0.0, 2.0));
        let one = CMat::from_element(1, 1, creal(1.0));
        let policy = NumericPolicy::default();
        let ok = SystemData::new(a.clone(), one.clone(), one, 0.0, 0.0, "").unwrap();
        let rep = spectral_gap_check(&ok, &policy).unwrap();
        assert!(rep.condition_holds && rep.consistent && rep.axis_eigenvalues_t0.is_empty());
        let zero = CMat::zeros(1, 1);
        let bad = SystemData::new(a, zero.clone(), zero, 0.0, 0.0, "").unwrap();
        let rep = spectral_gap_check(&bad, &policy).unwrap();
        assert!(!rep.condition_holds && rep.consistent && rep.inclusion_holds);
        assert!(rep
            .axis_eigenvalues_t0
            .iter()
            .all(|z| (z - Complex::new(0.0, 2.0)).norm() < 1e-12));
    }

    #[test]
    fn j_identities_scalar() {
        let h = assemble(&scalar(-1.0, 1.0, 1.0)).unwrap();
        let rep = j_symmetry_check(&h, &IndefiniteForm::new(1), 50, 1);
        assert_eq!(rep.j_defect, 0.0);
        assert!(rep.holds);
    }

    #[test]
    fn indefinite_forms_are_involutions() {
        let f = IndefiniteForm::<f64>::new(3);
        let i6 = identity::<f64>(6);
        assert_eq!(&f.j * &f.j, i6);
        assert_eq!(&f.jtilde * &f.jtilde, i6);
        assert_eq!(f.j.adjoint(), f.j);
    }

    #[test]
    fn sector_constants() {
        let est = certify_quasi_sectorial(&diag(&[-1.0]), std::f64::consts::FRAC_PI_4, 0.0, 0.5, 20).unwrap();
        for s in est
            .certified_grid
            .iter()
            .filter(|s| s.lambda.im == 0.0 && s.lambda.re > 0.0)
        {
            assert!(s.norm * s.lambda.norm() <= 1.0 + 1e-14);
        }
        let theta = 0.3;
        let herm = certify_quasi_sectorial(&diag(&[-1.0, -5.0, -40.0]), theta, 0.0, 0.5, 60).unwrap();
        assert!(herm.m <= 1.0 / theta.cos() + 1e-12);
        assert!(herm.m >= 0.9 / theta.cos());
        assert!(certify_quasi_sectorial(&diag(&[-1.0, 1.0]), theta, 0.0, 0.5, 20).is_err());
        assert!(certify_quasi_sectorial(&diag(&[-1.0, 1.0]), theta, 2.0, 0.5, 20).is_ok());
    }

    #[test]
    fn scalar_axis_resolvent_closed_form() {
        let h = assemble(&scalar(-1.0, 1.0, 1.0)).unwrap();
        let pts = axis_resolvent_scan(&h, AxisNorm::V0Norm, AxisOperator::Hamiltonian, &[1.0]).unwrap();
        let m =
            CMat::from_row_slice(2, 2, &[cplx(-1.0, -1.0), creal(-1.0), creal(-1.0), cplx(1.0, -1.0)]) / creal(-3.0);
        assert!((pts[0].norm - spectral_norm(&m)).abs() < 1e-14);
    }

    #[test]
    fn uncoupled_scan_is_blockwise_max() {
        let a = CMat::from_row_slice(2, 2, &[creal(-1.0), creal(4.0), creal(0.0), creal(-2.0)]);
        let z = CMat::zeros(2, 1);
        let sys = SystemData::new(a.clone(), z.clone(), z.transpose(), 0.0, 0.0, "").unwrap();
        let h = assemble(&sys).unwrap();
        let ts = [0.5, 3.0, 20.0];
        let pts = axis_resolvent_scan(&h, AxisNorm::V0Norm, AxisOperator::Hamiltonian, &ts).unwrap();
        for (p, &t) in pts.iter().zip(&ts) {
            let it = cplx(0.0, t);
            let n1 = spectral_norm(&crate::linalg::resolvent(&a, it).unwrap());
            let n2 = spectral_norm(&crate::linalg::resolvent(&(-a.adjoint()), it).unwrap());
            assert!((p.norm - n1.max(n2)).abs() < 1e-13 * p.norm);
        }
    }
}

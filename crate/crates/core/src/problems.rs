//! Test systems: scalar closed forms, seeded random stable and shifted
//! systems, a finite-difference heat equation with scale-modelled unbounded
//! control and observation, and a fixture with an imaginary eigenvalue of `A`.
//!
//! Everything is generated in `f64` from a `ChaCha8` stream and cast to the
//! working scalar at the end, so a spec produces bit-identical systems.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{certify_quasi_sectorial, pbh_controllability, pbh_observability, SystemData};
use crate::hilbert_scale::{HilbertScale, SpaceTag};
use crate::linalg::{cast_from_f64, cplx, creal, identity, spectral_norm, CMat, Real};

const MAX_RETRIES: usize = 50;
const PBH_TOL: f64 = 1e-10;

fn default_margin() -> f64 {
    0.5
}

fn default_mu() -> f64 {
    1.0
}

fn default_control_node() -> f64 {
    0.0
}

fn default_obs_node() -> f64 {
    1.0
}

fn default_omega() -> f64 {
    1.0
}

/// Declarative description of a test system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `A = -a`, `B = b`, `C = c`.
    Scalar {
        a: f64,
        b: f64,
        c: f64,
        #[serde(default)]
        r: f64,
        #[serde(default)]
        s: f64,
    },
    RandomStable {
        n: usize,
        m: usize,
        p: usize,
        #[serde(default)]
        r: f64,
        #[serde(default)]
        s: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_margin")]
        margin: f64,
    },
    RandomShifted {
        n: usize,
        m: usize,
        p: usize,
        #[serde(default)]
        r: f64,
        #[serde(default)]
        s: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_mu")]
        mu: f64,
        k_unstable: usize,
    },
    Heat1d {
        n: usize,
        #[serde(default)]
        r: f64,
        #[serde(default)]
        s: f64,
        #[serde(default = "default_control_node")]
        control_node: f64,
        #[serde(default = "default_obs_node")]
        obs_node: f64,
    },
    AxisEigenDetect {
        base_n: usize,
        #[serde(default)]
        r: f64,
        #[serde(default)]
        s: f64,
        #[serde(default = "default_omega")]
        omega: f64,
        #[serde(default)]
        zero_observation: bool,
    },
}

impl ProblemSpec {
    pub fn exponents(&self) -> (f64, f64) {
        match *self {
            ProblemSpec::Scalar { r, s, .. }
            | ProblemSpec::RandomStable { r, s, .. }
            | ProblemSpec::RandomShifted { r, s, .. }
            | ProblemSpec::Heat1d { r, s, .. }
            | ProblemSpec::AxisEigenDetect { r, s, .. } => (r, s),
        }
    }

    /// Replaces the seed of the random kinds.
    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self {
            ProblemSpec::RandomStable { seed, .. } | ProblemSpec::RandomShifted { seed, .. } => *seed = new_seed,
            _ => {}
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (r, s) = self.exponents();
        if !(r >= 0.0 && s >= 0.0 && r + s < 1.0) {
            return Err(Error::Parameter(format!(
                "need r, s ≥ 0 and r + s < 1, got r = {r}, s = {s}"
            )));
        }
        let dims_ok = match *self {
            ProblemSpec::Scalar { .. } => true,
            ProblemSpec::RandomStable { n, m, p, .. } | ProblemSpec::RandomShifted { n, m, p, .. } => {
                n >= 1 && m >= 1 && p >= 1
            }
            ProblemSpec::Heat1d { n, .. } => n >= 3,
            ProblemSpec::AxisEigenDetect { base_n, .. } => base_n >= 2,
        };
        if !dims_ok {
            return Err(Error::Parameter(format!("dimensions out of range in {self:?}")));
        }
        Ok(())
    }

    pub fn generate<T: Real>(&self) -> Result<SystemData<T>> {
        self.validate()?;
        let sys = match *self {
            ProblemSpec::Scalar { a, b, c, r, s } => gen_scalar(a, b, c, r, s)?,
            ProblemSpec::RandomStable {
                n,
                m,
                p,
                r,
                s,
                seed,
                margin,
            } => gen_random_stable(n, m, p, r, s, seed, margin)?,
            ProblemSpec::RandomShifted {
                n,
                m,
                p,
                r,
                s,
                seed,
                mu,
                k_unstable,
            } => gen_random_shifted(n, m, p, r, s, seed, mu, k_unstable)?,
            ProblemSpec::Heat1d {
                n,
                r,
                s,
                control_node,
                obs_node,
            } => gen_heat1d(n, r, s, control_node, obs_node)?,
            ProblemSpec::AxisEigenDetect {
                base_n,
                r,
                s,
                omega,
                zero_observation,
            } => gen_axis_eigen_detect(base_n, r, s, omega, zero_observation)?,
        };
        Ok(sys.cast())
    }
}

fn scalar_matrix(v: f64) -> CMat<f64> {
    CMat::from_element(1, 1, creal(v))
}

/// The scalar system `A = -a`, `B = b`, `C = c`.
pub fn gen_scalar(a: f64, b: f64, c: f64, r: f64, s: f64) -> Result<SystemData<f64>> {
    SystemData::new(
        scalar_matrix(-a),
        scalar_matrix(b),
        scalar_matrix(c),
        r,
        s,
        format!("scalar(a={a}, b={b}, c={c})"),
    )
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat<f64> {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        cplx(re, im)
    })
}

/// Haar-distributed unitary from the QR factorization of a complex Gaussian.
fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat<f64> {
    let qr = gaussian(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / creal(d.norm())
        } else {
            creal(1.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

fn loguniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Input and output maps normalized to `‖B‖_{U→H_{-r}} = ‖C‖_{H_s^{(*)}→Y} = 1`.
fn normalized_io(
    rng: &mut ChaCha8Rng,
    a: &CMat<f64>,
    m: usize,
    p: usize,
    r: f64,
    s: f64,
) -> Result<(CMat<f64>, CMat<f64>)> {
    let n = a.nrows();
    let scale = HilbertScale::new(a)?;
    let b = gaussian(rng, n, m);
    let c = gaussian(rng, p, n);
    let nb = spectral_norm(&(scale.lambda_power(SpaceTag::plain(-r)?) * &b));
    let nc = spectral_norm(&(&c * scale.lambda_power(SpaceTag::star(-s)?)));
    Ok((b / creal(nb), c / creal(nc)))
}

fn diagonal(eigs: &[Complex<f64>]) -> CMat<f64> {
    let n = eigs.len();
    CMat::from_fn(n, n, |i, j| if i == j { eigs[i] } else { creal(0.0) })
}

fn pbh_both(sys: &SystemData<f64>) -> Result<bool> {
    Ok(pbh_controllability(sys, PBH_TOL)?.holds && pbh_observability(sys, PBH_TOL)?.holds)
}

/// `A = Q D Q^H` with eigenvalues `-U_log[margin, 10·margin] + i·U[-5, 5]`,
/// regenerated until both PBH tests pass.
pub fn gen_random_stable(
    n: usize,
    m: usize,
    p: usize,
    r: f64,
    s: f64,
    seed: u64,
    margin: f64,
) -> Result<SystemData<f64>> {
    if !(margin > 0.0) {
        return Err(Error::Parameter(format!(
            "stability margin must be positive, got {margin}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_RETRIES {
        let eigs: Vec<Complex<f64>> = (0..n)
            .map(|_| {
                let re = -loguniform(&mut rng, margin, 10.0 * margin);
                let im = rng.random_range(-5.0..=5.0);
                cplx(re, im)
            })
            .collect();
        let q = random_unitary(&mut rng, n);
        let a = &q * diagonal(&eigs) * q.adjoint();
        let (b, c) = normalized_io(&mut rng, &a, m, p, r, s)?;
        let sys = SystemData::new(a, b, c, r, s, format!("random_stable(n={n}, seed={seed})"))?;
        if pbh_both(&sys)? {
            return Ok(sys);
        }
    }
    Err(Error::Generation(format!(
        "no controllable and observable stable system after {MAX_RETRIES} draws (seed {seed})"
    )))
}

/// Keep-out band around the imaginary axis for shifted spectra.
pub const AXIS_KEEP_OUT: f64 = 1e-3;

/// Like [`gen_random_stable`] but with `k_unstable` eigenvalues whose real
/// parts lie in `(0, μ)`; `A - μ` is certified quasi-sectorial.
#[allow(clippy::too_many_arguments)]
pub fn gen_random_shifted(
    n: usize,
    m: usize,
    p: usize,
    r: f64,
    s: f64,
    seed: u64,
    mu: f64,
    k_unstable: usize,
) -> Result<SystemData<f64>> {
    if !(mu > 0.0) || k_unstable == 0 || k_unstable >= n {
        return Err(Error::Parameter(format!(
            "need μ > 0 and 0 < k_unstable < n, got μ = {mu}, k_unstable = {k_unstable}, n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = AXIS_KEEP_OUT.max(0.05 * mu);
    let hi = 0.95 * mu;
    for _ in 0..MAX_RETRIES {
        let eigs: Vec<Complex<f64>> = (0..n)
            .map(|k| {
                let im = rng.random_range(-5.0..=5.0);
                let re = if k < k_unstable {
                    rng.random_range(lo..=hi.max(lo))
                } else {
                    -loguniform(&mut rng, default_margin(), 10.0 * default_margin())
                };
                cplx(re, im)
            })
            .collect();
        let q = random_unitary(&mut rng, n);
        let a = &q * diagonal(&eigs) * q.adjoint();
        let shifted_radius = eigs.iter().map(|z| (z - mu).norm()).fold(0.0, f64::max);
        if certify_quasi_sectorial(&a, std::f64::consts::FRAC_PI_4, mu, 1.5 * shifted_radius, 12).is_err() {
            continue;
        }
        let (b, c) = normalized_io(&mut rng, &a, m, p, r, s)?;
        let sys = SystemData::new(
            a,
            b,
            c,
            r,
            s,
            format!("random_shifted(n={n}, k={k_unstable}, mu={mu}, seed={seed})"),
        )?;
        if pbh_both(&sys)? {
            return Ok(sys);
        }
    }
    Err(Error::Generation(format!(
        "no admissible shifted system after {MAX_RETRIES} draws (seed {seed})"
    )))
}

/// Grid node `round(fraction·n)` clamped to `[1, n]`, returned 0-based.
pub fn node_index(fraction: f64, n: usize) -> usize {
    let k = (fraction * n as f64).round();
    (k.clamp(1.0, n as f64) as usize) - 1
}

/// Dirichlet Laplacian on `n` interior nodes of `[0, 1]`.
pub fn heat1d_operator(n: usize) -> CMat<f64> {
    let h2 = ((n + 1) * (n + 1)) as f64;
    CMat::from_fn(n, n, |i, j| {
        if i == j {
            creal(-2.0 * h2)
        } else if i.abs_diff(j) == 1 {
            creal(h2)
        } else {
            creal(0.0)
        }
    })
}

/// `A = (n+1)² tridiag(1, -2, 1)`, `B = Λ^r e_c`, `C = (Λ^s e_o)^H`.
pub fn gen_heat1d(n: usize, r: f64, s: f64, control_node: f64, obs_node: f64) -> Result<SystemData<f64>> {
    if n < 3 {
        return Err(Error::Parameter(format!("heat equation needs n ≥ 3, got {n}")));
    }
    let a = heat1d_operator(n);
    let scale = HilbertScale::new(&a)?;
    let unit = |k: usize| CMat::from_fn(n, 1, |i, _| creal(if i == k { 1.0 } else { 0.0 }));
    let b = scale.lambda_power(SpaceTag::plain(r)?) * unit(node_index(control_node, n));
    let c = (scale.lambda_power(SpaceTag::star(s)?) * unit(node_index(obs_node, n))).adjoint();
    SystemData::new(a, b, c, r, s, format!("heat1d(n={n}, r={r}, s={s})"))
}

/// `A = diag(iω, -I)`, `B` and `C` all ones; `zero_observation` removes the
/// observation of the imaginary mode.
pub fn gen_axis_eigen_detect(
    base_n: usize,
    r: f64,
    s: f64,
    omega: f64,
    zero_observation: bool,
) -> Result<SystemData<f64>> {
    if base_n < 2 {
        return Err(Error::Parameter(format!("need base_n ≥ 2, got {base_n}")));
    }
    let n = base_n;
    let mut a = -identity::<f64>(n);
    a[(0, 0)] = cplx(0.0, omega);
    let b = CMat::from_element(n, 1, creal(1.0));
    let mut c = CMat::from_element(1, n, creal(1.0));
    if zero_observation {
        c[(0, 0)] = creal(0.0);
    }
    SystemData::new(
        a,
        b,
        c,
        r,
        s,
        format!("axis_eigen_detect(n={n}, omega={omega}, zero_observation={zero_observation})"),
    )
}

/// A system given by explicit matrices.
pub fn explicit<T: Real>(
    a: &CMat<f64>,
    b: &CMat<f64>,
    c: &CMat<f64>,
    r: f64,
    s: f64,
    label: &str,
) -> Result<SystemData<T>> {
    SystemData::new(cast_from_f64(a), cast_from_f64(b), cast_from_f64(c), r, s, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigenvalues;

    #[test]
    fn heat_spectrum_n3() {
        let a = heat1d_operator(3);
        let mut e: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|z| z.re).collect();
        e.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let r2 = 2f64.sqrt();
        let expect = [-16.0 * (2.0 + r2), -32.0, -16.0 * (2.0 - r2)];
        for (x, y) in e.iter().zip(expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_unweighted_io_is_unit() {
        let sys = gen_heat1d(10, 0.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(sys.b[(0, 0)], creal(1.0));
        assert_eq!(sys.c[(0, 9)], creal(1.0));
        assert!((sys.b.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn node_clamping() {
        assert_eq!(node_index(0.0, 50), 0);
        assert_eq!(node_index(1.0, 50), 49);
        assert_eq!(node_index(0.5, 50), 24);
    }

    #[test]
    fn random_stable_margin_and_reproducibility() {
        let s1 = gen_random_stable(6, 2, 2, 0.2, 0.2, 7, 0.5).unwrap();
        let s2 = gen_random_stable(6, 2, 2, 0.2, 0.2, 7, 0.5).unwrap();
        assert_eq!(s1.a, s2.a);
        assert_eq!(s1.b, s2.b);
        let max_re = eigenvalues(&s1.a)
            .unwrap()
            .iter()
            .map(|z| z.re)
            .fold(f64::MIN, f64::max);
        assert!(max_re <= -0.5 + 1e-10);
    }

    #[test]
    fn shifted_keeps_out_of_axis_band() {
        let sys = gen_random_shifted(5, 2, 2, 0.0, 0.0, 3, 1.0, 2).unwrap();
        let eigs = eigenvalues(&sys.a).unwrap();
        assert_eq!(eigs.iter().filter(|z| z.re > 0.0).count(), 2);
        assert!(eigs.iter().all(|z| z.re.abs() >= AXIS_KEEP_OUT));
        assert!(eigs.iter().all(|z| z.re < 1.0));
    }

    #[test]
    fn spec_round_trip() {
        let spec = ProblemSpec::Heat1d {
            n: 20,
            r: 0.2,
            s: 0.1,
            control_node: 0.0,
            obs_node: 1.0,
        };
        let json = serde_json_like(&spec);
        assert!(json.contains("heat1d"));
        assert!(ProblemSpec::Scalar {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            r: 0.6,
            s: 0.6
        }
        .validate()
        .is_err());
    }

    fn serde_json_like(spec: &ProblemSpec) -> String {
        format!("{spec:?}").to_lowercase()
    }
}

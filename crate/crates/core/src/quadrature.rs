//! Adaptive quadrature of matrix-valued integrands on a finite interval.
//!
//! Two rules are provided: adaptive Simpson with Richardson-corrected panels
//! and adaptive Gauss–Legendre panels (10 nodes) refined by bisection. Both
//! measure the local error in the Frobenius norm, which bounds the spectral
//! norm of the error. Panel sums are accumulated depth-first in interval
//! order, so results are bitwise deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lit, to_f64, CMat, Real};

const GL_ORDER: usize = 10;
const MAX_DEPTH: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    AdaptiveSimpson,
    GaussLegendrePanels,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub rule: QuadratureRule,
    pub abs_tol: f64,
    pub max_evals: usize,
    pub initial_panels: usize,
}

impl QuadratureOptions {
    pub fn new(rule: QuadratureRule, abs_tol: f64, max_evals: usize) -> Self {
        QuadratureOptions {
            rule,
            abs_tol,
            max_evals,
            initial_panels: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Quadrature<T: Real> {
    pub value: CMat<T>,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = p0;
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

struct Budget {
    evals: usize,
    max: usize,
    exhausted: bool,
}

impl Budget {
    fn charge(&mut self, k: usize) {
        self.evals += k;
        if self.evals >= self.max {
            self.exhausted = true;
        }
    }
}

/// Integrates `f` over `[a, b]` to the absolute tolerance in `opts`.
pub fn integrate<T, F>(mut f: F, a: T, b: T, opts: &QuadratureOptions) -> Result<Quadrature<T>>
where
    T: Real,
    F: FnMut(T) -> CMat<T>,
{
    if !(opts.abs_tol > 0.0) {
        return Err(Error::Parameter(format!(
            "quadrature tolerance must be positive, got {}",
            opts.abs_tol
        )));
    }
    let width = b - a;
    if width == T::zero() {
        let probe = f(a);
        return Ok(Quadrature {
            value: CMat::zeros(probe.nrows(), probe.ncols()),
            error_estimate: 0.0,
            evaluations: 1,
        });
    }
    let density = opts.abs_tol / to_f64(width).abs();
    let mut budget = Budget {
        evals: 0,
        max: opts.max_evals,
        exhausted: false,
    };
    let panels = opts.initial_panels.max(1);
    let h = width / lit::<T>(panels as f64);
    let mut total: Option<CMat<T>> = None;
    let mut err = 0.0;
    match opts.rule {
        QuadratureRule::GaussLegendrePanels => {
            let (x, w) = gauss_legendre(GL_ORDER);
            let x: Vec<T> = x.into_iter().map(lit).collect();
            let w: Vec<T> = w.into_iter().map(lit).collect();
            let rule = GlRule { x, w };
            for p in 0..panels {
                let lo = a + h * lit::<T>(p as f64);
                let hi = if p + 1 == panels { b } else { lo + h };
                let coarse = rule.apply(&mut f, lo, hi, &mut budget);
                let (v, e) = rule.refine(&mut f, lo, hi, coarse, density, 0, &mut budget);
                err += e;
                total = Some(match total {
                    Some(t) => t + v,
                    None => v,
                });
            }
        }
        QuadratureRule::AdaptiveSimpson => {
            for p in 0..panels {
                let lo = a + h * lit::<T>(p as f64);
                let hi = if p + 1 == panels { b } else { lo + h };
                let mid = (lo + hi) * lit::<T>(0.5);
                let flo = f(lo);
                let fmid = f(mid);
                let fhi = f(hi);
                budget.charge(3);
                let (v, e) = simpson_refine(&mut f, lo, hi, [flo, fmid, fhi], density, 0, &mut budget);
                err += e;
                total = Some(match total {
                    Some(t) => t + v,
                    None => v,
                });
            }
        }
    }
    let value = total.expect("at least one panel");
    if budget.exhausted && err > opts.abs_tol {
        return Err(Error::Accuracy {
            context: "adaptive quadrature",
            achieved: err,
            target: opts.abs_tol,
            evaluations: budget.evals,
        });
    }
    Ok(Quadrature {
        value,
        error_estimate: err,
        evaluations: budget.evals,
    })
}

fn roundoff_floor<T: Real>(v: &CMat<T>) -> f64 {
    64.0 * to_f64(T::default_epsilon()) * to_f64(v.norm())
}

struct GlRule<T> {
    x: Vec<T>,
    w: Vec<T>,
}

impl<T: Real> GlRule<T> {
    fn apply<F: FnMut(T) -> CMat<T>>(&self, f: &mut F, a: T, b: T, budget: &mut Budget) -> CMat<T> {
        let half = (b - a) * lit::<T>(0.5);
        let mid = (a + b) * lit::<T>(0.5);
        let mut acc: Option<CMat<T>> = None;
        for (xi, wi) in self.x.iter().zip(&self.w) {
            let fx = f(mid + half * *xi) * crate::linalg::creal(*wi * half);
            acc = Some(match acc {
                Some(s) => s + fx,
                None => fx,
            });
        }
        budget.charge(self.x.len());
        acc.expect("nonempty rule")
    }

    #[allow(clippy::too_many_arguments)]
    fn refine<F: FnMut(T) -> CMat<T>>(
        &self,
        f: &mut F,
        a: T,
        b: T,
        coarse: CMat<T>,
        density: f64,
        depth: usize,
        budget: &mut Budget,
    ) -> (CMat<T>, f64) {
        let mid = (a + b) * lit::<T>(0.5);
        let left = self.apply(f, a, mid, budget);
        let right = self.apply(f, mid, b, budget);
        let fine = &left + &right;
        let err = to_f64((&fine - &coarse).norm());
        let local_tol = density * to_f64(b - a);
        if err <= local_tol || err <= roundoff_floor(&fine) || depth >= MAX_DEPTH || budget.exhausted {
            return (fine, err);
        }
        let (l, el) = self.refine(f, a, mid, left, density, depth + 1, budget);
        let (r, er) = self.refine(f, mid, b, right, density, depth + 1, budget);
        (l + r, el + er)
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_refine<T: Real, F: FnMut(T) -> CMat<T>>(
    f: &mut F,
    a: T,
    b: T,
    [fa, fm, fb]: [CMat<T>; 3],
    density: f64,
    depth: usize,
    budget: &mut Budget,
) -> (CMat<T>, f64) {
    let sixth = crate::linalg::creal((b - a) / lit::<T>(6.0));
    let twelfth = crate::linalg::creal((b - a) / lit::<T>(12.0));
    let four = crate::linalg::creal(lit::<T>(4.0));
    let m = (a + b) * lit::<T>(0.5);
    let lm = (a + m) * lit::<T>(0.5);
    let rm = (m + b) * lit::<T>(0.5);
    let flm = f(lm);
    let frm = f(rm);
    budget.charge(2);
    let whole = (&fa + &fm * four + &fb) * sixth;
    let left = (&fa + &flm * four + &fm) * twelfth;
    let right = (&fm + &frm * four + &fb) * twelfth;
    let fine = &left + &right;
    let diff = &fine - &whole;
    let err = to_f64(diff.norm()) / 15.0;
    let local_tol = density * to_f64(b - a);
    if err <= local_tol || err <= roundoff_floor(&fine) || depth >= MAX_DEPTH || budget.exhausted {
        let corrected = fine + diff * crate::linalg::creal(lit::<T>(1.0 / 15.0));
        return (corrected, err);
    }
    let (l, el) = simpson_refine(f, a, m, [fa, flm, fm.clone()], density, depth + 1, budget);
    let (r, er) = simpson_refine(f, m, b, [fm, frm, fb], density, depth + 1, budget);
    (l + r, el + er)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::creal;
    use nalgebra::Complex;

    fn scalar(v: f64) -> CMat<f64> {
        CMat::from_element(1, 1, creal(v))
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(GL_ORDER);
        let sum_w: f64 = w.iter().sum();
        assert!((sum_w - 2.0).abs() < 1e-14);
        // x^18 over [-1,1] = 2/19
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((m - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn both_rules_reach_arctangent() {
        for rule in [QuadratureRule::GaussLegendrePanels, QuadratureRule::AdaptiveSimpson] {
            let opts = QuadratureOptions::new(rule, 1e-11, 1_000_000);
            let q = integrate(|t: f64| scalar(1.0 / (1.0 + t * t)), -3.0, 5.0, &opts).unwrap();
            let exact = 5f64.atan() + 3f64.atan();
            assert!((q.value[(0, 0)].re - exact).abs() < 1e-10, "{rule:?}");
            assert!(q.error_estimate <= 1e-11);
        }
    }

    #[test]
    fn complex_matrix_integrand() {
        let opts = QuadratureOptions::new(QuadratureRule::GaussLegendrePanels, 1e-12, 100_000);
        let q = integrate(
            |t: f64| CMat::from_row_slice(1, 2, &[Complex::new(t.cos(), t.sin()), Complex::new(0.0, t * t)]),
            0.0,
            1.0,
            &opts,
        )
        .unwrap();
        assert!((q.value[(0, 0)] - Complex::new(1f64.sin(), 1.0 - 1f64.cos())).norm() < 1e-12);
        assert!((q.value[(0, 1)] - Complex::new(0.0, 1.0 / 3.0)).norm() < 1e-12);
    }

    #[test]
    fn exhausted_budget_is_an_accuracy_error() {
        let opts = QuadratureOptions::new(QuadratureRule::AdaptiveSimpson, 1e-14, 50);
        let r = integrate(|t: f64| scalar((40.0 * t).sin() / (1e-3 + t * t)), -1.0, 1.0, &opts);
        assert!(matches!(r, Err(Error::Accuracy { .. })));
    }
}

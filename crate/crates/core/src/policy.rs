use serde::{Deserialize, Serialize};

use crate::linalg::Real;
use crate::quadrature::QuadratureRule;

/// Tolerances shared by every module.
///
/// All values are stored as `f64` and converted to the working scalar on
/// use. [`NumericPolicy::for_scalar`] widens the floors for `f32`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericPolicy {
    /// Absolute tolerance of every contour quadrature (measured on `P±`).
    pub quad_tol: f64,
    /// Quadrature rule used for the primary route.
    pub rule: QuadratureRule,
    /// Relative tolerance for classifying eigenvalues as lying on the axis.
    pub axis_tol: f64,
    /// Relative tolerance for matrix identities that hold exactly in exact arithmetic.
    pub rel_tol: f64,
    /// Tolerance for Riccati residuals, projection defects and oracle agreement.
    pub residual_tol: f64,
    /// Relative rank threshold of the PBH tests.
    pub pbh_tol: f64,
    /// Truncation height of the principal-value identity check.
    pub pv_t_max: f64,
    /// Acceptance threshold of the principal-value and semicircle identities.
    pub identity_tol: f64,
    /// Evaluation budget per quadrature.
    pub max_evals: usize,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        NumericPolicy {
            quad_tol: 1e-10,
            rule: QuadratureRule::GaussLegendrePanels,
            axis_tol: 1e-9,
            rel_tol: 1e-10,
            residual_tol: 1e-8,
            pbh_tol: 1e-10,
            pv_t_max: 1e3,
            identity_tol: 1e-6,
            max_evals: 200_000,
        }
    }
}

impl NumericPolicy {
    /// Default policy with every tolerance floored at a multiple of the
    /// scalar's machine epsilon.
    pub fn for_scalar<T: Real>() -> Self {
        let eps = T::default_epsilon().to_f64().unwrap_or(f64::EPSILON);
        let d = NumericPolicy::default();
        let floor = |x: f64, k: f64| x.max(k * eps);
        NumericPolicy {
            quad_tol: floor(d.quad_tol, 1e4),
            axis_tol: floor(d.axis_tol, 1e4),
            rel_tol: floor(d.rel_tol, 1e4),
            residual_tol: floor(d.residual_tol, 1e5),
            pbh_tol: floor(d.pbh_tol, 1e3),
            identity_tol: floor(d.identity_tol, 1e5),
            ..d
        }
    }

    /// Threshold used for quadrature-backed identities: `max(base, 10·estimate)`.
    pub fn quadrature_bound(&self, estimate: f64) -> f64 {
        self.residual_tol.max(10.0 * estimate)
    }
}

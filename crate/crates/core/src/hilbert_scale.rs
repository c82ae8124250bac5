//! The two Hilbert scales generated by a square matrix `A`.
//!
//! `Λ = (I + A A^H)^{1/2}` generates the plain scale `H_s` with norm
//! `‖x‖_s = ‖Λ^s x‖`; `Λ_* = (I + A^H A)^{1/2}` generates the star scale
//! `H_s^{(*)}`. At finite dimension every `H_s` is the same coordinate space
//! with a re-weighted norm, so fractional powers, scale norms and operator
//! norms between scale spaces are all computed from two cached Hermitian
//! eigendecompositions.

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen, hermitian_function, identity, is_finite, lit, min_singular_value, modulus, shift, spectral_norm,
    to_f64, CMat, CVec, Real,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Scale generated by `I + A A^H`.
    Plain,
    /// Scale generated by `I + A^H A`.
    Star,
}

/// Identifies `H_s` (plain) or `H_s^{(*)}` (star) for `s ∈ [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTag {
    side: Side,
    exponent: f64,
}

impl SpaceTag {
    pub fn new(side: Side, exponent: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&exponent) {
            return Err(Error::Parameter(format!("scale exponent {exponent} outside [-1, 1]")));
        }
        Ok(SpaceTag { side, exponent })
    }

    pub fn plain(exponent: f64) -> Result<Self> {
        Self::new(Side::Plain, exponent)
    }

    pub fn star(exponent: f64) -> Result<Self> {
        Self::new(Side::Star, exponent)
    }

    /// The pivot space `H` (exponent zero).
    pub const fn pivot(side: Side) -> Self {
        SpaceTag { side, exponent: 0.0 }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

/// Geometry of one side of an operator: a scale space of `A`, or an
/// auxiliary Euclidean space such as the input space `U` or output space `Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Space {
    Euclidean,
    Scale(SpaceTag),
}

impl From<SpaceTag> for Space {
    fn from(tag: SpaceTag) -> Self {
        Space::Scale(tag)
    }
}

#[derive(Debug, Clone)]
pub struct HilbertScale<T: Real> {
    base: CMat<T>,
    plus_vals: DVector<T>,
    plus_vecs: CMat<T>,
    star_vals: DVector<T>,
    star_vecs: CMat<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeinzReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalePoint {
    pub lambda: Complex<f64>,
    pub modulus: f64,
    pub norm: f64,
}

fn clamp_gram<T: Real>(vals: DVector<T>, what: &'static str) -> Result<DVector<T>> {
    let top = vals.iter().fold(T::one(), |m, &v| if v > m { v } else { m });
    let slack = lit::<T>(1e-12).max(T::default_epsilon() * lit(64.0)) * top;
    if let Some(&bad) = vals.iter().find(|&&v| v < T::one() - slack) {
        return Err(Error::Consistency {
            context: what,
            defect: to_f64(T::one() - bad),
            tolerance: to_f64(slack),
        });
    }
    Ok(vals.map(|v| if v < T::one() { T::one() } else { v }))
}

impl<T: Real> HilbertScale<T> {
    pub fn new(a: &CMat<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim(
                "build_scale",
                "square matrix",
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        if !is_finite(a) {
            return Err(Error::Parameter("scale base has non-finite entries".into()));
        }
        let n = a.nrows();
        let gram_plus = identity::<T>(n) + a * a.adjoint();
        let gram_star = identity::<T>(n) + a.adjoint() * a;
        let (pv, pvec) = hermitian_eigen(&gram_plus)?;
        let (sv, svec) = hermitian_eigen(&gram_star)?;
        Ok(HilbertScale {
            base: a.clone(),
            plus_vals: clamp_gram(pv, "I + A A^H eigenvalues below one")?,
            plus_vecs: pvec,
            star_vals: clamp_gram(sv, "I + A^H A eigenvalues below one")?,
            star_vecs: svec,
        })
    }

    pub fn base(&self) -> &CMat<T> {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    /// Eigenvalues of the Gram matrix `Λ²` (plain) or `Λ_*²` (star), ascending.
    pub fn gram_eigenvalues(&self, side: Side) -> &DVector<T> {
        match side {
            Side::Plain => &self.plus_vals,
            Side::Star => &self.star_vals,
        }
    }

    /// `Λ^s` or `Λ_*^s` for an exponent that has not been range-checked.
    pub(crate) fn power_raw(&self, side: Side, exponent: f64) -> CMat<T> {
        if exponent == 0.0 {
            return identity(self.dim());
        }
        let half: T = lit(exponent / 2.0);
        let (vals, vecs) = match side {
            Side::Plain => (&self.plus_vals, &self.plus_vecs),
            Side::Star => (&self.star_vals, &self.star_vecs),
        };
        hermitian_function(vals, vecs, |d| d.powf(half))
    }

    /// `Λ^s` (plain) or `Λ_*^s` (star).
    pub fn lambda_power(&self, tag: SpaceTag) -> CMat<T> {
        self.power_raw(tag.side, tag.exponent)
    }

    fn weight(&self, space: Space, dim: usize, invert: bool) -> CMat<T> {
        match space {
            Space::Euclidean => identity(dim),
            Space::Scale(tag) => {
                let e = if invert { -tag.exponent } else { tag.exponent };
                self.power_raw(tag.side, e)
            }
        }
    }

    fn check_dim(&self, context: &'static str, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::dim(context, self.dim(), len));
        }
        Ok(())
    }

    /// `‖x‖_s = ‖Λ^s x‖`.
    pub fn scale_norm(&self, tag: SpaceTag, x: &CVec<T>) -> Result<T> {
        self.check_dim("scale_norm", x.len())?;
        Ok((self.lambda_power(tag) * x).norm())
    }

    /// The duality pairing `⟨x, y⟩_s = ⟨Λ^s x, Λ^{-s} y⟩` between `H_s` and
    /// `H_{-s}`; at finite dimension it coincides with `⟨x, y⟩ = y^H x`,
    /// which is asserted.
    pub fn pairing(&self, tag: SpaceTag, x: &CVec<T>, y: &CVec<T>) -> Result<Complex<T>> {
        self.check_dim("pairing", x.len())?;
        self.check_dim("pairing", y.len())?;
        let wx = self.lambda_power(tag) * x;
        let wy = self.power_raw(tag.side, -tag.exponent) * y;
        let weighted = wy.dotc(&wx);
        let plain = y.dotc(x);
        let vals = self.gram_eigenvalues(tag.side);
        let spread = if vals.is_empty() {
            T::one()
        } else {
            (vals[vals.len() - 1] / vals[0]).powf(lit(tag.exponent.abs() / 2.0))
        };
        let tol = lit::<T>(1e-12).max(T::default_epsilon() * lit(256.0)) * spread * wx.norm() * wy.norm()
            + T::default_epsilon();
        let defect = modulus(weighted - plain);
        if defect > tol {
            return Err(Error::Consistency {
                context: "scale pairing",
                defect: to_f64(defect),
                tolerance: to_f64(tol),
            });
        }
        Ok(weighted)
    }

    /// Operator norm of `m` as a map `src → dst`: `‖W_dst M W_src^{-1}‖₂`.
    pub fn operator_scale_norm(&self, m: &CMat<T>, src: impl Into<Space>, dst: impl Into<Space>) -> Result<T> {
        let (src, dst) = (src.into(), dst.into());
        if let Space::Scale(_) = src {
            self.check_dim("operator_scale_norm (source)", m.ncols())?;
        }
        if let Space::Scale(_) = dst {
            self.check_dim("operator_scale_norm (target)", m.nrows())?;
        }
        let wd = self.weight(dst, m.nrows(), false);
        let ws = self.weight(src, m.ncols(), true);
        Ok(spectral_norm(&(wd * m * ws)))
    }

    /// Interpolation check: with `r = mix·r1 + (1-mix)·r2` (and likewise for
    /// the targets) verifies
    /// `‖M‖_{r→s} ≤ ‖M‖_{r1→s1}^mix · ‖M‖_{r2→s2}^{1-mix}` up to `1e-10` slack.
    pub fn heinz_check(
        &self,
        m: &CMat<T>,
        (src1, dst1): (SpaceTag, SpaceTag),
        (src2, dst2): (SpaceTag, SpaceTag),
        mix: f64,
    ) -> Result<HeinzReport> {
        if !(mix > 0.0 && mix < 1.0) {
            return Err(Error::Parameter(format!("interpolation weight {mix} not in (0, 1)")));
        }
        if src1.side != src2.side || dst1.side != dst2.side {
            return Err(Error::Parameter("interpolated tags must lie on the same scale".into()));
        }
        if !(src1.exponent < src2.exponent && dst1.exponent < dst2.exponent) {
            return Err(Error::Parameter(format!(
                "need src1 < src2 and dst1 < dst2, got ({}, {}) and ({}, {})",
                src1.exponent, src2.exponent, dst1.exponent, dst2.exponent
            )));
        }
        let src = SpaceTag::new(src1.side, mix * src1.exponent + (1.0 - mix) * src2.exponent)?;
        let dst = SpaceTag::new(dst1.side, mix * dst1.exponent + (1.0 - mix) * dst2.exponent)?;
        let lhs = to_f64(self.operator_scale_norm(m, src, dst)?);
        let n1 = to_f64(self.operator_scale_norm(m, src1, dst1)?);
        let n2 = to_f64(self.operator_scale_norm(m, src2, dst2)?);
        let rhs = n1.powf(mix) * n2.powf(1.0 - mix);
        Ok(HeinzReport {
            lhs,
            rhs,
            holds: lhs <= rhs + 1e-10,
        })
    }

    /// `‖(A - λ)^{-1}‖_{src→dst}` on every grid point.
    pub fn resolvent_scale_bound_scan(
        &self,
        src: SpaceTag,
        dst: SpaceTag,
        grid: &[Complex<T>],
    ) -> Result<Vec<ScalePoint>> {
        let anorm = spectral_norm(&self.base);
        let floor = lit::<T>(1e-12) * if anorm > T::zero() { anorm } else { T::one() };
        grid.iter()
            .map(|&lambda| {
                let shifted = shift(&self.base, lambda);
                if min_singular_value(&shifted) <= floor {
                    return Err(Error::Singular {
                        lambda: crate::linalg::c64(lambda),
                    });
                }
                let res = shifted.lu().try_inverse().ok_or(Error::Singular {
                    lambda: crate::linalg::c64(lambda),
                })?;
                let norm = self.operator_scale_norm(&res, src, dst)?;
                Ok(ScalePoint {
                    lambda: crate::linalg::c64(lambda),
                    modulus: to_f64(modulus(lambda)),
                    norm: to_f64(norm),
                })
            })
            .collect()
    }
}

/// `max |λ|^exponent · norm` over the points with `lo ≤ |λ| ≤ hi`.
pub fn window_max(points: &[ScalePoint], exponent: f64, lo: f64, hi: f64) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.modulus >= lo && p.modulus <= hi)
        .map(|p| p.modulus.powf(exponent) * p.norm)
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::creal;

    fn diag(vals: &[f64]) -> CMat<f64> {
        CMat::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|&v| creal(v))))
    }

    #[test]
    fn zero_base_gives_identity_weights() {
        let s = HilbertScale::new(&CMat::<f64>::zeros(3, 3)).unwrap();
        for e in [-1.0, -0.3, 0.5, 1.0] {
            let p = s.lambda_power(SpaceTag::plain(e).unwrap());
            assert!((p - identity::<f64>(3)).norm() < 1e-15);
        }
    }

    #[test]
    fn scalar_powers() {
        let s = HilbertScale::new(&diag(&[-1.0])).unwrap();
        let up = s.lambda_power(SpaceTag::plain(1.0).unwrap())[(0, 0)].re;
        let down = s.lambda_power(SpaceTag::star(-1.0).unwrap())[(0, 0)].re;
        assert!((up - 2f64.sqrt()).abs() < 1e-15);
        assert!((down - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let x = CVec::from_element(1, creal(1.0));
        let n = s.scale_norm(SpaceTag::plain(1.0).unwrap(), &x).unwrap();
        assert!((n - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn diagonal_star_half_power() {
        let s = HilbertScale::new(&diag(&[-1.0, -2.0])).unwrap();
        let p = s.lambda_power(SpaceTag::star(0.5).unwrap());
        assert!((p[(0, 0)].re - 2f64.powf(0.25)).abs() < 1e-14);
        assert!((p[(1, 1)].re - 5f64.powf(0.25)).abs() < 1e-14);
        assert!(p[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn out_of_range_exponent_rejected() {
        assert!(SpaceTag::plain(1.5).is_err());
        assert!(SpaceTag::star(-1.01).is_err());
    }

    #[test]
    fn non_square_base_rejected() {
        assert!(matches!(
            HilbertScale::new(&CMat::<f64>::zeros(2, 3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn pairing_of_orthogonal_and_unit_vectors() {
        let a = CMat::from_row_slice(2, 2, &[creal(-1.0), creal(3.0), creal(0.5), creal(-2.0)]);
        let s = HilbertScale::new(&a).unwrap();
        let e1 = CVec::from_row_slice(&[creal(1.0), creal(0.0)]);
        let e2 = CVec::from_row_slice(&[creal(0.0), creal(1.0)]);
        for e in [-1.0, -0.4, 0.0, 0.7, 1.0] {
            let tag = SpaceTag::plain(e).unwrap();
            assert!(s.pairing(tag, &e1, &e2).unwrap().norm() < 1e-12);
            assert!((s.pairing(tag, &e1, &e1).unwrap() - creal(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn operator_norm_of_inverse_weight() {
        let a = CMat::from_row_slice(2, 2, &[creal(-1.0), creal(3.0), creal(0.5), creal(-2.0)]);
        let s = HilbertScale::new(&a).unwrap();
        let inv = s.lambda_power(SpaceTag::plain(-1.0).unwrap());
        let n = s
            .operator_scale_norm(&inv, SpaceTag::pivot(Side::Plain), SpaceTag::plain(1.0).unwrap())
            .unwrap();
        assert!((n - 1.0f64).abs() < 1e-12);
        let id = identity::<f64>(2);
        let tag = SpaceTag::star(0.3).unwrap();
        assert!((s.operator_scale_norm(&id, tag, tag).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heinz_identity_is_equality() {
        let s = HilbertScale::new(&diag(&[-1.0, -4.0])).unwrap();
        let id = identity::<f64>(2);
        let t = |e| SpaceTag::plain(e).unwrap();
        let rep = s.heinz_check(&id, (t(-0.5), t(-0.5 + 1e-3)), (t(0.5), t(0.5 + 1e-3)), 0.5);
        // ordering is strict on both sides; equal pairs are rejected
        assert!(rep.unwrap().holds);
        assert!(s.heinz_check(&id, (t(0.5), t(0.1)), (t(0.2), t(0.6)), 0.5).is_err());
    }

    #[test]
    fn scalar_resolvent_on_axis() {
        let s = HilbertScale::new(&diag(&[-1.0])).unwrap();
        let grid: Vec<_> = [0.5, 1.0, 4.0].iter().map(|&t| Complex::new(0.0, t)).collect();
        let pts = s
            .resolvent_scale_bound_scan(SpaceTag::pivot(Side::Plain), SpaceTag::pivot(Side::Plain), &grid)
            .unwrap();
        for p in pts {
            let t = p.lambda.im;
            assert!((p.norm - 1.0 / (1.0 + t * t).sqrt()).abs() < 1e-14);
            assert!(p.norm <= 1.0 / t);
        }
    }

    #[test]
    fn resolvent_at_eigenvalue_is_singular() {
        let s = HilbertScale::new(&diag(&[-1.0, -2.0])).unwrap();
        let tag = SpaceTag::pivot(Side::Plain);
        let r = s.resolvent_scale_bound_scan(tag, tag, &[Complex::new(-2.0, 0.0)]);
        assert!(matches!(r, Err(Error::Singular { .. })));
    }
}

//! Dense complex linear-algebra helpers on top of `nalgebra`.
//!
//! LU, Hermitian eigen and complex Schur come from `nalgebra`. This module
//! adds reordering of a complex Schur form, eigenvectors of a triangular
//! factor, the triangular Sylvester/Lyapunov solvers built on them, and a
//! one-sided Jacobi SVD.
//!
//! The bidiagonal SVD in `nalgebra` 0.35 loses accuracy on nearly
//! rank-deficient input (a 2×2 rank-one matrix perturbed by 1e-14 comes back
//! with a reconstruction error of 1e-2), so singular values and vectors are
//! computed here instead.

use std::fmt;

use nalgebra::{Complex, ComplexField, DMatrix, DVector, RealField, Schur, SymmetricEigen};
use num_traits::{FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Real scalar the whole crate is generic over.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + fmt::LowerExp + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: RealField
        + Copy
        + FromPrimitive
        + ToPrimitive
        + fmt::Debug
        + fmt::Display
        + fmt::LowerExp
        + Send
        + Sync
        + 'static
{
}

pub type CMat<T> = DMatrix<Complex<T>>;
pub type CVec<T> = DVector<Complex<T>>;

#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    <T as FromPrimitive>::from_f64(x).expect("literal representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn creal<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub fn modulus<T: Real>(z: Complex<T>) -> T {
    ComplexField::modulus(z)
}

pub fn c64<T: Real>(z: Complex<T>) -> Complex<f64> {
    Complex::new(to_f64(z.re), to_f64(z.im))
}

pub fn from_c64<T: Real>(z: Complex<f64>) -> Complex<T> {
    Complex::new(lit(z.re), lit(z.im))
}

pub fn eps<T: Real>() -> T {
    T::default_epsilon()
}

/// `tol`, raised to `k` machine epsilons of `T` where that is larger.
pub fn floor_tol<T: Real>(tol: f64, k: f64) -> f64 {
    tol.max(k * to_f64(eps::<T>()))
}

/// Converts a complex `f64` matrix to the working scalar.
pub fn cast_from_f64<T: Real>(m: &CMat<f64>) -> CMat<T> {
    m.map(from_c64)
}

pub fn cast_to_f64<T: Real>(m: &CMat<T>) -> CMat<f64> {
    m.map(c64)
}

pub fn identity<T: Real>(n: usize) -> CMat<T> {
    CMat::identity(n, n)
}

pub fn is_finite<T: Real>(m: &CMat<T>) -> bool {
    m.iter().all(|z| to_f64(z.re).is_finite() && to_f64(z.im).is_finite())
}

fn fold_max<T: Real>(it: impl Iterator<Item = T>) -> T {
    it.fold(T::zero(), |acc, x| if x > acc { x } else { acc })
}

/// Below this many multiply-adds the plain complex product is used.
const SPLIT_GEMM_MIN: usize = 32 * 32 * 32;

/// `a * b`. Large products are split into four real products: `nalgebra`
/// sends real `f32`/`f64` products to a blocked kernel, complex ones not.
pub fn matmul<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimensions differ");
    if a.nrows() * a.ncols() * b.ncols() < SPLIT_GEMM_MIN {
        return a * b;
    }
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let mut re = &ar * &br;
    re.gemm(-T::one(), &ai, &bi, T::one());
    let mut im = &ar * &bi;
    im.gemm(T::one(), &ai, &br, T::one());
    re.zip_map(&im, |x, y| cplx(x, y))
}

/// `a^H * b`.
pub fn matmul_adj<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    matmul(&a.adjoint(), b)
}

/// Thin SVD `m = U diag(σ) V^H` with `σ` descending.
pub struct Svd<T: Real> {
    pub u: CMat<T>,
    pub sigma: Vec<T>,
    pub v: CMat<T>,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi on the columns of a tall matrix.
fn jacobi_tall<T: Real>(mut a: CMat<T>) -> Svd<T> {
    let (rows, n) = a.shape();
    let mut v = identity::<T>(n);
    let tol = eps::<T>() * lit::<T>(rows.max(1) as f64).sqrt();
    let zero = Complex::new(T::zero(), T::zero());
    for _ in 0..JACOBI_MAX_SWEEPS {
        // squared column norms, updated in closed form after each rotation
        let mut sq: Vec<T> = (0..n).map(|j| a.column(j).norm_squared()).collect();
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta) = (sq[p], sq[q]);
                let mut gamma = zero;
                {
                    let data = a.as_slice();
                    let cp = &data[p * rows..(p + 1) * rows];
                    let cq = &data[q * rows..(q + 1) * rows];
                    for (x, y) in cp.iter().zip(cq) {
                        gamma += x.conj() * y;
                    }
                }
                let g = modulus(gamma);
                if g == T::zero() || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / creal(g);
                let zeta = (beta - alpha) / (lit::<T>(2.0) * g);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                sq[p] = alpha - t * g;
                sq[q] = beta + t * g;
                let (cc, sc) = (creal(c), creal(s));
                let pc = phase.conj();
                for m in [&mut a, &mut v] {
                    let len = m.nrows();
                    let (head, tail) = m.as_mut_slice().split_at_mut(q * len);
                    let cp = &mut head[p * len..(p + 1) * len];
                    let cq = &mut tail[..len];
                    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                        let xv = *x;
                        let yv = *y * pc;
                        *x = cc * xv - sc * yv;
                        *y = sc * xv + cc * yv;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<T> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let sigma: Vec<T> = order.iter().map(|&j| norms[j]).collect();
    let mut u = CMat::zeros(rows, n);
    for (k, &j) in order.iter().enumerate() {
        if norms[j] > T::zero() {
            u.set_column(k, &(a.column(j) / creal(norms[j])));
        }
    }
    let v = CMat::from_fn(n, n, |r, k| v[(r, order[k])]);
    Svd { u, sigma, v }
}

/// Thin SVD of an arbitrary matrix. Left vectors belonging to zero singular
/// values are returned as zero columns.
pub fn svd<T: Real>(m: &CMat<T>) -> Svd<T> {
    if m.nrows() >= m.ncols() {
        jacobi_tall(m.clone())
    } else {
        let t = jacobi_tall(m.adjoint());
        Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        }
    }
}

/// Singular values in descending order.
pub fn singular_values<T: Real>(m: &CMat<T>) -> Vec<T> {
    if m.is_empty() {
        return Vec::new();
    }
    svd(m).sigma
}

/// Hermitian Gram matrix of the smaller side of `m`.
fn small_gram<T: Real>(m: &CMat<T>) -> CMat<T> {
    let gram = if m.nrows() <= m.ncols() {
        matmul(m, &m.adjoint())
    } else {
        matmul_adj(m, m)
    };
    (&gram + gram.adjoint()) * creal(lit::<T>(0.5))
}

/// Squared singular values from the Gram matrix, ascending and clamped at zero.
fn gram_values<T: Real>(m: &CMat<T>) -> Vec<T> {
    let mut vals: Vec<T> = small_gram(m)
        .symmetric_eigenvalues()
        .iter()
        .map(|&x| if x > T::zero() { x } else { T::zero() })
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    vals
}

/// Below this ratio `σ_min²/σ_max²` the Gram route is not trusted.
const GRAM_RATIO: f64 = 1e-8;

/// From this size on the largest singular value comes from Lanczos.
const LANCZOS_MIN_DIM: usize = 128;
const LANCZOS_MAX_STEPS: usize = 120;
const LANCZOS_TOL: f64 = 1e-13;

/// Largest eigenvalue of `m^H m` by Lanczos with full reorthogonalization.
/// Stops when the Ritz residual falls below `LANCZOS_TOL` relative to the
/// Ritz value; `None` if that does not happen.
fn lanczos_top_gram<T: Real>(m: &CMat<T>) -> Option<T> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let n = m.ncols();
    let steps = LANCZOS_MAX_STEPS.min(n);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x1a2c);
    let mut v = CVec::<T>::from_fn(n, |_, _| {
        let x: f64 = StandardNormal.sample(&mut rng);
        creal(lit(x))
    });
    let nv = v.norm();
    v /= creal(nv);
    let mut basis: Vec<CVec<T>> = Vec::with_capacity(steps);
    let (mut alpha, mut beta) = (Vec::<T>::new(), Vec::<T>::new());
    let mh = m.adjoint();
    for k in 0..steps {
        let mut w = &mh * (m * &v);
        let a = v.dotc(&w).re;
        basis.push(v.clone());
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&w);
                w -= b * c;
            }
        }
        let bnorm = w.norm();
        let done = bnorm <= lit::<T>(LANCZOS_TOL) * a.abs();
        if k % 8 == 7 || done || k + 1 == steps {
            let dim = alpha.len();
            let tri = DMatrix::<T>::from_fn(dim, dim, |i, j| {
                if i == j {
                    alpha[i]
                } else if i.abs_diff(j) == 1 {
                    beta[i.min(j)]
                } else {
                    T::zero()
                }
            });
            let eig = SymmetricEigen::try_new(tri, eps::<T>(), 0)?;
            let (top, theta) =
                eig.eigenvalues
                    .iter()
                    .enumerate()
                    .fold((0, T::min_value().unwrap_or(-T::one())), |acc, (i, &x)| {
                        if x > acc.1 {
                            (i, x)
                        } else {
                            acc
                        }
                    });
            let resid = bnorm * eig.eigenvectors[(dim - 1, top)].abs();
            if done || resid <= lit::<T>(LANCZOS_TOL) * theta.abs() {
                return Some(if theta > T::zero() { theta } else { T::zero() });
            }
        }
        if k + 1 == steps {
            break;
        }
        beta.push(bnorm);
        v = w / creal(bnorm);
    }
    None
}

/// Largest singular value, from the largest eigenvalue of the smaller Gram
/// matrix (Lanczos on large input).
pub fn spectral_norm<T: Real>(m: &CMat<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    if m.nrows().min(m.ncols()) >= LANCZOS_MIN_DIM {
        let top = if m.nrows() < m.ncols() {
            lanczos_top_gram(&m.adjoint())
        } else {
            lanczos_top_gram(m)
        };
        if let Some(top) = top {
            return top.sqrt();
        }
    }
    gram_values(m).last().copied().unwrap_or_else(T::zero).sqrt()
}

/// Smallest singular value of a (possibly rectangular) matrix; zero for empty input.
pub fn min_singular_value<T: Real>(m: &CMat<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    let vals = gram_values(m);
    let (lo, hi) = (vals[0], vals[vals.len() - 1]);
    if hi > T::zero() && lo > lit::<T>(GRAM_RATIO) * hi {
        return lo.sqrt();
    }
    singular_values(m).last().copied().unwrap_or_else(T::zero)
}

pub fn frobenius<T: Real>(m: &CMat<T>) -> T {
    m.norm()
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number<T: Real>(m: &CMat<T>) -> f64 {
    if !m.is_empty() {
        let vals = gram_values(m);
        let (lo, hi) = (vals[0], vals[vals.len() - 1]);
        if hi > T::zero() && lo > lit::<T>(GRAM_RATIO) * hi {
            return to_f64((hi / lo).sqrt());
        }
    }
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > T::zero() => to_f64(hi / lo),
        _ => f64::INFINITY,
    }
}

pub fn inverse<T: Real>(m: &CMat<T>) -> Option<CMat<T>> {
    m.clone().lu().try_inverse()
}

pub fn solve<T: Real>(m: &CMat<T>, rhs: &CMat<T>) -> Option<CMat<T>> {
    m.clone().lu().solve(rhs)
}

/// `(m - λ I)^{-1}`.
pub fn resolvent<T: Real>(m: &CMat<T>, lambda: Complex<T>) -> Option<CMat<T>> {
    let mut shifted = m.clone();
    for i in 0..m.nrows() {
        shifted[(i, i)] -= lambda;
    }
    shifted.lu().try_inverse()
}

pub fn shift<T: Real>(m: &CMat<T>, lambda: Complex<T>) -> CMat<T> {
    let mut shifted = m.clone();
    for i in 0..m.nrows() {
        shifted[(i, i)] -= lambda;
    }
    shifted
}

pub fn block2<T: Real>(a11: &CMat<T>, a12: &CMat<T>, a21: &CMat<T>, a22: &CMat<T>) -> CMat<T> {
    let (r1, c1) = a11.shape();
    let (r2, c2) = a22.shape();
    let mut out = CMat::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a11);
    out.view_mut((0, c1), (r1, c2)).copy_from(a12);
    out.view_mut((r1, 0), (r2, c1)).copy_from(a21);
    out.view_mut((r1, c1), (r2, c2)).copy_from(a22);
    out
}

/// Stacks two matrices with equal column counts.
pub fn vstack<T: Real>(top: &CMat<T>, bottom: &CMat<T>) -> CMat<T> {
    let mut out = CMat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

pub fn block_diag<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    block2(
        a,
        &CMat::zeros(a.nrows(), b.ncols()),
        &CMat::zeros(b.nrows(), a.ncols()),
        b,
    )
}

/// Hermitian eigendecomposition `(eigenvalues ascending, unitary eigenvectors)`.
pub fn hermitian_eigen<T: Real>(m: &CMat<T>) -> Result<(DVector<T>, CMat<T>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), CMat::zeros(0, 0)));
    }
    let h = (m + m.adjoint()) * creal(lit::<T>(0.5));
    let eig = SymmetricEigen::try_new(h, eps::<T>(), 0).ok_or(Error::Factorization("hermitian eigendecomposition"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

/// `V diag(f(d)) V^H` for a Hermitian eigendecomposition.
pub fn hermitian_function<T: Real>(vals: &DVector<T>, vecs: &CMat<T>, f: impl Fn(T) -> T) -> CMat<T> {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let fj = creal(f(vals[j]));
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vecs.adjoint()
}

/// Complex Schur form `m = Q U Q^H` with `U` upper triangular.
pub fn schur<T: Real>(m: &CMat<T>) -> Result<(CMat<T>, CMat<T>)> {
    if m.nrows() == 0 {
        return Ok((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    let s = Schur::try_new(m.clone(), eps::<T>(), 0).ok_or(Error::Factorization("complex Schur"))?;
    let (q, mut u) = s.unpack();
    let n = u.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            u[(i, j)] = Complex::new(T::zero(), T::zero());
        }
    }
    Ok((q, u))
}

pub fn eigenvalues<T: Real>(m: &CMat<T>) -> Result<Vec<Complex<T>>> {
    let (_, u) = schur(m)?;
    Ok((0..u.nrows()).map(|i| u[(i, i)]).collect())
}

/// Swaps the adjacent diagonal entries `k`, `k + 1` of an upper-triangular
/// Schur factor by a unitary rotation, updating `q` accordingly.
fn swap_adjacent<T: Real>(q: &mut CMat<T>, u: &mut CMat<T>, k: usize) {
    let n = u.nrows();
    let a = u[(k, k)];
    let b = u[(k + 1, k + 1)];
    let c = u[(k, k + 1)];
    let v0 = c;
    let v1 = b - a;
    let nv = (modulus(v0).powi(2) + modulus(v1).powi(2)).sqrt();
    if nv == T::zero() {
        return;
    }
    let v0 = v0 / creal(nv);
    let v1 = v1 / creal(nv);
    // columns of the rotation: v and its orthogonal complement w
    let g = [[v0, -v1.conj()], [v1, v0.conj()]];
    for j in 0..n {
        let x = u[(k, j)];
        let y = u[(k + 1, j)];
        u[(k, j)] = g[0][0].conj() * x + g[1][0].conj() * y;
        u[(k + 1, j)] = g[0][1].conj() * x + g[1][1].conj() * y;
    }
    for i in 0..n {
        let x = u[(i, k)];
        let y = u[(i, k + 1)];
        u[(i, k)] = x * g[0][0] + y * g[1][0];
        u[(i, k + 1)] = x * g[0][1] + y * g[1][1];
    }
    for i in 0..q.nrows() {
        let x = q[(i, k)];
        let y = q[(i, k + 1)];
        q[(i, k)] = x * g[0][0] + y * g[1][0];
        q[(i, k + 1)] = x * g[0][1] + y * g[1][1];
    }
    u[(k + 1, k)] = Complex::new(T::zero(), T::zero());
    u[(k, k)] = b;
    u[(k + 1, k + 1)] = a;
}

/// Reorders a complex Schur form so that the selected eigenvalues lead.
/// Returns the number of selected eigenvalues.
pub fn reorder_schur<T: Real>(q: &mut CMat<T>, u: &mut CMat<T>, select: impl Fn(Complex<T>) -> bool) -> usize {
    let n = u.nrows();
    let mut front = 0;
    for i in 0..n {
        if select(u[(i, i)]) {
            let mut k = i;
            while k > front {
                swap_adjacent(q, u, k - 1);
                k -= 1;
            }
            front += 1;
        }
    }
    front
}

/// Unit-norm eigenvectors of an upper-triangular matrix, column `k` belonging
/// to the diagonal entry `u[k,k]`.
pub fn triangular_eigenvectors<T: Real>(u: &CMat<T>) -> CMat<T> {
    let n = u.nrows();
    let scale = fold_max((0..n).map(|i| modulus(u[(i, i)])));
    let small = eps::<T>() * if scale > T::zero() { scale } else { T::one() };
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        let ukk = u[(k, k)];
        y[(k, k)] = creal(T::one());
        for i in (0..k).rev() {
            let mut s = Complex::new(T::zero(), T::zero());
            for j in (i + 1)..=k {
                s += u[(i, j)] * y[(j, k)];
            }
            let mut d = u[(i, i)] - ukk;
            if modulus(d) < small {
                d = creal(small);
            }
            y[(i, k)] = -s / d;
        }
        let nrm = y.column(k).norm();
        for i in 0..=k {
            y[(i, k)] /= creal(nrm);
        }
    }
    y
}

/// `(U - λ I)^{-1}` for upper-triangular `U`, by column-oriented back
/// substitution. Returns `None` when a shifted diagonal entry vanishes.
pub fn shifted_triangular_inverse<T: Real>(u: &CMat<T>, lambda: Complex<T>) -> Option<CMat<T>> {
    let n = u.nrows();
    let mut inv_diag = Vec::with_capacity(n);
    for i in 0..n {
        let d = u[(i, i)] - lambda;
        if modulus(d) == T::zero() {
            return None;
        }
        inv_diag.push(creal(T::one()) / d);
    }
    // Real and imaginary parts kept apart so the inner update vectorizes.
    let ure: Vec<T> = u.iter().map(|z| z.re).collect();
    let uim: Vec<T> = u.iter().map(|z| z.im).collect();
    let mut xre = vec![T::zero(); n * n];
    let mut xim = vec![T::zero(); n * n];
    for k in 0..n {
        let cre = &mut xre[k * n..k * n + k + 1];
        let cim = &mut xim[k * n..k * n + k + 1];
        cre[k] = T::one();
        for j in (0..=k).rev() {
            let xj = cplx(cre[j], cim[j]) * inv_diag[j];
            cre[j] = xj.re;
            cim[j] = xj.im;
            let (ur, ui) = (&ure[j * n..j * n + j], &uim[j * n..j * n + j]);
            for (((cr, ci), &a), &b) in cre[..j].iter_mut().zip(cim[..j].iter_mut()).zip(ur).zip(ui) {
                *cr -= a * xj.re - b * xj.im;
                *ci -= a * xj.im + b * xj.re;
            }
        }
    }
    Some(CMat::from_fn(n, n, |i, j| cplx(xre[j * n + i], xim[j * n + i])))
}

/// Solves `U11 Z - Z U22 = C` for upper-triangular `U11`, `U22` with disjoint spectra.
pub fn triangular_sylvester<T: Real>(u11: &CMat<T>, u22: &CMat<T>, c: &CMat<T>) -> Result<CMat<T>> {
    let k = u11.nrows();
    let q = u22.nrows();
    let mut z = CMat::zeros(k, q);
    for j in 0..q {
        for i in (0..k).rev() {
            let mut s = c[(i, j)];
            for l in (i + 1)..k {
                s -= u11[(i, l)] * z[(l, j)];
            }
            for l in 0..j {
                s += z[(i, l)] * u22[(l, j)];
            }
            let d = u11[(i, i)] - u22[(j, j)];
            if modulus(d) == T::zero() {
                return Err(Error::Factorization("Sylvester equation with common eigenvalue"));
            }
            z[(i, j)] = s / d;
        }
    }
    Ok(z)
}

/// Solves the Lyapunov equation `A^H X + X A = W` by the complex Schur method.
pub fn lyapunov<T: Real>(a: &CMat<T>, w: &CMat<T>) -> Result<CMat<T>> {
    let n = a.nrows();
    let (q, u) = schur(a)?;
    let wt = q.adjoint() * w * &q;
    let mut y = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = wt[(i, j)];
            for k in 0..i {
                s -= u[(k, i)].conj() * y[(k, j)];
            }
            for k in 0..j {
                s -= y[(i, k)] * u[(k, j)];
            }
            let d = u[(i, i)].conj() + u[(j, j)];
            if modulus(d) == T::zero() {
                return Err(Error::Factorization("Lyapunov equation with λ + conj(μ) = 0"));
            }
            y[(i, j)] = s / d;
        }
    }
    Ok(&q * y * q.adjoint())
}

/// Orthonormal basis of the dominant `k`-dimensional left singular subspace.
pub fn orthonormal_range<T: Real>(m: &CMat<T>, k: usize) -> Result<CMat<T>> {
    let rows = m.nrows();
    if k == 0 {
        return Ok(CMat::zeros(rows, 0));
    }
    if k > rows.min(m.ncols()) {
        return Err(Error::dim(
            "orthonormal_range",
            format!("rank <= {}", rows.min(m.ncols())),
            k,
        ));
    }
    // Dominant eigenvectors of m m^H are accurate when the k-th gap is wide.
    let gram = m * m.adjoint();
    let (vals, vecs) = hermitian_eigen(&gram)?;
    let top = vals[rows - 1];
    let kth = vals[rows - k];
    let next = if k < rows { vals[rows - k - 1] } else { T::zero() };
    if top > T::zero() && kth - next > lit::<T>(1e-4) * top {
        let cols: Vec<usize> = (0..k).map(|c| rows - 1 - c).collect();
        return Ok(CMat::from_fn(rows, k, |r, c| vecs[(r, cols[c])]));
    }
    let f = svd(m);
    if k > f.sigma.len() {
        return Err(Error::dim("orthonormal_range", format!("rank <= {}", f.sigma.len()), k));
    }
    if f.sigma[k - 1] == T::zero() {
        return Err(Error::Factorization("range of a rank-deficient matrix"));
    }
    Ok(f.u.columns(0, k).into_owned())
}

/// Largest principal-angle sine between the column spaces of two
/// orthonormal bases of equal dimension.
pub fn subspace_gap<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    if a.ncols() == 0 && b.ncols() == 0 {
        return T::zero();
    }
    let resid = b - a * (a.adjoint() * b);
    spectral_norm(&resid)
}

/// Greedy one-to-one matching of `from` onto `to` under `map`; returns the
/// largest matched distance (infinite when the sets have different sizes).
pub fn match_spectra<T: Real>(from: &[Complex<T>], to: &[Complex<T>], map: impl Fn(Complex<T>) -> Complex<T>) -> T {
    if from.len() != to.len() {
        return T::max_value().unwrap_or_else(|| lit(f64::MAX));
    }
    let mut used = vec![false; to.len()];
    let mut worst = T::zero();
    for &z in from {
        let target = map(z);
        let mut best: Option<(usize, T)> = None;
        for (j, &w) in to.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = modulus(w - target);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, d)) = best {
            used[j] = true;
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Groups eigenvalues whose distance is below `rel·max(1, |λ|)`; returns one
/// representative per cluster.
pub fn distinct_eigenvalues<T: Real>(eigs: &[Complex<T>], rel: f64) -> Vec<Complex<T>> {
    let rel: T = lit(rel);
    let mut reps: Vec<Complex<T>> = Vec::new();
    for &z in eigs {
        let scale = if modulus(z) > T::one() { modulus(z) } else { T::one() };
        if !reps.iter().any(|&w| modulus(w - z) <= rel * scale) {
            reps.push(z);
        }
    }
    reps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> CMat<f64> {
        // small deterministic LCG, independent of the crate's generators
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMat::from_fn(n, n, |_, _| Complex::new(next(), next()))
    }

    #[test]
    fn schur_reconstructs() {
        let m = sample(6, 3);
        let (q, u) = schur(&m).unwrap();
        assert!((&q * &u * q.adjoint() - &m).norm() < 1e-12);
        assert!((q.adjoint() * &q - identity::<f64>(6)).norm() < 1e-12);
    }

    #[test]
    fn reorder_moves_selected_eigenvalues_first() {
        let m = sample(7, 11);
        let (mut q, mut u) = schur(&m).unwrap();
        let k = reorder_schur(&mut q, &mut u, |z| z.re < 0.0);
        for i in 0..7 {
            assert_eq!(u[(i, i)].re < 0.0, i < k);
            for j in 0..i {
                assert_eq!(u[(i, j)], Complex::new(0.0, 0.0));
            }
        }
        assert!((&q * &u * q.adjoint() - &m).norm() < 1e-12);
    }

    #[test]
    fn triangular_eigenvectors_satisfy_eigen_equation() {
        let m = sample(5, 5);
        let (q, u) = schur(&m).unwrap();
        let y = triangular_eigenvectors(&u);
        let v = &q * &y;
        for k in 0..5 {
            let lam = u[(k, k)];
            let r = &m * v.column(k) - v.column(k) * lam;
            assert!(r.norm() < 1e-11, "column {k}: {}", r.norm());
        }
    }

    #[test]
    fn lyapunov_solution_satisfies_equation() {
        let n = 6;
        let mut a = sample(n, 9);
        for i in 0..n {
            a[(i, i)] -= Complex::new(3.0, 0.0);
        }
        let w = sample(n, 21);
        let x = lyapunov(&a, &w).unwrap();
        let r = a.adjoint() * &x + &x * &a - &w;
        assert!(r.norm() < 1e-11);
    }

    #[test]
    fn sylvester_on_triangular_blocks() {
        let (_, u) = schur(&sample(6, 2)).unwrap();
        let u11 = u.view((0, 0), (2, 2)).into_owned();
        let u22 = u.view((2, 2), (4, 4)).into_owned();
        let c = sample(6, 4).view((0, 0), (2, 4)).into_owned();
        let z = triangular_sylvester(&u11, &u22, &c).unwrap();
        assert!((&u11 * &z - &z * &u22 - &c).norm() < 1e-11);
    }

    #[test]
    fn shifted_triangular_inverse_matches_lu() {
        let (_, u) = schur(&sample(7, 6)).unwrap();
        let lam = Complex::new(0.3, -1.2);
        let fast = shifted_triangular_inverse(&u, lam).unwrap();
        let slow = resolvent(&u, lam).unwrap();
        assert!((fast - slow).norm() < 1e-12);
    }

    #[test]
    fn jacobi_svd_on_perturbed_rank_one() {
        let (c, sn) = ((std::f64::consts::PI / 8.0).cos(), (std::f64::consts::PI / 8.0).sin());
        let mut p = CMat::from_row_slice(2, 2, &[creal(c * c), creal(c * sn), creal(sn * c), creal(sn * sn)]);
        p[(0, 1)] += creal(1e-14);
        let f = svd(&p);
        let recon =
            &f.u * CMat::from_diagonal(&DVector::from_iterator(2, f.sigma.iter().map(|&x| creal(x)))) * f.v.adjoint();
        assert!((recon - &p).norm() < 1e-15);
        assert!((f.u[(0, 0)].norm() - c).abs() < 1e-14);
    }

    #[test]
    fn lanczos_norm_matches_dense() {
        let m = sample(150, 3);
        let dense = gram_values(&m).last().unwrap().sqrt();
        assert!((spectral_norm(&m) - dense).abs() <= 1e-12 * dense);
        // clustered top: two singular values 1 and 1 - 1e-9
        let q = sample(150, 4).qr().q();
        let mut d = CMat::<f64>::from_fn(150, 150, |i, j| {
            if i == j {
                creal(0.5 / (1 + i) as f64)
            } else {
                creal(0.0)
            }
        });
        d[(0, 0)] = creal(1.0);
        d[(1, 1)] = creal(1.0 - 1e-9);
        let m = &q * d * q.adjoint();
        assert!((spectral_norm(&m) - 1.0).abs() <= 1e-12);
        let wide = sample(150, 5).columns(0, 140).adjoint();
        let dense = gram_values(&wide).last().unwrap().sqrt();
        assert!((spectral_norm(&wide) - dense).abs() <= 1e-12 * dense);
    }

    #[test]
    fn split_matmul_matches_plain() {
        let (a, b) = (sample(70, 1), sample(70, 2));
        assert!((matmul(&a, &b) - &a * &b).norm() <= 1e-12 * (&a * &b).norm());
    }

    #[test]
    fn jacobi_svd_wide_and_tall() {
        let m = sample(7, 13).columns(0, 4).into_owned();
        for a in [m.clone(), m.adjoint()] {
            let f = svd(&a);
            let d = CMat::from_diagonal(&DVector::from_iterator(4, f.sigma.iter().map(|&x| creal(x))));
            assert!((&f.u * d * f.v.adjoint() - &a).norm() < 1e-13);
            assert!((f.u.adjoint() * &f.u - identity::<f64>(4)).norm() < 1e-13);
            assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn spectral_matching_of_permuted_sets() {
        let a = vec![Complex::new(1.0, 2.0), Complex::new(-3.0, 0.5)];
        let b = vec![Complex::new(3.0, 0.5), Complex::new(-1.0, 2.0)];
        let d = match_spectra(&a, &b, |z| -z.conj());
        assert!(d < 1e-15);
    }

    #[test]
    fn hermitian_function_square_root() {
        let m = sample(4, 8);
        let g = identity::<f64>(4) + &m * m.adjoint();
        let (vals, vecs) = hermitian_eigen(&g).unwrap();
        let root = hermitian_function(&vals, &vecs, |d| d.sqrt());
        assert!((&root * &root - &g).norm() < 1e-12 * g.norm());
    }
}

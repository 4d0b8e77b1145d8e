//! Series solutions of the double confluent Heun equation
//!
//! `z²E'' + (nz + μ(1 − z²))E' + (λ − μnz)E = 0`
//!
//! written as `E = z^b Σ a_k z^k`, whose coefficients obey
//!
//! `((k+b)(k+b+n−1) + λ) a_k − μ(k+b+n−1) a_{k−1} + μ(k+b+1) a_{k+1} = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bessel::{self, BesselError};
use crate::matprod::{converging_product, Complex2x2, MatProdError, MatrixFamily, ProductOptions, RecurrenceCoeffs};

/// Distance to the nearest integer below which a parameter counts as resonant.
pub const RESONANCE_TOL: f64 = 1e-9;

/// Default number of coefficients computed in each direction.
pub const DEFAULT_LENGTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeunError {
    #[error("μ must be non-zero")]
    ZeroMu,
    #[error("denominator vanishes at index {k}; use the other resonance case")]
    ResonanceDenominator { k: i64 },
    #[error("b or b + n is within the resonance tolerance of an integer")]
    ResonantParameters,
    #[error("n must not be a non-positive integer")]
    ForbiddenN,
    #[error("λ + μ² differs from 1/(4ω²) by {mismatch:e}")]
    InconsistentOmega { mismatch: f64 },
    #[error("n must not be an integer")]
    IntegerN,
    #[error("series exponents {from} and {to} do not differ by an integer")]
    ExponentMismatch { from: Complex64, to: Complex64 },
    #[error(transparent)]
    Product(#[from] MatProdError),
    #[error(transparent)]
    Bessel(#[from] BesselError),
}

pub type Result<T> = std::result::Result<T, HeunError>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Returns the nearest integer when `z` lies within [`RESONANCE_TOL`] of it.
pub fn near_integer(z: Complex64) -> Option<i64> {
    let r = z.re.round();
    ((z - r).norm() < RESONANCE_TOL).then_some(r as i64)
}

/// Parameters `(n, λ, μ, b)` of the equation and of the exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeunParams {
    pub n: Complex64,
    pub lambda: Complex64,
    pub mu: Complex64,
    pub b: Complex64,
}

impl HeunParams {
    pub fn new(n: Complex64, lambda: Complex64, mu: Complex64, b: Complex64) -> Result<Self> {
        if mu.norm() == 0.0 {
            return Err(HeunError::ZeroMu);
        }
        Ok(Self { n, lambda, mu, b })
    }

    pub fn real(n: f64, lambda: f64, mu: f64, b: f64) -> Result<Self> {
        Self::new(c(n), c(lambda), c(mu), c(b))
    }

    pub fn l(&self) -> Complex64 {
        self.n - 1.0
    }

    pub fn with_b(&self, b: Complex64) -> Self {
        Self { b, ..*self }
    }

    pub fn b_resonant(&self) -> bool {
        near_integer(self.b).is_some()
    }

    pub fn bn_resonant(&self) -> bool {
        near_integer(self.b + self.n).is_some()
    }

    pub fn is_resonant(&self) -> bool {
        self.b_resonant() || self.bn_resonant()
    }

    /// Integer members of `{−1 − b, 1 − b − n}`.
    fn resonant_indices(&self) -> Vec<i64> {
        [near_integer(-1.0 - self.b), near_integer(1.0 - self.b - self.n)]
            .into_iter()
            .flatten()
            .collect()
    }

    /// Recurrence coefficients `(f_k, g_k, h_k)`.
    pub fn recurrence(&self, k: i64) -> (Complex64, Complex64, Complex64) {
        recurrence_coeffs(self.n, self.lambda, self.mu, self.b, k)
    }
}

/// Recurrence coefficients for exponent `b`.
pub fn recurrence_coeffs(n: Complex64, lambda: Complex64, mu: Complex64, b: Complex64, k: i64) -> (Complex64, Complex64, Complex64) {
    let kb = b + k as f64;
    let f = -mu * (kb + n - 1.0);
    let g = kb * (kb + n - 1.0) + lambda;
    let h = mu * (kb + 1.0);
    (f, g, h)
}

impl RecurrenceCoeffs for HeunParams {
    fn coeffs(&self, k: i64) -> (Complex64, Complex64, Complex64) {
        self.recurrence(k)
    }
}

/// Matrices `M_k = [[1 + λ/((k+b)(k+b+n−1)), μ²/((k+b)(k+b+n−1))], [1, 0]]`.
#[derive(Debug, Clone, Copy)]
pub struct ForwardFamily {
    pub n: Complex64,
    pub lambda: Complex64,
    pub mu_sq: Complex64,
    pub b: Complex64,
}

impl ForwardFamily {
    pub fn new(p: &HeunParams) -> Self {
        Self { n: p.n, lambda: p.lambda, mu_sq: p.mu * p.mu, b: p.b }
    }

    /// Family with `b = 0`, `n = l + 1`: denominators `k(k + l)`.
    pub fn entire(l: Complex64, lambda: Complex64, mu: Complex64) -> Self {
        Self { n: l + 1.0, lambda, mu_sq: mu * mu, b: c(0.0) }
    }
}

impl MatrixFamily for ForwardFamily {
    fn matrix(&self, k: i64) -> Complex2x2 {
        let kb = self.b + k as f64;
        let d = kb * (kb + self.n - 1.0);
        Complex2x2::companion(1.0 + self.lambda / d, self.mu_sq / d)
    }

    fn scale_hint(&self) -> f64 {
        self.lambda.norm().sqrt() + self.mu_sq.norm().sqrt() + self.b.norm() + self.n.norm()
    }
}

/// Matrices `S_m` of the backward construction:
/// `[[1 + (λ−n+2)/((b−m+1)(b−m+n−2)), μ²(b−m+n−1)/((b−m+1)(b−m+n−2)(b−m+n−3))], [1, 0]]`.
#[derive(Debug, Clone, Copy)]
pub struct BackwardFamily {
    pub n: Complex64,
    pub lambda: Complex64,
    pub mu_sq: Complex64,
    pub b: Complex64,
}

impl BackwardFamily {
    pub fn new(p: &HeunParams) -> Self {
        Self { n: p.n, lambda: p.lambda, mu_sq: p.mu * p.mu, b: p.b }
    }
}

impl MatrixFamily for BackwardFamily {
    fn matrix(&self, m: i64) -> Complex2x2 {
        let bm = self.b - m as f64;
        let d1 = (bm + 1.0) * (bm + self.n - 2.0);
        let d2 = d1 * (bm + self.n - 3.0);
        Complex2x2::companion(1.0 + (self.lambda - self.n + 2.0) / d1, self.mu_sq * (bm + self.n - 1.0) / d2)
    }

    fn scale_hint(&self) -> f64 {
        self.lambda.norm().sqrt() + self.mu_sq.norm().sqrt() + self.b.norm() + self.n.norm()
    }
}

/// Products `R_k` for `k = lo..=hi`, evaluated once at `hi` and then by
/// `R_k = M_k R_{k+1}` downward.
pub(crate) fn product_ladder<F: MatrixFamily>(family: &F, lo: i64, hi: i64, tol: f64) -> Result<(Vec<Complex2x2>, f64)> {
    let top = converging_product(family, hi, tol)?;
    let mut out = vec![top.value; (hi - lo + 1) as usize];
    for k in (lo..hi).rev() {
        let i = (k - lo) as usize;
        out[i] = family.matrix(k) * out[i + 1];
        if !out[i].is_finite() {
            return Err(MatProdError::NonFinite { k }.into());
        }
    }
    let rel = top.tail_bound / top.value.norm().max(f64::MIN_POSITIVE);
    Ok((out, rel))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Backward,
    TwoSided,
}

/// Which construction fixed the overall scale of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Coefficients taken from product entries without rescaling.
    ProductEntry,
    /// Forward and backward parts matched through their d-vectors.
    DVectorMatched,
    /// Resonant two-sided series matched at index −1.
    ResonantMatched,
    /// Kernel vector of the tridiagonal matrix with leading coefficient 1.
    PolynomialKernel,
    /// Image under the # involution.
    SharpImage,
    /// Image under the ◇ transform.
    DiamondImage,
    /// Coefficients of an operator image.
    OperatorImage,
    /// Supplied by the caller.
    Explicit,
}

/// Coefficients `a_k` of `z^b Σ a_k z^k` on a finite window of indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSolution {
    pub direction: Direction,
    /// Anchor index: lowest index of a forward series, highest index of a
    /// backward series, lowest index of a two-sided series.
    pub offset: i64,
    /// Index of `coeffs[0]`.
    pub first_index: i64,
    pub exponent: Complex64,
    pub coeffs: Vec<Complex64>,
    pub normalization: Normalization,
    /// Relative error bound inherited from the product tail.
    pub truncation_error: f64,
    /// Coefficients below the window are exactly zero.
    pub exact_below: bool,
    /// Coefficients above the window are exactly zero.
    pub exact_above: bool,
    /// Number of lowest coefficients that are inexact because of truncation.
    pub edge_low: usize,
    /// Number of highest coefficients that are inexact because of truncation.
    pub edge_high: usize,
}

impl SeriesSolution {
    /// A series with exact coefficients and no implied tail.
    pub fn explicit(first_index: i64, exponent: Complex64, coeffs: Vec<Complex64>) -> Self {
        Self {
            direction: Direction::TwoSided,
            offset: first_index,
            first_index,
            exponent,
            coeffs,
            normalization: Normalization::Explicit,
            truncation_error: 0.0,
            exact_below: true,
            exact_above: true,
            edge_low: 0,
            edge_high: 0,
        }
    }

    pub fn last_index(&self) -> i64 {
        self.first_index + self.coeffs.len() as i64 - 1
    }

    /// Coefficient `a_k`, zero outside the window.
    pub fn coeff(&self, k: i64) -> Complex64 {
        if k < self.first_index || k > self.last_index() {
            return c(0.0);
        }
        self.coeffs[(k - self.first_index) as usize]
    }

    /// Indices whose values are not affected by truncation.
    pub fn interior(&self) -> std::ops::RangeInclusive<i64> {
        (self.first_index + self.edge_low as i64)..=(self.last_index() - self.edge_high as i64)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Keeps only the coefficients with index in `lo..=hi`; the dropped
    /// ones are treated as exact zeros.
    pub fn restricted(&self, lo: i64, hi: i64) -> Self {
        let lo2 = lo.max(self.first_index);
        let hi2 = hi.min(self.last_index());
        let coeffs = (lo2..=hi2).map(|k| self.coeff(k)).collect();
        Self {
            first_index: lo2,
            offset: lo2,
            coeffs,
            exact_below: if lo2 > self.first_index { true } else { self.exact_below },
            exact_above: if hi2 < self.last_index() { true } else { self.exact_above },
            edge_low: if lo2 > self.first_index { 0 } else { self.edge_low },
            edge_high: if hi2 < self.last_index() { 0 } else { self.edge_high },
            ..self.clone()
        }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| a * s).collect(), ..self.clone() }
    }

    /// Rewrites the series with exponent `target`, which must differ from the
    /// current exponent by an integer.
    pub fn with_exponent(&self, target: Complex64) -> Result<Self> {
        let shift = near_integer(target - self.exponent)
            .ok_or(HeunError::ExponentMismatch { from: self.exponent, to: target })?;
        // z^b Σ a_k z^k = z^{b+d} Σ a_k z^{k−d}.
        Ok(Self {
            first_index: self.first_index - shift,
            offset: self.offset - shift,
            exponent: target,
            ..self.clone()
        })
    }

    /// Evaluates `z^b Σ a_k z^k` with the principal branch of `z^b`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let sum: Complex64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a * z.powi((self.first_index + i as i64) as i32))
            .sum();
        sum * z.powc(self.exponent)
    }

    /// Derivative of [`SeriesSolution::eval`].
    pub fn eval_derivative(&self, z: Complex64) -> Complex64 {
        let sum: Complex64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let k = self.first_index + i as i64;
                a * (self.exponent + k as f64) * z.powi((k - 1) as i32)
            })
            .sum();
        sum * z.powc(self.exponent)
    }

    /// Relative recurrence residuals at indices whose two neighbours lie
    /// inside the window.
    pub fn recurrence_residuals(&self, p: &HeunParams) -> Vec<(i64, f64)> {
        let lo = self.first_index + self.edge_low as i64 + 1;
        let hi = self.last_index() - self.edge_high as i64 - 1;
        (lo..=hi)
            .map(|k| {
                let (f, g, h) = recurrence_coeffs(p.n, p.lambda, p.mu, self.exponent, k);
                let terms = [f * self.coeff(k - 1), g * self.coeff(k), h * self.coeff(k + 1)];
                let size: f64 = terms.iter().map(|t| t.norm()).sum();
                let sum: Complex64 = terms.iter().sum();
                (k, if size > 0.0 { sum.norm() / size } else { 0.0 })
            })
            .collect()
    }
}

fn check_mu(mu: Complex64) -> Result<()> {
    if mu.norm() == 0.0 {
        Err(HeunError::ZeroMu)
    } else {
        Ok(())
    }
}

fn nonzero(d: Complex64, k: i64) -> Result<Complex64> {
    if d.norm() < RESONANCE_TOL {
        Err(HeunError::ResonanceDenominator { k })
    } else {
        Ok(d)
    }
}

/// Series `Σ_{k ≥ k0} a_k z^k` solving the recurrence for `k > k0`.
///
/// Non-resonant parameters use `k0 = 0` and `a_k = μ^k c_k/(b)_{k+1}`
/// with `c_k = R_{k,21}`. In the resonant case `k0` is the largest integer
/// in `{−1−b, 1−b−n}`.
pub fn forward_solution(p: &HeunParams, tol: f64, length: usize) -> Result<SeriesSolution> {
    check_mu(p.mu)?;
    let family = ForwardFamily::new(p);
    let len = length.max(2) as i64;
    let resonant = p.resonant_indices().into_iter().max();
    let (k0, first_product) = match resonant {
        Some(k0) => (k0, k0 + 2),
        None => (0, 1),
    };
    for k in first_product..=first_product + len {
        nonzero((p.b + k as f64) * (p.b + k as f64 + p.n - 1.0), k)?;
    }
    let (ladder, rel) = product_ladder(&family, first_product, first_product + len, tol)?;
    // c_{first_product − 1} = R_{first_product,11}; c_k = R_{k,21} above.
    let c_at = |k: i64| -> Complex64 {
        if k == first_product - 1 {
            ladder[0].m11
        } else {
            ladder[(k - first_product) as usize].m21
        }
    };
    let mut coeffs = Vec::with_capacity(len as usize + 1);
    match resonant {
        None => {
            let mut q = 1.0 / nonzero(p.b, 0)?;
            for k in 0..=len {
                if k > 0 {
                    q *= p.mu / nonzero(p.b + k as f64, k)?;
                }
                coeffs.push(q * c_at(k));
            }
        }
        Some(_) => {
            let mut tail = Vec::with_capacity(len as usize);
            let mut q = c(1.0);
            for k in (k0 + 1)..=(k0 + len) {
                if k > k0 + 1 {
                    q *= p.mu / nonzero(p.b + k as f64, k)?;
                }
                tail.push(q * c_at(k));
            }
            let kb = p.b + k0 as f64;
            let num = ((kb + 1.0) * (kb + p.n) + p.lambda) * tail[0] + p.mu * (kb + 2.0) * tail[1];
            let a_k0 = num / nonzero(p.mu * (kb + p.n), k0)?;
            coeffs.push(a_k0);
            coeffs.extend(tail);
        }
    }
    Ok(SeriesSolution {
        direction: Direction::Forward,
        offset: k0,
        first_index: k0,
        exponent: p.b,
        coeffs,
        normalization: Normalization::ProductEntry,
        truncation_error: rel,
        exact_below: true,
        exact_above: false,
        edge_low: 0,
        edge_high: 0,
    })
}

/// Series `Σ_{k ≤ k0} a_k z^k` solving the recurrence for `k < k0`.
///
/// Non-resonant parameters use `k0 = 0` and `a_{−m} = ĉ_m μ^m/(2−n−b)_{m+1}`
/// with `ĉ_m = T_{m,21}`. In the resonant case `k0` is the smallest integer
/// in `{−1−b, 1−b−n}`.
pub fn backward_solution(p: &HeunParams, tol: f64, length: usize) -> Result<SeriesSolution> {
    check_mu(p.mu)?;
    let family = BackwardFamily::new(p);
    let len = length.max(2) as i64;
    let resonant = p.resonant_indices().into_iter().min();
    let m0 = resonant.map_or(0, |k| -k);
    let first_product = if resonant.is_some() { m0 + 1 } else { 0 };
    for m in first_product..=m0 + len {
        let bm = p.b - m as f64;
        nonzero((bm + 1.0) * (bm + p.n - 2.0) * (bm + p.n - 3.0), -m)?;
    }
    let (ladder, rel) = product_ladder(&family, first_product, (m0 + len).max(first_product + 1), tol)?;
    let c_hat = |m: i64| -> Complex64 {
        if m == first_product - 1 {
            ladder[0].m11
        } else {
            ladder[(m - first_product) as usize].m21
        }
    };
    let x = 2.0 - p.n - p.b;
    let mut hat = Vec::with_capacity(len as usize + 1);
    let mut q = p.mu.powi(m0 as i32) / nonzero(x + m0 as f64, -m0)?;
    for m in m0..=(m0 + len) {
        if m > m0 {
            q *= p.mu / nonzero(x + m as f64, -m)?;
        }
        hat.push(q * c_hat(m));
    }
    hat.reverse();
    let k0 = -m0;
    Ok(SeriesSolution {
        direction: Direction::Backward,
        offset: k0,
        first_index: k0 - len,
        exponent: p.b,
        coeffs: hat,
        normalization: Normalization::ProductEntry,
        truncation_error: rel,
        exact_below: false,
        exact_above: true,
        edge_low: 0,
        edge_high: 0,
    })
}

/// Taylor series `E = Σ_{k≥0} a_k z^k` with `ℒE ≡ ξ`, and the constant `ξ`.
pub fn entire_solution(n: Complex64, lambda: Complex64, mu: Complex64, tol: f64, length: usize) -> Result<(SeriesSolution, Complex64)> {
    check_mu(mu)?;
    if let Some(k) = near_integer(n) {
        if k <= 0 {
            return Err(HeunError::ForbiddenN);
        }
    }
    let family = ForwardFamily::entire(n - 1.0, lambda, mu);
    let len = length.max(2) as i64;
    let (ladder, rel) = product_ladder(&family, 1, len, tol)?;
    let mut coeffs = Vec::with_capacity(len as usize + 1);
    coeffs.push(ladder[0].m11);
    let mut q = c(1.0);
    for k in 1..=len {
        q *= mu / k as f64;
        coeffs.push(q * ladder[(k - 1) as usize].m21);
    }
    let xi = lambda * coeffs[0] + mu * coeffs[1];
    let s = SeriesSolution {
        direction: Direction::Forward,
        offset: 0,
        first_index: 0,
        exponent: c(0.0),
        coeffs,
        normalization: Normalization::ProductEntry,
        truncation_error: rel,
        exact_below: true,
        exact_above: false,
        edge_low: 0,
        edge_high: 0,
    };
    Ok((s, xi))
}

/// Pair `(d_0, d_1)` with `z^{−b} ℒ(z^b f) = d_0 + d_1 z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DVector {
    pub d0: Complex64,
    pub d1: Complex64,
}

impl DVector {
    pub fn norm_sq(&self) -> f64 {
        self.d0.norm_sqr() + self.d1.norm_sqr()
    }
}

/// The forward and backward d-vectors for non-resonant parameters.
pub fn d_vectors(p: &HeunParams, tol: f64) -> Result<(DVector, DVector)> {
    let (fwd, bwd) = solution_pair(p, tol, 4)?;
    Ok(d_vectors_of(p, &fwd, &bwd))
}

fn solution_pair(p: &HeunParams, tol: f64, length: usize) -> Result<(SeriesSolution, SeriesSolution)> {
    check_mu(p.mu)?;
    if p.is_resonant() {
        return Err(HeunError::ResonantParameters);
    }
    Ok((forward_solution(p, tol, length)?, backward_solution(p, tol, length)?))
}

fn d_vectors_of(p: &HeunParams, fwd: &SeriesSolution, bwd: &SeriesSolution) -> (DVector, DVector) {
    let (b, n, lambda, mu) = (p.b, p.n, p.lambda, p.mu);
    let (a1, a2) = (fwd.coeff(1), fwd.coeff(2));
    let plus = DVector { d0: mu * (b + 1.0) * a1, d1: ((b + 1.0) * (b + n) + lambda) * a1 + mu * (b + 2.0) * a2 };
    let (a0, am1) = (bwd.coeff(0), bwd.coeff(-1));
    let minus = DVector { d0: (b * (b + n - 1.0) + lambda) * a0 - mu * (b + n - 1.0) * am1, d1: -mu * (b + n) * a0 };
    (plus, minus)
}

/// `|d_{0+}d_{1−} − d_{0−}d_{1+}|` divided by the sum of the magnitudes of
/// its two products.
pub fn pasting_determinant(plus: &DVector, minus: &DVector) -> f64 {
    let t1 = plus.d0 * minus.d1;
    let t2 = minus.d0 * plus.d1;
    let scale = t1.norm() + t2.norm();
    if scale == 0.0 {
        0.0
    } else {
        (t1 - t2).norm() / scale
    }
}

/// Glues the forward and backward series into `z^b(f_+(z) + f_−(1/z))`
/// when the normalized pasting determinant is at most `tol`.
pub fn assemble_eigenfunction(p: &HeunParams, tol: f64) -> Result<Option<SeriesSolution>> {
    assemble_eigenfunction_with(p, tol, DEFAULT_LENGTH)
}

/// [`assemble_eigenfunction`] with an explicit window length.
pub fn assemble_eigenfunction_with(p: &HeunParams, tol: f64, length: usize) -> Result<Option<SeriesSolution>> {
    let product_tol = ProductOptions::default().tol;
    let (fwd, bwd) = solution_pair(p, product_tol, length)?;
    let (plus, minus) = d_vectors_of(p, &fwd, &bwd);
    if pasting_determinant(&plus, &minus) > tol {
        return Ok(None);
    }
    // Least-squares scale s with d_+ + s d_− = 0.
    let s = -(plus.d0 * minus.d0.conj() + plus.d1 * minus.d1.conj()) / minus.norm_sq();
    let len = length as i64;
    let coeffs = (-len..=len)
        .map(|k| if k >= 1 { fwd.coeff(k) } else { s * bwd.coeff(k) })
        .collect();
    Ok(Some(SeriesSolution {
        direction: Direction::TwoSided,
        offset: -len,
        first_index: -len,
        exponent: p.b,
        coeffs,
        normalization: Normalization::DVectorMatched,
        truncation_error: fwd.truncation_error.max(bwd.truncation_error),
        exact_below: false,
        exact_above: false,
        edge_low: 0,
        edge_high: 0,
    }))
}

/// Two-sided series with `b = 0` for non-integer `n`, glued at index −1.
///
/// Returns `None` when the resonant pasting value, normalized by its scale,
/// exceeds `tol`.
pub fn assemble_resonant_holomorphic(n: Complex64, lambda: Complex64, mu: Complex64, tol: f64) -> Result<Option<SeriesSolution>> {
    check_mu(mu)?;
    if near_integer(n).is_some() {
        return Err(HeunError::IntegerN);
    }
    let p = HeunParams::new(n, lambda, mu, c(0.0))?;
    let product_tol = ProductOptions::default().tol;
    let fwd = forward_solution(&p, product_tol, DEFAULT_LENGTH)?;
    let bwd = backward_solution(&p, product_tol, DEFAULT_LENGTH)?;
    // The backward part must satisfy the recurrence at k = −1, where a_0 drops out.
    let (f, g, _) = p.recurrence(-1);
    let terms = [f * bwd.coeff(-2), g * bwd.coeff(-1)];
    let scale = terms[0].norm() + terms[1].norm();
    if scale > 0.0 && (terms[0] + terms[1]).norm() / scale > tol {
        return Ok(None);
    }
    let anchor = fwd.coeff(-1);
    if anchor.norm() <= RESONANCE_TOL * fwd.max_abs() {
        return Err(HeunError::ResonanceDenominator { k: -1 });
    }
    let t = bwd.coeff(-1) / anchor;
    let len = DEFAULT_LENGTH as i64;
    let coeffs = (-len..=len)
        .map(|k| if k >= 0 { t * fwd.coeff(k) } else { bwd.coeff(k) })
        .collect();
    Ok(Some(SeriesSolution {
        direction: Direction::TwoSided,
        offset: -len,
        first_index: -len,
        exponent: c(0.0),
        coeffs,
        normalization: Normalization::ResonantMatched,
        truncation_error: fwd.truncation_error.max(bwd.truncation_error),
        exact_below: false,
        exact_above: false,
        edge_low: 0,
        edge_high: 0,
    }))
}

/// Polynomial `Σ_{k<l} a_k z^k` annihilated by the operator with
/// `n = 1 − l`, built from the kernel of the tridiagonal matrix `H + λ`.
///
/// Only a genuine solution when the tridiagonal determinant vanishes; the
/// last row of the system is not imposed.
pub fn polynomial_solution(l: usize, lambda: Complex64, mu: Complex64) -> Result<SeriesSolution> {
    check_mu(mu)?;
    let l = l.max(1);
    let lf = l as f64;
    let mut a = vec![c(0.0); l];
    a[0] = c(1.0);
    for k in 0..l.saturating_sub(1) {
        let kf = k as f64;
        let prev = if k > 0 { a[k - 1] } else { c(0.0) };
        let row = (kf * (kf - lf) + lambda) * a[k] + mu * (lf - kf) * prev;
        a[k + 1] = -row / (mu * (kf + 1.0));
    }
    Ok(SeriesSolution {
        direction: Direction::Forward,
        offset: 0,
        first_index: 0,
        exponent: c(0.0),
        coeffs: a,
        normalization: Normalization::PolynomialKernel,
        truncation_error: 0.0,
        exact_below: true,
        exact_above: true,
        edge_low: 0,
        edge_high: 0,
    })
}

/// Coefficients of `z^{−b} ℒ(z^b Σ a_k z^k)`, with `b` taken from the
/// series exponent and `(n, λ, μ)` from `p`.
pub fn apply_heun_operator(s: &SeriesSolution, p: &HeunParams) -> SeriesSolution {
    let lo = s.first_index - 1;
    let hi = s.last_index() + 1;
    let coeffs = (lo..=hi)
        .map(|k| {
            let (f, g, h) = recurrence_coeffs(p.n, p.lambda, p.mu, s.exponent, k);
            f * s.coeff(k - 1) + g * s.coeff(k) + h * s.coeff(k + 1)
        })
        .collect();
    SeriesSolution {
        direction: s.direction,
        offset: lo,
        first_index: lo,
        exponent: s.exponent,
        coeffs,
        normalization: Normalization::OperatorImage,
        truncation_error: s.truncation_error,
        exact_below: s.exact_below,
        exact_above: s.exact_above,
        edge_low: if s.exact_below { s.edge_low } else { s.edge_low + 2 },
        edge_high: if s.exact_above { s.edge_high } else { s.edge_high + 2 },
    }
}

/// Image under `E ↦ 2ω z^{−n}(E'(1/z) − μE(1/z))`.
///
/// Requires `λ + μ² = 1/(4ω²)`. The image has exponent `−b − n`.
pub fn sharp_involution(s: &SeriesSolution, p: &HeunParams, omega: Complex64) -> Result<SeriesSolution> {
    let target = 1.0 / (4.0 * omega * omega);
    let mismatch = (p.lambda + p.mu * p.mu - target).norm();
    if !(mismatch <= 1e-12 * target.norm().max(1.0)) {
        return Err(HeunError::InconsistentOmega { mismatch });
    }
    let (b, mu) = (s.exponent, p.mu);
    let lo = -s.last_index();
    let hi = 1 - s.first_index;
    let coeffs = (lo..=hi)
        .map(|j| 2.0 * omega * ((b + (1 - j) as f64) * s.coeff(1 - j) - mu * s.coeff(-j)))
        .collect();
    Ok(SeriesSolution {
        direction: match s.direction {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
            Direction::TwoSided => Direction::TwoSided,
        },
        offset: lo,
        first_index: lo,
        exponent: -b - p.n,
        coeffs,
        normalization: Normalization::SharpImage,
        truncation_error: s.truncation_error,
        exact_below: s.exact_above,
        exact_above: s.exact_below,
        edge_low: s.edge_high + usize::from(!s.exact_above),
        edge_high: s.edge_low + usize::from(!s.exact_below),
    })
}

/// Image under `E ↦ e^{μ(z+1/z)} E(−1/z)`.
///
/// The exponent becomes `−b`; the constant factor `(−1)^b` is dropped so
/// that `(−1/z)^{b+k}` reads `(−1)^k z^{−b−k}`.
pub fn diamond_transform(s: &SeriesSolution, mu: Complex64) -> Result<SeriesSolution> {
    let x = 2.0 * mu;
    let weights = bessel::generating_coefficients(x, 1e-18)?;
    let m_max = weights.len() as i64 - 1;
    // Coefficients of Σ a_k (−1)^k z^{−k}: index j carries (−1)^j a_{−j}.
    let flipped_lo = -s.last_index();
    let flipped_hi = -s.first_index;
    let flipped = |j: i64| -> Complex64 {
        if j < flipped_lo || j > flipped_hi {
            c(0.0)
        } else {
            let sign = if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            sign * s.coeff(-j)
        }
    };
    let lo = flipped_lo - m_max;
    let hi = flipped_hi + m_max;
    let coeffs = (lo..=hi)
        .map(|j| {
            (-m_max..=m_max)
                .map(|m| weights[m.unsigned_abs() as usize] * flipped(j - m))
                .sum()
        })
        .collect();
    let spread = m_max as usize;
    Ok(SeriesSolution {
        direction: Direction::TwoSided,
        offset: lo,
        first_index: lo,
        exponent: -s.exponent,
        coeffs,
        normalization: Normalization::DiamondImage,
        truncation_error: s.truncation_error,
        exact_below: s.exact_above,
        exact_above: s.exact_below,
        edge_low: if s.exact_above { 0 } else { s.edge_high + 2 * spread },
        edge_high: if s.exact_below { 0 } else { s.edge_low + 2 * spread },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matprod::projective_backward_solve;
    use proptest::prelude::*;

    const TOL: f64 = 1e-13;

    fn base() -> HeunParams {
        HeunParams::real(1.4, 0.1, 0.2, 0.3).unwrap()
    }

    /// Coefficients of `z^{-b} ℒ(z^b Σ a_k z^k)` expanded from the
    /// differential operator term by term, independent of the recurrence.
    fn operator_by_derivatives(a: &[(i64, Complex64)], b: Complex64, n: Complex64, lambda: Complex64, mu: Complex64) -> Vec<(i64, Complex64)> {
        use std::collections::BTreeMap;
        let mut out: BTreeMap<i64, Complex64> = BTreeMap::new();
        for &(k, ak) in a {
            let e = b + k as f64; // exponent of the term z^{k+b}
            // z² E'': e(e−1) z^{k+b}
            *out.entry(k).or_default() += ak * e * (e - 1.0);
            // n z E': n e z^{k+b}
            *out.entry(k).or_default() += ak * n * e;
            // μ E': μ e z^{k+b−1}
            *out.entry(k - 1).or_default() += ak * mu * e;
            // −μ z² E': −μ e z^{k+b+1}
            *out.entry(k + 1).or_default() -= ak * mu * e;
            // λ E
            *out.entry(k).or_default() += ak * lambda;
            // −μ n z E
            *out.entry(k + 1).or_default() -= ak * mu * n;
        }
        out.into_iter().collect()
    }

    #[test]
    fn monomial_operator_image() {
        let p = HeunParams::real(2.0, 3.0, 5.0, 0.0).unwrap();
        let s = SeriesSolution::explicit(1, c(0.0), vec![c(1.0)]);
        let img = apply_heun_operator(&s, &p);
        let oracle = operator_by_derivatives(&[(1, c(1.0))], c(0.0), p.n, p.lambda, p.mu);
        // Expansion of ℒ(z) = 5 + 5z − 15z² at these parameters.
        assert_eq!(oracle, vec![(0, c(5.0)), (1, c(5.0)), (2, c(-15.0))]);
        for (k, v) in oracle {
            assert!((img.coeff(k) - v).norm() < 1e-14, "k = {k}");
        }
    }

    #[test]
    fn operator_matches_derivative_expansion() {
        let (n, lambda, mu, b) = (Complex64::new(1.3, 0.2), Complex64::new(-0.4, 0.7), Complex64::new(0.6, -0.1), Complex64::new(0.25, 0.1));
        let terms: Vec<(i64, Complex64)> = (-3..=4).map(|k| (k, Complex64::new(k as f64 * 0.3 + 1.0, 0.1 * k as f64))).collect();
        let s = SeriesSolution::explicit(-3, b, terms.iter().map(|t| t.1).collect());
        let p = HeunParams::new(n, lambda, mu, b).unwrap();
        let img = apply_heun_operator(&s, &p);
        for (k, v) in operator_by_derivatives(&terms, b, n, lambda, mu) {
            assert!((img.coeff(k) - v).norm() < 1e-13, "k = {k}");
        }
        let zero = SeriesSolution::explicit(0, b, vec![c(0.0); 5]);
        assert!(apply_heun_operator(&zero, &p).max_abs() == 0.0);
    }

    #[test]
    fn forward_residuals_and_oracle() {
        let p = base();
        let s = forward_solution(&p, TOL, 64).unwrap();
        assert_eq!(s.offset, 0);
        for (k, r) in s.recurrence_residuals(&p) {
            if (1..=50).contains(&k) {
                assert!(r < 1e-12, "k = {k}, r = {r:e}");
            }
        }
        let xs = projective_backward_solve(&p, 200, 0).unwrap();
        let x1 = xs[1].value().unwrap();
        assert!((s.coeff(2) / s.coeff(1) - x1).norm() < 1e-10 * x1.norm());
        let deeper = projective_backward_solve(&p, 400, 0).unwrap();
        assert!((deeper[1].value().unwrap() - x1).norm() < 1e-10 * x1.norm());
        for a in &s.coeffs {
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn forward_a0_matches_boundary_product() {
        let l = 1.3;
        let p = HeunParams::real(l + 1.0, 0.2, 0.35, -l / 2.0).unwrap();
        let s = forward_solution(&p, TOL, 16).unwrap();
        let r0 = converging_product(&ForwardFamily::new(&p), 0, TOL).unwrap();
        let want = -(2.0 / l) * r0.value.m21;
        assert!((s.coeff(0) - want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn backward_residuals_and_oracle() {
        let p = base();
        let s = backward_solution(&p, TOL, 64).unwrap();
        assert_eq!(s.offset, 0);
        assert_eq!(s.last_index(), 0);
        for (k, r) in s.recurrence_residuals(&p) {
            if (-50..=-1).contains(&k) {
                assert!(r < 1e-12, "k = {k}, r = {r:e}");
            }
        }
        // Reversed recurrence: index j = −k, coefficients (h_{−j}, g_{−j}, f_{−j}).
        let rev = move |j: i64| {
            let (f, g, h) = p.recurrence(-j);
            (h, g, f)
        };
        let xs = projective_backward_solve(&rev, 300, 0).unwrap();
        for k in -40..=-10 {
            // x_j = â_{j+1}/â_j = a_{k−1}/a_k with j = −k.
            let want = xs[(-k) as usize].value().unwrap();
            let got = s.coeff(k - 1) / s.coeff(k);
            assert!((got - want).norm() < 1e-10 * want.norm(), "k = {k}");
        }
    }

    #[test]
    fn resonant_offsets() {
        let p = HeunParams::real(2.0, 0.3, 0.4, 0.0).unwrap();
        let s = backward_solution(&p, TOL, 32).unwrap();
        assert_eq!(s.offset, -1);
        for (_, r) in s.recurrence_residuals(&p) {
            assert!(r < 1e-12);
        }
        let f = forward_solution(&p, TOL, 32).unwrap();
        assert_eq!(f.offset, -1);
        for (_, r) in f.recurrence_residuals(&p) {
            assert!(r < 1e-12);
        }
        let q = HeunParams::real(1.5, 0.3, 0.4, 0.0).unwrap();
        let f = forward_solution(&q, TOL, 32).unwrap();
        assert_eq!(f.offset, -1);
        let (_, xi) = entire_solution(q.n, q.lambda, q.mu, TOL, 32).unwrap();
        // a_{−1} = ξ/(μ l) ties the resonant forward series to ξ.
        let want = xi / (q.mu * q.l());
        let scale = f.coeff(0).norm();
        let (e, _) = entire_solution(q.n, q.lambda, q.mu, TOL, 32).unwrap();
        let ratio = f.coeff(0) / e.coeff(0);
        assert!((f.coeff(-1) - want * ratio).norm() < 1e-12 * scale.max(1.0));
    }

    #[test]
    fn entire_solution_is_constant_image() {
        let (n, lambda, mu) = (c(1.7), c(0.3), c(0.4));
        let (s, xi) = entire_solution(n, lambda, mu, TOL, 64).unwrap();
        let p = HeunParams::new(n, lambda, mu, c(0.0)).unwrap();
        let img = apply_heun_operator(&s, &p);
        assert!((img.coeff(0) - xi).norm() < 1e-13);
        assert!(img.coeff(-1).norm() == 0.0);
        for k in img.interior() {
            if k >= 1 {
                assert!(img.coeff(k).norm() < 1e-13 * s.max_abs(), "k = {k}");
            }
        }
        assert!(matches!(entire_solution(c(-1.0), lambda, mu, TOL, 8), Err(HeunError::ForbiddenN)));
        assert!(matches!(entire_solution(n, lambda, c(0.0), TOL, 8), Err(HeunError::ZeroMu)));
    }

    #[test]
    fn entire_solution_conjugation() {
        let (n, lambda, mu) = (c(1.7), Complex64::new(0.3, 0.1), Complex64::new(0.4, -0.2));
        let (_, xi) = entire_solution(n, lambda, mu, TOL, 32).unwrap();
        let (_, xi_bar) = entire_solution(n.conj(), lambda.conj(), mu.conj(), TOL, 32).unwrap();
        assert!((xi_bar - xi.conj()).norm() < 1e-13 * xi.norm().max(1.0));
    }

    #[test]
    fn d_vectors_match_operator() {
        let p = HeunParams::real(1.4, 0.7, 0.45, 0.25).unwrap();
        let (plus, minus) = d_vectors(&p, TOL).unwrap();
        for z in [plus.d0, plus.d1, minus.d0, minus.d1] {
            assert_eq!(z.im, 0.0);
        }
        let f = forward_solution(&p, TOL, 64).unwrap().restricted(1, i64::MAX);
        let img = apply_heun_operator(&f, &p);
        assert!((img.coeff(0) - plus.d0).norm() < 1e-12 * plus.d0.norm().max(1.0));
        assert!((img.coeff(1) - plus.d1).norm() < 1e-12 * plus.d1.norm().max(1.0));
        for k in 2..=55 {
            assert!(img.coeff(k).norm() < 1e-13 * f.max_abs());
        }
        let bw = backward_solution(&p, TOL, 64).unwrap();
        let img = apply_heun_operator(&bw, &p);
        assert!((img.coeff(0) - minus.d0).norm() < 1e-12 * minus.d0.norm().max(1.0));
        assert!((img.coeff(1) - minus.d1).norm() < 1e-12 * minus.d1.norm().max(1.0));
        assert!(matches!(d_vectors(&p.with_b(c(1.0)), TOL), Err(HeunError::ResonantParameters)));
    }

    #[test]
    fn sharp_requires_consistent_omega() {
        let p = base();
        let s = forward_solution(&p, TOL, 8).unwrap();
        assert!(matches!(sharp_involution(&s, &p, c(1.0)), Err(HeunError::InconsistentOmega { .. })));
    }

    #[test]
    fn sharp_is_involutive_on_solutions() {
        // λ + μ² = 1/(4ω²) with ω = 0.8.
        let omega = 0.8;
        let mu = 0.35;
        let lambda = 1.0 / (4.0 * omega * omega) - mu * mu;
        let p = HeunParams::real(1.6, lambda, mu, 0.3).unwrap();
        let s = forward_solution(&p, TOL, 64).unwrap().restricted(1, i64::MAX);
        let once = sharp_involution(&s, &p, c(omega)).unwrap();
        let twice = sharp_involution(&once, &p, c(omega)).unwrap();
        assert!((twice.exponent - s.exponent).norm() < 1e-15);
        // Away from the window ends the double image reproduces the input
        // up to the operator residual, which is only non-zero at k ≤ 1.
        for k in 4..=55 {
            assert!((twice.coeff(k) - s.coeff(k)).norm() < 1e-12 * s.max_abs(), "k = {k}");
        }
    }

    #[test]
    fn diamond_of_constant_is_bessel() {
        let mu = Complex64::new(0.7, 0.2);
        let one = SeriesSolution::explicit(0, c(0.0), vec![c(1.0)]);
        let img = diamond_transform(&one, mu).unwrap();
        for k in -6i64..=6 {
            let want = bessel::bessel_i(k.unsigned_abs(), 2.0 * mu).unwrap();
            assert!((img.coeff(k) - want).norm() < 1e-15);
        }
        let zero_mu = diamond_transform(&SeriesSolution::explicit(1, c(0.0), vec![c(2.0), c(3.0)]), c(0.0)).unwrap();
        assert!((zero_mu.coeff(-1) + 2.0).norm() < 1e-15);
        assert!((zero_mu.coeff(-2) - 3.0).norm() < 1e-15);
    }

    #[test]
    fn polynomial_diamond_solves_original_family() {
        // l = 2: det(H + λ) = λ(λ − 1) − μ² vanishes at λ = (1 + √(1 + 4μ²))/2.
        let mu: f64 = 0.6;
        let lambda = (1.0 + (1.0 + 4.0 * mu * mu).sqrt()) / 2.0;
        let poly = polynomial_solution(2, c(lambda), c(mu)).unwrap();
        let conj = HeunParams::real(1.0 - 2.0, lambda, mu, 0.0).unwrap();
        assert!(apply_heun_operator(&poly, &conj).max_abs() < 1e-14);
        let img = diamond_transform(&poly, c(mu)).unwrap();
        let orig = HeunParams::real(3.0, lambda, mu, 0.0).unwrap();
        let res = apply_heun_operator(&img, &orig);
        assert!(res.max_abs() < 1e-8 * img.max_abs());
    }

    #[test]
    fn series_json_round_trip() {
        let s = forward_solution(&base(), TOL, 4).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"normalization\":\"product-entry\""));
        let back: SeriesSolution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn real_parameters_give_real_coefficients(n in 0.2f64..2.8, lambda in -2.0f64..2.0,
                                                  mu in 0.05f64..1.5, b in 0.05f64..0.95) {
            prop_assume!((b + n - n.round()).abs() > 0.01);
            let p = HeunParams::real(n, lambda, mu, b).unwrap();
            let f = forward_solution(&p, TOL, 32).unwrap();
            let w = backward_solution(&p, TOL, 32).unwrap();
            for a in f.coeffs.iter().chain(w.coeffs.iter()) {
                prop_assert_eq!(a.im, 0.0);
            }
            for (_, r) in f.recurrence_residuals(&p).into_iter().chain(w.recurrence_residuals(&p)) {
                prop_assert!(r < 1e-12);
            }
            let peak = f.max_abs();
            for pair in f.coeffs.windows(2) {
                prop_assert!(pair[0].norm().max(pair[1].norm()) / peak > 0.0);
            }
        }
    }
}

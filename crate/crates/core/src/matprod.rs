//! 2×2 complex matrix algebra, shifted Pochhammer products, convergent
//! infinite products of almost-projector matrices and a projective backward
//! solver for three-term recurrences.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by the product engine and the projective solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatProdError {
    #[error("perturbations S_k do not decay like k^-2 over the probe window starting at k = {probe_start}")]
    NonSummable { probe_start: i64 },
    #[error("tolerance {tol:e} not reached within {cap} factors (last estimate {estimate:e})")]
    ToleranceUnreachable { tol: f64, cap: usize, estimate: f64 },
    #[error("projective maps are not contracting at k_hi = {k_hi}")]
    SeedTooLow { k_hi: i64 },
    #[error("recurrence coefficient f_k vanishes at k = {k}")]
    VanishingCoefficient { k: i64 },
    #[error("invalid index range: {0}")]
    InvalidRange(String),
    #[error("non-finite matrix entry at k = {k}")]
    NonFinite { k: i64 },
}

pub type Result<T> = std::result::Result<T, MatProdError>;

/// A 2×2 complex matrix stored by entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex2x2 {
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
}

impl Complex2x2 {
    pub const fn new(m11: Complex64, m12: Complex64, m21: Complex64, m22: Complex64) -> Self {
        Self { m11, m12, m21, m22 }
    }

    /// Builds a matrix and rejects NaN or infinite entries.
    pub fn try_new(m11: Complex64, m12: Complex64, m21: Complex64, m22: Complex64) -> Option<Self> {
        let m = Self::new(m11, m12, m21, m22);
        m.is_finite().then_some(m)
    }

    pub fn from_real(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Self::new(m11.into(), m12.into(), m21.into(), m22.into())
    }

    pub fn identity() -> Self {
        Self::from_real(1.0, 0.0, 0.0, 1.0)
    }

    pub fn zero() -> Self {
        Self::from_real(0.0, 0.0, 0.0, 0.0)
    }

    /// The projector `[[1, 0], [1, 0]]` that every family converges to.
    pub fn projector() -> Self {
        Self::from_real(1.0, 0.0, 1.0, 0.0)
    }

    /// Companion-type matrix `[[top_left, top_right], [1, 0]]`.
    pub fn companion(top_left: Complex64, top_right: Complex64) -> Self {
        Self::new(top_left, top_right, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.m11, self.m12, self.m21, self.m22]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }

    pub fn det(&self) -> Complex64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn trace(&self) -> Complex64 {
        self.m11 + self.m22
    }

    pub fn conj(&self) -> Self {
        Self::new(self.m11.conj(), self.m12.conj(), self.m21.conj(), self.m22.conj())
    }

    /// Max-row-sum operator norm.
    pub fn norm(&self) -> f64 {
        (self.m11.norm() + self.m12.norm()).max(self.m21.norm() + self.m22.norm())
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [self.m11 * v[0] + self.m12 * v[1], self.m21 * v[0] + self.m22 * v[1]]
    }

    /// Both eigenvalues, ordered by decreasing modulus.
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let half_tr = self.trace() * 0.5;
        let disc = (half_tr * half_tr - self.det()).sqrt();
        let (a, b) = (half_tr + disc, half_tr - disc);
        // Recover the smaller root from the product to avoid cancellation.
        let (big, _) = if a.norm() >= b.norm() { (a, b) } else { (b, a) };
        let small = if big.norm() > 0.0 { self.det() / big } else { Complex64::new(0.0, 0.0) };
        [big, small]
    }
}

impl Add for Complex2x2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.m11 + o.m11, self.m12 + o.m12, self.m21 + o.m21, self.m22 + o.m22)
    }
}

impl Sub for Complex2x2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.m11 - o.m11, self.m12 - o.m12, self.m21 - o.m21, self.m22 - o.m22)
    }
}

impl Mul for Complex2x2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.m11 * o.m11 + self.m12 * o.m21,
            self.m11 * o.m12 + self.m12 * o.m22,
            self.m21 * o.m11 + self.m22 * o.m21,
            self.m21 * o.m12 + self.m22 * o.m22,
        )
    }
}

/// Product `∏_{j=from}^{to} (b + j)`; the empty product (`to < from`) is 1.
pub fn rising_product(b: Complex64, from: i64, to: i64) -> Complex64 {
    (from..=to).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (b + j as f64))
}

/// Shifted Pochhammer symbol `(b)_{s,l+1} = (b+s)(b+s+1)…(b+l)`.
///
/// Requires `s ≥ 0` and `l ≥ s`. A zero result is legal and marks resonance.
pub fn pochhammer(b: Complex64, s: i64, l: i64) -> Result<Complex64> {
    if s < 0 || l < s {
        return Err(MatProdError::InvalidRange(format!("pochhammer needs 0 <= s <= l, got s = {s}, l = {l}")));
    }
    Ok(rising_product(b, s, l))
}

/// An indexed family of matrices `M_k = P + S_k` with `‖S_k‖ = O(k^-2)`.
pub trait MatrixFamily {
    fn matrix(&self, k: i64) -> Complex2x2;

    /// Rough magnitude of the parameters entering `S_k`; used to place the
    /// first truncation level inside the asymptotic regime.
    fn scale_hint(&self) -> f64 {
        0.0
    }

    fn perturbation_norm(&self, k: i64) -> f64 {
        (self.matrix(k) - Complex2x2::projector()).norm()
    }
}

impl<F: Fn(i64) -> Complex2x2> MatrixFamily for F {
    fn matrix(&self, k: i64) -> Complex2x2 {
        self(k)
    }
}

/// Approximation of an infinite product `M_start M_{start+1} …`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedProduct {
    pub value: Complex2x2,
    pub first_index: i64,
    /// Index of the last factor entering the finest partial product.
    pub truncation_index: i64,
    /// Bound on the max-row-sum distance between `value` and the limit.
    pub tail_bound: f64,
    /// Number of factors in the coarsest partial product.
    pub base_factors: usize,
    /// Number of doublings performed after the coarsest level.
    pub levels: usize,
}

/// Controls for [`converging_product_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductOptions {
    /// Target for `tail_bound`, relative to `max(1, ‖value‖)`.
    pub tol: f64,
    /// Hard cap on the number of factors.
    pub max_factors: usize,
    /// Highest extrapolation order used in the level table.
    pub max_order: usize,
}

impl Default for ProductOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_factors: 1_000_000, max_order: 6 }
    }
}

const ROUNDING_SAFETY: f64 = 32.0;
const DECAY_RATIO_LIMIT: f64 = 0.35;

/// Computes `R_start = M_start M_{start+1} …` to the requested tolerance.
pub fn converging_product<F: MatrixFamily + ?Sized>(family: &F, start: i64, tol: f64) -> Result<TruncatedProduct> {
    converging_product_with(family, start, &ProductOptions { tol, ..ProductOptions::default() })
}

/// Number of factors in the coarsest level for a family and start index.
pub fn base_factor_count<F: MatrixFamily + ?Sized>(family: &F) -> usize {
    let hint = family.scale_hint();
    let extra = if hint.is_finite() { (4.0 * hint).ceil().min(4096.0) as usize } else { 4096 };
    32 + extra
}

/// Same as [`converging_product`] with explicit options.
pub fn converging_product_with<F: MatrixFamily + ?Sized>(
    family: &F,
    start: i64,
    opts: &ProductOptions,
) -> Result<TruncatedProduct> {
    let base = base_factor_count(family);
    check_summable(family, start + base as i64)?;
    let mut table = LevelTable::new(family, start, base, opts.max_order);
    loop {
        table.push_level()?;
        if let Some(result) = table.estimate() {
            let target = opts.tol * result.value.norm().max(1.0);
            let floor = table.rounding_floor(&result.value);
            if result.tail_bound <= target.max(floor) {
                return Ok(result);
            }
            if table.factors_next_level() > opts.max_factors {
                return Err(MatProdError::ToleranceUnreachable {
                    tol: opts.tol,
                    cap: opts.max_factors,
                    estimate: result.tail_bound,
                });
            }
        }
    }
}

/// Evaluates the extrapolated product from a fixed number of levels.
///
/// `levels` doublings after a coarsest partial product of `base_factors`
/// factors; used to re-evaluate a product at doubled truncation.
pub fn extrapolated_product<F: MatrixFamily + ?Sized>(
    family: &F,
    start: i64,
    base_factors: usize,
    levels: usize,
    max_order: usize,
) -> Result<TruncatedProduct> {
    if base_factors == 0 || levels == 0 {
        return Err(MatProdError::InvalidRange("need at least one base factor and one level".into()));
    }
    let mut table = LevelTable::new(family, start, base_factors, max_order);
    for _ in 0..=levels {
        table.push_level()?;
    }
    Ok(table.estimate().expect("at least two levels"))
}

fn check_summable<F: MatrixFamily + ?Sized>(family: &F, probe_start: i64) -> Result<()> {
    let probe_start = probe_start.max(1);
    let mut prev = family.perturbation_norm(probe_start);
    let mut k = probe_start;
    for _ in 0..4 {
        k *= 2;
        let cur = family.perturbation_norm(k);
        if !cur.is_finite() {
            return Err(MatProdError::NonFinite { k });
        }
        let negligible = cur <= 1e-300 || prev <= 1e-300;
        if !negligible && cur > DECAY_RATIO_LIMIT * prev {
            return Err(MatProdError::NonSummable { probe_start });
        }
        prev = cur;
    }
    Ok(())
}

/// Partial products at geometrically spaced truncations and their
/// polynomial extrapolation in `1/N`.
struct LevelTable<'a, F: MatrixFamily + ?Sized> {
    family: &'a F,
    start: i64,
    base: usize,
    max_order: usize,
    running: Complex2x2,
    next_index: i64,
    perturbed: bool,
    truncations: Vec<i64>,
    partials: Vec<Complex2x2>,
}

impl<'a, F: MatrixFamily + ?Sized> LevelTable<'a, F> {
    fn new(family: &'a F, start: i64, base: usize, max_order: usize) -> Self {
        Self {
            family,
            start,
            base,
            max_order: max_order.max(1),
            running: Complex2x2::identity(),
            next_index: start,
            perturbed: false,
            truncations: Vec::new(),
            partials: Vec::new(),
        }
    }

    fn factors_next_level(&self) -> usize {
        self.base << self.partials.len()
    }

    fn push_level(&mut self) -> Result<()> {
        let last = self.start + self.factors_next_level() as i64 - 1;
        let p = Complex2x2::projector();
        while self.next_index <= last {
            let m = self.family.matrix(self.next_index);
            if !m.is_finite() {
                return Err(MatProdError::NonFinite { k: self.next_index });
            }
            self.perturbed |= m != p;
            self.running = self.running * m;
            self.next_index += 1;
        }
        if !self.running.is_finite() {
            return Err(MatProdError::NonFinite { k: last });
        }
        self.truncations.push(last);
        self.partials.push(self.running);
        Ok(())
    }

    /// Neville extrapolation to `1/N = 0` through the last `order + 1` levels.
    fn extrapolate(&self, upto: usize) -> Complex2x2 {
        let order = self.max_order.min(upto);
        let first = upto - order;
        let h: Vec<f64> = (first..=upto)
            .map(|i| 1.0 / (self.truncations[i] - self.start + 1) as f64)
            .collect();
        let mut col: Vec<Complex2x2> = self.partials[first..=upto].to_vec();
        for j in 1..=order {
            for i in (j..=order).rev() {
                let (hi, hij) = (h[i], h[i - j]);
                let w = Complex64::new(1.0 / (hij - hi), 0.0);
                col[i] = (col[i].scale(Complex64::new(hij, 0.0)) - col[i - 1].scale(Complex64::new(hi, 0.0))).scale(w);
            }
        }
        col[order]
    }

    fn rounding_floor(&self, value: &Complex2x2) -> f64 {
        if !self.perturbed {
            return 0.0;
        }
        let n = (self.next_index - self.start) as f64;
        ROUNDING_SAFETY * f64::EPSILON * n.sqrt() * value.norm().max(1.0)
    }

    fn estimate(&self) -> Option<TruncatedProduct> {
        let m = self.partials.len().checked_sub(1)?;
        if m == 0 {
            return None;
        }
        let value = self.extrapolate(m);
        let previous = self.extrapolate(m - 1);
        let tail_bound = if self.perturbed {
            (value - previous).norm().max(self.rounding_floor(&value))
        } else {
            0.0
        };
        Some(TruncatedProduct {
            value,
            first_index: self.start,
            truncation_index: self.truncations[m],
            tail_bound,
            base_factors: self.base,
            levels: m,
        })
    }
}

/// Coefficients `(f_k, g_k, h_k)` of `f_k a_{k-1} + g_k a_k + h_k a_{k+1} = 0`.
pub trait RecurrenceCoeffs {
    fn coeffs(&self, k: i64) -> (Complex64, Complex64, Complex64);
}

impl<F: Fn(i64) -> (Complex64, Complex64, Complex64)> RecurrenceCoeffs for F {
    fn coeffs(&self, k: i64) -> (Complex64, Complex64, Complex64) {
        self(k)
    }
}

/// A point `(a_k : a_{k+1})` of the projective line; infinity is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveRatio {
    /// Homogeneous coordinate proportional to `a_{k+1}`.
    pub num: Complex64,
    /// Homogeneous coordinate proportional to `a_k`.
    pub den: Complex64,
}

impl ProjectiveRatio {
    pub fn zero() -> Self {
        Self { num: Complex64::new(0.0, 0.0), den: Complex64::new(1.0, 0.0) }
    }

    /// `a_{k+1}/a_k`, or `None` at infinity.
    pub fn value(&self) -> Option<Complex64> {
        (self.den.norm() > 0.0).then(|| self.num / self.den)
    }

    pub fn is_infinite(&self) -> bool {
        self.den.norm() == 0.0
    }

    fn normalized(num: Complex64, den: Complex64) -> Self {
        let s = num.norm().max(den.norm());
        if s > 0.0 {
            Self { num: num / s, den: den / s }
        } else {
            Self { num, den }
        }
    }
}

/// Iterates the projectivized recurrence downward from `x_{k_hi} = 0`.
///
/// Returns `x_{k_lo}, …, x_{k_hi-1}` where `x_k = a_{k+1}/a_k` for the
/// solution that decays as `k → +∞`.
pub fn projective_backward_solve<C: RecurrenceCoeffs + ?Sized>(
    coeffs: &C,
    k_hi: i64,
    k_lo: i64,
) -> Result<Vec<ProjectiveRatio>> {
    if k_lo >= k_hi {
        return Err(MatProdError::InvalidRange(format!("need k_lo < k_hi, got {k_lo} >= {k_hi}")));
    }
    let (f, g, h) = coeffs.coeffs(k_hi);
    if !(g.norm() > 2.0 * (f.norm() + h.norm())) {
        return Err(MatProdError::SeedTooLow { k_hi });
    }
    let len = (k_hi - k_lo) as usize;
    let mut out = vec![ProjectiveRatio::zero(); len];
    let mut x = ProjectiveRatio::zero();
    for k in ((k_lo + 1)..=k_hi).rev() {
        let (f, g, h) = coeffs.coeffs(k);
        if f.norm() == 0.0 {
            return Err(MatProdError::VanishingCoefficient { k });
        }
        // (a_{k-1} : a_k) from a_{k-1} = -(g a_k + h a_{k+1}) / f.
        x = ProjectiveRatio::normalized(f * x.den, -(g * x.den + h * x.num));
        out[(k - 1 - k_lo) as usize] = x;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Forward Heun family written out directly for these tests.
    fn heun_forward(lambda: f64, mu: f64, b: f64, n: f64) -> impl Fn(i64) -> Complex2x2 {
        move |k| {
            let d = (k as f64 + b) * (k as f64 + b + n - 1.0);
            Complex2x2::from_real(1.0 + lambda / d, mu * mu / d, 1.0, 0.0)
        }
    }

    #[test]
    fn pochhammer_values() {
        assert_eq!(pochhammer(c(2.0, 0.0), 0, 2).unwrap(), c(24.0, 0.0));
        assert_eq!(pochhammer(c(-1.0, 0.0), 0, 2).unwrap(), c(0.0, 0.0));
        assert!(pochhammer(c(0.3, 0.1), 3, 2).is_err());
        assert!(pochhammer(c(0.3, 0.1), -1, 2).is_err());
        assert_eq!(rising_product(c(0.5, 0.0), 3, 2), c(1.0, 0.0));
    }

    #[test]
    fn matrix_algebra_basics() {
        let a = Complex2x2::new(c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0), c(3.0, 0.5));
        let i = Complex2x2::identity();
        assert_eq!(a * i, a);
        assert_eq!(i * a, a);
        let p = Complex2x2::projector();
        assert_eq!(p * p, p);
        let ev = a.eigenvalues();
        assert!((ev[0] + ev[1] - a.trace()).norm() < 1e-14);
        assert!((ev[0] * ev[1] - a.det()).norm() < 1e-14);
        assert_eq!(Complex2x2::from_real(1.0, -2.0, 0.5, 0.25).norm(), 3.0);
        assert!(Complex2x2::try_new(c(f64::NAN, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)).is_none());
    }

    #[test]
    fn projector_family_is_exact() {
        for start in [-3, 0, 5] {
            let fam = |_k: i64| Complex2x2::projector();
            let r = converging_product(&fam, start, 1e-12).unwrap();
            assert_eq!(r.value, Complex2x2::projector());
            assert_eq!(r.tail_bound, 0.0);
        }
    }

    #[test]
    fn doubled_truncation_agrees() {
        let fam = heun_forward(0.1, 0.2, 0.3, 1.4);
        let r = converging_product(&fam, 1, 1e-12).unwrap();
        let d = extrapolated_product(&fam, 1, r.base_factors, r.levels + 1, 6).unwrap();
        let diff = (r.value - d.value).max_abs_entry();
        assert!(diff < 1e-12, "diff {diff:e}");
        assert!(diff <= r.tail_bound);
    }

    #[test]
    fn right_column_vanishes() {
        // Boundary family with l = 0.5: b = -l/2, n = l + 1.
        let l = 0.5;
        let fam = heun_forward(0.2, 0.1, -l / 2.0, l + 1.0);
        let r = converging_product(&fam, 0, 1e-12).unwrap();
        assert!(r.value.m12.norm() <= r.tail_bound.max(1e-15));
        assert!(r.value.m22.norm() <= r.tail_bound.max(1e-15));
    }

    #[test]
    fn truncated_product_oracle() {
        // Plain partial product with a large truncation; converges like 1/N.
        let fam = heun_forward(0.1, 0.2, 0.3, 1.4);
        let mut t = Complex2x2::identity();
        let n = 200_000;
        for k in 1..=n {
            t = t * fam(k);
        }
        let r = converging_product(&fam, 1, 1e-12).unwrap();
        // Partial product error is about ‖S‖-tail ≈ 0.14 / N.
        assert!((t.m11 - r.value.m11).norm() < 2e-6);
        assert!((t.m21 - r.value.m21).norm() < 2e-6);
    }

    #[test]
    fn telescoping_and_ratio_limit() {
        let fam = heun_forward(0.7, 0.5, 0.3, 1.4);
        let r5 = converging_product(&fam, 5, 1e-13).unwrap();
        let r6 = converging_product(&fam, 6, 1e-13).unwrap();
        assert!((r5.value.m21 - r6.value.m11).norm() <= r5.tail_bound + r6.tail_bound + 1e-15);
        let q50 = converging_product(&fam, 50, 1e-13).unwrap();
        let q100 = converging_product(&fam, 100, 1e-13).unwrap();
        let dev50 = (q50.value.m21 / q50.value.m11 - 1.0).norm();
        let dev100 = (q100.value.m21 / q100.value.m11 - 1.0).norm();
        assert!(dev100 < dev50);
        assert!(dev100 < 1e-3);
    }

    #[test]
    fn non_summable_is_rejected() {
        let fam = |k: i64| Complex2x2::companion(c(1.0 + 1.0 / k as f64, 0.0), c(0.0, 0.0));
        assert!(matches!(converging_product(&fam, 1, 1e-12), Err(MatProdError::NonSummable { .. })));
    }

    #[test]
    fn unreachable_tolerance_is_reported() {
        let fam = heun_forward(0.1, 0.2, 0.3, 1.4);
        let opts = ProductOptions { tol: 1e-30, max_factors: 2000, max_order: 1 };
        assert!(matches!(
            converging_product_with(&fam, 1, &opts),
            Err(MatProdError::ToleranceUnreachable { .. })
        ));
    }

    #[test]
    fn projective_seed_check() {
        let zero_g = |_k: i64| (c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        assert!(matches!(projective_backward_solve(&zero_g, 100, 1), Err(MatProdError::SeedTooLow { .. })));
    }

    #[test]
    fn projective_solver_on_bessel_recurrence() {
        // J_{k-1}(x) - (2k/x) J_k(x) + J_{k+1}(x) = 0, decaying as k grows.
        let x = 1.5;
        let rec = move |k: i64| (c(1.0, 0.0), c(-2.0 * k as f64 / x, 0.0), c(1.0, 0.0));
        let xs = projective_backward_solve(&rec, 60, 0).unwrap();
        // J_1(1.5)/J_0(1.5) from the ascending series.
        let series = |k: i32| -> f64 {
            (0..40i32)
                .map(|m| {
                    let mut term = (x / 2.0f64).powi(k + 2 * m);
                    for j in 1..=m {
                        term /= j as f64;
                    }
                    for j in 1..=(m + k) {
                        term /= j as f64;
                    }
                    if m % 2 == 1 {
                        -term
                    } else {
                        term
                    }
                })
                .sum()
        };
        let want = series(1) / series(0);
        assert!((xs[0].value().unwrap().re - want).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn product_is_associative(a in proptest::array::uniform8(-2.0f64..2.0),
                                  b in proptest::array::uniform8(-2.0f64..2.0),
                                  d in proptest::array::uniform8(-2.0f64..2.0)) {
            let mk = |v: [f64; 8]| Complex2x2::new(c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7]));
            let (x, y, z) = (mk(a), mk(b), mk(d));
            let lhs = (x * y) * z;
            let rhs = x * (y * z);
            prop_assert!((lhs - rhs).max_abs_entry() < 1e-12);
            prop_assert!(((x * y).det() - x.det() * y.det()).norm() < 1e-11);
            prop_assert!((x * y).norm() <= x.norm() * y.norm() + 1e-12);
        }

        #[test]
        fn certificate_covers_doubling(lambda in -3.0f64..3.0, mu in 0.05f64..2.0,
                                       b in 0.1f64..0.9, n in 0.2f64..2.8) {
            let fam = heun_forward(lambda, mu, b, n);
            let r = converging_product(&fam, 1, 1e-12).unwrap();
            let d = extrapolated_product(&fam, 1, r.base_factors, r.levels + 1, 6).unwrap();
            prop_assert!((r.value - d.value).max_abs_entry() <= r.tail_bound);
        }
    }
}

//! Closed-form spectral equations built from convergent matrix products:
//! the entire-solution function ξ and its physical restriction ζ, the
//! tridiagonal determinant for polynomial solutions, the pasting equations,
//! the phase-lock boundary equations, and curve tracing over them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heun::{near_integer, BackwardFamily, ForwardFamily, HeunError, HeunParams};
use crate::matprod::{converging_product, MatProdError, TruncatedProduct};
use crate::roots::{find_root_1d, RootError};

/// Half-width of the band around the resonant lines refused by
/// [`level_curve_value`].
pub const LEVEL_BAND: f64 = 1e-3;

/// Distance to the excluded parity class of `l` below which the boundary
/// equations are refused.
pub const PARITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("μ must be non-zero")]
    ZeroMu,
    #[error("l must not be a negative integer")]
    ForbiddenL,
    #[error("n must not be an integer")]
    IntegerN,
    #[error("b or b + n is within the resonance tolerance of an integer")]
    ResonantParameters,
    #[error("r must not be an integer")]
    IntegerR,
    #[error("l ∓ r is within {LEVEL_BAND} of an even integer (r = {r}, l = {l})")]
    ResonantLine { r: f64, l: f64 },
    #[error("l must not be an even integer")]
    EvenL,
    #[error("l must not be an odd integer")]
    OddL,
    #[error("ω must be positive and finite")]
    InvalidOmega,
    #[error("curve lost at A = {a}: residual {residual:e}")]
    LostTrack { a: f64, residual: f64 },
    #[error(transparent)]
    Root(#[from] RootError),
    #[error(transparent)]
    Product(#[from] MatProdError),
    #[error(transparent)]
    Heun(#[from] HeunError),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Value of an equation together with the magnitude that makes it
/// dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquationValue {
    pub value: Complex64,
    pub scale: f64,
    pub truncation_error: f64,
}

impl EquationValue {
    fn from_terms(terms: &[Complex64], truncation_rel: f64) -> Self {
        let scale: f64 = terms.iter().map(|t| t.norm()).sum();
        let scale = if scale > 0.0 { scale } else { f64::MIN_POSITIVE };
        Self { value: terms.iter().sum(), scale, truncation_error: truncation_rel * scale }
    }

    /// `|value| / scale`.
    pub fn normalized(&self) -> f64 {
        self.value.norm() / self.scale
    }

    /// Real part divided by the scale; the sign carrier for real parameters.
    pub fn signed(&self) -> f64 {
        self.value.re / self.scale
    }
}

fn rel_tail(p: &TruncatedProduct) -> f64 {
    p.tail_bound / p.value.norm().max(f64::MIN_POSITIVE)
}

fn check_mu(mu: Complex64) -> Result<()> {
    if mu.norm() == 0.0 {
        Err(SpectralError::ZeroMu)
    } else {
        Ok(())
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(SpectralError::InvalidOmega)
    }
}

/// `λ = 1/(4ω²) − μ²`.
pub fn physical_lambda(omega: f64, mu: Complex64) -> Complex64 {
    1.0 / (4.0 * omega * omega) - mu * mu
}

/// `ξ_l(λ, μ) = λ R_{1,11} + μ² R_{1,21}` with `R_1 = ∏_{k≥1} M_k` and
/// `M_k = [[1 + λ/(k(k+l)), μ²/(k(k+l))], [1, 0]]`.
///
/// The scale is `(|λ| + |μ|²) max(|R_{1,11}|, |R_{1,21}|)`, which stays
/// meaningful at `λ = 0`.
pub fn xi(l: Complex64, lambda: Complex64, mu: Complex64, tol: f64) -> Result<EquationValue> {
    check_mu(mu)?;
    if let Some(k) = near_integer(l) {
        if k < 0 {
            return Err(SpectralError::ForbiddenL);
        }
    }
    let r = converging_product(&ForwardFamily::entire(l, lambda, mu), 1, tol)?;
    let mu_sq = mu * mu;
    let weight = lambda.norm() + mu_sq.norm();
    let scale = (weight * r.value.m11.norm().max(r.value.m21.norm())).max(f64::MIN_POSITIVE);
    Ok(EquationValue {
        value: lambda * r.value.m11 + mu_sq * r.value.m21,
        scale,
        truncation_error: weight * r.tail_bound,
    })
}

/// `ζ_l(ω, μ) = ξ_l(1/(4ω²) − μ², μ)`.
pub fn zeta(l: Complex64, omega: f64, mu: Complex64, tol: f64) -> Result<EquationValue> {
    check_omega(omega)?;
    xi(l, physical_lambda(omega, mu), mu, tol)
}

/// `det(H + λ Id)` for the `l × l` tridiagonal matrix with
/// `H_jj = (1−j)(l−j+1)`, `H_{j,j+1} = μj`, `H_{j,j−1} = μ(l−j+1)`.
pub fn tridiag_det(l: usize, lambda: Complex64, mu: Complex64) -> Complex64 {
    let lf = l as f64;
    let (mut prev, mut cur) = (c(1.0), c(0.0));
    for j in 1..=l {
        let jf = j as f64;
        let diag = (1.0 - jf) * (lf - jf + 1.0) + lambda;
        let next = if j == 1 {
            diag
        } else {
            // H_{j−1,j} H_{j,j−1} = μ(j−1) · μ(l−j+1).
            diag * cur - mu * mu * (jf - 1.0) * (lf - jf + 1.0) * prev
        };
        if j > 1 {
            prev = cur;
        }
        cur = next;
    }
    if l == 0 {
        c(1.0)
    } else {
        cur
    }
}

/// Real roots `λ` of `det(H + λ Id)` for real `μ`, in increasing order.
///
/// `H` is similar to a symmetric tridiagonal matrix, so its spectrum is
/// real; eigenvalues are isolated by Sturm counts and bisection.
pub fn tridiag_real_roots(l: usize, mu: f64) -> Vec<f64> {
    let lf = l as f64;
    let diag: Vec<f64> = (1..=l).map(|j| (1.0 - j as f64) * (lf - j as f64 + 1.0)).collect();
    let off_sq: Vec<f64> = (1..l).map(|j| mu * mu * j as f64 * (lf - j as f64)).collect();
    // Number of eigenvalues of H below x.
    let below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = 1.0f64;
        for j in 0..l {
            let prev_term = if j == 0 { 0.0 } else { off_sq[j - 1] / q };
            q = diag[j] - x - prev_term;
            if q == 0.0 {
                q = -f64::EPSILON * (x.abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let radius = (0..l)
        .map(|j| {
            let left = if j > 0 { off_sq[j - 1].sqrt() } else { 0.0 };
            let right = if j + 1 < l { off_sq[j].sqrt() } else { 0.0 };
            diag[j].abs() + left + right
        })
        .fold(0.0, f64::max)
        + 1.0;
    let mut eig = Vec::with_capacity(l);
    for i in 0..l {
        let (mut lo, mut hi) = (-radius, radius);
        while hi - lo > 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if below(mid) > i {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        eig.push(0.5 * (lo + hi));
    }
    // det(H + λ) = 0 ⟺ λ = −(eigenvalue of H).
    let mut roots: Vec<f64> = eig.into_iter().map(|e| -e).collect();
    roots.sort_by(f64::total_cmp);
    roots
}

/// `(b+1)(b+n−2) R_{1,11} T_{0,11} + μ² R_{1,21} T_{0,21}`, the condition
/// for forward and backward series to glue into one eigenfunction.
pub fn pasting_value(p: &HeunParams, tol: f64) -> Result<EquationValue> {
    check_mu(p.mu)?;
    if p.is_resonant() {
        return Err(SpectralError::ResonantParameters);
    }
    pasting_terms(p, tol)
}

fn pasting_terms(p: &HeunParams, tol: f64) -> Result<EquationValue> {
    let r = converging_product(&ForwardFamily::new(p), 1, tol)?;
    let t = converging_product(&BackwardFamily::new(p), 0, tol)?;
    let terms = [
        (p.b + 1.0) * (p.b + p.n - 2.0) * r.value.m11 * t.value.m11,
        p.mu * p.mu * r.value.m21 * t.value.m21,
    ];
    Ok(EquationValue::from_terms(&terms, rel_tail(&r) + rel_tail(&t)))
}

/// `(2−n+λ)(4−n) T_{2,11} − μ²(n−2) T_{2,21}` with the backward matrices
/// at `b = 0`: the condition for a solution holomorphic on ℂ*.
pub fn resonant_pasting_value(n: Complex64, lambda: Complex64, mu: Complex64, tol: f64) -> Result<EquationValue> {
    check_mu(mu)?;
    if near_integer(n).is_some() {
        return Err(SpectralError::IntegerN);
    }
    let p = HeunParams::new(n, lambda, mu, c(0.0))?;
    let t = converging_product(&BackwardFamily::new(&p), 2, tol)?;
    let terms = [(2.0 - n + lambda) * (4.0 - n) * t.value.m11, -mu * mu * (n - 2.0) * t.value.m21];
    Ok(EquationValue::from_terms(&terms, rel_tail(&t)))
}

/// Pasting equation specialised to `b = (r−l)/2`, `n = l+1` and
/// `λ = 1/(4ω²) − μ²`; its zeros in `(B, A)` form the level set `ρ ≡ ±r`.
pub fn level_curve_value(r: f64, l: f64, omega: f64, mu: f64, tol: f64) -> Result<EquationValue> {
    check_omega(omega)?;
    if mu == 0.0 {
        return Err(SpectralError::ZeroMu);
    }
    if (r - r.round()).abs() < PARITY_TOL {
        return Err(SpectralError::IntegerR);
    }
    let even_dist = |x: f64| (x - 2.0 * (x / 2.0).round()).abs();
    if even_dist(l - r) < LEVEL_BAND || even_dist(l + r) < LEVEL_BAND {
        return Err(SpectralError::ResonantLine { r, l });
    }
    let mu = c(mu);
    let p = HeunParams::new(c(l + 1.0), physical_lambda(omega, mu), mu, c(0.5 * (r - l)))?;
    pasting_terms(&p, tol)
}

/// Sign branch of the boundary equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }
}

/// `R_{0,21} ± ωl(R_{0,21} − R_{0,11})` with
/// `M_k = [[1 + λ/(k² − l²/4), μ²/(k² − l²/4)], [1, 0]]`, `k ≥ 0`.
///
/// Zeros are boundary points of phase-lock areas with even rotation number.
pub fn boundary_e0(l: f64, omega: f64, mu: f64, sign: Sign, tol: f64) -> Result<EquationValue> {
    check_omega(omega)?;
    if mu == 0.0 {
        return Err(SpectralError::ZeroMu);
    }
    if (l - 2.0 * (l / 2.0).round()).abs() < PARITY_TOL {
        return Err(SpectralError::EvenL);
    }
    let mu = c(mu);
    let family = ForwardFamily { n: c(l + 1.0), lambda: physical_lambda(omega, mu), mu_sq: mu * mu, b: c(-0.5 * l) };
    let r = converging_product(&family, 0, tol)?;
    let w = sign.value() * omega * l;
    let terms = [r.value.m21, w * r.value.m21, -w * r.value.m11];
    Ok(EquationValue::from_terms(&terms, rel_tail(&r)))
}

/// `R_{1,11} ± 2ωμ(R_{1,11} − R_{1,21})` with
/// `M_k = [[1 + λ/((k−½)² − l²/4), μ²/((k−½)² − l²/4)], [1, 0]]`, `k ≥ 1`.
///
/// Zeros are boundary points of phase-lock areas with odd rotation number.
pub fn boundary_e1(l: f64, omega: f64, mu: f64, sign: Sign, tol: f64) -> Result<EquationValue> {
    check_omega(omega)?;
    if mu == 0.0 {
        return Err(SpectralError::ZeroMu);
    }
    if (l - 1.0 - 2.0 * ((l - 1.0) / 2.0).round()).abs() < PARITY_TOL {
        return Err(SpectralError::OddL);
    }
    let muc = c(mu);
    let family = ForwardFamily { n: c(l + 1.0), lambda: physical_lambda(omega, muc), mu_sq: muc * muc, b: c(-0.5 * (l + 1.0)) };
    let r = converging_product(&family, 1, tol)?;
    let w = sign.value() * 2.0 * omega * mu;
    let terms = [r.value.m11, w * r.value.m11, -w * r.value.m21];
    Ok(EquationValue::from_terms(&terms, rel_tail(&r)))
}

/// Equation whose zero set is traced in the `(B, A)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveEquation {
    E0,
    E1,
    /// Pasting equation at `b = −l/2`, `n = l + 1`.
    Paste,
    /// Level-curve pasting equation for a fixed non-integer `r`.
    Pasterho,
}

impl CurveEquation {
    pub fn tag(self) -> &'static str {
        match self {
            CurveEquation::E0 => "e0",
            CurveEquation::E1 => "e1",
            CurveEquation::Paste => "paste",
            CurveEquation::Pasterho => "pasterho",
        }
    }
}

/// A traced equation in physical coordinates `l = B/ω`, `μ = A/(2ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub equation: CurveEquation,
    pub sign: Sign,
    pub omega: f64,
    /// Level for [`CurveEquation::Pasterho`]; ignored otherwise.
    pub r: f64,
    /// Tolerance passed to the product engine.
    pub product_tol: f64,
}

impl CurveSpec {
    pub fn new(equation: CurveEquation, sign: Sign, omega: f64) -> Self {
        Self { equation, sign, omega, r: 0.5, product_tol: 1e-12 }
    }

    pub fn with_r(self, r: f64) -> Self {
        Self { r, ..self }
    }

    /// Evaluates the equation at `(B, A)`.
    pub fn eval(&self, b: f64, a: f64) -> Result<EquationValue> {
        let l = b / self.omega;
        let mu = a / (2.0 * self.omega);
        let tol = self.product_tol;
        match self.equation {
            CurveEquation::E0 => boundary_e0(l, self.omega, mu, self.sign, tol),
            CurveEquation::E1 => boundary_e1(l, self.omega, mu, self.sign, tol),
            CurveEquation::Paste => {
                check_omega(self.omega)?;
                let mu = c(mu);
                let p = HeunParams::new(c(l + 1.0), physical_lambda(self.omega, mu), mu, c(-0.5 * l)).map_err(|_| SpectralError::ZeroMu)?;
                pasting_value(&p, tol)
            }
            CurveEquation::Pasterho => level_curve_value(self.r, l, self.omega, mu, tol),
        }
    }

    /// Signed normalized value, with excluded points mapped to NaN.
    fn signed_or_nan(&self, b: f64, a: f64) -> f64 {
        self.eval(b, a).map_or(f64::NAN, |v| v.signed())
    }
}

/// A point `(B, A)` on a traced curve with its normalized residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub b: f64,
    pub a: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub spec: CurveSpec,
    pub points: Vec<CurvePoint>,
}

/// Refines a sign change of the curve equation in `B` at fixed `A`.
/// Returns `None` when the refined point does not satisfy the equation to
/// `tol` (a pole rather than a zero).
pub fn refine_in_b(spec: &CurveSpec, a: f64, lo: f64, hi: f64, tol: f64) -> Result<Option<CurvePoint>> {
    let xtol = 1e-14 * lo.abs().max(hi.abs()).max(1.0);
    let root = find_root_1d(|b| spec.eval(b, a).map(|v| v.signed()), lo, hi, xtol)?;
    let b = match root {
        Ok(b) => b,
        Err(_) => return Ok(None),
    };
    let residual = spec.eval(b, a)?.normalized();
    Ok((residual <= tol).then_some(CurvePoint { b, a, residual }))
}

/// All zeros in `B ∈ [lo, hi]` at fixed `A` detected as sign changes on
/// `samples` equispaced points.
pub fn roots_in_b(spec: &CurveSpec, a: f64, lo: f64, hi: f64, samples: usize, tol: f64) -> Result<Vec<CurvePoint>> {
    let samples = samples.max(2);
    let grid: Vec<f64> = (0..samples).map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&b| spec.signed_or_nan(b, a)).collect();
    let mut out = Vec::new();
    for (x0, x1) in crate::roots::sign_changes(&grid, &values) {
        if let Some(p) = refine_in_b(spec, a, x0, x1, tol)? {
            out.push(p);
        }
    }
    Ok(out)
}

/// Largest search half-width in `B` when relocating a root.
const MAX_SEARCH_WIDTH: f64 = 1.0;

/// Finds the zero nearest to `guess` at fixed `A`, widening the search
/// window geometrically from `width`.
fn locate_near(spec: &CurveSpec, a: f64, guess: f64, width: f64, tol: f64) -> Result<Option<CurvePoint>> {
    let mut w = width.max(1e-6);
    while w <= MAX_SEARCH_WIDTH {
        let grid: Vec<f64> = (-4..=4).map(|i| guess + w * i as f64 / 4.0).collect();
        let values: Vec<f64> = grid.iter().map(|&b| spec.signed_or_nan(b, a)).collect();
        let mut brackets = crate::roots::sign_changes(&grid, &values);
        brackets.sort_by(|x, y| {
            let dx = (0.5 * (x.0 + x.1) - guess).abs();
            let dy = (0.5 * (y.0 + y.1) - guess).abs();
            dx.total_cmp(&dy)
        });
        for (x0, x1) in brackets {
            if let Some(p) = refine_in_b(spec, a, x0, x1, tol)? {
                return Ok(Some(p));
            }
        }
        w *= 2.0;
    }
    Ok(None)
}

/// Continues the zero through `b_seed` at `A = a_lo` over `steps` equal
/// steps to `a_hi`. Each step is predicted linearly from the previous two
/// points; a failed step is retried with halved sub-steps.
pub fn trace_curve(spec: &CurveSpec, a_lo: f64, a_hi: f64, steps: usize, b_seed: f64, tol: f64) -> Result<Curve> {
    let steps = steps.max(1);
    let h = (a_hi - a_lo) / steps as f64;
    let first = locate_near(spec, a_lo, b_seed, 1e-3, tol)?.ok_or(SpectralError::LostTrack { a: a_lo, residual: f64::INFINITY })?;
    let mut points = vec![first];
    let mut slope = 0.0f64;
    for i in 1..=steps {
        let target = a_lo + h * i as f64;
        let mut last = *points.last().unwrap();
        let mut sub = 1usize;
        while last.a != target {
            let next_a = if sub == 1 { target } else { last.a + (target - last.a) / sub as f64 };
            let da = next_a - last.a;
            let guess = last.b + slope * da;
            let width = (0.25 * (slope * da).abs()).max(1e-4);
            match locate_near(spec, next_a, guess, width, tol)? {
                Some(p) if (p.b - guess).abs() <= 0.5 * MAX_SEARCH_WIDTH => {
                    slope = (p.b - last.b) / da;
                    last = p;
                    sub = sub.saturating_sub(1).max(1);
                }
                _ => {
                    sub *= 2;
                    if sub > 256 {
                        return Err(SpectralError::LostTrack { a: next_a, residual: spec.eval(guess, next_a).map_or(f64::INFINITY, |v| v.normalized()) });
                    }
                }
            }
        }
        points.push(CurvePoint { a: target, ..last });
    }
    Ok(Curve { spec: *spec, points })
}

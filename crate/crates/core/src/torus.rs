//! The Josephson flow `φ' = −sin φ/ω + l + 2μ cos τ` on the torus: rotation
//! numbers, period maps, the monodromy of the associated linear system
//! around the unit circle, phase-lock scans and edge bisection.

use std::f64::consts::{PI, TAU};
use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heun::{HeunError, HeunParams, SeriesSolution};
use crate::matprod::Complex2x2;
use crate::ode::{integrate, OdeError, OdeOptions};
use crate::roots::find_root_1d;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TorusError {
    #[error("ω must be positive and finite")]
    InvalidOmega,
    #[error("tolerance {0:e} is outside the accepted range")]
    InvalidTolerance(f64),
    #[error("integration failed: {0}")]
    StepUnderflow(#[from] OdeError),
    #[error("rotation number not converged: {estimate} ± {uncertainty:e} after {periods} periods")]
    NotConverged { estimate: f64, uncertainty: f64, periods: usize },
    #[error("no bracket in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("cancelled")]
    Cancelled,
    #[error(transparent)]
    Heun(#[from] HeunError),
}

pub type Result<T> = std::result::Result<T, TorusError>;

/// Physical parameters `(ω, B, A)`; `l`, `μ`, `λ` are derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub omega: f64,
    pub b: f64,
    pub a: f64,
}

impl PhysParams {
    pub fn new(omega: f64, b: f64, a: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) || !b.is_finite() || !a.is_finite() {
            return Err(TorusError::InvalidOmega);
        }
        Ok(Self { omega, b, a })
    }

    /// `l = B/ω`.
    pub fn l(&self) -> f64 {
        self.b / self.omega
    }

    /// `μ = A/(2ω)`.
    pub fn mu(&self) -> f64 {
        self.a / (2.0 * self.omega)
    }

    /// `λ = 1/(4ω²) − μ²`.
    pub fn lambda(&self) -> f64 {
        1.0 / (4.0 * self.omega * self.omega) - self.mu().powi(2)
    }

    pub fn with_b(&self, b: f64) -> Self {
        Self { b, ..*self }
    }

    /// Heun parameters `n = l + 1` with the given series exponent.
    pub fn heun_params(&self, exponent: Complex64) -> Result<HeunParams> {
        let c = |x: f64| Complex64::new(x, 0.0);
        Ok(HeunParams::new(c(self.l() + 1.0), c(self.lambda()), c(self.mu()), exponent)?)
    }

    fn field(&self) -> impl Fn(f64, &[f64; 1]) -> [f64; 1] {
        let (inv_omega, l, two_mu) = (1.0 / self.omega, self.l(), 2.0 * self.mu());
        move |tau, y| [-y[0].sin() * inv_omega + l + two_mu * tau.cos()]
    }
}

fn check_flow_tol(tol: f64) -> Result<()> {
    if (1e-12..=1e-6).contains(&tol) {
        Ok(())
    } else {
        Err(TorusError::InvalidTolerance(tol))
    }
}

/// Lifted `φ(τ_span)` for the solution with `φ(0) = φ0`.
pub fn flow_phi(p: &PhysParams, phi0: f64, tau_span: f64, tol: f64) -> Result<f64> {
    check_flow_tol(tol)?;
    flow_unchecked(p, phi0, tau_span, tol)
}

fn flow_unchecked(p: &PhysParams, phi0: f64, tau_span: f64, tol: f64) -> Result<f64> {
    let (y, _) = integrate(p.field(), 0.0, [phi0], tau_span, &OdeOptions::with_tol(tol))?;
    Ok(y[0])
}

/// One period of the flow: the lift `F` of the Poincaré map.
fn period_map(p: &PhysParams, phi0: f64, tol: f64) -> Result<f64> {
    flow_unchecked(p, phi0, TAU, tol)
}

/// Pairs `(φ0, F(φ0))` for `nsamples` equispaced `φ0 ∈ [−π, π)`.
pub fn poincare_samples(p: &PhysParams, nsamples: usize, tol: f64) -> Result<Vec<(f64, f64)>> {
    check_flow_tol(tol)?;
    let n = nsamples.max(3);
    (0..n)
        .map(|i| {
            let x = -PI + TAU * i as f64 / n as f64;
            Ok((x, period_map(p, x, tol)?))
        })
        .collect()
}

/// Largest deviation of the Poincaré map from a rigid shift by a whole
/// number of turns.
pub fn poincare_identity_residual(p: &PhysParams, nsamples: usize, tol: f64) -> Result<f64> {
    Ok(poincare_samples(p, nsamples, tol)?
        .into_iter()
        .map(|(x, y)| {
            let d = y - x;
            (d - TAU * (d / TAU).round()).abs()
        })
        .fold(0.0, f64::max))
}

/// Rotation number in turns per period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate {
    pub rho: f64,
    pub uncertainty: f64,
    pub periods_used: usize,
    /// The Poincaré map has a point shifted by exactly `rho` turns.
    pub locked: bool,
    pub converged: bool,
}

/// How the rotation number of an unlocked point is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationMethod {
    /// Fit the period map by a Möbius transformation of the circle and read
    /// the rotation angle from its multiplier; falls back to `Birkhoff`
    /// when the fit is not elliptic or does not reproduce the samples.
    Mobius,
    /// Smoothly weighted Birkhoff average along one orbit.
    Birkhoff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationOptions {
    pub method: RotationMethod,
    pub tol: f64,
    pub flow_tol: f64,
    /// Equispaced initial points used to bound the displacement range.
    pub samples: usize,
    pub min_periods: usize,
    pub max_periods: usize,
}

impl RotationOptions {
    pub fn new(tol: f64) -> Self {
        Self { method: RotationMethod::Mobius, tol, flow_tol: (tol * 1e-4).clamp(1e-12, 1e-8), samples: 32, min_periods: 64, max_periods: 16384 }
    }

    pub fn with_method(self, method: RotationMethod) -> Self {
        Self { method, ..self }
    }
}

/// Displacement `d(x) = (F(x) − x)/2π` of the period map.
struct Displacement<'a> {
    p: &'a PhysParams,
    flow_tol: f64,
    evals: usize,
}

impl Displacement<'_> {
    fn at(&mut self, x: f64) -> Result<f64> {
        self.evals += 1;
        Ok((period_map(self.p, x, self.flow_tol)? - x) / TAU)
    }

    /// Sampled values of `d` on `n` equispaced points of `[0, 2π)`.
    fn sample(&mut self, n: usize) -> Result<Vec<(f64, f64)>> {
        (0..n)
            .map(|i| {
                let x = TAU * i as f64 / n as f64;
                Ok((x, self.at(x)?))
            })
            .collect()
    }

    /// Golden-section refinement of a maximum (`sign = 1`) or minimum
    /// (`sign = −1`) of `d` bracketed by `[lo, hi]`.
    fn extremum(&mut self, lo: f64, hi: f64, sign: f64) -> Result<f64> {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = sign * self.at(x1)?;
        let mut f2 = sign * self.at(x2)?;
        while b - a > 1e-7 {
            if f1 > f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = sign * self.at(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = sign * self.at(x2)?;
            }
        }
        Ok(sign * f1.max(f2))
    }
}

/// Range `[min d, max d]` of the displacement, with the extremum nearest
/// an integer refined when it could hide a fixed point of `F − 2πr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementRange {
    pub min: f64,
    pub max: f64,
}

impl DisplacementRange {
    /// The integer inside the range, if any.
    pub fn locked_at(&self) -> Option<i64> {
        let r = self.min.ceil();
        (r <= self.max).then_some(r as i64)
    }
}

fn refined_extremum(d: &mut Displacement, samples: &[(f64, f64)], sign: f64) -> Result<f64> {
    let n = samples.len();
    let (i, _) = samples
        .iter()
        .enumerate()
        .max_by(|x, y| (sign * x.1 .1).total_cmp(&(sign * y.1 .1)))
        .expect("non-empty samples");
    let step = TAU / n as f64;
    let x = samples[i].0;
    let v = d.extremum(x - step, x + step, sign)?;
    Ok(if sign > 0.0 { v.max(samples[i].1) } else { v.min(samples[i].1) })
}

fn displacement_range_with(d: &mut Displacement, samples: usize, refine: bool) -> Result<(DisplacementRange, Vec<(f64, f64)>)> {
    let pts = d.sample(samples.max(8))?;
    let mut min = pts.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let mut max = pts.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    if max.floor() >= min.ceil() {
        return Ok((DisplacementRange { min, max }, pts));
    }
    let margin = 0.25 * (max - min) + 1e-12;
    if refine || max.ceil() - max < margin {
        max = refined_extremum(d, &pts, 1.0)?;
    }
    if refine || min - min.floor() < margin {
        min = refined_extremum(d, &pts, -1.0)?;
    }
    Ok((DisplacementRange { min, max }, pts))
}

/// Range of `(F(x) − x)/2π` over the circle. `ρ` lies in this range and
/// equals an integer `r` exactly when `r` belongs to it.
pub fn displacement_range(p: &PhysParams, tol: f64) -> Result<DisplacementRange> {
    check_flow_tol(tol)?;
    let mut d = Displacement { p, flow_tol: tol, evals: 0 };
    Ok(displacement_range_with(&mut d, 32, true)?.0)
}

fn bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

fn weighted_average(d: &[f64]) -> f64 {
    let k = d.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, v) in d.iter().enumerate() {
        let w = bump((i as f64 + 1.0) / (k as f64 + 1.0));
        num += w * v;
        den += w;
    }
    num / den
}

/// Möbius transformation of the Riemann sphere sending `z[j]` to `w[j]`.
fn mobius_through(z: [Complex64; 3], w: [Complex64; 3]) -> Complex2x2 {
    // Maps sending the triples to (0, 1, ∞).
    let to_std = |p: [Complex64; 3]| Complex2x2::new(p[1] - p[2], -p[0] * (p[1] - p[2]), p[1] - p[0], -p[2] * (p[1] - p[0]));
    let a = to_std(z);
    let b = to_std(w);
    let b_inv = Complex2x2::new(b.m22, -b.m12, -b.m21, b.m11);
    b_inv * a
}

fn mobius_apply(m: &Complex2x2, z: Complex64) -> Complex64 {
    (m.m11 * z + m.m12) / (m.m21 * z + m.m22)
}

/// Rotation angle, in turns within `[0, 1)`, of an elliptic Möbius map
/// preserving the unit circle: the argument of its multiplier at the fixed
/// point inside the disk. `None` when the map is not elliptic.
fn elliptic_turns(m: &Complex2x2) -> Option<f64> {
    let (a, b, c, d) = (m.m11, m.m12, m.m21, m.m22);
    let det = m.det();
    let disc = ((a - d) * (a - d) + 4.0 * b * c).sqrt();
    let candidates = if c.norm() > 1e-300 {
        [(a - d + disc) / (2.0 * c), (a - d - disc) / (2.0 * c)]
    } else {
        // One fixed point at ∞; the finite one is b/(d − a).
        let z = b / (d - a);
        [z, z]
    };
    let inside = candidates.into_iter().min_by(|x, y| x.norm().total_cmp(&y.norm()))?;
    if !(inside.norm() < 1.0 - 1e-9) {
        return None;
    }
    let k = det / ((c * inside + d) * (c * inside + d));
    if (k.norm() - 1.0).abs() > 1e-6 {
        return None;
    }
    Some((k.arg() / TAU).rem_euclid(1.0))
}

/// Rotation number from Möbius fits of the sampled period map, checked
/// against all samples. Returns `(ρ, uncertainty)`.
fn mobius_rotation(p: &PhysParams, pts: &[(f64, f64)], range: &DisplacementRange, flow_tol: f64) -> Result<Option<(f64, f64)>> {
    let n = pts.len();
    let e = |x: f64| Complex64::from_polar(1.0, x);
    let image = |i: usize| pts[i].0 + TAU * pts[i].1;
    let fit = |offset: usize| {
        let idx = [offset % n, (offset + n / 3) % n, (offset + 2 * n / 3) % n];
        mobius_through(idx.map(|i| e(pts[i].0)), idx.map(|i| e(image(i))))
    };
    let fits = [fit(0), fit(n / 6)];
    let mut turns = [0.0; 2];
    let mut residual = 0.0f64;
    for (t, m) in turns.iter_mut().zip(&fits) {
        *t = match elliptic_turns(m) {
            Some(t) => t,
            None => return Ok(None),
        };
        for (i, &(x, _)) in pts.iter().enumerate() {
            let dev = (mobius_apply(m, e(x)) / e(image(i))).arg().abs();
            residual = residual.max(dev);
        }
    }
    if residual > 1e-6 {
        return Ok(None);
    }
    let mut spread = (turns[0] - turns[1]).abs();
    spread = spread.min(1.0 - spread);
    let frac = turns[0];
    // ρ = frac + n lies in the displacement range, whose width is below one.
    let dist = |rho: f64| (range.min - rho).max(rho - range.max).max(0.0);
    let base = (range.min - frac).floor();
    let mut candidates: Vec<f64> = (0..3).map(|j| frac + base + j as f64).collect();
    candidates.sort_by(|x, y| dist(*x).total_cmp(&dist(*y)));
    let rho = if dist(candidates[1]) > 0.05 {
        candidates[0]
    } else {
        // Ambiguous: the plain orbit average is within 1/K of ρ.
        let k = 256;
        let mut x = 0.0;
        let mut total = 0.0;
        for _ in 0..k {
            let y = period_map(p, x, flow_tol)?;
            total += y - x;
            x = y.rem_euclid(TAU);
        }
        let avg = total / (TAU * k as f64);
        candidates[..2].iter().copied().min_by(|x, y| (x - avg).abs().total_cmp(&(y - avg).abs())).unwrap()
    };
    Ok(Some((rho, spread.max(residual).max(10.0 * flow_tol))))
}

/// Rotation number with an explicit convergence flag instead of an error.
///
/// An integer in the displacement range means the period map has a point
/// advancing by exactly that many turns: the estimate is then exact up to
/// integration error. Otherwise the rotation number comes from a Möbius
/// fit of the period map or from a smoothly weighted Birkhoff average of
/// the displacement along one orbit, for doubling orbit lengths.
pub fn rotation_estimate(p: &PhysParams, opts: &RotationOptions) -> Result<RotationEstimate> {
    check_flow_tol(opts.flow_tol)?;
    let mut d = Displacement { p, flow_tol: opts.flow_tol, evals: 0 };
    let (range, pts) = displacement_range_with(&mut d, opts.samples, false)?;
    if let Some(r) = range.locked_at() {
        return Ok(RotationEstimate { rho: r as f64, uncertainty: opts.flow_tol.max(1e-12), periods_used: d.evals, locked: true, converged: true });
    }
    if opts.method == RotationMethod::Mobius {
        if let Some((rho, uncertainty)) = mobius_rotation(p, &pts, &range, opts.flow_tol)? {
            if uncertainty > opts.tol && opts.flow_tol > 1e-12 {
                // Ill-conditioned fit: repeat with tighter integration.
                let tighter = RotationOptions { flow_tol: (opts.flow_tol * 1e-2).max(1e-12), ..*opts };
                let mut e = rotation_estimate(p, &tighter)?;
                e.periods_used += d.evals;
                return Ok(e);
            }
            return Ok(RotationEstimate { rho, uncertainty, periods_used: d.evals, locked: false, converged: uncertainty <= opts.tol });
        }
    }
    let mut orbit = Vec::with_capacity(opts.max_periods);
    let mut x = 0.0f64;
    let mut k = opts.min_periods.max(8);
    let mut prev: Option<f64> = None;
    loop {
        while orbit.len() < k {
            let y = period_map(p, x, opts.flow_tol)?;
            orbit.push((y - x) / TAU);
            x = y.rem_euclid(TAU);
        }
        let est = weighted_average(&orbit).clamp(range.min, range.max);
        if let Some(pv) = prev {
            let diff = (est - pv).abs();
            let uncertainty = diff.max(opts.flow_tol).max(1e-14);
            if diff < 0.5 * opts.tol || k >= opts.max_periods {
                return Ok(RotationEstimate {
                    rho: est,
                    uncertainty,
                    periods_used: d.evals + orbit.len(),
                    locked: false,
                    converged: diff < 0.5 * opts.tol,
                });
            }
        }
        prev = Some(est);
        k *= 2;
    }
}

/// Rotation number `ρ = lim (φ(2πK) − φ(0))/(2πK)`.
pub fn rotation_number(p: &PhysParams, tol: f64) -> Result<RotationEstimate> {
    if !(1e-12..1.0).contains(&tol) {
        return Err(TorusError::InvalidTolerance(tol));
    }
    let est = rotation_estimate(p, &RotationOptions::new(tol))?;
    if !est.converged {
        return Err(TorusError::NotConverged { estimate: est.rho, uncertainty: est.uncertainty, periods: est.periods_used });
    }
    Ok(est)
}

/// Monodromy of the linear system around the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonodromyMatrix {
    pub m: Complex2x2,
    /// `|det m − e^{−2πi(l+1)}|`.
    pub det_error: f64,
}

impl MonodromyMatrix {
    /// The two eigenvalues predicted from the rotation number:
    /// `e^{πi(ρ−l)}` and `e^{−πi(ρ+l)}`.
    pub fn predicted_eigenvalues(rho: f64, l: f64) -> [Complex64; 2] {
        [Complex64::from_polar(1.0, PI * (rho - l)), Complex64::from_polar(1.0, -PI * (rho + l))]
    }

    /// Largest distance between the eigenvalues and the prediction, with
    /// the pairing chosen to minimize it.
    pub fn eigenvalue_mismatch(&self, rho: f64, l: f64) -> f64 {
        let ev = self.m.eigenvalues();
        let want = Self::predicted_eigenvalues(rho, l);
        let direct = (ev[0] - want[0]).norm().max((ev[1] - want[1]).norm());
        let swapped = (ev[0] - want[1]).norm().max((ev[1] - want[0]).norm());
        direct.min(swapped)
    }

    /// Max-row-sum distance to the identity.
    pub fn distance_to_identity(&self) -> f64 {
        (self.m - Complex2x2::identity()).norm()
    }
}

const MONODROMY_SEGMENTS: usize = 8;

fn linear_field(p: &PhysParams) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] {
    let (k, l, two_mu) = (0.5 / p.omega, p.l(), 2.0 * p.mu());
    // State (Re v, Im v, Re u, Im u): v' = k u, u' = k v − i(l + 2μ cos τ) u.
    move |tau, y| {
        let q = l + two_mu * tau.cos();
        [k * y[2], k * y[3], k * y[0] + q * y[3], k * y[1] - q * y[2]]
    }
}

fn transport_segment(p: &PhysParams, t0: f64, t1: f64, tol: f64) -> Result<Complex2x2> {
    let f = linear_field(p);
    let opts = OdeOptions::with_tol(tol);
    let (c0, _) = integrate(&f, t0, [1.0, 0.0, 0.0, 0.0], t1, &opts)?;
    let (c1, _) = integrate(&f, t0, [0.0, 0.0, 1.0, 0.0], t1, &opts)?;
    Ok(Complex2x2::new(
        Complex64::new(c0[0], c0[1]),
        Complex64::new(c1[0], c1[1]),
        Complex64::new(c0[2], c0[3]),
        Complex64::new(c1[2], c1[3]),
    ))
}

/// Fundamental matrix of `v' = u/(2ω)`, `u' = v/(2ω) − i(l + 2μ cos τ)u`
/// (the linear system in `z = e^{iτ}`) after one turn, acting on `(v, u)`
/// at `z = 1`. The turn is split into segments, each started from the
/// identity, to limit growth inside a single integration.
pub fn monodromy_numeric(p: &PhysParams, tol: f64) -> Result<MonodromyMatrix> {
    if !(1e-14..=1e-4).contains(&tol) {
        return Err(TorusError::InvalidTolerance(tol));
    }
    let mut m = Complex2x2::identity();
    for s in 0..MONODROMY_SEGMENTS {
        let t0 = TAU * s as f64 / MONODROMY_SEGMENTS as f64;
        let t1 = TAU * (s + 1) as f64 / MONODROMY_SEGMENTS as f64;
        m = transport_segment(p, t0, t1, tol)? * m;
    }
    let expected = Complex64::from_polar(1.0, -TAU * (p.l() + 1.0));
    Ok(MonodromyMatrix { m, det_error: (m.det() - expected).norm() })
}

/// Initial vector `(v(1), u(1))` of the linear system for a Heun solution
/// `E`, using `v = e^{−μz}E` and `u = 2iωz v'`.
pub fn initial_vector(p: &PhysParams, e: &SeriesSolution) -> [Complex64; 2] {
    let one = Complex64::new(1.0, 0.0);
    let mu = p.mu();
    let scale = (-mu).exp();
    let e0 = e.eval(one);
    let e1 = e.eval_derivative(one);
    [e0 * scale, Complex64::new(0.0, 2.0 * p.omega) * scale * (e1 - mu * e0)]
}

/// Parameter grid: `n` equispaced values from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || n == 0 || (n > 1 && !(hi > lo)) {
            return Err(TorusError::InvalidGrid(format!("{lo}:{hi}:{n}")));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.n == 1 {
            self.lo
        } else if i + 1 == self.n {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub omega: f64,
    pub b: Axis,
    pub a: Axis,
}

/// Maximum number of cells accepted by [`phase_lock_scan`].
pub const MAX_CELLS: usize = 1_000_000;

/// Rotation numbers on a `(B, A)` grid, stored row-major with `A` as the
/// row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portrait {
    pub grid: GridSpec,
    pub tol: f64,
    pub rho: Vec<f64>,
    pub uncertainty: Vec<f64>,
    pub locked: Vec<bool>,
    pub converged: Vec<bool>,
    pub boundary: Vec<bool>,
}

impl Portrait {
    pub fn index(&self, ib: usize, ia: usize) -> usize {
        ia * self.grid.b.n + ib
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Fraction of cells whose rotation number did not converge.
    pub fn unconverged_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.converged.iter().filter(|c| !**c).count() as f64 / self.len() as f64
        }
    }

    /// Cells `(ib, ia)` flagged as boundary cells.
    pub fn boundary_cells(&self) -> Vec<(usize, usize)> {
        let nb = self.grid.b.n;
        self.boundary.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| (i % nb, i / nb)).collect()
    }

    fn lock_level(&self, i: usize) -> Option<i64> {
        self.locked[i].then(|| self.rho[i].round() as i64)
    }

    fn flag_boundaries(&mut self) {
        let (nb, na) = (self.grid.b.n, self.grid.a.n);
        let mut flags = vec![false; self.len()];
        for ia in 0..na {
            for ib in 0..nb {
                let i = self.index(ib, ia);
                let here = self.lock_level(i);
                let mut neighbours = Vec::with_capacity(4);
                if ib > 0 {
                    neighbours.push(self.index(ib - 1, ia));
                }
                if ib + 1 < nb {
                    neighbours.push(self.index(ib + 1, ia));
                }
                if ia > 0 {
                    neighbours.push(self.index(ib, ia - 1));
                }
                if ia + 1 < na {
                    neighbours.push(self.index(ib, ia + 1));
                }
                flags[i] = here.is_some() && neighbours.into_iter().any(|j| self.lock_level(j) != here);
            }
        }
        self.boundary = flags;
    }
}

/// Rotation number on every grid cell, in parallel. A cell counts as
/// locked when `|ρ − round ρ| < 3·uncertainty`; cells that did not
/// converge keep their last estimate. Setting `cancel` aborts the scan.
pub fn phase_lock_scan(grid: &GridSpec, tol: f64, cancel: Option<&AtomicBool>) -> Result<Portrait> {
    PhysParams::new(grid.omega, 0.0, 0.0)?;
    let cells = grid.a.n.checked_mul(grid.b.n).filter(|&c| c <= MAX_CELLS);
    let cells = cells.ok_or_else(|| TorusError::InvalidGrid(format!("more than {MAX_CELLS} cells")))?;
    let opts = RotationOptions::new(tol);
    let nb = grid.b.n;
    let results: Vec<Result<RotationEstimate>> = (0..cells)
        .into_par_iter()
        .map(|i| {
            if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                return Err(TorusError::Cancelled);
            }
            let p = PhysParams::new(grid.omega, grid.b.value(i % nb), grid.a.value(i / nb))?;
            rotation_estimate(&p, &opts)
        })
        .collect();
    let mut portrait = Portrait {
        grid: *grid,
        tol,
        rho: Vec::with_capacity(cells),
        uncertainty: Vec::with_capacity(cells),
        locked: Vec::with_capacity(cells),
        converged: Vec::with_capacity(cells),
        boundary: Vec::new(),
    };
    for r in results {
        let e = r?;
        portrait.locked.push((e.rho - e.rho.round()).abs() < 3.0 * e.uncertainty);
        portrait.rho.push(e.rho);
        portrait.uncertainty.push(e.uncertainty);
        portrait.converged.push(e.converged);
    }
    portrait.flag_boundaries();
    Ok(portrait)
}

/// Which edge of a phase-lock area to locate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Signed distance of the displacement range from `r`: non-negative
/// exactly when the point belongs to the area `ρ = r` (seen from `side`).
pub fn lock_margin(p: &PhysParams, r: i64, side: Side, tol: f64) -> Result<f64> {
    let range = displacement_range(p, tol)?;
    Ok(match side {
        Side::Left => range.max - r as f64,
        Side::Right => r as f64 - range.min,
    })
}

/// Edge in `B` of the phase-lock area `ρ = r` at fixed `A` and `ω`.
///
/// `bracket` must contain one point outside the area on the chosen side
/// and one inside. The returned `B` is located to `tol`.
pub fn boundary_bisect(omega: f64, a: f64, r: i64, side: Side, bracket: (f64, f64), tol: f64) -> Result<f64> {
    let flow_tol = (tol * 1e-2).clamp(1e-12, 1e-8);
    let p = PhysParams::new(omega, bracket.0, a)?;
    let margin = |b: f64| lock_margin(&p.with_b(b), r, side, flow_tol);
    let root = find_root_1d(margin, bracket.0, bracket.1, tol)?;
    root.map_err(|_| TorusError::NoBracket { lo: bracket.0, hi: bracket.1 })
}

/// Both edges of the area `ρ = r` at fixed `A`, searched on `samples`
/// points of `[b_lo, b_hi]`. Returns `None` when no sample is locked at `r`.
pub fn area_edges(omega: f64, a: f64, r: i64, b_lo: f64, b_hi: f64, samples: usize, tol: f64) -> Result<Option<(f64, f64)>> {
    let flow_tol = (tol * 1e-2).clamp(1e-12, 1e-8);
    let axis = Axis::new(b_lo, b_hi, samples.max(3))?;
    let levels: Vec<Option<i64>> = axis
        .values()
        .into_iter()
        .map(|b| Ok(displacement_range(&PhysParams::new(omega, b, a)?, flow_tol)?.locked_at()))
        .collect::<Result<_>>()?;
    let first = match levels.iter().position(|l| *l == Some(r)) {
        Some(i) => i,
        None => return Ok(None),
    };
    let last = levels.iter().rposition(|l| *l == Some(r)).unwrap_or(first);
    if first == 0 || last + 1 == levels.len() {
        return Err(TorusError::NoBracket { lo: b_lo, hi: b_hi });
    }
    let left = boundary_bisect(omega, a, r, Side::Left, (axis.value(first - 1), axis.value(first)), tol)?;
    let right = boundary_bisect(omega, a, r, Side::Right, (axis.value(last), axis.value(last + 1)), tol)?;
    Ok(Some((left, right)))
}

/// `B` in `bracket` with `ρ(B) = r` for non-integer `r`, by root finding on
/// the monotone function `ρ(B) − r`.
pub fn level_bisect(omega: f64, a: f64, r: f64, bracket: (f64, f64), tol: f64) -> Result<f64> {
    let p = PhysParams::new(omega, bracket.0, a)?;
    let rho_tol = (tol * 0.1).max(1e-10);
    let f = |b: f64| rotation_number(&p.with_b(b), rho_tol).map(|e| e.rho - r);
    let root = find_root_1d(f, bracket.0, bracket.1, tol)?;
    root.map_err(|_| TorusError::NoBracket { lo: bracket.0, hi: bracket.1 })
}

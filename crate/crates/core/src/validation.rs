//! Cross-checks between the series, spectral and dynamical routes. Each
//! check returns a [`CheckReport`]; tolerances are fixed here.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j_zero;
use crate::heun::{d_vectors, forward_solution, backward_solution, pasting_determinant, BackwardFamily, ForwardFamily, HeunParams};
use crate::matprod::{converging_product, extrapolated_product, projective_backward_solve, MatrixFamily};
use crate::roots::{find_root_1d, sign_changes};
use crate::spectral::{self, boundary_e0, boundary_e1, pasting_value, tridiag_det, xi, zeta, CurveEquation, CurveSpec, Sign};
use crate::torus::{
    area_edges, lock_margin, monodromy_numeric, phase_lock_scan, poincare_identity_residual, rotation_estimate, rotation_number, Axis,
    GridSpec, PhysParams, Portrait, RotationMethod, RotationOptions, Side,
};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    /// Largest observed value of the checked quantity.
    pub worst: f64,
    pub threshold: f64,
    pub detail: String,
    pub seconds: f64,
}

impl CheckReport {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<28} worst {:.3e} (limit {:.1e}, {:.1} s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.worst,
            self.threshold,
            self.seconds,
            self.detail
        )
    }
}

/// Collected reports of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub checks: Vec<CheckReport>,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

type CheckResult = Result<(f64, String), String>;

fn run(id: u32, name: &str, threshold: f64, body: impl FnOnce() -> CheckResult) -> CheckReport {
    let start = Instant::now();
    let outcome = body();
    let seconds = start.elapsed().as_secs_f64();
    let (passed, worst, detail) = match outcome {
        Ok((worst, detail)) => (worst < threshold, worst, detail),
        Err(e) => (false, f64::NAN, e),
    };
    CheckReport { id, name: name.into(), passed, worst, threshold, detail, seconds }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Refined real roots of `f` from sign changes on `n + 1` grid points.
fn sweep_roots<E: std::fmt::Display>(f: impl Fn(f64) -> Result<f64, E>, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| f(x).unwrap_or(f64::NAN)).collect();
    let mut out = Vec::new();
    for (a, b) in sign_changes(&grid, &vals) {
        if let Ok(r) = find_root_1d(&f, a, b, 1e-15 * a.abs().max(1.0)).map_err(err)? {
            out.push(r);
        }
    }
    Ok(out)
}

pub const DET_LIMIT: f64 = 1e-6;
pub const EIGEN_LIMIT: f64 = 1e-3;
pub const RATIO_LIMIT: f64 = 1e-10;
pub const RESIDUAL_LIMIT: f64 = 1e-12;
pub const PASTE_LIMIT: f64 = 1e-6;
pub const IDENTITY_LIMIT: f64 = 1e-4;
pub const UNIPOTENT_LIMIT: f64 = 1e-4;
pub const JORDAN_MIN: f64 = 1e-3;
pub const BOUNDARY_RESIDUAL_LIMIT: f64 = 1e-5;
pub const EDGE_AGREEMENT: f64 = 1e-4;
pub const LEVEL_AGREEMENT: f64 = 1e-4;
pub const BESSEL_LIMIT: f64 = 1e-8;

/// Determinant of the numerical monodromy against `e^{−2πi(l+1)}`.
pub fn determinant_identity(draws: usize, seed: u64) -> CheckReport {
    run(1, "determinant identity", DET_LIMIT, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..draws {
            let p = PhysParams::new(rng.gen_range(0.3..2.0), rng.gen_range(0.0..4.0), rng.gen_range(0.0..5.0)).map_err(err)?;
            worst = worst.max(monodromy_numeric(&p, 1e-12).map_err(err)?.det_error);
        }
        Ok((worst, format!("{draws} draws")))
    })
}

/// Monodromy eigenvalues against `e^{πi(ρ−l)}`, `e^{−πi(ρ+l)}` at points
/// with non-integer rotation number.
pub fn eigenvalue_rotation(points: usize, seed: u64) -> CheckReport {
    run(2, "eigenvalue-rotation relation", EIGEN_LIMIT, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let mut used = 0;
        let mut tried = 0;
        while used < points {
            tried += 1;
            if tried > 50 * points {
                return Err(format!("only {used} unlocked points found"));
            }
            let p = PhysParams::new(rng.gen_range(0.3..2.0), rng.gen_range(0.0..4.0), rng.gen_range(0.0..5.0)).map_err(err)?;
            // The orbit average keeps this check independent of the Möbius
            // structure of the period map.
            let opts = RotationOptions::new(1e-9).with_method(RotationMethod::Birkhoff);
            let rho = match rotation_estimate(&p, &opts).map_err(err)? {
                r if r.converged && !r.locked && (r.rho - r.rho.round()).abs() > 1e-3 => r.rho,
                _ => continue,
            };
            let m = monodromy_numeric(&p, 1e-12).map_err(err)?;
            worst = worst.max(m.eigenvalue_mismatch(rho, p.l()));
            used += 1;
        }
        Ok((worst, format!("{used} unlocked of {tried} draws")))
    })
}

/// Forward and backward coefficient ratios against projective
/// contraction of the recurrence, and recurrence residuals.
pub fn dual_oracle(draws: usize, seed: u64) -> CheckReport {
    run(3, "dual-oracle series", RATIO_LIMIT, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst_ratio = 0.0f64;
        let mut worst_residual = 0.0f64;
        let mut done = 0;
        while done < draws {
            let cx = |rng: &mut ChaCha8Rng, lo: f64, hi: f64, im: f64| Complex64::new(rng.gen_range(lo..hi), rng.gen_range(-im..im));
            let p = HeunParams::new(cx(&mut rng, 0.2, 3.0, 0.5), cx(&mut rng, -2.0, 2.0, 1.0), cx(&mut rng, 0.1, 2.0, 0.5), cx(&mut rng, -2.0, 2.0, 0.5))
                .map_err(err)?;
            if p.is_resonant() {
                continue;
            }
            let fwd = forward_solution(&p, 1e-13, 48).map_err(err)?;
            let bwd = backward_solution(&p, 1e-13, 48).map_err(err)?;
            let xs = projective_backward_solve(&p, 400, 0).map_err(err)?;
            for k in 1..30 {
                let want = xs[k as usize].value().ok_or("projective ratio at infinity")?;
                let got = fwd.coeff(k + 1) / fwd.coeff(k);
                worst_ratio = worst_ratio.max((got - want).norm() / want.norm());
            }
            let rev = move |j: i64| {
                let (f, g, h) = p.recurrence(-j);
                (h, g, f)
            };
            let ys = projective_backward_solve(&rev, 400, 0).map_err(err)?;
            for k in -30..=-1i64 {
                let want = ys[(-k) as usize].value().ok_or("projective ratio at infinity")?;
                let got = bwd.coeff(k - 1) / bwd.coeff(k);
                worst_ratio = worst_ratio.max((got - want).norm() / want.norm());
            }
            for (k, r) in fwd.recurrence_residuals(&p).into_iter().chain(bwd.recurrence_residuals(&p)) {
                if (-40..=40).contains(&k) {
                    worst_residual = worst_residual.max(r);
                }
            }
            done += 1;
        }
        if worst_residual >= RESIDUAL_LIMIT {
            return Err(format!("recurrence residual {worst_residual:e} ≥ {RESIDUAL_LIMIT:e}"));
        }
        Ok((worst_ratio, format!("{draws} draws, residual ≤ {worst_residual:.1e}")))
    })
}

/// Roots in `λ` of the pasting equation against roots of the d-vector
/// determinant at `(n, μ, b) = (1.4, 0.3, 0.25)`.
pub fn pasting_equivalence() -> CheckReport {
    run(4, "pasting equivalence", PASTE_LIMIT, || {
        let (n, mu, b) = (1.4, 0.3, 0.25);
        let paste = |lambda: f64| HeunParams::real(n, lambda, mu, b).map(|p| pasting_value(&p, 1e-13).map_err(|e| e.to_string()))
            .map_err(err)
            .and_then(|v| v.map(|v| v.signed()));
        let det = |lambda: f64| -> Result<f64, String> {
            let p = HeunParams::real(n, lambda, mu, b).map_err(err)?;
            let (plus, minus) = d_vectors(&p, 1e-13).map_err(err)?;
            let t = plus.d0 * minus.d1 - minus.d0 * plus.d1;
            let scale = (plus.d0 * minus.d1).norm() + (minus.d0 * plus.d1).norm();
            Ok(t.re / scale)
        };
        let (lo, hi, steps) = (-4.0, 12.0, 640);
        let r1 = sweep_roots(paste, lo, hi, steps)?;
        let r2 = sweep_roots(det, lo, hi, steps)?;
        let genuine = |xs: Vec<f64>| -> Vec<f64> {
            xs.into_iter()
                .filter(|&l| {
                    HeunParams::real(n, l, mu, b).ok().and_then(|p| d_vectors(&p, 1e-13).ok()).is_some_and(|(p, m)| pasting_determinant(&p, &m) < 1e-8)
                })
                .collect()
        };
        let (r1, r2) = (genuine(r1), genuine(r2));
        if r1.is_empty() || r1.len() != r2.len() {
            return Err(format!("root counts differ: {} vs {}", r1.len(), r2.len()));
        }
        let dist = |x: f64, ys: &[f64]| ys.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min);
        let worst = r1.iter().map(|&x| dist(x, &r2)).chain(r2.iter().map(|&x| dist(x, &r1))).fold(0.0, f64::max);
        Ok((worst, format!("{} roots in λ ∈ [{lo}, {hi}]", r1.len())))
    })
}

/// Zeros of `ζ_l(ω, ·)` with the point `(B, A) = (lω, 2ωμ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adjacency {
    pub mu: f64,
    pub b: f64,
    pub a: f64,
    pub zeta_residual: f64,
    pub poincare_residual: f64,
    pub monodromy_distance: f64,
}

/// Roots of `ζ_l` in `μ ∈ (mu_lo, mu_hi)` scanned on `samples` points.
pub fn adjacencies(omega: f64, l: u32, mu_lo: f64, mu_hi: f64, samples: usize) -> Result<Vec<Adjacency>, String> {
    let f = |mu: f64| zeta(c(l as f64), omega, c(mu), 1e-13).map(|v| v.signed());
    let roots = sweep_roots(f, mu_lo, mu_hi, samples)?;
    let mut out = Vec::new();
    for mu in roots {
        let v = zeta(c(l as f64), omega, c(mu), 1e-13).map_err(err)?;
        if v.normalized() > 1e-9 {
            continue;
        }
        let p = PhysParams::new(omega, l as f64 * omega, 2.0 * omega * mu).map_err(err)?;
        out.push(Adjacency {
            mu,
            b: p.b,
            a: p.a,
            zeta_residual: v.normalized(),
            poincare_residual: poincare_identity_residual(&p, 16, 1e-11).map_err(err)?,
            monodromy_distance: monodromy_numeric(&p, 1e-12).map_err(err)?.distance_to_identity(),
        });
    }
    Ok(out)
}

/// Adjacencies on `B = 0` for `ω = 2`: identity Poincaré map and
/// identity monodromy at each zero of `ζ_0`.
pub fn adjacency_check() -> CheckReport {
    run(5, "adjacencies", IDENTITY_LIMIT, || {
        let pts = adjacencies(2.0, 0, 1e-3, 2.5, 500)?;
        if pts.is_empty() {
            return Err("no zero of ζ_0 found".into());
        }
        let worst = pts.iter().map(|p| p.poincare_residual.max(p.monodromy_distance)).fold(0.0, f64::max);
        let list: Vec<String> = pts.iter().map(|p| format!("{:.6}", p.a)).collect();
        Ok((worst, format!("A = [{}]", list.join(", "))))
    })
}

/// Point `(B, A)` where `det(H + λ) = 0` with `λ = 1/(4ω²) − μ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyPoint {
    pub l: u32,
    pub mu: f64,
    pub b: f64,
    pub a: f64,
    pub rho: f64,
    /// Smallest `|margin|` of the displacement range against `round(ρ)`.
    pub edge_margin: f64,
    pub on_scanned_boundary: bool,
    pub trace_defect: f64,
    pub monodromy_distance: f64,
}

impl PolyPoint {
    /// Integer `ρ ≡ l (mod 2)` with `0 ≤ ρ ≤ l`: the displacement range
    /// touches `round(ρ)`.
    pub fn rho_admissible(&self) -> bool {
        let r = self.rho.round();
        self.edge_margin < 1e-6 && (self.rho - r).abs() < 1e-2 && r >= 0.0 && r <= self.l as f64 && (r as i64 - self.l as i64) % 2 == 0
    }

    pub fn verified(&self) -> bool {
        self.rho_admissible() && self.on_scanned_boundary && self.trace_defect < UNIPOTENT_LIMIT && self.monodromy_distance > JORDAN_MIN
    }
}

/// Roots in `μ > 0` of the constrained tridiagonal determinant, each
/// checked against a local portrait, the lock margin and the monodromy.
pub fn poly_points(omega: f64, l: u32) -> Result<Vec<PolyPoint>, String> {
    let g = |mu: f64| -> Result<f64, String> {
        let lambda = 1.0 / (4.0 * omega * omega) - mu * mu;
        let d = tridiag_det(l as usize, c(lambda), c(mu));
        Ok(d.re / (1.0 + lambda.abs() + mu * mu).powi(l as i32))
    };
    let mu_hi = 2.0 + 2.0 * (l as f64 + 1.0) / omega;
    let roots = sweep_roots(g, 1e-3, mu_hi, 4000)?;
    let mut out = Vec::new();
    for mu in roots {
        let p = PhysParams::new(omega, l as f64 * omega, 2.0 * omega * mu).map_err(err)?;
        // At an edge the orbit average converges slowly; the margin below
        // decides whether the point is on the boundary.
        let rho = rotation_estimate(&p, &RotationOptions::new(1e-9)).map_err(err)?.rho;
        let r = rho.round() as i64;
        let margin = lock_margin(&p, r, Side::Left, 1e-11)
            .map_err(err)?
            .abs()
            .min(lock_margin(&p, r, Side::Right, 1e-11).map_err(err)?.abs());
        let step = 0.01;
        let grid = GridSpec {
            omega,
            b: Axis::new(p.b - 5.0 * step, p.b + 5.0 * step, 11).map_err(err)?,
            a: Axis::new(p.a - 5.0 * step, p.a + 5.0 * step, 11).map_err(err)?,
        };
        let local = phase_lock_scan(&grid, 1e-8, None).map_err(err)?;
        let m = monodromy_numeric(&p, 1e-12).map_err(err)?;
        out.push(PolyPoint {
            l,
            mu,
            b: p.b,
            a: p.a,
            rho,
            edge_margin: margin,
            on_scanned_boundary: near_boundary_cell(&local, 5, 5),
            trace_defect: (m.m.trace() - 2.0 * (std::f64::consts::PI * (rho + p.l())).cos()).norm(),
            monodromy_distance: m.distance_to_identity(),
        });
    }
    Ok(out)
}

/// The cell or one of its eight neighbours is a flagged boundary cell.
fn near_boundary_cell(p: &Portrait, ib: usize, ia: usize) -> bool {
    let (nb, na) = (p.grid.b.n, p.grid.a.n);
    (ia.saturating_sub(1)..=(ia + 1).min(na - 1)).any(|ja| (ib.saturating_sub(1)..=(ib + 1).min(nb - 1)).any(|jb| p.boundary[p.index(jb, ja)]))
}

/// Polynomial-solution points at `ω = 0.5`, `l = 2`.
pub fn polynomial_check() -> CheckReport {
    run(6, "polynomial points", UNIPOTENT_LIMIT, || {
        let pts = poly_points(0.5, 2)?;
        if pts.is_empty() {
            return Err("no admissible root".into());
        }
        let mut worst = 0.0f64;
        for p in &pts {
            if !p.rho_admissible() || !p.on_scanned_boundary {
                return Err(format!("point (B, A) = ({}, {}) with ρ = {} is not on an admissible boundary", p.b, p.a, p.rho));
            }
            if p.monodromy_distance <= JORDAN_MIN {
                return Err(format!("monodromy at A = {} is the identity", p.a));
            }
            worst = worst.max(p.trace_defect);
        }
        let list: Vec<String> = pts.iter().map(|p| format!("(B {:.6}, A {:.6}, ρ {:.0})", p.b, p.a, p.rho)).collect();
        Ok((worst, list.join(" ")))
    })
}

/// Smallest normalized residual over the four boundary equations.
pub fn min_boundary_residual(omega: f64, b: f64, a: f64) -> f64 {
    let (l, mu) = (b / omega, a / (2.0 * omega));
    [Sign::Plus, Sign::Minus]
        .into_iter()
        .flat_map(|s| [boundary_e0(l, omega, mu, s, 1e-13), boundary_e1(l, omega, mu, s, 1e-13)])
        .filter_map(|v| v.ok().map(|v| v.normalized()))
        .fold(f64::INFINITY, f64::min)
}

/// Zero of the best-fitting boundary equation within `window` of `b`.
fn boundary_root_near(omega: f64, b: f64, a: f64, window: f64) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for eq in [CurveEquation::E0, CurveEquation::E1] {
        for sign in [Sign::Plus, Sign::Minus] {
            let spec = CurveSpec::new(eq, sign, omega);
            for pt in spectral::roots_in_b(&spec, a, b - window, b + window, 9, 1e-8).ok()? {
                let d = (pt.b - b).abs();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, pt.b));
                }
            }
        }
    }
    best.map(|(_, x)| x)
}

/// Edges of the `ρ = 1` area at `ω = 1`, `A = 3` against the boundary
/// equations.
pub fn boundary_equations_check() -> CheckReport {
    run(7, "boundary equations", BOUNDARY_RESIDUAL_LIMIT, || {
        let (omega, a) = (1.0, 3.0);
        let (left, right) = area_edges(omega, a, 1, -2.0, 5.0, 141, 1e-11).map_err(err)?.ok_or("area ρ = 1 not found")?;
        let mut worst = 0.0f64;
        let mut detail = Vec::new();
        for edge in [left, right] {
            let res = min_boundary_residual(omega, edge, a);
            let root = boundary_root_near(omega, edge, a, 1e-3).ok_or(format!("no boundary-equation zero near B = {edge}"))?;
            let gap = (root - edge).abs();
            if gap >= EDGE_AGREEMENT {
                return Err(format!("edge {edge} vs equation zero {root}"));
            }
            worst = worst.max(res);
            detail.push(format!("B {edge:.9} (ΔB {gap:.1e})"));
        }
        Ok((worst, detail.join(", ")))
    })
}

/// `ρ = 0.5` locus at `ω = 2`, `A = 1` against the level-curve equation.
pub fn level_curve_check() -> CheckReport {
    run(8, "level curve", LEVEL_AGREEMENT, || {
        let (omega, a, r) = (2.0, 1.0, 0.5);
        let p = PhysParams::new(omega, 0.0, a).map_err(err)?;
        let mut prev: Option<(f64, f64)> = None;
        let mut bracket = None;
        for i in 0..=40 {
            let b = 0.1 * i as f64;
            let rho = rotation_number(&p.with_b(b), 1e-8).map_err(err)?.rho;
            if let Some((pb, pr)) = prev {
                if pr < r && rho >= r {
                    bracket = Some((pb, b));
                    break;
                }
            }
            prev = Some((b, rho));
        }
        let bracket = bracket.ok_or("ρ = 0.5 not bracketed in B ∈ [0, 4]")?;
        let b_rho = crate::torus::level_bisect(omega, a, r, bracket, 1e-9).map_err(err)?;
        let spec = CurveSpec::new(CurveEquation::Pasterho, Sign::Plus, omega).with_r(r);
        let pts = spectral::roots_in_b(&spec, a, b_rho - 0.05, b_rho + 0.05, 21, 1e-8).map_err(err)?;
        let nearest = pts.iter().map(|q| q.b).min_by(|x, y| (x - b_rho).abs().total_cmp(&(y - b_rho).abs())).ok_or("no zero of the level-curve equation nearby")?;
        Ok(((nearest - b_rho).abs(), format!("ρ-bisection B {b_rho:.9}, equation B {nearest:.9}")))
    })
}

/// Statistics of a portrait relevant to quantization, symmetry and
/// monotonicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortraitProperties {
    /// Pairs of B-adjacent cells both within 1e−3 of the same half-integer.
    pub half_integer_plateaus: usize,
    /// Largest `|ρ(B) + ρ(−B)|` divided by three times the larger uncertainty.
    pub antisymmetry: f64,
    /// Largest decrease of `ρ` between B-neighbours divided by three times
    /// the larger uncertainty.
    pub monotonicity: f64,
    pub unconverged: usize,
}

pub fn portrait_properties(p: &Portrait) -> PortraitProperties {
    let (nb, na) = (p.grid.b.n, p.grid.a.n);
    let mut plateaus = 0;
    let mut anti = 0.0f64;
    let mut mono = 0.0f64;
    let half = |x: f64| ((x - 0.5).round() + 0.5, (x - (x - 0.5).round() - 0.5).abs());
    for ia in 0..na {
        for ib in 0..nb {
            let i = p.index(ib, ia);
            let j = p.index(nb - 1 - ib, ia);
            let u = 3.0 * p.uncertainty[i].max(p.uncertainty[j]);
            anti = anti.max((p.rho[i] + p.rho[j]).abs() / u);
            if ib + 1 < nb {
                let k = p.index(ib + 1, ia);
                let u = 3.0 * p.uncertainty[i].max(p.uncertainty[k]);
                mono = mono.max((p.rho[i] - p.rho[k]) / u);
                let (qi, di) = half(p.rho[i]);
                let (qk, dk) = half(p.rho[k]);
                if qi == qk && di < 1e-3 && dk < 1e-3 {
                    plateaus += 1;
                }
            }
        }
    }
    PortraitProperties { half_integer_plateaus: plateaus, antisymmetry: anti, monotonicity: mono, unconverged: p.converged.iter().filter(|c| !**c).count() }
}

/// The `ω = 2` portrait on `B ∈ [−6, 6]`, `A ∈ [0, 10]`.
pub fn portrait_check(nb: usize, na: usize) -> CheckReport {
    run(9, "portrait properties", 1.0, || {
        let grid = GridSpec { omega: 2.0, b: Axis::new(-6.0, 6.0, nb).map_err(err)?, a: Axis::new(0.0, 10.0, na).map_err(err)? };
        let portrait = phase_lock_scan(&grid, 1e-6, None).map_err(err)?;
        let props = portrait_properties(&portrait);
        if props.half_integer_plateaus > 0 {
            return Err(format!("{} half-integer plateau pairs", props.half_integer_plateaus));
        }
        let worst = props.antisymmetry.max(props.monotonicity);
        Ok((
            worst,
            format!(
                "{}x{} cells, antisymmetry {:.2}, monotonicity {:.2}, unconverged {} (ratios to 3·uncertainty)",
                nb, na, props.antisymmetry, props.monotonicity, props.unconverged
            ),
        ))
    })
}

/// `ξ_1(0, i x_{1,1}/2)` with the first zero of `J_1`.
pub fn bessel_check() -> CheckReport {
    run(10, "bessel zero of xi", BESSEL_LIMIT, || {
        let x11 = bessel_j_zero(1, 1).map_err(err)?;
        let v = xi(c(1.0), c(0.0), Complex64::new(0.0, 0.5 * x11), 1e-13).map_err(err)?;
        Ok((v.normalized(), format!("x_11 = {x11:.15}")))
    })
}

/// Doubling the truncation of every product family stays within the
/// reported tail bound.
pub fn product_certificates(draws: usize, seed: u64) -> CheckReport {
    run(11, "product certificates", 1.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let mut families = 0;
        let check = |fam: &dyn MatrixFamily, start: i64, worst: &mut f64| -> Result<(), String> {
            let r = converging_product(fam, start, 1e-12).map_err(err)?;
            let d = extrapolated_product(fam, start, r.base_factors, r.levels + 1, 6).map_err(err)?;
            let change = (r.value - d.value).max_abs_entry();
            let ratio = if r.tail_bound > 0.0 { change / r.tail_bound } else if change == 0.0 { 0.0 } else { f64::INFINITY };
            *worst = worst.max(ratio);
            Ok(())
        };
        for _ in 0..draws {
            let n = rng.gen_range(0.2..2.8);
            let lambda = rng.gen_range(-3.0..3.0);
            let mu = rng.gen_range(0.05..2.5);
            let b = rng.gen_range(0.05..0.95);
            let p = HeunParams::real(n, lambda, mu, b).map_err(err)?;
            let omega = rng.gen_range(0.3..2.0);
            let l = rng.gen_range(0.05..0.95) + rng.gen_range(0..3) as f64;
            let lam_phys = 1.0 / (4.0 * omega * omega) - mu * mu;
            let m2 = c(mu * mu);
            check(&ForwardFamily::new(&p), 1, &mut worst)?;
            check(&BackwardFamily::new(&p), 0, &mut worst)?;
            check(&ForwardFamily::entire(c(l), c(lambda), c(mu)), 1, &mut worst)?;
            check(&ForwardFamily { n: c(l + 1.0), lambda: c(lam_phys), mu_sq: m2, b: c(-0.5 * l) }, 0, &mut worst)?;
            check(&ForwardFamily { n: c(l + 1.0), lambda: c(lam_phys), mu_sq: m2, b: c(-0.5 * (l + 1.0)) }, 1, &mut worst)?;
            check(&BackwardFamily { n: c(n), lambda: c(lambda), mu_sq: m2, b: c(0.0) }, 2, &mut worst)?;
            families += 6;
        }
        Ok((worst, format!("{families} products; worst change/tail_bound")))
    })
}

/// Which checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// All checks with a coarse portrait.
    Fast,
    /// All checks at full size.
    Full,
}

/// Runs the checks in order, calling `progress` after each.
pub fn run_suite(suite: Suite, mut progress: impl FnMut(&CheckReport)) -> RunReport {
    let (nb, na) = match suite {
        Suite::Fast => (60, 50),
        Suite::Full => (120, 100),
    };
    let checks: Vec<Box<dyn FnOnce() -> CheckReport>> = vec![
        Box::new(|| determinant_identity(100, 1)),
        Box::new(|| eigenvalue_rotation(20, 2)),
        Box::new(|| dual_oracle(50, 3)),
        Box::new(pasting_equivalence),
        Box::new(adjacency_check),
        Box::new(polynomial_check),
        Box::new(boundary_equations_check),
        Box::new(level_curve_check),
        Box::new(move || portrait_check(nb, na)),
        Box::new(bessel_check),
        Box::new(|| product_certificates(20, 11)),
    ];
    let mut report = RunReport::default();
    for check in checks {
        let r = check();
        progress(&r);
        report.checks.push(r);
    }
    report
}

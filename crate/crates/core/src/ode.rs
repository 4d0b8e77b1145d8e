//! Dormand–Prince 5(4) integrator with PI step-size control for small
//! fixed-size real systems.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when zero.
    pub h_init: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, h_init: 0.0, max_steps: 1_000_000 }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self::with_tol(1e-10)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order weights minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        *o += h * s;
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction) and
/// returns the final state.
pub fn integrate<const N: usize>(
    mut f: impl FnMut(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &OdeOptions,
) -> Result<([f64; N], OdeStats), OdeError> {
    let mut stats = OdeStats::default();
    if t1 == t0 {
        return Ok((y0, stats));
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let err_norm = |e: &[f64; N], ya: &[f64; N], yb: &[f64; N]| -> f64 {
        let mut s = 0.0;
        for i in 0..N {
            let sc = opts.atol + opts.rtol * ya[i].abs().max(yb[i].abs());
            s += (e[i] / sc).powi(2);
        }
        (s / N as f64).sqrt()
    };
    let mut h = if opts.h_init > 0.0 {
        opts.h_init.min(span)
    } else {
        let d0 = err_norm(&y, &y, &y).max(1e-5);
        let d1 = err_norm(&k1, &y, &y).max(1e-5);
        (0.01 * d0 / d1).min(span).max(1e-6 * span)
    };
    let mut err_prev = 1e-4f64;
    let mut rejected_last = false;
    while (t1 - t) * dir > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps { t });
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        if step <= 1e-14 * t.abs().max(span) {
            return Err(OdeError::StepUnderflow { t });
        }
        let hs = dir * step;
        let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * hs, &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + hs, &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = axpy(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let t_new = if last { t1 } else { t + hs };
        let k7 = f(t_new, &y_new);
        let mut e = [0.0; N];
        for i in 0..N {
            e[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = err_norm(&e, &y, &y_new);
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            if step <= 1e-14 * span {
                return Err(OdeError::NonFinite { t });
            }
            h = 0.25 * step;
            stats.rejected += 1;
            rejected_last = true;
            continue;
        }
        if err <= 1.0 {
            // PI controller (Gustafsson), exponents 0.7/5 and 0.4/5.
            let mut fac = 0.9 * err.max(1e-10).powf(-0.14) * err_prev.powf(0.08);
            fac = fac.clamp(0.2, 5.0);
            if rejected_last {
                fac = fac.min(1.0);
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            err_prev = err.max(1e-4);
            stats.accepted += 1;
            rejected_last = false;
            h = step * fac;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            h = step * fac;
            stats.rejected += 1;
            rejected_last = true;
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let (y, _) = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 2.0, &OdeOptions::with_tol(1e-12)).unwrap();
        assert!((y[0] - 2f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_backwards() {
        let f = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let (y, _) = integrate(f, 0.0, [1.0, 0.0], -10.0, &OdeOptions::with_tol(1e-12)).unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((y[1] - 10f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn error_scales_with_tolerance() {
        // y' = cos t · y, y(0) = 1: y = exp(sin t).
        let f = |t: f64, y: &[f64; 1]| [t.cos() * y[0]];
        let exact = 20f64.sin().exp();
        let mut prev_err = f64::INFINITY;
        for tol in [1e-6, 1e-8, 1e-10] {
            let (y, _) = integrate(f, 0.0, [1.0], 20.0, &OdeOptions::with_tol(tol)).unwrap();
            let err = (y[0] - exact).abs();
            assert!(err < 100.0 * tol, "tol {tol}: err {err}");
            assert!(err < prev_err);
            prev_err = err;
        }
    }

    #[test]
    fn step_budget() {
        let f = |_: f64, y: &[f64; 1]| [y[0]];
        let opts = OdeOptions { max_steps: 3, ..OdeOptions::with_tol(1e-12) };
        assert!(matches!(integrate(f, 0.0, [1.0], 50.0, &opts), Err(OdeError::TooManySteps { .. })));
    }
}

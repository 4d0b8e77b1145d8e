//! One-dimensional root finding for real-valued equations and secant
//! refinement for complex ones.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("secant refinement did not reach the tolerance (best normalized residual {best:e})")]
    NotConverged { best: f64 },
}

/// Brackets `[lo, hi]` of sign changes of `f` sampled on `grid`.
pub fn sign_changes(grid: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    grid.windows(2)
        .zip(values.windows(2))
        .filter(|(_, v)| v[0].is_finite() && v[1].is_finite() && (v[0] == 0.0 || v[0].signum() != v[1].signum()))
        .map(|(x, _)| (x[0], x[1]))
        .collect()
}

/// Root of a real function inside a sign-changing bracket.
///
/// Illinois-modified regula falsi with a bisection step whenever the
/// bracket fails to shrink by half; stops when the bracket is below `xtol`
/// or an exact zero is hit.
pub fn find_root_1d<E>(mut f: impl FnMut(f64) -> Result<f64, E>, lo: f64, hi: f64, xtol: f64) -> Result<Result<f64, RootError>, E> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(Ok(a));
    }
    if fb == 0.0 {
        return Ok(Ok(b));
    }
    if !(fa.signum() != fb.signum()) {
        return Ok(Err(RootError::NoBracket { lo: a, hi: b }));
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let width = b - a;
        if width <= xtol || width <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
        let mut x = (a * fb - b * fa) / (fb - fa);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(Ok(x));
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if b - a > 0.5 * width {
            let mid = 0.5 * (a + b);
            let fm = f(mid)?;
            if fm == 0.0 {
                return Ok(Ok(mid));
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
                fb = fm;
            }
            side = 0;
        }
    }
    Ok(Ok(if fa.abs() < fb.abs() { a } else { b }))
}

/// Secant iteration on a complex analytic function, starting from `seed`
/// and `seed + step`. `f` returns the value and a normalizing scale.
pub fn refine_complex<E>(
    mut f: impl FnMut(Complex64) -> Result<(Complex64, f64), E>,
    seed: Complex64,
    step: Complex64,
    tol: f64,
) -> Result<Result<Complex64, RootError>, E> {
    let (mut z0, mut z1) = (seed, seed + step);
    let (v0, s0) = f(z0)?;
    let (v1, s1) = f(z1)?;
    let (mut f0, mut f1) = (v0, v1);
    let mut best = (v0.norm() / s0).min(v1.norm() / s1);
    if best > 1e-3 {
        return Ok(Err(RootError::NotConverged { best }));
    }
    for _ in 0..60 {
        let denom = f1 - f0;
        if denom.norm() == 0.0 {
            break;
        }
        let z2 = z1 - f1 * (z1 - z0) / denom;
        let (v2, s2) = f(z2)?;
        let r = v2.norm() / s2;
        best = best.min(r);
        z0 = z1;
        f0 = f1;
        z1 = z2;
        f1 = v2;
        if r <= tol || (z1 - z0).norm() <= 4.0 * f64::EPSILON * z1.norm().max(1.0) {
            return Ok(if r <= tol.max(1e-3) { Ok(z1) } else { Err(RootError::NotConverged { best }) });
        }
    }
    Ok(Err(RootError::NotConverged { best }))
}

#[cfg(test)]
mod tests {
    use super::*;

    type Never = std::convert::Infallible;

    #[test]
    fn square_root_of_two() {
        let r = find_root_1d::<Never>(|x| Ok(x * x - 2.0), 1.0, 2.0, 1e-14).unwrap().unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-10);
    }

    #[test]
    fn missing_bracket() {
        let r = find_root_1d::<Never>(|x| Ok(x * x + 1.0), -1.0, 2.0, 1e-12).unwrap();
        assert!(matches!(r, Err(RootError::NoBracket { .. })));
    }

    #[test]
    fn steep_function() {
        let r = find_root_1d::<Never>(|x| Ok((x - 0.3).powi(3) * 1e6 + (x - 0.3)), -5.0, 7.0, 1e-15).unwrap().unwrap();
        assert!((r - 0.3).abs() < 1e-12);
    }

    #[test]
    fn complex_secant() {
        let f = |z: Complex64| Ok::<_, Never>((z * z + 4.0, 1.0 + z.norm_sqr()));
        let z = refine_complex(f, Complex64::new(0.0, 1.9995), Complex64::new(1e-4, 0.0), 1e-14).unwrap().unwrap();
        assert!((z - Complex64::new(0.0, 2.0)).norm() < 1e-12);
        let far = refine_complex(f, Complex64::new(5.0, 5.0), Complex64::new(1e-3, 0.0), 1e-14).unwrap();
        assert!(far.is_err());
    }

    #[test]
    fn sign_change_scan() {
        let grid: Vec<f64> = (0..=20).map(|i| 0.25 + i as f64 * 0.5).collect();
        let vals: Vec<f64> = grid.iter().map(|x| (x * 1.0f64).sin()).collect();
        let br = sign_changes(&grid, &vals);
        assert_eq!(br.len(), 3);
        assert!(br[0].0 < std::f64::consts::PI && br[0].1 > std::f64::consts::PI);
    }
}

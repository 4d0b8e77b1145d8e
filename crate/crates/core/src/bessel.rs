//! Modified Bessel functions `I_k` of complex argument from the ascending
//! series, and zeros of `J_k` by bracketing and bisection.

use num_complex::Complex64;
use thiserror::Error;

/// Largest `|x|` accepted by the ascending series.
pub const SERIES_LIMIT: f64 = 50.0;

/// Largest zero location searched by [`bessel_j_zero`].
pub const ZERO_SEARCH_LIMIT: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BesselError {
    #[error("argument magnitude {0} exceeds the supported range")]
    RangeExceeded(f64),
    #[error("zero index must be at least 1")]
    InvalidIndex,
}

/// `I_k(x) = Σ_m (x/2)^{k+2m} / (m! (k+m)!)`.
pub fn bessel_i(k: u64, x: Complex64) -> Result<Complex64, BesselError> {
    if !(x.norm() <= SERIES_LIMIT) {
        return Err(BesselError::RangeExceeded(x.norm()));
    }
    let half = x * 0.5;
    let mut term = Complex64::new(1.0, 0.0);
    for j in 1..=k {
        term *= half / j as f64;
    }
    let q = half * half;
    let mut sum = term;
    let mut m = 0u64;
    loop {
        m += 1;
        term *= q / (m as f64 * (k + m) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() && m as f64 > half.norm() {
            break;
        }
        if term.norm() == 0.0 {
            break;
        }
    }
    Ok(sum)
}

/// `I_0(x), I_1(x), …` up to the first index whose magnitude drops below
/// `rel` times the largest one. By symmetry `I_{−k} = I_k`.
pub fn generating_coefficients(x: Complex64, rel: f64) -> Result<Vec<Complex64>, BesselError> {
    let mut out = Vec::new();
    let mut peak = 0.0f64;
    for k in 0u64.. {
        let v = bessel_i(k, x)?;
        peak = peak.max(v.norm());
        out.push(v);
        if k as f64 > x.norm() && v.norm() <= rel * peak {
            break;
        }
    }
    Ok(out)
}

/// Bessel function of the first kind `J_k(x)` for real `x ≥ 0`.
///
/// Uses the ascending series for small arguments and Miller's backward
/// recurrence normalized by `J_0 + 2 Σ J_{2m} = 1` otherwise.
pub fn bessel_j(k: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if x < 0.0 {
        let v = bessel_j(k, -x);
        return if k % 2 == 1 { -v } else { v };
    }
    if x <= 8.0 {
        let half = x / 2.0;
        let mut term = 1.0;
        for j in 1..=k {
            term *= half / j as f64;
        }
        let q = -half * half;
        let mut sum = term;
        for m in 1..200u32 {
            term *= q / (m as f64 * (k + m) as f64);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        return sum;
    }
    let start = (((k as f64).max(x) + 30.0 + 4.0 * x.sqrt()) as u32) | 1;
    let start = start + 1;
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for m in (1..=start).rev() {
        let prev = 2.0 * m as f64 / x * cur - next;
        next = cur;
        cur = prev;
        let index = m - 1;
        if index == k {
            wanted = cur;
        }
        if index > 0 && index % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    norm += cur;
    wanted / norm
}

/// The `j`-th positive zero of `J_k`, bracketed on a grid of spacing `step`
/// and refined by bisection.
pub fn bessel_j_zero_with_step(k: u32, j: u32, step: f64) -> Result<f64, BesselError> {
    if j == 0 {
        return Err(BesselError::InvalidIndex);
    }
    let mut count = 0;
    let mut lo = step;
    let mut f_lo = bessel_j(k, lo);
    while lo < ZERO_SEARCH_LIMIT {
        let hi = lo + step;
        let f_hi = bessel_j(k, hi);
        if f_lo == 0.0 || f_lo.signum() != f_hi.signum() {
            count += 1;
            if count == j {
                return Ok(bisect(|x| bessel_j(k, x), lo, hi));
            }
        }
        lo = hi;
        f_lo = f_hi;
    }
    Err(BesselError::RangeExceeded(ZERO_SEARCH_LIMIT))
}

/// The `j`-th positive zero of `J_k`.
pub fn bessel_j_zero(k: u32, j: u32) -> Result<f64, BesselError> {
    bessel_j_zero_with_step(k, j, 0.05)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i1_vanishes_at_zero() {
        assert_eq!(bessel_i(1, Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(bessel_i(0, Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn generating_function_identity() {
        let x = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.5, 0.2);
        let mut sum = bessel_i(0, x).unwrap();
        for k in 1..=30u64 {
            let ik = bessel_i(k, x).unwrap();
            sum += ik * (z.powi(k as i32) + z.powi(-(k as i32)));
        }
        let want = (x * 0.5 * (z + 1.0 / z)).exp();
        assert!((sum - want).norm() < 1e-10);
    }

    #[test]
    fn range_is_enforced() {
        assert!(bessel_i(0, Complex64::new(60.0, 0.0)).is_err());
        assert!(bessel_j_zero(1, 0).is_err());
    }

    #[test]
    fn j_and_i_are_related() {
        // I_k(i y) = i^k J_k(y).
        for k in 0..4u32 {
            for y in [0.3, 2.0, 5.5, 7.9] {
                let i_val = bessel_i(k as u64, Complex64::new(0.0, y)).unwrap();
                let want = Complex64::i().powi(k as i32) * bessel_j(k, y);
                assert!((i_val - want).norm() < 1e-13, "k = {k}, y = {y}");
            }
        }
    }

    #[test]
    fn series_and_recurrence_agree() {
        // 8.0 uses the series, a hair above uses the backward recurrence.
        for k in 0..5u32 {
            let series = bessel_j(k, 8.0);
            let miller = bessel_j(k, 8.0 + 1e-12);
            assert!((series - miller).abs() < 1e-11, "k = {k}");
        }
    }

    #[test]
    fn j_zero_is_resolution_independent() {
        let a = bessel_j_zero_with_step(1, 1, 0.1).unwrap();
        let b = bessel_j_zero_with_step(1, 1, 0.05).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!(bessel_j(1, a).abs() < 1e-14);
        // Later zeros stay ordered and genuine.
        let mut prev = a;
        for j in 2..=8 {
            let z = bessel_j_zero(1, j).unwrap();
            assert!(z > prev + 2.0);
            assert!(bessel_j(1, z).abs() < 1e-12);
            prev = z;
        }
    }
}

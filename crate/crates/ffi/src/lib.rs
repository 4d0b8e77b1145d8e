//! C ABI over `hplk-core`.
//!
//! Every function returns an [`HplkStatus`]; on failure the message is kept
//! per thread and read with [`hplk_last_error`]. Handles are opaque and
//! owned by the caller until passed to the matching `_free` function.
//! Panics never cross the boundary.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting comparisons are deliberate.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;

use hplk_core::heun::{entire_solution, forward_solution, HeunError, HeunParams, SeriesSolution};
use hplk_core::io::{self, FormatError};
use hplk_core::spectral::{self, SpectralError};
use hplk_core::torus::{monodromy_numeric, phase_lock_scan, rotation_estimate, Axis, GridSpec, PhysParams, Portrait, RotationOptions, TorusError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HplkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotConverged = 3,
    NumericalFailure = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HplkComplex {
    pub re: f64,
    pub im: f64,
}

impl From<HplkComplex> for Complex64 {
    fn from(z: HplkComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

impl From<Complex64> for HplkComplex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HplkRotation {
    pub rho: f64,
    pub uncertainty: f64,
    pub locked: bool,
    pub converged: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HplkCell {
    pub b: f64,
    pub a: f64,
    pub rho: f64,
    pub uncertainty: f64,
    pub locked: bool,
    pub converged: bool,
    pub boundary: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HplkFormat {
    Csv = 0,
    Json = 1,
    Binary = 2,
}

/// Truncated series solution.
pub struct HplkSeries(SeriesSolution);

/// Rotation-number grid.
pub struct HplkPortrait(Portrait);

struct Failure(HplkStatus, String);

impl From<TorusError> for Failure {
    fn from(e: TorusError) -> Self {
        let status = match e {
            TorusError::InvalidOmega | TorusError::InvalidTolerance(_) | TorusError::InvalidGrid(_) => HplkStatus::InvalidArgument,
            TorusError::NotConverged { .. } | TorusError::NoBracket { .. } => HplkStatus::NotConverged,
            TorusError::Heun(ref h) => heun_status(h),
            _ => HplkStatus::NumericalFailure,
        };
        Failure(status, e.to_string())
    }
}

fn heun_status(e: &HeunError) -> HplkStatus {
    match e {
        HeunError::Product(_) | HeunError::Bessel(_) => HplkStatus::NumericalFailure,
        _ => HplkStatus::InvalidArgument,
    }
}

impl From<HeunError> for Failure {
    fn from(e: HeunError) -> Self {
        Failure(heun_status(&e), e.to_string())
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        let status = match e {
            SpectralError::LostTrack { .. } => HplkStatus::NotConverged,
            SpectralError::Root(_) | SpectralError::Product(_) => HplkStatus::NumericalFailure,
            SpectralError::Heun(ref h) => heun_status(h),
            _ => HplkStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure(HplkStatus::Io, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(HplkStatus::Io, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> HplkStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            HplkStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            HplkStatus::Panic
        }
    }
}

fn null() -> Failure {
    Failure(HplkStatus::NullPointer, "null pointer argument".into())
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(HplkStatus::InvalidArgument, msg.into())
}

/// Writes `value` through `out` when it is non-null.
///
/// # Safety
/// `out` must be null or valid for a write of `T`.
unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    unsafe { out.write(value) };
    Ok(())
}

/// # Safety
/// `p` must be null or point to a live value of `T`.
unsafe fn get<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(null)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hplk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated,
/// always NUL-terminated when `len > 0`) and returns its full length in
/// bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hplk_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Entire solution `E = Σ_{k≥0} a_k z^k` and its constant `ξ`.
///
/// # Safety
/// `out` and `xi_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hplk_series_entire(
    n: HplkComplex,
    lambda: HplkComplex,
    mu: HplkComplex,
    tol: f64,
    length: usize,
    out: *mut *mut HplkSeries,
    xi_out: *mut HplkComplex,
) -> HplkStatus {
    guard(|| {
        if out.is_null() || xi_out.is_null() {
            return Err(null());
        }
        if !(tol > 0.0) || length == 0 {
            return Err(invalid("tol must be positive and length non-zero"));
        }
        let (s, xi) = entire_solution(n.into(), lambda.into(), mu.into(), tol, length)?;
        unsafe {
            put(xi_out, xi.into())?;
            put(out, Box::into_raw(Box::new(HplkSeries(s))))
        }
    })
}

/// Forward series `z^b Σ_{k≥0} a_k z^k` of the Heun recurrence.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hplk_series_forward(
    n: HplkComplex,
    lambda: HplkComplex,
    mu: HplkComplex,
    b: HplkComplex,
    tol: f64,
    length: usize,
    out: *mut *mut HplkSeries,
) -> HplkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        if !(tol > 0.0) || length == 0 {
            return Err(invalid("tol must be positive and length non-zero"));
        }
        let p = HeunParams::new(n.into(), lambda.into(), mu.into(), b.into())?;
        let s = forward_solution(&p, tol, length)?;
        unsafe { put(out, Box::into_raw(Box::new(HplkSeries(s)))) }
    })
}

/// Value and derivative of the series at `z`.
///
/// # Safety
/// `s` must be a live handle; `value` and `derivative` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hplk_series_eval(s: *const HplkSeries, z: HplkComplex, value: *mut HplkComplex, derivative: *mut HplkComplex) -> HplkStatus {
    guard(|| {
        let s = unsafe { get(s)? };
        let z: Complex64 = z.into();
        if z == Complex64::new(0.0, 0.0) && s.0.first_index < 0 {
            return Err(invalid("series has negative powers at z = 0"));
        }
        unsafe {
            put(value, s.0.eval(z).into())?;
            put(derivative, s.0.eval_derivative(z).into())
        }
    })
}

/// Index range `[first, last]` of the stored coefficients.
///
/// # Safety
/// `s` must be a live handle; `first` and `last` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hplk_series_range(s: *const HplkSeries, first: *mut i64, last: *mut i64) -> HplkStatus {
    guard(|| {
        let s = unsafe { get(s)? };
        unsafe {
            put(first, s.0.first_index)?;
            put(last, s.0.last_index())
        }
    })
}

/// Coefficient `a_k`; zero outside the stored range.
///
/// # Safety
/// `s` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hplk_series_coeff(s: *const HplkSeries, k: i64, out: *mut HplkComplex) -> HplkStatus {
    guard(|| {
        let s = unsafe { get(s)? };
        unsafe { put(out, s.0.coeff(k).into()) }
    })
}

/// Releases a series handle; null is ignored.
///
/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hplk_series_free(s: *mut HplkSeries) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Value of the entire-solution equation and its normalizing scale.
///
/// # Safety
/// `value` and `scale` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hplk_xi(l: HplkComplex, lambda: HplkComplex, mu: HplkComplex, tol: f64, value: *mut HplkComplex, scale: *mut f64) -> HplkStatus {
    guard(|| {
        if !(tol > 0.0) {
            return Err(invalid("tol must be positive"));
        }
        let v = spectral::xi(l.into(), lambda.into(), mu.into(), tol)?;
        unsafe {
            put(value, v.value.into())?;
            put(scale, v.scale)
        }
    })
}

/// Rotation number of the phase equation at `(ω, B, A)`. Returns
/// `NotConverged` with `out` filled when the estimate misses `tol`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hplk_rotation_number(omega: f64, b: f64, a: f64, tol: f64, out: *mut HplkRotation) -> HplkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        if !(tol > 0.0 && tol < 1.0) {
            return Err(invalid("tol must lie in (0, 1)"));
        }
        let p = PhysParams::new(omega, b, a)?;
        let e = rotation_estimate(&p, &RotationOptions::new(tol))?;
        unsafe { put(out, HplkRotation { rho: e.rho, uncertainty: e.uncertainty, locked: e.locked, converged: e.converged })? };
        if e.converged {
            Ok(())
        } else {
            Err(Failure(HplkStatus::NotConverged, format!("rotation number {} ± {:e}", e.rho, e.uncertainty)))
        }
    })
}

/// Monodromy matrix of the linear system, row-major into `out[4]`.
///
/// # Safety
/// `out` must be valid for four writes.
#[no_mangle]
pub unsafe extern "C" fn hplk_monodromy(omega: f64, b: f64, a: f64, tol: f64, out: *mut HplkComplex) -> HplkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let p = PhysParams::new(omega, b, a)?;
        let m = monodromy_numeric(&p, tol)?;
        for (i, z) in m.m.entries().into_iter().enumerate() {
            unsafe { out.add(i).write(z.into()) };
        }
        Ok(())
    })
}

/// Scans `nb × na` grid points in parallel.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hplk_portrait_scan(
    omega: f64,
    b_lo: f64,
    b_hi: f64,
    nb: usize,
    a_lo: f64,
    a_hi: f64,
    na: usize,
    tol: f64,
    out: *mut *mut HplkPortrait,
) -> HplkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        if !(tol > 0.0 && tol < 1.0) {
            return Err(invalid("tol must lie in (0, 1)"));
        }
        let grid = GridSpec { omega, b: Axis::new(b_lo, b_hi, nb)?, a: Axis::new(a_lo, a_hi, na)? };
        let p = phase_lock_scan(&grid, tol, None)?;
        unsafe { put(out, Box::into_raw(Box::new(HplkPortrait(p)))) }
    })
}

/// Grid dimensions.
///
/// # Safety
/// `p` must be a live handle; `nb` and `na` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hplk_portrait_dims(p: *const HplkPortrait, nb: *mut usize, na: *mut usize) -> HplkStatus {
    guard(|| {
        let p = unsafe { get(p)? };
        unsafe {
            put(nb, p.0.grid.b.n)?;
            put(na, p.0.grid.a.n)
        }
    })
}

/// One grid cell.
///
/// # Safety
/// `p` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hplk_portrait_cell(p: *const HplkPortrait, ib: usize, ia: usize, out: *mut HplkCell) -> HplkStatus {
    guard(|| {
        let p = &unsafe { get(p)? }.0;
        if ib >= p.grid.b.n || ia >= p.grid.a.n {
            return Err(invalid(format!("cell ({ib}, {ia}) outside {}x{}", p.grid.b.n, p.grid.a.n)));
        }
        let i = p.index(ib, ia);
        let cell = HplkCell {
            b: p.grid.b.value(ib),
            a: p.grid.a.value(ia),
            rho: p.rho[i],
            uncertainty: p.uncertainty[i],
            locked: p.locked[i],
            converged: p.converged[i],
            boundary: p.boundary[i],
        };
        unsafe { put(out, cell) }
    })
}

/// Writes the portrait to `path`.
///
/// # Safety
/// `p` must be a live handle and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn hplk_portrait_write(p: *const HplkPortrait, path: *const c_char, format: HplkFormat) -> HplkStatus {
    guard(|| {
        let p = &unsafe { get(p)? }.0;
        if path.is_null() {
            return Err(null());
        }
        let path = unsafe { CStr::from_ptr(path) }.to_str().map_err(|_| invalid("path is not UTF-8"))?;
        let mut w = BufWriter::new(File::create(path)?);
        match format {
            HplkFormat::Csv => io::write_portrait_csv(p, &mut w)?,
            HplkFormat::Json => io::write_json(p, &mut w)?,
            HplkFormat::Binary => io::write_portrait_binary(p, &mut w)?,
        }
        w.flush()?;
        Ok(())
    })
}

/// Releases a portrait handle; null is ignored.
///
/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hplk_portrait_free(p: *mut HplkPortrait) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> HplkComplex {
        HplkComplex { re, im: 0.0 }
    }

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { hplk_last_error(buf.as_mut_ptr(), buf.len()) };
        let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
        assert_eq!(s.len(), n.min(255));
        s
    }

    #[test]
    fn null_pointers_are_reported() {
        let st = unsafe { hplk_rotation_number(1.0, 0.5, 0.5, 1e-6, std::ptr::null_mut()) };
        assert_eq!(st, HplkStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(unsafe { hplk_series_coeff(std::ptr::null(), 0, &mut HplkComplex::default()) }, HplkStatus::NullPointer);
    }

    #[test]
    fn invalid_arguments_set_the_message() {
        let mut r = HplkRotation::default();
        assert_eq!(unsafe { hplk_rotation_number(-1.0, 0.5, 0.5, 1e-6, &mut r) }, HplkStatus::InvalidArgument);
        assert!(last_error().contains('ω'));
        let mut v = HplkComplex::default();
        let mut s = 0.0;
        assert_eq!(unsafe { hplk_xi(c(0.5), c(1.0), c(0.0), 1e-12, &mut v, &mut s) }, HplkStatus::InvalidArgument);
    }

    #[test]
    fn success_clears_the_message() {
        let mut r = HplkRotation::default();
        unsafe { hplk_rotation_number(-1.0, 0.5, 0.5, 1e-6, &mut r) };
        assert_eq!(unsafe { hplk_rotation_number(1.0, 0.0, 0.5, 1e-6, &mut r) }, HplkStatus::Ok);
        assert_eq!(unsafe { hplk_last_error(std::ptr::null_mut(), 0) }, 0);
        assert!(r.locked && r.rho == 0.0);
    }

    #[test]
    fn short_buffer_truncates() {
        let mut r = HplkRotation::default();
        unsafe { hplk_rotation_number(-1.0, 0.5, 0.5, 1e-6, &mut r) };
        let mut buf = [1 as c_char; 4];
        let n = unsafe { hplk_last_error(buf.as_mut_ptr(), buf.len()) };
        assert!(n > 3);
        assert_eq!(buf[3], 0);
    }

    #[test]
    fn panics_become_status() {
        let st = guard(|| panic!("boom"));
        assert_eq!(st, HplkStatus::Panic);
        assert!(last_error().contains("boom"));
    }
}

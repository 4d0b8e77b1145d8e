//! Exercises the C ABI from Rust.

use hplk_ffi::*;

fn c(re: f64) -> HplkComplex {
    HplkComplex { re, im: 0.0 }
}

#[test]
fn entire_series_matches_xi() {
    let (n, lambda, mu) = (c(1.5), c(0.3), c(0.8));
    let mut s: *mut HplkSeries = std::ptr::null_mut();
    let mut xi = HplkComplex::default();
    assert_eq!(unsafe { hplk_series_entire(n, lambda, mu, 1e-12, 60, &mut s, &mut xi) }, HplkStatus::Ok);
    let mut value = HplkComplex::default();
    let mut scale = 0.0;
    assert_eq!(unsafe { hplk_xi(c(0.5), lambda, mu, 1e-12, &mut value, &mut scale) }, HplkStatus::Ok);
    let (a, b) = (num_complex::Complex64::from(xi), num_complex::Complex64::from(value));
    assert!((a - b).norm() <= 1e-10 * scale.max(1.0), "{a} vs {b}");
    unsafe { hplk_series_free(s) };
}

#[test]
fn forward_series_range_and_tail() {
    let mut s: *mut HplkSeries = std::ptr::null_mut();
    assert_eq!(unsafe { hplk_series_forward(c(1.3), c(0.2), c(0.7), c(0.25), 1e-12, 40, &mut s) }, HplkStatus::Ok);
    let (mut first, mut last) = (0i64, 0i64);
    assert_eq!(unsafe { hplk_series_range(s, &mut first, &mut last) }, HplkStatus::Ok);
    assert!(first <= 0 && last >= 40);
    let mut a = HplkComplex::default();
    assert_eq!(unsafe { hplk_series_coeff(s, last + 5, &mut a) }, HplkStatus::Ok);
    assert_eq!(a, HplkComplex::default());
    unsafe { hplk_series_free(s) };
    unsafe { hplk_series_free(std::ptr::null_mut()) };
}

#[test]
fn monodromy_determinant() {
    let mut m = [HplkComplex::default(); 4];
    let (omega, b, a) = (2.0, 1.1, 1.0);
    assert_eq!(unsafe { hplk_monodromy(omega, b, a, 1e-12, m.as_mut_ptr()) }, HplkStatus::Ok);
    let z: Vec<num_complex::Complex64> = m.iter().map(|&x| x.into()).collect();
    let det = z[0] * z[3] - z[1] * z[2];
    let want = num_complex::Complex64::from_polar(1.0, -std::f64::consts::TAU * (b / omega + 1.0));
    assert!((det - want).norm() < 1e-8);
}

#[test]
fn portrait_write_formats() {
    let mut p: *mut HplkPortrait = std::ptr::null_mut();
    assert_eq!(unsafe { hplk_portrait_scan(2.0, -1.0, 1.0, 3, 0.5, 1.0, 2, 1e-6, &mut p) }, HplkStatus::Ok);
    let dir = tempfile::tempdir().unwrap();
    for (fmt, name) in [(HplkFormat::Csv, "p.csv"), (HplkFormat::Json, "p.json"), (HplkFormat::Binary, "p.bin")] {
        let path = std::ffi::CString::new(dir.path().join(name).to_str().unwrap()).unwrap();
        assert_eq!(unsafe { hplk_portrait_write(p, path.as_ptr(), fmt) }, HplkStatus::Ok);
    }
    let csv = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(csv.starts_with(hplk_core::io::CSV_HEADER));
    let bad = std::ffi::CString::new("/nonexistent/dir/p.csv").unwrap();
    assert_eq!(unsafe { hplk_portrait_write(p, bad.as_ptr(), HplkFormat::Csv) }, HplkStatus::Io);
    unsafe { hplk_portrait_free(p) };
}

#[test]
fn bad_grid_is_invalid() {
    let mut p: *mut HplkPortrait = std::ptr::null_mut();
    assert_eq!(unsafe { hplk_portrait_scan(2.0, 1.0, -1.0, 3, 0.5, 1.0, 2, 1e-6, &mut p) }, HplkStatus::InvalidArgument);
    assert!(p.is_null());
}

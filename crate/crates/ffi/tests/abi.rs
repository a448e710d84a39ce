use std::ffi::CStr;
use std::ptr;

use greenpot_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    let n = unsafe { gp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn matrix(rows: usize, cols: usize, data: &[f64]) -> *mut GpMatrix {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { gp_matrix_new(rows, cols, data.as_ptr(), &mut m) }, GpStatus::Ok);
    m
}

#[test]
fn kernels() {
    let mut v = 0.0;
    let x = [1.0, 0.0, 0.0];
    let o = [0.0; 3];
    assert_eq!(unsafe { gp_free_green(3, x.as_ptr(), o.as_ptr(), &mut v) }, GpStatus::Ok);
    assert!((v - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-14);

    assert_eq!(unsafe { gp_disk_green(1.0, [0.5, 0.0].as_ptr(), [0.5, 0.0].as_ptr(), &mut v) }, GpStatus::Ok);
    assert_eq!(v, f64::INFINITY);
    assert_eq!(unsafe { gp_disk_green(1.0, [1.5, 0.0].as_ptr(), [0.5, 0.0].as_ptr(), &mut v) }, GpStatus::OutsideDomain);
    assert_eq!(unsafe { gp_disk_green(1.0, [0.0, 0.0].as_ptr(), [0.5, 0.0].as_ptr(), &mut v) }, GpStatus::Ok);
    assert!((v - 2f64.ln() / std::f64::consts::PI).abs() < 1e-12);

    let (mut a, mut d) = (0.0, 0.0);
    assert_eq!(unsafe { gp_riesz_params(3, 2.0, &mut a, &mut d) }, GpStatus::Ok);
    assert!((a - 1.0).abs() < 1e-12 && (d - 2f64.sqrt() / 4.0).abs() < 1e-12);
    assert_eq!(unsafe { gp_riesz_params(3, 3.0, &mut a, &mut d) }, GpStatus::OutOfRange);
    assert!(last_error().contains("beta"));
}

#[test]
fn null_pointers_are_reported() {
    let mut v = 0.0;
    assert_eq!(unsafe { gp_free_green(3, ptr::null(), ptr::null(), &mut v) }, GpStatus::NullPointer);
    assert!(last_error().contains("x"));
    assert_eq!(unsafe { gp_riesz_params(3, 2.0, ptr::null_mut(), &mut v) }, GpStatus::NullPointer);
    let mut verdict = GpVerdict::Potential;
    assert_eq!(unsafe { gp_is_inverse_m_matrix(ptr::null(), 1e-8, &mut verdict) }, GpStatus::NullPointer);
    unsafe {
        gp_matrix_free(ptr::null_mut());
        gp_killed_green_free(ptr::null_mut());
    }
}

#[test]
fn classification_and_hadamard() {
    let bad = matrix(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    let mut verdict = GpVerdict::Potential;
    assert_eq!(unsafe { gp_is_inverse_m_matrix(bad, 1e-8, &mut verdict) }, GpStatus::Ok);
    assert_eq!(verdict, GpVerdict::NotPotential);

    let rect = matrix(2, 3, &[1.0; 6]);
    assert_eq!(unsafe { gp_is_inverse_m_matrix(rect, 1e-8, &mut verdict) }, GpStatus::DimensionMismatch);

    // killed Green matrix of two neighbouring points in the plane
    let mut g = ptr::null_mut();
    let pts = [0i64, 0, 1, 0];
    assert_eq!(unsafe { gp_killed_green_new(2, pts.as_ptr(), 2, &mut g) }, GpStatus::Ok);
    let mut n = 0;
    assert_eq!(unsafe { gp_killed_green_len(g, &mut n) }, GpStatus::Ok);
    assert_eq!(n, 2);
    let mut v = 0.0;
    assert_eq!(unsafe { gp_killed_green_get(g, pts.as_ptr(), pts.as_ptr(), &mut v) }, GpStatus::Ok);
    assert!((v - 16.0 / 15.0).abs() < 1e-12);
    assert_eq!(unsafe { gp_killed_green_get(g, pts.as_ptr(), [5i64, 5].as_ptr(), &mut v) }, GpStatus::Ok);
    assert_eq!(v, 0.0);
    let mut p = [0i64; 2];
    assert_eq!(unsafe { gp_killed_green_point(g, 1, p.as_mut_ptr()) }, GpStatus::Ok);
    assert_eq!(p, [1, 0]);
    assert_eq!(unsafe { gp_killed_green_point(g, 2, p.as_mut_ptr()) }, GpStatus::OutOfRange);

    let mut m = ptr::null_mut();
    assert_eq!(unsafe { gp_killed_green_matrix(g, &mut m) }, GpStatus::Ok);
    let (mut r, mut c) = (0, 0);
    assert_eq!(unsafe { gp_matrix_shape(m, &mut r, &mut c) }, GpStatus::Ok);
    assert_eq!((r, c), (2, 2));
    assert_eq!(unsafe { gp_matrix_get(m, 0, 1, &mut v) }, GpStatus::Ok);
    assert!((v - 4.0 / 15.0).abs() < 1e-12);
    assert_eq!(unsafe { gp_matrix_get(m, 2, 0, &mut v) }, GpStatus::OutOfRange);

    let (mut pw, mut ex) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(unsafe { gp_hadamard_power(m, 3.0, &mut pw) }, GpStatus::Ok);
    assert_eq!(unsafe { gp_hadamard_exp(m, 0.5, &mut ex) }, GpStatus::Ok);
    for h in [pw, ex] {
        assert_eq!(unsafe { gp_is_inverse_m_matrix(h, 1e-8, &mut verdict) }, GpStatus::Ok);
        assert_eq!(verdict, GpVerdict::Potential);
    }
    assert_eq!(unsafe { gp_hadamard_power(m, 0.5, &mut pw) }, GpStatus::OutOfRange);

    let dup = [0i64, 0, 0, 0];
    let mut g2 = ptr::null_mut();
    assert_eq!(unsafe { gp_killed_green_new(2, dup.as_ptr(), 2, &mut g2) }, GpStatus::InvalidInput);
    assert!(g2.is_null());

    unsafe {
        for h in [bad, rect, m, pw, ex] {
            gp_matrix_free(h);
        }
        gp_killed_green_free(g);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(gp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

//! C ABI over the greenpot core.
//!
//! Every function returns a [`GpStatus`]; results go through out-pointers.
//! Matrices and killed Green matrices are opaque handles that must be
//! released with their `_free` function. On failure,
//! [`gp_last_error_message`] describes the most recent error on the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use greenpot::continuum::{disk_green_2d, free_green, riesz_params};
use greenpot::lattice::{killed_green_matrix, KilledGreenMatrix, LatticeSet};
use nalgebra::DMatrix;
use greenpot::potential::{hadamard_exp, hadamard_power, is_inverse_m_matrix, Verdict};
use greenpot::GreenError;

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpStatus {
    Ok = 0,
    NullPointer = 1,
    DimensionMismatch = 2,
    OutOfRange = 3,
    OutsideDomain = 4,
    Singular = 5,
    InvalidInput = 6,
    Unsupported = 7,
    ResourceLimit = 8,
    /// Numerical failure (quadrature, step budget) or a caught panic.
    Internal = 9,
}

/// Outcome of the inverse M-matrix test.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpVerdict {
    Potential = 0,
    NotPotential = 1,
    Singular = 2,
    Unreliable = 3,
}

/// Dense real matrix.
pub struct GpMatrix(DMatrix<f64>);

/// Killed Green matrix of a finite lattice set.
pub struct GpKilledGreen(KilledGreenMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &GreenError) -> GpStatus {
    match e {
        GreenError::DimensionMismatch { .. } => GpStatus::DimensionMismatch,
        GreenError::OutOfRange(_) => GpStatus::OutOfRange,
        GreenError::OutsideDomain(_) => GpStatus::OutsideDomain,
        GreenError::Singular(_) => GpStatus::Singular,
        GreenError::Invalid(_) | GreenError::EmptySet(_) | GreenError::Json(_) | GreenError::Csv(_) => {
            GpStatus::InvalidInput
        }
        GreenError::Unsupported(_) => GpStatus::Unsupported,
        GreenError::Resource(_) => GpStatus::ResourceLimit,
        _ => GpStatus::Internal,
    }
}

enum Fail {
    Null(&'static str),
    Core(GreenError),
}

impl From<GreenError> for Fail {
    fn from(e: GreenError) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GpStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GpStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            GpStatus::Internal
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

/// Copies the last error message on this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, or 0 if none.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn gp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Whole-space Newtonian Green function `C(d) |x-y|^(2-d)`, `d >= 3`.
///
/// # Safety
/// `x` and `y` must point to `d` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_free_green(d: usize, x: *const f64, y: *const f64, out: *mut f64) -> GpStatus {
    guard(|| {
        let v = free_green(d, slice(x, d, "x")?, slice(y, d, "y")?)?;
        write(out, v, "out")
    })
}

/// Green function of the disk of the given radius centred at the origin.
///
/// # Safety
/// `x` and `y` must point to 2 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_disk_green(radius: f64, x: *const f64, y: *const f64, out: *mut f64) -> GpStatus {
    guard(|| {
        let v = disk_green_2d(radius, slice(x, 2, "x")?, slice(y, 2, "y")?)?;
        write(out, v, "out")
    })
}

/// Stability index `alpha` and constant `D` of the Riesz kernel matching the
/// Hadamard power `beta` in dimension `d`.
///
/// # Safety
/// Both out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_riesz_params(d: usize, beta: f64, alpha: *mut f64, d_const: *mut f64) -> GpStatus {
    guard(|| {
        let p = riesz_params(d, beta)?;
        write(alpha, p.alpha, "alpha")?;
        write(d_const, p.d_const, "d_const")
    })
}

/// Builds a matrix from `rows * cols` row-major doubles.
///
/// # Safety
/// `data` must point to `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_matrix_new(rows: usize, cols: usize, data: *const f64, out: *mut *mut GpMatrix) -> GpStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| GreenError::Invalid("matrix size overflows".into()))?;
        let m = DMatrix::from_row_slice(rows, cols, slice(data, len, "data")?);
        write(out, Box::into_raw(Box::new(GpMatrix(m))), "out")
    })
}

/// Releases a matrix. Null is ignored.
///
/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_matrix_free(m: *mut GpMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_matrix_shape(m: *const GpMatrix, rows: *mut usize, cols: *mut usize) -> GpStatus {
    guard(|| {
        let m = deref(m, "m")?;
        write(rows, m.0.nrows(), "rows")?;
        write(cols, m.0.ncols(), "cols")
    })
}

/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_matrix_get(m: *const GpMatrix, i: usize, j: usize, out: *mut f64) -> GpStatus {
    guard(|| {
        let m = deref(m, "m")?;
        let v = m
            .0
            .get((i, j))
            .ok_or_else(|| GreenError::OutOfRange(format!("entry ({i}, {j}) of a {}x{} matrix", m.0.nrows(), m.0.ncols())))?;
        write(out, *v, "out")
    })
}

/// Inverse M-matrix test with relative tolerance `tol`.
///
/// # Safety
/// `m` must be a live handle; `verdict` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_is_inverse_m_matrix(m: *const GpMatrix, tol: f64, verdict: *mut GpVerdict) -> GpStatus {
    guard(|| {
        let m = deref(m, "m")?;
        if m.0.nrows() != m.0.ncols() {
            return Err(GreenError::DimensionMismatch { expected: m.0.nrows(), got: m.0.ncols() }.into());
        }
        let v = match is_inverse_m_matrix(&m.0, tol).verdict {
            Verdict::Potential => GpVerdict::Potential,
            Verdict::NotPotential => GpVerdict::NotPotential,
            Verdict::Singular => GpVerdict::Singular,
            Verdict::Unreliable => GpVerdict::Unreliable,
        };
        write(verdict, v, "verdict")
    })
}

/// Entrywise power `u_ij^beta` as a new matrix.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_hadamard_power(m: *const GpMatrix, beta: f64, out: *mut *mut GpMatrix) -> GpStatus {
    guard(|| {
        let r = hadamard_power(&deref(m, "m")?.0, beta)?;
        write(out, Box::into_raw(Box::new(GpMatrix(r))), "out")
    })
}

/// Entrywise exponential `exp(alpha u_ij)` as a new matrix.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_hadamard_exp(m: *const GpMatrix, alpha: f64, out: *mut *mut GpMatrix) -> GpStatus {
    guard(|| {
        let r = hadamard_exp(&deref(m, "m")?.0, alpha)?;
        write(out, Box::into_raw(Box::new(GpMatrix(r))), "out")
    })
}

/// Killed Green matrix of `count` lattice points in dimension `d`, given as
/// `count * d` row-major integer coordinates. Points are reordered
/// lexicographically; duplicates are rejected.
///
/// # Safety
/// `points` must point to `count * d` integers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_killed_green_new(
    d: usize,
    points: *const i64,
    count: usize,
    out: *mut *mut GpKilledGreen,
) -> GpStatus {
    guard(|| {
        if d == 0 {
            return Err(GreenError::Invalid("dimension must be positive".into()).into());
        }
        let len = count
            .checked_mul(d)
            .ok_or_else(|| GreenError::Invalid("point list size overflows".into()))?;
        let raw = slice(points, len, "points")?;
        let set = LatticeSet::new(d, raw.chunks(d).map(<[i64]>::to_vec).collect())?;
        let g = killed_green_matrix(&set)?;
        write(out, Box::into_raw(Box::new(GpKilledGreen(g))), "out")
    })
}

/// Releases a killed Green matrix. Null is ignored.
///
/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_killed_green_free(g: *mut GpKilledGreen) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of points in the set.
///
/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_killed_green_len(g: *const GpKilledGreen, out: *mut usize) -> GpStatus {
    guard(|| write(out, deref(g, "g")?.0.len(), "out"))
}

/// Coordinates of the `i`-th point (lexicographic order) into `coords`.
///
/// # Safety
/// `g` must be a live handle; `coords` must hold `d` integers.
#[no_mangle]
pub unsafe extern "C" fn gp_killed_green_point(g: *const GpKilledGreen, i: usize, coords: *mut i64) -> GpStatus {
    guard(|| {
        let g = deref(g, "g")?;
        if i >= g.0.len() {
            return Err(GreenError::OutOfRange(format!("point {i} of {}", g.0.len())).into());
        }
        if coords.is_null() {
            return Err(Fail::Null("coords"));
        }
        let p = g.0.set.point(i);
        ptr::copy_nonoverlapping(p.as_ptr(), coords, p.len());
        Ok(())
    })
}

/// Expected visits to `y` of the walk started at `x`; both are `d` integer
/// coordinates. Points outside the set give 0.
///
/// # Safety
/// `g` must be a live handle; `x` and `y` must hold `d` integers.
#[no_mangle]
pub unsafe extern "C" fn gp_killed_green_get(
    g: *const GpKilledGreen,
    x: *const i64,
    y: *const i64,
    out: *mut f64,
) -> GpStatus {
    guard(|| {
        let g = deref(g, "g")?;
        let d = g.0.dim();
        write(out, g.0.get(slice(x, d, "x")?, slice(y, d, "y")?), "out")
    })
}

/// Copies the entries into a new matrix handle.
///
/// # Safety
/// `g` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_killed_green_matrix(g: *const GpKilledGreen, out: *mut *mut GpMatrix) -> GpStatus {
    guard(|| {
        let m = deref(g, "g")?.0.entries.clone();
        write(out, Box::into_raw(Box::new(GpMatrix(m))), "out")
    })
}

//! C interface to `arnold-cert`.
//!
//! Objects cross the boundary as opaque handles created by `ac_*_new` or a
//! computing function and released with the matching `ac_*_free`. Every
//! fallible function returns an [`AcStatus`]; the message of the last error
//! on the calling thread is available from [`ac_last_error`].

use arnold_cert::certify::{analyze_mixing, extend_mixing_map, MixingCertificate};
use arnold_cert::dynamics::NoisyMapParams;
use arnold_cert::response::{rotation_at, GridPlan};
use arnold_cert::ulam::Partition;
use arnold_cert::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    NoCertificate = 3,
    Inconclusive = 4,
    Numerical = 5,
    Panic = 6,
}

/// Map parameters `(tau, eps, xi)`.
pub struct AcParams(NoisyMapParams);

/// A mixing certificate.
pub struct AcMixing(MixingCertificate);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AcStatus {
    match e {
        Error::InvalidParams(_) | Error::Tangency { .. } | Error::DimensionMismatch { .. } => AcStatus::InvalidParams,
        Error::NoCertificate { .. } | Error::IncompatibleCertificate(_) => AcStatus::NoCertificate,
        Error::Inconclusive(_) => AcStatus::Inconclusive,
        _ => AcStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> AcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AcStatus::Ok,
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            AcStatus::Panic
        }
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ac_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ac_params_new(tau: f64, eps: f64, xi: f64, out: *mut *mut AcParams) -> AcStatus {
    if out.is_null() {
        set_error("null output pointer".into());
        return AcStatus::NullPointer;
    }
    guard(|| {
        let p = NoisyMapParams::new(tau, eps, xi)?;
        // SAFETY: checked non-null above; the caller guarantees validity.
        unsafe { *out = Box::into_raw(Box::new(AcParams(p))) };
        Ok(())
    })
}

/// # Safety
/// `p` must be NULL or a handle from `ac_params_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ac_params_free(p: *mut AcParams) {
    if !p.is_null() {
        // SAFETY: the handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Certify mixing on an `n_cells` grid with at most `n_max` steps. On
/// success `*out` holds a certificate, which may still be discrete-only:
/// check `ac_mixing_is_true_operator`.
///
/// # Safety
/// `p` must be a live params handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ac_certify_mixing(
    p: *const AcParams,
    n_cells: usize,
    n_max: usize,
    out: *mut *mut AcMixing,
) -> AcStatus {
    if p.is_null() || out.is_null() {
        set_error("null pointer argument".into());
        return AcStatus::NullPointer;
    }
    // SAFETY: checked non-null; the caller guarantees a live handle.
    let params = unsafe { &(*p).0 };
    guard(|| {
        let cert = analyze_mixing(params, &Partition::new(n_cells)?, n_max)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(AcMixing(cert))) };
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a live certificate handle.
#[no_mangle]
pub unsafe extern "C" fn ac_mixing_free(c: *mut AcMixing) {
    if !c.is_null() {
        // SAFETY: the handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(c) });
    }
}

/// Number of steps `n`; 0 for a NULL handle.
///
/// # Safety
/// `c` must be NULL or a live certificate handle.
#[no_mangle]
pub unsafe extern "C" fn ac_mixing_n(c: *const AcMixing) -> usize {
    // SAFETY: caller guarantees a live handle when non-null.
    unsafe { c.as_ref() }.map_or(0, |c| c.0.n)
}

/// # Safety
/// `c` must be NULL or a live certificate handle.
#[no_mangle]
pub unsafe extern "C" fn ac_mixing_is_true_operator(c: *const AcMixing) -> bool {
    // SAFETY: caller guarantees a live handle when non-null.
    unsafe { c.as_ref() }.is_some_and(|c| c.0.is_true_operator())
}

/// Enclosure of the rate `alpha`.
///
/// # Safety
/// `c` must be a live certificate handle; `lo`, `hi` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ac_mixing_alpha(c: *const AcMixing, lo: *mut f64, hi: *mut f64) -> AcStatus {
    // SAFETY: caller guarantees validity of non-null pointers.
    let (Some(c), false, false) = (unsafe { c.as_ref() }, lo.is_null(), hi.is_null()) else {
        set_error("null pointer argument".into());
        return AcStatus::NullPointer;
    };
    unsafe {
        *lo = c.0.alpha.lo();
        *hi = c.0.alpha.hi();
    }
    AcStatus::Ok
}

/// Radius of the `tau`-ball on which the certificate persists; `lo` is the
/// certified radius.
///
/// # Safety
/// `c` must be a live certificate handle; `lo`, `hi` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ac_mixing_theta(c: *const AcMixing, lo: *mut f64, hi: *mut f64) -> AcStatus {
    // SAFETY: caller guarantees validity of non-null pointers.
    let (Some(c), false, false) = (unsafe { c.as_ref() }, lo.is_null(), hi.is_null()) else {
        set_error("null pointer argument".into());
        return AcStatus::NullPointer;
    };
    guard(|| {
        let t = extend_mixing_map(&c.0, &c.0.params.kernel())?;
        unsafe {
            *lo = t.lo();
            *hi = t.hi();
        }
        Ok(())
    })
}

/// Certified rotation number. `coarse` is the starting size of the grid
/// that bounds the resolvent, `fine` the size of the density grid.
///
/// # Safety
/// `p` must be a live params handle; `lo`, `hi` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ac_rotation_number(
    p: *const AcParams,
    coarse: usize,
    fine: usize,
    lo: *mut f64,
    hi: *mut f64,
) -> AcStatus {
    // SAFETY: caller guarantees validity of non-null pointers.
    let (Some(p), false, false) = (unsafe { p.as_ref() }, lo.is_null(), hi.is_null()) else {
        set_error("null pointer argument".into());
        return AcStatus::NullPointer;
    };
    guard(|| {
        let plan = GridPlan { coarse, fine, ..GridPlan::default() };
        let plan = GridPlan { coarse_limit: plan.coarse_limit.max(coarse), ..plan };
        let (_, _, rot) = rotation_at(&p.0, &plan)?;
        unsafe {
            *lo = rot.value.lo();
            *hi = rot.value.hi();
        }
        Ok(())
    })
}

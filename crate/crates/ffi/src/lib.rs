//! C ABI over casimir-core.
//!
//! Configurations are opaque handles created by one of the `casimir_config_*`
//! constructors and released with `casimir_config_free`. Every call returns a
//! `CasimirStatus`; on failure `casimir_last_error` gives a message that stays
//! valid until the next call on the same thread. Outputs are written only on
//! success.

use casimir_core::cli::parse_config_str;
use casimir_core::energy::relative_energy;
use casimir_core::geometry::Configuration;
use casimir_core::spectral::xi;
use casimir_core::stressforce::{force_boundary_hadamard, force_fd_vector, force_surface, BoundaryLimit, DEFAULT_N_SIGMA};
use casimir_core::CasimirError;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CasimirStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Geometry = 3,
    Numerical = 4,
    Parse = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CasimirForceRoute {
    FiniteDifference = 0,
    SurfaceIntegral = 1,
    BoundaryHadamard = 2,
}

/// Opaque configuration handle.
pub struct CasimirConfig {
    inner: Configuration,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &CasimirError) -> CasimirStatus {
    match e.root() {
        CasimirError::Geometry(_)
        | CasimirError::Overlap { .. }
        | CasimirError::DegenerateCurve { .. }
        | CasimirError::DimensionMismatch { .. }
        | CasimirError::Proximity { .. } => CasimirStatus::Geometry,
        CasimirError::InvalidParameter(_) | CasimirError::Domain { .. } => CasimirStatus::InvalidArgument,
        _ => CasimirStatus::Numerical,
    }
}

fn guard<F: FnOnce() -> Result<(), (CasimirStatus, String)>>(f: F) -> CasimirStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            CasimirStatus::Ok
        }
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            CasimirStatus::Panic
        }
    }
}

fn core_err(e: CasimirError) -> (CasimirStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (CasimirStatus, String) {
    (CasimirStatus::NullPointer, format!("{what} is null"))
}

unsafe fn config_ref<'a>(c: *const CasimirConfig) -> Result<&'a Configuration, (CasimirStatus, String)> {
    c.as_ref().map(|c| &c.inner).ok_or_else(|| null("config"))
}

unsafe fn emit_handle(out: *mut *mut CasimirConfig, c: Configuration) {
    *out = Box::into_raw(Box::new(CasimirConfig { inner: c }));
}

/// Message for the last failed call on this thread ("" after a success).
#[no_mangle]
pub extern "C" fn casimir_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn casimir_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a configuration document (TOML, or JSON when `is_json` is nonzero).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn casimir_config_parse(text: *const c_char, is_json: i32, out: *mut *mut CasimirConfig) -> CasimirStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| (CasimirStatus::Parse, format!("text is not UTF-8: {e}")))?;
        let loaded = parse_config_str(s, is_json != 0).map_err(|e| {
            let status = match e.exit_code() {
                3 => CasimirStatus::Geometry,
                _ => CasimirStatus::Parse,
            };
            (status, e.to_string())
        })?;
        emit_handle(out, loaded.config);
        Ok(())
    })
}

/// Two intervals [a1, b1] and [a2, b2] on the line, massless.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn casimir_config_two_intervals(a1: f64, b1: f64, a2: f64, b2: f64, out: *mut *mut CasimirConfig) -> CasimirStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        emit_handle(out, Configuration::two_intervals(a1, b1, a2, b2).map_err(core_err)?);
        Ok(())
    })
}

/// Discs of radii r1 at the origin and r2 at (center_distance, 0), massless.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn casimir_config_two_discs(r1: f64, r2: f64, center_distance: f64, out: *mut *mut CasimirConfig) -> CasimirStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        emit_handle(out, Configuration::two_discs(r1, r2, center_distance).map_err(core_err)?);
        Ok(())
    })
}

/// Copy of `config` with mass `mass`.
///
/// # Safety
/// `config` must come from a constructor here; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn casimir_config_with_mass(config: *const CasimirConfig, mass: f64, out: *mut *mut CasimirConfig) -> CasimirStatus {
    guard(|| {
        let c = config_ref(config)?;
        if out.is_null() {
            return Err(null("out"));
        }
        emit_handle(out, c.with_mass(mass).map_err(core_err)?);
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `config` must come from a constructor here and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn casimir_config_free(config: *mut CasimirConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Number of obstacles, or 0 for a null handle.
///
/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn casimir_config_len(config: *const CasimirConfig) -> usize {
    config.as_ref().map_or(0, |c| c.inner.len())
}

/// Ξ(iκ) with `n_per_obstacle` boundary nodes (ignored in d = 1).
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn casimir_xi(config: *const CasimirConfig, kappa: f64, n_per_obstacle: usize, out: *mut f64) -> CasimirStatus {
    guard(|| {
        let c = config_ref(config)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = xi(c, kappa, n_per_obstacle).map_err(core_err)?;
        Ok(())
    })
}

/// Relative energy and its error estimate.
///
/// # Safety
/// `config` must be a live handle; `value` must be valid; `error` may be null.
#[no_mangle]
pub unsafe extern "C" fn casimir_energy(config: *const CasimirConfig, n_per_obstacle: usize, tol: f64, value: *mut f64, error: *mut f64) -> CasimirStatus {
    guard(|| {
        let c = config_ref(config)?;
        if value.is_null() {
            return Err(null("value"));
        }
        let r = relative_energy(c, n_per_obstacle, tol).map_err(core_err)?;
        *value = r.value;
        if !error.is_null() {
            *error = r.abs_error_estimate;
        }
        Ok(())
    })
}

/// Force on obstacle `obstacle` by the chosen route; `force` receives two doubles.
///
/// # Safety
/// `config` must be a live handle; `force` must point to two doubles; `error` may be null.
#[no_mangle]
pub unsafe extern "C" fn casimir_force(
    config: *const CasimirConfig,
    obstacle: usize,
    route: CasimirForceRoute,
    n_per_obstacle: usize,
    tol: f64,
    force: *mut f64,
    error: *mut f64,
) -> CasimirStatus {
    guard(|| {
        let c = config_ref(config)?;
        if force.is_null() {
            return Err(null("force"));
        }
        let r = match route {
            CasimirForceRoute::FiniteDifference => force_fd_vector(c, obstacle, None, n_per_obstacle, tol),
            CasimirForceRoute::SurfaceIntegral => {
                let ns = if c.dimension == 1 { 2 } else { DEFAULT_N_SIGMA };
                force_surface(c, obstacle, None, ns, n_per_obstacle, tol)
            }
            CasimirForceRoute::BoundaryHadamard => force_boundary_hadamard(c, obstacle, BoundaryLimit::Jump, n_per_obstacle, tol),
        }
        .map_err(core_err)?;
        *force = r.force[0];
        *force.add(1) = r.force[1];
        if !error.is_null() {
            *error = r.error_estimate;
        }
        Ok(())
    })
}

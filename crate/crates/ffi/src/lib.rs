//! C ABI over `ldp_core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` /
//! `*_from_json` and released by the matching `*_free`. Every fallible call
//! returns an [`LdpStatus`]; on failure a message is kept per thread and can be
//! read with [`ldp_last_error`]. Results are written through out-pointers,
//! which are left untouched on failure.
//!
//! Handles are immutable after construction. An `LdpHamiltonian` keeps an
//! internally synchronized warm-start cache, so it may be shared across
//! threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ldp_core::hamiltonian::{eval_h, grad_h};
use ldp_core::legendre::{k_inverse, Conjugate, Lagrangian};
use ldp_core::rate::{predicted_log_bound, rate_iinf};
use ldp_core::{Error, HamiltonianParams, Kernel};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    DimensionMismatch = 3,
    UnknownFamily = 10,
    InvalidParameter = 11,
    DomainViolation = 12,
    NonConvergence = 13,
    UnsupportedTail = 14,
    BelowRange = 15,
    AsymmetricKernel = 16,
    MajorizationUnavailable = 17,
    CflViolation = 18,
    TruncationTooSmall = 19,
    GridMismatch = 20,
    InsufficientData = 21,
    Saturated = 22,
    ComparisonViolated = 23,
    MissingColumn = 24,
    EmptyTable = 25,
    Io = 26,
    Json = 27,
    Panic = 99,
}

impl From<&Error> for LdpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::UnknownFamily(_) => LdpStatus::UnknownFamily,
            Error::InvalidParameter(_) => LdpStatus::InvalidParameter,
            Error::DomainViolation { .. } => LdpStatus::DomainViolation,
            Error::NonConvergence(_) => LdpStatus::NonConvergence,
            Error::UnsupportedTail(_) => LdpStatus::UnsupportedTail,
            Error::BelowRange(_) => LdpStatus::BelowRange,
            Error::AsymmetricKernel(_) => LdpStatus::AsymmetricKernel,
            Error::MajorizationUnavailable => LdpStatus::MajorizationUnavailable,
            Error::CflViolation { .. } => LdpStatus::CflViolation,
            Error::TruncationTooSmall { .. } => LdpStatus::TruncationTooSmall,
            Error::GridMismatch(_) => LdpStatus::GridMismatch,
            Error::InsufficientData { .. } => LdpStatus::InsufficientData,
            Error::Saturated(_) => LdpStatus::Saturated,
            Error::ComparisonViolated { .. } => LdpStatus::ComparisonViolated,
            Error::MissingColumn(_) => LdpStatus::MissingColumn,
            Error::EmptyTable => LdpStatus::EmptyTable,
            Error::Io(_) => LdpStatus::Io,
            Error::Json(_) => LdpStatus::Json,
        }
    }
}

/// Opaque kernel handle.
pub struct LdpKernel {
    kernel: Kernel,
}

/// Opaque Hamiltonian handle; also evaluates its conjugate.
pub struct LdpHamiltonian {
    conj: Conjugate<HamiltonianParams>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: LdpStatus, msg: impl Into<String>) -> LdpStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, translating core errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), LdpStatus>) -> LdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LdpStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(LdpStatus::Panic, "internal panic"),
    }
}

fn core(e: Error) -> LdpStatus {
    let s = LdpStatus::from(&e);
    fail(s, e.to_string())
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), LdpStatus> {
    if p.is_null() {
        Err(fail(LdpStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must point to `dim` readable doubles.
unsafe fn vector<'a>(p: *const f64, dim: usize, expected: usize) -> Result<&'a [f64], LdpStatus> {
    non_null(p, "input vector")?;
    if dim != expected {
        return Err(fail(
            LdpStatus::DimensionMismatch,
            format!("vector has {dim} entries, kernel dimension is {expected}"),
        ));
    }
    Ok(slice::from_raw_parts(p, dim))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ldp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ldp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a kernel from a JSON spec such as
/// `{"family": "compact_uniform", "params": {"rho": 1}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldp_kernel_from_json(
    json: *const c_char,
    out: *mut *mut LdpKernel,
) -> LdpStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| fail(LdpStatus::InvalidUtf8, e.to_string()))?;
        let kernel = Kernel::from_json(text).map_err(core)?;
        *out = Box::into_raw(Box::new(LdpKernel { kernel }));
        Ok(())
    })
}

/// # Safety
/// `k` must come from [`ldp_kernel_from_json`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ldp_kernel_free(k: *mut LdpKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Space dimension of the kernel, 0 for NULL.
///
/// # Safety
/// `k` must be NULL or a live kernel handle.
#[no_mangle]
pub unsafe extern "C" fn ldp_kernel_dimension(k: *const LdpKernel) -> usize {
    k.as_ref().map_or(0, |k| k.kernel.dimension)
}

/// `K⁻¹(z)` for a symmetric kernel.
///
/// # Safety
/// `k` must be a live kernel handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldp_k_inverse(k: *const LdpKernel, z: f64, out: *mut f64) -> LdpStatus {
    guard(|| {
        non_null(k, "kernel")?;
        non_null(out, "out")?;
        *out = k_inverse(&(*k).kernel, z).map_err(core)?;
        Ok(())
    })
}

/// Predicted exponent `−ln sup_{|x| ≤ θR} |u − u_R|` at horizon `t`.
///
/// # Safety
/// `k` must be a live kernel handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldp_predicted_log_bound(
    k: *const LdpKernel,
    r: f64,
    theta: f64,
    t: f64,
    out: *mut f64,
) -> LdpStatus {
    guard(|| {
        non_null(k, "kernel")?;
        non_null(out, "out")?;
        *out = predicted_log_bound(&(*k).kernel, r, theta, t).map_err(core)?;
        Ok(())
    })
}

/// Pure-jump Hamiltonian of `k`. The kernel handle may be freed afterwards.
///
/// # Safety
/// `k` must be a live kernel handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ldp_hamiltonian_new(
    k: *const LdpKernel,
    compensated: bool,
    out: *mut *mut LdpHamiltonian,
) -> LdpStatus {
    guard(|| {
        non_null(k, "kernel")?;
        non_null(out, "out")?;
        let hp = HamiltonianParams::new((*k).kernel.clone(), compensated).map_err(core)?;
        *out = Box::into_raw(Box::new(LdpHamiltonian {
            conj: Conjugate::of(hp),
        }));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`ldp_hamiltonian_new`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ldp_hamiltonian_free(h: *mut LdpHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// `H(p)`.
///
/// # Safety
/// `h` live; `p` points to `dim` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ldp_hamiltonian_value(
    h: *const LdpHamiltonian,
    p: *const f64,
    dim: usize,
    out: *mut f64,
) -> LdpStatus {
    guard(|| {
        non_null(h, "hamiltonian")?;
        non_null(out, "out")?;
        let hp = &(*h).conj.hamiltonian;
        let p = vector(p, dim, hp.kernel.dimension)?;
        *out = eval_h(hp, p).map_err(core)?;
        Ok(())
    })
}

/// `DH(p)`, written to `grad[0..dim]`.
///
/// # Safety
/// `h` live; `p` and `grad` point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn ldp_hamiltonian_gradient(
    h: *const LdpHamiltonian,
    p: *const f64,
    dim: usize,
    grad: *mut f64,
) -> LdpStatus {
    guard(|| {
        non_null(h, "hamiltonian")?;
        non_null(grad, "grad")?;
        let hp = &(*h).conj.hamiltonian;
        let p = vector(p, dim, hp.kernel.dimension)?;
        let g = grad_h(hp, p).map_err(core)?;
        slice::from_raw_parts_mut(grad, dim).copy_from_slice(&g);
        Ok(())
    })
}

/// `L(q) = sup_p (p·q − H(p))`. When `argmax` is not NULL the maximizer
/// is written to `argmax[0..dim]`.
///
/// # Safety
/// `h` live; `q` points to `dim` doubles; `out` writable; `argmax` NULL or `dim` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ldp_lagrangian(
    h: *const LdpHamiltonian,
    q: *const f64,
    dim: usize,
    out: *mut f64,
    argmax: *mut f64,
) -> LdpStatus {
    guard(|| {
        non_null(h, "hamiltonian")?;
        non_null(out, "out")?;
        let conj = &(*h).conj;
        let q = vector(q, dim, conj.dim())?;
        let r = conj.solve(q).map_err(core)?;
        *out = r.value;
        if !argmax.is_null() {
            slice::from_raw_parts_mut(argmax, dim).copy_from_slice(&r.argmax);
        }
        Ok(())
    })
}

/// Rate function `I∞(x, t)` on the unit ball.
///
/// # Safety
/// `h` live; `x` points to `dim` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ldp_rate(
    h: *const LdpHamiltonian,
    x: *const f64,
    dim: usize,
    t: f64,
    out: *mut f64,
) -> LdpStatus {
    guard(|| {
        non_null(h, "hamiltonian")?;
        non_null(out, "out")?;
        let conj = &(*h).conj;
        let x = vector(x, dim, conj.dim())?;
        *out = rate_iinf(conj, x, t).map_err(core)?.value;
        Ok(())
    })
}

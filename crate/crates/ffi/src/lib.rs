//! C interface to the circlestate simulator.
//!
//! Every fallible call returns a [`CsStatus`]; on failure a message is kept
//! per thread and can be read with [`cs_last_error_message`]. Objects cross
//! the boundary as opaque handles that the caller releases with the matching
//! `*_free` function. Panics are caught and reported as `CS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use circlestate::fidelity::{pure_fidelity, single_mode_fidelity};
use circlestate::integrator::{evolve, EvolveControls, StepMode};
use circlestate::measurement::condition_on_idler;
use circlestate::states::{cat_state, circle_state, CatParity, CircleParams};
use circlestate::{Cutoff, Error, Mode, OscillatorParams, SuperOperator, TwoModeDensityMatrix};
use num_complex::Complex64;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    CutoffMismatch = 3,
    EvolutionAborted = 4,
    NullConditioning = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsMode {
    Signal = 0,
    Idler = 1,
}

/// Sparse generator of the two-mode master equation.
pub struct CsOperator(SuperOperator);

/// Two-mode density matrix.
pub struct CsState(TwoModeDensityMatrix);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(CsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::CutoffMismatch { .. } | Error::LengthMismatch { .. } => CsStatus::CutoffMismatch,
            Error::EvolutionAborted { .. } => CsStatus::EvolutionAborted,
            Error::NullConditioning(_) => CsStatus::NullConditioning,
            _ => CsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            CsStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {text}"));
            CsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CsStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` is null or points to a live `T`.
unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `out` is null or valid for a write of `T`.
unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn cutoff(n_max: usize) -> Result<Cutoff, Failure> {
    Ok(Cutoff::new(n_max)?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes, without the terminator, of this thread's last error
/// message; zero after a successful call.
#[no_mangle]
pub extern "C" fn cs_last_error_length() -> usize {
    LAST_ERROR.with(|slot| slot.borrow().as_bytes().len())
}

/// Copies the last error message into `buf` and NUL-terminates it. With a
/// short buffer the message is truncated and `CS_STATUS_BUFFER_TOO_SMALL`
/// is returned.
///
/// # Safety
/// `buf` must be valid for writes of `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn cs_last_error_message(buf: *mut c_char, len: usize) -> CsStatus {
    if buf.is_null() || len == 0 {
        return CsStatus::NullPointer;
    }
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        let n = bytes.len().min(len - 1);
        std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
        *buf.add(n) = 0;
        if n < bytes.len() {
            CsStatus::BufferTooSmall
        } else {
            CsStatus::Ok
        }
    })
}

/// Builds the generator for scaled pump `lambda` and nonlinearity `g2` on a
/// basis with `n_max + 1` levels per mode.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cs_operator_new(lambda: f64, g2: f64, n_max: usize, out: *mut *mut CsOperator) -> CsStatus {
    guard(|| {
        let params = OscillatorParams::new(lambda, g2)?;
        let op = Box::new(CsOperator(SuperOperator::build(params, cutoff(n_max)?)));
        write(out, Box::into_raw(op), "out")
    })
}

/// Number of stored generator entries.
///
/// # Safety
/// `op` is a live operator handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cs_operator_nnz(op: *const CsOperator, out: *mut usize) -> CsStatus {
    guard(|| write(out, borrow(op, "operator")?.0.nnz(), "out"))
}

/// # Safety
/// `op` is null or a handle from [`cs_operator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_operator_free(op: *mut CsOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Two-mode vacuum `|00><00|`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cs_state_vacuum(n_max: usize, out: *mut *mut CsState) -> CsStatus {
    guard(|| {
        let state = Box::new(CsState(TwoModeDensityMatrix::vacuum(cutoff(n_max)?)));
        write(out, Box::into_raw(state), "out")
    })
}

/// Number-state projector `|n1 n2><n1 n2|`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cs_state_fock(n1: usize, n2: usize, n_max: usize, out: *mut *mut CsState) -> CsStatus {
    guard(|| {
        let state = Box::new(CsState(TwoModeDensityMatrix::basis_projector(cutoff(n_max)?, n1, n2)?));
        write(out, Box::into_raw(state), "out")
    })
}

/// Ideal circle state of radius `r0`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cs_state_circle(r0: f64, n_max: usize, out: *mut *mut CsState) -> CsStatus {
    guard(|| {
        let psi = circle_state(CircleParams::new(r0)?, cutoff(n_max)?);
        let state = Box::new(CsState(circlestate::states::pure_to_density(&psi)));
        write(out, Box::into_raw(state), "out")
    })
}

/// # Safety
/// `state` is null or a state handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_state_free(state: *mut CsState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Dimension `(n_max + 1)^2` of the two-mode basis; the density matrix has
/// `dim * dim` entries.
///
/// # Safety
/// `state` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cs_state_dim(state: *const CsState, out: *mut usize) -> CsStatus {
    guard(|| write(out, borrow(state, "state")?.0.cutoff().pair_dim(), "out"))
}

/// Copies the density matrix as interleaved `(re, im)` pairs, row-major over
/// the basis `|n1 n2>` with `n1` outer. `len` counts doubles and must be at
/// least `2 * dim * dim`.
///
/// # Safety
/// `state` is a live handle; `buf` is valid for writes of `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_state_copy_elements(state: *const CsState, buf: *mut f64, len: usize) -> CsStatus {
    guard(|| {
        let data = borrow(state, "state")?.0.as_slice();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < 2 * data.len() {
            return Err(Failure(CsStatus::BufferTooSmall, format!("need {} doubles, got {len}", 2 * data.len())));
        }
        let out = std::slice::from_raw_parts_mut(buf, 2 * data.len());
        for (pair, v) in out.chunks_exact_mut(2).zip(data) {
            pair[0] = v.re;
            pair[1] = v.im;
        }
        Ok(())
    })
}

/// # Safety
/// `state` is a live handle; `re` and `im` are valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cs_state_trace(state: *const CsState, re: *mut f64, im: *mut f64) -> CsStatus {
    guard(|| {
        let t = borrow(state, "state")?.0.trace();
        write(re, t.re, "re")?;
        write(im, t.im, "im")
    })
}

/// # Safety
/// `state` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cs_state_mean_photons(state: *const CsState, mode: CsMode, out: *mut f64) -> CsStatus {
    guard(|| {
        let mode = match mode {
            CsMode::Signal => Mode::Signal,
            CsMode::Idler => Mode::Idler,
        };
        write(out, borrow(state, "state")?.0.mean_photon_number(mode), "out")
    })
}

/// Integrates `initial` to scaled time `t_end` with classical RK4. `dt > 0`
/// fixes the step; `dt == 0` picks it from the generator. The result is a
/// new handle; `initial` is left untouched.
///
/// # Safety
/// `op` and `initial` are live handles; `out` is valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cs_evolve(
    op: *const CsOperator,
    initial: *const CsState,
    t_end: f64,
    dt: f64,
    out: *mut *mut CsState,
) -> CsStatus {
    guard(|| {
        let l = &borrow(op, "operator")?.0;
        let rho0 = &borrow(initial, "initial")?.0;
        let mode = if dt == 0.0 { StepMode::Auto } else { StepMode::Fixed { dt } };
        let controls = EvolveControls::new(t_end, mode, t_end)?;
        let run = evolve(l, rho0, &controls, &mut [])?;
        write(out, Box::into_raw(Box::new(CsState(run.final_state))), "out")
    })
}

/// `<psi|rho|psi>` against the ideal circle state of radius `r0`.
///
/// # Safety
/// `state` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cs_circle_fidelity(state: *const CsState, r0: f64, out: *mut f64) -> CsStatus {
    guard(|| {
        let rho = &borrow(state, "state")?.0;
        let psi = circle_state(CircleParams::new(r0)?, rho.cutoff());
        write(out, pure_fidelity(&psi, rho)?.f_overlap, "out")
    })
}

/// Fidelity of the signal state, conditioned on the idler quadrature
/// `x = 0` at zero phase, against the even cat `|i beta> + |-i beta>`.
///
/// # Safety
/// `state` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cs_conditional_cat_fidelity(state: *const CsState, beta: f64, out: *mut f64) -> CsStatus {
    guard(|| {
        let rho = &borrow(state, "state")?.0;
        let cat = cat_state(Complex64::new(0.0, beta), CatParity::Even, rho.cutoff())?;
        let sigma = condition_on_idler(rho, 0.0, 0.0)?.normalized;
        write(out, single_mode_fidelity(&cat, &sigma)?.f_overlap, "out")
    })
}

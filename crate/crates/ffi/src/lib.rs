//! C ABI over `squeeze_equiv`.
//!
//! Every fallible call returns an [`SqzStatus`]; on failure the message is
//! available from [`sqz_last_error`] until the next call on the same thread.
//! Protocols are opaque handles created by `sqz_protocol_*` and released with
//! [`sqz_protocol_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use squeeze_equiv::config::ProtocolConfig;
use squeeze_equiv::equivalence::{check_equivalence, janszky_adam_tau, EndState, Tolerance};
use squeeze_equiv::ermakov::{end_state, solve, ErmakovError, ErmakovState, Route, SolverOptions};
use squeeze_equiv::protocols::{FrequencyProtocol, ProtocolError};
use squeeze_equiv::squeeze::{final_squeeze, record, transition_prob};
use squeeze_equiv::Units;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqzStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidProtocol = 3,
    SolverFailure = 4,
    ExpulsiveRegime = 5,
    NonPhysical = 6,
    Panic = 7,
}

pub const SQZ_ROUTE_ODE: u32 = 0;
pub const SQZ_ROUTE_FORMAL: u32 = 1;

/// Opaque frequency protocol.
pub struct SqzProtocol(FrequencyProtocol);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqzEndState {
    pub delta: f64,
    pub epsilon: f64,
    pub omegaf: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqzFinalSqueeze {
    pub r_f: f64,
    pub lambda_f: f64,
    pub qstar: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqzObservables {
    pub r: f64,
    pub phi: f64,
    pub sigma_x2: f64,
    pub sigma_p2: f64,
    pub energy: f64,
    pub sigma_h2: f64,
    pub excitations: f64,
    pub qstar: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

type Failure = (SqzStatus, String);

fn protocol_failure(e: ProtocolError) -> Failure {
    match e {
        ProtocolError::ExpulsiveRegime { .. } => (SqzStatus::ExpulsiveRegime, e.to_string()),
        other => (SqzStatus::InvalidProtocol, other.to_string()),
    }
}

fn ermakov_failure(e: ErmakovError) -> Failure {
    match e {
        ErmakovError::Protocol(p) => protocol_failure(p),
        ErmakovError::InvalidState(_) | ErmakovError::InvalidGrid(_) => {
            (SqzStatus::InvalidArgument, e.to_string())
        }
        other => (SqzStatus::SolverFailure, other.to_string()),
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    (SqzStatus::InvalidArgument, msg.into())
}

/// Run `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SqzStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SqzStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SqzStatus::Panic
        }
    }
}

fn route(code: u32) -> Result<Route, Failure> {
    match code {
        SQZ_ROUTE_ODE => Ok(Route::Ode),
        SQZ_ROUTE_FORMAL => Ok(Route::Formal),
        other => Err(invalid(format!("unknown route {other}"))),
    }
}

fn options(rtol: f64, atol: f64) -> Result<SolverOptions, Failure> {
    if !(rtol > 0.0 && atol > 0.0) {
        return Err(invalid(format!(
            "tolerances must be positive, got rtol={rtol}, atol={atol}"
        )));
    }
    Ok(SolverOptions::default().with_tolerances(rtol, atol))
}

unsafe fn out_ref<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut()
        .ok_or_else(|| (SqzStatus::NullPointer, format!("{name} is null")))
}

unsafe fn in_ref<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .ok_or_else(|| (SqzStatus::NullPointer, format!("{name} is null")))
}

fn into_handle(p: FrequencyProtocol, out: &mut *mut SqzProtocol) {
    *out = Box::into_raw(Box::new(SqzProtocol(p)));
}

/// Message of the last failed call on this thread, or null.
#[no_mangle]
pub extern "C" fn sqz_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

/// Parse a protocol from a JSON object such as
/// `{"kind":"sudden_jump","omega0":1,"omega1":2,"omegaf":1,"tau":1.5}`.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_protocol_from_json(
    json: *const c_char,
    m0: f64,
    out: *mut *mut SqzProtocol,
) -> SqzStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        if json.is_null() {
            return Err((SqzStatus::NullPointer, "json is null".into()));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| invalid(format!("json is not UTF-8: {e}")))?;
        let cfg: ProtocolConfig =
            serde_json::from_str(text).map_err(|e| (SqzStatus::InvalidProtocol, e.to_string()))?;
        let protocol = cfg.build(m0).map_err(protocol_failure)?;
        into_handle(protocol, out);
        Ok(())
    })
}

/// `ω₀ → ω₁` on `(0, τ]`, then `ω_f`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_protocol_sudden_jump(
    m0: f64,
    omega0: f64,
    omega1: f64,
    omegaf: f64,
    tau: f64,
    out: *mut *mut SqzProtocol,
) -> SqzStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let p = FrequencyProtocol::sudden_jump(m0, omega0, omega1, omegaf, tau)
            .map_err(protocol_failure)?;
        into_handle(p, out);
        Ok(())
    })
}

/// `ω₀e^{t/τ}` on `(0, τ]`, then `ω₀e`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_protocol_exponential_ramp(
    m0: f64,
    omega0: f64,
    tau: f64,
    out: *mut *mut SqzProtocol,
) -> SqzStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let p = FrequencyProtocol::exponential_ramp(m0, omega0, tau).map_err(protocol_failure)?;
        into_handle(p, out);
        Ok(())
    })
}

/// # Safety
/// `protocol` must be null or a handle from `sqz_protocol_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqz_protocol_free(protocol: *mut SqzProtocol) {
    if !protocol.is_null() {
        drop(Box::from_raw(protocol));
    }
}

/// `τ`, `ω₀`, `ω_f` and `m₀` of a protocol. Any output pointer may be null.
///
/// # Safety
/// `protocol` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn sqz_protocol_params(
    protocol: *const SqzProtocol,
    tau: *mut f64,
    omega0: *mut f64,
    omegaf: *mut f64,
    m0: *mut f64,
) -> SqzStatus {
    guard(|| {
        let p = &in_ref(protocol, "protocol")?.0;
        for (ptr, v) in [
            (tau, p.tau),
            (omega0, p.omega0),
            (omegaf, p.omegaf),
            (m0, p.m0),
        ] {
            if let Some(slot) = ptr.as_mut() {
                *slot = v;
            }
        }
        Ok(())
    })
}

/// `(δ, ε, ω_f)` at the end of the modulation, starting from rest.
///
/// # Safety
/// `protocol` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_end_state(
    protocol: *const SqzProtocol,
    route_code: u32,
    rtol: f64,
    atol: f64,
    out: *mut SqzEndState,
) -> SqzStatus {
    guard(|| {
        let p = &in_ref(protocol, "protocol")?.0;
        let out = out_ref(out, "out")?;
        let s = end_state(p, route(route_code)?, &options(rtol, atol)?).map_err(ermakov_failure)?;
        *out = SqzEndState {
            delta: s.rho,
            epsilon: s.rho_dot,
            omegaf: p.omegaf,
        };
        Ok(())
    })
}

/// `ρ` and `ρ̇` at `len` increasing times. Either output may be null.
///
/// # Safety
/// `times` must hold `len` readable values; non-null outputs `len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn sqz_trajectory(
    protocol: *const SqzProtocol,
    route_code: u32,
    rtol: f64,
    atol: f64,
    times: *const f64,
    len: usize,
    rho: *mut f64,
    rho_dot: *mut f64,
) -> SqzStatus {
    guard(|| {
        let p = &in_ref(protocol, "protocol")?.0;
        if len > 0 && times.is_null() {
            return Err((SqzStatus::NullPointer, "times is null".into()));
        }
        let grid = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(times, len)
        };
        let traj =
            solve(p, grid, route(route_code)?, &options(rtol, atol)?).map_err(ermakov_failure)?;
        for (i, pt) in traj.points.iter().enumerate() {
            if !rho.is_null() {
                *rho.add(i) = pt.rho;
            }
            if !rho_dot.is_null() {
                *rho_dot.add(i) = pt.rho_dot;
            }
        }
        Ok(())
    })
}

/// Time-independent squeezing after the modulation.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_final_squeeze(
    delta: f64,
    epsilon: f64,
    omegaf: f64,
    m0: f64,
    out: *mut SqzFinalSqueeze,
) -> SqzStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let f = final_squeeze(delta, epsilon, omegaf, m0)
            .map_err(|e| (SqzStatus::NonPhysical, e.to_string()))?;
        *out = SqzFinalSqueeze {
            r_f: f.r_f,
            lambda_f: f.lambda_f,
            qstar: f.qstar(),
        };
        Ok(())
    })
}

/// Observables of Fock level `n` for amplitude state `(ρ, ρ̇)` at frequency `ω`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_observables(
    rho: f64,
    rho_dot: f64,
    omega: f64,
    n: u32,
    m0: f64,
    hbar: f64,
    out: *mut SqzObservables,
) -> SqzStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let state = ErmakovState::new(0.0, rho, rho_dot).map_err(ermakov_failure)?;
        if !(m0 > 0.0 && hbar > 0.0) {
            return Err(invalid("m0 and hbar must be positive"));
        }
        let s = record(&state, omega, n, Units { m0, hbar })
            .map_err(|e| (SqzStatus::NonPhysical, e.to_string()))?;
        *out = SqzObservables {
            r: s.r,
            phi: s.phi,
            sigma_x2: s.sigma_x2,
            sigma_p2: s.sigma_p2,
            energy: s.energy,
            sigma_h2: s.sigma_h2,
            excitations: s.excitations,
            qstar: s.qstar,
        };
        Ok(())
    })
}

/// `P(μ → ν)` for a state squeezed from the ground state to mean excitation `n0`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_transition_prob(
    mu: u32,
    nu: u32,
    n0: f64,
    out: *mut f64,
) -> SqzStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = transition_prob(mu, nu, n0).map_err(|e| invalid(e.to_string()))?;
        Ok(())
    })
}

/// Compare two end states; `residuals` (may be null) receives the
/// `(ω_f, δ, ε)` differences.
///
/// # Safety
/// `a`, `b`, `equivalent` must be valid; `residuals`, if non-null, must hold 3 values.
#[no_mangle]
pub unsafe extern "C" fn sqz_check_equivalence(
    a: *const SqzEndState,
    b: *const SqzEndState,
    atol: f64,
    rtol: f64,
    equivalent: *mut bool,
    residuals: *mut f64,
) -> SqzStatus {
    guard(|| {
        let (a, b) = (in_ref(a, "a")?, in_ref(b, "b")?);
        let equivalent = out_ref(equivalent, "equivalent")?;
        if !(atol >= 0.0 && rtol >= 0.0) {
            return Err(invalid("tolerances must be non-negative"));
        }
        let to_end = |s: &SqzEndState| EndState {
            delta: s.delta,
            epsilon: s.epsilon,
            omegaf: s.omegaf,
        };
        let check = check_equivalence(&to_end(a), &to_end(b), Tolerance { atol, rtol })
            .map_err(|e| invalid(e.to_string()))?;
        *equivalent = check.equivalent;
        if !residuals.is_null() {
            std::ptr::copy_nonoverlapping(check.residuals.as_ptr(), residuals, 3);
        }
        Ok(())
    })
}

/// `qπ/ω₁`; NaN when `omega1 <= 0` or `q == 0`.
#[no_mangle]
pub extern "C" fn sqz_janszky_adam_tau(omega1: f64, q: u32) -> f64 {
    if omega1 > 0.0 && q >= 1 {
        janszky_adam_tau(omega1, q)
    } else {
        f64::NAN
    }
}

/// Library version, static string.
#[no_mangle]
pub extern "C" fn sqz_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

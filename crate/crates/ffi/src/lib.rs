//! C ABI for the edfq library.
//!
//! Every function returns an [`EdfqStatus`]; results go through out
//! pointers. On failure the message is kept per thread and can be read with
//! [`edfq_last_error_message`]. Handles are opaque and must be released with
//! the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use edfq::limit::{self, LimitParams};
use edfq::{Error, LeadTimeLaw, SimConfig, SimOutput, Snapshot};

/// Outcome of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdfqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Unavailable = 4,
    Numeric = 5,
    Parse = 6,
    Io = 7,
    Panic = 8,
}

/// A lead-time law `G`.
pub struct EdfqLaw(LeadTimeLaw);

/// The output of one simulation run.
pub struct EdfqSim(SimOutput);

/// Parameters of the limit formulas. Build with
/// [`edfq_params_from_prelimit`] or fill in directly.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdfqParams {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda_n: f64,
    pub mu_n: f64,
    pub alpha_n: f64,
    pub beta_n: f64,
}

impl From<LimitParams> for EdfqParams {
    fn from(p: LimitParams) -> Self {
        EdfqParams {
            lambda: p.lambda,
            mu: p.mu,
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            lambda_n: p.lambda_n,
            mu_n: p.mu_n,
            alpha_n: p.alpha_n,
            beta_n: p.beta_n,
        }
    }
}

impl From<EdfqParams> for LimitParams {
    fn from(p: EdfqParams) -> Self {
        LimitParams {
            lambda: p.lambda,
            mu: p.mu,
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            lambda_n: p.lambda_n,
            mu_n: p.mu_n,
            alpha_n: p.alpha_n,
            beta_n: p.beta_n,
        }
    }
}

/// Scalar state of one snapshot.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdfqSnapshotSummary {
    pub time: f64,
    pub workload: f64,
    pub late_work: f64,
    pub frontier: f64,
    pub current_lead: f64,
    pub idleness: f64,
    pub work_arrived: f64,
    pub queue_len: usize,
    pub arrivals: u64,
}

struct Failure(EdfqStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain(_) => EdfqStatus::Domain,
            Error::Invalid { .. } => EdfqStatus::InvalidArgument,
            Error::Unavailable(_) => EdfqStatus::Unavailable,
            Error::Numeric(_) => EdfqStatus::Numeric,
            Error::Config { .. } => EdfqStatus::Parse,
            Error::Io(_) => EdfqStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn guard(f: impl FnOnce() -> Outcome) -> EdfqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            EdfqStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {message}"));
            EdfqStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(EdfqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T) -> Outcome {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn text<'a>(ptr: *const c_char) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null("string"));
    }
    CStr::from_ptr(ptr).to_str().map_err(|e| {
        Failure(
            EdfqStatus::InvalidArgument,
            format!("string is not UTF-8: {e}"),
        )
    })
}

fn parse_error(e: serde_json::Error) -> Failure {
    Failure(EdfqStatus::Parse, e.to_string())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn edfq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`) and return the full message length
/// without the terminator.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn edfq_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

fn boxed_law(law: edfq::Result<LeadTimeLaw>, out: *mut *mut EdfqLaw) -> Outcome {
    let law = Box::new(EdfqLaw(law?));
    unsafe { write(out, Box::into_raw(law)) }
}

/// Constant law with every lead time equal to `y_star`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_law_constant(y_star: f64, out: *mut *mut EdfqLaw) -> EdfqStatus {
    guard(|| boxed_law(LeadTimeLaw::constant(y_star), out))
}

/// Uniform law on `[low, high]`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_law_uniform(
    low: f64,
    high: f64,
    out: *mut *mut EdfqLaw,
) -> EdfqStatus {
    guard(|| boxed_law(LeadTimeLaw::uniform(low, high), out))
}

/// Atoms at `atom_at[i]` with mass `atom_mass[i]` plus constant densities
/// `piece_density[i]` on `[piece_from[i], piece_to[i])`.
///
/// # Safety
/// Each array must hold its stated number of elements; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_law_mixed(
    atom_at: *const f64,
    atom_mass: *const f64,
    atom_count: usize,
    piece_from: *const f64,
    piece_to: *const f64,
    piece_density: *const f64,
    piece_count: usize,
    out: *mut *mut EdfqLaw,
) -> EdfqStatus {
    guard(|| {
        let at = slice(atom_at, atom_count, "atom_at")?;
        let mass = slice(atom_mass, atom_count, "atom_mass")?;
        let from = slice(piece_from, piece_count, "piece_from")?;
        let to = slice(piece_to, piece_count, "piece_to")?;
        let density = slice(piece_density, piece_count, "piece_density")?;
        let atoms = at.iter().copied().zip(mass.iter().copied()).collect();
        let pieces = (0..piece_count)
            .map(|i| (from[i], to[i], density[i]))
            .collect();
        boxed_law(LeadTimeLaw::mixed(atoms, pieces), out)
    })
}

/// Law from its JSON description, e.g. `{"kind": "uniform", "low": 0, "high": 2}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_law_from_json(
    json: *const c_char,
    out: *mut *mut EdfqLaw,
) -> EdfqStatus {
    guard(|| {
        let law: LeadTimeLaw = serde_json::from_str(text(json)?).map_err(parse_error)?;
        boxed_law(Ok(law), out)
    })
}

/// Release a law. Null is ignored.
///
/// # Safety
/// `law` must come from an `edfq_law_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn edfq_law_free(law: *mut EdfqLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// Right endpoint `y*` of the support.
///
/// # Safety
/// `law` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_law_y_star(law: *const EdfqLaw, out: *mut f64) -> EdfqStatus {
    guard(|| write(out, deref(law, "law")?.0.y_star()))
}

/// `G(y)`.
///
/// # Safety
/// `law` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_law_cdf(law: *const EdfqLaw, y: f64, out: *mut f64) -> EdfqStatus {
    guard(|| write(out, deref(law, "law")?.0.cdf(y)))
}

/// `H(y) = ∫_y^∞ (1 - G)`.
///
/// # Safety
/// `law` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_law_h(law: *const EdfqLaw, y: f64, out: *mut f64) -> EdfqStatus {
    guard(|| write(out, deref(law, "law")?.0.h(y)))
}

/// `H⁻¹(w)` for `w >= 0`.
///
/// # Safety
/// `law` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_law_h_inverse(
    law: *const EdfqLaw,
    w: f64,
    out: *mut f64,
) -> EdfqStatus {
    guard(|| write(out, deref(law, "law")?.0.h_inverse(w)?))
}

/// Parameters of one prelimit system with index `n`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_params_from_prelimit(
    lambda_n: f64,
    mu_n: f64,
    alpha_n: f64,
    beta_n: f64,
    n: f64,
    out: *mut EdfqParams,
) -> EdfqStatus {
    guard(|| {
        if ![lambda_n, mu_n, alpha_n, beta_n, n]
            .iter()
            .all(|v| v.is_finite())
            || !(lambda_n > 0.0 && mu_n > 0.0 && n > 0.0)
        {
            return Err(Failure(
                EdfqStatus::InvalidArgument,
                "rates and n must be positive and finite".into(),
            ));
        }
        write(
            out,
            LimitParams::from_prelimit(lambda_n, mu_n, alpha_n, beta_n, n).into(),
        )
    })
}

unsafe fn params(p: *const EdfqParams) -> Result<LimitParams, Failure> {
    Ok((*deref(p, "params")?).into())
}

/// `E[J*(y1) J*(y2)]`.
///
/// # Safety
/// Pointers must be valid; `law` a live handle.
#[no_mangle]
pub unsafe extern "C" fn edfq_cov_j(
    p: *const EdfqParams,
    law: *const EdfqLaw,
    y1: f64,
    y2: f64,
    out: *mut f64,
) -> EdfqStatus {
    guard(|| {
        write(
            out,
            limit::cov_j(y1, y2, &params(p)?, &deref(law, "law")?.0)?,
        )
    })
}

/// Covariance of the service/lead-time field at `(s1, y1)`, `(s2, y2)`.
///
/// # Safety
/// Pointers must be valid; `law` a live handle.
#[no_mangle]
pub unsafe extern "C" fn edfq_cov_y(
    p: *const EdfqParams,
    law: *const EdfqLaw,
    s1: f64,
    y1: f64,
    s2: f64,
    y2: f64,
    out: *mut f64,
) -> EdfqStatus {
    guard(|| {
        write(
            out,
            limit::cov_y(s1, y1, s2, y2, &params(p)?, &deref(law, "law")?.0)?,
        )
    })
}

/// Covariance of the arrival-driven part at `y1`, `y2`.
///
/// # Safety
/// Pointers must be valid; `law` a live handle.
#[no_mangle]
pub unsafe extern "C" fn edfq_cov_z(
    p: *const EdfqParams,
    law: *const EdfqLaw,
    y1: f64,
    y2: f64,
    out: *mut f64,
) -> EdfqStatus {
    guard(|| {
        write(
            out,
            limit::cov_z(y1, y2, &params(p)?, &deref(law, "law")?.0)?,
        )
    })
}

/// Surrogate decay rate θ of the stationary workload.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn edfq_theta(p: *const EdfqParams, out: *mut f64) -> EdfqStatus {
    guard(|| write(out, limit::theta_surrogate(&params(p)?)?))
}

/// `P[W > w] = exp(-θ w)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn edfq_stationary_workload_tail(
    p: *const EdfqParams,
    w: f64,
    out: *mut f64,
) -> EdfqStatus {
    guard(|| write(out, limit::stationary_workload_tail(&params(p)?, w)?))
}

/// Scale of the frontier-prediction Laplace law.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn edfq_laplace_scale(p: *const EdfqParams, out: *mut f64) -> EdfqStatus {
    guard(|| write(out, limit::laplace_scale(&params(p)?)?))
}

/// Density of the frontier-prediction Laplace law at `x`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn edfq_laplace_density(
    p: *const EdfqParams,
    x: f64,
    out: *mut f64,
) -> EdfqStatus {
    guard(|| write(out, limit::laplace_density(&params(p)?, x)?))
}

/// Run replication `replication` of a simulation described in JSON (the
/// same layout the CLI prints under `config`).
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_sim_run_json(
    config_json: *const c_char,
    replication: u64,
    out: *mut *mut EdfqSim,
) -> EdfqStatus {
    guard(|| {
        let config: SimConfig = serde_json::from_str(text(config_json)?).map_err(parse_error)?;
        let output = edfq::run_replication(&config, replication, |_| {})?;
        write(out, Box::into_raw(Box::new(EdfqSim(output))))
    })
}

/// Release a simulation result. Null is ignored.
///
/// # Safety
/// `sim` must come from [`edfq_sim_run_json`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn edfq_sim_free(sim: *mut EdfqSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Number of snapshots, in increasing time order.
///
/// # Safety
/// `sim` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_sim_snapshot_count(
    sim: *const EdfqSim,
    out: *mut usize,
) -> EdfqStatus {
    guard(|| write(out, deref(sim, "sim")?.0.snapshots.len()))
}

unsafe fn snapshot<'a>(sim: *const EdfqSim, index: usize) -> Result<&'a Snapshot, Failure> {
    let snaps = &deref(sim, "sim")?.0.snapshots;
    snaps.get(index).ok_or_else(|| {
        Failure(
            EdfqStatus::InvalidArgument,
            format!("snapshot index {index} out of range 0..{}", snaps.len()),
        )
    })
}

/// Scalar state of snapshot `index`.
///
/// # Safety
/// `sim` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_sim_snapshot(
    sim: *const EdfqSim,
    index: usize,
    out: *mut EdfqSnapshotSummary,
) -> EdfqStatus {
    guard(|| {
        let s = snapshot(sim, index)?;
        write(
            out,
            EdfqSnapshotSummary {
                time: s.time,
                workload: s.workload,
                late_work: s.late_work(),
                frontier: s.frontier,
                current_lead: s.current_lead,
                idleness: s.idleness,
                work_arrived: s.work_arrived,
                queue_len: s.queue_len,
                arrivals: s.arrivals,
            },
        )
    })
}

/// Work of present customers with lead time strictly above `y`.
///
/// # Safety
/// `sim` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_sim_workload_above(
    sim: *const EdfqSim,
    index: usize,
    y: f64,
    out: *mut f64,
) -> EdfqStatus {
    guard(|| write(out, snapshot(sim, index)?.workload_above(y)))
}

/// Work of present customers with lead time in `[lo, hi]`.
///
/// # Safety
/// `sim` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_sim_work_in_leads(
    sim: *const EdfqSim,
    index: usize,
    lo: f64,
    hi: f64,
    out: *mut f64,
) -> EdfqStatus {
    guard(|| {
        let s = snapshot(sim, index)?;
        write(out, s.work_in_deadlines(s.time + lo, s.time + hi))
    })
}

/// Work ever arrived with lead time strictly above `y` at the snapshot.
/// Needs `retain_arrival_log` in the run configuration.
///
/// # Safety
/// `sim` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn edfq_sim_arrival_work_above(
    sim: *const EdfqSim,
    index: usize,
    y: f64,
    out: *mut f64,
) -> EdfqStatus {
    guard(|| write(out, snapshot(sim, index)?.arrival_work_above(y)?))
}

//! C ABI over the `forkguard` library.
//!
//! Every fallible function returns an [`FgStatus`] and writes results through
//! out-pointers, which are left untouched on failure. The message for the most
//! recent failure on the calling thread is available from
//! [`fg_last_error_message`]. Trained models are exposed as the opaque
//! [`FgModel`] handle.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use forkguard::collusion_detector::{self, Decision, LinearModel, FEATURE_COUNT};
use forkguard::consortium_sim::{self, History};
use forkguard::payoff_game::{self, AttackStake};
use forkguard::race_math::{self, HashratePartition, Lead};

/// Result code of every fallible call. Values match the CLI exit codes where
/// they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Numerical = 4,
    Panic = 5,
}

/// Trained collusion classifier. Create with [`fg_model_load`], release with
/// [`fg_model_free`].
pub struct FgModel {
    inner: LinearModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

struct Failure(FgStatus);

impl From<forkguard::Error> for Failure {
    fn from(err: forkguard::Error) -> Self {
        let status = match err.exit_code() {
            2 => FgStatus::InvalidArgument,
            3 => FgStatus::Io,
            _ => FgStatus::Numerical,
        };
        set_last_error(err.to_string());
        Failure(status)
    }
}

fn null(name: &str) -> Failure {
    set_last_error(format!("{name} is null"));
    Failure(FgStatus::NullPointer)
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FgStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FgStatus::Ok,
        Ok(Err(Failure(status))) => status,
        Err(_) => {
            set_last_error("internal panic".into());
            FgStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, name: &str, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn split(q: f64) -> Result<HashratePartition, Failure> {
    Ok(HashratePartition::from_attacker_share(q)?)
}

/// Message describing the last failed call on this thread, or null if the
/// last call succeeded. The pointer stays valid until the next call into
/// this library from the same thread.
#[no_mangle]
pub extern "C" fn fg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |m| m.as_ptr())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Number of features expected by [`fg_model_predict`].
#[no_mangle]
pub extern "C" fn fg_feature_count() -> usize {
    FEATURE_COUNT
}

/// Probability that an attacker with share `q` ever catches up from `lead`
/// blocks behind.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fg_catch_up_probability(q: f64, lead: i64, out: *mut f64) -> FgStatus {
    guard(|| {
        write(
            out,
            "out",
            race_math::catch_up_probability(split(q)?, Lead(lead)),
        )
    })
}

/// Double-spend success probability after `n` confirmations.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fg_double_spend_risk(q: f64, n: u32, out: *mut f64) -> FgStatus {
    guard(|| write(out, "out", race_math::double_spend_risk(n, split(q)?)?))
}

/// Smallest confirmation count with risk below `epsilon`. Writes 0 when no
/// count up to `n_cap` suffices, which is always the case for `q >= 0.5`.
///
/// # Safety
/// `out_n` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fg_min_confirmations(
    q: f64,
    epsilon: f64,
    n_cap: u32,
    out_n: *mut u32,
) -> FgStatus {
    guard(|| {
        let policy = race_math::min_confirmations(split(q)?, epsilon, n_cap)?;
        write(out_n, "out_n", policy.n_star().unwrap_or(0))
    })
}

/// Step payoff of a double-spend: `v` if `q >= 0.5`, else `-(v + o * block_value)`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fg_attacker_payoff(
    v: f64,
    o: u32,
    block_value: f64,
    q: f64,
    out: *mut f64,
) -> FgStatus {
    guard(|| {
        let stake = AttackStake::new(v, o, block_value)?;
        write(
            out,
            "out",
            payoff_game::attacker_payoff(stake, split(q)?).amount(),
        )
    })
}

/// Probability-weighted payoff of an attack against `n` confirmations.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fg_expected_attack_payoff(
    v: f64,
    o: u32,
    block_value: f64,
    q: f64,
    n: u32,
    out: *mut f64,
) -> FgStatus {
    guard(|| {
        let stake = AttackStake::new(v, o, block_value)?;
        let payoff = payoff_game::expected_attack_payoff(stake, split(q)?, n)?;
        write(out, "out", payoff.amount())
    })
}

/// Monte Carlo estimate of the double-spend risk. Deterministic in `seed`.
///
/// # Safety
/// `out_estimate` and `out_std_error` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fg_estimate_risk_monte_carlo(
    q: f64,
    n: u32,
    trials: u64,
    lead_cutoff: u32,
    seed: u64,
    out_estimate: *mut f64,
    out_std_error: *mut f64,
) -> FgStatus {
    guard(|| {
        if out_estimate.is_null() {
            return Err(null("out_estimate"));
        }
        if out_std_error.is_null() {
            return Err(null("out_std_error"));
        }
        let est =
            consortium_sim::estimate_risk_monte_carlo(split(q)?, n, trials, lead_cutoff, seed)?;
        write(out_estimate, "out_estimate", est.estimate)?;
        write(out_std_error, "out_std_error", est.std_error)
    })
}

/// Smoothed defection rate of a stakeholder with `defections` out of
/// `transactions`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fg_defect_probability(
    defections: u64,
    transactions: u64,
    out: *mut f64,
) -> FgStatus {
    guard(|| {
        let p = collusion_detector::defect_probability(History {
            defections,
            transactions,
        })?;
        write(out, "out", p)
    })
}

/// Gate decision: `*out_cancel` is true when `probability >= threshold`.
///
/// # Safety
/// `out_cancel` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fg_decide(
    probability: f64,
    threshold: f64,
    out_cancel: *mut bool,
) -> FgStatus {
    guard(|| {
        let verdict = collusion_detector::decide(probability, threshold)?;
        write(
            out_cancel,
            "out_cancel",
            verdict.decision == Decision::CancelAndRetry,
        )
    })
}

/// Loads a model file written by `forkguard train`.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out_model` must be null
/// or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fg_model_load(
    path: *const c_char,
    out_model: *mut *mut FgModel,
) -> FgStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out_model.is_null() {
            return Err(null("out_model"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| {
            set_last_error("path is not valid UTF-8".into());
            Failure(FgStatus::InvalidArgument)
        })?;
        let inner = LinearModel::load(Path::new(path))?;
        write(
            out_model,
            "out_model",
            Box::into_raw(Box::new(FgModel { inner })),
        )
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from [`fg_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fg_model_free(model: *mut FgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Attack probability for one feature vector of length [`fg_feature_count`].
///
/// # Safety
/// `model` must be null or a live handle; `features` must be null or point
/// to `len` readable doubles; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fg_model_predict(
    model: *const FgModel,
    features: *const f64,
    len: usize,
    out: *mut f64,
) -> FgStatus {
    guard(|| {
        if model.is_null() {
            return Err(null("model"));
        }
        if features.is_null() {
            return Err(null("features"));
        }
        let features = std::slice::from_raw_parts(features, len);
        let p = collusion_detector::predict_slice(&(*model).inner, features)?;
        write(out, "out", p)
    })
}

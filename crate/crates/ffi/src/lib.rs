//! C ABI for `permbet`.
//!
//! Every fallible function returns a [`PermbetStatus`]; on failure the
//! message is available from [`permbet_last_error`] on the same thread.
//! Tests are opaque [`PermbetTest`] handles released with
//! [`permbet_test_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use permbet::classical::{bc_pvalue, perm_pvalue};
use permbet::reconstruct::{anytime_bc_pvalue, anytime_perm_pvalue};
use permbet::strategies::{binomial_wealth, mixture_uniform_wealth};
use permbet::{Alpha, Error, Indicator, SequentialTest, StopReason, StoppingRule, StrategyConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermbetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidAlpha = 3,
    InvalidConfig = 4,
    AlreadyStopped = 5,
    CalledAfterLoss = 6,
    DegeneratePosterior = 7,
    StreamExhausted = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermbetStopReason {
    Running = 0,
    Rejected = 1,
    Futility = 2,
    Exhausted = 3,
    External = 4,
}

impl From<Option<StopReason>> for PermbetStopReason {
    fn from(r: Option<StopReason>) -> Self {
        match r {
            None => Self::Running,
            Some(StopReason::Rejected) => Self::Rejected,
            Some(StopReason::Futility) => Self::Futility,
            Some(StopReason::Exhausted) => Self::Exhausted,
            Some(StopReason::External) => Self::External,
        }
    }
}

/// Snapshot of a running test.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PermbetState {
    pub t: u64,
    pub losses: u64,
    pub log_wealth: f64,
    pub p_value: f64,
    pub stop_reason: PermbetStopReason,
}

/// Opaque sequential test handle.
pub struct PermbetTest {
    inner: SequentialTest,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PermbetStatus {
    match e {
        Error::InvalidAlpha(_) => PermbetStatus::InvalidAlpha,
        Error::Json(_) | Error::InvalidConfigKeys(_) => PermbetStatus::InvalidConfig,
        Error::AlreadyStopped(_) => PermbetStatus::AlreadyStopped,
        Error::CalledAfterLoss => PermbetStatus::CalledAfterLoss,
        Error::DegeneratePosterior { .. } => PermbetStatus::DegeneratePosterior,
        Error::StreamExhausted(_) => PermbetStatus::StreamExhausted,
        _ => PermbetStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), PermbetStatus>) -> PermbetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PermbetStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            PermbetStatus::Panic
        }
    }
}

fn fail(e: Error) -> PermbetStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> PermbetStatus {
    set_error(&format!("{what} is null"));
    PermbetStatus::NullPointer
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn permbet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn permbet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a test from a strategy config in JSON, e.g.
/// `{"kind":"binomial"}`. `futility` is the futility threshold; a negative
/// value selects the default (`alpha`) and zero disables it.
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn permbet_test_new(
    config_json: *const c_char,
    alpha: f64,
    futility: f64,
    out: *mut *mut PermbetTest,
) -> PermbetStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(config_json).to_str().map_err(|e| {
            set_error(&format!("config is not UTF-8: {e}"));
            PermbetStatus::InvalidConfig
        })?;
        let cfg: StrategyConfig = serde_json::from_str(text).map_err(|e| fail(e.into()))?;
        let alpha = Alpha::new(alpha).map_err(fail)?;
        let mut rule = StoppingRule::new(alpha);
        if futility == 0.0 {
            rule = rule.without_futility();
        } else if futility > 0.0 {
            rule = rule.with_futility(futility);
        }
        let inner = SequentialTest::from_config(&cfg.with_alpha(alpha), rule).map_err(fail)?;
        *out = Box::into_raw(Box::new(PermbetTest { inner }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `test` must come from [`permbet_test_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn permbet_test_free(test: *mut PermbetTest) {
    if !test.is_null() {
        drop(Box::from_raw(test));
    }
}

/// Feeds one indicator (`loss` nonzero means a loss). `stop` (may be
/// null) receives the stop reason, `Running` if the test continues.
///
/// # Safety
/// `test` must be a live handle; `stop` null or valid.
#[no_mangle]
pub unsafe extern "C" fn permbet_test_observe(
    test: *mut PermbetTest,
    loss: u8,
    stop: *mut PermbetStopReason,
) -> PermbetStatus {
    guard(|| {
        let test = test.as_mut().ok_or_else(|| null("test"))?;
        let r = test.inner.observe(Indicator::from(loss != 0)).map_err(fail)?;
        if let Some(stop) = stop.as_mut() {
            *stop = r.into();
        }
        Ok(())
    })
}

/// Bet `(b0, b1)` for the next round.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn permbet_test_next_bet(test: *const PermbetTest, b0: *mut f64, b1: *mut f64) -> PermbetStatus {
    guard(|| {
        let test = test.as_ref().ok_or_else(|| null("test"))?;
        if b0.is_null() || b1.is_null() {
            return Err(null("output"));
        }
        let bet = test.inner.next_bet().map_err(fail)?;
        *b0 = bet.b0;
        *b1 = bet.b1;
        Ok(())
    })
}

/// Current state of the test.
///
/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn permbet_test_state(test: *const PermbetTest, out: *mut PermbetState) -> PermbetStatus {
    guard(|| {
        let test = test.as_ref().ok_or_else(|| null("test"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = test.inner.state();
        *out = PermbetState {
            t: s.t,
            losses: s.losses,
            log_wealth: s.log_wealth,
            p_value: s.p_value(),
            stop_reason: test.inner.stopped().into(),
        };
        Ok(())
    })
}

/// Log wealth of the binomial strategy after `t` rounds with `losses`
/// losses.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn permbet_binomial_log_wealth(t: u64, losses: u64, p: f64, out: *mut f64) -> PermbetStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if losses > t || !(p > 0.0 && p < 1.0) {
            return Err(fail(Error::InvalidParameter(format!("t={t}, losses={losses}, p={p}"))));
        }
        *out = binomial_wealth(t, losses, p);
        Ok(())
    })
}

/// Log wealth of the uniform-mixture strategy with cap `c`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn permbet_mixture_log_wealth(t: u64, losses: u64, c: f64, out: *mut f64) -> PermbetStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if losses > t || !(c > 0.0 && c <= 1.0) {
            return Err(fail(Error::InvalidParameter(format!("t={t}, losses={losses}, c={c}"))));
        }
        *out = mixture_uniform_wealth(t, losses, c);
        Ok(())
    })
}

/// Permutation p-value `(1 + losses)/(1 + horizon)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn permbet_perm_pvalue(losses: u64, horizon: u64, out: *mut f64) -> PermbetStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if losses > horizon {
            return Err(fail(Error::InvalidParameter(format!("losses={losses} > horizon={horizon}"))));
        }
        *out = ratio(perm_pvalue(losses, horizon));
        Ok(())
    })
}

/// Anytime-valid permutation p-value at time `tau`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn permbet_anytime_perm_pvalue(
    losses: u64,
    tau: u64,
    horizon: u64,
    out: *mut f64,
) -> PermbetStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if losses > tau || tau > horizon {
            return Err(fail(Error::InvalidParameter(format!(
                "need losses <= tau <= horizon, got {losses}, {tau}, {horizon}"
            ))));
        }
        *out = ratio(anytime_perm_pvalue(losses, tau, horizon));
        Ok(())
    })
}

/// Anytime-valid Besag-Clifford p-value at time `tau`; `t_max` zero means
/// no cap.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn permbet_anytime_bc_pvalue(
    losses: u64,
    tau: u64,
    t_max: u64,
    h: u64,
    out: *mut f64,
) -> PermbetStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if h == 0 || losses > tau || losses > h {
            return Err(fail(Error::InvalidParameter(format!("h={h}, losses={losses}, tau={tau}"))));
        }
        *out = ratio(anytime_bc_pvalue(losses, tau, (t_max > 0).then_some(t_max), h));
        Ok(())
    })
}

/// Besag-Clifford p-value for `n` indicator bytes (nonzero = loss).
/// `stop_time` may be null.
///
/// # Safety
/// `bits` must point to `n` readable bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn permbet_bc_pvalue(
    bits: *const u8,
    n: usize,
    h: u64,
    horizon: u64,
    out: *mut f64,
    stop_time: *mut u64,
) -> PermbetStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let bits: &[u8] = if n == 0 {
            &[]
        } else if bits.is_null() {
            return Err(null("bits"));
        } else {
            std::slice::from_raw_parts(bits, n)
        };
        let ind: Vec<Indicator> = bits.iter().map(|&b| Indicator::from(b != 0)).collect();
        let r = bc_pvalue(&ind, h, horizon).map_err(fail)?;
        *out = r.p_f64();
        if let Some(s) = stop_time.as_mut() {
            *s = r.stop_time;
        }
        Ok(())
    })
}

fn ratio(r: num_rational::Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

//! C ABI over the trendsense estimators.
//!
//! Objects are exposed as opaque handles created by `ts_*_new`/`ts_*_load`
//! style functions and released with the matching `ts_*_free`. Every fallible
//! function returns a [`TsStatus`]; on failure a message is available from
//! [`ts_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use trendsense::did::{att_dml, AttEstimate};
use trendsense::learners::{crossfit, LearnerSpec};
use trendsense::multi::{att_gt, GroupTimeSpec};
use nalgebra::DMatrix;
use trendsense::panel::{canonical_2x2, load_csv, ControlGroup, CsvSchema, FirstTreatment, PanelDataset};
use trendsense::sensitivity::{adjusted_bounds, elements, robustness_value, robustness_value_a, Scenario};
use trendsense::{Error, ErrorKind};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid data or arguments.
    InvalidInput = 2,
    /// Estimation could not proceed (singular design, degenerate groups, ...).
    Degenerate = 3,
    Io = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsControl {
    NeverTreated = 0,
    NotYetTreated = 1,
}

/// Violation scenario; `cf_d` in the bounded form.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsScenario {
    pub cf_y: f64,
    pub cf_d: f64,
    pub rho: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TsBounds {
    pub theta: f64,
    pub se: f64,
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub se_minus: f64,
    pub se_plus: f64,
    pub ell_minus: f64,
    pub u_plus: f64,
}

/// Opaque panel handle.
pub struct TsPanel {
    inner: PanelDataset,
}

/// Opaque estimate handle.
pub struct TsEstimate {
    inner: AttEstimate,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> TsStatus {
    match e.kind() {
        ErrorKind::Input => TsStatus::InvalidInput,
        ErrorKind::Degenerate => TsStatus::Degenerate,
        ErrorKind::Io => TsStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (TsStatus, String)>) -> TsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TsStatus::Internal
        }
    }
}

fn lift(e: Error) -> (TsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (TsStatus, String) {
    (TsStatus::NullPointer, "null pointer argument".into())
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, (TsStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TsStatus::InvalidInput, "string is not valid UTF-8".into()))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn ts_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a long-format CSV panel.
///
/// `schema_json` maps column names (see the CLI documentation); pass NULL for
/// `unit,time,y,g` without covariates.
///
/// # Safety
/// `path` and a non-null `schema_json` must be NUL-terminated strings; `out`
/// must be writable. The handle written to `out` must be released with
/// [`ts_panel_free`].
#[no_mangle]
pub unsafe extern "C" fn ts_panel_load_csv(
    path: *const c_char,
    schema_json: *const c_char,
    out: *mut *mut TsPanel,
) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let path = c_str(path)?;
        let schema: CsvSchema = if schema_json.is_null() {
            CsvSchema::default()
        } else {
            serde_json::from_str(c_str(schema_json)?).map_err(|e| lift(e.into()))?
        };
        let ds = load_csv(path, &schema).map_err(lift)?;
        *out = Box::into_raw(Box::new(TsPanel { inner: ds }));
        Ok(())
    })
}

/// Builds a panel from row-major arrays.
///
/// `outcomes` is `n_units × n_periods`, `covariates` is `n_units × n_cov`
/// (may be NULL when `n_cov` is 0) and `first_treatment[i]` is the first
/// treated period of unit `i`, or 0 for never treated. Units are labelled
/// `0..n_units`.
///
/// # Safety
/// All non-null pointers must reference arrays of the stated lengths; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_panel_from_arrays(
    n_units: usize,
    n_periods: usize,
    periods: *const i64,
    outcomes: *const f64,
    n_cov: usize,
    covariates: *const f64,
    first_treatment: *const i64,
    out: *mut *mut TsPanel,
) -> TsStatus {
    guard(|| {
        if out.is_null() || periods.is_null() || outcomes.is_null() || first_treatment.is_null() {
            return Err(null());
        }
        if n_cov > 0 && covariates.is_null() {
            return Err(null());
        }
        let periods = std::slice::from_raw_parts(periods, n_periods).to_vec();
        let y = std::slice::from_raw_parts(outcomes, n_units * n_periods);
        let x: &[f64] = if n_cov == 0 { &[] } else { std::slice::from_raw_parts(covariates, n_units * n_cov) };
        let g = std::slice::from_raw_parts(first_treatment, n_units)
            .iter()
            .map(|&g| if g == 0 { FirstTreatment::Never } else { FirstTreatment::At(g) })
            .collect();
        let ds = PanelDataset::new(
            (0..n_units).map(|i| i.to_string()).collect(),
            periods,
            DMatrix::from_row_slice(n_units, n_periods, y),
            (1..=n_cov).map(|j| format!("x{j}")).collect(),
            DMatrix::from_row_slice(n_units, n_cov, x),
            g,
            None,
        )
        .map_err(lift)?;
        *out = Box::into_raw(Box::new(TsPanel { inner: ds }));
        Ok(())
    })
}

/// # Safety
/// `panel` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_panel_free(panel: *mut TsPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// # Safety
/// `panel` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_panel_n_units(panel: *const TsPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.inner.n_units())
}

/// # Safety
/// `panel` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_panel_n_periods(panel: *const TsPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.inner.n_periods())
}

fn learner(folds: usize, seed: u64) -> LearnerSpec {
    LearnerSpec { folds, seed, ..LearnerSpec::default() }
}

/// ATT on a two-period panel with OLS/logit learners and `folds`-fold
/// cross-fitting.
///
/// # Safety
/// `panel` must be a live handle and `out` writable. Free the result with
/// [`ts_estimate_free`].
#[no_mangle]
pub unsafe extern "C" fn ts_estimate_2x2(
    panel: *const TsPanel,
    folds: usize,
    seed: u64,
    normalized: bool,
    out: *mut *mut TsEstimate,
) -> TsStatus {
    guard(|| {
        let panel = panel.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let view = canonical_2x2(&panel.inner).map_err(lift)?;
        let fit = crossfit(&view, &learner(folds, seed)).map_err(lift)?;
        let est = att_dml(&fit, normalized).map_err(lift)?;
        *out = Box::into_raw(Box::new(TsEstimate { inner: est }));
        Ok(())
    })
}

/// Group-time ATT for cohort `g` at `t_eval` with the standard base period.
///
/// # Safety
/// `panel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ts_estimate_gt(
    panel: *const TsPanel,
    g: i64,
    t_eval: i64,
    delta: usize,
    control: TsControl,
    folds: usize,
    seed: u64,
    normalized: bool,
    out: *mut *mut TsEstimate,
) -> TsStatus {
    guard(|| {
        let panel = panel.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let control = match control {
            TsControl::NeverTreated => ControlGroup::NeverTreated,
            TsControl::NotYetTreated => ControlGroup::NotYetTreated,
        };
        let spec = GroupTimeSpec::with_base_period(&panel.inner, g, t_eval, delta, control).map_err(lift)?;
        let res = att_gt(&panel.inner, &spec, &learner(folds, seed), normalized, seed).map_err(lift)?;
        *out = Box::into_raw(Box::new(TsEstimate { inner: res.estimate }));
        Ok(())
    })
}

/// # Safety
/// `est` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_estimate_free(est: *mut TsEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Point estimate and standard error.
///
/// # Safety
/// `est` must be a live handle; `theta` and `se` writable.
#[no_mangle]
pub unsafe extern "C" fn ts_estimate_values(est: *const TsEstimate, theta: *mut f64, se: *mut f64) -> TsStatus {
    guard(|| {
        let est = est.as_ref().ok_or_else(null)?;
        if theta.is_null() || se.is_null() {
            return Err(null());
        }
        *theta = est.inner.theta;
        *se = est.inner.se;
        Ok(())
    })
}

/// Bias-adjusted bounds under `scenario` at one-sided confidence `level`.
///
/// # Safety
/// `est` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ts_sensitivity_bounds(
    est: *const TsEstimate,
    scenario: TsScenario,
    level: f64,
    out: *mut TsBounds,
) -> TsStatus {
    guard(|| {
        let est = est.as_ref().ok_or_else(null)?;
        let out = out.as_mut().ok_or_else(null)?;
        let el = elements(&est.inner).map_err(lift)?;
        let sc = Scenario::new(scenario.cf_y, scenario.cf_d, scenario.rho, "").map_err(lift)?;
        let b = adjusted_bounds(&el, &sc, level).map_err(lift)?;
        *out = TsBounds {
            theta: el.theta,
            se: el.se,
            theta_minus: b.theta_minus,
            theta_plus: b.theta_plus,
            se_minus: b.se_minus,
            se_plus: b.se_plus,
            ell_minus: b.ell_minus,
            u_plus: b.u_plus,
        };
        Ok(())
    })
}

/// Robustness value for the null `h0`; with `level` in (0, 1) the
/// uncertainty-adjusted variant, with `level` = 0 the point version.
///
/// # Safety
/// `est` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ts_robustness_value(
    est: *const TsEstimate,
    h0: f64,
    rho: f64,
    level: f64,
    out: *mut f64,
) -> TsStatus {
    guard(|| {
        let est = est.as_ref().ok_or_else(null)?;
        let out = out.as_mut().ok_or_else(null)?;
        let el = elements(&est.inner).map_err(lift)?;
        *out = if level == 0.0 {
            robustness_value(&el, h0, rho)
        } else {
            robustness_value_a(&el, h0, rho, level)
        }
        .map_err(lift)?;
        Ok(())
    })
}

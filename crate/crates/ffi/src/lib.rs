//! C ABI over the sumtrace campaign store, mutation planner and statistics.
//!
//! Conventions:
//! - Every fallible call returns an [`StStatus`]; results go through out
//!   pointers. On failure the out pointer is left untouched and
//!   [`st_last_error_message`] describes the error.
//! - Handles are opaque and must be released with their `_free` function.
//! - Strings returned through `char **` are owned by the caller and must be
//!   released with [`st_string_free`].
//! - Panics never cross the boundary; they surface as `ST_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use sumtrace::analytics::stats::{self, ContingencyTable, Confusion, StatsError};
use sumtrace::corpus::{Origin, Program};
use sumtrace::mutation::{generate_plan, EngineOptions, MutationError, Quota};
use sumtrace::store::{Store, StoreError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    NotACampaign = 5,
    Locked = 6,
    Phase = 7,
    Integrity = 8,
    Syntax = 9,
    Statistics = 10,
    Panic = 11,
}

/// Mirrors the core result; `degrees_of_freedom` is -1 and `effect_size`
/// is NaN where undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StStatResult {
    pub statistic: f64,
    pub degrees_of_freedom: i64,
    pub p_value: f64,
    pub effect_size: f64,
    pub n: u64,
}

/// Opaque campaign handle.
pub struct StCampaign {
    store: Store,
}

/// Opaque program handle.
pub struct StProgram {
    program: Program,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(StStatus, String);

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::Io { .. } => StStatus::Io,
            StoreError::NotACampaign(_) => StStatus::NotACampaign,
            StoreError::Locked(_) => StStatus::Locked,
            StoreError::Phase(_) => StStatus::Phase,
            StoreError::Integrity(_) => StStatus::Integrity,
            _ => StStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        Failure(StStatus::Statistics, e.to_string())
    }
}

impl From<MutationError> for Failure {
    fn from(e: MutationError) -> Self {
        let status = match &e {
            MutationError::Syntax(_) => StStatus::Syntax,
            _ => StStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(StStatus::InvalidArgument, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> StStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside sumtrace");
            StStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(StStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(StStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(StStatus::InvalidArgument, "interior NUL in output".into()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn campaign_ref<'a>(c: *const StCampaign) -> Result<&'a StCampaign, Failure> {
    c.as_ref().ok_or_else(|| null("campaign"))
}

unsafe fn program_ref<'a>(p: *const StProgram) -> Result<&'a StProgram, Failure> {
    p.as_ref().ok_or_else(|| null("program"))
}

fn to_c(r: stats::StatResult) -> StStatResult {
    StStatResult {
        statistic: r.statistic,
        degrees_of_freedom: r.degrees_of_freedom.map(|d| d as i64).unwrap_or(-1),
        p_value: r.p_value,
        effect_size: r.effect_size.map(|e| e.value).unwrap_or(f64::NAN),
        n: r.n,
    }
}

/// Library version, statically allocated. Do not free.
#[no_mangle]
pub extern "C" fn st_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or "" if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn st_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn st_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opens a campaign directory. A writable open takes the campaign lock and
/// fails with `ST_STATUS_LOCKED` while another writer holds it.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_campaign_open(
    path: *const c_char,
    read_only: bool,
    out: *mut *mut StCampaign,
) -> StStatus {
    guard(|| {
        let path = Path::new(str_arg(path, "path")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let store = if read_only {
            Store::open_read_only(path)?
        } else {
            Store::open(path)?
        };
        *out = Box::into_raw(Box::new(StCampaign { store }));
        Ok(())
    })
}

/// Releases the handle and its lock.
///
/// # Safety
/// `c` must be null or a handle from [`st_campaign_open`], freed once.
#[no_mangle]
pub unsafe extern "C" fn st_campaign_free(c: *mut StCampaign) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Current phase name, e.g. "Mutated".
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_campaign_phase(c: *const StCampaign, out: *mut *mut c_char) -> StStatus {
    guard(|| {
        let c = campaign_ref(c)?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_string(out, c.store.phase().to_string())
    })
}

/// Runs the integrity check. `*clean` is set either way; `out_json`, when
/// non-null, receives the findings.
///
/// # Safety
/// `c` must be a live handle; `clean` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_campaign_verify(
    c: *const StCampaign,
    clean: *mut bool,
    out_json: *mut *mut c_char,
) -> StStatus {
    guard(|| {
        let c = campaign_ref(c)?;
        if clean.is_null() {
            return Err(null("clean"));
        }
        let report = c.store.integrity_check();
        *clean = report.is_clean();
        if !out_json.is_null() {
            put_string(out_json, serde_json::to_string(&report)?)?;
        }
        Ok(())
    })
}

/// Review progress as JSON (the `/progress` endpoint body).
///
/// # Safety
/// `c` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_campaign_progress_json(c: *const StCampaign, out_json: *mut *mut c_char) -> StStatus {
    guard(|| {
        let c = campaign_ref(c)?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let p = sumtrace::review::progress(&c.store).map_err(|e| Failure(StStatus::InvalidArgument, e.to_string()))?;
        put_string(out_json, serde_json::to_string(&p)?)
    })
}

/// Parses and classifies a Python program.
///
/// # Safety
/// `id` and `source` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_program_new(
    id: *const c_char,
    source: *const c_char,
    out: *mut *mut StProgram,
) -> StStatus {
    guard(|| {
        let id = str_arg(id, "id")?;
        let source = str_arg(source, "source")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let program = Program::from_source(id, source, Origin::Custom, None)
            .map_err(|r| Failure(StStatus::Syntax, r.reason))?;
        *out = Box::into_raw(Box::new(StProgram { program }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`st_program_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn st_program_free(p: *mut StProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Effective lines of code.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_program_loc(p: *const StProgram, out: *mut usize) -> StStatus {
    guard(|| {
        let p = program_ref(p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = p.program.loc;
        Ok(())
    })
}

/// Complexity category name: "SF", "SC", "MC" or "MT".
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_program_complexity(p: *const StProgram, out: *mut *mut c_char) -> StStatus {
    guard(|| {
        let p = program_ref(p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_string(out, p.program.complexity.to_string())
    })
}

/// Mutation plan as JSON. `quota` uses the CLI syntax ("3" or
/// "stmt_b=2,val=1"); null means one per cell.
///
/// # Safety
/// `p` must be a live handle; `quota` null or NUL-terminated; `out_json`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn st_program_plan_json(
    p: *const StProgram,
    quota: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> StStatus {
    guard(|| {
        let p = program_ref(p)?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let quota = if quota.is_null() {
            Quota::uniform(1)
        } else {
            str_arg(quota, "quota")?
                .parse::<Quota>()
                .map_err(|e| Failure(StStatus::InvalidArgument, e.to_string()))?
        };
        let plan = generate_plan(&p.program, &quota, seed, &EngineOptions::default())?;
        put_string(out_json, serde_json::to_string(&plan)?)
    })
}

/// Pearson χ² on a row-major `rows × cols` table of counts.
///
/// # Safety
/// `counts` must point to `rows * cols` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_chi_square(
    counts: *const u64,
    rows: usize,
    cols: usize,
    out: *mut StStatResult,
) -> StStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(StStatus::InvalidArgument, "table too large".into()))?;
        let flat = slice_arg(counts, len, "counts")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let table = ContingencyTable::from_counts(flat.chunks(cols.max(1)).map(<[u64]>::to_vec).collect());
        *out = to_c(stats::chi_square(&table)?);
        Ok(())
    })
}

/// Cohen's κ for a 2×2 agreement table. `*agreement` (optional) receives
/// the observed agreement fraction.
///
/// # Safety
/// `kappa` must be writable; `agreement` null or writable.
#[no_mangle]
pub unsafe extern "C" fn st_cohens_kappa(
    both_positive: u64,
    a_positive_b_negative: u64,
    a_negative_b_positive: u64,
    both_negative: u64,
    kappa: *mut f64,
    agreement: *mut f64,
) -> StStatus {
    guard(|| {
        if kappa.is_null() {
            return Err(null("kappa"));
        }
        let c = Confusion::new([
            [both_positive, a_positive_b_negative],
            [a_negative_b_positive, both_negative],
        ]);
        *kappa = stats::cohens_kappa(&c)?;
        if !agreement.is_null() {
            *agreement = c.percent_agreement();
        }
        Ok(())
    })
}

/// Two-sided Mann–Whitney U.
///
/// # Safety
/// `a` and `b` must point to `n_a` and `n_b` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn st_mann_whitney_u(
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    out: *mut StStatResult,
) -> StStatus {
    guard(|| {
        let a = slice_arg(a, n_a, "a")?;
        let b = slice_arg(b, n_b, "b")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = to_c(stats::mann_whitney_u(a, b)?);
        Ok(())
    })
}

//! C ABI for `cmnet`.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns a [`CmnStatus`];
//! on failure, [`cmn_last_error`] describes the problem for the current
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cmnet::cli::ModelFile;
use cmnet::data::{load_csv, Dataset};
use cmnet::model::{ContextualStructure, StructureJson};
use cmnet::params::FitOptions;
use cmnet::scoring::{log_mpl, Kappa, KappaSpec, ScoreConfig, ScoredModel};
use cmnet::search::{kappa_sweep, SearchOptions};
use cmnet::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Capacity = 4,
    Structure = 5,
    ShapeMismatch = 6,
    NonConvergence = 7,
    Io = 8,
    Unfitted = 9,
    Panic = 99,
}

/// Opaque dataset handle.
pub struct CmnDataset(Dataset);

/// Opaque handle to a learned, fitted model.
pub struct CmnModel {
    scored: ScoredModel,
    names: Vec<String>,
    n: usize,
    alpha: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CmnStatus {
    match e {
        Error::Parse { .. } | Error::OutOfRange { .. } | Error::Format { .. } | Error::Csv(_) | Error::Json(_) => {
            CmnStatus::Parse
        }
        Error::InvalidArgument(_) | Error::EmptyDataset => CmnStatus::InvalidArgument,
        Error::Capacity { .. } => CmnStatus::Capacity,
        Error::Structure(_) => CmnStatus::Structure,
        Error::ShapeMismatch(_) => CmnStatus::ShapeMismatch,
        Error::NonConvergence { .. } => CmnStatus::NonConvergence,
        Error::Io(_) => CmnStatus::Io,
        Error::Unfitted => CmnStatus::Unfitted,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CmnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CmnStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CmnStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            CmnStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Lib(Error::InvalidArgument(format!("{what} is not valid UTF-8"))))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(v);
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cmn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Load a CSV file; non-integer columns are encoded as labels.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmn_dataset_from_csv(
    path: *const c_char,
    has_header: bool,
    out: *mut *mut CmnDataset,
) -> CmnStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let ds = load_csv(path, has_header, None)?;
        write_out(out, Box::into_raw(Box::new(CmnDataset(ds))), "out")
    })
}

/// Build a dataset from `n * d` row-major codes. `cardinalities` may be null,
/// in which case each is one more than the largest code in its column.
///
/// # Safety
/// `codes` must point to `n * d` values and `cardinalities`, if non-null, to
/// `d` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cmn_dataset_from_codes(
    codes: *const u32,
    n: usize,
    d: usize,
    cardinalities: *const usize,
    out: *mut *mut CmnDataset,
) -> CmnStatus {
    guard(|| {
        if codes.is_null() {
            return Err(Fail::Null("codes"));
        }
        let len = n
            .checked_mul(d)
            .ok_or_else(|| Error::InvalidArgument("n * d overflows".into()))?;
        let values = std::slice::from_raw_parts(codes, len).to_vec();
        let cards = if cardinalities.is_null() {
            (0..d)
                .map(|j| (0..n).map(|r| values[r * d + j]).max().map_or(1, |m| m as usize + 1))
                .collect()
        } else {
            std::slice::from_raw_parts(cardinalities, d).to_vec()
        };
        let ds = Dataset::new(values, cards)?;
        write_out(out, Box::into_raw(Box::new(CmnDataset(ds))), "out")
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn cmn_dataset_n(ds: *const CmnDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n())
}

/// Number of variables, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn cmn_dataset_d(ds: *const CmnDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.d())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cmn_dataset_free(ds: *mut CmnDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Learn and fit a model over a kappa grid.
///
/// `grid` is a comma-separated list such as `"eps,n^-1,0.01"`; null selects
/// the default grid. The returned model is the one with the highest BIC.
///
/// # Safety
/// `ds` must be a live dataset handle, `grid` null or NUL-terminated, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cmn_learn(
    ds: *const CmnDataset,
    grid: *const c_char,
    alpha: f64,
    out: *mut *mut CmnModel,
) -> CmnStatus {
    guard(|| {
        let ds = &deref(ds, "dataset")?.0;
        let specs = if grid.is_null() {
            KappaSpec::default_grid()
        } else {
            str_arg(grid, "grid")?
                .split(',')
                .map(|s| s.trim().parse::<KappaSpec>())
                .collect::<Result<Vec<_>, _>>()?
        };
        let sweep = kappa_sweep(ds, &specs, alpha, &SearchOptions::default(), &FitOptions::default())?;
        let model = CmnModel {
            scored: sweep.selected().clone(),
            names: ds.variable_names().to_vec(),
            n: ds.n(),
            alpha,
        };
        write_out(out, Box::into_raw(Box::new(model)), "out")
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cmn_model_free(m: *mut CmnModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of edges, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn cmn_model_edge_count(m: *const CmnModel) -> usize {
    m.as_ref().map_or(0, |m| m.scored.structure.graph().edge_count())
}

/// Total number of context elements, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn cmn_model_context_count(m: *const CmnModel) -> usize {
    m.as_ref().map_or(0, |m| m.scored.structure.context_element_count())
}

/// BIC divided by the sample size.
///
/// # Safety
/// `m` must be a live model handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cmn_model_sbic(m: *const CmnModel, out: *mut f64) -> CmnStatus {
    guard(|| write_out(out, deref(m, "model")?.scored.sbic, "out"))
}

/// Log-probability of one configuration of `len` codes.
///
/// # Safety
/// `m` must be a live model handle, `config` must point to `len` values,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cmn_model_log_prob(
    m: *const CmnModel,
    config: *const u32,
    len: usize,
    out: *mut f64,
) -> CmnStatus {
    guard(|| {
        let m = deref(m, "model")?;
        if config.is_null() {
            return Err(Fail::Null("config"));
        }
        let x = std::slice::from_raw_parts(config, len);
        let s = &m.scored.structure;
        if len != s.d() {
            return Err(Error::ShapeMismatch(format!("configuration has {len} values, model has {} variables", s.d())).into());
        }
        if let Some(j) = (0..len).find(|&j| x[j] as usize >= s.cardinalities()[j]) {
            return Err(Error::InvalidArgument(format!("code {} out of range for variable {j}", x[j])).into());
        }
        let lm = m.scored.model.as_ref().ok_or(Error::Unfitted)?;
        write_out(out, lm.log_prob(x), "out")
    })
}

/// Serialize the model in the CLI's model-file format. Release the string
/// with [`cmn_string_free`].
///
/// # Safety
/// `m` must be a live model handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cmn_model_to_json(m: *const CmnModel, out: *mut *mut c_char) -> CmnStatus {
    guard(|| {
        let m = deref(m, "model")?;
        let file = ModelFile::from_scored(&m.scored, &m.names, m.n, m.alpha);
        let text = serde_json::to_string_pretty(&file).map_err(Error::from)?;
        let c = CString::new(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        write_out(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cmn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Log marginal pseudo-likelihood of a structure given as JSON. `kappa`
/// uses the CLI syntax (`eps` or a number in `(0, 1]`); the context prior is
/// not included.
///
/// # Safety
/// `ds` must be a live dataset handle, the strings NUL-terminated, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cmn_log_mpl(
    ds: *const CmnDataset,
    structure_json: *const c_char,
    alpha: f64,
    kappa: *const c_char,
    out: *mut f64,
) -> CmnStatus {
    guard(|| {
        let ds = &deref(ds, "dataset")?.0;
        let json: StructureJson = serde_json::from_str(str_arg(structure_json, "structure_json")?).map_err(Error::from)?;
        let s = ContextualStructure::from_json(&json)?;
        let kappa: Kappa = str_arg(kappa, "kappa")?.parse()?;
        let cfg = ScoreConfig::new(alpha, kappa)?;
        write_out(out, log_mpl(ds, &s, &cfg)?.total, "out")
    })
}

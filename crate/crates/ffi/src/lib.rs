//! C interface to `gammacop`. Models and copulas are opaque handles; every
//! fallible call returns a [`GcStatus`] and writes its result through an out
//! pointer. After a failure, [`gc_last_error_message`] describes it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gammacop::copulas::CopulaModel;
use gammacop::densities::model_logpdf;
use gammacop::dependence::{kendall_tau_of, spearman_rho_of};
use gammacop::divisibility::check_infinite_divisibility;
use gammacop::polynomial::AffineModel;
use gammacop::sampling::{draw, RngSpec, SampleSpace};
use gammacop::specialfn::SeriesControl;
use gammacop::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GcStatus {
    Ok = 0,
    Argument = 1,
    Parse = 2,
    Domain = 3,
    Precondition = 4,
    Existence = 5,
    Model = 6,
    Convergence = 7,
    Numeric = 8,
    Io = 9,
    NullPointer = 10,
    Panic = 11,
}

/// `space` argument of [`gc_sample`]: draws from the model.
pub const GC_SPACE_GAMMA: u32 = 0;
/// `space` argument of [`gc_sample`]: draws from the Laplace copula.
pub const GC_SPACE_COPULA: u32 = 1;

/// Opaque model handle.
pub struct GcModel {
    inner: AffineModel,
}

/// Opaque copula handle.
pub struct GcCopula {
    inner: CopulaModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> GcStatus {
    match e {
        Error::Argument(_) => GcStatus::Argument,
        Error::Parse(_) => GcStatus::Parse,
        Error::Domain(_) => GcStatus::Domain,
        Error::Precondition(_) => GcStatus::Precondition,
        Error::Existence(_) => GcStatus::Existence,
        Error::Model(_) => GcStatus::Model,
        Error::Convergence { .. } => GcStatus::Convergence,
        Error::Numeric(_) => GcStatus::Numeric,
        Error::Io(_) => GcStatus::Io,
    }
}

struct NullPointer(&'static str);

enum Failure {
    Lib(Error),
    Null(NullPointer),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<NullPointer> for Failure {
    fn from(e: NullPointer) -> Self {
        Failure::Null(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> GcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            GcStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(NullPointer(what)))) => {
            set_error(&format!("null pointer: {what}"));
            GcStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic");
            GcStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, NullPointer> {
    p.as_ref().ok_or(NullPointer(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], NullPointer> {
    if p.is_null() {
        return Err(NullPointer(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(p: *mut T, v: T, what: &'static str) -> Result<(), NullPointer> {
    if p.is_null() {
        return Err(NullPointer(what));
    }
    p.write(v);
    Ok(())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread (empty after a success).
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn gc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a model from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_model_from_json(json: *const c_char, out: *mut *mut GcModel) -> GcStatus {
    guard(|| {
        if json.is_null() {
            return Err(NullPointer("json").into());
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| Error::Parse("model text is not UTF-8".into()))?;
        let model = AffineModel::from_json_str(text)?;
        write(out, Box::into_raw(Box::new(GcModel { inner: model })), "out")?;
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`gc_model_from_json`] and not be freed yet, or be null.
#[no_mangle]
pub unsafe extern "C" fn gc_model_free(model: *mut GcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Dimension of the model, 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gc_model_dimension(model: *const GcModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Infinite-divisibility verdict at tolerance `tol`.
///
/// # Safety
/// `model` must be a live handle and `divisible` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_model_check_divisible(model: *const GcModel, tol: f64, divisible: *mut bool) -> GcStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let r = check_infinite_divisibility(m.inner.poly(), tol)?;
        write(divisible, r.divisible, "divisible")?;
        Ok(())
    })
}

/// Log density at `x[0..len]`.
///
/// # Safety
/// `x` must point to `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_model_logpdf(model: *const GcModel, x: *const f64, len: usize, out: *mut f64) -> GcStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let x = slice(x, len, "x")?;
        let v = model_logpdf(&m.inner, x, &SeriesControl::default())?;
        write(out, v, "out")?;
        Ok(())
    })
}

/// Laplace copula of the model. With `force`, the divisibility gate is
/// replaced by a rectangle-mass check.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_copula_new(model: *const GcModel, force: bool, out: *mut *mut GcCopula) -> GcStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let c = if force { CopulaModel::build_forced(&m.inner)? } else { CopulaModel::build(&m.inner)? };
        write(out, Box::into_raw(Box::new(GcCopula { inner: c })), "out")?;
        Ok(())
    })
}

/// # Safety
/// `copula` must come from [`gc_copula_new`] and not be freed yet, or be null.
#[no_mangle]
pub unsafe extern "C" fn gc_copula_free(copula: *mut GcCopula) {
    if !copula.is_null() {
        drop(Box::from_raw(copula));
    }
}

/// # Safety
/// `v` must point to `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_copula_cdf(copula: *const GcCopula, v: *const f64, len: usize, out: *mut f64) -> GcStatus {
    guard(|| {
        let c = deref(copula, "copula")?;
        write(out, c.inner.cdf(slice(v, len, "v")?)?, "out")?;
        Ok(())
    })
}

/// # Safety
/// `v` must point to `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_copula_pdf(copula: *const GcCopula, v: *const f64, len: usize, out: *mut f64) -> GcStatus {
    guard(|| {
        let c = deref(copula, "copula")?;
        write(out, c.inner.pdf(slice(v, len, "v")?)?, "out")?;
        Ok(())
    })
}

/// `C(v2 | v1)` of a bivariate copula.
///
/// # Safety
/// `copula` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_copula_conditional(copula: *const GcCopula, v1: f64, v2: f64, out: *mut f64) -> GcStatus {
    guard(|| {
        let c = deref(copula, "copula")?;
        write(out, c.inner.conditional_cdf(v1, v2)?, "out")?;
        Ok(())
    })
}

/// Kendall's tau of a bivariate copula, closed form.
///
/// # Safety
/// `copula` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_kendall_tau(copula: *const GcCopula, out: *mut f64) -> GcStatus {
    guard(|| {
        let c = deref(copula, "copula")?;
        write(out, kendall_tau_of(&c.inner, &SeriesControl::default())?.value, "out")?;
        Ok(())
    })
}

/// Spearman's rho of a bivariate copula, closed form.
///
/// # Safety
/// `copula` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_spearman_rho(copula: *const GcCopula, out: *mut f64) -> GcStatus {
    guard(|| {
        let c = deref(copula, "copula")?;
        write(out, spearman_rho_of(&c.inner, &SeriesControl::default())?.value, "out")?;
        Ok(())
    })
}

/// Writes `count` draws row-major into `out`, which must hold
/// `out_len >= count * dimension` doubles.
///
/// # Safety
/// `model` must be a live handle and `out` point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gc_sample(
    model: *const GcModel,
    space: u32,
    count: usize,
    seed: u64,
    stream: u64,
    out: *mut f64,
    out_len: usize,
) -> GcStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let need = count.checked_mul(m.inner.dim()).ok_or_else(|| Error::Argument("sample size overflows".into()))?;
        if out_len < need {
            return Err(Error::Argument(format!("output buffer holds {out_len} values, {need} needed")).into());
        }
        if out.is_null() {
            return Err(NullPointer("out").into());
        }
        let sp = match space {
            GC_SPACE_GAMMA => SampleSpace::Gamma,
            GC_SPACE_COPULA => SampleSpace::Copula,
            other => return Err(Error::Argument(format!("unknown sample space {other}")).into()),
        };
        let data = draw(&m.inner, sp, count, RngSpec::with_stream(seed, stream))?;
        ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
        Ok(())
    })
}

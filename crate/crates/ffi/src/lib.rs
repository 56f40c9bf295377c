//! C ABI over the fbde library.
//!
//! Models are opaque `FbdeModel` handles. Every fallible call returns an
//! `FbdeStatus`; on failure the message is kept per thread and read back with
//! `fbde_last_error`. Cells are joint cell indices in row-major attribute order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fbde::data::build_initial;
use fbde::engine::{fbde_fit, FitConfig, LeveragingScheme, SchemeKind};
use fbde::model::Model;
use fbde::tabular::{AttributeSchema, Dataset};
use fbde::FbdeError;

/// Opaque handle to a fitted model.
pub struct FbdeModel {
    inner: Model,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FbdeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Degenerate = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FbdeSchemeKind {
    Exact = 0,
    Relative = 1,
    Constant = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &FbdeError) -> FbdeStatus {
    match err {
        FbdeError::Io(_) => FbdeStatus::Io,
        FbdeError::Json(_) | FbdeError::Csv(_) | FbdeError::Format(_) => FbdeStatus::Format,
        FbdeError::DegenerateMarginal(_)
        | FbdeError::DegenerateConditional(_)
        | FbdeError::AbsoluteContinuity(_)
        | FbdeError::UnrepresentedSensitive(_)
        | FbdeError::EmptyDataset => FbdeStatus::Degenerate,
        _ => FbdeStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(FbdeError),
}

impl From<FbdeError> for Fail {
    fn from(e: FbdeError) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FbdeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FbdeStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            FbdeStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            FbdeStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            FbdeStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(m: *const FbdeModel) -> Result<&'a FbdeModel, Fail> {
    m.as_ref().ok_or(Fail::Null("model"))
}

unsafe fn out_mut<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null("output"))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null("output buffer"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn boxed(model: Model) -> *mut FbdeModel {
    Box::into_raw(Box::new(FbdeModel { inner: model }))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fbde_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a model JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fbde_model_load(
    path: *const c_char,
    out: *mut *mut FbdeModel,
) -> FbdeStatus {
    guard(|| {
        let out = out_mut(out)?;
        let path = str_arg(path, "path")?;
        *out = boxed(Model::load(Path::new(path))?);
        Ok(())
    })
}

/// Parses a model from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fbde_model_from_json(
    json: *const c_char,
    out: *mut *mut FbdeModel,
) -> FbdeStatus {
    guard(|| {
        let out = out_mut(out)?;
        *out = boxed(Model::from_json(str_arg(json, "json")?)?);
        Ok(())
    })
}

/// Serializes a model. Free the result with `fbde_string_free`.
///
/// # Safety
/// `model` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fbde_model_to_json(
    model: *const FbdeModel,
    out: *mut *mut c_char,
) -> FbdeStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_mut(out)?;
        let text = m.inner.to_json()?;
        *out = CString::new(text)
            .map_err(|_| Fail::Arg("model JSON contains NUL".into()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by `fbde_model_to_json`.
#[no_mangle]
pub unsafe extern "C" fn fbde_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `model` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn fbde_model_free(model: *mut FbdeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fbde_model_num_rounds(
    model: *const FbdeModel,
    out: *mut usize,
) -> FbdeStatus {
    guard(|| {
        *out_mut(out)? = model_ref(model)?.inner.density.num_rounds();
        Ok(())
    })
}

/// Number of joint cells in the model's domain.
///
/// # Safety
/// `model` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fbde_model_num_cells(
    model: *const FbdeModel,
    out: *mut usize,
) -> FbdeStatus {
    guard(|| {
        *out_mut(out)? = model_ref(model)?.inner.density.schema().num_cells();
        Ok(())
    })
}

/// Number of sensitive groups.
///
/// # Safety
/// `model` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fbde_model_num_groups(
    model: *const FbdeModel,
    out: *mut usize,
) -> FbdeStatus {
    guard(|| {
        *out_mut(out)? = model_ref(model)?.inner.density.schema().num_groups();
        Ok(())
    })
}

/// Probability of one joint cell.
///
/// # Safety
/// `model` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fbde_model_density(
    model: *const FbdeModel,
    cell: usize,
    out: *mut f64,
) -> FbdeStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_mut(out)?;
        let cells = m.inner.density.schema().num_cells();
        if cell >= cells {
            return Err(Fail::Arg(format!(
                "cell {cell} out of range for {cells} cells"
            )));
        }
        *out = m.inner.density.density_at_cell(cell);
        Ok(())
    })
}

/// Representation rate of the model, from its stored normalizers.
///
/// # Safety
/// `model` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fbde_model_representation_rate(
    model: *const FbdeModel,
    out: *mut f64,
) -> FbdeStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out_mut(out)? = m.inner.density.representation_rate_via_normalizers()?;
        Ok(())
    })
}

/// Writes the sensitive marginal into `buf`, which must hold exactly
/// `fbde_model_num_groups` values.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fbde_model_sensitive_marginal(
    model: *const FbdeModel,
    buf: *mut f64,
    len: usize,
) -> FbdeStatus {
    guard(|| {
        let m = model_ref(model)?;
        let marginal = m.inner.density.sensitive_marginal();
        if len != marginal.len() {
            return Err(Fail::Arg(format!(
                "buffer holds {len} values, need {}",
                marginal.len()
            )));
        }
        slice_out(buf, len)?.copy_from_slice(&marginal);
        Ok(())
    })
}

/// Draws `n` joint cells from the model, deterministically in `seed`.
///
/// # Safety
/// `cells` must point to `n` writable values.
#[no_mangle]
pub unsafe extern "C" fn fbde_model_sample(
    model: *const FbdeModel,
    n: usize,
    seed: u64,
    cells: *mut usize,
) -> FbdeStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = slice_out(cells, n)?;
        let ds = m.inner.density.sample(n, seed)?;
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = ds.cell(i);
        }
        Ok(())
    })
}

/// Fits a model on categorical data given as joint cell indices.
///
/// `cards` lists each attribute's cardinality; attribute `sensitive` is the
/// sensitive one. `value` is the coefficient of the constant scheme and is
/// ignored otherwise. The bound on classifier outputs is ln 2 and Q0 uses
/// add-one smoothing.
///
/// # Safety
/// `cards` must point to `n_attrs` values, `cells` to `n_rows` values, and
/// `out` must be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn fbde_fit_cells(
    cards: *const usize,
    n_attrs: usize,
    sensitive: usize,
    cells: *const usize,
    n_rows: usize,
    kind: FbdeSchemeKind,
    tau: f64,
    value: f64,
    rounds: usize,
    seed: u64,
    out: *mut *mut FbdeModel,
) -> FbdeStatus {
    guard(|| {
        let out = out_mut(out)?;
        let cards = slice_arg(cards, n_attrs, "cards")?;
        let cells = slice_arg(cells, n_rows, "cells")?;
        let names: Vec<String> = (0..n_attrs).map(|i| format!("v{i}")).collect();
        let pairs: Vec<(&str, usize)> = names
            .iter()
            .map(String::as_str)
            .zip(cards.iter().copied())
            .collect();
        let schema = AttributeSchema::categorical(&pairs, sensitive, None)?;
        if let Some(&bad) = cells.iter().find(|&&c| c >= schema.num_cells()) {
            return Err(Fail::Arg(format!(
                "cell {bad} out of range for {} cells",
                schema.num_cells()
            )));
        }
        let data = Dataset::from_cells(schema, cells)?;
        let c = std::f64::consts::LN_2;
        let scheme = match kind {
            FbdeSchemeKind::Exact => LeveragingScheme::new(SchemeKind::Exact, tau, c)?,
            FbdeSchemeKind::Relative => LeveragingScheme::new(SchemeKind::Relative, tau, c)?,
            FbdeSchemeKind::Constant => LeveragingScheme::constant(value, tau, c)?,
        };
        let q0 = build_initial(&data, 1.0)?;
        let cfg = FitConfig::new(rounds, scheme, seed);
        let fit = fbde_fit(&data, q0, &cfg)?;
        *out = boxed(Model {
            density: fit.density,
            scheme: Some(scheme),
            manifest: None,
        });
        Ok(())
    })
}

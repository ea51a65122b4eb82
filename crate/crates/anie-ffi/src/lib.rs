//! C interface: opaque handles over the estimation pipeline.
//!
//! Conventions:
//! - constructors return a pointer, null on failure; query the failure with
//!   [`anie_last_error_message`];
//! - every other call returns an [`AnieStatus`] code;
//! - handles are freed exactly once with their matching `_free` function;
//! - strings returned by the library are freed with [`anie_string_free`].
//!
//! The generated header lives at `include/anie.h`.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::path::Path;

use anie::anomaly::{ScoreSource, multiscale_score};
use anie::error::{Error, ErrorClass};
use anie::events::{Directedness, Event, EventStream, LoadOptions, load_events};
use anie::model::IntensityModel;
use anie::pipeline::{FitConfig, fit_stream, load_model, write_model_bundle};
use anie::synth::{dsbm_ground_truth, er_blocks_ground_truth, generate_network};

/// Result codes; aligned with the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnieStatus {
    Ok = 0,
    /// Invalid argument or misuse (null handle, bad parameter).
    Usage = 2,
    /// Input data could not be read or validated.
    Data = 3,
    /// Numeric failure inside the solver.
    Numeric = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<Vec<u8>>) {
    let c = CString::new(message).unwrap_or_else(|_| CString::new("invalid error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> AnieStatus {
    match err.class() {
        ErrorClass::Usage => AnieStatus::Usage,
        ErrorClass::Data => AnieStatus::Data,
        ErrorClass::Numeric => AnieStatus::Numeric,
    }
}

fn catch_status(f: impl FnOnce() -> Result<(), (AnieStatus, String)>) -> AnieStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AnieStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AnieStatus::Numeric
        }
    }
}

fn catch_ptr<T>(f: impl FnOnce() -> Result<*mut T, (AnieStatus, String)>) -> *mut T {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(p)) => p,
        Ok(Err((_, message))) => {
            set_error(message);
            std::ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic");
            std::ptr::null_mut()
        }
    }
}

fn err_pair(err: Error) -> (AnieStatus, String) {
    (status_of(&err), err.to_string())
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, (AnieStatus, String)> {
    if ptr.is_null() {
        return Err((AnieStatus::Usage, "null path".into()));
    }
    let s = unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| (AnieStatus::Usage, "path is not valid UTF-8".to_string()))?;
    Ok(Path::new(s))
}

/// Opaque event stream handle.
pub struct AnieEvents(EventStream);

/// Opaque fitted model handle.
pub struct AnieModel(IntensityModel);

/// Library version as a C string; the pointer is static.
#[unsafe(no_mangle)]
pub extern "C" fn anie_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread, or null when none.
/// Free with `anie_string_free`.
#[unsafe(no_mangle)]
pub extern "C" fn anie_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(c) => c.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed before.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Builds an event stream from parallel arrays of length `len`.
/// `directed = 0` mirrors every off-diagonal event.
///
/// # Safety
/// `us`, `vs`, `ts` must point to `len` readable elements.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_events_from_arrays(
    n_nodes: usize,
    horizon: f64,
    us: *const u32,
    vs: *const u32,
    ts: *const f64,
    len: usize,
    directed: i32,
) -> *mut AnieEvents {
    catch_ptr(|| {
        if len > 0 && (us.is_null() || vs.is_null() || ts.is_null()) {
            return Err((AnieStatus::Usage, "null event arrays".into()));
        }
        let events: Vec<Event> = (0..len)
            .map(|i| unsafe {
                Event {
                    u: *us.add(i),
                    v: *vs.add(i),
                    t: *ts.add(i),
                }
            })
            .collect();
        let directedness = if directed != 0 {
            Directedness::Directed
        } else {
            Directedness::UndirectedSymmetrized
        };
        let stream = EventStream::new(n_nodes, horizon, events, directedness).map_err(err_pair)?;
        Ok(Box::into_raw(Box::new(AnieEvents(stream))))
    })
}

/// Loads an edge-list CSV (header `u,v,t`), honoring a JSON sidecar when
/// present next to the file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_events_load_csv(path: *const c_char) -> *mut AnieEvents {
    catch_ptr(|| {
        let path = unsafe { path_arg(path) }?;
        let stream = load_events(path, &LoadOptions::default()).map_err(err_pair)?;
        Ok(Box::into_raw(Box::new(AnieEvents(stream))))
    })
}

/// Samples the ER-blocks generative model.
#[unsafe(no_mangle)]
pub extern "C" fn anie_simulate_er_blocks(
    n_nodes: usize,
    scale: f64,
    offset: f64,
    seed: u64,
) -> *mut AnieEvents {
    catch_ptr(|| {
        let truth = er_blocks_ground_truth(n_nodes, scale, offset).map_err(err_pair)?;
        let stream = generate_network(&truth, seed).map_err(err_pair)?;
        Ok(Box::into_raw(Box::new(AnieEvents(stream))))
    })
}

/// Samples the two-community DSBM.
#[unsafe(no_mangle)]
pub extern "C" fn anie_simulate_dsbm(
    n_nodes: usize,
    lambda_intra: f64,
    lambda_inter: f64,
    merge_start: f64,
    merge_end: f64,
    seed: u64,
) -> *mut AnieEvents {
    catch_ptr(|| {
        let truth = dsbm_ground_truth(
            n_nodes,
            lambda_intra,
            lambda_inter,
            (merge_start, merge_end),
        )
        .map_err(err_pair)?;
        let stream = generate_network(&truth, seed).map_err(err_pair)?;
        Ok(Box::into_raw(Box::new(AnieEvents(stream))))
    })
}

/// Number of events in the stream.
///
/// # Safety
/// `events` must be a live handle from this library.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_events_len(events: *const AnieEvents) -> usize {
    if events.is_null() {
        return 0;
    }
    unsafe { &*events }.0.len()
}

/// Node count of the stream.
///
/// # Safety
/// `events` must be a live handle from this library.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_events_n_nodes(events: *const AnieEvents) -> usize {
    if events.is_null() {
        return 0;
    }
    unsafe { &*events }.0.n_nodes()
}

/// Frees an event stream handle.
///
/// # Safety
/// `events` must come from this library and not have been freed before.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_events_free(events: *mut AnieEvents) {
    if !events.is_null() {
        drop(unsafe { Box::from_raw(events) });
    }
}

/// Fits the multiresolution intensity model: Haar basis with `levels` detail
/// levels, subspace rank `rank`, FDR level `alpha`.
///
/// # Safety
/// `events` must be a live handle from this library.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_fit(
    events: *const AnieEvents,
    levels: u32,
    rank: usize,
    alpha: f64,
    seed: u64,
) -> *mut AnieModel {
    catch_ptr(|| {
        if events.is_null() {
            return Err((AnieStatus::Usage, "null events handle".into()));
        }
        let stream = &unsafe { &*events }.0;
        let config = FitConfig {
            levels,
            rank,
            alpha,
            seed,
            ..FitConfig::default()
        };
        let output = fit_stream(stream, &config).map_err(err_pair)?;
        let model = output.into_model().map_err(err_pair)?;
        Ok(Box::into_raw(Box::new(AnieModel(model))))
    })
}

/// Subspace rank of a fitted model.
///
/// # Safety
/// `model` must be a live handle from this library.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_model_rank(model: *const AnieModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.0.subspace().rank()
}

/// Node count of a fitted model.
///
/// # Safety
/// `model` must be a live handle from this library.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_model_n_nodes(model: *const AnieModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.0.n_nodes()
}

/// Reconstructed intensity for pair `(u, v)` at time `t` in [0, 1].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_model_intensity(
    model: *const AnieModel,
    u: usize,
    v: usize,
    t: f64,
    out: *mut f64,
) -> AnieStatus {
    catch_status(|| {
        if model.is_null() || out.is_null() {
            return Err((AnieStatus::Usage, "null argument".into()));
        }
        let value = unsafe { &*model }
            .0
            .intensity_at(u, v, t)
            .map_err(err_pair)?;
        unsafe { *out = value };
        Ok(())
    })
}

/// Copies up to `cap` retained singular values into `out`; stores the number
/// written through `written`.
///
/// # Safety
/// `out` must have room for `cap` values; `written` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_model_singular_values(
    model: *const AnieModel,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> AnieStatus {
    catch_status(|| {
        if model.is_null() || (cap > 0 && out.is_null()) || written.is_null() {
            return Err((AnieStatus::Usage, "null argument".into()));
        }
        let sv = unsafe { &*model }.0.subspace().singular_values();
        let n = sv.len().min(cap);
        for (i, &v) in sv.iter().take(n).enumerate() {
            unsafe { *out.add(i) = v };
        }
        unsafe { *written = n };
        Ok(())
    })
}

/// Writes the scale-`level` anomaly scores (one per dyadic cell, `2^level`
/// values) into `out`. `thresholded != 0` scores surviving coefficients
/// only; otherwise raw coefficients are used.
///
/// # Safety
/// `out` must have room for `cap` values; `written` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_model_anomaly_scores(
    model: *const AnieModel,
    level: u32,
    thresholded: i32,
    out: *mut f64,
    cap: usize,
    written: *mut usize,
) -> AnieStatus {
    catch_status(|| {
        if model.is_null() || (cap > 0 && out.is_null()) || written.is_null() {
            return Err((AnieStatus::Usage, "null argument".into()));
        }
        let m = &unsafe { &*model }.0;
        let source = if thresholded != 0 {
            ScoreSource::Thresholded
        } else {
            ScoreSource::Raw
        };
        let profile = multiscale_score(m.affinity(), m.basis(), source).map_err(err_pair)?;
        let scale = profile
            .scales
            .iter()
            .find(|s| s.level == level)
            .ok_or((AnieStatus::Usage, format!("no scale {level} in model")))?;
        let n = scale.scores.len().min(cap);
        for (i, &v) in scale.scores.iter().take(n).enumerate() {
            unsafe { *out.add(i) = v };
        }
        unsafe { *written = n };
        Ok(())
    })
}

/// Saves the fitted model as a bundle directory (subspace.csv, scree.csv,
/// affinity.json, mask.json, manifest.json).
///
/// # Safety
/// `model` must be a live handle; `dir` a valid NUL-terminated string.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_model_save(
    model: *const AnieModel,
    dir: *const c_char,
) -> AnieStatus {
    catch_status(|| {
        if model.is_null() {
            return Err((AnieStatus::Usage, "null model handle".into()));
        }
        let dir = unsafe { path_arg(dir) }?;
        let m = &unsafe { &*model }.0;
        let config = FitConfig {
            levels: m.basis().haar_levels().unwrap_or(0),
            rank: m.subspace().rank(),
            alpha: m.affinity().alpha,
            seed: 0,
            ..FitConfig::default()
        };
        write_model_bundle(dir, m, &config, 0).map_err(err_pair)?;
        Ok(())
    })
}

/// Loads a fitted model from a bundle directory.
///
/// # Safety
/// `dir` must be a valid NUL-terminated string.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_model_load(dir: *const c_char) -> *mut AnieModel {
    catch_ptr(|| {
        let dir = unsafe { path_arg(dir) }?;
        let model = load_model(dir).map_err(err_pair)?;
        Ok(Box::into_raw(Box::new(AnieModel(model))))
    })
}

/// Frees a model handle.
///
/// # Safety
/// `model` must come from this library and not have been freed before.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn anie_model_free(model: *mut AnieModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

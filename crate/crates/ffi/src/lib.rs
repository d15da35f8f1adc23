//! C ABI over `gaze_concepts`.
//!
//! Every fallible function returns a [`GciStatus`]; on failure the message is
//! kept per thread and read with [`gci_last_error_message`]. Handles are
//! opaque and must be released with their matching `*_free` function.
//! Missing samples are passed as NaN.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use gaze_concepts::config::PipelineConfig;
use gaze_concepts::detect::{self, DetectionParams, EventKind, GazeEvent};
use gaze_concepts::error::Error;
use gaze_concepts::influence::{self, ConceptSegmentation};
use gaze_concepts::io::RunManifest;
use gaze_concepts::pipeline::{self, RunResults};
use gaze_concepts::preprocess::{self, SavGolParams, VelocityWindow};
use gaze_concepts::report::{self, OutputOptions};

/// Result of every fallible call. Codes 1 to 3 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GciStatus {
    Ok = 0,
    Config = 1,
    Data = 2,
    Io = 3,
    NullPointer = 4,
    /// The concept covers no sample of the window.
    EmptyConcept = 5,
    /// The buffer passed in is too small; the call reports the needed size.
    BufferTooSmall = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> GciStatus {
    match e.root() {
        Error::EmptyConcept { .. } => GciStatus::EmptyConcept,
        _ => match e.exit_code() {
            1 => GciStatus::Config,
            3 => GciStatus::Io,
            _ => GciStatus::Data,
        },
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), GciStatus>) -> GciStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GciStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            GciStatus::Panic
        }
    }
}

fn fail(e: Error) -> GciStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> GciStatus {
    set_error(format!("{what} is null"));
    GciStatus::NullPointer
}

/// Borrows `n` elements, allowing a null pointer only when `n == 0`.
unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], GciStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], GciStatus> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, GciStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map(PathBuf::from).map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        GciStatus::Config
    })
}

/// Copies `s` plus a terminating NUL into `buf` if it fits. Returns the
/// number of bytes needed including the NUL.
unsafe fn copy_out(s: &str, buf: *mut c_char, len: usize) -> usize {
    let needed = s.len() + 1;
    if !buf.is_null() && len >= needed {
        ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), buf, s.len());
        *buf.add(s.len()) = 0;
    }
    needed
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gci_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` and returns
/// the size needed (0 when there is no error). Call with a null `buf` to
/// query the size.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gci_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(msg) => copy_out(msg.to_str().unwrap_or(""), buf, len),
        None => 0,
    })
}

/// Savitzky-Golay first derivative (units per second) of `n` positions.
///
/// # Safety
/// `positions` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn gci_savgol_derivative(
    positions: *const f64,
    n: usize,
    window_length: usize,
    poly_order: usize,
    dt_s: f64,
    out: *mut f64,
) -> GciStatus {
    guard(|| {
        let p = slice(positions, n, "positions")?;
        let o = slice_mut(out, n, "out")?;
        let params = SavGolParams { window_length, poly_order, dt_s };
        let v = preprocess::savgol_derivative(p, params).map_err(fail)?;
        o.copy_from_slice(&v);
        Ok(())
    })
}

/// Detection thresholds; see [`gci_detection_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GciDetectionParams {
    pub fix_max_velocity: f64,
    pub fix_min_duration_ms: f64,
    pub fix_max_dispersion_deg: f64,
    pub sacc_lambda: f64,
    pub sacc_min_duration_ms: f64,
    pub sacc_max_duration_ms: f64,
    pub sacc_min_peak_velocity: f64,
    pub sacc_max_peak_velocity: f64,
    pub eta_floor: f64,
}

impl From<DetectionParams> for GciDetectionParams {
    fn from(p: DetectionParams) -> Self {
        Self {
            fix_max_velocity: p.fix_max_velocity,
            fix_min_duration_ms: p.fix_min_duration_ms,
            fix_max_dispersion_deg: p.fix_max_dispersion_deg,
            sacc_lambda: p.sacc_lambda,
            sacc_min_duration_ms: p.sacc_min_duration_ms,
            sacc_max_duration_ms: p.sacc_max_duration_ms,
            sacc_min_peak_velocity: p.sacc_min_peak_velocity,
            sacc_max_peak_velocity: p.sacc_max_peak_velocity,
            eta_floor: p.eta_floor,
        }
    }
}

impl From<GciDetectionParams> for DetectionParams {
    fn from(p: GciDetectionParams) -> Self {
        Self {
            fix_max_velocity: p.fix_max_velocity,
            fix_min_duration_ms: p.fix_min_duration_ms,
            fix_max_dispersion_deg: p.fix_max_dispersion_deg,
            sacc_lambda: p.sacc_lambda,
            sacc_min_duration_ms: p.sacc_min_duration_ms,
            sacc_max_duration_ms: p.sacc_max_duration_ms,
            sacc_min_peak_velocity: p.sacc_min_peak_velocity,
            sacc_max_peak_velocity: p.sacc_max_peak_velocity,
            eta_floor: p.eta_floor,
        }
    }
}

#[no_mangle]
pub extern "C" fn gci_detection_params_default() -> GciDetectionParams {
    DetectionParams::default().into()
}

/// Adaptive saccade thresholds `lambda * sigma` per component.
///
/// # Safety
/// `vx` and `vy` must hold `n` doubles; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn gci_ek_threshold(
    vx: *const f64,
    vy: *const f64,
    n: usize,
    lambda: f64,
    eta_floor: f64,
    eta_x: *mut f64,
    eta_y: *mut f64,
) -> GciStatus {
    guard(|| {
        let (x, y) = (slice(vx, n, "vx")?, slice(vy, n, "vy")?);
        if eta_x.is_null() || eta_y.is_null() {
            return Err(null("eta output"));
        }
        let mask: Vec<bool> = x.iter().zip(y).map(|(a, b)| !a.is_nan() && !b.is_nan()).collect();
        let (ex, ey) = detect::ek_noise_threshold(x, y, &mask, lambda, eta_floor).map_err(fail)?;
        *eta_x = ex;
        *eta_y = ey;
        Ok(())
    })
}

/// One detected event. Unavailable properties are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GciEvent {
    /// 0 fixation, 1 saccade.
    pub kind: u32,
    pub onset: usize,
    pub offset: usize,
    pub duration_ms: f64,
    pub peak_velocity: f64,
    pub amplitude_deg: f64,
    pub dispersion_deg: f64,
    pub velocity_std: f64,
    /// 0 when retained; otherwise the first failed bound (1 min duration,
    /// 2 max duration, 3 min peak velocity, 4 max peak velocity, 5 max
    /// dispersion).
    pub exclusion: u32,
}

/// Events detected in one window.
pub struct GciEvents {
    events: Vec<GciEvent>,
}

fn to_c_event(e: &GazeEvent) -> GciEvent {
    use detect::ExclusionReason as R;
    GciEvent {
        kind: u32::from(e.kind == EventKind::Saccade),
        onset: e.onset,
        offset: e.offset,
        duration_ms: e.duration_ms,
        peak_velocity: e.peak_velocity.unwrap_or(f64::NAN),
        amplitude_deg: e.amplitude_deg.unwrap_or(f64::NAN),
        dispersion_deg: e.dispersion_deg.unwrap_or(f64::NAN),
        velocity_std: e.velocity_std.unwrap_or(f64::NAN),
        exclusion: match e.exclusion {
            None => 0,
            Some(R::MinDuration) => 1,
            Some(R::MaxDuration) => 2,
            Some(R::MinPeakVelocity) => 3,
            Some(R::MaxPeakVelocity) => 4,
            Some(R::MaxDispersion) => 5,
        },
    }
}

/// Fixations (I-VT) and saccades (Engbert-Kliegl) of one window of
/// velocities (deg/s) and positions (deg). `params` may be null for the
/// defaults. On success `*out` owns a handle for [`gci_events_free`].
///
/// # Safety
/// The four arrays must hold `n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gci_detect_events(
    vx: *const f64,
    vy: *const f64,
    px: *const f64,
    py: *const f64,
    n: usize,
    sampling_rate_hz: f64,
    params: *const GciDetectionParams,
    out: *mut *mut GciEvents,
) -> GciStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let (vx, vy) = (slice(vx, n, "vx")?, slice(vy, n, "vy")?);
        let (px, py) = (slice(px, n, "px")?, slice(py, n, "py")?);
        let p: DetectionParams = if params.is_null() { DetectionParams::default() } else { (*params).into() };
        p.validate().map_err(fail)?;
        if !(sampling_rate_hz > 0.0) {
            return Err(fail(Error::Config(format!("sampling rate must be positive, got {sampling_rate_hz}"))));
        }
        let window = VelocityWindow {
            window_id: "ffi/w0000".into(),
            recording_id: "ffi".into(),
            start_index: 0,
            sampling_rate_hz,
            vx: vx.to_vec(),
            vy: vy.to_vec(),
            px: px.to_vec(),
            py: py.to_vec(),
            valid_mask: vx.iter().zip(vy).map(|(a, b)| !a.is_nan() && !b.is_nan()).collect(),
            normalized: false,
            norm_stats: None,
        };
        let events = detect::detect_events(&window, &p).map_err(fail)?;
        *out = Box::into_raw(Box::new(GciEvents { events: events.iter().map(to_c_event).collect() }));
        Ok(())
    })
}

/// # Safety
/// `events` must be null or a live handle from [`gci_detect_events`].
#[no_mangle]
pub unsafe extern "C" fn gci_events_count(events: *const GciEvents) -> usize {
    events.as_ref().map_or(0, |e| e.events.len())
}

/// Copies event `index` into `out`.
///
/// # Safety
/// `events` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gci_events_get(events: *const GciEvents, index: usize, out: *mut GciEvent) -> GciStatus {
    guard(|| {
        let ev = events.as_ref().ok_or_else(|| null("events"))?;
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        *o = *ev.events.get(index).ok_or_else(|| {
            set_error(format!("event index {index} out of range ({})", ev.events.len()));
            GciStatus::Config
        })?;
        Ok(())
    })
}

/// # Safety
/// `events` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gci_events_free(events: *mut GciEvents) {
    if !events.is_null() {
        drop(Box::from_raw(events));
    }
}

/// Marks the `k` largest finite values in `mask_out` (1 marked, 0 not).
///
/// # Safety
/// `values` and `mask_out` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn gci_topk_mask(values: *const f64, n: usize, k: usize, mask_out: *mut u8) -> GciStatus {
    guard(|| {
        let v = slice(values, n, "values")?;
        let o = slice_mut(mask_out, n, "mask_out")?;
        let t = influence::topk_segmentation("ffi", v, k).map_err(fail)?;
        for (dst, m) in o.iter_mut().zip(&t.mask) {
            *dst = u8::from(*m);
        }
        Ok(())
    })
}

/// Influence `L * |S n T| / (|S| * k)` of a concept mask against a top-k
/// mask of the same length. Nonzero bytes count as marked.
///
/// # Safety
/// Both masks must hold `n` bytes; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn gci_concept_influence(
    concept_mask: *const u8,
    topk_mask: *const u8,
    n: usize,
    k: usize,
    c_out: *mut f64,
    intersection_out: *mut u64,
) -> GciStatus {
    guard(|| {
        let s = slice(concept_mask, n, "concept_mask")?;
        let t = slice(topk_mask, n, "topk_mask")?;
        if c_out.is_null() || intersection_out.is_null() {
            return Err(null("output"));
        }
        if k == 0 || k > n {
            return Err(fail(Error::Config(format!("top-k size {k} outside [1, {n}]"))));
        }
        let seg = ConceptSegmentation::from_mask("ffi", "concept", s.iter().map(|b| *b != 0).collect());
        let top = influence::TopKSegmentation { window_id: "ffi".into(), k, mask: t.iter().map(|b| *b != 0).collect() };
        let r = influence::concept_influence(&seg, &top).map_err(fail)?;
        *c_out = r.c;
        *intersection_out = r.intersection;
        Ok(())
    })
}

/// Results of a full pipeline run.
pub struct GciRun {
    results: RunResults,
    names: Vec<CString>,
}

/// Pooled influence of one concept over the run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GciConceptResult {
    pub c: f64,
    /// Mean of the per-window values.
    pub c_mean: f64,
    pub intersection: u64,
    pub l_total: u64,
    pub s_total: u64,
    pub k_total: u64,
    pub windows: usize,
    /// Windows where the concept was absent.
    pub skipped: usize,
}

/// Runs every stage for a manifest. `config_path` may be null, in which
/// case the manifest's config (or the defaults) applies; `jobs == 0` uses
/// all cores. On success `*out` owns a handle for [`gci_run_free`].
///
/// # Safety
/// Paths must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gci_run_open(
    manifest_path: *const c_char,
    config_path: *const c_char,
    jobs: usize,
    out: *mut *mut GciRun,
) -> GciStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let manifest = RunManifest::load(&path_arg(manifest_path, "manifest_path")?).map_err(fail)?;
        let config = if config_path.is_null() { manifest.config.clone() } else { Some(path_arg(config_path, "config_path")?) };
        let cfg = match config {
            Some(p) => PipelineConfig::load(&p).map_err(fail)?,
            None => PipelineConfig::default(),
        };
        let results = pipeline::run_pipeline(&manifest, &cfg, jobs).map_err(fail)?;
        let names = results
            .corpus_influence
            .iter()
            .map(|r| CString::new(r.concept.clone()).expect("concept labels have no NUL"))
            .collect();
        *out = Box::into_raw(Box::new(GciRun { results, names }));
        Ok(())
    })
}

/// Number of concepts with a pooled result.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gci_run_concept_count(run: *const GciRun) -> usize {
    run.as_ref().map_or(0, |r| r.names.len())
}

/// Name of concept `index`; valid until the handle is freed. Null when out
/// of range.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gci_run_concept_name(run: *const GciRun, index: usize) -> *const c_char {
    run.as_ref().and_then(|r| r.names.get(index)).map_or(ptr::null(), |n| n.as_ptr())
}

/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gci_run_concept(run: *const GciRun, index: usize, out: *mut GciConceptResult) -> GciStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        let res = r.results.corpus_influence.get(index).ok_or_else(|| {
            set_error(format!("concept index {index} out of range ({})", r.names.len()));
            GciStatus::Config
        })?;
        *o = GciConceptResult {
            c: res.c,
            c_mean: res.c_mean.unwrap_or(f64::NAN),
            intersection: res.intersection,
            l_total: res.l_total,
            s_total: res.s_total,
            k_total: res.k_total,
            windows: res.windows,
            skipped: res.skipped,
        };
        Ok(())
    })
}

/// Writes the summary JSON into `buf` and stores the size needed
/// (including the NUL) in `needed`. Returns `BufferTooSmall` when `buf`
/// is null or shorter than that.
///
/// # Safety
/// `run` must be a live handle, `buf` null or `len` writable bytes and
/// `needed` writable.
#[no_mangle]
pub unsafe extern "C" fn gci_run_report_json(
    run: *const GciRun,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> GciStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let json = report::summarize(&r.results).map_err(fail)?.to_json();
        let n = copy_out(&json, buf, len);
        if let Some(nd) = needed.as_mut() {
            *nd = n;
        }
        if buf.is_null() || len < n {
            set_error(format!("report needs {n} bytes"));
            return Err(GciStatus::BufferTooSmall);
        }
        Ok(())
    })
}

/// Writes report, tables, events and charts under `dir`.
///
/// # Safety
/// `run` must be a live handle and `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gci_run_write_outputs(run: *const GciRun, dir: *const c_char) -> GciStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let dir = path_arg(dir, "dir")?;
        report::write_outputs(&r.results, &dir, &OutputOptions::default()).map_err(fail)?;
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gci_run_free(run: *mut GciRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

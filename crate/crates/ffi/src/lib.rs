//! C ABI for the sptrack tracker.
//!
//! Images and trackers are opaque heap handles created and destroyed through
//! this API. Every fallible function returns an `SptStatus` (`SPT_OK` or a
//! negative error code); the message of the most recent failure on the
//! calling thread is available from [`spt_last_error_message`]. Panics are
//! caught at the boundary and reported as `SPT_ERR_PANIC`.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access the function
//! documents: input structs readable, output slots writable, strings
//! NUL-terminated, `data` readable for `len` bytes. Handles must come from
//! this library and must not be used after being freed.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use sptrack::harness::{center_error, iou};
use sptrack::motion::NoiseSpec;
use sptrack::{tracker, BoundingBox, Diagnostics, Error, ImageRgb, TrackerConfig, TrackerState};

/// Status code returned by fallible calls.
pub type SptStatus = i32;

pub const SPT_OK: SptStatus = 0;
/// A required pointer argument was null.
pub const SPT_ERR_NULL_POINTER: SptStatus = -1;
/// An argument was out of range or inconsistent (sizes, boxes, UTF-8).
pub const SPT_ERR_INVALID_ARGUMENT: SptStatus = -2;
/// A file could not be read or decoded.
pub const SPT_ERR_IO: SptStatus = -3;
pub const SPT_ERR_CONFIG: SptStatus = -4;
/// The tracker could not be initialized on the first frame.
pub const SPT_ERR_INIT: SptStatus = -5;
/// No candidate could be scored on a frame; the tracker is unchanged.
pub const SPT_ERR_TRACKING: SptStatus = -6;
pub const SPT_ERR_PANIC: SptStatus = -99;

/// Axis-aligned box covering pixels `x .. x + w - 1`, `y .. y + h - 1`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SptBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<SptBox> for BoundingBox {
    fn from(b: SptBox) -> Self {
        BoundingBox::new(b.x, b.y, b.w, b.h)
    }
}

impl From<BoundingBox> for SptBox {
    fn from(b: BoundingBox) -> Self {
        SptBox {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
        }
    }
}

/// Tracker parameters. Obtain defaults from [`spt_config_default`] and
/// change fields as needed.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SptConfig {
    pub template_width: u32,
    pub template_height: u32,
    pub superpixels: u32,
    pub compactness: f64,
    pub bins: u32,
    pub dictionary_size: u32,
    pub lambda: f64,
    pub particles: u32,
    pub negatives: u32,
    pub update_rate: u32,
    pub gamma: f64,
    pub threshold: f64,
    /// Random-walk standard deviations for x, y, rotation, scale, aspect, skew.
    pub sigmas: [f64; 6],
    pub rank_1: u32,
    pub rank_2: u32,
    pub rank_3: u32,
    pub forgetting: f64,
    pub annulus_inner: f64,
    pub annulus_outer: f64,
    pub rng_seed: u64,
}

impl From<&TrackerConfig> for SptConfig {
    fn from(c: &TrackerConfig) -> Self {
        let n = |v: usize| u32::try_from(v).unwrap_or(u32::MAX);
        SptConfig {
            template_width: n(c.template.0),
            template_height: n(c.template.1),
            superpixels: n(c.superpixels),
            compactness: c.compactness,
            bins: n(c.n_bins),
            dictionary_size: n(c.dictionary_size),
            lambda: c.lambda,
            particles: n(c.particles),
            negatives: n(c.negatives),
            update_rate: n(c.update_rate),
            gamma: c.gamma,
            threshold: c.threshold,
            sigmas: c.noise.sigmas,
            rank_1: n(c.ranks.0),
            rank_2: n(c.ranks.1),
            rank_3: n(c.ranks.2),
            forgetting: c.forgetting,
            annulus_inner: c.annulus.0,
            annulus_outer: c.annulus.1,
            rng_seed: c.rng_seed,
        }
    }
}

impl From<&SptConfig> for TrackerConfig {
    fn from(c: &SptConfig) -> Self {
        TrackerConfig {
            template: (c.template_width as usize, c.template_height as usize),
            superpixels: c.superpixels as usize,
            compactness: c.compactness,
            n_bins: c.bins as usize,
            dictionary_size: c.dictionary_size as usize,
            lambda: c.lambda,
            particles: c.particles as usize,
            negatives: c.negatives as usize,
            update_rate: c.update_rate as usize,
            gamma: c.gamma,
            threshold: c.threshold,
            noise: NoiseSpec { sigmas: c.sigmas },
            ranks: (c.rank_1 as usize, c.rank_2 as usize, c.rank_3 as usize),
            forgetting: c.forgetting,
            annulus: (c.annulus_inner, c.annulus_outer),
            rng_seed: c.rng_seed,
        }
    }
}

/// Per-frame report filled by [`spt_tracker_step`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SptDiagnostics {
    pub frame_index: u64,
    /// Affine state x, y, rotation, scale, aspect, skew.
    pub state: [f64; 6],
    pub best_loglik: f64,
    pub re_pos: f64,
    /// NaN while no negative model exists.
    pub re_neg: f64,
    pub bootstrap: bool,
    pub accepted: bool,
    pub negative_rebuilt: bool,
    pub positive_updated: bool,
    pub pending_len: u32,
    pub failed_candidates: u32,
}

impl From<&Diagnostics> for SptDiagnostics {
    fn from(d: &Diagnostics) -> Self {
        SptDiagnostics {
            frame_index: d.frame_index as u64,
            state: d.state.as_array(),
            best_loglik: d.best_loglik,
            re_pos: d.re_pos,
            re_neg: d.re_neg.unwrap_or(f64::NAN),
            bootstrap: d.bootstrap,
            accepted: d.accepted,
            negative_rebuilt: d.negative_rebuilt,
            positive_updated: d.positive_updated,
            pending_len: d.pending_len as u32,
            failed_candidates: d.failed_candidates as u32,
        }
    }
}

/// Opaque RGB frame.
pub struct SptImage {
    image: ImageRgb,
}

/// Opaque tracker bound to one sequence.
pub struct SptTracker {
    state: TrackerState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let mut msg = msg.into();
    msg.retain(|c| c != '\0');
    let c = CString::new(msg).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SptStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Image { .. } | Error::Ingest(_) => SPT_ERR_IO,
            Error::Config(_) => SPT_ERR_CONFIG,
            Error::Init(_) => SPT_ERR_INIT,
            Error::TrackingFailure { .. } => SPT_ERR_TRACKING,
            _ => SPT_ERR_INVALID_ARGUMENT,
        };
        Failure(code, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(SPT_ERR_NULL_POINTER, format!("{name} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SPT_ERR_INVALID_ARGUMENT, msg.into())
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SPT_OK,
        Ok(Err(Failure(code, msg))) => {
            set_last_error(msg);
            code
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SPT_ERR_PANIC
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn in_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Message of the last failed call on this thread, or null if none. The
/// string stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn spt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn spt_config_default(out: *mut SptConfig) -> SptStatus {
    guard(|| {
        *out_arg(out, "out")? = SptConfig::from(&TrackerConfig::default());
        Ok(())
    })
}

/// Reads a flat `key = value` config file; unspecified keys keep defaults.
#[no_mangle]
pub unsafe extern "C" fn spt_config_load(path: *const c_char, out: *mut SptConfig) -> SptStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = TrackerConfig::load(path_arg(path)?)?;
        *out = SptConfig::from(&cfg);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn spt_config_validate(config: *const SptConfig) -> SptStatus {
    guard(|| {
        TrackerConfig::from(in_arg(config, "config")?).validate()?;
        Ok(())
    })
}

/// Copies an interleaved 8-bit RGB buffer of `width * height * 3` bytes.
#[no_mangle]
pub unsafe extern "C" fn spt_image_from_rgb8(
    width: u32,
    height: u32,
    data: *const u8,
    len: usize,
    out: *mut *mut SptImage,
) -> SptStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        if data.is_null() {
            return Err(null("data"));
        }
        let bytes = std::slice::from_raw_parts(data, len);
        let image = ImageRgb::from_rgb8(width as usize, height as usize, bytes)?;
        *out = Box::into_raw(Box::new(SptImage { image }));
        Ok(())
    })
}

/// Loads a PNG or JPEG file.
#[no_mangle]
pub unsafe extern "C" fn spt_image_load(path: *const c_char, out: *mut *mut SptImage) -> SptStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let image = sptrack::media::load_image(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(SptImage { image }));
        Ok(())
    })
}

/// Width in pixels, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn spt_image_width(image: *const SptImage) -> u32 {
    image.as_ref().map_or(0, |i| i.image.width() as u32)
}

/// Height in pixels, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn spt_image_height(image: *const SptImage) -> u32 {
    image.as_ref().map_or(0, |i| i.image.height() as u32)
}

/// Frees an image; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn spt_image_free(image: *mut SptImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Initializes a tracker on the first frame. `config` may be null for the
/// defaults.
#[no_mangle]
pub unsafe extern "C" fn spt_tracker_new(
    config: *const SptConfig,
    first_frame: *const SptImage,
    init_box: *const SptBox,
    out: *mut *mut SptTracker,
) -> SptStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let cfg = match config.as_ref() {
            Some(c) => TrackerConfig::from(c),
            None => TrackerConfig::default(),
        };
        let frame = in_arg(first_frame, "first_frame")?;
        let b = BoundingBox::from(*in_arg(init_box, "init_box")?);
        let state = tracker::init(&frame.image, &b, &cfg)?;
        *out = Box::into_raw(Box::new(SptTracker { state }));
        Ok(())
    })
}

/// Tracks the target into `frame`. On success the tracker advances and the
/// estimated box is written to `out_box`; `out_diag` may be null. On
/// failure the tracker is left unchanged.
#[no_mangle]
pub unsafe extern "C" fn spt_tracker_step(
    tracker: *mut SptTracker,
    frame: *const SptImage,
    out_box: *mut SptBox,
    out_diag: *mut SptDiagnostics,
) -> SptStatus {
    guard(|| {
        let t = out_arg(tracker, "tracker")?;
        let frame = in_arg(frame, "frame")?;
        let out_box = out_arg(out_box, "out_box")?;
        let (next, b, d) = tracker::step(&t.state, &frame.image)?;
        t.state = next;
        *out_box = b.into();
        if let Some(diag) = out_diag.as_mut() {
            *diag = SptDiagnostics::from(&d);
        }
        Ok(())
    })
}

/// Number of frames processed so far, counting the initialization frame as 0.
#[no_mangle]
pub unsafe extern "C" fn spt_tracker_frame_index(tracker: *const SptTracker) -> u64 {
    tracker.as_ref().map_or(0, |t| t.state.frame_index as u64)
}

/// Frees a tracker; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn spt_tracker_free(tracker: *mut SptTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Intersection over union of two boxes; 0 if either pointer is null.
#[no_mangle]
pub unsafe extern "C" fn spt_iou(a: *const SptBox, b: *const SptBox) -> f64 {
    match (a.as_ref(), b.as_ref()) {
        (Some(a), Some(b)) => iou(&(*a).into(), &(*b).into()),
        _ => 0.0,
    }
}

/// Distance between box centers; NaN if either pointer is null.
#[no_mangle]
pub unsafe extern "C" fn spt_center_error(a: *const SptBox, b: *const SptBox) -> f64 {
    match (a.as_ref(), b.as_ref()) {
        (Some(a), Some(b)) => center_error(&(*a).into(), &(*b).into()),
        _ => f64::NAN,
    }
}

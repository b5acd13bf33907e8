// Copyright 2026 The DAV Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

//! C ABI over `dav-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_read`
//! style functions and released with the matching `*_free`. Every fallible
//! call returns a [`DavStatus`]; on failure a description of the error is
//! kept per thread and can be copied out with [`dav_last_error_message`].
//! Panics never unwind into C: they are reported as `DAV_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use dav_core::dav::{ground_truth_dav, DAVolume, DavConfig, Variant};
use dav_core::geometry::{CameraIntrinsics, DepthMap};
use dav_core::gradcheck::{check_block, GradCheckConfig};
use dav_core::metrics::{basic_metrics, directed_depth_errors, MAX_DEPTH, REFERENCE_DEPTH};
use dav_core::plane_detection::RansacConfig;
use dav_core::synth::{make_room, render};
use dav_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DavStatus {
    Ok = 0,
    NullPointer = 1,
    /// Missing or unreadable file.
    Read = 2,
    Degenerate = 3,
    Config = 4,
    Divergence = 5,
    /// Malformed file content.
    Format = 6,
    Write = 7,
    Bounds = 8,
    Generation = 9,
    /// A string argument was not valid UTF-8.
    InvalidString = 10,
    Panic = 11,
}

/// Depth map handle.
pub struct DavDepthMap(DepthMap);

/// Depth-attention volume handle.
pub struct DavVolume(DAVolume);

/// DAV score variant.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DavVariant {
    Literal = 0,
    Rescaled = 1,
}

/// Settings for [`dav_volume_from_depth`]; see [`dav_dav_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DavOptions {
    pub factor: usize,
    pub variant: DavVariant,
    pub max_planes: usize,
    pub inlier_threshold: f64,
    pub min_coverage: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

/// Core accuracy metrics plus directed errors.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct DavMetrics {
    pub rel: f64,
    pub rmse: f64,
    pub log10: f64,
    pub sqrel: f64,
    pub si: f64,
    pub imae: f64,
    pub irmse: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub eps_0: f64,
    pub eps_minus: f64,
    pub eps_plus: f64,
    pub pixels: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> DavStatus {
    match err {
        Error::Config(_) => DavStatus::Config,
        Error::Degenerate(_) => DavStatus::Degenerate,
        Error::Bounds(_) => DavStatus::Bounds,
        Error::Format { .. } => DavStatus::Format,
        Error::Divergence { .. } => DavStatus::Divergence,
        Error::Generation(_) => DavStatus::Generation,
        Error::Read { .. } => DavStatus::Read,
        Error::Write { .. } => DavStatus::Write,
    }
}

/// Failure inside a wrapper: a core error or an FFI-level problem.
enum Fail {
    Core(Error),
    Ffi(DavStatus, &'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> DavStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            DavStatus::Ok
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Ffi(status, msg))) => {
            set_error(msg.to_string());
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            DavStatus::Panic
        }
    }
}

fn null() -> Fail {
    Fail::Ffi(DavStatus::NullPointer, "null pointer argument")
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Fail> {
    if path.is_null() {
        return Err(null());
    }
    let s = unsafe { CStr::from_ptr(path) }
        .to_str()
        .map_err(|_| Fail::Ffi(DavStatus::InvalidString, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_handle<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn handle<'a, T>(ptr: *const T) -> Result<&'a T, Fail> {
    unsafe { ptr.as_ref() }.ok_or_else(null)
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `capacity`, into `buffer`. Returns the full message length
/// without the terminator, so a call with a null buffer sizes it.
///
/// # Safety
/// `buffer` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn dav_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buffer.is_null() && capacity > 0 {
            let n = msg.len().min(capacity - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr(), buffer.cast::<u8>(), n);
                *buffer.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dav_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a depth map from `height · width` row-major values; finite
/// positive values are valid pixels.
///
/// # Safety
/// `values` must point to `height · width` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dav_depth_map_new(
    height: usize,
    width: usize,
    values: *const f64,
    out: *mut *mut DavDepthMap,
) -> DavStatus {
    guard(|| {
        if values.is_null() {
            return Err(null());
        }
        let n = height
            .checked_mul(width)
            .ok_or(Fail::Ffi(DavStatus::Config, "size overflows"))?;
        let data = unsafe { std::slice::from_raw_parts(values, n) }.to_vec();
        let map = DepthMap::from_values(height, width, data)?;
        unsafe { out_handle(out, DavDepthMap(map)) }
    })
}

/// Reads a PFM depth map.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dav_depth_map_read_pfm(path: *const c_char, out: *mut *mut DavDepthMap) -> DavStatus {
    guard(|| {
        let path = unsafe { path_arg(path)? };
        let map = dav_core::io::read_pfm(&path)?;
        unsafe { out_handle(out, DavDepthMap(map)) }
    })
}

/// Writes a little-endian PFM; invalid pixels are stored as 0.
///
/// # Safety
/// `map` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dav_depth_map_write_pfm(map: *const DavDepthMap, path: *const c_char) -> DavStatus {
    guard(|| {
        let map = unsafe { handle(map)? };
        let path = unsafe { path_arg(path)? };
        dav_core::io::write_pfm(&map.0, &path)?;
        Ok(())
    })
}

/// Writes height and width.
///
/// # Safety
/// `map` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dav_depth_map_size(
    map: *const DavDepthMap,
    height: *mut usize,
    width: *mut usize,
) -> DavStatus {
    guard(|| {
        let map = unsafe { handle(map)? };
        if height.is_null() || width.is_null() {
            return Err(null());
        }
        unsafe {
            *height = map.0.height();
            *width = map.0.width();
        }
        Ok(())
    })
}

/// Copies the depth values (0 for invalid pixels) into `out`, which must
/// hold `height · width` doubles.
///
/// # Safety
/// `map` must be a live handle; `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dav_depth_map_values(map: *const DavDepthMap, out: *mut f64, len: usize) -> DavStatus {
    guard(|| {
        let map = unsafe { handle(map)? };
        if out.is_null() {
            return Err(null());
        }
        if len != map.0.len() {
            return Err(Fail::Ffi(DavStatus::Config, "buffer length does not match the map"));
        }
        let dst = unsafe { std::slice::from_raw_parts_mut(out, len) };
        for (i, d) in dst.iter_mut().enumerate() {
            *d = if map.0.mask()[i] { map.0.values()[i] } else { 0.0 };
        }
        Ok(())
    })
}

/// Releases a depth map; null is ignored.
///
/// # Safety
/// `map` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dav_depth_map_free(map: *mut DavDepthMap) {
    if !map.is_null() {
        drop(unsafe { Box::from_raw(map) });
    }
}

/// Renders a noiseless synthetic room of `n_planes` planes seen by a
/// centered camera with focal length `focal` pixels.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dav_synth_room(
    seed: u64,
    n_planes: usize,
    height: usize,
    width: usize,
    focal: f64,
    out: *mut *mut DavDepthMap,
) -> DavStatus {
    guard(|| {
        let camera = CameraIntrinsics::centered(width, height, focal);
        let scene = render(&make_room(seed, n_planes, &camera)?)?;
        unsafe { out_handle(out, DavDepthMap(scene.depth)) }
    })
}

/// Defaults: factor 8, literal scores, 5 planes, 0.01 threshold, 7%
/// coverage, 100 iterations, seed 0.
#[no_mangle]
pub extern "C" fn dav_dav_options_default() -> DavOptions {
    let d = DavConfig::default();
    DavOptions {
        factor: d.factor,
        variant: DavVariant::Literal,
        max_planes: d.ransac.max_planes,
        inlier_threshold: d.ransac.inlier_threshold,
        min_coverage: d.ransac.min_coverage,
        max_iterations: d.ransac.max_iterations,
        seed: d.ransac.seed,
    }
}

/// Ground-truth DAV of a depth map.
///
/// # Safety
/// `map` must be a live handle, `options` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dav_volume_from_depth(
    map: *const DavDepthMap,
    options: *const DavOptions,
    out: *mut *mut DavVolume,
) -> DavStatus {
    guard(|| {
        let map = unsafe { handle(map)? };
        let o = unsafe { handle(options)? };
        let cfg = DavConfig {
            ransac: RansacConfig {
                inlier_threshold: o.inlier_threshold,
                max_iterations: o.max_iterations,
                max_planes: o.max_planes,
                min_coverage: o.min_coverage,
                seed: o.seed,
            },
            factor: o.factor,
            variant: match o.variant {
                DavVariant::Literal => Variant::Literal,
                DavVariant::Rescaled => Variant::Rescaled,
            },
        };
        let (dav, _) = ground_truth_dav(&map.0, &cfg)?;
        unsafe { out_handle(out, DavVolume(dav)) }
    })
}

/// Reads a DAV binary.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dav_volume_read(path: *const c_char, out: *mut *mut DavVolume) -> DavStatus {
    guard(|| {
        let path = unsafe { path_arg(path)? };
        let dav = dav_core::io::read_dav(&path)?;
        unsafe { out_handle(out, DavVolume(dav)) }
    })
}

/// Writes the DAV binary.
///
/// # Safety
/// `volume` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dav_volume_write(volume: *const DavVolume, path: *const c_char) -> DavStatus {
    guard(|| {
        let v = unsafe { handle(volume)? };
        let path = unsafe { path_arg(path)? };
        dav_core::io::write_dav(&v.0, &path)?;
        Ok(())
    })
}

/// Writes the subsampled grid size; the volume holds `(h·w)²` scores.
///
/// # Safety
/// `volume` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dav_volume_grid(volume: *const DavVolume, h: *mut usize, w: *mut usize) -> DavStatus {
    guard(|| {
        let v = unsafe { handle(volume)? };
        if h.is_null() || w.is_null() {
            return Err(null());
        }
        unsafe {
            *h = v.0.h;
            *w = v.0.w;
        }
        Ok(())
    })
}

/// Score between flat cells `p` and `q`.
///
/// # Safety
/// `volume` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dav_volume_get(volume: *const DavVolume, p: usize, q: usize, out: *mut f64) -> DavStatus {
    guard(|| {
        let v = unsafe { handle(volume)? };
        if out.is_null() {
            return Err(null());
        }
        let n = v.0.cells();
        if p >= n || q >= n {
            return Err(Fail::Core(Error::Bounds(format!("cell pair ({p}, {q}) outside {n} cells"))));
        }
        unsafe { *out = v.0.get(p, q) };
        Ok(())
    })
}

/// Releases a volume; null is ignored.
///
/// # Safety
/// `volume` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dav_volume_free(volume: *mut DavVolume) {
    if !volume.is_null() {
        drop(unsafe { Box::from_raw(volume) });
    }
}

/// Accuracy and directed metrics over ground truth in `(0, 10]` m, with
/// the reference plane at 3 m.
///
/// # Safety
/// Both maps must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dav_evaluate(
    pred: *const DavDepthMap,
    gt: *const DavDepthMap,
    out: *mut DavMetrics,
) -> DavStatus {
    guard(|| {
        let pred = unsafe { handle(pred)? };
        let gt = unsafe { handle(gt)? };
        if out.is_null() {
            return Err(null());
        }
        let b = basic_metrics(&pred.0, &gt.0, MAX_DEPTH)?;
        let d = directed_depth_errors(&pred.0, &gt.0, REFERENCE_DEPTH, MAX_DEPTH)?;
        unsafe {
            *out = DavMetrics {
                rel: b.rel,
                rmse: b.rmse,
                log10: b.log10,
                sqrel: b.sqrel,
                si: b.si,
                imae: b.imae,
                irmse: b.irmse,
                delta1: b.delta1,
                delta2: b.delta2,
                delta3: b.delta3,
                eps_0: d.eps_0,
                eps_minus: d.eps_minus,
                eps_plus: d.eps_plus,
                pixels: b.count,
            }
        };
        Ok(())
    })
}

/// Finite-difference check of the attention block on the default toy
/// shape (4×4 positions, 8 input channels). `passed` receives 1 or 0 and
/// `worst` the largest relative error over all tensors.
///
/// # Safety
/// The outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dav_grad_check(seed: u64, passed: *mut i32, worst: *mut f64) -> DavStatus {
    guard(|| {
        if passed.is_null() || worst.is_null() {
            return Err(null());
        }
        let cfg = GradCheckConfig {
            seed,
            ..Default::default()
        };
        let report = check_block(&cfg, None)?;
        let max = report
            .tensors
            .iter()
            .map(|t| t.max_relative_error)
            .fold(0.0, f64::max);
        unsafe {
            *passed = report.passed() as i32;
            *worst = max;
        }
        Ok(())
    })
}

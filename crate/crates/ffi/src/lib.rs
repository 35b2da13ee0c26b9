//! C ABI for the reduction pipeline: opaque handles, integer status
//! codes, and a per-thread last-error message. Matrix getters copy into
//! caller-owned row-major buffers.
//!
//! Every function returns [`MmrStatus`]; `MMR_STATUS_OK` (0) means the
//! out-parameters are valid. On any other status the thread-local error
//! message is set and readable via `mmr_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use mm_reduce::design::DesignFile;
use mm_reduce::error::Error;
use mm_reduce::estimation::{self, EstimationOptions};
use mm_reduce::lti::{simulate_filtered_impulse, simulate_two_sided, Integrator, TimeGrid};
use mm_reduce::{io, oracle, rom, ReducedModel, SignalGenerator, StateSpace, SwappedFilter};

/// Status codes: 0 success, 1 validation failure, 2 bad call
/// (null/invalid argument at the boundary), 3 numerical failure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmrStatus {
    Ok = 0,
    Validation = 1,
    BadCall = 2,
    Numerical = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(cleaned).unwrap());
}

fn fail(e: Error) -> MmrStatus {
    set_error(&format!("{e}"));
    match e.exit_code() {
        1 => MmrStatus::Validation,
        _ => MmrStatus::Numerical,
    }
}

fn bad_call(msg: &str) -> MmrStatus {
    set_error(msg);
    MmrStatus::BadCall
}

/// Message for the most recent failure on this thread. Valid until the
/// next failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn mmr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, MmrStatus> {
    if p.is_null() {
        return Err(bad_call("null path"));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(bad_call("path is not valid UTF-8")),
    }
}

/// Opaque full-order model handle.
pub struct MmrSystem(StateSpace);
/// Opaque interpolation-design handle (generator + filter pair).
pub struct MmrDesign {
    gen: SignalGenerator,
    filt: SwappedFilter,
}
/// Opaque reduced-model handle.
pub struct MmrRom(ReducedModel);

macro_rules! out_handle {
    ($out:expr, $val:expr) => {{
        if $out.is_null() {
            return bad_call("null out-parameter");
        }
        unsafe { *$out = Box::into_raw(Box::new($val)) };
        MmrStatus::Ok
    }};
}

macro_rules! deref {
    ($ptr:expr) => {{
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => return bad_call("null handle"),
        }
    }};
}

// ---- systems ----

/// Build a full-order model from row-major A (n*n), B (n*m), C (p*n).
///
/// # Safety
/// `a`, `b`, `c` must point to arrays of the stated lengths; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmr_system_new(
    n: usize,
    m: usize,
    p: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    out: *mut *mut MmrSystem,
) -> MmrStatus {
    if a.is_null() || b.is_null() || c.is_null() {
        return bad_call("null matrix data");
    }
    let a = DMatrix::from_row_slice(n, n, std::slice::from_raw_parts(a, n * n));
    let b = DMatrix::from_row_slice(n, m, std::slice::from_raw_parts(b, n * m));
    let c = DMatrix::from_row_slice(p, n, std::slice::from_raw_parts(c, p * n));
    match StateSpace::new(a, b, c) {
        Ok(sys) => out_handle!(out, MmrSystem(sys)),
        Err(e) => fail(e),
    }
}

/// Load a full-order model from a matrix-container file (A, B, C).
///
/// # Safety
/// `path` must be a valid C string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmr_system_load(
    path: *const c_char,
    out: *mut *mut MmrSystem,
) -> MmrStatus {
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::load_statespace(path) {
        Ok(sys) => out_handle!(out, MmrSystem(sys)),
        Err(e) => fail(e),
    }
}

/// # Safety
/// `sys` must be a handle from this library or null (no-op).
#[no_mangle]
pub unsafe extern "C" fn mmr_system_free(sys: *mut MmrSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// # Safety
/// `sys` must be a live handle; `n`, `m`, `p` may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn mmr_system_dims(
    sys: *const MmrSystem,
    n: *mut usize,
    m: *mut usize,
    p: *mut usize,
) -> MmrStatus {
    let sys = deref!(sys);
    if !n.is_null() {
        *n = sys.0.order();
    }
    if !m.is_null() {
        *m = sys.0.inputs();
    }
    if !p.is_null() {
        *p = sys.0.outputs();
    }
    MmrStatus::Ok
}

// ---- designs ----

/// Load and validate a JSON design file (rank and disjointness checks).
///
/// # Safety
/// `path` must be a valid C string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmr_design_load(
    path: *const c_char,
    out: *mut *mut MmrDesign,
) -> MmrStatus {
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match DesignFile::load(path).and_then(|d| d.build()) {
        Ok((gen, filt)) => out_handle!(out, MmrDesign { gen, filt }),
        Err(e) => fail(e),
    }
}

/// # Safety
/// `design` must be a handle from this library or null (no-op).
#[no_mangle]
pub unsafe extern "C" fn mmr_design_free(design: *mut MmrDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// Reduced orders claimed on each side.
///
/// # Safety
/// `design` must be a live handle; out-parameters may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn mmr_design_orders(
    design: *const MmrDesign,
    nu_right: *mut usize,
    nu_left: *mut usize,
) -> MmrStatus {
    let design = deref!(design);
    if !nu_right.is_null() {
        *nu_right = design.gen.order();
    }
    if !nu_left.is_null() {
        *nu_left = design.filt.order();
    }
    MmrStatus::Ok
}

// ---- reduction ----

fn reduce_impl(
    sys: &StateSpace,
    design: &MmrDesign,
    dt: f64,
    duration: f64,
    warmup: f64,
    q_tilde: usize,
) -> Result<ReducedModel, Error> {
    let steps = (duration / dt).round() as usize;
    let grid = TimeGrid::new(dt, steps.max(2))?;
    let run = simulate_two_sided(
        sys,
        &design.gen,
        &design.filt,
        &DVector::zeros(sys.order()),
        &grid,
        Integrator::ExactExp,
    )?;
    let varpis = (0..sys.inputs())
        .map(|j| simulate_filtered_impulse(sys, &design.filt, j, &grid, Integrator::ExactExp))
        .collect::<Result<Vec<_>, _>>()?;
    let warmup_idx = (warmup / dt).round() as usize;
    let opts_c_pi = EstimationOptions::noise_free(design.gen.order(), warmup_idx);
    let opts_ups_b = EstimationOptions {
        window: q_tilde.max(1),
        eta: EstimationOptions::DEFAULT_ETA,
        warmup: warmup_idx,
        stride: 1,
    };
    let est = estimation::estimate_all(
        &design.gen,
        &design.filt,
        &run.omega,
        &run.y,
        &varpis,
        &opts_c_pi,
        &opts_ups_b,
    )?;
    let c_pi = est.c_pi.to_matrix()?;
    let ups_b = est.ups_b.to_matrix()?;
    let ups_pi = rom::solve_ups_pi(&design.gen, &design.filt, &c_pi, &ups_b)?;
    rom::build_two_sided(&design.gen, &design.filt, &c_pi, &ups_b, &ups_pi)
}

/// Run the data-driven pipeline end to end: simulate both
/// interconnections over `[0, duration]` at step `dt`, estimate the
/// reduced quantities after discarding `warmup` seconds, and assemble
/// the two-sided reduced model. `q_tilde` is the robust estimation
/// window (1 = single snapshot).
///
/// # Safety
/// `sys` and `design` must be live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mmr_reduce(
    sys: *const MmrSystem,
    design: *const MmrDesign,
    dt: f64,
    duration: f64,
    warmup: f64,
    q_tilde: usize,
    out: *mut *mut MmrRom,
) -> MmrStatus {
    let sys = deref!(sys);
    let design = deref!(design);
    if !(dt > 0.0) || !(duration > dt) || !(warmup >= 0.0) {
        return bad_call("need dt > 0, duration > dt, warmup >= 0");
    }
    match reduce_impl(&sys.0, design, dt, duration, warmup, q_tilde) {
        Ok(model) => out_handle!(out, MmrRom(model)),
        Err(e) => fail(e),
    }
}

/// # Safety
/// `rom` must be a handle from this library or null (no-op).
#[no_mangle]
pub unsafe extern "C" fn mmr_rom_free(rom: *mut MmrRom) {
    if !rom.is_null() {
        drop(Box::from_raw(rom));
    }
}

/// Reduced order and input/output counts.
///
/// # Safety
/// `rom` must be a live handle; out-parameters may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn mmr_rom_dims(
    rom: *const MmrRom,
    nu: *mut usize,
    m: *mut usize,
    p: *mut usize,
) -> MmrStatus {
    let rom = deref!(rom);
    if !nu.is_null() {
        *nu = rom.0.order();
    }
    if !m.is_null() {
        *m = rom.0.g.ncols();
    }
    if !p.is_null() {
        *p = rom.0.h.nrows();
    }
    MmrStatus::Ok
}

unsafe fn copy_matrix(m: &DMatrix<f64>, dst: *mut f64, len: usize) -> MmrStatus {
    if dst.is_null() {
        return bad_call("null buffer");
    }
    if len != m.nrows() * m.ncols() {
        return bad_call("buffer length does not match matrix size");
    }
    let out = std::slice::from_raw_parts_mut(dst, len);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i * m.ncols() + j] = m[(i, j)];
        }
    }
    MmrStatus::Ok
}

/// Copy F (nu*nu), G (nu*m), H (p*nu) row-major into caller buffers.
/// Any pointer may be null to skip that matrix (pass 0 for its length).
///
/// # Safety
/// Non-null buffers must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mmr_rom_matrices(
    rom: *const MmrRom,
    f: *mut f64,
    f_len: usize,
    g: *mut f64,
    g_len: usize,
    h: *mut f64,
    h_len: usize,
) -> MmrStatus {
    let rom = deref!(rom);
    if !f.is_null() {
        let s = copy_matrix(&rom.0.f, f, f_len);
        if s != MmrStatus::Ok {
            return s;
        }
    }
    if !g.is_null() {
        let s = copy_matrix(&rom.0.g, g, g_len);
        if s != MmrStatus::Ok {
            return s;
        }
    }
    if !h.is_null() {
        let s = copy_matrix(&rom.0.h, h, h_len);
        if s != MmrStatus::Ok {
            return s;
        }
    }
    MmrStatus::Ok
}

/// Save the reduced model (matrix container plus JSON sidecar).
///
/// # Safety
/// `rom` must be a live handle; `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn mmr_rom_save(rom: *const MmrRom, path: *const c_char) -> MmrStatus {
    let rom = deref!(rom);
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::save_rom(path, &rom.0) {
        Ok(()) => MmrStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Load a reduced model saved by `mmr_rom_save`.
///
/// # Safety
/// `path` must be a valid C string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mmr_rom_load(path: *const c_char, out: *mut *mut MmrRom) -> MmrStatus {
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match io::load_rom(path) {
        Ok(model) => out_handle!(out, MmrRom(model)),
        Err(e) => fail(e),
    }
}

/// Check the reduced model's claimed interpolation conditions against
/// the full model. Writes the worst claimed relative error and a 0/1
/// pass flag; returns `MMR_STATUS_VALIDATION` when the check fails.
///
/// # Safety
/// Handles must be live; out-parameters may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn mmr_verify(
    rom: *const MmrRom,
    sys: *const MmrSystem,
    design: *const MmrDesign,
    tol: f64,
    worst_rel_error: *mut f64,
    pass: *mut i32,
) -> MmrStatus {
    let rom = deref!(rom);
    let sys = deref!(sys);
    let design = deref!(design);
    match oracle::verify_rom(&rom.0, &sys.0, &design.gen, &design.filt, tol) {
        Ok(report) => {
            if !worst_rel_error.is_null() {
                *worst_rel_error = report.worst_claimed();
            }
            if !pass.is_null() {
                *pass = report.pass as i32;
            }
            if report.pass {
                MmrStatus::Ok
            } else {
                set_error("interpolation-condition check failed");
                MmrStatus::Validation
            }
        }
        Err(e) => fail(e),
    }
}

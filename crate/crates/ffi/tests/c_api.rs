//! Exercises the C ABI from Rust: handle lifecycle, the end-to-end
//! reduction entry point, matrix copy-out, save/load, and the status
//! codes for boundary and validation failures.

use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use mm_reduce::bench::random_stable_system;
use mm_reduce::design::{DesignFile, SideSpec};
use mm_reduce::io;
use mm_reduce_ffi::*;

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mmr_last_error_message()) }
        .to_str()
        .unwrap()
        .to_owned()
}

fn write_design(path: &Path) {
    DesignFile {
        right: SideSpec {
            freqs_rad_s: Some(vec![1.0, 3.0]),
            freqs_hz: None,
            direction: vec![1.0, 2.0],
        },
        left: SideSpec {
            freqs_rad_s: Some(vec![2.0, 5.0]),
            freqs_hz: None,
            direction: vec![2.0, 1.0],
        },
        omega0: None,
    }
    .save(path)
    .unwrap();
}

fn load_design(path: &Path) -> *mut MmrDesign {
    let mut design = ptr::null_mut();
    let status = unsafe { mmr_design_load(c_path(path).as_ptr(), &mut design) };
    assert_eq!(status, MmrStatus::Ok, "{}", last_error());
    design
}

fn load_system(path: &Path) -> *mut MmrSystem {
    let mut sys = ptr::null_mut();
    let status = unsafe { mmr_system_load(c_path(path).as_ptr(), &mut sys) };
    assert_eq!(status, MmrStatus::Ok, "{}", last_error());
    sys
}

#[test]
fn system_new_dims_and_free() {
    let a = [-1.0, 0.0, 0.0, -2.0];
    let b = [1.0, 0.0];
    let c = [1.0, 1.0, 0.0, 1.0];
    let mut sys = ptr::null_mut();
    let status =
        unsafe { mmr_system_new(2, 1, 2, a.as_ptr(), b.as_ptr(), c.as_ptr(), &mut sys) };
    assert_eq!(status, MmrStatus::Ok);
    let (mut n, mut m, mut p) = (0usize, 0usize, 0usize);
    assert_eq!(
        unsafe { mmr_system_dims(sys, &mut n, &mut m, &mut p) },
        MmrStatus::Ok
    );
    assert_eq!((n, m, p), (2, 1, 2));
    unsafe { mmr_system_free(sys) };
}

#[test]
fn null_arguments_report_bad_call() {
    let mut sys = ptr::null_mut();
    let status = unsafe {
        mmr_system_new(2, 1, 1, ptr::null(), ptr::null(), ptr::null(), &mut sys)
    };
    assert_eq!(status, MmrStatus::BadCall);
    assert!(!last_error().is_empty());
    assert_eq!(
        unsafe { mmr_system_dims(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) },
        MmrStatus::BadCall
    );
    assert_eq!(
        unsafe { mmr_system_load(ptr::null(), &mut sys) },
        MmrStatus::BadCall
    );
    // freeing null is a safe no-op
    unsafe {
        mmr_system_free(ptr::null_mut());
        mmr_design_free(ptr::null_mut());
        mmr_rom_free(ptr::null_mut());
    }
}

#[test]
fn missing_file_reports_validation_with_message() {
    let mut sys = ptr::null_mut();
    let path = CString::new("/nonexistent/sys.mtx").unwrap();
    let status = unsafe { mmr_system_load(path.as_ptr(), &mut sys) };
    assert_eq!(status, MmrStatus::Validation);
    assert!(last_error().contains("sys.mtx"));
}

#[test]
fn design_load_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("design.json");
    write_design(&path);
    let design = load_design(&path);
    let (mut right, mut left) = (0usize, 0usize);
    assert_eq!(
        unsafe { mmr_design_orders(design, &mut right, &mut left) },
        MmrStatus::Ok
    );
    assert_eq!((right, left), (4, 4));
    unsafe { mmr_design_free(design) };
}

#[test]
fn reduce_verify_save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let design_path = root.join("design.json");
    write_design(&design_path);
    let sys_path = root.join("sys.mtx");
    let full = random_stable_system(30, 2, 2, [-2.0, -0.5], [0.5, 20.0], 7).unwrap();
    io::save_statespace(&sys_path, &full).unwrap();

    let sys = load_system(&sys_path);
    let design = load_design(&design_path);

    // bad step sizes are rejected at the boundary
    let mut rom = ptr::null_mut();
    assert_eq!(
        unsafe { mmr_reduce(sys, design, -0.01, 50.0, 35.0, 1, &mut rom) },
        MmrStatus::BadCall
    );

    let status = unsafe { mmr_reduce(sys, design, 0.01, 50.0, 35.0, 1, &mut rom) };
    assert_eq!(status, MmrStatus::Ok, "{}", last_error());

    let (mut nu, mut m, mut p) = (0usize, 0usize, 0usize);
    assert_eq!(
        unsafe { mmr_rom_dims(rom, &mut nu, &mut m, &mut p) },
        MmrStatus::Ok
    );
    assert_eq!((nu, m, p), (4, 2, 2));

    let mut f = vec![0.0; nu * nu];
    let mut g = vec![0.0; nu * m];
    let mut h = vec![0.0; p * nu];
    let status = unsafe {
        mmr_rom_matrices(
            rom,
            f.as_mut_ptr(),
            f.len(),
            g.as_mut_ptr(),
            g.len(),
            h.as_mut_ptr(),
            h.len(),
        )
    };
    assert_eq!(status, MmrStatus::Ok);
    assert!(f.iter().chain(&g).chain(&h).all(|v| v.is_finite()));
    assert!(f.iter().any(|&v| v != 0.0));
    // wrong buffer length is refused before any write
    assert_eq!(
        unsafe {
            mmr_rom_matrices(rom, f.as_mut_ptr(), f.len() - 1, ptr::null_mut(), 0, ptr::null_mut(), 0)
        },
        MmrStatus::BadCall
    );

    // verification against the full model passes at a loose tolerance
    let (mut worst, mut pass) = (f64::NAN, -1);
    let status = unsafe { mmr_verify(rom, sys, design, 1e-4, &mut worst, &mut pass) };
    assert_eq!(status, MmrStatus::Ok, "{}", last_error());
    assert_eq!(pass, 1);
    assert!(worst.is_finite() && worst < 1e-4);
    // and fails at an impossible one, reported as a validation status
    let status = unsafe { mmr_verify(rom, sys, design, 1e-16, &mut worst, &mut pass) };
    assert_eq!(status, MmrStatus::Validation);
    assert_eq!(pass, 0);

    // save, reload, and compare the copied-out matrices bit for bit
    let rom_path = root.join("rom.mtx");
    assert_eq!(
        unsafe { mmr_rom_save(rom, c_path(&rom_path).as_ptr()) },
        MmrStatus::Ok
    );
    let mut rom2 = ptr::null_mut();
    assert_eq!(
        unsafe { mmr_rom_load(c_path(&rom_path).as_ptr(), &mut rom2) },
        MmrStatus::Ok
    );
    let mut f2 = vec![0.0; nu * nu];
    let status = unsafe {
        mmr_rom_matrices(rom2, f2.as_mut_ptr(), f2.len(), ptr::null_mut(), 0, ptr::null_mut(), 0)
    };
    assert_eq!(status, MmrStatus::Ok);
    assert_eq!(f, f2);

    unsafe {
        mmr_rom_free(rom2);
        mmr_rom_free(rom);
        mmr_design_free(design);
        mmr_system_free(sys);
    }
}

#[test]
fn generated_header_declares_the_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mm_reduce.h");
    let text = std::fs::read_to_string(&header).expect("cbindgen header exists");
    for sym in [
        "MmrStatus",
        "mmr_last_error_message",
        "mmr_system_new",
        "mmr_design_load",
        "mmr_reduce",
        "mmr_rom_matrices",
        "mmr_verify",
    ] {
        assert!(text.contains(sym), "header missing {sym}");
    }
}

//! End-to-end CLI test: the staged command chain must produce the same
//! numerical artifacts as the scripted experiment runner, since both sit
//! on the same code path and the CSV round trip is exact.

use std::path::Path;
use std::process::Command;

use mm_reduce::bench::{BenchConfig, RunWindows, SystemSpec};
use mm_reduce::design::{DesignFile, SideSpec};
use mm_reduce::estimation::EstimationResult;
use mm_reduce::io;

const BIN: &str = env!("CARGO_BIN_EXE_mm-reduce");

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN)
        .args(args)
        .env("MM_REDUCE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &std::process::Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_design(path: &Path) {
    DesignFile {
        right: SideSpec {
            freqs_rad_s: Some(vec![1.0, 3.0, 10.0]),
            freqs_hz: None,
            direction: vec![1.0, 4.0],
        },
        left: SideSpec {
            freqs_rad_s: Some(vec![2.0, 5.0, 20.0]),
            freqs_hz: None,
            direction: vec![4.0, 1.0],
        },
        omega0: None,
    }
    .save(path)
    .unwrap();
}

#[test]
fn cli_chain_matches_experiment_runner() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let design = root.join("design.json");
    write_design(&design);
    let design_s = design.to_str().unwrap();
    let sys_path = root.join("sys.mtx");
    let data_dir = root.join("data");
    let est_path = root.join("est.json");
    let rom_path = root.join("rom.mtx");

    // gen-system -> collect -> estimate -> reduce -> verify
    assert_ok(
        &run(&[
            "gen-system", "--kind", "random", "--n", "40", "--m", "2", "--p", "2",
            "--seed", "9", "--re-range", "-2.0", "-0.5", "--freq-range", "0.5", "30.0",
            "--out", sys_path.to_str().unwrap(),
        ]),
        "gen-system",
    );
    assert_ok(
        &run(&[
            "collect", "--sys", sys_path.to_str().unwrap(), "--design", design_s,
            "--dt", "0.01", "--duration", "50", "--out", data_dir.to_str().unwrap(),
        ]),
        "collect",
    );
    assert_ok(
        &run(&[
            "estimate", "--data", data_dir.to_str().unwrap(), "--design", design_s,
            "--nu-tilde", "600", "--k0", "3500", "--out", est_path.to_str().unwrap(),
        ]),
        "estimate",
    );
    assert_ok(
        &run(&[
            "reduce", "--est", est_path.to_str().unwrap(), "--design", design_s,
            "--out", rom_path.to_str().unwrap(),
        ]),
        "reduce",
    );
    let verify = run(&[
        "verify", "--rom", rom_path.to_str().unwrap(), "--sys", sys_path.to_str().unwrap(),
        "--design", design_s, "--tol", "1e-4",
    ]);
    assert_ok(&verify, "verify");

    // same parameters through the experiment runner (via the same
    // binary: identical-artifact equivalence is a single-code-path,
    // single-build guarantee)
    let cfg = BenchConfig {
        system: SystemSpec::Random {
            n: 40,
            m: 2,
            p: 2,
            re_range: [-2.0, -0.5],
            freq_range: [0.5, 30.0],
            seed: 9,
        },
        design: design.clone(),
        noise: None,
        run: RunWindows {
            dt: 0.01,
            duration: 50.0,
            warmup: 35.0,
            nu_tilde: Some(600),
            q_tilde: 1,
            eta: mm_reduce::EstimationOptions::DEFAULT_ETA,
            },
    };
    let cfg_path = root.join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let bundle = root.join("bundle");
    assert_ok(
        &run(&[
            "bench", "--config", cfg_path.to_str().unwrap(), "--out", bundle.to_str().unwrap(),
        ]),
        "bench",
    );
    let results: mm_reduce::bench::ExperimentResults =
        serde_json::from_str(&std::fs::read_to_string(bundle.join("results.json")).unwrap())
            .unwrap();
    assert!(results.verify.pass);
    assert!(results.e_c_pi <= 1e-6 && results.e_ups_b <= 1e-6 && results.e_ups_pi <= 1e-6);

    // byte-identical data artifacts from both routes
    for f in ["omega.csv", "y.csv", "varpi_0.csv", "varpi_1.csv"] {
        assert_eq!(
            std::fs::read(data_dir.join(f)).unwrap(),
            std::fs::read(bundle.join(f)).unwrap(),
            "{f} differs between collect and bench"
        );
    }

    // identical ROM matrices from both routes
    let rom_cli = io::load_rom(&rom_path).unwrap();
    let rom_bundle = io::load_rom(&bundle.join("rom.mtx")).unwrap();
    assert_eq!(rom_cli.f, rom_bundle.f);
    assert_eq!(rom_cli.g, rom_bundle.g);
    assert_eq!(rom_cli.h, rom_bundle.h);

    // the bundle manifest lists every artifact with its producing stage
    let manifest: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(bundle.join("manifest.json")).unwrap())
            .unwrap();
    for entry in &manifest {
        let file = entry["file"].as_str().unwrap();
        assert!(bundle.join(file).exists(), "missing artifact {file}");
        assert!(!entry["stage"].as_str().unwrap().is_empty());
    }

    // bode and spectrum emit well-formed CSV
    let bode = root.join("bode.csv");
    assert_ok(
        &run(&[
            "bode", "--model", rom_path.to_str().unwrap(), "--fmin", "0.1", "--fmax", "100",
            "--points", "50", "--out", bode.to_str().unwrap(),
        ]),
        "bode",
    );
    let text = std::fs::read_to_string(&bode).unwrap();
    assert!(text.lines().next().unwrap().starts_with("freq_rad_s,mag_db_11,phase_deg_11"));
    assert_eq!(text.lines().count(), 51);
    let eig = root.join("eig.csv");
    assert_ok(
        &run(&["spectrum", "--model", rom_path.to_str().unwrap(), "--out", eig.to_str().unwrap()]),
        "spectrum",
    );
    assert_eq!(std::fs::read_to_string(&eig).unwrap().lines().count(), 7); // header + nu=6

    // design-check reports nu
    let check = run(&["design-check", "--design", design_s]);
    assert_ok(&check, "design-check");
    let stdout = String::from_utf8_lossy(&check.stdout);
    assert!(stdout.contains("nu = 6"));
}

#[test]
fn estimate_on_zero_output_system_gives_zero_c_pi() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let design = root.join("design.json");
    write_design(&design);
    let sys_path = root.join("sys.mtx");
    // stable system with C = 0
    let a = nalgebra::DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
    let b = nalgebra::DMatrix::identity(2, 2);
    let c = nalgebra::DMatrix::zeros(2, 2);
    io::save_statespace(&sys_path, &mm_reduce::StateSpace::new(a, b, c).unwrap()).unwrap();
    let data_dir = root.join("data");
    assert_ok(
        &run(&[
            "collect", "--sys", sys_path.to_str().unwrap(),
            "--design", design.to_str().unwrap(),
            "--dt", "0.02", "--duration", "30", "--out", data_dir.to_str().unwrap(),
        ]),
        "collect",
    );
    let est_path = root.join("est.json");
    assert_ok(
        &run(&[
            "estimate", "--data", data_dir.to_str().unwrap(),
            "--design", design.to_str().unwrap(),
            "--k0", "500", "--out", est_path.to_str().unwrap(),
        ]),
        "estimate",
    );
    let est = EstimationResult::load(&est_path).unwrap();
    assert_eq!(est.c_pi.to_matrix().unwrap().norm(), 0.0);
}

#[test]
fn cli_error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    // usage error -> 2 (clap)
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    // unreadable file -> validation failure -> 1
    let out = run(&[
        "design-check", "--design", root.join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    // failed verification -> nonzero exit with a report
    let design = root.join("design.json");
    write_design(&design);
    let sys_path = root.join("sys.mtx");
    assert_ok(
        &run(&[
            "gen-system", "--kind", "random", "--n", "30", "--seed", "2",
            "--out", sys_path.to_str().unwrap(),
        ]),
        "gen-system",
    );
    let data_dir = root.join("data");
    assert_ok(
        &run(&[
            "collect", "--sys", sys_path.to_str().unwrap(),
            "--design", design.to_str().unwrap(),
            "--dt", "0.01", "--duration", "50", "--out", data_dir.to_str().unwrap(),
        ]),
        "collect",
    );
    let est_path = root.join("est.json");
    assert_ok(
        &run(&[
            "estimate", "--data", data_dir.to_str().unwrap(),
            "--design", design.to_str().unwrap(),
            "--nu-tilde", "600", "--k0", "3500", "--out", est_path.to_str().unwrap(),
        ]),
        "estimate",
    );
    let rom_path = root.join("rom.mtx");
    assert_ok(
        &run(&[
            "reduce", "--est", est_path.to_str().unwrap(),
            "--design", design.to_str().unwrap(), "--out", rom_path.to_str().unwrap(),
        ]),
        "reduce",
    );
    // impossible tolerance: report produced, exit code 1
    let out = run(&[
        "verify", "--rom", rom_path.to_str().unwrap(), "--sys", sys_path.to_str().unwrap(),
        "--design", design.to_str().unwrap(), "--tol", "1e-15",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"pass\": false"));
}

//! Command-line front end for the reduction pipeline. Every stage reads
//! and writes disk artifacts, so measured time series can enter at
//! `estimate` without the simulator.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error,
//! 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use mm_reduce::bench::{self, BenchConfig, SystemSpec};
use mm_reduce::design::DesignFile;
use mm_reduce::error::{Error, Result};
use mm_reduce::estimation::{self, EstimationOptions, EstimationResult, MatrixJson};
use mm_reduce::io;
use mm_reduce::lti::{simulate_filtered_impulse, simulate_two_sided, Integrator, TimeGrid};
use mm_reduce::{oracle, rom};

#[derive(Parser)]
#[command(
    name = "mm-reduce",
    about = "Data-driven two-sided moment-matching model order reduction",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemKind {
    Random,
    Ladder,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic full-order system and write it as a matrix container.
    GenSystem {
        #[arg(long, value_enum)]
        kind: SystemKind,
        /// State order (random) or 2x section count (ladder).
        #[arg(long)]
        n: usize,
        /// Input count (random systems; ladders are fixed at 2).
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Output count (random systems; ladders are fixed at 2).
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Eigenvalue real-part range (random systems).
        #[arg(long, num_args = 2, default_values_t = [-2.0, -0.1], allow_hyphen_values = true)]
        re_range: Vec<f64>,
        /// Conjugate-pair frequency range in rad/s (random systems).
        #[arg(long, num_args = 2, default_values_t = [0.1, 50.0])]
        freq_range: Vec<f64>,
        /// Per-section resistance in ohms (ladder).
        #[arg(long, default_value_t = 1.0)]
        r_ohm: f64,
        /// Per-section inductance in henries (ladder).
        #[arg(long, default_value_t = 1e-3)]
        l_henry: f64,
        /// Per-section capacitance in farads (ladder).
        #[arg(long, default_value_t = 1e-4)]
        c_farad: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a design file: rank tests, spectrum disjointness, eigenvalues.
    DesignCheck {
        #[arg(long)]
        design: PathBuf,
    },
    /// Simulate both interconnections and write omega, y and varpi CSVs.
    Collect {
        #[arg(long)]
        sys: PathBuf,
        #[arg(long)]
        design: PathBuf,
        /// Sample step in seconds.
        #[arg(long)]
        dt: f64,
        /// Window length in seconds.
        #[arg(long)]
        duration: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate CPi and UpsilonB from trajectory CSVs.
    Estimate {
        /// Directory holding omega.csv, y.csv and varpi_<j>.csv.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        design: PathBuf,
        /// CPi snapshot window width (defaults to nu).
        #[arg(long)]
        nu_tilde: Option<usize>,
        /// UpsilonB snapshot window width.
        #[arg(long, default_value_t = 1)]
        q_tilde: usize,
        /// Convergence threshold on the per-unit-time increment.
        #[arg(long, default_value_t = EstimationOptions::DEFAULT_ETA)]
        eta: f64,
        /// Warm-up sample index before the estimators start.
        #[arg(long, default_value_t = 0)]
        k0: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the reduced Sylvester equation and assemble the two-sided model.
    Reduce {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a reduced model's interpolation conditions against the full model.
    Verify {
        #[arg(long)]
        rom: PathBuf,
        #[arg(long)]
        sys: PathBuf,
        #[arg(long)]
        design: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Frequency response of a model over a log-spaced grid.
    Bode {
        #[arg(long)]
        model: PathBuf,
        /// Lowest frequency, rad/s.
        #[arg(long)]
        fmin: f64,
        /// Highest frequency, rad/s.
        #[arg(long)]
        fmax: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Eigenvalues of a model as CSV.
    Spectrum {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scripted reduction experiment from a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    mm_reduce::init_thread_limit();
    let cli = Cli::parse(); // clap exits with code 2 on usage errors
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::GenSystem {
            kind,
            n,
            m,
            p,
            seed,
            re_range,
            freq_range,
            r_ohm,
            l_henry,
            c_farad,
            out,
        } => {
            let spec = match kind {
                SystemKind::Random => SystemSpec::Random {
                    n,
                    m,
                    p,
                    re_range: [re_range[0], re_range[1]],
                    freq_range: [freq_range[0], freq_range[1]],
                    seed,
                },
                SystemKind::Ladder => {
                    if n % 2 != 0 {
                        return Err(Error::InvalidArgument(
                            "ladder order must be even (2 states per section)".into(),
                        ));
                    }
                    SystemSpec::Ladder {
                        sections: n / 2,
                        r_ohm,
                        l_henry,
                        c_farad,
                    }
                }
            };
            let sys = spec.build()?;
            io::save_statespace(&out, &sys)?;
            println!(
                "wrote {} (n={}, m={}, p={})",
                out.display(),
                sys.order(),
                sys.inputs(),
                sys.outputs()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::DesignCheck { design } => {
            let (gen, filt) = DesignFile::load(&design)?.build()?;
            println!("right: nu = {}", gen.order());
            for e in gen.eigenvalues() {
                println!("  {:+.6e} {:+.6e}i", e.re, e.im);
            }
            println!("left: nu = {}", filt.order());
            for e in filt.eigenvalues() {
                println!("  {:+.6e} {:+.6e}i", e.re, e.im);
            }
            println!("rank and disjointness checks passed");
            Ok(ExitCode::SUCCESS)
        }
        Command::Collect {
            sys,
            design,
            dt,
            duration,
            out,
        } => {
            let sys = io::load_statespace(&sys)?;
            let (gen, filt) = DesignFile::load(&design)?.build()?;
            let steps = (duration / dt).round() as usize;
            let grid = TimeGrid::new(dt, steps.max(2))?;
            std::fs::create_dir_all(&out).map_err(|source| Error::Io {
                path: out.display().to_string(),
                source,
            })?;
            let run = simulate_two_sided(
                &sys,
                &gen,
                &filt,
                &DVector::zeros(sys.order()),
                &grid,
                Integrator::ExactExp,
            )
            .map_err(Error::stage("direct interconnection"))?;
            io::save_trajectory(&out.join("omega.csv"), &run.omega)?;
            io::save_trajectory(&out.join("y.csv"), &run.y)?;
            for j in 0..sys.inputs() {
                let varpi =
                    simulate_filtered_impulse(&sys, &filt, j, &grid, Integrator::ExactExp)
                        .map_err(Error::stage("swapped interconnection"))?;
                io::save_trajectory(&out.join(format!("varpi_{j}.csv")), &varpi)?;
            }
            println!(
                "wrote omega.csv, y.csv and {} varpi CSVs to {}",
                sys.inputs(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate {
            data,
            design,
            nu_tilde,
            q_tilde,
            eta,
            k0,
            out,
        } => {
            let (gen, filt) = DesignFile::load(&design)?.build()?;
            let omega = io::load_trajectory(&data.join("omega.csv"))?;
            let y = io::load_trajectory(&data.join("y.csv"))?;
            let mut varpis = Vec::new();
            for j in 0.. {
                let path = data.join(format!("varpi_{j}.csv"));
                if !path.exists() {
                    break;
                }
                varpis.push(io::load_trajectory(&path)?);
            }
            let opts_c_pi = EstimationOptions {
                window: nu_tilde.unwrap_or(gen.order()),
                eta,
                warmup: k0,
                stride: 1,
            };
            let opts_ups_b = EstimationOptions {
                window: q_tilde,
                eta,
                warmup: k0,
                stride: 1,
            };
            let mut est = estimation::estimate_all(
                &gen, &filt, &omega, &y, &varpis, &opts_c_pi, &opts_ups_b,
            )
            .map_err(Error::stage("estimation"))?;
            let ups_pi = rom::solve_ups_pi(
                &gen,
                &filt,
                &est.c_pi.to_matrix()?,
                &est.ups_b.to_matrix()?,
            )
            .map_err(Error::stage("reduced Sylvester"))?;
            est.ups_pi = Some(MatrixJson::from_matrix(&ups_pi));
            est.save(&out)?;
            println!(
                "wrote {} (converged: {})",
                out.display(),
                est.converged()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Reduce { est, design, out } => {
            let (gen, filt) = DesignFile::load(&design)?.build()?;
            let est = EstimationResult::load(&est)?;
            let c_pi = est.c_pi.to_matrix()?;
            let ups_b = est.ups_b.to_matrix()?;
            let ups_pi = match &est.ups_pi {
                Some(m) => m.to_matrix()?,
                None => rom::solve_ups_pi(&gen, &filt, &c_pi, &ups_b)
                    .map_err(Error::stage("reduced Sylvester"))?,
            };
            let model = rom::build_two_sided(&gen, &filt, &c_pi, &ups_b, &ups_pi)
                .map_err(Error::stage("rom assembly"))?;
            io::save_rom(&out, &model)?;
            println!(
                "wrote {} (order {}, stable: {})",
                out.display(),
                model.order(),
                model.diagnostics.stable
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            rom: rom_path,
            sys,
            design,
            tol,
        } => {
            let sys = io::load_statespace(&sys)?;
            let (gen, filt) = DesignFile::load(&design)?.build()?;
            let model = io::load_rom(&rom_path)?;
            let report = oracle::verify_rom(&model, &sys, &gen, &filt, tol)
                .map_err(Error::stage("verification"))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Bode {
            model,
            fmin,
            fmax,
            points,
            out,
        } => {
            if !(fmin > 0.0 && fmax > fmin && points >= 2) {
                return Err(Error::InvalidArgument(
                    "need 0 < fmin < fmax and points >= 2".into(),
                ));
            }
            let sys = io::load_model(&model)?;
            let grid = bench::log_grid(fmin, fmax, points);
            let bode = oracle::bode_data(&sys, &grid)?;
            io::save_bode_csv(&out, &bode)?;
            println!("wrote {} ({} points)", out.display(), points);
            Ok(ExitCode::SUCCESS)
        }
        Command::Spectrum { model, out } => {
            let sys = io::load_model(&model)?;
            io::save_spectrum_csv(&out, sys.spectrum())?;
            println!("wrote {} ({} eigenvalues)", out.display(), sys.order());
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { config, out } => {
            let cfg = BenchConfig::load(&config)?;
            let results = bench::run_reduction_experiment(&cfg, &out)?;
            println!(
                "e_c_pi = {:.3e}, e_ups_b = {:.3e}, e_ups_pi = {:.3e}",
                results.e_c_pi, results.e_ups_b, results.e_ups_pi
            );
            println!(
                "extraction {:.3}s, oracle {:.3}s, elapsed {:.3}s",
                results.timings.extraction_s, results.timings.oracle_s, results.timings.elapsed_s
            );
            if let Some(nz) = &results.noise {
                println!(
                    "noise study: robust {:.3e} vs instant {:.3e} (ratio {:.3})",
                    nz.mean_robust, nz.mean_instant, nz.ratio
                );
            }
            println!("bundle written to {}", out.display());
            if results.verify.pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}

//! Model-based ground truth: full-order Sylvester solves, exact
//! tangential moments, interpolation verification and Bode data.
//!
//! Everything here needs the system matrices, so it exists to certify
//! the data-driven path on synthetic systems, never to build ROMs in
//! the black-box workflow. Complex arithmetic is confined to this
//! module and transfer evaluation.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::design::{SignalGenerator, SwappedFilter};
use crate::error::{Error, Result};
use crate::lti::{transfer_eval, StateSpace};
use crate::rom::{ReducedModel, RomKind};
use crate::sylvester;

/// Relative residual tolerance certified by the full-order solves.
pub const SYLVESTER_RESIDUAL_TOL: f64 = 1e-8;

/// Full-order Sylvester solutions Pi (of `A Pi + B L = Pi S`) and
/// Upsilon (of `Upsilon A + R C = Q Upsilon`) with their residuals.
#[derive(Debug, Clone)]
pub struct SylvesterSolution {
    pub pi: DMatrix<f64>,
    pub upsilon: DMatrix<f64>,
    pub pi_residual: f64,
    pub upsilon_residual: f64,
}

impl SylvesterSolution {
    pub fn solve(sys: &StateSpace, gen: &SignalGenerator, filt: &SwappedFilter) -> Result<Self> {
        let (pi, pi_residual) = solve_pi(sys, gen)?;
        let (upsilon, upsilon_residual) = solve_upsilon(sys, filt)?;
        Ok(SylvesterSolution {
            pi,
            upsilon,
            pi_residual,
            upsilon_residual,
        })
    }

    /// The three reduced quantities the data-driven path estimates.
    pub fn c_pi(&self, sys: &StateSpace) -> DMatrix<f64> {
        sys.c() * &self.pi
    }

    pub fn ups_b(&self, sys: &StateSpace) -> DMatrix<f64> {
        &self.upsilon * sys.b()
    }

    pub fn ups_pi(&self) -> DMatrix<f64> {
        &self.upsilon * &self.pi
    }
}

/// Solve `A Pi + B L = Pi S` exploiting the block-diagonal structure of
/// S: one shifted complex solve per frequency pair. Returns the
/// solution and its certified residual norm.
pub fn solve_pi(sys: &StateSpace, gen: &SignalGenerator) -> Result<(DMatrix<f64>, f64)> {
    let g = sys.b() * gen.l();
    let pi = sylvester::solve_shifted(sys.a(), &g, gen.blocks())?;
    let res = (sys.a() * &pi + &g - &pi * gen.s()).norm();
    let tol = SYLVESTER_RESIDUAL_TOL * (sys.a().norm() + gen.s().norm()) * pi.norm().max(1.0);
    if res > tol {
        return Err(Error::ResidualTooLarge {
            context: "solve_pi",
            residual: res,
            tolerance: tol,
        });
    }
    Ok((pi, res))
}

/// Solve `Upsilon A + R C = Q Upsilon` via the transposed problem
/// `A^T X + C^T R^T = X Q^T`, which has the same shifted structure.
pub fn solve_upsilon(sys: &StateSpace, filt: &SwappedFilter) -> Result<(DMatrix<f64>, f64)> {
    let gt = sys.c().transpose() * filt.r().transpose();
    let qt_blocks: Vec<_> = filt.blocks().iter().map(|b| b.transposed()).collect();
    let xt = sylvester::solve_shifted(&sys.a().transpose(), &gt, &qt_blocks)?;
    let upsilon = xt.transpose();
    let res = (&upsilon * sys.a() + filt.r() * sys.c() - filt.q() * &upsilon).norm();
    let tol =
        SYLVESTER_RESIDUAL_TOL * (sys.a().norm() + filt.q().norm()) * upsilon.norm().max(1.0);
    if res > tol {
        return Err(Error::ResidualTooLarge {
            context: "solve_upsilon",
            residual: res,
            tolerance: tol,
        });
    }
    Ok((upsilon, res))
}

/// Zeroth-order tangential moments of the transfer matrix.
#[derive(Debug, Clone)]
pub struct MomentSet {
    /// (s_i, l_i, W(s_i) l_i)
    pub right: Vec<(Complex64, DVector<f64>, DVector<Complex64>)>,
    /// (q_i, r_i, r_i W(q_i))
    pub left: Vec<(Complex64, RowDVector<f64>, RowDVector<Complex64>)>,
}

pub fn tangential_moments(
    sys: &StateSpace,
    gen: &SignalGenerator,
    filt: &SwappedFilter,
) -> Result<MomentSet> {
    let mut right = Vec::new();
    for (s, l) in gen.points() {
        let w = transfer_eval(sys, s)?;
        let lc = l.map(|x| Complex64::new(x, 0.0));
        right.push((s, l, &w * lc));
    }
    let mut left = Vec::new();
    for (q, r) in filt.points() {
        let w = transfer_eval(sys, q)?;
        let rc = r.map(|x| Complex64::new(x, 0.0));
        left.push((q, r, rc * &w));
    }
    Ok(MomentSet { right, left })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointCheck {
    /// Interpolation frequency (rad/s, the +i branch).
    pub freq: f64,
    pub rel_error: f64,
    /// Whether the ROM's kind claims this condition.
    pub claimed: bool,
    pub pass: bool,
}

/// Per-point interpolation report produced by [`verify_rom`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub kind: RomKind,
    pub tol: f64,
    pub right: Vec<PointCheck>,
    pub left: Vec<PointCheck>,
    /// True iff every claimed condition passed at `tol`.
    pub pass: bool,
}

impl VerifyReport {
    pub fn worst_claimed(&self) -> f64 {
        self.right
            .iter()
            .chain(&self.left)
            .filter(|c| c.claimed)
            .map(|c| c.rel_error)
            .fold(0.0, f64::max)
    }

    pub fn worst_unclaimed(&self) -> f64 {
        self.right
            .iter()
            .chain(&self.left)
            .filter(|c| !c.claimed)
            .map(|c| c.rel_error)
            .fold(0.0, f64::max)
    }
}

/// Compare ROM and FOM tangential moments at every interpolation point
/// of the design; a report is always produced.
pub fn verify_rom(
    rom: &ReducedModel,
    sys: &StateSpace,
    gen: &SignalGenerator,
    filt: &SwappedFilter,
    tol: f64,
) -> Result<VerifyReport> {
    let rom_ss = rom.to_statespace();
    let claims_right = matches!(rom.kind, RomKind::TwoSided | RomKind::RightOnly);
    let claims_left = matches!(rom.kind, RomKind::TwoSided | RomKind::LeftOnly);

    let mut right = Vec::new();
    for (s, l) in gen.points() {
        let w_fom = transfer_eval(sys, s)?;
        let w_rom = transfer_eval(&rom_ss, s)?;
        let lc = l.map(|x| Complex64::new(x, 0.0));
        let m_fom = &w_fom * &lc;
        let m_rom = &w_rom * &lc;
        let rel_error = (m_rom - &m_fom).norm() / m_fom.norm();
        right.push(PointCheck {
            freq: s.im,
            rel_error,
            claimed: claims_right,
            pass: rel_error <= tol,
        });
    }

    let mut left = Vec::new();
    for (q, r) in filt.points() {
        let w_fom = transfer_eval(sys, q)?;
        let w_rom = transfer_eval(&rom_ss, q)?;
        let rc = r.map(|x| Complex64::new(x, 0.0));
        let m_fom = &rc * &w_fom;
        let m_rom = &rc * &w_rom;
        let rel_error = (m_rom - &m_fom).norm() / m_fom.norm();
        left.push(PointCheck {
            freq: q.im,
            rel_error,
            claimed: claims_left,
            pass: rel_error <= tol,
        });
    }

    let pass = right
        .iter()
        .chain(&left)
        .filter(|c| c.claimed)
        .all(|c| c.pass);
    Ok(VerifyReport {
        kind: rom.kind,
        tol,
        right,
        left,
        pass,
    })
}

/// Entrywise magnitude (dB) and phase (deg) of W(iw) over a frequency
/// grid, plus the tangential magnitudes used in the one- vs two-sided
/// comparisons.
#[derive(Debug, Clone)]
pub struct BodeData {
    pub freqs: Vec<f64>,
    pub outputs: usize,
    pub inputs: usize,
    /// `[point][i * inputs + j]`
    pub mag_db: Vec<Vec<f64>>,
    pub phase_deg: Vec<Vec<f64>>,
}

pub fn bode_data(sys: &StateSpace, freqs: &[f64]) -> Result<BodeData> {
    let (p, m) = (sys.outputs(), sys.inputs());
    let mut mag_db = Vec::with_capacity(freqs.len());
    let mut phase_deg = Vec::with_capacity(freqs.len());
    for &f in freqs {
        let w = transfer_eval(sys, Complex64::new(0.0, f))?;
        let mut mags = Vec::with_capacity(p * m);
        let mut phases = Vec::with_capacity(p * m);
        for i in 0..p {
            for j in 0..m {
                mags.push(20.0 * w[(i, j)].norm().log10());
                phases.push(w[(i, j)].arg().to_degrees());
            }
        }
        mag_db.push(mags);
        phase_deg.push(phases);
    }
    Ok(BodeData {
        freqs: freqs.to_vec(),
        outputs: p,
        inputs: m,
        mag_db,
        phase_deg,
    })
}

/// |W(iw) l| per output channel over a grid.
pub fn bode_tangential_right(
    sys: &StateSpace,
    freqs: &[f64],
    l: &DVector<f64>,
) -> Result<Vec<Vec<f64>>> {
    let lc = l.map(|x| Complex64::new(x, 0.0));
    freqs
        .iter()
        .map(|&f| {
            let w = transfer_eval(sys, Complex64::new(0.0, f))?;
            Ok((&w * &lc).iter().map(|x| x.norm()).collect())
        })
        .collect()
}

/// |r W(iw)| per input channel over a grid.
pub fn bode_tangential_left(
    sys: &StateSpace,
    freqs: &[f64],
    r: &RowDVector<f64>,
) -> Result<Vec<Vec<f64>>> {
    let rc = r.map(|x| Complex64::new(x, 0.0));
    freqs
        .iter()
        .map(|&f| {
            let w = transfer_eval(sys, Complex64::new(0.0, f))?;
            Ok((&rc * &w).iter().map(|x| x.norm()).collect())
        })
        .collect()
}

/// Normalised approximation error `||x_est - x_true|| / ||x_true||` in
/// the induced 2-norm.
pub fn normalised_error(x_est: &DMatrix<f64>, x_true: &DMatrix<f64>) -> f64 {
    let spectral = |m: &DMatrix<f64>| m.clone().svd(false, false).singular_values.max();
    let denom = spectral(x_true);
    assert!(denom > 0.0, "normalised_error requires x_true != 0");
    spectral(&(x_est - x_true)) / denom
}

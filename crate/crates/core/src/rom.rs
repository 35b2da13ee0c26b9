//! Reduced-order model assembly: the small nu-by-nu Sylvester solve
//! for UpsilonPi and the two-sided / one-sided model families.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::design::{assert_disjoint, SignalGenerator, SwappedFilter};
use crate::error::{Error, Result};
use crate::lti::{spectrum, StateSpace};
use crate::sylvester;

/// Which interpolation conditions the model claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RomKind {
    TwoSided,
    RightOnly,
    LeftOnly,
}

impl std::fmt::Display for RomKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RomKind::TwoSided => "two_sided",
            RomKind::RightOnly => "right_only",
            RomKind::LeftOnly => "left_only",
        };
        f.write_str(s)
    }
}

/// Order-nu model `xi' = F xi + G u`, `psi = H xi`, tagged with the
/// interpolation data it was built from.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub kind: RomKind,
    /// Right interpolation data (S, L) the model claims, if any.
    pub right: Option<SignalGenerator>,
    /// Left interpolation data (Q, R) the model claims, if any.
    pub left: Option<SwappedFilter>,
    pub diagnostics: RomDiagnostics,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RomDiagnostics {
    /// Condition number of UpsilonPi (two-sided builds only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ups_pi_cond: Option<f64>,
    /// Largest real part over the ROM spectrum. Stability is reported,
    /// not enforced; it follows from the interpolation-point choice.
    pub max_re: f64,
    pub stable: bool,
}

impl ReducedModel {
    pub fn order(&self) -> usize {
        self.f.nrows()
    }

    pub fn to_statespace(&self) -> StateSpace {
        StateSpace::new(self.f.clone(), self.g.clone(), self.h.clone())
            .expect("ReducedModel dimensions are consistent by construction")
    }
}

fn min_spectral_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for x in a {
        for y in b {
            gap = gap.min((x - y).norm());
        }
    }
    gap
}

fn check_disjoint_spectra(
    fixed: &[Complex64],
    built: &DMatrix<f64>,
    context: &'static str,
) -> Result<Vec<Complex64>> {
    let eigs = spectrum(built);
    let scale = built.norm().max(1.0);
    let gap = min_spectral_gap(fixed, &eigs);
    if gap <= 1e-9 * scale {
        let bad = fixed
            .iter()
            .find(|x| eigs.iter().any(|y| (*x - y).norm() <= 1e-9 * scale))
            .copied()
            .unwrap_or(fixed[0]);
        return Err(Error::Stage {
            stage: context,
            source: Box::new(Error::SpectrumOverlap { value: bad }),
        });
    }
    Ok(eigs)
}

/// Solve `Q X - X S = R c_pi - ups_b L` for the reduced coupling matrix
/// UpsilonPi. Both Q and S are block-diagonal with known simple
/// eigenvalues, so the equation decouples into independent solves of at
/// most four unknowns; uniqueness requires disjoint frequency sets.
/// The solution carries a residual certificate.
pub fn solve_ups_pi(
    gen: &SignalGenerator,
    filt: &SwappedFilter,
    c_pi: &DMatrix<f64>,
    ups_b: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    assert_disjoint(gen, filt)?;
    let w = filt.r() * c_pi - ups_b * gen.l();
    let x = sylvester::solve_block_diag(filt.blocks(), gen.blocks(), &w)?;
    let res = sylvester::residual(filt.q(), gen.s(), &w, &x);
    let tol = 1e-10 * (filt.q().norm() + gen.s().norm()) * x.norm().max(1.0);
    if res > tol {
        return Err(Error::ResidualTooLarge {
            context: "solve_ups_pi",
            residual: res,
            tolerance: tol,
        });
    }
    Ok(x)
}

/// Condition-number limit for inverting UpsilonPi.
pub const UPS_PI_COND_LIMIT: f64 = 1e12;

/// Assemble the two-sided ROM: `G = (UpsilonPi)^-1 UpsilonB`,
/// `F = S - G L`, `H = CPi`. Matches the right and left interpolation
/// data simultaneously.
pub fn build_two_sided(
    gen: &SignalGenerator,
    filt: &SwappedFilter,
    c_pi: &DMatrix<f64>,
    ups_b: &DMatrix<f64>,
    ups_pi: &DMatrix<f64>,
) -> Result<ReducedModel> {
    let nu = gen.order();
    if c_pi.ncols() != nu || ups_b.nrows() != filt.order() || ups_pi.nrows() != filt.order()
        || ups_pi.ncols() != nu
    {
        return Err(Error::DimensionMismatch {
            context: "build_two_sided",
            expected: format!("c_pi p x {nu}, ups_b {} x m, ups_pi {} x {nu}", filt.order(), filt.order()),
            found: format!(
                "c_pi {}x{}, ups_b {}x{}, ups_pi {}x{}",
                c_pi.nrows(), c_pi.ncols(), ups_b.nrows(), ups_b.ncols(), ups_pi.nrows(), ups_pi.ncols()
            ),
        });
    }
    let svd = ups_pi.clone().svd(false, false);
    let cond = svd.singular_values.max() / svd.singular_values.min();
    if !cond.is_finite() || cond > UPS_PI_COND_LIMIT {
        return Err(Error::IllConditioned {
            context: "UpsilonPi inversion",
            cond,
            limit: UPS_PI_COND_LIMIT,
        });
    }
    let g = ups_pi.clone().lu().solve(ups_b).ok_or(Error::SolveFailed {
        context: "UpsilonPi inversion",
    })?;
    let f = gen.s() - &g * gen.l();
    let eigs = check_disjoint_spectra(&gen.eigenvalues(), &f, "build_two_sided")?;
    let max_re = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(ReducedModel {
        f,
        g,
        h: c_pi.clone(),
        kind: RomKind::TwoSided,
        right: Some(gen.clone()),
        left: Some(filt.clone()),
        diagnostics: RomDiagnostics {
            ups_pi_cond: Some(cond),
            max_re,
            stable: max_re < 0.0,
        },
    })
}

/// Free-parameter choice for the one-sided families.
#[derive(Debug, Clone)]
pub enum FreeParameter {
    /// Use the given matrix directly (still spectrum-checked).
    Supplied(DMatrix<f64>),
    /// Place the ROM poles at the given stable locations.
    PolePlacement(Vec<f64>),
}

impl FreeParameter {
    /// Default pole targets -10*(1+idx), idx = 0..nu.
    pub fn default_poles(nu: usize) -> FreeParameter {
        FreeParameter::PolePlacement((0..nu).map(|i| -10.0 * (1 + i) as f64).collect())
    }
}

/// Deterministic generic fill for the pole-placement auxiliary matrix.
fn generic_fill(rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| {
        1.0 + 0.5 * (((i * cols + j + 1) as f64) * 0.7391).sin()
    })
}

/// Sylvester-based pole placement for `S - G L`: pick diagonal F_d with
/// the target poles, solve `T S - F_d T = W L` row by row, then
/// `G = T^-1 W`.
fn place_output_injection(
    s: &DMatrix<f64>,
    l: &DMatrix<f64>,
    targets: &[f64],
) -> Result<DMatrix<f64>> {
    let nu = s.nrows();
    let m = l.nrows();
    if targets.len() != nu {
        return Err(Error::InvalidArgument(format!(
            "pole placement needs {nu} targets, got {}",
            targets.len()
        )));
    }
    for (i, &t) in targets.iter().enumerate() {
        if !(t < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pole target {t} at index {i} must be strictly stable"
            )));
        }
        if targets[..i].contains(&t) {
            return Err(Error::InvalidArgument(format!("duplicate pole target {t}")));
        }
    }
    let w = generic_fill(nu, m);
    let rhs = &w * l; // nu x nu
    let st = s.transpose();
    let mut t_mat = DMatrix::zeros(nu, nu);
    for i in 0..nu {
        // row i of T: t_i (S - f_i I) = (W L)_i
        let mut coeff = st.clone();
        for d in 0..nu {
            coeff[(d, d)] -= targets[i];
        }
        let b = rhs.row(i).transpose();
        let ti = coeff.lu().solve(&b).ok_or(Error::SolveFailed {
            context: "pole placement (T rows)",
        })?;
        t_mat.set_row(i, &ti.transpose());
    }
    let g = t_mat.lu().solve(&w).ok_or(Error::SolveFailed {
        context: "pole placement (T inversion)",
    })?;
    Ok(g)
}

/// Dual placement for `Q - R H`: solve `Q T - T F_d = R W` column by
/// column, then `H = W T^-1`.
fn place_state_feedback(
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    targets: &[f64],
) -> Result<DMatrix<f64>> {
    // Q - R H = (S^T - L^T G^T)^T with S := Q^T, L := R^T.
    let g = place_output_injection(&q.transpose(), &r.transpose(), targets)?;
    Ok(g.transpose())
}

/// One-sided right family `xi' = (S - GL) xi + G u`, `psi = CPi xi`.
pub fn build_one_sided_right(
    gen: &SignalGenerator,
    c_pi: &DMatrix<f64>,
    free: FreeParameter,
) -> Result<ReducedModel> {
    let g = match free {
        FreeParameter::Supplied(g) => g,
        FreeParameter::PolePlacement(targets) => {
            place_output_injection(gen.s(), gen.l(), &targets)?
        }
    };
    if (g.nrows(), g.ncols()) != (gen.order(), gen.l().nrows()) {
        return Err(Error::DimensionMismatch {
            context: "one-sided right G",
            expected: format!("{}x{}", gen.order(), gen.l().nrows()),
            found: format!("{}x{}", g.nrows(), g.ncols()),
        });
    }
    let f = gen.s() - &g * gen.l();
    let eigs = check_disjoint_spectra(&gen.eigenvalues(), &f, "build_one_sided_right")?;
    let max_re = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(ReducedModel {
        f,
        g,
        h: c_pi.clone(),
        kind: RomKind::RightOnly,
        right: Some(gen.clone()),
        left: None,
        diagnostics: RomDiagnostics {
            ups_pi_cond: None,
            max_re,
            stable: max_re < 0.0,
        },
    })
}

/// One-sided left family `xi' = (Q - RH) xi + UpsilonB u`, `psi = H xi`.
pub fn build_one_sided_left(
    filt: &SwappedFilter,
    ups_b: &DMatrix<f64>,
    free: FreeParameter,
) -> Result<ReducedModel> {
    let h = match free {
        FreeParameter::Supplied(h) => h,
        FreeParameter::PolePlacement(targets) => {
            place_state_feedback(filt.q(), filt.r(), &targets)?
        }
    };
    if (h.nrows(), h.ncols()) != (filt.r().ncols(), filt.order()) {
        return Err(Error::DimensionMismatch {
            context: "one-sided left H",
            expected: format!("{}x{}", filt.r().ncols(), filt.order()),
            found: format!("{}x{}", h.nrows(), h.ncols()),
        });
    }
    let f = filt.q() - filt.r() * &h;
    let eigs = check_disjoint_spectra(&filt.eigenvalues(), &f, "build_one_sided_left")?;
    let max_re = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(ReducedModel {
        f,
        g: ups_b.clone(),
        h,
        kind: RomKind::LeftOnly,
        right: None,
        left: Some(filt.clone()),
        diagnostics: RomDiagnostics {
            ups_pi_cond: None,
            max_re,
            stable: max_re < 0.0,
        },
    })
}

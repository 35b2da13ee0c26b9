//! Data-driven recovery of CPi and UpsilonB from time series.
//!
//! The CPi estimator regresses windowed generator-state snapshots
//! against output samples, row by row; the UpsilonB estimator unwinds
//! the filter state by the exact filter exponential, either from a
//! single snapshot or as a least squares over a snapshot window for
//! noise robustness. Neither touches the system matrices, and the cost
//! of both is independent of the full order n.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{SignalGenerator, SwappedFilter};
use crate::error::{Error, Result};
use crate::lti::Trajectory;

/// Stopping/windowing parameters shared by both estimators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationOptions {
    /// Snapshot window width (nu-tilde for CPi, q-tilde for UpsilonB).
    pub window: usize,
    /// Convergence threshold on the per-unit-time estimate increment.
    pub eta: f64,
    /// First sample index considered (transient warm-up discard).
    pub warmup: usize,
    /// Evaluate the stopping rule every `stride` samples.
    pub stride: usize,
}

impl EstimationOptions {
    pub const DEFAULT_ETA: f64 = 1e-9;

    /// Noise-free defaults: minimal window, tight threshold.
    pub fn noise_free(window: usize, warmup: usize) -> Self {
        EstimationOptions {
            window,
            eta: Self::DEFAULT_ETA,
            warmup,
            stride: 1,
        }
    }
}

/// Convergence record for one estimated row/column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceLog {
    /// (t_k, increment rate) pairs at each evaluation.
    pub rates: Vec<(f64, f64)>,
    pub converged: bool,
    /// Window width actually used (after any rank-driven widening).
    pub final_window: usize,
    /// Number of least-squares solves performed.
    pub ls_solves: usize,
    /// Total snapshot rows consumed across all solves.
    pub rows_processed: usize,
}

fn numeric_rank_of(m: &DMatrix<f64>) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return 0;
    }
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * smax;
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

fn check_shared_grid(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.times() != b.times() {
        return Err(Error::InvalidArgument(
            "trajectories must share the same time grid".into(),
        ));
    }
    Ok(())
}

/// Estimate one row of CPi from windowed snapshots of omega and one
/// output channel.
fn estimate_row(
    omega: &Trajectory,
    y_channel: usize,
    y: &Trajectory,
    nu: usize,
    opts: &EstimationOptions,
) -> Result<(DVector<f64>, ConvergenceLog)> {
    let total = omega.len();
    let mut width = opts.window.max(nu);
    let mut log = ConvergenceLog {
        rates: Vec::new(),
        converged: false,
        final_window: width,
        ls_solves: 0,
        rows_processed: 0,
    };
    let mut prev: Option<(f64, DVector<f64>)> = None;
    let mut estimate: Option<DVector<f64>> = None;
    let mut k = opts.warmup.max(width - 1);
    let mut ever_full_rank = false;
    while k < total {
        let avail = (k + 1).min(width);
        let start = k + 1 - avail;
        let r_tilde = omega.data().rows(start, avail).into_owned();
        if numeric_rank_of(&r_tilde) < nu {
            // widen the window by nu, capped at the available data
            if avail < k + 1 {
                width = (width + nu).min(total);
                log.final_window = width;
                continue;
            }
            k += opts.stride;
            continue;
        }
        ever_full_rank = true;
        let e_tilde = y.data().view((start, y_channel), (avail, 1)).into_owned();
        let svd = r_tilde.svd(true, true);
        let x = svd
            .solve(&e_tilde, f64::EPSILON * avail as f64)
            .map_err(|_| Error::SolveFailed {
                context: "CPi least squares",
            })?
            .column(0)
            .into_owned();
        log.ls_solves += 1;
        log.rows_processed += avail;
        let t_k = omega.times()[k];
        if let Some((t_prev, x_prev)) = &prev {
            let rate = (&x - x_prev).norm() / (t_k - t_prev);
            log.rates.push((t_k, rate));
            if rate <= opts.eta {
                log.converged = true;
                estimate = Some(x);
                break;
            }
        }
        prev = Some((t_k, x.clone()));
        estimate = Some(x);
        k += opts.stride;
    }
    match estimate {
        Some(x) => Ok((x, log)),
        None => {
            if ever_full_rank {
                Err(Error::SolveFailed {
                    context: "CPi estimation: no estimate produced",
                })
            } else {
                Err(Error::RankDeficient {
                    context: "CPi snapshots never reached full rank (non-excitable experiment)",
                    rank: 0,
                    required: nu,
                })
            }
        }
    }
}

/// Estimate CPi row by row from the direct-interconnection data.
/// Each output channel is regressed independently; estimating row j
/// uses only channel j of y.
pub fn estimate_c_pi(
    omega: &Trajectory,
    y: &Trajectory,
    nu: usize,
    opts: &EstimationOptions,
) -> Result<(DMatrix<f64>, Vec<ConvergenceLog>)> {
    check_shared_grid(omega, y)?;
    if omega.channel_count() != nu {
        return Err(Error::DimensionMismatch {
            context: "omega trajectory",
            expected: format!("{nu} channels"),
            found: format!("{} channels", omega.channel_count()),
        });
    }
    if opts.window < nu {
        return Err(Error::InvalidArgument(format!(
            "window width {} must be at least nu = {nu}",
            opts.window
        )));
    }
    let p = y.channel_count();
    let mut c_pi = DMatrix::zeros(p, nu);
    let mut logs = Vec::with_capacity(p);
    for j in 0..p {
        let (row, log) = estimate_row(omega, j, y, nu, opts)?;
        c_pi.row_mut(j).copy_from(&row.transpose());
        logs.push(log);
    }
    Ok((c_pi, logs))
}

/// Single-snapshot estimate `e^{-Q t_k} varpi(t_k)` of one UpsilonB
/// column.
pub fn estimate_ups_b_instant(
    filt: &SwappedFilter,
    varpi_sample: &DVector<f64>,
    t_k: f64,
) -> Result<DVector<f64>> {
    if varpi_sample.len() != filt.order() {
        return Err(Error::DimensionMismatch {
            context: "varpi sample",
            expected: format!("{}", filt.order()),
            found: format!("{}", varpi_sample.len()),
        });
    }
    Ok(filt.exp(-t_k) * varpi_sample)
}

/// Windowed least-squares estimate of one UpsilonB column: stacks the
/// model `e^{Q t_i} v = varpi(t_i)` over the last q-tilde snapshots and
/// solves by orthogonal factorization. The stacked coefficient matrix
/// is always full column rank (orthogonal blocks), so no rank check is
/// needed; with window 1 this reduces exactly to the instantaneous
/// estimate.
pub fn estimate_ups_b_robust(
    filt: &SwappedFilter,
    varpi: &Trajectory,
    opts: &EstimationOptions,
) -> Result<(DVector<f64>, ConvergenceLog)> {
    let nu = filt.order();
    if varpi.channel_count() != nu {
        return Err(Error::DimensionMismatch {
            context: "varpi trajectory",
            expected: format!("{nu} channels"),
            found: format!("{} channels", varpi.channel_count()),
        });
    }
    if opts.window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    let total = varpi.len();
    let q_tilde = opts.window;
    let mut log = ConvergenceLog {
        rates: Vec::new(),
        converged: false,
        final_window: q_tilde,
        ls_solves: 0,
        rows_processed: 0,
    };
    let mut prev: Option<(f64, DVector<f64>)> = None;
    let mut estimate: Option<DVector<f64>> = None;
    let mut k = opts.warmup.max(q_tilde - 1);
    while k < total {
        let avail = (k + 1).min(q_tilde);
        let start = k + 1 - avail;
        let mut p_stack = DMatrix::zeros(avail * nu, nu);
        let mut o_stack = DVector::zeros(avail * nu);
        for (b, i) in (start..=k).enumerate() {
            let t_i = varpi.times()[i];
            p_stack
                .view_mut((b * nu, 0), (nu, nu))
                .copy_from(&filt.exp(t_i));
            o_stack.rows_mut(b * nu, nu).copy_from(&varpi.sample(i));
        }
        let svd = p_stack.svd(true, true);
        let x = svd
            .solve(&o_stack, f64::EPSILON * (avail * nu) as f64)
            .map_err(|_| Error::SolveFailed {
                context: "UpsilonB least squares",
            })?
            .column(0)
            .into_owned();
        log.ls_solves += 1;
        log.rows_processed += avail * nu;
        let t_k = varpi.times()[k];
        if let Some((t_prev, x_prev)) = &prev {
            let rate = (&x - x_prev).norm() / (t_k - t_prev);
            log.rates.push((t_k, rate));
            if rate <= opts.eta {
                log.converged = true;
                estimate = Some(x);
                break;
            }
        }
        prev = Some((t_k, x.clone()));
        estimate = Some(x);
        k += opts.stride;
    }
    estimate
        .map(|x| (x, log))
        .ok_or_else(|| Error::InvalidArgument("no varpi samples past the warm-up index".into()))
}

/// Estimate the full UpsilonB matrix from one impulse-response
/// trajectory per input.
pub fn estimate_ups_b(
    filt: &SwappedFilter,
    varpis: &[Trajectory],
    opts: &EstimationOptions,
) -> Result<(DMatrix<f64>, Vec<ConvergenceLog>)> {
    if varpis.is_empty() {
        return Err(Error::InvalidArgument("no impulse trajectories given".into()));
    }
    let nu = filt.order();
    let m = varpis.len();
    let mut ups_b = DMatrix::zeros(nu, m);
    let mut logs = Vec::with_capacity(m);
    for (j, traj) in varpis.iter().enumerate() {
        let (col, log) = estimate_ups_b_robust(filt, traj, opts)?;
        ups_b.set_column(j, &col);
        logs.push(log);
    }
    Ok((ups_b, logs))
}

/// Row-major dense matrix for JSON serialisation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::InvalidArgument(format!(
                "matrix payload has {} entries, expected {}",
                self.data.len(),
                self.rows * self.cols
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// Estimated reduced quantities with convergence diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationResult {
    pub c_pi: MatrixJson,
    pub ups_b: MatrixJson,
    /// Filled by the reduced Sylvester solve once both estimates exist.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ups_pi: Option<MatrixJson>,
    pub c_pi_logs: Vec<ConvergenceLog>,
    pub ups_b_logs: Vec<ConvergenceLog>,
}

impl EstimationResult {
    pub fn converged(&self) -> bool {
        self.c_pi_logs.iter().all(|l| l.converged)
            && self.ups_b_logs.iter().all(|l| l.converged)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Run both estimators on collected data.
pub fn estimate_all(
    gen: &SignalGenerator,
    filt: &SwappedFilter,
    omega: &Trajectory,
    y: &Trajectory,
    varpis: &[Trajectory],
    opts_c_pi: &EstimationOptions,
    opts_ups_b: &EstimationOptions,
) -> Result<EstimationResult> {
    let (c_pi, c_pi_logs) = estimate_c_pi(omega, y, gen.order(), opts_c_pi)?;
    let (ups_b, ups_b_logs) = estimate_ups_b(filt, varpis, opts_ups_b)?;
    Ok(EstimationResult {
        c_pi: MatrixJson::from_matrix(&c_pi),
        ups_b: MatrixJson::from_matrix(&ups_b),
        ups_pi: None,
        c_pi_logs,
        ups_b_logs,
    })
}

//! Continuous-time LTI state-space systems, exact simulation of the
//! exosystem interconnections, and frequency-domain interrogation.

use std::sync::OnceLock;

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;

use crate::design::{SignalGenerator, SwappedFilter};
use crate::error::{Error, Result};

/// Largest order for which the transfer-evaluation conditioning guard
/// computes the full spectrum eagerly. Above this the guard falls back
/// to the LU pivot check.
pub const GUARD_EIG_MAX_N: usize = 800;

/// Real state-space model `x' = Ax + Bu`, `y = Cx`.
#[derive(Debug)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    eigs: OnceLock<Vec<Complex64>>,
}

impl Clone for StateSpace {
    fn clone(&self) -> Self {
        let eigs = OnceLock::new();
        if let Some(e) = self.eigs.get() {
            let _ = eigs.set(e.clone());
        }
        StateSpace {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            eigs,
        }
    }
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "StateSpace A",
                expected: format!("{n}x{n}"),
                found: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "StateSpace B",
                expected: format!("{n} rows"),
                found: format!("{} rows", b.nrows()),
            });
        }
        if c.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "StateSpace C",
                expected: format!("{n} cols"),
                found: format!("{} cols", c.ncols()),
            });
        }
        if n == 0 || b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "state, input and output dimensions must be positive".into(),
            ));
        }
        Ok(StateSpace {
            a,
            b,
            c,
            eigs: OnceLock::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Eigenvalues of A, computed once and cached.
    pub fn spectrum(&self) -> &[Complex64] {
        self.eigs.get_or_init(|| spectrum(&self.a))
    }

    /// Seed the eigenvalue cache with externally certified values.
    ///
    /// Intended for constructed systems whose spectrum is known exactly
    /// (a similarity-residual certificate must be checked by the caller);
    /// avoids an O(n^3) dense eigensolve at large order. A no-op if the
    /// cache is already populated.
    pub fn seed_spectrum(&self, mut eigs: Vec<Complex64>) {
        sort_eigs(&mut eigs);
        let _ = self.eigs.set(eigs);
    }

    pub fn max_re(&self) -> f64 {
        self.spectrum()
            .iter()
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn assert_stable(&self) -> Result<()> {
        let max_re = self.max_re();
        if max_re >= 0.0 {
            Err(Error::Unstable { max_re })
        } else {
            Ok(())
        }
    }
}

/// Uniform sampling grid `t0 + k*dt`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive and finite, got {dt}"
            )));
        }
        if len == 0 {
            return Err(Error::InvalidArgument("grid must have at least one sample".into()));
        }
        Ok(TimeGrid { t0: 0.0, dt, len })
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.t0 + k as f64 * self.dt).collect()
    }
}

/// Sampled multichannel signal; one row per instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    data: DMatrix<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, data: DMatrix<f64>) -> Result<Self> {
        if times.len() != data.nrows() {
            return Err(Error::DimensionMismatch {
                context: "Trajectory",
                expected: format!("{} rows", times.len()),
                found: format!("{} rows", data.nrows()),
            });
        }
        for i in 1..times.len() {
            if !(times[i] > times[i - 1]) {
                return Err(Error::InvalidArgument(format!(
                    "sample times must be strictly increasing (index {i})"
                )));
            }
        }
        Ok(Trajectory { times, data })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channel_count(&self) -> usize {
        self.data.ncols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.data.row(i).transpose()
    }

    /// Verify the grid is uniform and return its step.
    pub fn uniform_step(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::InvalidArgument(
                "at least two samples needed to determine a step".into(),
            ));
        }
        let dt = self.times[1] - self.times[0];
        for i in 2..self.times.len() {
            let step = self.times[i] - self.times[i - 1];
            if (step - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(Error::NonUniformGrid {
                    index: i,
                    expected: dt,
                    found: step,
                });
            }
        }
        Ok(dt)
    }
}

fn sort_eigs(eigs: &mut [Complex64]) {
    eigs.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
}

/// Eigenvalues of a square real matrix, sorted by real part then
/// imaginary part.
pub fn spectrum(m: &DMatrix<f64>) -> Vec<Complex64> {
    assert_eq!(m.nrows(), m.ncols(), "spectrum requires a square matrix");
    let mut eigs: Vec<Complex64> = m.clone().complex_eigenvalues().iter().copied().collect();
    sort_eigs(&mut eigs);
    eigs
}

/// Transfer matrix W(s) = C (sI - A)^-1 B via one complex linear solve.
///
/// The inverse is never formed. Points within `1e-10 * ||A||_F` of an
/// eigenvalue of A are rejected; for very large systems with no cached
/// spectrum the guard degrades to the factorization singularity check.
pub fn transfer_eval(sys: &StateSpace, s: Complex64) -> Result<DMatrix<Complex64>> {
    let n = sys.order();
    let guard = 1e-10 * sys.a.norm();
    let eigs = if sys.eigs.get().is_some() || n <= GUARD_EIG_MAX_N {
        Some(sys.spectrum())
    } else {
        None
    };
    if let Some(eigs) = eigs {
        if let Some(bad) = eigs.iter().find(|e| (s - *e).norm() < guard) {
            return Err(Error::NearSingular {
                point: s,
                eigenvalue: *bad,
            });
        }
    }
    let mut m = DMatrix::<Complex64>::from_fn(n, n, |i, j| Complex::new(-sys.a[(i, j)], 0.0));
    for i in 0..n {
        m[(i, i)] += s;
    }
    let rhs = sys.b.map(|x| Complex::new(x, 0.0));
    let lu = m.lu();
    let x = lu.solve(&rhs).ok_or(Error::SolveFailed {
        context: "transfer_eval",
    })?;
    let c = sys.c.map(|x| Complex::new(x, 0.0));
    Ok(c * x)
}

/// How trajectories are produced: exact exponential stepping (default)
/// or fixed-step RK4 emulating solver-generated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    ExactExp,
    Rk4 { substeps: usize },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::ExactExp
    }
}

/// One-step propagator for an autonomous system `z' = M z` on a uniform grid.
enum Stepper {
    Exact(DMatrix<f64>),
    Rk4 { m: DMatrix<f64>, h: f64, substeps: usize },
}

impl Stepper {
    fn new(m: DMatrix<f64>, dt: f64, integrator: Integrator) -> Self {
        match integrator {
            Integrator::ExactExp => Stepper::Exact((m * dt).exp()),
            Integrator::Rk4 { substeps } => {
                let substeps = substeps.max(1);
                Stepper::Rk4 {
                    m,
                    h: dt / substeps as f64,
                    substeps,
                }
            }
        }
    }

    fn step(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            Stepper::Exact(e) => e * z,
            Stepper::Rk4 { m, h, substeps } => {
                let mut z = z.clone();
                for _ in 0..*substeps {
                    let k1 = m * &z;
                    let k2 = m * (&z + &k1 * (h / 2.0));
                    let k3 = m * (&z + &k2 * (h / 2.0));
                    let k4 = m * (&z + &k3 * *h);
                    z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                }
                z
            }
        }
    }
}

fn run_autonomous(
    m: DMatrix<f64>,
    z0: DVector<f64>,
    grid: &TimeGrid,
    integrator: Integrator,
) -> Vec<DVector<f64>> {
    let stepper = Stepper::new(m, grid.dt, integrator);
    let mut states = Vec::with_capacity(grid.len);
    let mut z = z0;
    for k in 0..grid.len {
        if k > 0 {
            z = stepper.step(&z);
        }
        states.push(z.clone());
    }
    states
}

fn collect_rows(
    times: Vec<f64>,
    states: &[DVector<f64>],
    offset: usize,
    count: usize,
) -> Trajectory {
    let data = DMatrix::from_fn(states.len(), count, |i, j| states[i][offset + j]);
    Trajectory::new(times, data).expect("constructed grid is strictly increasing")
}

/// Simulate the direct interconnection `x' = Ax + B L w`, `w' = S w`
/// driven by the signal generator, by exact exponential stepping of the
/// augmented autonomous system. Returns the sampled output `y` and
/// generator state `w`.
pub fn simulate_autonomous_augmented(
    sys: &StateSpace,
    gen: &SignalGenerator,
    x0: &DVector<f64>,
    grid: &TimeGrid,
    integrator: Integrator,
) -> Result<(Trajectory, Trajectory)> {
    let (n, m, nu) = (sys.order(), sys.inputs(), gen.order());
    if gen.l().nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "generator direction matrix L",
            expected: format!("{m} rows"),
            found: format!("{} rows", gen.l().nrows()),
        });
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            context: "initial state x0",
            expected: format!("{n}"),
            found: format!("{}", x0.len()),
        });
    }
    let mut aug = DMatrix::<f64>::zeros(n + nu, n + nu);
    aug.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    aug.view_mut((0, n), (n, nu)).copy_from(&(&sys.b * gen.l()));
    aug.view_mut((n, n), (nu, nu)).copy_from(gen.s());
    let mut z0 = DVector::zeros(n + nu);
    z0.rows_mut(0, n).copy_from(x0);
    z0.rows_mut(n, nu).copy_from(gen.omega0());
    let states = run_autonomous(aug, z0, grid, integrator);
    let times = grid.times();
    let p = sys.outputs();
    let y_data = DMatrix::from_fn(states.len(), p, |i, j| {
        sys.c.row(j).dot(&states[i].rows(0, n).transpose())
    });
    let y = Trajectory::new(times.clone(), y_data)?;
    let omega = collect_rows(times, &states, n, nu);
    Ok((y, omega))
}

/// Simulate the swapped interconnection under the impulse protocol:
/// the Dirac input `u = e_j d0(t)` with `x(0) = 0` is realised as the
/// state jump `x(0+) = B e_j`, after which `x' = Ax` and the filter
/// integrates `varpi' = Q varpi + R C x` from `varpi(0) = 0`.
pub fn simulate_filtered_impulse(
    sys: &StateSpace,
    filt: &SwappedFilter,
    input_index: usize,
    grid: &TimeGrid,
    integrator: Integrator,
) -> Result<Trajectory> {
    let (n, m, p, nu) = (sys.order(), sys.inputs(), sys.outputs(), filt.order());
    if input_index >= m {
        return Err(Error::InputIndexOutOfRange {
            index: input_index,
            inputs: m,
        });
    }
    if filt.r().ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "filter direction matrix R",
            expected: format!("{p} cols"),
            found: format!("{} cols", filt.r().ncols()),
        });
    }
    sys.assert_stable()?;
    let mut aug = DMatrix::<f64>::zeros(n + nu, n + nu);
    aug.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    aug.view_mut((n, 0), (nu, n)).copy_from(&(filt.r() * &sys.c));
    aug.view_mut((n, n), (nu, nu)).copy_from(filt.q());
    let mut z0 = DVector::zeros(n + nu);
    z0.rows_mut(0, n).copy_from(&sys.b.column(input_index).into_owned());
    let states = run_autonomous(aug, z0, grid, integrator);
    Ok(collect_rows(grid.times(), &states, n, nu))
}

/// State trajectories of the two-sided interconnection: the plant is
/// driven by the generator while its output feeds the swapped filter.
pub struct TwoSidedRun {
    pub x: Trajectory,
    pub y: Trajectory,
    pub omega: Trajectory,
    pub varpi: Trajectory,
}

/// Simulate `x' = Ax + B L w`, `w' = S w`, `varpi' = Q varpi + R C x`
/// with `varpi(0) = 0` by exact exponential stepping.
pub fn simulate_two_sided(
    sys: &StateSpace,
    gen: &SignalGenerator,
    filt: &SwappedFilter,
    x0: &DVector<f64>,
    grid: &TimeGrid,
    integrator: Integrator,
) -> Result<TwoSidedRun> {
    let (n, m, p) = (sys.order(), sys.inputs(), sys.outputs());
    let (nu_r, nu_l) = (gen.order(), filt.order());
    if gen.l().nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "generator direction matrix L",
            expected: format!("{m} rows"),
            found: format!("{} rows", gen.l().nrows()),
        });
    }
    if filt.r().ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "filter direction matrix R",
            expected: format!("{p} cols"),
            found: format!("{} cols", filt.r().ncols()),
        });
    }
    let dim = n + nu_r + nu_l;
    let mut aug = DMatrix::<f64>::zeros(dim, dim);
    aug.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    aug.view_mut((0, n), (n, nu_r)).copy_from(&(&sys.b * gen.l()));
    aug.view_mut((n, n), (nu_r, nu_r)).copy_from(gen.s());
    aug.view_mut((n + nu_r, 0), (nu_l, n))
        .copy_from(&(filt.r() * &sys.c));
    aug.view_mut((n + nu_r, n + nu_r), (nu_l, nu_l))
        .copy_from(filt.q());
    let mut z0 = DVector::zeros(dim);
    z0.rows_mut(0, n).copy_from(x0);
    z0.rows_mut(n, nu_r).copy_from(gen.omega0());
    let states = run_autonomous(aug, z0, grid, integrator);
    let times = grid.times();
    let x = collect_rows(times.clone(), &states, 0, n);
    let y_data = x.data() * sys.c.transpose();
    let y = Trajectory::new(times.clone(), y_data)?;
    let omega = collect_rows(times.clone(), &states, n, nu_r);
    let varpi = collect_rows(times, &states, n + nu_r, nu_l);
    Ok(TwoSidedRun { x, y, omega, varpi })
}

//! Interpolation design: signal generator (S, L, w0) and swapped filter
//! (Q, R) in a real block-diagonal realisation with closed-form
//! exponentials.
//!
//! Each frequency w > 0 contributes a 2x2 rotation block
//! [[0, w], [-w, 0]] (eigenvalues +-iw); w = 0 contributes a 1x1 zero
//! block. All data stays real.

use std::path::Path;

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One diagonal block of S or Q. The rotation frequency is signed so
/// that transposed structures (blocks of Q^T) reuse the same machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Block {
    /// 2x2 block [[0, w], [-w, 0]].
    Pair(f64),
    /// 1x1 zero block.
    Zero,
}

impl Block {
    pub fn dim(&self) -> usize {
        match self {
            Block::Pair(_) => 2,
            Block::Zero => 1,
        }
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        match self {
            Block::Pair(w) => vec![Complex64::new(0.0, *w), Complex64::new(0.0, -*w)],
            Block::Zero => vec![Complex64::new(0.0, 0.0)],
        }
    }

    pub fn transposed(&self) -> Block {
        match self {
            Block::Pair(w) => Block::Pair(-*w),
            Block::Zero => Block::Zero,
        }
    }
}

fn blocks_from_freqs(freqs: &[f64]) -> Result<Vec<Block>> {
    if freqs.is_empty() {
        return Err(Error::InvalidArgument("frequency set must not be empty".into()));
    }
    for (i, &f) in freqs.iter().enumerate() {
        if !(f >= 0.0) || !f.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "frequency {f} at index {i} must be finite and nonnegative"
            )));
        }
        for &g in &freqs[..i] {
            if f == g {
                return Err(Error::InvalidArgument(format!("duplicate frequency {f}")));
            }
        }
    }
    Ok(freqs
        .iter()
        .map(|&f| if f == 0.0 { Block::Zero } else { Block::Pair(f) })
        .collect())
}

fn block_diag(blocks: &[Block]) -> DMatrix<f64> {
    let nu: usize = blocks.iter().map(Block::dim).sum();
    let mut m = DMatrix::zeros(nu, nu);
    let mut off = 0;
    for b in blocks {
        if let Block::Pair(w) = b {
            m[(off, off + 1)] = *w;
            m[(off + 1, off)] = -*w;
        }
        off += b.dim();
    }
    m
}

/// Recover the block structure of a matrix built by [`block_diag`].
pub fn detect_blocks(m: &DMatrix<f64>) -> Result<Vec<Block>> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotBlockDiagonal { row: 0 });
    }
    let n = m.nrows();
    let off_block_ok = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| {
        rows.clone().all(|i| cols.clone().all(|j| m[(i, j)] == 0.0))
    };
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        let pair = i + 1 < n && m[(i, i + 1)] != 0.0;
        if pair {
            let w = m[(i, i + 1)];
            if m[(i + 1, i)] != -w || m[(i, i)] != 0.0 || m[(i + 1, i + 1)] != 0.0 {
                return Err(Error::NotBlockDiagonal { row: i });
            }
            if !off_block_ok(i..i + 2, 0..i) || !off_block_ok(i..i + 2, i + 2..n)
                || !off_block_ok(0..i, i..i + 2) || !off_block_ok(i + 2..n, i..i + 2)
            {
                return Err(Error::NotBlockDiagonal { row: i });
            }
            blocks.push(Block::Pair(w));
            i += 2;
        } else {
            if m[(i, i)] != 0.0
                || !off_block_ok(i..i + 1, 0..i)
                || !off_block_ok(i..i + 1, i + 1..n)
                || !off_block_ok(0..i, i..i + 1)
                || !off_block_ok(i + 1..n, i..i + 1)
            {
                return Err(Error::NotBlockDiagonal { row: i });
            }
            blocks.push(Block::Zero);
            i += 1;
        }
    }
    Ok(blocks)
}

/// Closed-form exponential e^{Mt} of a block-diagonal rotation/zero
/// matrix: [[cos wt, sin wt], [-sin wt, cos wt]] per pair block, 1 per
/// zero block. Orthogonal by construction.
pub fn exact_exp(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let blocks = detect_blocks(m)?;
    Ok(exact_exp_blocks(&blocks, t))
}

pub fn exact_exp_blocks(blocks: &[Block], t: f64) -> DMatrix<f64> {
    let nu: usize = blocks.iter().map(Block::dim).sum();
    let mut e = DMatrix::zeros(nu, nu);
    let mut off = 0;
    for b in blocks {
        match b {
            Block::Pair(w) => {
                let (s, c) = (w * t).sin_cos();
                e[(off, off)] = c;
                e[(off, off + 1)] = s;
                e[(off + 1, off)] = -s;
                e[(off + 1, off + 1)] = c;
            }
            Block::Zero => e[(off, off)] = 1.0,
        }
        off += b.dim();
    }
    e
}

/// Signal generator `w' = S w`, `u = L w` driving the direct
/// interconnection.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalGenerator {
    freqs: Vec<f64>,
    blocks: Vec<Block>,
    s: DMatrix<f64>,
    l: DMatrix<f64>,
    omega0: DVector<f64>,
}

impl SignalGenerator {
    /// Construct from an explicit direction matrix (one column per real
    /// coordinate of S). Observability of (S, L) and excitability of
    /// (S, w0) are rank-checked; construction is rejected otherwise.
    pub fn from_parts(freqs: &[f64], l: DMatrix<f64>, omega0: Option<DVector<f64>>) -> Result<Self> {
        let blocks = blocks_from_freqs(freqs)?;
        let nu: usize = blocks.iter().map(Block::dim).sum();
        if l.ncols() != nu {
            return Err(Error::DimensionMismatch {
                context: "generator L",
                expected: format!("{nu} cols"),
                found: format!("{} cols", l.ncols()),
            });
        }
        if l.norm() == 0.0 {
            return Err(Error::InvalidArgument("direction matrix L must be nonzero".into()));
        }
        let s = block_diag(&blocks);
        let omega0 = omega0.unwrap_or_else(|| DVector::from_element(nu, 1.0));
        if omega0.len() != nu {
            return Err(Error::DimensionMismatch {
                context: "omega0",
                expected: format!("{nu}"),
                found: format!("{}", omega0.len()),
            });
        }
        // Observability of (S, L) and excitability of (S, omega0) by the
        // eigenvector test: S has simple eigenvalues, one conjugate pair
        // (or real mode) per block, so the pair is observable iff every
        // block sees a nonzero slice of L, and excitable iff every block
        // sees a nonzero slice of omega0. This is exact where a Krylov
        // rank test loses the small-frequency blocks to the w^(nu-1)
        // dynamic range.
        let l_tol = 1e-12 * l.norm();
        let w_tol = 1e-12 * omega0.norm();
        let mut off = 0;
        for b in &blocks {
            let d = b.dim();
            if l.view((0, off), (l.nrows(), d)).norm() <= l_tol {
                return Err(Error::RankDeficient {
                    context: "observability of (S, L)",
                    rank: nu - d,
                    required: nu,
                });
            }
            if omega0.rows(off, d).norm() <= w_tol {
                return Err(Error::RankDeficient {
                    context: "excitability of (S, omega0)",
                    rank: nu - d,
                    required: nu,
                });
            }
            off += d;
        }
        Ok(SignalGenerator {
            freqs: freqs.to_vec(),
            blocks,
            s,
            l,
            omega0,
        })
    }

    pub fn order(&self) -> usize {
        self.s.nrows()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn omega0(&self) -> &DVector<f64> {
        &self.omega0
    }

    /// e^{St} in closed form.
    pub fn exp(&self, t: f64) -> DMatrix<f64> {
        exact_exp_blocks(&self.blocks, t)
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.blocks.iter().flat_map(|b| b.eigenvalues()).collect()
    }

    /// Right interpolation points s_i with their tangential directions:
    /// one (iw, l) pair per frequency (the conjugate is implied).
    pub fn points(&self) -> Vec<(Complex64, DVector<f64>)> {
        let mut out = Vec::new();
        let mut off = 0;
        for b in &self.blocks {
            match b {
                Block::Pair(w) => {
                    out.push((Complex64::new(0.0, *w), self.l.column(off).into_owned()));
                }
                Block::Zero => {
                    out.push((Complex64::new(0.0, 0.0), self.l.column(off).into_owned()));
                }
            }
            off += b.dim();
        }
        out
    }
}

/// Swapped filter `varpi' = Q varpi + R y` applied to output impulse
/// responses.
#[derive(Debug, Clone, PartialEq)]
pub struct SwappedFilter {
    freqs: Vec<f64>,
    blocks: Vec<Block>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl SwappedFilter {
    pub fn from_parts(freqs: &[f64], r: DMatrix<f64>) -> Result<Self> {
        let blocks = blocks_from_freqs(freqs)?;
        let nu: usize = blocks.iter().map(Block::dim).sum();
        if r.nrows() != nu {
            return Err(Error::DimensionMismatch {
                context: "filter R",
                expected: format!("{nu} rows"),
                found: format!("{} rows", r.nrows()),
            });
        }
        if r.norm() == 0.0 {
            return Err(Error::InvalidArgument("direction matrix R must be nonzero".into()));
        }
        let q = block_diag(&blocks);
        // reachability of (Q, R) by the same per-block eigenvector test
        let r_tol = 1e-12 * r.norm();
        let mut off = 0;
        for b in &blocks {
            let d = b.dim();
            if r.view((off, 0), (d, r.ncols())).norm() <= r_tol {
                return Err(Error::RankDeficient {
                    context: "reachability of (Q, R)",
                    rank: nu - d,
                    required: nu,
                });
            }
            off += d;
        }
        Ok(SwappedFilter {
            freqs: freqs.to_vec(),
            blocks,
            q,
            r,
        })
    }

    pub fn order(&self) -> usize {
        self.q.nrows()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// e^{Qt} in closed form.
    pub fn exp(&self, t: f64) -> DMatrix<f64> {
        exact_exp_blocks(&self.blocks, t)
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.blocks.iter().flat_map(|b| b.eigenvalues()).collect()
    }

    /// Left interpolation points q_i with their tangential rows.
    pub fn points(&self) -> Vec<(Complex64, RowDVector<f64>)> {
        let mut out = Vec::new();
        let mut off = 0;
        for b in &self.blocks {
            let w = match b {
                Block::Pair(w) => *w,
                Block::Zero => 0.0,
            };
            out.push((Complex64::new(0.0, w), self.r.row(off).into_owned()));
            off += b.dim();
        }
        out
    }
}

/// Constant-direction construction: every interpolation point gets the
/// same right tangential direction `l`.
pub fn build_generator(
    freqs: &[f64],
    l: &DVector<f64>,
    omega0: Option<DVector<f64>>,
) -> Result<SignalGenerator> {
    if l.norm() == 0.0 {
        return Err(Error::InvalidArgument("tangential direction l must be nonzero".into()));
    }
    let blocks = blocks_from_freqs(freqs)?;
    let nu: usize = blocks.iter().map(Block::dim).sum();
    let mut lmat = DMatrix::zeros(l.len(), nu);
    for j in 0..nu {
        lmat.set_column(j, l);
    }
    SignalGenerator::from_parts(freqs, lmat, omega0)
}

/// Constant-direction construction for the left side.
pub fn build_filter(freqs: &[f64], r: &RowDVector<f64>) -> Result<SwappedFilter> {
    if r.norm() == 0.0 {
        return Err(Error::InvalidArgument("tangential direction r must be nonzero".into()));
    }
    let blocks = blocks_from_freqs(freqs)?;
    let nu: usize = blocks.iter().map(Block::dim).sum();
    let mut rmat = DMatrix::zeros(nu, r.len());
    for i in 0..nu {
        rmat.set_row(i, r);
    }
    SwappedFilter::from_parts(freqs, rmat)
}

/// Check that the generator and filter interpolate at disjoint
/// frequency sets, as required for two-sided use.
pub fn assert_disjoint(gen: &SignalGenerator, filt: &SwappedFilter) -> Result<()> {
    for &f in gen.freqs() {
        for &g in filt.freqs() {
            if (f - g).abs() <= 1e-12 * f.abs().max(g.abs()).max(1.0) {
                return Err(Error::SpectrumOverlap {
                    value: Complex64::new(0.0, f),
                });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Design file (JSON)

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SideSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freqs_rad_s: Option<Vec<f64>>,
    /// Accepted alternative; converted by 2*pi.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freqs_hz: Option<Vec<f64>>,
    pub direction: Vec<f64>,
}

impl SideSpec {
    pub fn freqs_rad(&self) -> Result<Vec<f64>> {
        match (&self.freqs_rad_s, &self.freqs_hz) {
            (Some(r), None) => Ok(r.clone()),
            (None, Some(h)) => Ok(h.iter().map(|f| f * std::f64::consts::TAU).collect()),
            (Some(_), Some(_)) => Err(Error::InvalidArgument(
                "give either freqs_rad_s or freqs_hz, not both".into(),
            )),
            (None, None) => Err(Error::InvalidArgument(
                "missing freqs_rad_s (or freqs_hz)".into(),
            )),
        }
    }
}

/// On-disk interpolation design:
/// `{ "right": {"freqs_rad_s": [...], "direction": [...]},
///    "left":  {"freqs_rad_s": [...], "direction": [...]},
///    "omega0": [...] }`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignFile {
    pub right: SideSpec,
    pub left: SideSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0: Option<Vec<f64>>,
}

impl DesignFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Build the generator/filter pair and verify spectrum disjointness.
    pub fn build(&self) -> Result<(SignalGenerator, SwappedFilter)> {
        let gen = build_generator(
            &self.right.freqs_rad()?,
            &DVector::from_vec(self.right.direction.clone()),
            self.omega0.as_ref().map(|v| DVector::from_vec(v.clone())),
        )?;
        let filt = build_filter(
            &self.left.freqs_rad()?,
            &RowDVector::from_vec(self.left.direction.clone()),
        )?;
        assert_disjoint(&gen, &filt)?;
        Ok((gen, filt))
    }
}

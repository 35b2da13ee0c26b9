//! File formats: the named-matrix container, trajectory CSV, and the
//! CSV emitters for frequency-response and spectrum data.
//!
//! Matrix container (plain text):
//! ```text
//! # optional comment lines
//! matrix A 2 2
//! -1.0 0.0
//! 0.0 -2.0
//! matrix B 2 1
//! 1.0
//! 0.0
//! ```
//! One `matrix NAME rows cols` header per block, rows written in order,
//! whitespace-separated, full double precision.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::{SignalGenerator, SwappedFilter};
use crate::error::{Error, Result};
use crate::estimation::MatrixJson;
use crate::lti::{StateSpace, Trajectory};
use crate::rom::{ReducedModel, RomDiagnostics, RomKind};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Write named matrices to a container file.
pub fn write_matrices(path: &Path, entries: &[(&str, &DMatrix<f64>)]) -> Result<()> {
    let mut out = String::new();
    for (name, m) in entries {
        writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols()).unwrap();
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Read every named matrix from a container file, in file order.
pub fn read_matrices(path: &Path) -> Result<Vec<(String, DMatrix<f64>)>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let mut out = Vec::new();
    while let Some(header) = lines.next() {
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "matrix" {
            return Err(parse_err(path, format!("expected 'matrix NAME rows cols', got '{header}'")));
        }
        let name = parts[1].to_string();
        let rows: usize = parts[2]
            .parse()
            .map_err(|_| parse_err(path, format!("bad row count in '{header}'")))?;
        let cols: usize = parts[3]
            .parse()
            .map_err(|_| parse_err(path, format!("bad column count in '{header}'")))?;
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| parse_err(path, format!("matrix {name}: missing row {r}")))?;
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(path, format!("matrix {name}: bad value '{tok}'")))?;
                data.push(v);
            }
            if data.len() != (r + 1) * cols {
                return Err(parse_err(
                    path,
                    format!("matrix {name}: row {r} has wrong length"),
                ));
            }
        }
        out.push((name, DMatrix::from_row_slice(rows, cols, &data)));
    }
    Ok(out)
}

fn find_matrix<'a>(
    entries: &'a [(String, DMatrix<f64>)],
    name: &str,
    path: &Path,
) -> Result<&'a DMatrix<f64>> {
    entries
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, m)| m)
        .ok_or_else(|| parse_err(path, format!("missing matrix '{name}'")))
}

/// Save a full-order model as matrices A, B, C.
pub fn save_statespace(path: &Path, sys: &StateSpace) -> Result<()> {
    write_matrices(path, &[("A", sys.a()), ("B", sys.b()), ("C", sys.c())])
}

pub fn load_statespace(path: &Path) -> Result<StateSpace> {
    let entries = read_matrices(path)?;
    StateSpace::new(
        find_matrix(&entries, "A", path)?.clone(),
        find_matrix(&entries, "B", path)?.clone(),
        find_matrix(&entries, "C", path)?.clone(),
    )
}

/// Load either a full-order file (A, B, C) or a reduced file (F, G, H)
/// as a plain state-space model.
pub fn load_model(path: &Path) -> Result<StateSpace> {
    let entries = read_matrices(path)?;
    let triple = if entries.iter().any(|(n, _)| n == "A") {
        ("A", "B", "C")
    } else {
        ("F", "G", "H")
    };
    StateSpace::new(
        find_matrix(&entries, triple.0, path)?.clone(),
        find_matrix(&entries, triple.1, path)?.clone(),
        find_matrix(&entries, triple.2, path)?.clone(),
    )
}

/// Interpolation data and diagnostics stored next to a reduced model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RomMetadata {
    pub kind: RomKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right_freqs_rad_s: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right_directions: Option<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left_freqs_rad_s: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left_directions: Option<MatrixJson>,
    pub diagnostics: RomDiagnostics,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    path.with_file_name(name)
}

/// Save a reduced model: F, G, H in the matrix container plus a
/// `<file>.json` metadata sidecar.
pub fn save_rom(path: &Path, rom: &ReducedModel) -> Result<()> {
    write_matrices(path, &[("F", &rom.f), ("G", &rom.g), ("H", &rom.h)])?;
    let meta = RomMetadata {
        kind: rom.kind,
        right_freqs_rad_s: rom.right.as_ref().map(|g| g.freqs().to_vec()),
        right_directions: rom.right.as_ref().map(|g| MatrixJson::from_matrix(g.l())),
        left_freqs_rad_s: rom.left.as_ref().map(|f| f.freqs().to_vec()),
        left_directions: rom.left.as_ref().map(|f| MatrixJson::from_matrix(f.r())),
        diagnostics: rom.diagnostics.clone(),
    };
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&meta)?;
    std::fs::write(&side, text).map_err(io_err(&side))
}

pub fn load_rom(path: &Path) -> Result<ReducedModel> {
    let entries = read_matrices(path)?;
    let f = find_matrix(&entries, "F", path)?.clone();
    let g = find_matrix(&entries, "G", path)?.clone();
    let h = find_matrix(&entries, "H", path)?.clone();
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(io_err(&side))?;
    let meta: RomMetadata = serde_json::from_str(&text)?;
    let right = match (&meta.right_freqs_rad_s, &meta.right_directions) {
        (Some(freqs), Some(l)) => Some(SignalGenerator::from_parts(freqs, l.to_matrix()?, None)?),
        _ => None,
    };
    let left = match (&meta.left_freqs_rad_s, &meta.left_directions) {
        (Some(freqs), Some(r)) => Some(SwappedFilter::from_parts(freqs, r.to_matrix()?)?),
        _ => None,
    };
    Ok(ReducedModel {
        f,
        g,
        h,
        kind: meta.kind,
        right,
        left,
        diagnostics: meta.diagnostics,
    })
}

/// Write a trajectory as CSV `t,ch0,ch1,...` at full double precision.
pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = String::new();
    let chans = traj.channel_count();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..chans).map(|c| format!("ch{c}")))
        .collect();
    writeln!(out, "{}", header.join(",")).unwrap();
    for (i, &t) in traj.times().iter().enumerate() {
        let mut row = vec![format!("{t:.17e}")];
        for c in 0..chans {
            row.push(format!("{:.17e}", traj.data()[(i, c)]));
        }
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    std::fs::write(path, out).map_err(io_err(path))
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "empty trajectory file"))?;
    let cols = header.split(',').count();
    if cols < 2 || !header.starts_with('t') {
        return Err(parse_err(path, "expected header 't,ch0,...'"));
    }
    let chans = cols - 1;
    let mut times = Vec::new();
    let mut data = Vec::new();
    for (ln, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(parse_err(path, format!("row {ln}: expected {cols} fields")));
        }
        let mut vals = fields.iter().map(|f| f.trim().parse::<f64>());
        let t = vals
            .next()
            .unwrap()
            .map_err(|_| parse_err(path, format!("row {ln}: bad time value")))?;
        times.push(t);
        for v in vals {
            data.push(v.map_err(|_| parse_err(path, format!("row {ln}: bad sample value")))?);
        }
    }
    let n = times.len();
    Trajectory::new(times, DMatrix::from_row_slice(n, chans, &data))
}

/// Write Bode data as CSV `freq_rad_s,mag_db_11,phase_deg_11,...` with
/// one magnitude/phase column pair per transfer-matrix entry (row-major
/// over outputs x inputs, 1-based labels).
pub fn save_bode_csv(path: &Path, bode: &crate::oracle::BodeData) -> Result<()> {
    let mut out = String::new();
    let mut header = vec!["freq_rad_s".to_string()];
    for i in 0..bode.outputs {
        for j in 0..bode.inputs {
            header.push(format!("mag_db_{}{}", i + 1, j + 1));
            header.push(format!("phase_deg_{}{}", i + 1, j + 1));
        }
    }
    writeln!(out, "{}", header.join(",")).unwrap();
    for (k, &f) in bode.freqs.iter().enumerate() {
        let mut row = vec![format!("{f:.17e}")];
        for e in 0..bode.outputs * bode.inputs {
            row.push(format!("{:.17e}", bode.mag_db[k][e]));
            row.push(format!("{:.17e}", bode.phase_deg[k][e]));
        }
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Write eigenvalues as CSV `re,im`, sorted as produced.
pub fn save_spectrum_csv(path: &Path, eigs: &[num_complex::Complex64]) -> Result<()> {
    let mut out = String::from("re,im\n");
    for e in eigs {
        writeln!(out, "{:.17e},{:.17e}", e.re, e.im).unwrap();
    }
    std::fs::write(path, out).map_err(io_err(path))
}
